use std::collections::BTreeMap;
use std::time::Instant;

use fastrack::grid::{Grid, MAX_DIMS};
use fastrack::hjsolver::{solve_hjvi, SolverConfig};
use fastrack::relsys::make_model;
use fastrack::teb::{teb_extents, TebQuery};

fn rel1d(u: f64) -> fastrack::relsys::ModelPair {
    let mut o = BTreeMap::new();
    o.insert("u_max".to_string(), u);
    make_model("rel1d", &o).unwrap()
}

fn main() {
    // Criterion 1: strong tracker vs V = r^2.
    let m = rel1d(1.0);
    let grid = Grid::from_bounds(&[-1.0], &[1.0], &[201], &[false]).unwrap();
    let t0 = Instant::now();
    let cfg = SolverConfig::new(10.0);
    let vf = solve_hjvi(&m.relative, &grid, &cfg).unwrap();
    let mut worst = 0.0f64;
    for (flat, &v) in vf.snapshots().last().unwrap().values().iter().enumerate() {
        let mut c = [0.0; MAX_DIMS];
        grid.node_coords(flat, &mut c[..1]);
        worst = worst.max((v - c[0] * c[0]).abs());
    }
    println!(
        "C1: converged={} tau_c={:.3} err_inf={:.5} rel={:.3}% v_min={:.6} wall={:?}",
        vf.converged(),
        vf.times()[0],
        worst,
        100.0 * worst / 1.0,
        vf.v_min(),
        t0.elapsed()
    );

    // Criterion 2: weak tracker vs (|r| + 0.2 tau)^2.
    let m = rel1d(0.5);
    let grid = Grid::from_bounds(&[-2.0], &[2.0], &[401], &[false]).unwrap();
    let mut cfg = SolverConfig::new(2.0);
    cfg.snapshots = 9;
    let t0 = Instant::now();
    let vf = solve_hjvi(&m.relative, &grid, &cfg).unwrap();
    println!("C2: converged={} wall={:?} v_min={:.6}", vf.converged(), t0.elapsed(), vf.v_min());
    for (k, snap) in vf.snapshots().iter().enumerate() {
        let tau = vf.times()[k];
        let mut worst = 0.0f64;
        let mut worst_tr = 0.0f64;
        let mut omax = 0.0f64;
        for (flat, &v) in snap.values().iter().enumerate() {
            let mut c = [0.0; MAX_DIMS];
            grid.node_coords(flat, &mut c[..1]);
            let oracle = (c[0].abs() + 0.2 * tau).powi(2);
            omax = omax.max(oracle);
            let e = (v - oracle).abs();
            worst = worst.max(e);
            if vf.is_trusted(flat) {
                worst_tr = worst_tr.max(e);
            }
        }
        println!(
            "  tau={tau:.2}: err={:.4} rel_all={:.2}% rel_trusted={:.2}%",
            worst,
            100.0 * worst / omax,
            100.0 * worst_tr / omax
        );
    }
    // Extents vs 0.2 tau.
    let q = TebQuery::new(0.0).unwrap();
    let h = grid.spacing(0);
    for k in 0..vf.times().len() {
        let tau = vf.times()[k];
        match teb_extents(&vf, &m.relative, tau, &q) {
            Ok(e) => println!(
                "  extents tau={tau:.2}: {:.4} vs {:.4} diff_cells={:.2}",
                e.half_widths[0],
                0.2 * tau,
                (e.half_widths[0] - 0.2 * tau).abs() / h
            ),
            Err(err) => println!("  extents tau={tau:.2}: {err}"),
        }
    }
}
