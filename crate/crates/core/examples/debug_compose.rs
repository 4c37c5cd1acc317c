use std::collections::BTreeMap;
use std::time::Instant;

use fastrack::grid::{Grid, MAX_DIMS};
use fastrack::hjsolver::{solve_decomposed, solve_hjvi, SolverConfig};
use fastrack::relsys::{make_model, product_pair};

fn main() {
    let m1 = make_model("rel1d", &BTreeMap::new()).unwrap();
    let pair = product_pair("rel1d_x2", &[&m1, &m1]).unwrap();
    let grid2 =
        Grid::from_bounds(&[-1.0, -1.0], &[1.0, 1.0], &[101, 101], &[false, false]).unwrap();
    let grid1 = Grid::from_bounds(&[-1.0], &[1.0], &[101], &[false]).unwrap();
    let cfg = SolverConfig::new(10.0);
    let t0 = Instant::now();
    let full = solve_hjvi(&pair.relative, &grid2, &cfg).unwrap();
    let t_full = t0.elapsed();
    let subs = pair.decomposition.as_ref().unwrap();
    let t0 = Instant::now();
    let dec = solve_decomposed(subs, &[grid1.clone(), grid1], &cfg).unwrap();
    let t_dec = t0.elapsed();
    println!(
        "full: converged={} v_min={:.6}; dec v_min={:.6}; walls {:?} {:?}",
        full.converged(),
        full.v_min(),
        dec.v_min(),
        t_full,
        t_dec
    );
    let mut worst = 0.0f64;
    let mut worst_at = [0.0, 0.0];
    let mut omax = 0.0f64;
    let last = full.snapshots().last().unwrap();
    for (flat, &v) in last.values().iter().enumerate() {
        let mut c = [0.0; MAX_DIMS];
        grid2.node_coords(flat, &mut c[..2]);
        let composed = dec.value_at_time(&c[..2], full.times().last().copied().unwrap()).unwrap();
        omax = omax.max(composed.abs());
        let e = (v - composed).abs();
        if e > worst {
            worst = e;
            worst_at = [c[0], c[1]];
        }
    }
    println!(
        "compose err_inf={:.5} rel={:.3}% at {:?}",
        worst,
        100.0 * worst / omax,
        worst_at
    );
}
