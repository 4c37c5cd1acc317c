use std::collections::BTreeMap;
use std::time::Instant;

use fastrack::grid::Grid;
use fastrack::hjsolver::{solve_hjvi, SolverConfig};
use fastrack::relsys::make_model;
use fastrack::teb::{teb_extents, TebQuery};

fn main() {
    let filter: Vec<String> = std::env::args().skip(1).collect();
    let m = make_model("quad10d_int3d", &BTreeMap::new()).unwrap();
    let sub = &m.decomposition.as_ref().unwrap()[0];
    let cases: Vec<(&str, Vec<f64>, Vec<f64>, Vec<usize>)> = vec![
        (
            "default",
            vec![-2.0, -2.0, -0.6109, -4.0],
            vec![2.0, 2.0, 0.6109, 4.0],
            vec![31, 31, 21, 21],
        ),
        (
            "tight",
            vec![-1.5, -1.5, -0.45, -2.5],
            vec![1.5, 1.5, 0.45, 2.5],
            vec![31, 31, 21, 21],
        ),
        (
            "fine-att",
            vec![-2.0, -2.0, -0.6109, -4.0],
            vec![2.0, 2.0, 0.6109, 4.0],
            vec![31, 31, 41, 41],
        ),
    ];
    for (label, lo, hi, nodes) in cases {
        if !filter.is_empty() && !filter.iter().any(|f| f == label) {
            continue;
        }
        let grid = Grid::from_bounds(&lo, &hi, &nodes, &[false; 4]).unwrap();
        let mut cfg = SolverConfig::new(3.0);
        cfg.snapshots = 7;
        let t0 = Instant::now();
        let vf = solve_hjvi(&sub.relative, &grid, &cfg).unwrap();
        print!(
            "{label}: conv={} v_min={:.4} wall={:?} | v_min(tau): ",
            vf.converged(),
            vf.v_min(),
            t0.elapsed()
        );
        for (k, snap) in vf.snapshots().iter().enumerate() {
            let mut best = f64::INFINITY;
            for (flat, &v) in snap.values().iter().enumerate() {
                if vf.is_trusted(flat) && v < best {
                    best = v;
                }
            }
            print!("{:.2}:{best:.3} ", vf.times()[k]);
        }
        let q = TebQuery::new(vf.eps_default()).unwrap();
        match teb_extents(&vf, &sub.relative, 0.0, &q) {
            Ok(e) => println!("| extent={:.3}", e.half_widths[0]),
            Err(err) => println!("| extent err {err}"),
        }
    }
}
