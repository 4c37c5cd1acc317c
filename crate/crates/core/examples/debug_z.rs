use std::collections::BTreeMap;

use fastrack::grid::Grid;
use fastrack::hjsolver::{solve_hjvi, Dissipation, SolverConfig};
use fastrack::relsys::make_model;

fn main() {
    let m = make_model("quad10d_int3d", &BTreeMap::new()).unwrap();
    let sub = &m.decomposition.as_ref().unwrap()[2];
    let domains = [2.0f64, 1.0];
    for dom in domains {
    let grid = Grid::from_bounds(&[-dom, -dom], &[dom, dom], &[101, 101], &[false, false]).unwrap();
    println!("== v_z domain +-{dom}");
    for diss in [Dissipation::StencilLocal] {
        for horizon in [30.0] {
            let mut cfg = SolverConfig::new(horizon);
            cfg.snapshots = 5;
            cfg.dissipation = diss;
            let t0 = std::time::Instant::now();
            let vf = solve_hjvi(&sub.relative, &grid, &cfg).unwrap();
            println!(
                "diss={diss:?} T={horizon}: converged={} truncated={} times={:?} v_min={:.5} eps={:.5} wall={:?}",
                vf.converged(),
                vf.truncated(),
                vf.times().len(),
                vf.v_min(),
                vf.eps_default(),
                t0.elapsed()
            );
            // change profile near the end: report max delta between last two snapshots
            if !vf.converged() {
                let n = vf.snapshots().len();
                let a = vf.snapshots()[n - 2].values();
                let b = vf.snapshots()[n - 1].values();
                let dt_span = vf.times()[n - 1] - vf.times()[n - 2];
                let mut max_d = 0.0f64;
                let mut arg = 0;
                for i in 0..a.len() {
                    let d = (b[i] - a[i]).abs();
                    if d > max_d {
                        max_d = d;
                        arg = i;
                    }
                }
                let mut c = [0.0, 0.0];
                vf.grid().node_coords(arg, &mut c);
                println!(
                    "   last-span change {max_d:.6} over {dt_span:.3}s at node {:?} (trusted={})",
                    c,
                    vf.is_trusted(arg)
                );
            }
        }
    }
    }
}
