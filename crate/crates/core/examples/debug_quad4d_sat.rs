use std::collections::BTreeMap;
use std::time::Instant;

use fastrack::grid::Grid;
use fastrack::hjsolver::{solve_hjvi, SolverConfig};
use fastrack::relsys::make_model;
use fastrack::teb::{simulate_relative, RelativeInputs, SingleTeb, TebQuery};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let horizon: f64 = args[0].parse().unwrap();
    let lo: Vec<f64> = args[1].split(',').map(|s| s.parse().unwrap()).collect();
    let hi: Vec<f64> = args[2].split(',').map(|s| s.parse().unwrap()).collect();
    let m = make_model("quad10d_int3d", &BTreeMap::new()).unwrap();
    let sub = &m.decomposition.as_ref().unwrap()[0];
    let grid = Grid::from_bounds(&lo, &hi, &[31, 31, 21, 21], &[false; 4]).unwrap();
    let mut cfg = SolverConfig::new(horizon);
    cfg.snapshots = 13;
    let t0 = Instant::now();
    let vf = solve_hjvi(&sub.relative, &grid, &cfg).unwrap();
    print!(
        "domain {:?}: conv={} horizon={:.2} v_min={:.4} wall={:?} | trusted v_min(tau): ",
        lo,
        vf.converged(),
        vf.horizon(),
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
        print!("{:.1}:{best:.3} ", vf.times()[k]);
    }
    println!();

    // Closed-loop rollout from the minimizer: running max of l under the
    // grid-optimal tracker vs the grid-worst adversary.
    let src = SingleTeb::new(&vf, &sub.relative, TebQuery::new(0.0).unwrap());
    let mut c = [0.0; 4];
    vf.grid().node_coords(vf.argmin(), &mut c);
    for (label, inputs) in [
        ("adversarial", RelativeInputs::Adversarial),
        ("random", RelativeInputs::Random { seed: 3 }),
    ] {
        if let Ok(trace) = simulate_relative(&src, &c, 0.005, 4000, inputs) {
            let peak_l = trace
                .iter()
                .map(|s| sub.relative.error(&s.state))
                .fold(0.0f64, f64::max);
            let peak_x = trace
                .iter()
                .map(|s| s.state[0].abs())
                .fold(0.0f64, f64::max);
            println!("  rollout {label}: running-max l = {peak_l:.4}, |x_r| peak {peak_x:.3}");
        }
    }
}
