use std::collections::BTreeMap;
use fastrack::grid::Grid;
use fastrack::hjsolver::{solve_hjvi, SolverConfig};
use fastrack::relsys::make_model;
use fastrack::teb::{simulate_relative, RelativeInputs, SingleTeb, TebQuery};

fn main() {
    let mut o = BTreeMap::new();
    o.insert("u_max".to_string(), 0.5);
    let m = make_model("rel1d", &o).unwrap();
    let grid = Grid::from_bounds(&[-2.0], &[2.0], &[401], &[false]).unwrap();
    let mut cfg = SolverConfig::new(2.0);
    cfg.snapshots = 9;
    let vf = solve_hjvi(&m.relative, &grid, &cfg).unwrap();
    let src = SingleTeb::new(&vf, &m.relative, TebQuery::new(1e-3).unwrap());
    for (label, inputs) in [
        ("adv", RelativeInputs::Adversarial),
        ("rnd", RelativeInputs::Random { seed: 7 }),
    ] {
        let trace = simulate_relative(&src, &[0.2], 0.01, 100, inputs).unwrap();
        let count = trace
            .windows(2)
            .filter(|w| match (w[0].smallest_tau, w[1].smallest_tau) {
                (Some(a), Some(b)) => b <= a + 1e-12,
                _ => false,
            })
            .count();
        let nones = trace.iter().filter(|s| s.smallest_tau.is_none()).count();
        println!(
            "{label}: count={count} nones={nones} r_end={:?} taus: {:?}",
            trace.last().unwrap().state,
            trace.iter().step_by(10).map(|s| s.smallest_tau).collect::<Vec<_>>()
        );
    }
}
