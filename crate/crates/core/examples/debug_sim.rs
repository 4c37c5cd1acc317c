use std::collections::BTreeMap;

use fastrack::grid::Grid;
use fastrack::hjsolver::{solve_hjvi, SolverConfig};
use fastrack::planning::{GridPlanner, MotionModel};
use fastrack::relsys::{make_model, BoxSet};
use fastrack::sim::{run_online, DisturbancePolicy, HybridConfig, Scenario};
use fastrack::teb::{SingleTeb, TebQuery, TebSource};
use fastrack::world::{Environment, SensorModel};

fn main() {
    let m = make_model("rel1d", &BTreeMap::new()).unwrap();
    let grid = Grid::from_bounds(&[-1.0], &[1.0], &[201], &[false]).unwrap();
    let cfg = SolverConfig::new(4.0);
    let vf = solve_hjvi(&m.relative, &grid, &cfg).unwrap();
    println!(
        "converged={} v_min={} eps_default={} times={:?}",
        vf.converged(),
        vf.v_min(),
        vf.eps_default(),
        vf.times()
    );
    let src = SingleTeb::new(&vf, &m.relative, TebQuery::new(0.01).unwrap());
    let ext = src.extents(0.0).unwrap();
    println!("extent = {:?} level={}", ext.half_widths, src.level());

    let env = Environment {
        bounds: BoxSet::new(vec![-5.0], vec![5.0]).unwrap(),
        goal: BoxSet::new(vec![1.3], vec![1.7]).unwrap(),
        obstacles: vec![],
        sensor: SensorModel::Radial { radius: 2.0 },
    };
    let mut planner = GridPlanner::new(
        MotionModel::Integrator {
            control_set: m.planning.control_set.clone(),
        },
        0.05,
        None,
    );
    let scenario = Scenario {
        env: &env,
        initial_tracking: vec![0.0],
        dt: 0.05,
        max_steps: 300,
        policy: DisturbancePolicy::UniformRandom { seed: 5 },
        hybrid: HybridConfig::default(),
        time_varying: false,
        lookahead_steps: 8,
        allow_undersized_sensor: false,
    };
    match run_online(&m, &src, &mut planner, &scenario) {
        Ok(log) => {
            println!("reached={} steps={}", log.reached_goal, log.steps.len());
            for rec in log.steps.iter().step_by(25) {
                println!(
                    "k={} t={:.2} s={:?} p={:?} r={:?} mode={:?} tau={:?} v={:.4}",
                    rec.step, rec.time, rec.tracking, rec.planning, rec.relative, rec.mode, rec.tau, rec.value
                );
            }
        }
        Err(f) => println!("failure: {} partial={}", f.error, f.partial.steps.len()),
    }
}
