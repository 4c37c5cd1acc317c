//! Real-time planners over the planning model.
//!
//! Both planners implement the same single-step interface: given the current
//! planning state, the augmented obstacle set (one list, or one list per
//! lookahead step when the TEB is time-varying), and the contracted goal,
//! produce the planning state one time step ahead. Both are deterministic
//! state machines: identical inputs (and seed, for the RRT) give identical
//! outputs.

mod grid_planner;
mod rrt;

pub use grid_planner::{GridPlanner, MotionModel};
pub use rrt::RrtPlanner;

use crate::error::{Error, Result};
use crate::relsys::BoxSet;
use crate::world::Obstacle;

/// Augmented obstacles, either one set (converged TEB) or one set per
/// planner lookahead step, outermost last (time-varying TEB).
#[derive(Debug, Clone, PartialEq)]
pub enum AugmentedSets {
    Constant(Vec<Obstacle>),
    PerStep(Vec<Vec<Obstacle>>),
}

impl AugmentedSets {
    /// Obstacles in effect `k` steps into the plan.
    pub fn at_step(&self, k: usize) -> &[Obstacle] {
        match self {
            AugmentedSets::Constant(v) => v,
            AugmentedSets::PerStep(steps) => &steps[k.min(steps.len() - 1)],
        }
    }

    /// The outermost (most conservative) set.
    pub fn outermost(&self) -> &[Obstacle] {
        match self {
            AugmentedSets::Constant(v) => v,
            AugmentedSets::PerStep(steps) => steps.last().map(|v| &v[..]).unwrap_or(&[]),
        }
    }

    pub fn violates(&self, k: usize, p: &[f64]) -> bool {
        self.at_step(k).iter().any(|o| o.contains(p))
    }
}

/// Inputs to one planning step.
pub struct PlannerInput<'a> {
    pub state: &'a [f64],
    pub obstacles: &'a AugmentedSets,
    /// Goal box (already contracted by the TEB), full planning rank.
    pub goal: &'a BoxSet,
    /// World bounds, full planning rank.
    pub bounds: &'a BoxSet,
    pub dt: f64,
}

/// Next planning state, with the planner's current lookahead when it has one.
#[derive(Debug, Clone)]
pub struct PlannedStep {
    pub next: Vec<f64>,
    /// Time-stamped states along the current plan, starting at the returned
    /// state's time.
    pub lookahead: Option<Vec<(f64, Vec<f64>)>>,
}

pub trait Planner: Send {
    fn next_step(&mut self, input: &PlannerInput) -> Result<PlannedStep>;

    /// Largest spatial displacement one call can produce (feeds the minimum
    /// sensing radius contract).
    fn max_step(&self, dt: f64) -> f64;
}

pub(crate) fn goal_contains(goal: &BoxSet, p: &[f64]) -> bool {
    p.iter()
        .enumerate()
        .all(|(d, &v)| v >= goal.lower()[d] - 1e-12 && v <= goal.upper()[d] + 1e-12)
}

pub(crate) fn within_bounds(bounds: &BoxSet, p: &[f64]) -> bool {
    p.iter()
        .enumerate()
        .all(|(d, &v)| v >= bounds.lower()[d] && v <= bounds.upper()[d])
}

/// Fail fast when the goal box is wholly swallowed by an augmented obstacle.
pub(crate) fn goal_blocked(goal: &BoxSet, obstacles: &[Obstacle]) -> bool {
    let goal_as_obstacle = Obstacle {
        lower: goal.lower().to_vec(),
        upper: goal.upper().to_vec(),
        dims: (0..goal.dim()).collect(),
    };
    obstacles.iter().any(|o| {
        o.dims
            .iter()
            .enumerate()
            .all(|(k, &d)| {
                goal_as_obstacle.lower[d] >= o.lower[k] - 1e-12
                    && goal_as_obstacle.upper[d] <= o.upper[k] + 1e-12
            })
    })
}

pub(crate) fn segment_clear(a: &[f64], b: &[f64], obstacles: &[Obstacle]) -> bool {
    // Conservative sampled check; segment lengths here are small relative to
    // obstacle features.
    const SAMPLES: usize = 8;
    for s in 0..=SAMPLES {
        let t = s as f64 / SAMPLES as f64;
        let p: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect();
        if obstacles.iter().any(|o| o.contains(&p)) {
            return false;
        }
    }
    true
}

pub(crate) fn stuck(msg: impl Into<String>) -> Error {
    Error::PlannerStuck(msg.into())
}
