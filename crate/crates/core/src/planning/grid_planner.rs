//! Shortest-path lattice planner.
//!
//! Uniform-cost search (every primitive lasts one time step, so plain
//! breadth-first order is cost order) over a discretized planning lattice.
//! Motion primitives come from the planning control box: integrator models
//! step by the control corners and axis midpoints, Dubins-style models hold
//! a turn rate from `{min, 0, max}` for one step. States are deduplicated on
//! a lattice whose resolution defaults to half a primitive displacement.
//! With time-varying augmented obstacles the set in effect grows with path
//! depth, so first arrivals dominate later ones and dedup stays sound.
//!
//! The planner replans from scratch whenever the augmented obstacle set
//! changes and otherwise walks its cached path.

use std::collections::{HashSet, VecDeque};

use crate::error::Result;
use crate::relsys::BoxSet;

use super::{
    goal_blocked, goal_contains, stuck, AugmentedSets, PlannedStep, Planner,
    PlannerInput,
};

/// Planning-model kinematics the lattice planner understands.
#[derive(Debug, Clone)]
pub enum MotionModel {
    /// `ṗ = û` with `û` in a box; primitives sample each control dimension
    /// at `{lower, 0, upper}`.
    Integrator { control_set: BoxSet },
    /// Constant-speed planar car `(x, y, θ)` with turn-rate control.
    Dubins { speed: f64, turn_rate_max: f64 },
}

impl MotionModel {
    fn primitives(&self) -> Vec<Vec<f64>> {
        match self {
            MotionModel::Integrator { control_set } => {
                let n = control_set.dim();
                let mut prims = Vec::new();
                let mut idx = vec![0usize; n];
                loop {
                    let u: Vec<f64> = (0..n)
                        .map(|i| match idx[i] {
                            0 => control_set.lower()[i],
                            1 => 0.5 * (control_set.lower()[i] + control_set.upper()[i]),
                            _ => control_set.upper()[i],
                        })
                        .collect();
                    prims.push(u);
                    let mut carry = true;
                    for slot in idx.iter_mut() {
                        if carry {
                            *slot += 1;
                            if *slot == 3 {
                                *slot = 0;
                            } else {
                                carry = false;
                            }
                        }
                    }
                    if carry {
                        break;
                    }
                }
                prims
            }
            MotionModel::Dubins { turn_rate_max, .. } => {
                vec![vec![-turn_rate_max], vec![0.0], vec![*turn_rate_max]]
            }
        }
    }

    fn apply(&self, p: &[f64], u: &[f64], dt: f64) -> Vec<f64> {
        match self {
            MotionModel::Integrator { .. } => {
                p.iter().zip(u).map(|(x, v)| x + v * dt).collect()
            }
            MotionModel::Dubins { speed, .. } => {
                let (x, y, th) = (p[0], p[1], p[2]);
                let w = u[0];
                if w.abs() < 1e-9 {
                    vec![x + speed * th.cos() * dt, y + speed * th.sin() * dt, th]
                } else {
                    let th2 = th + w * dt;
                    vec![
                        x + speed / w * (th2.sin() - th.sin()),
                        y - speed / w * (th2.cos() - th.cos()),
                        th2,
                    ]
                }
            }
        }
    }

    fn max_step(&self, dt: f64) -> f64 {
        match self {
            MotionModel::Integrator { control_set } => {
                let sq: f64 = (0..control_set.dim())
                    .map(|i| {
                        control_set.lower()[i]
                            .abs()
                            .max(control_set.upper()[i].abs())
                            .powi(2)
                    })
                    .sum();
                sq.sqrt() * dt
            }
            MotionModel::Dubins { speed, .. } => speed.abs() * dt,
        }
    }

    fn position_dims(&self) -> usize {
        match self {
            MotionModel::Integrator { control_set } => control_set.dim(),
            MotionModel::Dubins { .. } => 2,
        }
    }
}

pub struct GridPlanner {
    model: MotionModel,
    /// Lattice cell size for deduplication.
    resolution: f64,
    heading_resolution: f64,
    max_expansions: usize,
    cached_path: VecDeque<Vec<f64>>,
    cache_obstacles: Option<AugmentedSets>,
}

impl GridPlanner {
    /// `resolution = None` picks half a primitive displacement, keeping the
    /// displacement at least two lattice cells so the search cannot trap
    /// itself.
    pub fn new(model: MotionModel, dt: f64, resolution: Option<f64>) -> Self {
        let default_res = 0.5 * model.max_step(dt).max(1e-9);
        GridPlanner {
            model,
            resolution: resolution.unwrap_or(default_res),
            heading_resolution: 0.05,
            max_expansions: 2_000_000,
            cached_path: VecDeque::new(),
            cache_obstacles: None,
        }
    }

    pub fn with_expansion_budget(mut self, budget: usize) -> Self {
        self.max_expansions = budget;
        self
    }

    fn key(&self, p: &[f64]) -> Vec<i64> {
        let pos_dims = self.model.position_dims();
        let mut key: Vec<i64> = p[..pos_dims]
            .iter()
            .map(|&v| (v / self.resolution).round() as i64)
            .collect();
        if matches!(self.model, MotionModel::Dubins { .. }) {
            key.push((p[2] / self.heading_resolution).round() as i64);
        }
        key
    }

    fn search(&self, input: &PlannerInput) -> Result<Vec<Vec<f64>>> {
        if goal_blocked(input.goal, input.obstacles.outermost()) {
            return Err(stuck("goal lies inside an augmented obstacle"));
        }
        let prims = self.model.primitives();
        let mut visited: HashSet<Vec<i64>> = HashSet::new();
        // (state, depth, parent index) arena for path reconstruction.
        let mut arena: Vec<(Vec<f64>, usize, usize)> = Vec::new();
        let mut frontier: VecDeque<usize> = VecDeque::new();
        arena.push((input.state.to_vec(), 0, usize::MAX));
        frontier.push_back(0);
        visited.insert(self.key(input.state));
        let mut expansions = 0usize;

        while let Some(cur) = frontier.pop_front() {
            let (state, depth) = (arena[cur].0.clone(), arena[cur].1);
            if goal_contains(input.goal, &state) {
                let mut path = Vec::new();
                let mut at = cur;
                while at != usize::MAX {
                    path.push(arena[at].0.clone());
                    at = arena[at].2;
                }
                path.reverse();
                return Ok(path);
            }
            expansions += 1;
            if expansions > self.max_expansions {
                return Err(stuck(format!(
                    "expansion budget {} exhausted",
                    self.max_expansions
                )));
            }
            for u in &prims {
                let next = self.model.apply(&state, u, input.dt);
                if !super::within_bounds(input.bounds, &next) {
                    continue;
                }
                if input.obstacles.violates(depth + 1, &next) {
                    continue;
                }
                let key = self.key(&next);
                if visited.insert(key) {
                    arena.push((next, depth + 1, cur));
                    frontier.push_back(arena.len() - 1);
                }
            }
        }
        Err(stuck("no collision-free path to the goal"))
    }
}

impl Planner for GridPlanner {
    fn next_step(&mut self, input: &PlannerInput) -> Result<PlannedStep> {
        if goal_contains(input.goal, input.state) {
            return Ok(PlannedStep {
                next: input.state.to_vec(),
                lookahead: None,
            });
        }
        let need_replan = self.cache_obstacles.as_ref() != Some(input.obstacles)
            || self.cached_path.is_empty();
        if need_replan {
            let path = self.search(input)?;
            self.cached_path = path.into_iter().skip(1).collect();
            self.cache_obstacles = Some(input.obstacles.clone());
        }
        let next = match self.cached_path.pop_front() {
            Some(p) => p,
            // Already at the goal cell; hold position.
            None => input.state.to_vec(),
        };
        let lookahead = Some(
            std::iter::once((input.dt, next.clone()))
                .chain(
                    self.cached_path
                        .iter()
                        .enumerate()
                        .map(|(k, p)| ((k + 2) as f64 * input.dt, p.clone())),
                )
                .collect(),
        );
        Ok(PlannedStep { next, lookahead })
    }

    fn max_step(&self, dt: f64) -> f64 {
        self.model.max_step(dt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::Obstacle;

    fn input<'a>(
        state: &'a [f64],
        obstacles: &'a AugmentedSets,
        goal: &'a BoxSet,
        bounds: &'a BoxSet,
        dt: f64,
    ) -> PlannerInput<'a> {
        PlannerInput {
            state,
            obstacles,
            goal,
            bounds,
            dt,
        }
    }

    #[test]
    fn dubins_straight_line_progress() {
        // Defaults of the 3D car: v̂ = 0.1, Δt = 0.067.
        let model = MotionModel::Dubins {
            speed: 0.1,
            turn_rate_max: 1.5,
        };
        let dt = 0.067;
        let mut planner = GridPlanner::new(model, dt, None);
        let obstacles = AugmentedSets::Constant(vec![]);
        let goal = BoxSet::new(vec![0.4, -0.05, -10.0], vec![0.6, 0.05, 10.0]).unwrap();
        let bounds = BoxSet::new(vec![-1.0, -1.0, -10.0], vec![1.0, 1.0, 10.0]).unwrap();
        let mut state = vec![0.0, 0.0, 0.0];
        let mut prev_dist = 0.5f64;
        for _ in 0..200 {
            let step = planner
                .next_step(&input(&state, &obstacles, &goal, &bounds, dt))
                .unwrap();
            let moved: f64 = step
                .next
                .iter()
                .take(2)
                .zip(&state)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(moved <= 0.1 * dt + 1e-9, "per-step displacement bound");
            state = step.next;
            let dist = ((state[0] - 0.5).powi(2) + state[1].powi(2)).sqrt();
            assert!(dist <= prev_dist + 1e-9, "monotone progress on open ground");
            prev_dist = dist;
            if state[0] >= 0.4 - 1e-9 && state[1].abs() <= 0.05 + 1e-9 {
                return;
            }
        }
        panic!("did not reach the goal box: {state:?}");
    }

    #[test]
    fn integrator_routes_through_gap() {
        let model = MotionModel::Integrator {
            control_set: BoxSet::symmetric(&[0.5, 0.5]).unwrap(),
        };
        let dt = 0.1;
        let mut planner = GridPlanner::new(model, dt, None);
        // Wall at x ∈ [0.4, 0.6] with a gap at y ∈ [0.4, 0.8].
        let wall_lo = Obstacle::new(vec![0.4, -2.0], vec![0.6, 0.4], vec![0, 1]).unwrap();
        let wall_hi = Obstacle::new(vec![0.4, 0.8], vec![0.6, 2.0], vec![0, 1]).unwrap();
        let obstacles = AugmentedSets::Constant(vec![wall_lo, wall_hi]);
        let goal = BoxSet::new(vec![1.1, -0.1], vec![1.3, 0.1]).unwrap();
        let bounds = BoxSet::new(vec![-2.0, -2.0], vec![2.0, 2.0]).unwrap();
        let mut state = vec![0.0, 0.0];
        for _ in 0..400 {
            let step = planner
                .next_step(&input(&state, &obstacles, &goal, &bounds, dt))
                .unwrap();
            assert!(
                !obstacles.violates(1, &step.next),
                "planned state inside obstacle: {:?}",
                step.next
            );
            state = step.next;
            if state[0] >= 1.1 && state[1].abs() <= 0.1 {
                return;
            }
        }
        panic!("never reached the goal: {state:?}");
    }

    #[test]
    fn start_at_goal_holds() {
        let model = MotionModel::Integrator {
            control_set: BoxSet::symmetric(&[0.5]).unwrap(),
        };
        let mut planner = GridPlanner::new(model, 0.1, None);
        let obstacles = AugmentedSets::Constant(vec![]);
        let goal = BoxSet::new(vec![-0.1], vec![0.1]).unwrap();
        let bounds = BoxSet::new(vec![-1.0], vec![1.0]).unwrap();
        let state = vec![0.0];
        let step = planner
            .next_step(&input(&state, &obstacles, &goal, &bounds, 0.1))
            .unwrap();
        assert_eq!(step.next, state);
    }

    #[test]
    fn fully_blocked_is_stuck() {
        let model = MotionModel::Integrator {
            control_set: BoxSet::symmetric(&[0.5]).unwrap(),
        };
        let mut planner = GridPlanner::new(model, 0.1, None);
        // Wall covering the whole line between start and goal.
        let wall = Obstacle::new(vec![0.3], vec![0.7], vec![0]).unwrap();
        let obstacles = AugmentedSets::Constant(vec![wall]);
        let goal = BoxSet::new(vec![0.9], vec![1.0]).unwrap();
        let bounds = BoxSet::new(vec![-1.0], vec![1.0]).unwrap();
        let state = vec![0.0];
        assert!(planner
            .next_step(&input(&state, &obstacles, &goal, &bounds, 0.1))
            .is_err());
    }

    #[test]
    fn deterministic_given_identical_inputs() {
        let make = || {
            let model = MotionModel::Integrator {
                control_set: BoxSet::symmetric(&[0.5, 0.5]).unwrap(),
            };
            GridPlanner::new(model, 0.1, None)
        };
        let wall = Obstacle::new(vec![0.4, -2.0], vec![0.6, 0.3], vec![0, 1]).unwrap();
        let obstacles = AugmentedSets::Constant(vec![wall]);
        let goal = BoxSet::new(vec![1.0, -0.1], vec![1.2, 0.1]).unwrap();
        let bounds = BoxSet::new(vec![-2.0, -2.0], vec![2.0, 2.0]).unwrap();
        let mut a = make();
        let mut b = make();
        let state = vec![0.0, 0.0];
        for _ in 0..10 {
            let sa = a
                .next_step(&input(&state, &obstacles, &goal, &bounds, 0.1))
                .unwrap();
            let sb = b
                .next_step(&input(&state, &obstacles, &goal, &bounds, 0.1))
                .unwrap();
            assert_eq!(sa.next, sb.next);
        }
    }
}
