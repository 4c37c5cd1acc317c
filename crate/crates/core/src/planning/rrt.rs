//! Rapidly-exploring random tree planner with time-stamped paths.
//!
//! The tree grows in the planning model's position space. A found geometric
//! path is converted to a time-stamped trajectory by traversing each segment
//! at the per-dimension maximum planner velocity; the planner then serves
//! the state `Δt` further along that trajectory on every call. The tree is
//! rebuilt from the current state whenever newly augmented obstacles
//! invalidate the remaining trajectory. Fully deterministic for a fixed
//! seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::world::Obstacle;

use super::{goal_blocked, goal_contains, segment_clear, stuck, PlannedStep, Planner, PlannerInput};

struct TimedPath {
    times: Vec<f64>,
    points: Vec<Vec<f64>>,
}

impl TimedPath {
    fn total(&self) -> f64 {
        *self.times.last().unwrap()
    }

    fn at(&self, t: f64) -> Vec<f64> {
        if t >= self.total() {
            return self.points.last().unwrap().clone();
        }
        let k = self
            .times
            .windows(2)
            .position(|w| t >= w[0] && t <= w[1])
            .unwrap_or(0);
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let frac = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
        self.points[k]
            .iter()
            .zip(&self.points[k + 1])
            .map(|(a, b)| a + frac * (b - a))
            .collect()
    }

    /// Remaining waypoints from time `t` on.
    fn remaining(&self, t: f64) -> Vec<(f64, Vec<f64>)> {
        let mut out = vec![(0.0, self.at(t))];
        for (k, &tk) in self.times.iter().enumerate() {
            if tk > t {
                out.push((tk - t, self.points[k].clone()));
            }
        }
        out
    }
}

pub struct RrtPlanner {
    rng: ChaCha8Rng,
    /// Per-dimension speed cap used for time-stamping.
    max_vel: Vec<f64>,
    steer_step: f64,
    goal_bias: f64,
    max_iters: usize,
    path: Option<TimedPath>,
    elapsed: f64,
    known_obstacles: Vec<Obstacle>,
}

impl RrtPlanner {
    /// `max_vel` comes from the planning control box (`|v̂_i| ≤ v_max_i`).
    pub fn new(max_vel: Vec<f64>, steer_step: f64, seed: u64) -> Self {
        RrtPlanner {
            rng: ChaCha8Rng::seed_from_u64(seed),
            max_vel,
            steer_step,
            goal_bias: 0.1,
            max_iters: 30_000,
            path: None,
            elapsed: 0.0,
            known_obstacles: Vec::new(),
        }
    }

    pub fn with_goal_bias(mut self, bias: f64) -> Self {
        self.goal_bias = bias;
        self
    }

    pub fn with_iteration_budget(mut self, iters: usize) -> Self {
        self.max_iters = iters;
        self
    }

    /// Traversal time of one segment at per-dimension max velocity.
    fn segment_time(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(&self.max_vel)
            .map(|((x, y), v)| (y - x).abs() / v.max(1e-12))
            .fold(0.0, f64::max)
    }

    fn timestamp(&self, points: Vec<Vec<f64>>) -> TimedPath {
        let mut times = vec![0.0];
        for w in points.windows(2) {
            times.push(times.last().unwrap() + self.segment_time(&w[0], &w[1]));
        }
        TimedPath { times, points }
    }

    fn path_invalid(&self, obstacles: &[Obstacle]) -> bool {
        let Some(path) = &self.path else {
            return true;
        };
        // Check the not-yet-traversed part against the new obstacle set.
        let mut prev: Option<Vec<f64>> = Some(path.at(self.elapsed));
        for (k, &tk) in path.times.iter().enumerate() {
            if tk <= self.elapsed {
                continue;
            }
            let next = path.points[k].clone();
            if let Some(p) = prev.take() {
                if !segment_clear(&p, &next, obstacles) {
                    return true;
                }
            }
            prev = Some(next);
        }
        false
    }

    fn grow(&mut self, input: &PlannerInput) -> Result<TimedPath> {
        let obstacles = input.obstacles.outermost();
        if goal_blocked(input.goal, obstacles) {
            return Err(stuck("goal lies inside an augmented obstacle"));
        }
        let n = input.state.len();
        let goal_center: Vec<f64> = (0..n).map(|d| input.goal.midpoint(d)).collect();
        let mut nodes: Vec<Vec<f64>> = vec![input.state.to_vec()];
        let mut parents: Vec<usize> = vec![usize::MAX];
        for _ in 0..self.max_iters {
            let toward_goal = self.rng.random_range(0.0..1.0) < self.goal_bias;
            let target: Vec<f64> = if toward_goal {
                goal_center.clone()
            } else {
                (0..n)
                    .map(|d| {
                        self.rng
                            .random_range(input.bounds.lower()[d]..=input.bounds.upper()[d])
                    })
                    .collect()
            };
            // Nearest node, linear scan for determinism.
            let (nearest, dist) = nodes
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let d: f64 = p
                        .iter()
                        .zip(&target)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt();
                    (i, d)
                })
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .unwrap();
            if dist < 1e-12 {
                continue;
            }
            let scale = (self.steer_step / dist).min(1.0);
            let candidate: Vec<f64> = nodes[nearest]
                .iter()
                .zip(&target)
                .map(|(a, b)| a + (b - a) * scale)
                .collect();
            if !super::within_bounds(input.bounds, &candidate) {
                continue;
            }
            if !segment_clear(&nodes[nearest], &candidate, obstacles) {
                continue;
            }
            nodes.push(candidate.clone());
            parents.push(nearest);
            if goal_contains(input.goal, &candidate) {
                let mut rev = Vec::new();
                let mut at = nodes.len() - 1;
                while at != usize::MAX {
                    rev.push(nodes[at].clone());
                    at = parents[at];
                }
                rev.reverse();
                return Ok(self.timestamp(rev));
            }
        }
        Err(stuck(format!(
            "iteration budget {} exhausted without reaching the goal",
            self.max_iters
        )))
    }
}

impl Planner for RrtPlanner {
    fn next_step(&mut self, input: &PlannerInput) -> Result<PlannedStep> {
        if goal_contains(input.goal, input.state) {
            return Ok(PlannedStep {
                next: input.state.to_vec(),
                lookahead: None,
            });
        }
        let obstacles = input.obstacles.outermost().to_vec();
        let changed = obstacles != self.known_obstacles;
        if changed {
            self.known_obstacles = obstacles.clone();
        }
        if self.path.is_none() || (changed && self.path_invalid(&obstacles)) {
            let path = self.grow(input)?;
            self.path = Some(path);
            self.elapsed = 0.0;
        }
        let path = self.path.as_ref().unwrap();
        self.elapsed += input.dt;
        let next = path.at(self.elapsed);
        let lookahead = Some(path.remaining(self.elapsed));
        Ok(PlannedStep { next, lookahead })
    }

    fn max_step(&self, dt: f64) -> f64 {
        self.max_vel
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
            * dt
    }
}
