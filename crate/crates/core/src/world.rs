//! Obstacle environments, sensing, and constraint bookkeeping.
//!
//! Obstacles are axis-aligned boxes over declared planning-state dimensions
//! (positions always, velocities optionally). The world keeps three layers:
//! the true obstacles (hidden from the planner), the sensed fragments
//! revealed so far, and the augmented obstacles obtained by growing each
//! sensed box by the TEB extents so that planning-model safety implies
//! tracking-model safety.
//!
//! Sensor-region intersections are over-approximated per obstacle by an
//! axis-aligned box: the radial sensor clips against the ball's bounding box
//! after an exact ball/box overlap test; the fan sensor samples the clipped
//! box and takes the bounding box of the in-sector samples. Both choices are
//! conservative in the safe direction (a fragment never exceeds its true
//! obstacle) and keep the sensed set monotone.

use crate::error::{Error, Result};
use crate::relsys::{BoxSet, RelativeSystem, TransformKind};
use crate::teb::TebExtents;

/// Axis-aligned box constraint over a declared subset of planning dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Obstacle {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Planning-state dimensions the bounds apply to.
    pub dims: Vec<usize>,
}

impl Obstacle {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, dims: Vec<usize>) -> Result<Self> {
        if lower.len() != upper.len() || lower.len() != dims.len() {
            return Err(Error::InvalidArgument(
                "obstacle bound and dimension lists must match".into(),
            ));
        }
        for i in 0..lower.len() {
            if !(lower[i] <= upper[i]) {
                return Err(Error::InvalidArgument(format!(
                    "obstacle dimension {} empty: [{}, {}]",
                    dims[i], lower[i], upper[i]
                )));
            }
        }
        Ok(Self { lower, upper, dims })
    }

    /// Does a planning state violate this constraint box?
    pub fn contains(&self, p: &[f64]) -> bool {
        self.dims
            .iter()
            .enumerate()
            .all(|(k, &d)| p[d] >= self.lower[k] && p[d] <= self.upper[k])
    }

    fn interval(&self, dim: usize) -> Option<(f64, f64)> {
        self.dims
            .iter()
            .position(|&d| d == dim)
            .map(|k| (self.lower[k], self.upper[k]))
    }

    /// Does this box contain another (per shared dims)?
    pub fn encloses(&self, other: &Obstacle) -> bool {
        self.dims.iter().enumerate().all(|(k, &d)| {
            other
                .interval(d)
                .is_some_and(|(lo, hi)| lo >= self.lower[k] - 1e-12 && hi <= self.upper[k] + 1e-12)
        })
    }
}

/// Sensing region attached to the tracking model's position (and heading,
/// for the fan).
#[derive(Debug, Clone, PartialEq)]
pub enum SensorModel {
    Radial { radius: f64 },
    Fan { radius: f64, half_angle: f64 },
}

impl SensorModel {
    pub fn radius(&self) -> f64 {
        match self {
            SensorModel::Radial { radius } | SensorModel::Fan { radius, .. } => *radius,
        }
    }

    pub fn validate(&self, n_position_dims: usize) -> Result<()> {
        if !(self.radius() > 0.0) {
            return Err(Error::InvalidArgument("sensor radius must be positive".into()));
        }
        if let SensorModel::Fan { half_angle, .. } = self {
            if n_position_dims != 2 {
                return Err(Error::InvalidArgument(
                    "fan sensor requires a 2D position space".into(),
                ));
            }
            if !(*half_angle > 0.0 && *half_angle <= std::f64::consts::FRAC_PI_2) {
                return Err(Error::InvalidArgument(
                    "fan half-angle must be in (0, π/2]".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Static world: bounds and goal over the full planning state, true obstacle
/// boxes, and the sensor.
#[derive(Debug, Clone)]
pub struct Environment {
    pub bounds: BoxSet,
    pub goal: BoxSet,
    pub obstacles: Vec<Obstacle>,
    pub sensor: SensorModel,
}

impl Environment {
    pub fn validate(&self, plan_dim: usize, position_dims: &[usize]) -> Result<()> {
        if self.bounds.dim() != plan_dim || self.goal.dim() != plan_dim {
            return Err(Error::InvalidArgument(
                "world bounds and goal must span the full planning state".into(),
            ));
        }
        self.sensor.validate(position_dims.len())?;
        for (i, obs) in self.obstacles.iter().enumerate() {
            for &d in &obs.dims {
                if d >= plan_dim {
                    return Err(Error::InvalidArgument(format!(
                        "obstacle {i} references planning dimension {d} out of range"
                    )));
                }
            }
            for &pd in position_dims {
                if obs.interval(pd).is_none() {
                    return Err(Error::InvalidArgument(format!(
                        "obstacle {i} must bound position dimension {pd}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// True / sensed constraint bookkeeping. The sensed layer grows
/// monotonically; each true obstacle accumulates one bounding-box fragment.
#[derive(Debug, Clone)]
pub struct ConstraintState {
    true_obstacles: Vec<Obstacle>,
    revealed: Vec<Option<Obstacle>>,
    position_dims: Vec<usize>,
}

impl ConstraintState {
    pub fn new(true_obstacles: Vec<Obstacle>, position_dims: Vec<usize>) -> Self {
        let revealed = vec![None; true_obstacles.len()];
        Self {
            true_obstacles,
            revealed,
            position_dims,
        }
    }

    pub fn true_obstacles(&self) -> &[Obstacle] {
        &self.true_obstacles
    }

    /// Currently sensed obstacle fragments.
    pub fn sensed(&self) -> Vec<Obstacle> {
        self.revealed.iter().flatten().cloned().collect()
    }

    pub fn sensed_count(&self) -> usize {
        self.revealed.iter().flatten().count()
    }

    /// Reveal the parts of still-hidden obstacles inside the sensor region.
    /// `position` is the tracking position expressed in planning position
    /// coordinates; `heading` feeds the fan sensor. Returns the obstacles
    /// whose revealed fragment grew.
    pub fn sense(
        &mut self,
        position: &[f64],
        heading: f64,
        sensor: &SensorModel,
    ) -> Vec<Obstacle> {
        let mut grown = Vec::new();
        for (i, obs) in self.true_obstacles.iter().enumerate() {
            let Some(fragment) =
                sensor_fragment(obs, &self.position_dims, position, heading, sensor)
            else {
                continue;
            };
            let merged = match &self.revealed[i] {
                None => fragment,
                Some(prev) => merge_boxes(prev, &fragment),
            };
            let changed = match &self.revealed[i] {
                None => true,
                Some(prev) => !boxes_equal(prev, &merged),
            };
            if changed {
                self.revealed[i] = Some(merged.clone());
                grown.push(merged);
            }
        }
        grown
    }
}

fn boxes_equal(a: &Obstacle, b: &Obstacle) -> bool {
    a.dims == b.dims
        && a.lower
            .iter()
            .zip(&b.lower)
            .all(|(x, y)| (x - y).abs() < 1e-12)
        && a.upper
            .iter()
            .zip(&b.upper)
            .all(|(x, y)| (x - y).abs() < 1e-12)
}

fn merge_boxes(a: &Obstacle, b: &Obstacle) -> Obstacle {
    let lower = a
        .lower
        .iter()
        .zip(&b.lower)
        .map(|(x, y)| x.min(*y))
        .collect();
    let upper = a
        .upper
        .iter()
        .zip(&b.upper)
        .map(|(x, y)| x.max(*y))
        .collect();
    Obstacle {
        lower,
        upper,
        dims: a.dims.clone(),
    }
}

/// Box over-approximation of the obstacle part inside the sensor region, or
/// `None` when the region misses the obstacle.
fn sensor_fragment(
    obs: &Obstacle,
    position_dims: &[usize],
    center: &[f64],
    heading: f64,
    sensor: &SensorModel,
) -> Option<Obstacle> {
    let radius = sensor.radius();
    // Positional intervals of the obstacle in sensor coordinates.
    let pos_iv: Vec<(f64, f64)> = position_dims
        .iter()
        .map(|&pd| obs.interval(pd).expect("validated obstacle"))
        .collect();

    // Clip against the ball's bounding box.
    let mut clipped: Vec<(f64, f64)> = Vec::with_capacity(pos_iv.len());
    for (k, &(lo, hi)) in pos_iv.iter().enumerate() {
        let lo = lo.max(center[k] - radius);
        let hi = hi.min(center[k] + radius);
        if lo > hi {
            return None;
        }
        clipped.push((lo, hi));
    }
    // Exact ball/box overlap test on the positional footprint.
    let dist_sq: f64 = pos_iv
        .iter()
        .enumerate()
        .map(|(k, &(lo, hi))| {
            let d = (lo - center[k]).max(center[k] - hi).max(0.0);
            d * d
        })
        .sum();
    if dist_sq > radius * radius {
        return None;
    }

    let final_iv = match sensor {
        SensorModel::Radial { .. } => clipped,
        SensorModel::Fan { half_angle, .. } => {
            // Sample the clipped footprint and keep the bounding box of the
            // points that fall inside the sector.
            const SAMPLES: usize = 33;
            let mut found: Option<[(f64, f64); 2]> = None;
            for a in 0..SAMPLES {
                for b in 0..SAMPLES {
                    let x = clipped[0].0
                        + (clipped[0].1 - clipped[0].0) * a as f64 / (SAMPLES - 1) as f64;
                    let y = clipped[1].0
                        + (clipped[1].1 - clipped[1].0) * b as f64 / (SAMPLES - 1) as f64;
                    let dx = x - center[0];
                    let dy = y - center[1];
                    if dx * dx + dy * dy > radius * radius {
                        continue;
                    }
                    let bearing = dy.atan2(dx);
                    let mut off = (bearing - heading).rem_euclid(2.0 * std::f64::consts::PI);
                    if off > std::f64::consts::PI {
                        off -= 2.0 * std::f64::consts::PI;
                    }
                    if off.abs() > *half_angle {
                        continue;
                    }
                    found = Some(match found {
                        None => [(x, x), (y, y)],
                        Some(bb) => [
                            (bb[0].0.min(x), bb[0].1.max(x)),
                            (bb[1].0.min(y), bb[1].1.max(y)),
                        ],
                    });
                }
            }
            let bb = found?;
            vec![(bb[0].0, bb[0].1), (bb[1].0, bb[1].1)]
        }
    };

    // Rebuild the fragment: positional dims clipped, other dims copied.
    let mut lower = obs.lower.clone();
    let mut upper = obs.upper.clone();
    for (k, &pd) in position_dims.iter().enumerate() {
        let slot = obs.dims.iter().position(|&d| d == pd).expect("validated");
        lower[slot] = final_iv[k].0;
        upper[slot] = final_iv[k].1;
    }
    Some(Obstacle {
        lower,
        upper,
        dims: obs.dims.clone(),
    })
}

/// Per-planning-dimension growth margins implied by TEB extents.
///
/// Identity-transform pairs map each error dimension straight onto its
/// matched planning dimension. When the relative frame rotates with the
/// planner, the per-axis position extents are replaced by the rotation-
/// invariant position radius on both position dimensions.
pub fn extent_margins(rel: &RelativeSystem, extents: &TebExtents, plan_dim: usize) -> Vec<f64> {
    let mut margins = vec![0.0; plan_dim];
    for (j, margin) in margins.iter_mut().enumerate() {
        let ti = rel.matching[j];
        if let Some(h) = extents.for_dim(ti) {
            *margin = h;
        }
    }
    if let (TransformKind::PlanarRotation { pos, .. }, Some(radius)) =
        (&rel.transform, extents.position_radius)
    {
        for (j, margin) in margins.iter_mut().enumerate() {
            let ti = rel.matching[j];
            if ti == pos.0 || ti == pos.1 {
                *margin = radius;
            }
        }
    }
    margins
}

/// Grow each sensed box by the given per-dimension margins (the conservative
/// box form of the Minkowski-difference of free space).
pub fn augment_constraints(sensed: &[Obstacle], margins: &[f64]) -> Vec<Obstacle> {
    sensed
        .iter()
        .map(|obs| {
            let mut lower = obs.lower.clone();
            let mut upper = obs.upper.clone();
            for (k, &d) in obs.dims.iter().enumerate() {
                lower[k] -= margins[d];
                upper[k] += margins[d];
            }
            Obstacle {
                lower,
                upper,
                dims: obs.dims.clone(),
            }
        })
        .collect()
}

/// Least sensor radius that keeps planning recursively safe: the largest
/// position extent of the TEB at horizon plus the largest spatial step the
/// planner can take in one time step.
pub fn min_sensing_radius(position_extent: f64, planner_max_step: f64) -> f64 {
    position_extent + planner_max_step
}

/// Largest positional half-width of the extents, honoring the rotation
/// radius when present.
pub fn position_extent(
    rel: &RelativeSystem,
    extents: &TebExtents,
    plan_position_dims: &[usize],
) -> f64 {
    if let Some(radius) = extents.position_radius {
        return radius;
    }
    plan_position_dims
        .iter()
        .map(|&j| extents.for_dim(rel.matching[j]).unwrap_or(0.0))
        .fold(0.0, f64::max)
}

/// Shrink the goal box by the extent margins; planning-model arrival in the
/// contracted goal implies tracking-model arrival in the true goal.
pub fn goal_contract(goal: &BoxSet, margins: &[f64]) -> Result<BoxSet> {
    let mut lower = goal.lower().to_vec();
    let mut upper = goal.upper().to_vec();
    for (d, m) in margins.iter().enumerate() {
        lower[d] += m;
        upper[d] -= m;
        if lower[d] > upper[d] {
            return Err(Error::GoalTooSmall { dim: d });
        }
    }
    BoxSet::new(lower, upper)
}
