//! Tracking error bound queries and the optimal tracking controller.
//!
//! The TEB at lookahead `τ` is the sublevel set
//! `B(τ) = { r : V(r, T−τ) ≤ V̲ + ε }`. Snapshot times are rounded
//! conservatively: membership queries round *up* to the later snapshot
//! (larger values, so a point is never falsely admitted), extent queries
//! round *down* (larger sets, so obstacle augmentation is never too small).
//! Converged value functions hold a single snapshot that answers every
//! lookahead.
//!
//! All operations here are pure reads over immutable solver output and are
//! safe to share across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::MAX_DIMS;
use crate::hjsolver::{hamiltonian_affine, DecomposedValue, ValueFunction};
use crate::relsys::{RelativeSystem, TransformKind};

/// Sublevel slack above the minimum value.
#[derive(Debug, Clone, Copy)]
pub struct TebQuery {
    pub eps: f64,
}

impl TebQuery {
    pub fn new(eps: f64) -> Result<Self> {
        if eps < 0.0 || !eps.is_finite() {
            return Err(Error::InvalidArgument(
                "sublevel slack must be nonnegative".into(),
            ));
        }
        Ok(Self { eps })
    }

    /// Default slack: two grid cells' worth of value change at the minimizer.
    pub fn auto(vf: &ValueFunction) -> Self {
        Self {
            eps: vf.eps_default(),
        }
    }
}

/// Per-error-dimension half-widths of the TEB, plus the position-space radius
/// used when the relative frame rotates with the planner.
#[derive(Debug, Clone)]
pub struct TebExtents {
    /// Half-width per error dimension, ordered like `error_dims`.
    pub half_widths: Vec<f64>,
    /// Full relative-state index of each error dimension.
    pub error_dims: Vec<usize>,
    /// Max Euclidean norm over the rotated position pair, if any.
    pub position_radius: Option<f64>,
}

impl TebExtents {
    /// Half-width for a given full relative-state index.
    pub fn for_dim(&self, dim: usize) -> Option<f64> {
        self.error_dims
            .iter()
            .position(|&d| d == dim)
            .map(|k| self.half_widths[k])
    }
}

/// Minimum of the final value snapshot over trusted nodes.
pub fn min_value(vf: &ValueFunction) -> f64 {
    vf.v_min()
}

/// Interpolated `V(r, T−τ)`, rounding the snapshot up.
pub fn value_at_lookahead(vf: &ValueFunction, r: &[f64], tau: f64) -> Result<f64> {
    if vf.converged() {
        return vf.value_at(0, r);
    }
    let t = (vf.horizon() - tau).max(0.0);
    let k = vf.snapshot_at_or_above(t);
    vf.value_at(k, r)
}

/// `V(r, T−τ)` with linear interpolation between the bracketing snapshots.
/// Non-conservative; used by diagnostics and invariance checks, not by
/// membership queries.
pub fn value_time_interp(vf: &ValueFunction, r: &[f64], tau: f64) -> Result<f64> {
    if vf.converged() {
        return vf.value_at(0, r);
    }
    let times = vf.times();
    let t = (vf.horizon() - tau).clamp(times[0], vf.horizon());
    let hi = vf.snapshot_at_or_above(t);
    if hi == 0 || (times[hi] - t).abs() < 1e-12 {
        return vf.value_at(hi, r);
    }
    let lo = hi - 1;
    let frac = (t - times[lo]) / (times[hi] - times[lo]);
    let a = vf.value_at(lo, r)?;
    let b = vf.value_at(hi, r)?;
    Ok(a + frac * (b - a))
}

/// Membership in `B(τ)`; out-of-domain points are errors and are treated as
/// outside by callers.
pub fn in_teb(vf: &ValueFunction, r: &[f64], tau: f64, q: &TebQuery) -> Result<bool> {
    Ok(value_at_lookahead(vf, r, tau)? <= vf.v_min() + q.eps)
}

/// Smallest stored lookahead with `r ∈ B(τ)`, or `None` if no snapshot
/// contains the point.
pub fn smallest_tau(vf: &ValueFunction, r: &[f64], q: &TebQuery) -> Option<f64> {
    let level = vf.v_min() + q.eps;
    if vf.converged() {
        return match vf.value_at(0, r) {
            Ok(v) if v <= level => Some(0.0),
            _ => None,
        };
    }
    let horizon = vf.horizon();
    for k in (0..vf.times().len()).rev() {
        match vf.value_at(k, r) {
            Ok(v) if v <= level => return Some(horizon - vf.times()[k]),
            Ok(_) => continue,
            Err(_) => return None,
        }
    }
    None
}

fn extents_from_snapshot(
    vf: &ValueFunction,
    rel: &RelativeSystem,
    k: usize,
    level: f64,
) -> Result<TebExtents> {
    let grid = vf.grid();
    let n = grid.rank();
    let vals = vf.snapshots()[k].values();
    let mut coords = [0.0; MAX_DIMS];
    let mut half = vec![0.0f64; rel.error_indices.len()];
    let mut radius: f64 = 0.0;
    let rotated_pair = match rel.transform {
        TransformKind::PlanarRotation { pos, .. } => Some(pos),
        TransformKind::Identity => None,
    };
    let mut any = false;
    for (flat, &v) in vals.iter().enumerate() {
        if v > level {
            continue;
        }
        any = true;
        grid.node_coords(flat, &mut coords[..n]);
        for (e, &dim) in rel.error_indices.iter().enumerate() {
            half[e] = half[e].max(coords[dim].abs());
        }
        if let Some((ix, iy)) = rotated_pair {
            radius = radius.max((coords[ix].powi(2) + coords[iy].powi(2)).sqrt());
        }
    }
    if !any {
        return Err(Error::DegenerateLevel { level });
    }
    Ok(TebExtents {
        half_widths: half,
        error_dims: rel.error_indices.clone(),
        position_radius: rotated_pair.map(|_| radius),
    })
}

/// Per-error-dimension extents of `B(τ)` by exact node scan, rounding the
/// snapshot down (outward-conservative).
pub fn teb_extents(
    vf: &ValueFunction,
    rel: &RelativeSystem,
    tau: f64,
    q: &TebQuery,
) -> Result<TebExtents> {
    let level = vf.v_min() + q.eps;
    let k = if vf.converged() {
        0
    } else {
        vf.snapshot_at_or_below((vf.horizon() - tau).max(0.0))
    };
    extents_from_snapshot(vf, rel, k, level)
}

/// Box-endpoint minimizer of `∇V · g` from the stored gradient (the optimal
/// tracking controller).
pub fn optimal_tracking_control(
    vf: &ValueFunction,
    rel: &RelativeSystem,
    r: &[f64],
    tau: f64,
) -> Result<Vec<f64>> {
    let k = control_snapshot(vf, tau);
    let q = vf.gradient_interp(k, r)?;
    Ok(hamiltonian_affine(rel, r, &q)?.ctrl)
}

/// Box-endpoint maximizers of `∇V · g` given the optimal tracking control:
/// the worst-case planning control and disturbance.
pub fn worst_case_inputs(
    vf: &ValueFunction,
    rel: &RelativeSystem,
    r: &[f64],
    tau: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let k = control_snapshot(vf, tau);
    let q = vf.gradient_interp(k, r)?;
    let h = hamiltonian_affine(rel, r, &q)?;
    Ok((h.plan, h.dist))
}

fn control_snapshot(vf: &ValueFunction, tau: f64) -> usize {
    if vf.converged() {
        0
    } else {
        vf.snapshot_at_or_above((vf.horizon() - tau).max(0.0))
    }
}

// ---------------------------------------------------------------------------
// Uniform interface over single and decomposed value functions
// ---------------------------------------------------------------------------

/// Query surface shared by monolithic and decomposed TEBs; everything the
/// online loop needs.
pub trait TebSource: Send + Sync {
    /// Full relative system the queries are phrased in.
    fn relative(&self) -> &RelativeSystem;
    fn v_min(&self) -> f64;
    fn eps(&self) -> f64;
    /// Usable horizon; zero when every block converged.
    fn horizon(&self) -> f64;
    fn converged(&self) -> bool;
    fn value_at_lookahead(&self, r: &[f64], tau: f64) -> Result<f64>;
    /// Time-interpolated value for diagnostics (smooth in τ).
    fn value_smooth(&self, r: &[f64], tau: f64) -> Result<f64>;
    fn smallest_tau(&self, r: &[f64]) -> Option<f64>;
    fn extents(&self, tau: f64) -> Result<TebExtents>;
    fn tracking_control(&self, r: &[f64], tau: f64) -> Result<Vec<f64>>;
    fn worst_inputs(&self, r: &[f64], tau: f64) -> Result<(Vec<f64>, Vec<f64>)>;
    /// Slack covering interpolation error plus one integration step of value
    /// drift inside the TEB; the tolerance for invariance checks.
    fn invariance_tolerance(&self, dt: f64) -> f64;

    fn level(&self) -> f64 {
        self.v_min() + self.eps()
    }

    fn in_teb(&self, r: &[f64], tau: f64) -> bool {
        matches!(self.value_at_lookahead(r, tau), Ok(v) if v <= self.level())
    }
}

/// A monolithic value function with its relative system and query slack.
pub struct SingleTeb<'a> {
    pub vf: &'a ValueFunction,
    pub rel: &'a RelativeSystem,
    pub query: TebQuery,
}

impl<'a> SingleTeb<'a> {
    pub fn new(vf: &'a ValueFunction, rel: &'a RelativeSystem, query: TebQuery) -> Self {
        Self { vf, rel, query }
    }
}

/// Interpolation-plus-step tolerance for one value block: the multilinear
/// error bound from second differences inside the sublevel region, plus the
/// worst value drift `Σ α_i |∂V/∂r_i| dt` there.
fn block_tolerance(vf: &ValueFunction, level: f64, dt: f64) -> f64 {
    let grid = vf.grid();
    let n = grid.rank();
    let k = vf.snapshots().len() - 1;
    let vals = vf.snapshots()[k].values();
    let mut idx = [0usize; MAX_DIMS];
    let mut curv = vec![0.0f64; n];
    let mut grad = vec![0.0f64; n];
    for (flat, &v) in vals.iter().enumerate() {
        if v > level {
            continue;
        }
        grid.unflatten(flat, &mut idx[..n]);
        for i in 0..n {
            let d = grid.dim(i);
            let stride = grid.strides()[i];
            let c = idx[i];
            let line = flat - c * stride;
            let (vm, vp) = if d.periodic {
                (
                    vals[line + ((c + d.nodes - 1) % d.nodes) * stride],
                    vals[line + ((c + 1) % d.nodes) * stride],
                )
            } else if c == 0 || c + 1 == d.nodes {
                continue;
            } else {
                (vals[flat - stride], vals[flat + stride])
            };
            curv[i] = curv[i].max((vp - 2.0 * v + vm).abs());
            grad[i] = grad[i].max(((vp - vm) / (2.0 * d.spacing())).abs());
        }
    }
    let interp: f64 = curv.iter().map(|c| c / 8.0).sum();
    let drift: f64 = vf
        .alpha()
        .iter()
        .zip(&grad)
        .map(|(a, g)| a * g)
        .sum::<f64>()
        * dt;
    interp + drift
}

impl TebSource for SingleTeb<'_> {
    fn relative(&self) -> &RelativeSystem {
        self.rel
    }
    fn v_min(&self) -> f64 {
        self.vf.v_min()
    }
    fn eps(&self) -> f64 {
        self.query.eps
    }
    fn horizon(&self) -> f64 {
        if self.vf.converged() {
            0.0
        } else {
            self.vf.horizon()
        }
    }
    fn converged(&self) -> bool {
        self.vf.converged()
    }
    fn value_at_lookahead(&self, r: &[f64], tau: f64) -> Result<f64> {
        value_at_lookahead(self.vf, r, tau)
    }
    fn value_smooth(&self, r: &[f64], tau: f64) -> Result<f64> {
        value_time_interp(self.vf, r, tau)
    }
    fn smallest_tau(&self, r: &[f64]) -> Option<f64> {
        smallest_tau(self.vf, r, &self.query)
    }
    fn extents(&self, tau: f64) -> Result<TebExtents> {
        teb_extents(self.vf, self.rel, tau, &self.query)
    }
    fn tracking_control(&self, r: &[f64], tau: f64) -> Result<Vec<f64>> {
        optimal_tracking_control(self.vf, self.rel, r, tau)
    }
    fn worst_inputs(&self, r: &[f64], tau: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        worst_case_inputs(self.vf, self.rel, r, tau)
    }
    fn invariance_tolerance(&self, dt: f64) -> f64 {
        block_tolerance(self.vf, self.level(), dt)
    }
}

/// Decomposed TEB: the composed value is the max over blocks, membership is
/// blockwise membership at the composed level, and controls assemble from
/// the blocks' index maps.
pub struct ComposedTeb<'a> {
    pub dec: &'a DecomposedValue,
    pub rel: &'a RelativeSystem,
    pub eps: f64,
}

impl<'a> ComposedTeb<'a> {
    pub fn new(dec: &'a DecomposedValue, rel: &'a RelativeSystem, eps: f64) -> Self {
        Self { dec, rel, eps }
    }

    pub fn auto(dec: &'a DecomposedValue, rel: &'a RelativeSystem) -> Self {
        Self {
            dec,
            rel,
            eps: dec.eps_default(),
        }
    }
}

impl TebSource for ComposedTeb<'_> {
    fn relative(&self) -> &RelativeSystem {
        self.rel
    }
    fn v_min(&self) -> f64 {
        self.dec.v_min()
    }
    fn eps(&self) -> f64 {
        self.eps
    }
    fn horizon(&self) -> f64 {
        self.dec
            .parts()
            .iter()
            .map(|p| if p.value.converged() { 0.0 } else { p.value.horizon() })
            .fold(0.0, f64::max)
    }
    fn converged(&self) -> bool {
        self.dec.parts().iter().all(|p| p.value.converged())
    }
    fn value_at_lookahead(&self, r: &[f64], tau: f64) -> Result<f64> {
        let mut acc = f64::NEG_INFINITY;
        for p in self.dec.parts() {
            let rs = p.subsystem.gather_state(r);
            acc = acc.max(value_at_lookahead(&p.value, &rs, tau)?);
        }
        Ok(acc)
    }
    fn value_smooth(&self, r: &[f64], tau: f64) -> Result<f64> {
        let mut acc = f64::NEG_INFINITY;
        for p in self.dec.parts() {
            let rs = p.subsystem.gather_state(r);
            acc = acc.max(value_time_interp(&p.value, &rs, tau)?);
        }
        Ok(acc)
    }
    fn smallest_tau(&self, r: &[f64]) -> Option<f64> {
        let q = TebQuery { eps: self.level() - self.v_min() };
        let mut worst = 0.0f64;
        for p in self.dec.parts() {
            let rs = p.subsystem.gather_state(r);
            let level_q = TebQuery {
                eps: (self.level() - p.value.v_min()).max(0.0),
            };
            let _ = q;
            let tau = smallest_tau(&p.value, &rs, &level_q)?;
            worst = worst.max(tau);
        }
        Some(worst)
    }
    fn extents(&self, tau: f64) -> Result<TebExtents> {
        let level = self.level();
        let mut half = vec![0.0f64; self.rel.error_indices.len()];
        for p in self.dec.parts() {
            let sub = &p.subsystem;
            let level_q = TebQuery {
                eps: (level - p.value.v_min()).max(0.0),
            };
            let ext = teb_extents(&p.value, &sub.relative, tau, &level_q)?;
            for (e, &sub_dim) in sub.relative.error_indices.iter().enumerate() {
                let full_dim = sub.state_map[sub_dim];
                if let Some(pos) = self.rel.error_indices.iter().position(|&d| d == full_dim) {
                    half[pos] = half[pos].max(ext.half_widths[e]);
                }
            }
        }
        Ok(TebExtents {
            half_widths: half,
            error_dims: self.rel.error_indices.clone(),
            position_radius: None,
        })
    }
    fn tracking_control(&self, r: &[f64], tau: f64) -> Result<Vec<f64>> {
        let mut u: Vec<f64> = (0..self.rel.control_set.dim())
            .map(|i| self.rel.control_set.midpoint(i))
            .collect();
        for p in self.dec.parts() {
            let rs = p.subsystem.gather_state(r);
            let us = optimal_tracking_control(&p.value, &p.subsystem.relative, &rs, tau)?;
            for (k, &i) in p.subsystem.ctrl_map.iter().enumerate() {
                u[i] = us[k];
            }
        }
        Ok(u)
    }
    fn worst_inputs(&self, r: &[f64], tau: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut up: Vec<f64> = (0..self.rel.plan_control_set.dim())
            .map(|i| self.rel.plan_control_set.midpoint(i))
            .collect();
        let mut d: Vec<f64> = (0..self.rel.disturbance_set.dim())
            .map(|i| self.rel.disturbance_set.midpoint(i))
            .collect();
        for p in self.dec.parts() {
            let rs = p.subsystem.gather_state(r);
            let (ups, ds) = worst_case_inputs(&p.value, &p.subsystem.relative, &rs, tau)?;
            for (k, &i) in p.subsystem.plan_map.iter().enumerate() {
                up[i] = ups[k];
            }
            for (k, &i) in p.subsystem.dist_map.iter().enumerate() {
                d[i] = ds[k];
            }
        }
        Ok((up, d))
    }
    fn invariance_tolerance(&self, dt: f64) -> f64 {
        self.dec
            .parts()
            .iter()
            .map(|p| block_tolerance(&p.value, self.level(), dt))
            .fold(0.0, f64::max)
    }
}

// ---------------------------------------------------------------------------
// Relative closed-loop simulation (validation workhorse)
// ---------------------------------------------------------------------------

/// Planner/disturbance behavior for relative closed-loop runs.
#[derive(Debug, Clone, Copy)]
pub enum RelativeInputs {
    /// Worst-case planning control and disturbance from the value gradient.
    Adversarial,
    /// Inputs drawn uniformly from their boxes with a fixed seed.
    Random { seed: u64 },
}

/// One logged step of a relative closed-loop run.
#[derive(Debug, Clone)]
pub struct RelativeStep {
    pub time: f64,
    pub state: Vec<f64>,
    /// `V(r(t), T − t)`.
    pub value: f64,
    pub smallest_tau: Option<f64>,
}

/// Integrate the relative system under the optimal tracking controller
/// against the chosen planner/disturbance inputs, logging the remaining-
/// horizon value along the way. This is the executable form of the
/// level-set invariance guarantee.
pub fn simulate_relative(
    src: &dyn TebSource,
    r0: &[f64],
    dt: f64,
    steps: usize,
    inputs: RelativeInputs,
) -> Result<Vec<RelativeStep>> {
    let rel = src.relative();
    let mut rng = match inputs {
        RelativeInputs::Random { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        RelativeInputs::Adversarial => None,
    };
    let mut r = r0.to_vec();
    let mut trace = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let t = (k as f64 * dt).min(src.horizon());
        let value = src.value_smooth(&r, t)?;
        trace.push(RelativeStep {
            time: k as f64 * dt,
            state: r.clone(),
            value,
            smallest_tau: src.smallest_tau(&r),
        });
        if k == steps {
            break;
        }
        let u = src.tracking_control(&r, t)?;
        let (up, d) = match (&inputs, rng.as_mut()) {
            (RelativeInputs::Adversarial, _) => src.worst_inputs(&r, t)?,
            (RelativeInputs::Random { .. }, Some(rng)) => {
                let sample = |b: &crate::relsys::BoxSet, rng: &mut ChaCha8Rng| -> Vec<f64> {
                    (0..b.dim())
                        .map(|i| {
                            if b.lower()[i] == b.upper()[i] {
                                b.lower()[i]
                            } else {
                                rng.random_range(b.lower()[i]..=b.upper()[i])
                            }
                        })
                        .collect()
                };
                (
                    sample(&rel.plan_control_set, rng),
                    sample(&rel.disturbance_set, rng),
                )
            }
            _ => unreachable!(),
        };
        rk4_relative(rel, &mut r, &u, &up, &d, dt);
    }
    Ok(trace)
}

pub(crate) fn rk4_relative(
    rel: &RelativeSystem,
    r: &mut Vec<f64>,
    u: &[f64],
    up: &[f64],
    d: &[f64],
    dt: f64,
) {
    let n = r.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    rel.flow_into(r, u, up, d, &mut k1);
    for i in 0..n {
        tmp[i] = r[i] + 0.5 * dt * k1[i];
    }
    rel.flow_into(&tmp, u, up, d, &mut k2);
    for i in 0..n {
        tmp[i] = r[i] + 0.5 * dt * k2[i];
    }
    rel.flow_into(&tmp, u, up, d, &mut k3);
    for i in 0..n {
        tmp[i] = r[i] + dt * k3[i];
    }
    rel.flow_into(&tmp, u, up, d, &mut k4);
    for i in 0..n {
        r[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}
