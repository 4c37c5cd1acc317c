//! Backward-in-time solver for the Hamilton-Jacobi variational inequality
//! over a relative system.
//!
//! The value function starts at the error function, `V(r, 0) = l(r)`, and
//! evolves in the horizon variable `τ` by forward Euler with a first-order
//! Lax-Friedrichs Hamiltonian: one-sided differences supply the costate pair
//! per dimension, the analytic box-endpoint minimax supplies the Hamiltonian
//! at their average, and the usual `α_i (D⁺_i − D⁻_i)/2` term supplies
//! dissipation. The variational inequality's outer max is realized by
//! clamping to `l` pointwise after every step.
//!
//! Each step maps nodes independently from a read-only buffer into a
//! write-only one; with the `parallel` feature the map runs on rayon. All
//! reductions are min/max over fixed chunks, so parallel and sequential
//! sweeps produce bit-identical results.

use std::sync::Arc;

use once_cell::sync::OnceCell;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction, MAX_DIMS};
use crate::relsys::{BoxSet, RelativeSystem, Subsystem};

/// Widest supported input slot (controls, planner controls or disturbances).
const MAX_INPUTS: usize = 8;
const CHUNK: usize = 4096;

/// How the Lax-Friedrichs dissipation coefficients are chosen.
///
/// `GlobalBound` uses the per-dimension corner bounds from
/// [`dissipation_bounds`] everywhere. `StencilLocal` (the default) bounds
/// `|∂H/∂q_i|` over the costate box spanned by each node's own one-sided
/// differences: inputs whose Hamiltonian coefficient keeps one sign across
/// that box contribute through their pinned endpoint, the rest contribute
/// worst-case magnitude. The local bound never exceeds the global one and
/// avoids smearing kinks that sit far from any sign change.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dissipation {
    GlobalBound,
    StencilLocal,
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Game horizon `T` in seconds.
    pub horizon: f64,
    /// CFL safety factor in (0, 1].
    pub cfl: f64,
    /// Convergence threshold on the max-norm change per unit time.
    pub tolerance: f64,
    /// Number of evenly spaced time snapshots to store (≥ 2).
    pub snapshots: usize,
    /// Hard cap on time steps; exceeding it yields a truncated result.
    pub max_steps: usize,
    /// Nodes within this many cells of a non-periodic boundary are excluded
    /// from the minimum-value computation and the convergence norm.
    pub boundary_trust_cells: usize,
    /// Time window over which the convergence rate is measured; windowing
    /// filters the per-step dither of the explicit scheme.
    pub convergence_window: f64,
    pub dissipation: Dissipation,
    /// Run the sweep node-parallel (no-op without the `parallel` feature).
    pub parallel: bool,
}

impl SolverConfig {
    pub fn new(horizon: f64) -> Self {
        Self {
            horizon,
            cfl: 0.5,
            tolerance: 1e-3,
            snapshots: 9,
            max_steps: 2_000_000,
            boundary_trust_cells: 2,
            convergence_window: 0.5,
            dissipation: Dissipation::StencilLocal,
            parallel: true,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0) {
            return Err(Error::InvalidArgument("horizon must be positive".into()));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::InvalidArgument("CFL factor must be in (0, 1]".into()));
        }
        if self.snapshots < 2 {
            return Err(Error::InvalidArgument(
                "snapshot count must be at least 2".into(),
            ));
        }
        Ok(())
    }
}

/// Analytic inner optimization of the game Hamiltonian.
#[derive(Debug, Clone)]
pub struct Hamiltonian {
    /// `min_u max_{û,d} q · g(r, u, û, d)`.
    pub value: f64,
    pub ctrl: Vec<f64>,
    pub plan: Vec<f64>,
    pub dist: Vec<f64>,
}

fn optimize_family(
    q: &[f64],
    jac: &[f64],
    bounds: &BoxSet,
    minimize: bool,
    out: &mut Vec<f64>,
) -> f64 {
    let n = q.len();
    let m = bounds.dim();
    let mut acc = 0.0;
    for j in 0..m {
        let mut coeff = 0.0;
        for i in 0..n {
            coeff += q[i] * jac[i * m + j];
        }
        let pick_lower = if minimize { coeff > 0.0 } else { coeff < 0.0 };
        let w = if coeff == 0.0 {
            bounds.midpoint(j)
        } else if pick_lower {
            bounds.lower()[j]
        } else {
            bounds.upper()[j]
        };
        out.push(w);
        acc += coeff * w;
    }
    acc
}

/// `H(r, q) = min_u max_{û,d} q · g(r, u, û, d)` for control-affine `g`, with
/// the optimizing inputs. Each box-constrained linear term is optimized at an
/// interval endpoint; a coefficient of exactly zero resolves to the interval
/// midpoint.
pub fn hamiltonian_affine(rel: &RelativeSystem, r: &[f64], q: &[f64]) -> Result<Hamiltonian> {
    let n = rel.dim();
    if r.len() != n || q.len() != n {
        return Err(Error::InvalidArgument(
            "state and costate must match the system rank".into(),
        ));
    }
    let dynamics = &rel.dynamics;
    let mut drift = vec![0.0; n];
    dynamics.drift(r, &mut drift);
    let mut value: f64 = q.iter().zip(&drift).map(|(a, b)| a * b).sum();

    let mut ctrl = Vec::with_capacity(dynamics.ctrl_dim());
    let mut plan = Vec::with_capacity(dynamics.plan_dim());
    let mut dist = Vec::with_capacity(dynamics.dist_dim());
    let mut jac = vec![0.0; n * MAX_INPUTS];
    if dynamics.ctrl_dim() > 0 {
        dynamics.ctrl_jacobian(r, &mut jac[..n * dynamics.ctrl_dim()]);
        value += optimize_family(q, &jac[..n * dynamics.ctrl_dim()], &rel.control_set, true, &mut ctrl);
    }
    if dynamics.plan_dim() > 0 {
        dynamics.plan_jacobian(r, &mut jac[..n * dynamics.plan_dim()]);
        value += optimize_family(
            q,
            &jac[..n * dynamics.plan_dim()],
            &rel.plan_control_set,
            false,
            &mut plan,
        );
    }
    if dynamics.dist_dim() > 0 {
        dynamics.dist_jacobian(r, &mut jac[..n * dynamics.dist_dim()]);
        value += optimize_family(
            q,
            &jac[..n * dynamics.dist_dim()],
            &rel.disturbance_set,
            false,
            &mut dist,
        );
    }
    Ok(Hamiltonian {
        value,
        ctrl,
        plan,
        dist,
    })
}

/// Per-dimension bound `α_i ≥ |g_i(r, u, û, d)|` over all grid nodes and all
/// corner inputs, evaluated exactly through the affine structure (for affine
/// dynamics the extremum over a box is attained at a corner).
pub fn dissipation_bounds(rel: &RelativeSystem, grid: &Arc<Grid>) -> Vec<f64> {
    let n = rel.dim();
    assert_eq!(n, grid.rank(), "grid rank must match the system rank");
    let dynamics = &rel.dynamics;
    let mut alpha = vec![0.0f64; n];
    let mut coords = [0.0; MAX_DIMS];
    let mut drift = vec![0.0; n];
    let mut jac = vec![0.0; n * MAX_INPUTS];
    for flat in 0..grid.len() {
        grid.node_coords(flat, &mut coords[..n]);
        dynamics.drift(&coords[..n], &mut drift);
        let mut hi = drift.clone();
        let mut lo = drift.clone();
        let add_family = |jac: &[f64], bounds: &BoxSet, hi: &mut [f64], lo: &mut [f64]| {
            let m = bounds.dim();
            for i in 0..n {
                for j in 0..m {
                    let a = jac[i * m + j] * bounds.lower()[j];
                    let b = jac[i * m + j] * bounds.upper()[j];
                    hi[i] += a.max(b);
                    lo[i] += a.min(b);
                }
            }
        };
        if dynamics.ctrl_dim() > 0 {
            dynamics.ctrl_jacobian(&coords[..n], &mut jac[..n * dynamics.ctrl_dim()]);
            add_family(
                &jac[..n * dynamics.ctrl_dim()],
                &rel.control_set,
                &mut hi,
                &mut lo,
            );
        }
        if dynamics.plan_dim() > 0 {
            dynamics.plan_jacobian(&coords[..n], &mut jac[..n * dynamics.plan_dim()]);
            add_family(
                &jac[..n * dynamics.plan_dim()],
                &rel.plan_control_set,
                &mut hi,
                &mut lo,
            );
        }
        if dynamics.dist_dim() > 0 {
            dynamics.dist_jacobian(&coords[..n], &mut jac[..n * dynamics.dist_dim()]);
            add_family(
                &jac[..n * dynamics.dist_dim()],
                &rel.disturbance_set,
                &mut hi,
                &mut lo,
            );
        }
        for i in 0..n {
            alpha[i] = alpha[i].max(hi[i].abs()).max(lo[i].abs());
        }
    }
    alpha
}

/// Time-indexed stack of value-function snapshots `V(·, τ)` with metadata.
pub struct ValueFunction {
    grid: Arc<Grid>,
    times: Vec<f64>,
    values: Vec<GridFunction>,
    terminal: GridFunction,
    converged: bool,
    truncated: bool,
    v_min: f64,
    argmin: usize,
    eps_default: f64,
    alpha: Vec<f64>,
    trust_cells: usize,
    model_name: String,
    error_id: String,
    gradients: Vec<OnceCell<Vec<GridFunction>>>,
}

impl ValueFunction {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn assemble(
        grid: Arc<Grid>,
        times: Vec<f64>,
        values: Vec<GridFunction>,
        terminal: GridFunction,
        converged: bool,
        truncated: bool,
        alpha: Vec<f64>,
        trust_cells: usize,
        model_name: String,
        error_id: String,
    ) -> Result<Self> {
        let final_values = values
            .last()
            .ok_or_else(|| Error::InvalidArgument("value function needs a snapshot".into()))?;
        let (v_min, argmin) = trusted_min(final_values, trust_cells)?;
        let gradients = (0..values.len()).map(|_| OnceCell::new()).collect();
        let mut vf = Self {
            grid,
            times,
            values,
            terminal,
            converged,
            truncated,
            v_min,
            argmin,
            eps_default: 0.0,
            alpha,
            trust_cells,
            model_name,
            error_id,
            gradients,
        };
        vf.eps_default = vf.two_cell_slack();
        Ok(vf)
    }

    /// Load a previously assembled stack without recomputing the minimum
    /// (persistence path).
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        grid: Arc<Grid>,
        times: Vec<f64>,
        values: Vec<GridFunction>,
        terminal: GridFunction,
        converged: bool,
        truncated: bool,
        v_min: f64,
        eps_default: f64,
        alpha: Vec<f64>,
        trust_cells: usize,
        model_name: String,
        error_id: String,
    ) -> Result<Self> {
        let (_, argmin) = trusted_min(
            values
                .last()
                .ok_or_else(|| Error::InvalidArgument("value function needs a snapshot".into()))?,
            trust_cells,
        )?;
        let gradients = (0..values.len()).map(|_| OnceCell::new()).collect();
        Ok(Self {
            grid,
            times,
            values,
            terminal,
            converged,
            truncated,
            v_min,
            argmin,
            eps_default,
            alpha,
            trust_cells,
            model_name,
            error_id,
            gradients,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Stored snapshot times, ascending; the last one is the usable horizon.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn snapshots(&self) -> &[GridFunction] {
        &self.values
    }

    /// Error function samples (the τ = 0 data).
    pub fn terminal(&self) -> &GridFunction {
        &self.terminal
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn truncated(&self) -> bool {
        self.truncated
    }

    /// Minimum of the final snapshot over trusted nodes.
    pub fn v_min(&self) -> f64 {
        self.v_min
    }

    /// Flat index of the trusted minimizer.
    pub fn argmin(&self) -> usize {
        self.argmin
    }

    /// Default sublevel slack: two grid cells' worth of value change around
    /// the minimizer.
    pub fn eps_default(&self) -> f64 {
        self.eps_default
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn trust_cells(&self) -> usize {
        self.trust_cells
    }

    pub fn model_name(&self) -> &str {
        &self.model_name
    }

    pub fn error_id(&self) -> &str {
        &self.error_id
    }

    /// Index of the stored snapshot to use for a horizon-time query, rounding
    /// up (later snapshot, larger values — conservative for membership).
    pub fn snapshot_at_or_above(&self, t: f64) -> usize {
        match self
            .times
            .iter()
            .position(|&tau| tau >= t - 1e-12)
        {
            Some(k) => k,
            None => self.times.len() - 1,
        }
    }

    /// Snapshot index rounding down (earlier snapshot, smaller values —
    /// conservative for set extents).
    pub fn snapshot_at_or_below(&self, t: f64) -> usize {
        match self
            .times
            .iter()
            .rposition(|&tau| tau <= t + 1e-12)
        {
            Some(k) => k,
            None => 0,
        }
    }

    /// Interpolated value of snapshot `k` at a point.
    pub fn value_at(&self, k: usize, r: &[f64]) -> Result<f64> {
        self.values[k].interpolate(r)
    }

    /// Lazily computed gradient stack of snapshot `k`.
    pub fn gradient_at(&self, k: usize) -> &[GridFunction] {
        self.gradients[k].get_or_init(|| self.values[k].gradient())
    }

    /// Interpolated spatial gradient of snapshot `k` at a point.
    pub fn gradient_interp(&self, k: usize, r: &[f64]) -> Result<Vec<f64>> {
        self.gradient_at(k)
            .iter()
            .map(|g| g.interpolate(r))
            .collect()
    }

    pub fn is_trusted(&self, flat: usize) -> bool {
        node_is_trusted(&self.grid, flat, self.trust_cells)
    }

    /// Structural invariants: terminal condition, pointwise `V ≥ l`, horizon
    /// monotonicity within `tol`, and consistency of the stored minimum.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let l = self.terminal.values();
        if !self.converged && self.times[0] == 0.0 {
            for (a, b) in self.values[0].values().iter().zip(l) {
                if a != b {
                    return Err(Error::InvalidArgument(
                        "snapshot at τ=0 must equal the error function exactly".into(),
                    ));
                }
            }
        }
        for (k, snap) in self.values.iter().enumerate() {
            for (j, (&v, &lj)) in snap.values().iter().zip(l).enumerate() {
                if v < lj - 1e-12 {
                    return Err(Error::InvalidArgument(format!(
                        "V < l at snapshot {k}, node {j}: {v} < {lj}"
                    )));
                }
            }
        }
        for k in 1..self.values.len() {
            let prev = self.values[k - 1].values();
            let cur = self.values[k].values();
            for j in 0..prev.len() {
                if cur[j] < prev[j] - tol {
                    return Err(Error::InvalidArgument(format!(
                        "horizon monotonicity violated at snapshot {k}, node {j}: {} < {}",
                        cur[j], prev[j]
                    )));
                }
            }
        }
        let (v_min, _) = trusted_min(self.values.last().unwrap(), self.trust_cells)?;
        if (v_min - self.v_min).abs() > 1e-12 {
            return Err(Error::InvalidArgument(
                "stored minimum does not match the final snapshot".into(),
            ));
        }
        Ok(())
    }

    fn two_cell_slack(&self) -> f64 {
        let final_snap = self.values.last().unwrap();
        let grid = &self.grid;
        let n = grid.rank();
        let mut idx = [0usize; MAX_DIMS];
        grid.unflatten(self.argmin, &mut idx[..n]);
        let vals = final_snap.values();
        let mut slack = 0.0f64;
        // Gradient estimate at the minimizer, scaled by the cell size.
        for i in 0..n {
            let _h = grid.spacing(i);
            let stride = grid.strides()[i];
            let c = idx[i];
            let count = grid.dim(i).nodes;
            let line = self.argmin - c * stride;
            let vm = if c > 0 {
                Some(vals[line + (c - 1) * stride])
            } else if grid.dim(i).periodic {
                Some(vals[line + (count - 1) * stride])
            } else {
                None
            };
            let vp = if c + 1 < count {
                Some(vals[line + (c + 1) * stride])
            } else if grid.dim(i).periodic {
                Some(vals[line])
            } else {
                None
            };
            if let (Some(vm), Some(vp)) = (vm, vp) {
                slack = slack.max((vp - vm).abs());
            }
            // Two cells of value change along this axis.
            for step in [-2isize, -1, 1, 2] {
                let cc = c as isize + step;
                let cc = if grid.dim(i).periodic {
                    Some(cc.rem_euclid(count as isize) as usize)
                } else if cc >= 0 && (cc as usize) < count {
                    Some(cc as usize)
                } else {
                    None
                };
                if let Some(cc) = cc {
                    slack = slack.max(vals[line + cc * stride] - self.v_min);
                }
            }
        }
        slack
    }
}

fn node_is_trusted(grid: &Grid, flat: usize, trust_cells: usize) -> bool {
    let n = grid.rank();
    let mut idx = [0usize; MAX_DIMS];
    grid.unflatten(flat, &mut idx[..n]);
    for i in 0..n {
        let d = grid.dim(i);
        if d.periodic {
            continue;
        }
        if idx[i] < trust_cells || idx[i] + trust_cells >= d.nodes {
            return false;
        }
    }
    true
}

fn trusted_min(f: &GridFunction, trust_cells: usize) -> Result<(f64, usize)> {
    let grid = f.grid();
    let mut best = f64::INFINITY;
    let mut arg = usize::MAX;
    for (flat, &v) in f.values().iter().enumerate() {
        if node_is_trusted(grid, flat, trust_cells) && v < best {
            best = v;
            arg = flat;
        }
    }
    if arg == usize::MAX {
        return Err(Error::DegenerateDomain(
            "every node lies within the boundary margin".into(),
        ));
    }
    Ok((best, arg))
}

struct DimGeom {
    stride: usize,
    count: usize,
    inv_h: f64,
    lower: f64,
    h: f64,
    periodic: bool,
}

/// Per-thread scratch for the sweep kernel.
struct NodeScratch {
    coord: [f64; MAX_DIMS],
    dm: [f64; MAX_DIMS],
    dp: [f64; MAX_DIMS],
    qa: [f64; MAX_DIMS],
    drift: [f64; MAX_DIMS],
    g_lo: [f64; MAX_DIMS],
    g_hi: [f64; MAX_DIMS],
    jac: [f64; MAX_DIMS * MAX_INPUTS],
}

impl NodeScratch {
    fn new() -> Self {
        Self {
            coord: [0.0; MAX_DIMS],
            dm: [0.0; MAX_DIMS],
            dp: [0.0; MAX_DIMS],
            qa: [0.0; MAX_DIMS],
            drift: [0.0; MAX_DIMS],
            g_lo: [0.0; MAX_DIMS],
            g_hi: [0.0; MAX_DIMS],
            jac: [0.0; MAX_DIMS * MAX_INPUTS],
        }
    }
}

struct Kernel<'a> {
    rel: &'a RelativeSystem,
    geo: Vec<DimGeom>,
    n: usize,
    alpha: &'a [f64],
    dissipation: Dissipation,
}

impl<'a> Kernel<'a> {
    fn new(
        rel: &'a RelativeSystem,
        grid: &Grid,
        alpha: &'a [f64],
        dissipation: Dissipation,
    ) -> Self {
        let geo = (0..grid.rank())
            .map(|i| {
                let d = grid.dim(i);
                DimGeom {
                    stride: grid.strides()[i],
                    count: d.nodes,
                    inv_h: 1.0 / d.spacing(),
                    lower: d.lower,
                    h: d.spacing(),
                    periodic: d.periodic,
                }
            })
            .collect();
        Kernel {
            rel,
            geo,
            n: grid.rank(),
            alpha,
            dissipation,
        }
    }

    /// One explicit Euler update of a single node; returns the clamped value.
    #[inline]
    fn update(&self, flat: usize, prev: &[f64], l: f64, dt: f64, ws: &mut NodeScratch) -> f64 {
        let n = self.n;
        let v = prev[flat];
        let mut rem = flat;
        for i in 0..n {
            let g = &self.geo[i];
            let c = rem / g.stride;
            rem %= g.stride;
            ws.coord[i] = g.lower + g.h * c as f64;
            let line = flat - c * g.stride;
            let vm = if c > 0 {
                Some(prev[flat - g.stride])
            } else if g.periodic {
                Some(prev[line + (g.count - 1) * g.stride])
            } else {
                None
            };
            let vp = if c + 1 < g.count {
                Some(prev[flat + g.stride])
            } else if g.periodic {
                Some(prev[line])
            } else {
                None
            };
            let dm = vm.map(|vm| (v - vm) * g.inv_h);
            let dp = vp.map(|vp| (vp - v) * g.inv_h);
            let dm = dm.unwrap_or_else(|| dp.unwrap());
            let dp = dp.unwrap_or(dm);
            ws.dm[i] = dm;
            ws.dp[i] = dp;
            ws.qa[i] = 0.5 * (dm + dp);
        }

        let dynamics = &self.rel.dynamics;
        dynamics.drift(&ws.coord[..n], &mut ws.drift[..n]);
        let mut ham = 0.0;
        for i in 0..n {
            ham += ws.qa[i] * ws.drift[i];
            // Interval of reachable g_i over the optimizer choices consistent
            // with the stencil's costate box; starts at the drift.
            ws.g_lo[i] = ws.drift[i];
            ws.g_hi[i] = ws.drift[i];
        }

        let local = self.dissipation == Dissipation::StencilLocal;
        let run_family = |jac: &[f64],
                          bounds: &BoxSet,
                          minimize: bool,
                          g_lo: &mut [f64],
                          g_hi: &mut [f64],
                          qa: &[f64],
                          dm: &[f64],
                          dp: &[f64]|
         -> f64 {
            let m = bounds.dim();
            let mut acc = 0.0;
            for j in 0..m {
                let mut c_avg = 0.0;
                let mut c_lo = 0.0;
                let mut c_hi = 0.0;
                for i in 0..self.n {
                    let b = jac[i * m + j];
                    c_avg += qa[i] * b;
                    let a = dm[i] * b;
                    let bb = dp[i] * b;
                    c_lo += a.min(bb);
                    c_hi += a.max(bb);
                }
                let pick_lower = if minimize { c_avg > 0.0 } else { c_avg < 0.0 };
                let w = if c_avg == 0.0 {
                    bounds.midpoint(j)
                } else if pick_lower {
                    bounds.lower()[j]
                } else {
                    bounds.upper()[j]
                };
                acc += c_avg * w;
                if local {
                    if c_lo <= 0.0 && c_hi >= 0.0 {
                        // Coefficient changes sign across the stencil: the
                        // optimizer may sit anywhere in the interval.
                        for i in 0..self.n {
                            let a = jac[i * m + j] * bounds.lower()[j];
                            let b = jac[i * m + j] * bounds.upper()[j];
                            g_lo[i] += a.min(b);
                            g_hi[i] += a.max(b);
                        }
                    } else {
                        for i in 0..self.n {
                            g_lo[i] += jac[i * m + j] * w;
                            g_hi[i] += jac[i * m + j] * w;
                        }
                    }
                }
            }
            acc
        };

        let nu = dynamics.ctrl_dim();
        if nu > 0 {
            dynamics.ctrl_jacobian(&ws.coord[..n], &mut ws.jac[..n * nu]);
            ham += run_family(
                &ws.jac[..n * nu],
                &self.rel.control_set,
                true,
                &mut ws.g_lo,
                &mut ws.g_hi,
                &ws.qa,
                &ws.dm,
                &ws.dp,
            );
        }
        let np = dynamics.plan_dim();
        if np > 0 {
            dynamics.plan_jacobian(&ws.coord[..n], &mut ws.jac[..n * np]);
            ham += run_family(
                &ws.jac[..n * np],
                &self.rel.plan_control_set,
                false,
                &mut ws.g_lo,
                &mut ws.g_hi,
                &ws.qa,
                &ws.dm,
                &ws.dp,
            );
        }
        let nd = dynamics.dist_dim();
        if nd > 0 {
            dynamics.dist_jacobian(&ws.coord[..n], &mut ws.jac[..n * nd]);
            ham += run_family(
                &ws.jac[..n * nd],
                &self.rel.disturbance_set,
                false,
                &mut ws.g_lo,
                &mut ws.g_hi,
                &ws.qa,
                &ws.dm,
                &ws.dp,
            );
        }

        let mut diss = 0.0;
        for i in 0..n {
            let a = match self.dissipation {
                Dissipation::GlobalBound => self.alpha[i],
                Dissipation::StencilLocal => ws.g_lo[i].abs().max(ws.g_hi[i].abs()),
            };
            diss += a * (ws.dp[i] - ws.dm[i]);
        }
        (v + dt * (ham + 0.5 * diss)).max(l)
    }

    /// Sweep a whole buffer; returns the max absolute change and finiteness.
    fn sweep(&self, prev: &[f64], next: &mut [f64], l: &[f64], dt: f64, parallel: bool) -> (f64, bool) {
        let body = |(chunk_idx, out): (usize, &mut [f64])| -> (f64, bool) {
            let base = chunk_idx * CHUNK;
            let mut ws = NodeScratch::new();
            let mut max_change = 0.0f64;
            let mut finite = true;
            for (k, slot) in out.iter_mut().enumerate() {
                let flat = base + k;
                let v = self.update(flat, prev, l[flat], dt, &mut ws);
                finite &= v.is_finite();
                max_change = max_change.max((v - prev[flat]).abs());
                *slot = v;
            }
            (max_change, finite)
        };

        #[cfg(feature = "parallel")]
        if parallel {
            return next
                .par_chunks_mut(CHUNK)
                .enumerate()
                .map(body)
                .reduce(|| (0.0, true), |a, b| (a.0.max(b.0), a.1 && b.1));
        }
        #[cfg(not(feature = "parallel"))]
        let _ = parallel;

        next.chunks_mut(CHUNK)
            .enumerate()
            .map(body)
            .fold((0.0f64, true), |a, b| (a.0.max(b.0), a.1 && b.1))
    }
}

/// Solve the HJ variational inequality for one relative system on a grid.
pub fn solve_hjvi(
    rel: &RelativeSystem,
    grid: &Arc<Grid>,
    cfg: &SolverConfig,
) -> Result<ValueFunction> {
    cfg.validate()?;
    if grid.rank() != rel.dim() {
        return Err(Error::InvalidArgument(format!(
            "grid rank {} does not match system rank {}",
            grid.rank(),
            rel.dim()
        )));
    }
    let l = GridFunction::sample(grid.clone(), |r| rel.error(r))?;
    let alpha = dissipation_bounds(rel, grid);

    let speed_sum: f64 = alpha
        .iter()
        .enumerate()
        .map(|(i, a)| a / grid.spacing(i))
        .sum();
    let dt_cfl = if speed_sum > 0.0 {
        cfg.cfl / speed_sum
    } else {
        cfg.horizon
    };

    let kernel = Kernel::new(rel, grid, &alpha, cfg.dissipation);
    let targets: Vec<f64> = (0..cfg.snapshots)
        .map(|k| cfg.horizon * k as f64 / (cfg.snapshots - 1) as f64)
        .collect();

    let trusted: Vec<bool> = (0..grid.len())
        .map(|flat| node_is_trusted(grid, flat, cfg.boundary_trust_cells))
        .collect();

    let mut prev = l.values().to_vec();
    let mut next = vec![0.0; prev.len()];
    let mut tau = 0.0;
    let mut times = vec![0.0];
    let mut snaps = vec![l.clone()];
    let mut next_target = 1usize;
    let mut converged = false;
    let mut truncated = false;
    let mut step = 0usize;
    let window = cfg.convergence_window.max(10.0 * dt_cfl);
    let mut reference = prev.clone();
    let mut reference_tau = 0.0;

    while tau < cfg.horizon - 1e-12 {
        if step >= cfg.max_steps {
            truncated = true;
            if tau > *times.last().unwrap() + 1e-12 {
                times.push(tau);
                snaps.push(GridFunction::new(grid.clone(), prev.clone())?);
            }
            break;
        }
        let dt = dt_cfl.min(targets[next_target] - tau).min(cfg.horizon - tau);
        let (_, finite) = kernel.sweep(&prev, &mut next, l.values(), dt, cfg.parallel);
        if !finite {
            return Err(Error::NumericalFailure { step });
        }
        std::mem::swap(&mut prev, &mut next);
        tau += dt;
        step += 1;

        if tau - reference_tau >= window - 1e-12 {
            let rate = prev
                .iter()
                .zip(&reference)
                .zip(&trusted)
                .filter(|(_, &t)| t)
                .map(|((a, b), _)| (a - b).abs())
                .fold(0.0f64, f64::max)
                / (tau - reference_tau);
            if rate < cfg.tolerance {
                converged = true;
                times = vec![tau];
                snaps = vec![GridFunction::new(grid.clone(), prev.clone())?];
                break;
            }
            reference.copy_from_slice(&prev);
            reference_tau = tau;
        }
        if (tau - targets[next_target]).abs() < 1e-12 {
            times.push(targets[next_target]);
            snaps.push(GridFunction::new(grid.clone(), prev.clone())?);
            next_target += 1;
        }
    }

    ValueFunction::assemble(
        grid.clone(),
        times,
        snaps,
        l,
        converged,
        truncated,
        alpha,
        cfg.boundary_trust_cells,
        rel.name.clone(),
        rel.error_id.clone(),
    )
}

/// One solved block of a decomposed system.
pub struct DecomposedPart {
    pub value: ValueFunction,
    pub subsystem: Subsystem,
}

/// Independent subsystem value functions composed through the max rule:
/// the composed value at a product point is the max of subsystem values, and
/// the composed minimum is the max of subsystem minima (each subsystem
/// attains its own minimum independently).
pub struct DecomposedValue {
    parts: Vec<DecomposedPart>,
    v_min: f64,
}

impl DecomposedValue {
    pub fn new(parts: Vec<DecomposedPart>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::InvalidArgument(
                "decomposition needs at least one subsystem".into(),
            ));
        }
        let mut seen: Vec<usize> = Vec::new();
        for p in &parts {
            for &i in &p.subsystem.state_map {
                if seen.contains(&i) {
                    return Err(Error::InvalidDecomposition(format!(
                        "state index {i} appears in more than one subsystem"
                    )));
                }
                seen.push(i);
            }
        }
        let v_min = parts
            .iter()
            .map(|p| p.value.v_min())
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(Self { parts, v_min })
    }

    pub fn parts(&self) -> &[DecomposedPart] {
        &self.parts
    }

    pub fn v_min(&self) -> f64 {
        self.v_min
    }

    /// Max over parts of the default slack, matching the composed level rule.
    pub fn eps_default(&self) -> f64 {
        self.parts
            .iter()
            .map(|p| p.value.eps_default())
            .fold(0.0, f64::max)
    }

    /// Composed value `max_i V_i(r_i, t)` at a full relative state, with each
    /// part sampled at its snapshot rounding up from `t`.
    pub fn value_at_time(&self, r_full: &[f64], t: f64) -> Result<f64> {
        let mut acc = f64::NEG_INFINITY;
        for p in &self.parts {
            let rs = p.subsystem.gather_state(r_full);
            let k = p.value.snapshot_at_or_above(t);
            acc = acc.max(p.value.value_at(k, &rs)?);
        }
        Ok(acc)
    }
}

/// Solve each subsystem independently and compose.
pub fn solve_decomposed(
    subsystems: &[Subsystem],
    grids: &[Arc<Grid>],
    cfg: &SolverConfig,
) -> Result<DecomposedValue> {
    if subsystems.len() != grids.len() {
        return Err(Error::InvalidArgument(
            "need one grid per subsystem".into(),
        ));
    }
    let mut parts = Vec::with_capacity(subsystems.len());
    for (sub, grid) in subsystems.iter().zip(grids) {
        let value = solve_hjvi(&sub.relative, grid, cfg)?;
        parts.push(DecomposedPart {
            value,
            subsystem: sub.clone(),
        });
    }
    DecomposedValue::new(parts)
}
