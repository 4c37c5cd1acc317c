//! Tracking models, planning models, and the relative systems derived from
//! them.
//!
//! A relative system expresses the tracking state in the (possibly rotated)
//! frame of the planning state, `r = Φ(s, p)(s − Q p)`, so that the
//! pursuit-evasion game between the two models lives in a space whose
//! dimension does not grow with the absolute state. All dynamics here are
//! control-affine: `f(x, u, û, d) = A(x) + B_u u + B_û û + B_d d`, which the
//! solver exploits for the analytic inner minimax.

pub mod catalog;

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};

pub use catalog::make_model;

/// Axis-aligned interval box; houses control and disturbance sets.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxSet {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxSet {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::InvalidArgument(
                "box bound lists must have equal lengths".into(),
            ));
        }
        for i in 0..lower.len() {
            if !(lower[i] <= upper[i]) {
                return Err(Error::InvalidArgument(format!(
                    "box dimension {i} has lower {} > upper {}",
                    lower[i], upper[i]
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// Symmetric box `[-h_i, h_i]` from half-widths.
    pub fn symmetric(half_widths: &[f64]) -> Result<Self> {
        BoxSet::new(
            half_widths.iter().map(|h| -h).collect(),
            half_widths.to_vec(),
        )
    }

    pub fn empty() -> Self {
        Self {
            lower: Vec::new(),
            upper: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn midpoint(&self, i: usize) -> f64 {
        0.5 * (self.lower[i] + self.upper[i])
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter().enumerate().all(|(i, &v)| {
                let tol = 1e-9 * (1.0 + (self.upper[i] - self.lower[i]).abs());
                v >= self.lower[i] - tol && v <= self.upper[i] + tol
            })
    }

    /// Iterate over all corner points (2^dim of them).
    pub fn corners(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        let n = self.dim();
        (0..(1usize << n)).map(move |mask| {
            (0..n)
                .map(|i| {
                    if (mask >> i) & 1 == 1 {
                        self.upper[i]
                    } else {
                        self.lower[i]
                    }
                })
                .collect()
        })
    }
}

/// Control-affine dynamics with three input slots: tracking control `u`,
/// planning control `û`, and disturbance `d`. Models that lack a slot report
/// dimension zero for it.
pub trait AffineDynamics: Send + Sync {
    fn state_dim(&self) -> usize;
    fn ctrl_dim(&self) -> usize;
    fn plan_dim(&self) -> usize;
    fn dist_dim(&self) -> usize;

    /// Drift `A(x)` into `out` (length `state_dim`).
    fn drift(&self, x: &[f64], out: &mut [f64]);

    /// Row-major `state_dim × ctrl_dim` Jacobian `B_u(x)`.
    fn ctrl_jacobian(&self, x: &[f64], out: &mut [f64]);

    /// Row-major `state_dim × plan_dim` Jacobian `B_û(x)`.
    fn plan_jacobian(&self, x: &[f64], out: &mut [f64]);

    /// Row-major `state_dim × dist_dim` Jacobian `B_d(x)`.
    fn dist_jacobian(&self, x: &[f64], out: &mut [f64]);

    /// Closed-form flow. The default reconstructs from the affine parts;
    /// catalog models override it with the literal printed dynamics, and the
    /// two routes are cross-checked in tests.
    fn flow(&self, x: &[f64], u: &[f64], up: &[f64], d: &[f64], out: &mut [f64]) {
        let n = self.state_dim();
        self.drift(x, out);
        let mut jac = vec![0.0; n * self.ctrl_dim().max(self.plan_dim()).max(self.dist_dim())];
        if self.ctrl_dim() > 0 {
            self.ctrl_jacobian(x, &mut jac[..n * self.ctrl_dim()]);
            add_matvec(out, &jac, u, n);
        }
        if self.plan_dim() > 0 {
            self.plan_jacobian(x, &mut jac[..n * self.plan_dim()]);
            add_matvec(out, &jac, up, n);
        }
        if self.dist_dim() > 0 {
            self.dist_jacobian(x, &mut jac[..n * self.dist_dim()]);
            add_matvec(out, &jac, d, n);
        }
    }
}

fn add_matvec(out: &mut [f64], mat: &[f64], v: &[f64], rows: usize) {
    let cols = v.len();
    for r in 0..rows {
        let mut acc = 0.0;
        for c in 0..cols {
            acc += mat[r * cols + c] * v[c];
        }
        out[r] += acc;
    }
}

/// High-fidelity model of the real system, with disturbance input.
#[derive(Clone)]
pub struct TrackingModel {
    pub dynamics: Arc<dyn AffineDynamics>,
    pub control_set: BoxSet,
    pub disturbance_set: BoxSet,
}

impl TrackingModel {
    pub fn state_dim(&self) -> usize {
        self.dynamics.state_dim()
    }

    pub fn flow(&self, s: &[f64], u: &[f64], d: &[f64], out: &mut [f64]) {
        self.dynamics.flow(s, u, &[], d, out);
    }
}

/// Simplified, disturbance-free model used for real-time planning.
#[derive(Clone)]
pub struct PlanningModel {
    pub dynamics: Arc<dyn AffineDynamics>,
    pub control_set: BoxSet,
}

impl PlanningModel {
    pub fn state_dim(&self) -> usize {
        self.dynamics.state_dim()
    }

    pub fn flow(&self, p: &[f64], up: &[f64], out: &mut [f64]) {
        self.dynamics.flow(p, &[], up, &[], out);
    }
}

/// The linear transform Φ applied to `s − Q p`.
#[derive(Debug, Clone, PartialEq)]
pub enum TransformKind {
    Identity,
    /// Rotate the state pair `pos` by the planning heading (clockwise), so the
    /// relative position is expressed in the planning model's frame.
    PlanarRotation {
        pos: (usize, usize),
        heading_plan_dim: usize,
    },
}

/// Relative system between a tracking and a planning model.
#[derive(Clone)]
pub struct RelativeSystem {
    pub name: String,
    pub dynamics: Arc<dyn AffineDynamics>,
    pub control_set: BoxSet,
    pub plan_control_set: BoxSet,
    pub disturbance_set: BoxSet,
    pub transform: TransformKind,
    /// Column map of Q: planning dimension `j` matches tracking index
    /// `matching[j]`.
    pub matching: Vec<usize>,
    pub error_indices: Vec<usize>,
    pub aux_indices: Vec<usize>,
    pub error_fn: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    /// Stable label for the error function, stored with value functions.
    pub error_id: String,
    /// Suggested truncation box and resolution for the relative state grid.
    pub default_domain: DomainSpec,
}

/// Truncation box, periodicity and default node counts for a relative grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub periodic: Vec<bool>,
    pub nodes: Vec<usize>,
}

impl RelativeSystem {
    pub fn dim(&self) -> usize {
        self.dynamics.state_dim()
    }

    /// Error function `l(r) ≥ 0`.
    pub fn error(&self, r: &[f64]) -> f64 {
        (self.error_fn)(r)
    }

    /// Central-difference gradient of the error function.
    pub fn error_gradient(&self, r: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut out = vec![0.0; n];
        let mut probe = r.to_vec();
        for i in 0..n {
            let h = 1e-6 * (1.0 + r[i].abs());
            probe[i] = r[i] + h;
            let hi = self.error(&probe);
            probe[i] = r[i] - h;
            let lo = self.error(&probe);
            probe[i] = r[i];
            out[i] = (hi - lo) / (2.0 * h);
        }
        out
    }

    /// Relative flow `g(r, u, û, d)` with input-box validation.
    pub fn relative_flow(&self, r: &[f64], u: &[f64], up: &[f64], d: &[f64]) -> Result<Vec<f64>> {
        if r.len() != self.dim() {
            return Err(Error::InvalidArgument(format!(
                "relative state rank {} does not match system rank {}",
                r.len(),
                self.dim()
            )));
        }
        if !self.control_set.contains(u) {
            return Err(Error::InvalidArgument(
                "tracking control outside its declared box".into(),
            ));
        }
        if !self.plan_control_set.contains(up) {
            return Err(Error::InvalidArgument(
                "planning control outside its declared box".into(),
            ));
        }
        if !self.disturbance_set.contains(d) {
            return Err(Error::InvalidArgument(
                "disturbance outside its declared box".into(),
            ));
        }
        let mut out = vec![0.0; self.dim()];
        self.dynamics.flow(r, u, up, d, &mut out);
        Ok(out)
    }

    /// Unchecked flow evaluation into a caller buffer (hot paths).
    pub fn flow_into(&self, r: &[f64], u: &[f64], up: &[f64], d: &[f64], out: &mut [f64]) {
        self.dynamics.flow(r, u, up, d, out);
    }
}

/// `r = Φ(s, p)(s − Q p)`.
pub fn relative_state(s: &[f64], p: &[f64], rel: &RelativeSystem) -> Result<Vec<f64>> {
    if s.len() != rel.dim() {
        return Err(Error::InvalidArgument(format!(
            "tracking state rank {} does not match relative rank {}",
            s.len(),
            rel.dim()
        )));
    }
    if p.len() != rel.matching.len() {
        return Err(Error::InvalidArgument(format!(
            "planning state rank {} does not match Q column count {}",
            p.len(),
            rel.matching.len()
        )));
    }
    let mut r = s.to_vec();
    for (j, &ti) in rel.matching.iter().enumerate() {
        r[ti] -= p[j];
    }
    if let TransformKind::PlanarRotation {
        pos: (ix, iy),
        heading_plan_dim,
    } = rel.transform
    {
        let th = p[heading_plan_dim];
        let (sin, cos) = th.sin_cos();
        let dx = r[ix];
        let dy = r[iy];
        r[ix] = cos * dx + sin * dy;
        r[iy] = -sin * dx + cos * dy;
    }
    Ok(r)
}

/// One independent block of a decomposable relative system, with index maps
/// back into the full state and input spaces.
#[derive(Clone)]
pub struct Subsystem {
    pub relative: RelativeSystem,
    /// Subsystem state index -> full relative state index.
    pub state_map: Vec<usize>,
    /// Subsystem control index -> full tracking control index.
    pub ctrl_map: Vec<usize>,
    /// Subsystem planning control index -> full planning control index.
    pub plan_map: Vec<usize>,
    /// Subsystem disturbance index -> full disturbance index.
    pub dist_map: Vec<usize>,
}

impl Subsystem {
    /// Gather the subsystem's slice of a full relative state.
    pub fn gather_state(&self, full: &[f64]) -> Vec<f64> {
        self.state_map.iter().map(|&i| full[i]).collect()
    }
}

/// A named tracking/planning pair from the catalog, with its relative system
/// and optional decomposition.
#[derive(Clone)]
pub struct ModelPair {
    pub name: String,
    pub params: BTreeMap<String, f64>,
    pub tracking: TrackingModel,
    pub planning: PlanningModel,
    pub relative: RelativeSystem,
    pub decomposition: Option<Vec<Subsystem>>,
    /// Planning dimensions that are spatial positions (sensing and obstacle
    /// geometry live there).
    pub plan_position_dims: Vec<usize>,
    /// Performance controller `(r, bandwidth) -> u`, used strictly inside the
    /// TEB by the hybrid controller.
    pub performance: Arc<dyn Fn(&[f64], f64) -> Vec<f64> + Send + Sync>,
}

/// Block-diagonal composition of independent dynamics.
struct ProductDynamics {
    parts: Vec<Arc<dyn AffineDynamics>>,
    state_offsets: Vec<usize>,
    ctrl_offsets: Vec<usize>,
    plan_offsets: Vec<usize>,
    dist_offsets: Vec<usize>,
    dims: (usize, usize, usize, usize),
}

impl ProductDynamics {
    fn scatter_jac(
        &self,
        x: &[f64],
        out: &mut [f64],
        cols: usize,
        col_offsets: &[usize],
        part_cols: impl Fn(&dyn AffineDynamics) -> usize,
        fill: impl Fn(&dyn AffineDynamics, &[f64], &mut [f64]),
    ) {
        out.fill(0.0);
        let mut buf = [0.0f64; 64];
        for (k, part) in self.parts.iter().enumerate() {
            let n = part.state_dim();
            let m = part_cols(part.as_ref());
            if m == 0 {
                continue;
            }
            fill(
                part.as_ref(),
                &x[self.state_offsets[k]..self.state_offsets[k] + n],
                &mut buf[..n * m],
            );
            for row in 0..n {
                for col in 0..m {
                    out[(self.state_offsets[k] + row) * cols + col_offsets[k] + col] =
                        buf[row * m + col];
                }
            }
        }
    }
}

impl AffineDynamics for ProductDynamics {
    fn state_dim(&self) -> usize {
        self.dims.0
    }
    fn ctrl_dim(&self) -> usize {
        self.dims.1
    }
    fn plan_dim(&self) -> usize {
        self.dims.2
    }
    fn dist_dim(&self) -> usize {
        self.dims.3
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        for (k, part) in self.parts.iter().enumerate() {
            let n = part.state_dim();
            let o = self.state_offsets[k];
            part.drift(&x[o..o + n], &mut out[o..o + n]);
        }
    }
    fn ctrl_jacobian(&self, x: &[f64], out: &mut [f64]) {
        self.scatter_jac(
            x,
            out,
            self.dims.1,
            &self.ctrl_offsets,
            |p| p.ctrl_dim(),
            |p, x, o| p.ctrl_jacobian(x, o),
        );
    }
    fn plan_jacobian(&self, x: &[f64], out: &mut [f64]) {
        self.scatter_jac(
            x,
            out,
            self.dims.2,
            &self.plan_offsets,
            |p| p.plan_dim(),
            |p, x, o| p.plan_jacobian(x, o),
        );
    }
    fn dist_jacobian(&self, x: &[f64], out: &mut [f64]) {
        self.scatter_jac(
            x,
            out,
            self.dims.3,
            &self.dist_offsets,
            |p| p.dist_dim(),
            |p, x, o| p.dist_jacobian(x, o),
        );
    }
}

fn concat_boxes(boxes: &[&BoxSet]) -> Result<BoxSet> {
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for b in boxes {
        lower.extend_from_slice(b.lower());
        upper.extend_from_slice(b.upper());
    }
    BoxSet::new(lower, upper)
}

/// Combine independent identity-transform model pairs into one pair whose
/// error function is the max over parts. The result exposes the parts as its
/// decomposition, so decomposed solving composes exactly.
pub fn product_pair(name: &str, parts: &[&ModelPair]) -> Result<ModelPair> {
    if parts.is_empty() {
        return Err(Error::InvalidArgument("product of zero pairs".into()));
    }
    for p in parts {
        if !matches!(p.relative.transform, TransformKind::Identity) {
            return Err(Error::InvalidArgument(
                "product pairs require identity transforms".into(),
            ));
        }
    }
    let mut track_dyn = Vec::new();
    let mut plan_dyn = Vec::new();
    let mut rel_dyn = Vec::new();
    let mut s_off = vec![0usize];
    let mut p_off = vec![0usize];
    let mut u_off = vec![0usize];
    let mut up_off = vec![0usize];
    let mut d_off = vec![0usize];
    for p in parts {
        track_dyn.push(p.tracking.dynamics.clone());
        plan_dyn.push(p.planning.dynamics.clone());
        rel_dyn.push(p.relative.dynamics.clone());
        s_off.push(s_off.last().unwrap() + p.tracking.state_dim());
        p_off.push(p_off.last().unwrap() + p.planning.state_dim());
        u_off.push(u_off.last().unwrap() + p.tracking.control_set.dim());
        up_off.push(up_off.last().unwrap() + p.planning.control_set.dim());
        d_off.push(d_off.last().unwrap() + p.tracking.disturbance_set.dim());
    }
    let (ns, np) = (*s_off.last().unwrap(), *p_off.last().unwrap());
    let (nu, nup, nd) = (
        *u_off.last().unwrap(),
        *up_off.last().unwrap(),
        *d_off.last().unwrap(),
    );

    let ctrl = concat_boxes(&parts.iter().map(|p| &p.tracking.control_set).collect::<Vec<_>>())?;
    let plan = concat_boxes(&parts.iter().map(|p| &p.planning.control_set).collect::<Vec<_>>())?;
    let dist = concat_boxes(
        &parts
            .iter()
            .map(|p| &p.tracking.disturbance_set)
            .collect::<Vec<_>>(),
    )?;

    let mut matching = Vec::new();
    let mut error_indices = Vec::new();
    let mut aux_indices = Vec::new();
    let mut plan_position_dims = Vec::new();
    let mut dom_lower = Vec::new();
    let mut dom_upper = Vec::new();
    let mut dom_periodic = Vec::new();
    let mut dom_nodes = Vec::new();
    for (k, p) in parts.iter().enumerate() {
        matching.extend(p.relative.matching.iter().map(|&ti| ti + s_off[k]));
        error_indices.extend(p.relative.error_indices.iter().map(|&i| i + s_off[k]));
        aux_indices.extend(p.relative.aux_indices.iter().map(|&i| i + s_off[k]));
        plan_position_dims.extend(p.plan_position_dims.iter().map(|&j| j + p_off[k]));
        let d = &p.relative.default_domain;
        dom_lower.extend_from_slice(&d.lower);
        dom_upper.extend_from_slice(&d.upper);
        dom_periodic.extend_from_slice(&d.periodic);
        dom_nodes.extend_from_slice(&d.nodes);
    }

    let error_parts: Vec<(usize, usize, Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>)> = parts
        .iter()
        .enumerate()
        .map(|(k, p)| {
            (
                s_off[k],
                p.relative.dim(),
                p.relative.error_fn.clone(),
            )
        })
        .collect();
    let error_fn = Arc::new(move |r: &[f64]| {
        error_parts
            .iter()
            .map(|(off, n, f)| f(&r[*off..off + n]))
            .fold(f64::NEG_INFINITY, f64::max)
    });

    let relative = RelativeSystem {
        name: name.to_string(),
        dynamics: Arc::new(ProductDynamics {
            parts: rel_dyn,
            state_offsets: s_off.clone(),
            ctrl_offsets: u_off.clone(),
            plan_offsets: up_off.clone(),
            dist_offsets: d_off.clone(),
            dims: (ns, nu, nup, nd),
        }),
        control_set: ctrl.clone(),
        plan_control_set: plan.clone(),
        disturbance_set: dist.clone(),
        transform: TransformKind::Identity,
        matching,
        error_indices,
        aux_indices,
        error_fn,
        error_id: format!(
            "max({})",
            parts
                .iter()
                .map(|p| p.relative.error_id.as_str())
                .collect::<Vec<_>>()
                .join(",")
        ),
        default_domain: DomainSpec {
            lower: dom_lower,
            upper: dom_upper,
            periodic: dom_periodic,
            nodes: dom_nodes,
        },
    };

    let decomposition = parts
        .iter()
        .enumerate()
        .map(|(k, p)| Subsystem {
            relative: p.relative.clone(),
            state_map: (s_off[k]..s_off[k] + p.relative.dim()).collect(),
            ctrl_map: (u_off[k]..u_off[k] + p.tracking.control_set.dim()).collect(),
            plan_map: (up_off[k]..up_off[k] + p.planning.control_set.dim()).collect(),
            dist_map: (d_off[k]..d_off[k] + p.tracking.disturbance_set.dim()).collect(),
        })
        .collect();

    let perf_parts: Vec<_> = parts
        .iter()
        .enumerate()
        .map(|(k, p)| (s_off[k], p.relative.dim(), p.performance.clone()))
        .collect();
    let performance = Arc::new(move |r: &[f64], bw: f64| {
        let mut u = Vec::new();
        for (off, n, f) in &perf_parts {
            u.extend(f(&r[*off..off + n], bw));
        }
        u
    });

    Ok(ModelPair {
        name: name.to_string(),
        params: BTreeMap::new(),
        tracking: TrackingModel {
            dynamics: Arc::new(ProductDynamics {
                parts: track_dyn,
                state_offsets: s_off.clone(),
                ctrl_offsets: u_off.clone(),
                plan_offsets: up_off.clone(),
                dist_offsets: d_off.clone(),
                dims: (ns, nu, 0, nd),
            }),
            control_set: ctrl,
            disturbance_set: dist,
        },
        planning: PlanningModel {
            dynamics: Arc::new(ProductDynamics {
                parts: plan_dyn,
                state_offsets: p_off.clone(),
                ctrl_offsets: u_off,
                plan_offsets: up_off,
                dist_offsets: d_off,
                dims: (np, 0, nup, 0),
            }),
            control_set: plan,
        },
        relative,
        decomposition: Some(decomposition),
        plan_position_dims,
        performance,
    })
}

impl ModelPair {
    /// Initial planning state whose matched components copy the tracking
    /// state (zero error).
    pub fn project_tracking(&self, s: &[f64]) -> Vec<f64> {
        self.relative.matching.iter().map(|&ti| s[ti]).collect()
    }

    /// Tracking-state indices carrying the planning position dimensions.
    pub fn tracking_position_indices(&self) -> Vec<usize> {
        self.plan_position_dims
            .iter()
            .map(|&j| self.relative.matching[j])
            .collect()
    }
}

#[cfg(test)]
mod tests;
