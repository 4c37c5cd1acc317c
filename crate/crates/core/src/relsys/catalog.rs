//! Built-in tracking/planning model pairs.
//!
//! Five pairs are exposed by name:
//!
//! * `rel1d` — 1D tracker `ṡ = u + d` chasing a 1D integrator `ṗ = û`.
//!   Relative flow `ṙ = u − û + d`. Analytic test pair: with
//!   `u_max > û_max + d_max` the value function converges to `l(r) = r²`;
//!   otherwise `V(r, τ) = (|r| + (û_max + d_max − u_max) τ)²`.
//! * `dint2d` — double integrator `(ẋ, v̇) = (v, u + d)` chasing a 1D
//!   integrator. Analytic test pair.
//! * `car5d_car3d` — 5D car (speed/turn-rate accelerations, disturbances on
//!   every channel) tracking a constant-speed 3D kinematic car. The relative
//!   state is expressed in the planning car's frame.
//! * `quad10d_int3d` — 10D near-hover quadrotor tracking a 3D velocity
//!   integrator; decomposes into two 4D blocks and one 2D block.
//! * `quad8d_int4d` — 8D planar-attitude quadrotor tracking a 4D double
//!   integrator; decomposes into two 4D blocks with position+velocity error.
//!
//! Parameter defaults follow the published model parameters for the paper
//! pairs; override any of them through `make_model`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};

use super::{
    AffineDynamics, BoxSet, DomainSpec, ModelPair, PlanningModel, RelativeSystem, Subsystem,
    TrackingModel, TransformKind,
};

/// Linear time-invariant dynamics `ẋ = A x + c + B_u u + B_û û + B_d d`.
struct LinearDynamics {
    n: usize,
    nu: usize,
    np: usize,
    nd: usize,
    a: Vec<f64>,
    c: Vec<f64>,
    bu: Vec<f64>,
    bp: Vec<f64>,
    bd: Vec<f64>,
}

impl AffineDynamics for LinearDynamics {
    fn state_dim(&self) -> usize {
        self.n
    }
    fn ctrl_dim(&self) -> usize {
        self.nu
    }
    fn plan_dim(&self) -> usize {
        self.np
    }
    fn dist_dim(&self) -> usize {
        self.nd
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        for r in 0..self.n {
            let mut acc = self.c[r];
            for ccol in 0..self.n {
                acc += self.a[r * self.n + ccol] * x[ccol];
            }
            out[r] = acc;
        }
    }
    fn ctrl_jacobian(&self, _x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.bu);
    }
    fn plan_jacobian(&self, _x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.bp);
    }
    fn dist_jacobian(&self, _x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.bd);
    }
}

// ---------------------------------------------------------------------------
// 5D car tracking a 3D kinematic car
// ---------------------------------------------------------------------------

/// 5D car: states (x, y, θ, v, ω), controls (a, α), disturbances
/// (d_x, d_y, d_a, d_α).
struct Car5dTracking;

impl AffineDynamics for Car5dTracking {
    fn state_dim(&self) -> usize {
        5
    }
    fn ctrl_dim(&self) -> usize {
        2
    }
    fn plan_dim(&self) -> usize {
        0
    }
    fn dist_dim(&self) -> usize {
        4
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        let (theta, v, omega) = (x[2], x[3], x[4]);
        out[0] = v * theta.cos();
        out[1] = v * theta.sin();
        out[2] = omega;
        out[3] = 0.0;
        out[4] = 0.0;
    }
    fn ctrl_jacobian(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        out[3 * 2] = 1.0; // v̇ = a
        out[4 * 2 + 1] = 1.0; // ω̇ = α
    }
    fn plan_jacobian(&self, _x: &[f64], _out: &mut [f64]) {}
    fn dist_jacobian(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        out[0] = 1.0; // ẋ += d_x
        out[4 + 1] = 1.0; // ẏ += d_y
        out[3 * 4 + 2] = 1.0; // v̇ += d_a
        out[4 * 4 + 3] = 1.0; // ω̇ += d_α
    }
    fn flow(&self, x: &[f64], u: &[f64], _up: &[f64], d: &[f64], out: &mut [f64]) {
        out[0] = x[3] * x[2].cos() + d[0];
        out[1] = x[3] * x[2].sin() + d[1];
        out[2] = x[4];
        out[3] = u[0] + d[2];
        out[4] = u[1] + d[3];
    }
}

/// 3D kinematic car: constant speed, turn rate as the single control.
struct Car3dPlanning {
    v_hat: f64,
}

impl AffineDynamics for Car3dPlanning {
    fn state_dim(&self) -> usize {
        3
    }
    fn ctrl_dim(&self) -> usize {
        0
    }
    fn plan_dim(&self) -> usize {
        1
    }
    fn dist_dim(&self) -> usize {
        0
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.v_hat * x[2].cos();
        out[1] = self.v_hat * x[2].sin();
        out[2] = 0.0;
    }
    fn ctrl_jacobian(&self, _x: &[f64], _out: &mut [f64]) {}
    fn plan_jacobian(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        out[2] = 1.0; // θ̂̇ = ω̂
    }
    fn dist_jacobian(&self, _x: &[f64], _out: &mut [f64]) {}
}

/// Relative dynamics of the 5D car in the 3D car's rotating frame:
/// states (x_r, y_r, θ_r, v, ω). The planar disturbance components enter in
/// the rotated frame, matching the printed relative dynamics; their box is
/// treated as frame-invariant.
struct Car5dRelative {
    v_hat: f64,
}

impl AffineDynamics for Car5dRelative {
    fn state_dim(&self) -> usize {
        5
    }
    fn ctrl_dim(&self) -> usize {
        2
    }
    fn plan_dim(&self) -> usize {
        1
    }
    fn dist_dim(&self) -> usize {
        4
    }
    fn drift(&self, r: &[f64], out: &mut [f64]) {
        let (theta_r, v, omega) = (r[2], r[3], r[4]);
        out[0] = -self.v_hat + v * theta_r.cos();
        out[1] = v * theta_r.sin();
        out[2] = omega;
        out[3] = 0.0;
        out[4] = 0.0;
    }
    fn ctrl_jacobian(&self, _r: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        out[3 * 2] = 1.0;
        out[4 * 2 + 1] = 1.0;
    }
    fn plan_jacobian(&self, r: &[f64], out: &mut [f64]) {
        out[0] = r[1]; // ẋ_r += ω̂ y_r
        out[1] = -r[0]; // ẏ_r -= ω̂ x_r
        out[2] = -1.0; // θ̇_r -= ω̂
        out[3] = 0.0;
        out[4] = 0.0;
    }
    fn dist_jacobian(&self, _r: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        out[0] = 1.0;
        out[4 + 1] = 1.0;
        out[3 * 4 + 2] = 1.0;
        out[4 * 4 + 3] = 1.0;
    }
    fn flow(&self, r: &[f64], u: &[f64], up: &[f64], d: &[f64], out: &mut [f64]) {
        let (x_r, y_r, theta_r, v, omega) = (r[0], r[1], r[2], r[3], r[4]);
        let omega_hat = up[0];
        out[0] = -self.v_hat + v * theta_r.cos() + omega_hat * y_r + d[0];
        out[1] = v * theta_r.sin() - omega_hat * x_r + d[1];
        out[2] = omega - omega_hat;
        out[3] = u[0] + d[2];
        out[4] = u[1] + d[3];
    }
}

// ---------------------------------------------------------------------------
// Near-hover quadrotor blocks
// ---------------------------------------------------------------------------

enum PlanInput {
    /// Planner is a velocity integrator: `ẋ_r = v − v̂ + d`.
    Velocity,
    /// Planner is a double integrator: `v̇_r = g tan θ − â`.
    Acceleration,
}

/// One planar axis of the near-hover quadrotor relative system:
/// states (x_r, v, θ, ω) with `v̇ = g tan θ`, second-order attitude response.
struct QuadAxisRelative {
    d0: f64,
    d1: f64,
    n0: f64,
    grav: f64,
    plan: PlanInput,
}

impl AffineDynamics for QuadAxisRelative {
    fn state_dim(&self) -> usize {
        4
    }
    fn ctrl_dim(&self) -> usize {
        1
    }
    fn plan_dim(&self) -> usize {
        1
    }
    fn dist_dim(&self) -> usize {
        1
    }
    fn drift(&self, r: &[f64], out: &mut [f64]) {
        let (v, theta, omega) = (r[1], r[2], r[3]);
        out[0] = v;
        out[1] = self.grav * theta.tan();
        out[2] = -self.d1 * theta + omega;
        out[3] = -self.d0 * theta;
    }
    fn ctrl_jacobian(&self, _r: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
        out[1] = 0.0;
        out[2] = 0.0;
        out[3] = self.n0;
    }
    fn plan_jacobian(&self, _r: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        match self.plan {
            PlanInput::Velocity => out[0] = -1.0,
            PlanInput::Acceleration => out[1] = -1.0,
        }
    }
    fn dist_jacobian(&self, _r: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        out[0] = 1.0;
    }
}

/// Full 10D quadrotor dynamics; `relative` selects between the absolute model
/// (Eq.-17 form) and the relative model where the planner velocity enters the
/// position rows.
struct Quad10d {
    d0: f64,
    d1: f64,
    n0: f64,
    k_t: f64,
    grav: f64,
    relative: bool,
}

impl Quad10d {
    fn axis_drift(&self, r: &[f64], base: usize, out: &mut [f64]) {
        let (v, theta, omega) = (r[base + 1], r[base + 2], r[base + 3]);
        out[base] = v;
        out[base + 1] = self.grav * theta.tan();
        out[base + 2] = -self.d1 * theta + omega;
        out[base + 3] = -self.d0 * theta;
    }
}

impl AffineDynamics for Quad10d {
    fn state_dim(&self) -> usize {
        10
    }
    fn ctrl_dim(&self) -> usize {
        3
    }
    fn plan_dim(&self) -> usize {
        if self.relative {
            3
        } else {
            0
        }
    }
    fn dist_dim(&self) -> usize {
        3
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        self.axis_drift(x, 0, out);
        self.axis_drift(x, 4, out);
        out[8] = x[9];
        out[9] = -self.grav;
    }
    fn ctrl_jacobian(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        out[3 * 3] = self.n0; // ω̇_x
        out[7 * 3 + 1] = self.n0; // ω̇_y
        out[9 * 3 + 2] = self.k_t; // v̇_z
    }
    fn plan_jacobian(&self, _x: &[f64], out: &mut [f64]) {
        if self.relative {
            out.fill(0.0);
            out[0] = -1.0; // ẋ_r -= v̂_x
            out[4 * 3 + 1] = -1.0; // ẏ_r -= v̂_y
            out[8 * 3 + 2] = -1.0; // ż_r -= v̂_z
        }
    }
    fn dist_jacobian(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        out[0] = 1.0;
        out[4 * 3 + 1] = 1.0;
        out[8 * 3 + 2] = 1.0;
    }
}

/// Full 8D quadrotor; `relative` swaps in the double-integrator planner
/// accelerations on the velocity rows.
struct Quad8d {
    d0: f64,
    d1: f64,
    n0: f64,
    grav: f64,
    relative: bool,
}

impl AffineDynamics for Quad8d {
    fn state_dim(&self) -> usize {
        8
    }
    fn ctrl_dim(&self) -> usize {
        2
    }
    fn plan_dim(&self) -> usize {
        if self.relative {
            2
        } else {
            0
        }
    }
    fn dist_dim(&self) -> usize {
        2
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        for (block, base) in [(0usize, 0usize), (1, 4)] {
            let _ = block;
            let (v, theta, omega) = (x[base + 1], x[base + 2], x[base + 3]);
            out[base] = v;
            out[base + 1] = self.grav * theta.tan();
            out[base + 2] = -self.d1 * theta + omega;
            out[base + 3] = -self.d0 * theta;
        }
    }
    fn ctrl_jacobian(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        out[3 * 2] = self.n0;
        out[7 * 2 + 1] = self.n0;
    }
    fn plan_jacobian(&self, _x: &[f64], out: &mut [f64]) {
        if self.relative {
            out.fill(0.0);
            out[2] = -1.0; // v̇_{x,r} -= â_x  (row 1, col 0)
            out[5 * 2 + 1] = -1.0; // v̇_{y,r} -= â_y
        }
    }
    fn dist_jacobian(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        out[0] = 1.0;
        out[4 * 2 + 1] = 1.0;
    }
}

// ---------------------------------------------------------------------------
// Parameter plumbing
// ---------------------------------------------------------------------------

fn merge_params(
    name: &str,
    defaults: &[(&str, f64)],
    overrides: &BTreeMap<String, f64>,
) -> Result<BTreeMap<String, f64>> {
    let mut params: BTreeMap<String, f64> =
        defaults.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    for (k, v) in overrides {
        if !params.contains_key(k) {
            return Err(Error::InvalidArgument(format!(
                "model `{name}` has no parameter `{k}`"
            )));
        }
        if !v.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "parameter `{k}` must be finite"
            )));
        }
        params.insert(k.clone(), *v);
    }
    Ok(params)
}

fn domain(lower: &[f64], upper: &[f64], periodic: &[bool], nodes: &[usize]) -> DomainSpec {
    DomainSpec {
        lower: lower.to_vec(),
        upper: upper.to_vec(),
        periodic: periodic.to_vec(),
        nodes: nodes.to_vec(),
    }
}

fn clamp_to(b: &BoxSet, u: &mut [f64]) {
    for i in 0..b.dim() {
        u[i] = u[i].clamp(b.lower()[i], b.upper()[i]);
    }
}

/// Pole-placement gains for the 4D quadrotor axis chain with all closed-loop
/// poles at `-bw`.
fn quad_axis_gains(bw: f64, d0: f64, d1: f64, n0: f64, grav: f64) -> [f64; 4] {
    let k4 = (4.0 * bw - d1) / n0;
    let k3 = (6.0 * bw * bw - d0 - (4.0 * bw - d1) * d1) / n0;
    let k2 = 4.0 * bw.powi(3) / (grav * n0);
    let k1 = bw.powi(4) / (grav * n0);
    [k1, k2, k3, k4]
}

/// Instantiate a catalog model pair by name with optional parameter
/// overrides. Known names: `rel1d`, `dint2d`, `car5d_car3d`, `quad10d_int3d`,
/// `quad8d_int4d`.
pub fn make_model(name: &str, overrides: &BTreeMap<String, f64>) -> Result<ModelPair> {
    match name {
        "rel1d" => make_rel1d(overrides),
        "dint2d" => make_dint2d(overrides),
        "car5d_car3d" => make_car(overrides),
        "quad10d_int3d" => make_quad10(overrides),
        "quad8d_int4d" => make_quad8(overrides),
        _ => Err(Error::NotFound(name.to_string())),
    }
}

fn make_rel1d(overrides: &BTreeMap<String, f64>) -> Result<ModelPair> {
    let p = merge_params(
        "rel1d",
        &[("u_max", 1.0), ("uhat_max", 0.5), ("d_max", 0.2)],
        overrides,
    )?;
    let (u_max, uhat_max, d_max) = (p["u_max"], p["uhat_max"], p["d_max"]);
    let ctrl = BoxSet::symmetric(&[u_max])?;
    let plan = BoxSet::symmetric(&[uhat_max])?;
    let dist = BoxSet::symmetric(&[d_max])?;

    let tracking = TrackingModel {
        dynamics: Arc::new(LinearDynamics {
            n: 1,
            nu: 1,
            np: 0,
            nd: 1,
            a: vec![0.0],
            c: vec![0.0],
            bu: vec![1.0],
            bp: vec![],
            bd: vec![1.0],
        }),
        control_set: ctrl.clone(),
        disturbance_set: dist.clone(),
    };
    let planning = PlanningModel {
        dynamics: Arc::new(LinearDynamics {
            n: 1,
            nu: 0,
            np: 1,
            nd: 0,
            a: vec![0.0],
            c: vec![0.0],
            bu: vec![],
            bp: vec![1.0],
            bd: vec![],
        }),
        control_set: plan.clone(),
    };
    let relative = RelativeSystem {
        name: "rel1d".into(),
        dynamics: Arc::new(LinearDynamics {
            n: 1,
            nu: 1,
            np: 1,
            nd: 1,
            a: vec![0.0],
            c: vec![0.0],
            bu: vec![1.0],
            bp: vec![-1.0],
            bd: vec![1.0],
        }),
        control_set: ctrl.clone(),
        plan_control_set: plan,
        disturbance_set: dist,
        transform: TransformKind::Identity,
        matching: vec![0],
        error_indices: vec![0],
        aux_indices: vec![],
        error_fn: Arc::new(|r: &[f64]| r[0] * r[0]),
        error_id: "sq_pos".into(),
        default_domain: domain(&[-2.0], &[2.0], &[false], &[201]),
    };
    Ok(ModelPair {
        name: "rel1d".into(),
        params: p,
        tracking,
        planning,
        relative,
        decomposition: None,
        plan_position_dims: vec![0],
        performance: Arc::new(move |r: &[f64], bw: f64| {
            let mut u = vec![-bw * r[0]];
            clamp_to(&ctrl, &mut u);
            u
        }),
    })
}

fn make_dint2d(overrides: &BTreeMap<String, f64>) -> Result<ModelPair> {
    let p = merge_params(
        "dint2d",
        &[("u_max", 1.0), ("uhat_max", 0.5), ("d_max", 0.1)],
        overrides,
    )?;
    let ctrl = BoxSet::symmetric(&[p["u_max"]])?;
    let plan = BoxSet::symmetric(&[p["uhat_max"]])?;
    let dist = BoxSet::symmetric(&[p["d_max"]])?;

    let tracking = TrackingModel {
        dynamics: Arc::new(LinearDynamics {
            n: 2,
            nu: 1,
            np: 0,
            nd: 1,
            a: vec![0.0, 1.0, 0.0, 0.0],
            c: vec![0.0; 2],
            bu: vec![0.0, 1.0],
            bp: vec![],
            bd: vec![0.0, 1.0],
        }),
        control_set: ctrl.clone(),
        disturbance_set: dist.clone(),
    };
    let planning = PlanningModel {
        dynamics: Arc::new(LinearDynamics {
            n: 1,
            nu: 0,
            np: 1,
            nd: 0,
            a: vec![0.0],
            c: vec![0.0],
            bu: vec![],
            bp: vec![1.0],
            bd: vec![],
        }),
        control_set: plan.clone(),
    };
    let relative = RelativeSystem {
        name: "dint2d".into(),
        dynamics: Arc::new(LinearDynamics {
            n: 2,
            nu: 1,
            np: 1,
            nd: 1,
            a: vec![0.0, 1.0, 0.0, 0.0],
            c: vec![0.0; 2],
            bu: vec![0.0, 1.0],
            bp: vec![-1.0, 0.0],
            bd: vec![0.0, 1.0],
        }),
        control_set: ctrl.clone(),
        plan_control_set: plan,
        disturbance_set: dist,
        transform: TransformKind::Identity,
        matching: vec![0],
        error_indices: vec![0],
        aux_indices: vec![1],
        error_fn: Arc::new(|r: &[f64]| r[0] * r[0]),
        error_id: "sq_pos".into(),
        default_domain: domain(&[-2.0, -2.0], &[2.0, 2.0], &[false, false], &[81, 81]),
    };
    Ok(ModelPair {
        name: "dint2d".into(),
        params: p,
        tracking,
        planning,
        relative,
        decomposition: None,
        plan_position_dims: vec![0],
        performance: Arc::new(move |r: &[f64], bw: f64| {
            let mut u = vec![-bw * bw * r[0] - 2.0 * bw * r[1]];
            clamp_to(&ctrl, &mut u);
            u
        }),
    })
}

fn make_car(overrides: &BTreeMap<String, f64>) -> Result<ModelPair> {
    let p = merge_params(
        "car5d_car3d",
        &[
            ("v_hat", 0.1),
            ("omega_hat_max", 1.5),
            ("a_max", 0.5),
            ("alpha_max", 6.0),
            ("d_xy_max", 0.02),
            ("d_a_max", 0.2),
            ("d_alpha_max", 0.02),
        ],
        overrides,
    )?;
    let v_hat = p["v_hat"];
    let ctrl = BoxSet::symmetric(&[p["a_max"], p["alpha_max"]])?;
    let plan = BoxSet::symmetric(&[p["omega_hat_max"]])?;
    let dist = BoxSet::symmetric(&[p["d_xy_max"], p["d_xy_max"], p["d_a_max"], p["d_alpha_max"]])?;

    let tracking = TrackingModel {
        dynamics: Arc::new(Car5dTracking),
        control_set: ctrl.clone(),
        disturbance_set: dist.clone(),
    };
    let planning = PlanningModel {
        dynamics: Arc::new(Car3dPlanning { v_hat }),
        control_set: plan.clone(),
    };
    let relative = RelativeSystem {
        name: "car5d_car3d".into(),
        dynamics: Arc::new(Car5dRelative { v_hat }),
        control_set: ctrl.clone(),
        plan_control_set: plan,
        disturbance_set: dist,
        transform: TransformKind::PlanarRotation {
            pos: (0, 1),
            heading_plan_dim: 2,
        },
        matching: vec![0, 1, 2],
        error_indices: vec![0, 1, 2],
        aux_indices: vec![3, 4],
        error_fn: Arc::new(|r: &[f64]| r[0] * r[0] + r[1] * r[1]),
        error_id: "sq_pos_xy".into(),
        default_domain: domain(
            &[-0.35, -0.35, -PI, -0.25, -3.5],
            &[0.35, 0.35, PI, 0.25, 3.5],
            &[false, false, true, false, false],
            &[15, 15, 23, 13, 23],
        ),
    };
    Ok(ModelPair {
        name: "car5d_car3d".into(),
        params: p,
        tracking,
        planning,
        relative,
        decomposition: None,
        plan_position_dims: vec![0, 1],
        performance: Arc::new(move |r: &[f64], bw: f64| {
            let a = -bw * bw * r[0] - 2.0 * bw * (r[3] - v_hat);
            let heading_gain = bw.powi(3) / v_hat.max(0.05);
            let alpha = -bw * bw * r[2] - heading_gain * r[1] - 2.0 * bw * r[4];
            let mut u = vec![a, alpha];
            clamp_to(&ctrl, &mut u);
            u
        }),
    })
}

fn quad10_defaults() -> Vec<(&'static str, f64)> {
    vec![
        ("d0", 10.0),
        ("d1", 8.0),
        ("n0", 10.0),
        ("k_t", 0.91),
        ("grav", 9.81),
        ("u_xy_max", PI / 9.0),
        ("u_z_min", 0.0),
        ("u_z_max", 1.5 * 9.81),
        ("v_hat_max", 0.5),
        ("d_max", 0.1),
    ]
}

const THETA_DOMAIN: f64 = 35.0 * PI / 180.0;

fn make_quad10(overrides: &BTreeMap<String, f64>) -> Result<ModelPair> {
    let p = merge_params("quad10d_int3d", &quad10_defaults(), overrides)?;
    let (d0, d1, n0, k_t, grav) = (p["d0"], p["d1"], p["n0"], p["k_t"], p["grav"]);
    let (u_xy, uz_min, uz_max) = (p["u_xy_max"], p["u_z_min"], p["u_z_max"]);
    let (v_hat, d_max) = (p["v_hat_max"], p["d_max"]);

    let ctrl = BoxSet::new(vec![-u_xy, -u_xy, uz_min], vec![u_xy, u_xy, uz_max])?;
    let plan = BoxSet::symmetric(&[v_hat, v_hat, v_hat])?;
    let dist = BoxSet::symmetric(&[d_max, d_max, d_max])?;

    let tracking = TrackingModel {
        dynamics: Arc::new(Quad10d {
            d0,
            d1,
            n0,
            k_t,
            grav,
            relative: false,
        }),
        control_set: ctrl.clone(),
        disturbance_set: dist.clone(),
    };
    let planning = PlanningModel {
        dynamics: Arc::new(LinearDynamics {
            n: 3,
            nu: 0,
            np: 3,
            nd: 0,
            a: vec![0.0; 9],
            c: vec![0.0; 3],
            bu: vec![],
            bp: vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
            bd: vec![],
        }),
        control_set: plan.clone(),
    };
    let relative = RelativeSystem {
        name: "quad10d_int3d".into(),
        dynamics: Arc::new(Quad10d {
            d0,
            d1,
            n0,
            k_t,
            grav,
            relative: true,
        }),
        control_set: ctrl.clone(),
        plan_control_set: plan.clone(),
        disturbance_set: dist.clone(),
        transform: TransformKind::Identity,
        matching: vec![0, 4, 8],
        error_indices: vec![0, 4, 8],
        aux_indices: vec![1, 2, 3, 5, 6, 7, 9],
        error_fn: Arc::new(|r: &[f64]| (r[0] * r[0]).max(r[4] * r[4]).max(r[8] * r[8])),
        error_id: "max_sq_pos".into(),
        default_domain: domain(
            &[
                -2.0,
                -2.0,
                -THETA_DOMAIN,
                -4.0,
                -2.0,
                -2.0,
                -THETA_DOMAIN,
                -4.0,
                -2.0,
                -2.0,
            ],
            &[
                2.0,
                2.0,
                THETA_DOMAIN,
                4.0,
                2.0,
                2.0,
                THETA_DOMAIN,
                4.0,
                2.0,
                2.0,
            ],
            &[false; 10],
            &[9; 10],
        ),
    };

    let axis_domain = domain(
        &[-2.0, -2.0, -THETA_DOMAIN, -4.0],
        &[2.0, 2.0, THETA_DOMAIN, 4.0],
        &[false; 4],
        &[31, 31, 21, 21],
    );
    let axis_sub = |label: &str, base: usize, input_idx: usize| Subsystem {
        relative: RelativeSystem {
            name: format!("quad10d_int3d:{label}"),
            dynamics: Arc::new(QuadAxisRelative {
                d0,
                d1,
                n0,
                grav,
                plan: PlanInput::Velocity,
            }),
            control_set: BoxSet::symmetric(&[u_xy]).unwrap(),
            plan_control_set: BoxSet::symmetric(&[v_hat]).unwrap(),
            disturbance_set: BoxSet::symmetric(&[d_max]).unwrap(),
            transform: TransformKind::Identity,
            matching: vec![0],
            error_indices: vec![0],
            aux_indices: vec![1, 2, 3],
            error_fn: Arc::new(|r: &[f64]| r[0] * r[0]),
            error_id: "sq_pos".into(),
            default_domain: axis_domain.clone(),
        },
        state_map: (base..base + 4).collect(),
        ctrl_map: vec![input_idx],
        plan_map: vec![input_idx],
        dist_map: vec![input_idx],
    };
    let z_sub = Subsystem {
        relative: RelativeSystem {
            name: "quad10d_int3d:z".into(),
            dynamics: Arc::new(LinearDynamics {
                n: 2,
                nu: 1,
                np: 1,
                nd: 1,
                a: vec![0.0, 1.0, 0.0, 0.0],
                c: vec![0.0, -grav],
                bu: vec![0.0, k_t],
                bp: vec![-1.0, 0.0],
                bd: vec![1.0, 0.0],
            }),
            control_set: BoxSet::new(vec![uz_min], vec![uz_max])?,
            plan_control_set: BoxSet::symmetric(&[v_hat])?,
            disturbance_set: BoxSet::symmetric(&[d_max])?,
            transform: TransformKind::Identity,
            matching: vec![0],
            error_indices: vec![0],
            aux_indices: vec![1],
            error_fn: Arc::new(|r: &[f64]| r[0] * r[0]),
            error_id: "sq_pos".into(),
            default_domain: domain(&[-1.0, -1.0], &[1.0, 1.0], &[false, false], &[101, 101]),
        },
        state_map: vec![8, 9],
        ctrl_map: vec![2],
        plan_map: vec![2],
        dist_map: vec![2],
    };

    let gains = quad_axis_gains(2.0, d0, d1, n0, grav);
    let ctrl_clamp = ctrl.clone();
    Ok(ModelPair {
        name: "quad10d_int3d".into(),
        params: p,
        tracking,
        planning,
        relative,
        decomposition: Some(vec![axis_sub("x", 0, 0), axis_sub("y", 4, 1), z_sub]),
        plan_position_dims: vec![0, 1, 2],
        performance: Arc::new(move |r: &[f64], bw: f64| {
            let g = if (bw - 2.0).abs() < 1e-12 {
                gains
            } else {
                quad_axis_gains(bw, d0, d1, n0, grav)
            };
            let ux = -g[0] * r[0] - g[1] * r[1] - g[2] * r[2] - g[3] * r[3];
            let uy = -g[0] * r[4] - g[1] * r[5] - g[2] * r[6] - g[3] * r[7];
            let uz = (grav - bw * bw * r[8] - 2.0 * bw * r[9]) / k_t;
            let mut u = vec![ux, uy, uz];
            clamp_to(&ctrl_clamp, &mut u);
            u
        }),
    })
}

fn make_quad8(overrides: &BTreeMap<String, f64>) -> Result<ModelPair> {
    let p = merge_params(
        "quad8d_int4d",
        &[
            ("d0", 10.0),
            ("d1", 8.0),
            ("n0", 10.0),
            ("grav", 9.81),
            ("u_xy_max", PI / 9.0),
            ("a_hat_max", 1.0),
            ("d_max", 0.2),
            ("vel_weight", 1.0),
        ],
        overrides,
    )?;
    let (d0, d1, n0, grav) = (p["d0"], p["d1"], p["n0"], p["grav"]);
    let (u_xy, a_hat, d_max, c_vel) = (p["u_xy_max"], p["a_hat_max"], p["d_max"], p["vel_weight"]);

    let ctrl = BoxSet::symmetric(&[u_xy, u_xy])?;
    let plan = BoxSet::symmetric(&[a_hat, a_hat])?;
    let dist = BoxSet::symmetric(&[d_max, d_max])?;

    let tracking = TrackingModel {
        dynamics: Arc::new(Quad8d {
            d0,
            d1,
            n0,
            grav,
            relative: false,
        }),
        control_set: ctrl.clone(),
        disturbance_set: dist.clone(),
    };
    // Planner: (x̂, v̂_x, ŷ, v̂_y), controls (â_x, â_y).
    let planning = PlanningModel {
        dynamics: Arc::new(LinearDynamics {
            n: 4,
            nu: 0,
            np: 2,
            nd: 0,
            a: vec![
                0.0, 1.0, 0.0, 0.0, //
                0.0, 0.0, 0.0, 0.0, //
                0.0, 0.0, 0.0, 1.0, //
                0.0, 0.0, 0.0, 0.0,
            ],
            c: vec![0.0; 4],
            bu: vec![],
            bp: vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0],
            bd: vec![],
        }),
        control_set: plan.clone(),
    };
    let relative = RelativeSystem {
        name: "quad8d_int4d".into(),
        dynamics: Arc::new(Quad8d {
            d0,
            d1,
            n0,
            grav,
            relative: true,
        }),
        control_set: ctrl.clone(),
        plan_control_set: plan.clone(),
        disturbance_set: dist.clone(),
        transform: TransformKind::Identity,
        matching: vec![0, 1, 4, 5],
        error_indices: vec![0, 1, 4, 5],
        aux_indices: vec![2, 3, 6, 7],
        error_fn: Arc::new(move |r: &[f64]| {
            (r[0] * r[0] + c_vel * r[1] * r[1]).max(r[4] * r[4] + c_vel * r[5] * r[5])
        }),
        error_id: format!("max_sq_posvel_c{c_vel}"),
        default_domain: domain(
            &[
                -3.0,
                -3.0,
                -THETA_DOMAIN,
                -4.0,
                -3.0,
                -3.0,
                -THETA_DOMAIN,
                -4.0,
            ],
            &[3.0, 3.0, THETA_DOMAIN, 4.0, 3.0, 3.0, THETA_DOMAIN, 4.0],
            &[false; 8],
            &[9; 8],
        ),
    };

    let axis_domain = domain(
        &[-3.0, -3.0, -THETA_DOMAIN, -4.0],
        &[3.0, 3.0, THETA_DOMAIN, 4.0],
        &[false; 4],
        &[31, 31, 21, 21],
    );
    let axis_sub = |label: &str, base: usize, input_idx: usize| Subsystem {
        relative: RelativeSystem {
            name: format!("quad8d_int4d:{label}"),
            dynamics: Arc::new(QuadAxisRelative {
                d0,
                d1,
                n0,
                grav,
                plan: PlanInput::Acceleration,
            }),
            control_set: BoxSet::symmetric(&[u_xy]).unwrap(),
            plan_control_set: BoxSet::symmetric(&[a_hat]).unwrap(),
            disturbance_set: BoxSet::symmetric(&[d_max]).unwrap(),
            transform: TransformKind::Identity,
            matching: vec![0, 1],
            error_indices: vec![0, 1],
            aux_indices: vec![2, 3],
            error_fn: Arc::new(move |r: &[f64]| r[0] * r[0] + c_vel * r[1] * r[1]),
            error_id: format!("sq_posvel_c{c_vel}"),
            default_domain: axis_domain.clone(),
        },
        state_map: (base..base + 4).collect(),
        ctrl_map: vec![input_idx],
        plan_map: vec![input_idx],
        dist_map: vec![input_idx],
    };

    let gains = quad_axis_gains(2.0, d0, d1, n0, grav);
    let ctrl_clamp = ctrl.clone();
    Ok(ModelPair {
        name: "quad8d_int4d".into(),
        params: p,
        tracking,
        planning,
        relative,
        decomposition: Some(vec![axis_sub("x", 0, 0), axis_sub("y", 4, 1)]),
        plan_position_dims: vec![0, 2],
        performance: Arc::new(move |r: &[f64], bw: f64| {
            let g = if (bw - 2.0).abs() < 1e-12 {
                gains
            } else {
                quad_axis_gains(bw, d0, d1, n0, grav)
            };
            let ux = -g[0] * r[0] - g[1] * r[1] - g[2] * r[2] - g[3] * r[3];
            let uy = -g[0] * r[4] - g[1] * r[5] - g[2] * r[6] - g[3] * r[7];
            let mut u = vec![ux, uy];
            clamp_to(&ctrl_clamp, &mut u);
            u
        }),
    })
}
