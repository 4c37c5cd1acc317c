use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn pair(name: &str) -> ModelPair {
    make_model(name, &BTreeMap::new()).unwrap()
}

fn overrides(kv: &[(&str, f64)]) -> BTreeMap<String, f64> {
    kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn sample_box(b: &BoxSet, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..b.dim())
        .map(|i| {
            if b.lower()[i] == b.upper()[i] {
                b.lower()[i]
            } else {
                rng.random_range(b.lower()[i]..b.upper()[i])
            }
        })
        .collect()
}

#[test]
fn relative_state_zero_error_when_states_match() {
    for name in ["rel1d", "dint2d", "car5d_car3d", "quad10d_int3d", "quad8d_int4d"] {
        let m = pair(name);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s: Vec<f64> = (0..m.tracking.state_dim())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let p = m.project_tracking(&s);
        let r = relative_state(&s, &p, &m.relative).unwrap();
        for &i in &m.relative.error_indices {
            assert!(
                r[i].abs() < 1e-12,
                "{name}: error component {i} nonzero: {}",
                r[i]
            );
        }
    }
}

#[test]
fn relative_state_car_aligned() {
    let m = pair("car5d_car3d");
    let s = [1.0, 2.0, FRAC_PI_2, 0.1, 0.0];
    let p = [1.0, 2.0, FRAC_PI_2];
    let r = relative_state(&s, &p, &m.relative).unwrap();
    let expect = [0.0, 0.0, 0.0, 0.1, 0.0];
    for i in 0..5 {
        assert!((r[i] - expect[i]).abs() < 1e-12, "component {i}: {r:?}");
    }
}

#[test]
fn relative_state_car_rotation_block() {
    let m = pair("car5d_car3d");
    let s = [1.0, 0.0, 0.0, 0.0, 0.0];
    let p = [0.0, 0.0, FRAC_PI_2];
    let r = relative_state(&s, &p, &m.relative).unwrap();
    assert!(r[0].abs() < 1e-12, "x_r = cos(pi/2): {}", r[0]);
    assert!((r[1] + 1.0).abs() < 1e-12, "y_r = -sin(pi/2): {}", r[1]);
    assert!((r[2] + FRAC_PI_2).abs() < 1e-12, "theta_r: {}", r[2]);
}

#[test]
fn relative_state_dimension_mismatch() {
    let m = pair("car5d_car3d");
    assert!(matches!(
        relative_state(&[0.0; 4], &[0.0; 3], &m.relative),
        Err(Error::InvalidArgument(_))
    ));
    assert!(matches!(
        relative_state(&[0.0; 5], &[0.0; 2], &m.relative),
        Err(Error::InvalidArgument(_))
    ));
}

#[test]
fn relative_flow_car_origin() {
    // At r = 0 with all inputs zero, only the constant planner speed remains.
    let m = pair("car5d_car3d");
    let g = m
        .relative
        .relative_flow(&[0.0; 5], &[0.0; 2], &[0.0], &[0.0; 4])
        .unwrap();
    assert!((g[0] + 0.1).abs() < 1e-12, "x_r rate: {}", g[0]);
    for i in 1..5 {
        assert!(g[i].abs() < 1e-12, "component {i}: {g:?}");
    }
}

#[test]
fn relative_flow_quad10_axis_equilibrium() {
    let m = pair("quad10d_int3d");
    let sub = &m.decomposition.as_ref().unwrap()[0];
    // θ_x = 0, ω_x = 0, u_x = 0, v_x = v̂_x, d_x = 0 → all derivatives vanish.
    let g = sub
        .relative
        .relative_flow(&[0.3, 0.4, 0.0, 0.0], &[0.0], &[0.4], &[0.0])
        .unwrap();
    for (i, v) in g.iter().enumerate() {
        assert!(v.abs() < 1e-12, "component {i}: {g:?}");
    }
}

#[test]
fn relative_flow_quad8_axis_accel() {
    let m = pair("quad8d_int4d");
    let sub = &m.decomposition.as_ref().unwrap()[0];
    // θ_x = 0, â_x = 1, everything else 0 → v̇_{x,r} = −1.
    let g = sub
        .relative
        .relative_flow(&[0.0; 4], &[0.0], &[1.0], &[0.0])
        .unwrap();
    assert!(g[0].abs() < 1e-12);
    assert!((g[1] + 1.0).abs() < 1e-12, "v_r rate: {}", g[1]);
    assert!(g[2].abs() < 1e-12 && g[3].abs() < 1e-12);
}

#[test]
fn relative_flow_rejects_out_of_box_inputs() {
    let m = pair("rel1d");
    assert!(m
        .relative
        .relative_flow(&[0.0], &[2.0], &[0.0], &[0.0])
        .is_err());
    assert!(m
        .relative
        .relative_flow(&[0.0], &[0.5], &[0.9], &[0.0])
        .is_err());
    assert!(m
        .relative
        .relative_flow(&[0.0], &[0.5], &[0.2], &[0.5])
        .is_err());
}

#[test]
fn make_model_paper_parameters() {
    let q = pair("quad10d_int3d");
    for i in 0..3 {
        assert_eq!(q.relative.disturbance_set.lower()[i], -0.1);
        assert_eq!(q.relative.disturbance_set.upper()[i], 0.1);
    }
    assert!((q.params["u_xy_max"] - PI / 9.0).abs() < 1e-15);
    assert_eq!(q.params["u_z_max"], 1.5 * 9.81);
    assert_eq!(q.params["k_t"], 0.91);
    assert_eq!(q.params["d0"], 10.0);
    assert_eq!(q.params["d1"], 8.0);
    assert_eq!(q.params["n0"], 10.0);

    let c = pair("car5d_car3d");
    assert_eq!(c.params["v_hat"], 0.1);
    assert_eq!(c.planning.control_set.upper()[0], 1.5);
    assert_eq!(c.planning.control_set.lower()[0], -1.5);
}

#[test]
fn make_model_rel1d_overrides() {
    let m = make_model(
        "rel1d",
        &overrides(&[("u_max", 1.0), ("uhat_max", 0.5), ("d_max", 0.2)]),
    )
    .unwrap();
    let g = m
        .relative
        .relative_flow(&[0.0], &[0.7], &[0.3], &[-0.1])
        .unwrap();
    assert!((g[0] - (0.7 - 0.3 - 0.1)).abs() < 1e-15);
}

#[test]
fn make_model_errors() {
    assert!(matches!(
        make_model("nope", &BTreeMap::new()),
        Err(Error::NotFound(_))
    ));
    assert!(make_model("rel1d", &overrides(&[("u_max", -1.0)])).is_err());
    assert!(make_model("rel1d", &overrides(&[("typo", 1.0)])).is_err());
}

#[test]
fn quad_decompositions_have_expected_shape() {
    let q10 = pair("quad10d_int3d");
    let subs = q10.decomposition.as_ref().unwrap();
    assert_eq!(subs.len(), 3);
    assert_eq!(subs[0].relative.dim(), 4);
    assert_eq!(subs[1].relative.dim(), 4);
    assert_eq!(subs[2].relative.dim(), 2);

    let q8 = pair("quad8d_int4d");
    let subs = q8.decomposition.as_ref().unwrap();
    assert_eq!(subs.len(), 2);
    assert!(subs.iter().all(|s| s.relative.dim() == 4));
}

/// Affine accessors must reconstruct the hand-written flow exactly, and the
/// flow must be linear in each input slot.
#[test]
fn affine_reconstruction_and_linearity() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for name in ["rel1d", "dint2d", "car5d_car3d", "quad10d_int3d", "quad8d_int4d"] {
        let m = pair(name);
        let mut systems: Vec<&RelativeSystem> = vec![&m.relative];
        if let Some(d) = &m.decomposition {
            systems.extend(d.iter().map(|s| &s.relative));
        }
        for rel in systems {
            let n = rel.dim();
            for _ in 0..20 {
                let r: Vec<f64> = (0..n).map(|_| rng.random_range(-0.5..0.5)).collect();
                let u = sample_box(&rel.control_set, &mut rng);
                let up = sample_box(&rel.plan_control_set, &mut rng);
                let d = sample_box(&rel.disturbance_set, &mut rng);

                // Reconstruction from affine parts.
                let nu = rel.dynamics.ctrl_dim();
                let np = rel.dynamics.plan_dim();
                let nd = rel.dynamics.dist_dim();
                let mut recon = vec![0.0; n];
                rel.dynamics.drift(&r, &mut recon);
                let mut jac = vec![0.0; n * nu.max(np).max(nd).max(1)];
                if nu > 0 {
                    rel.dynamics.ctrl_jacobian(&r, &mut jac[..n * nu]);
                    for row in 0..n {
                        for col in 0..nu {
                            recon[row] += jac[row * nu + col] * u[col];
                        }
                    }
                }
                if np > 0 {
                    rel.dynamics.plan_jacobian(&r, &mut jac[..n * np]);
                    for row in 0..n {
                        for col in 0..np {
                            recon[row] += jac[row * np + col] * up[col];
                        }
                    }
                }
                if nd > 0 {
                    rel.dynamics.dist_jacobian(&r, &mut jac[..n * nd]);
                    for row in 0..n {
                        for col in 0..nd {
                            recon[row] += jac[row * nd + col] * d[col];
                        }
                    }
                }
                let direct = rel.relative_flow(&r, &u, &up, &d).unwrap();
                for i in 0..n {
                    assert!(
                        (recon[i] - direct[i]).abs() < 1e-10,
                        "{}: affine mismatch at {i}: {} vs {}",
                        rel.name,
                        recon[i],
                        direct[i]
                    );
                }

                // Linearity in each slot: f(mid + t·δ) must be affine in t.
                let mid_u: Vec<f64> = (0..nu).map(|i| rel.control_set.midpoint(i)).collect();
                let mid_p: Vec<f64> = (0..np).map(|i| rel.plan_control_set.midpoint(i)).collect();
                let mid_d: Vec<f64> = (0..nd).map(|i| rel.disturbance_set.midpoint(i)).collect();
                let f0 = rel.relative_flow(&r, &mid_u, &mid_p, &mid_d).unwrap();
                let f1 = rel.relative_flow(&r, &u, &mid_p, &mid_d).unwrap();
                let half_u: Vec<f64> = mid_u
                    .iter()
                    .zip(&u)
                    .map(|(m, v)| 0.5 * (m + v))
                    .collect();
                let fh = rel.relative_flow(&r, &half_u, &mid_p, &mid_d).unwrap();
                for i in 0..n {
                    let expect = 0.5 * (f0[i] + f1[i]);
                    assert!(
                        (fh[i] - expect).abs() < 1e-10,
                        "{}: flow not linear in u at {i}",
                        rel.name
                    );
                }
            }
        }
    }
}

/// Joint evaluation of the decomposed subsystems reproduces the full relative
/// flow.
#[test]
fn decomposition_reproduces_full_flow() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for name in ["quad10d_int3d", "quad8d_int4d"] {
        let m = pair(name);
        let rel = &m.relative;
        let subs = m.decomposition.as_ref().unwrap();

        // Subsystems must not share state variables.
        let mut seen = vec![false; rel.dim()];
        for sub in subs {
            for &i in &sub.state_map {
                assert!(!seen[i], "{name}: state {i} shared between subsystems");
                seen[i] = true;
            }
        }
        assert!(seen.iter().all(|&b| b), "{name}: decomposition not exhaustive");

        for _ in 0..20 {
            let r: Vec<f64> = (0..rel.dim()).map(|_| rng.random_range(-0.4..0.4)).collect();
            let u = sample_box(&rel.control_set, &mut rng);
            let up = sample_box(&rel.plan_control_set, &mut rng);
            let d = sample_box(&rel.disturbance_set, &mut rng);
            let full = rel.relative_flow(&r, &u, &up, &d).unwrap();
            let mut joint = vec![0.0; rel.dim()];
            for sub in subs {
                let rs = sub.gather_state(&r);
                let us: Vec<f64> = sub.ctrl_map.iter().map(|&i| u[i]).collect();
                let ps: Vec<f64> = sub.plan_map.iter().map(|&i| up[i]).collect();
                let ds: Vec<f64> = sub.dist_map.iter().map(|&i| d[i]).collect();
                let gs = sub.relative.relative_flow(&rs, &us, &ps, &ds).unwrap();
                for (k, &i) in sub.state_map.iter().enumerate() {
                    joint[i] = gs[k];
                }
            }
            for i in 0..rel.dim() {
                assert!(
                    (joint[i] - full[i]).abs() < 1e-12,
                    "{name}: joint flow mismatch at {i}"
                );
            }

            // The max-form error function decomposes as max of subsystem costs.
            let composed = subs
                .iter()
                .map(|s| s.relative.error(&s.gather_state(&r)))
                .fold(f64::NEG_INFINITY, f64::max);
            assert!((composed - rel.error(&r)).abs() < 1e-12);
        }
    }
}

fn rk4(f: &dyn Fn(&[f64], &mut [f64]), x: &mut [f64], dt: f64) {
    let n = x.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    f(x, &mut k1);
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * dt * k1[i];
    }
    f(&tmp, &mut k2);
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * dt * k2[i];
    }
    f(&tmp, &mut k3);
    for i in 0..n {
        tmp[i] = x[i] + dt * k3[i];
    }
    f(&tmp, &mut k4);
    for i in 0..n {
        x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

/// Differentiating `r = Φ(s, p)(s − Q p)` along simultaneously integrated
/// tracking and planning trajectories reproduces the relative flow. For the
/// rotation-frame pair the planar disturbance is held at zero, since its
/// printed relative dynamics express that disturbance in the rotated frame.
#[test]
fn relative_state_derivative_matches_relative_flow() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for name in ["rel1d", "dint2d", "car5d_car3d", "quad10d_int3d", "quad8d_int4d"] {
        let m = pair(name);
        let rel = &m.relative;
        let rotation = !matches!(rel.transform, TransformKind::Identity);
        for trial in 0..5 {
            let mut s: Vec<f64> = (0..m.tracking.state_dim())
                .map(|_| rng.random_range(-0.3..0.3))
                .collect();
            let mut p: Vec<f64> = (0..m.planning.state_dim())
                .map(|_| rng.random_range(-0.3..0.3))
                .collect();
            let u = sample_box(&m.tracking.control_set, &mut rng);
            let up = sample_box(&m.planning.control_set, &mut rng);
            let mut d = sample_box(&m.tracking.disturbance_set, &mut rng);
            if rotation {
                d[0] = 0.0;
                d[1] = 0.0;
            }

            let dt = 1e-4;
            let steps = 40;
            for _ in 0..steps {
                let r = relative_state(&s, &p, rel).unwrap();
                let flow = rel.relative_flow(&r, &u, &up, &d).unwrap();

                let su = u.clone();
                let sd = d.clone();
                let track = m.tracking.clone();
                let plan_model = m.planning.clone();
                let pu = up.clone();
                rk4(&|x, out| track.flow(x, &su, &sd, out), &mut s, dt);
                rk4(&|x, out| plan_model.flow(x, &pu, out), &mut p, dt);

                let r_next = relative_state(&s, &p, rel).unwrap();
                for i in 0..rel.dim() {
                    let numeric = (r_next[i] - r[i]) / dt;
                    assert!(
                        (numeric - flow[i]).abs() < 5e-3,
                        "{name} trial {trial}: d/dt mismatch at {i}: numeric {numeric} vs flow {}",
                        flow[i]
                    );
                }
            }
        }
    }
}

#[test]
fn error_functions_nonnegative_and_error_state_only() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for name in ["rel1d", "dint2d", "car5d_car3d", "quad10d_int3d"] {
        let m = pair(name);
        let rel = &m.relative;
        for _ in 0..50 {
            let mut r: Vec<f64> = (0..rel.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let l = rel.error(&r);
            assert!(l >= 0.0);
            // Perturbing auxiliary states must not change l for these pairs.
            for &i in &rel.aux_indices {
                r[i] += rng.random_range(-1.0..1.0);
            }
            assert!((rel.error(&r) - l).abs() < 1e-12, "{name}: l depends on aux state");
        }
    }
}

#[test]
fn boxset_rejects_inverted_bounds() {
    assert!(BoxSet::new(vec![1.0], vec![-1.0]).is_err());
    assert!(BoxSet::new(vec![0.0, 0.0], vec![1.0]).is_err());
}
