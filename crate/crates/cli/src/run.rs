//! Command implementations.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};

use fastrack::hjsolver::{solve_hjvi, DecomposedPart, DecomposedValue, ValueFunction};
use fastrack::planning::{GridPlanner, MotionModel, Planner, RrtPlanner};
use fastrack::relsys::{ModelPair, Subsystem};
use fastrack::sim::{metrics, run_online, Scenario, SimLog};
use fastrack::teb::{teb_extents, ComposedTeb, SingleTeb, TebQuery, TebSource};

use crate::config::{EnvironmentFile, RunConfig};
use crate::vffile::{self, FileHeader};

fn subsystem_domains(pair: &ModelPair) -> Vec<&fastrack::relsys::DomainSpec> {
    match &pair.decomposition {
        Some(subs) => subs.iter().map(|s| &s.relative.default_domain).collect(),
        None => vec![&pair.relative.default_domain],
    }
}

fn block_label(sub: &Subsystem, index: usize) -> String {
    sub.relative
        .name
        .rsplit_once(':')
        .map(|(_, s)| s.to_string())
        .unwrap_or_else(|| index.to_string())
}

fn output_paths(pair: &ModelPair, stem: &Path) -> Vec<PathBuf> {
    let base = stem.with_extension("");
    match &pair.decomposition {
        Some(subs) => subs
            .iter()
            .enumerate()
            .map(|(k, sub)| base.with_extension(format!("{}.ftvf", block_label(sub, k))))
            .collect(),
        None => vec![base.with_extension("ftvf")],
    }
}

/// Offline precomputation: solve the HJ variational inequality (decomposed
/// when the pair decomposes) and persist one file per solved block.
pub fn cmd_precompute(config_path: &Path, out: &Path) -> Result<i32> {
    let cfg = RunConfig::load(config_path)?;
    let pair = cfg.pair()?;
    let solver_cfg = cfg.solver_config();
    let grids = cfg.grids_for(&subsystem_domains(&pair))?;
    let paths = output_paths(&pair, out);

    let total_nodes: usize = grids.iter().map(|g| g.len()).sum();
    let mem_estimate =
        total_nodes as f64 * (solver_cfg.snapshots as f64 + 3.0) * 8.0 / (1024.0 * 1024.0);
    println!(
        "precompute: model={} blocks={} nodes={} est. peak memory {:.1} MiB",
        pair.name,
        grids.len(),
        total_nodes,
        mem_estimate
    );

    let t0 = Instant::now();
    match &pair.decomposition {
        Some(subs) => {
            for ((sub, grid), path) in subs.iter().zip(&grids).zip(&paths) {
                let t = Instant::now();
                let vf = solve_hjvi(&sub.relative, grid, &solver_cfg)?;
                report_block(&sub.relative, &vf, cfg.teb.eps, t.elapsed());
                let header = vffile::header_for(
                    &vf,
                    &sub.relative.name,
                    &pair.params,
                    &sub.relative.error_indices,
                );
                vffile::write_file(path, &vf, header, cfg.teb.eps)?;
                println!("  wrote {}", path.display());
            }
        }
        None => {
            let vf = solve_hjvi(&pair.relative, &grids[0], &solver_cfg)?;
            report_block(&pair.relative, &vf, cfg.teb.eps, t0.elapsed());
            let header = vffile::header_for(
                &vf,
                &pair.relative.name,
                &pair.params,
                &pair.relative.error_indices,
            );
            vffile::write_file(&paths[0], &vf, header, cfg.teb.eps)?;
            println!("  wrote {}", paths[0].display());
        }
    }
    println!("total wall time {:?}", t0.elapsed());
    Ok(0)
}

fn report_block(
    rel: &fastrack::relsys::RelativeSystem,
    vf: &ValueFunction,
    eps: Option<f64>,
    wall: std::time::Duration,
) {
    let eps = eps.unwrap_or_else(|| vf.eps_default());
    let status = if vf.converged() {
        "converged"
    } else if vf.truncated() {
        "horizon-truncated"
    } else {
        "horizon reached"
    };
    print!(
        "  {}: {status} at τ={:.3}, v_min={:.6}, eps={eps:.6}, wall {wall:?}",
        rel.name,
        vf.horizon(),
        vf.v_min()
    );
    match teb_extents(vf, rel, 0.0, &TebQuery { eps }) {
        Ok(ext) => {
            let widths: Vec<String> = ext
                .half_widths
                .iter()
                .map(|w| format!("{w:.4}"))
                .collect();
            println!(", extents [{}]", widths.join(", "));
        }
        Err(e) => println!(", extents unavailable ({e})"),
    }
}

/// Human-readable summary of a value-function file. Streams one snapshot at
/// a time.
pub fn cmd_info(path: &Path) -> Result<i32> {
    let mut lines: Vec<String> = Vec::new();
    let header = vffile::stream_snapshots(path, |k, header, values| {
        if k >= header.times.len() {
            return Ok(()); // terminal block
        }
        let level = header.v_min + header.eps;
        let mut half = vec![0.0f64; header.error_dims.len()];
        let mut any = false;
        // Decode node coordinates on the fly for the extents scan.
        let n = header.grid_nodes.len();
        let mut strides = vec![1usize; n];
        for i in (0..n.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * header.grid_nodes[i + 1];
        }
        for (flat, &v) in values.iter().enumerate() {
            if v > level {
                continue;
            }
            any = true;
            for (e, &dim) in header.error_dims.iter().enumerate() {
                let idx = (flat / strides[dim]) % header.grid_nodes[dim];
                let h = if header.grid_periodic[dim] {
                    (header.grid_upper[dim] - header.grid_lower[dim])
                        / header.grid_nodes[dim] as f64
                } else {
                    (header.grid_upper[dim] - header.grid_lower[dim])
                        / (header.grid_nodes[dim] - 1) as f64
                };
                let coord = header.grid_lower[dim] + h * idx as f64;
                half[e] = half[e].max(coord.abs());
            }
        }
        let widths: Vec<String> = half.iter().map(|w| format!("{w:.4}")).collect();
        lines.push(format!(
            "  τ={:.3}: extents [{}]{}",
            header.times[k],
            widths.join(", "),
            if any { "" } else { " (empty sublevel set)" }
        ));
        Ok(())
    })?;
    print_header(&header);
    for line in lines {
        println!("{line}");
    }
    Ok(0)
}

fn print_header(h: &FileHeader) {
    println!("model: {}", h.model);
    println!("error function: {}", h.error_id);
    println!("parameter hash: {}", h.param_hash);
    println!(
        "grid: {:?} nodes over {:?}..{:?} (periodic {:?})",
        h.grid_nodes, h.grid_lower, h.grid_upper, h.grid_periodic
    );
    let status = if h.converged {
        "converged".to_string()
    } else if h.truncated {
        "horizon-truncated".to_string()
    } else {
        format!("{} snapshots to horizon {:.3}", h.times.len(), h.times.last().unwrap())
    };
    println!("status: {status}");
    println!("v_min: {} eps: {}", h.v_min, h.eps);
}

enum LoadedValue {
    Single(ValueFunction),
    Decomposed(DecomposedValue),
}

fn load_values(cfg: &RunConfig, pair: &ModelPair, paths: &[PathBuf]) -> Result<LoadedValue> {
    if paths.is_empty() {
        bail!("simulate.values lists no value-function files");
    }
    let mut loaded: Vec<(FileHeader, ValueFunction)> = Vec::new();
    for p in paths {
        let (header, vf) = vffile::read_file(p)?;
        // Bind the file to this configuration: same model block, parameters
        // and grid must reproduce the stored hash.
        let expect = vffile::parameter_hash(
            &header.model,
            &pair.params,
            &header.grid_lower,
            &header.grid_upper,
            &header.grid_nodes,
            &header.grid_periodic,
            &header.error_id,
        );
        if expect != header.param_hash {
            bail!(
                "{}: parameter hash mismatch (file {}, config {}); refusing to run",
                p.display(),
                header.param_hash,
                expect
            );
        }
        if let Some(eps) = cfg.teb.eps {
            let vf2 = ValueFunction::from_parts(
                vf.grid().clone(),
                vf.times().to_vec(),
                vf.snapshots().to_vec(),
                vf.terminal().clone(),
                vf.converged(),
                vf.truncated(),
                vf.v_min(),
                eps,
                vf.alpha().to_vec(),
                vf.trust_cells(),
                header.model.clone(),
                header.error_id.clone(),
            )?;
            loaded.push((header, vf2));
        } else {
            loaded.push((header, vf));
        }
    }
    match &pair.decomposition {
        Some(subs) if loaded.len() > 1 || subs.len() == loaded.len() => {
            if loaded.len() != subs.len() {
                bail!(
                    "model {} decomposes into {} blocks but {} files were given",
                    pair.name,
                    subs.len(),
                    loaded.len()
                );
            }
            let mut parts = Vec::new();
            for sub in subs {
                let pos = loaded
                    .iter()
                    .position(|(h, _)| h.model == sub.relative.name)
                    .with_context(|| {
                        format!("no value file for subsystem {}", sub.relative.name)
                    })?;
                let (_, vf) = loaded.remove(pos);
                parts.push(DecomposedPart {
                    value: vf,
                    subsystem: sub.clone(),
                });
            }
            Ok(LoadedValue::Decomposed(DecomposedValue::new(parts)?))
        }
        _ => {
            let (header, vf) = loaded.pop().unwrap();
            if header.model != pair.relative.name {
                bail!(
                    "value file is for {} but the config requests {}",
                    header.model,
                    pair.relative.name
                );
            }
            Ok(LoadedValue::Single(vf))
        }
    }
}

fn build_planner(cfg: &RunConfig, pair: &ModelPair) -> Result<Box<dyn Planner>> {
    let sim = cfg.simulate.as_ref().unwrap();
    match sim.planner.as_str() {
        "grid" => {
            let model = if pair.name == "car5d_car3d" {
                MotionModel::Dubins {
                    speed: pair.params["v_hat"],
                    turn_rate_max: pair.params["omega_hat_max"],
                }
            } else {
                MotionModel::Integrator {
                    control_set: pair.planning.control_set.clone(),
                }
            };
            Ok(Box::new(
                GridPlanner::new(model, sim.dt, sim.planner_params.resolution)
                    .with_expansion_budget(sim.planner_params.expansion_budget),
            ))
        }
        "rrt" => {
            if pair.planning.state_dim() != pair.planning.control_set.dim() {
                bail!("the RRT planner requires a velocity-integrator planning model");
            }
            let max_vel: Vec<f64> = pair
                .planning
                .control_set
                .upper()
                .iter()
                .map(|v| v.abs())
                .collect();
            Ok(Box::new(
                RrtPlanner::new(max_vel, sim.planner_params.steer_step, sim.seed)
                    .with_goal_bias(sim.planner_params.goal_bias)
                    .with_iteration_budget(sim.planner_params.max_iters),
            ))
        }
        other => bail!("unknown planner `{other}`"),
    }
}

/// Online simulation: load the value function(s), run the loop, write the
/// CSV log and JSON summary. Nonzero exit iff a safety flag tripped.
pub fn cmd_simulate(config_path: &Path, out_dir: &Path) -> Result<i32> {
    let cfg = RunConfig::load(config_path)?;
    let Some(sim) = &cfg.simulate else {
        bail!("config has no [simulate] section");
    };
    let pair = cfg.pair()?;
    let env_path = resolve_relative(config_path, &sim.environment);
    let env = EnvironmentFile::load(&env_path)?;
    let value_paths: Vec<PathBuf> = sim
        .values
        .iter()
        .map(|p| resolve_relative(config_path, p))
        .collect();
    let loaded = load_values(&cfg, &pair, &value_paths)?;
    let mut planner = build_planner(&cfg, &pair)?;

    let scenario = Scenario {
        env: &env,
        initial_tracking: sim.initial_tracking.clone(),
        dt: sim.dt,
        max_steps: sim.max_steps,
        policy: cfg.policy()?,
        hybrid: cfg.hybrid()?,
        time_varying: sim.time_varying,
        lookahead_steps: sim.lookahead_steps,
        allow_undersized_sensor: sim.allow_undersized_sensor,
    };

    let log = match &loaded {
        LoadedValue::Single(vf) => {
            let source = SingleTeb::new(vf, &pair.relative, TebQuery { eps: vf.eps_default() });
            run_sim(&pair, &source, planner.as_mut(), &scenario)?
        }
        LoadedValue::Decomposed(dec) => {
            let source = ComposedTeb::new(dec, &pair.relative, cfg.teb.eps.unwrap_or_else(|| dec.eps_default()));
            run_sim(&pair, &source, planner.as_mut(), &scenario)?
        }
    };

    std::fs::create_dir_all(out_dir)?;
    let csv_path = out_dir.join("log.csv");
    std::fs::write(&csv_path, log.to_csv())?;
    let summary = metrics(&log);
    let json_path = out_dir.join("summary.json");
    std::fs::write(&json_path, serde_json::to_string_pretty(&summary)?)?;
    println!(
        "simulate: steps={} reached_goal={} violations={} collisions={} max_pos_error={:?}",
        summary.steps,
        summary.reached_goal,
        summary.teb_violations,
        summary.collisions,
        summary.max_pos_error
    );
    println!("wrote {} and {}", csv_path.display(), json_path.display());
    Ok(if summary.teb_violations > 0 || summary.collisions > 0 {
        2
    } else {
        0
    })
}

fn run_sim(
    pair: &ModelPair,
    source: &dyn TebSource,
    planner: &mut dyn Planner,
    scenario: &Scenario,
) -> Result<SimLog> {
    match run_online(pair, source, planner, scenario) {
        Ok(log) => Ok(log),
        Err(failure) => bail!("simulation failed: {failure}"),
    }
}

fn resolve_relative(config_path: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        config_path
            .parent()
            .map(|d| d.join(p))
            .unwrap_or_else(|| p.to_path_buf())
    }
}

/// Export a 2D slice of the final snapshot: free dims vary, all other
/// coordinates are pinned to the nearest node.
pub fn cmd_export_slice(
    file: &Path,
    dims: (usize, usize),
    fixed: &[(usize, f64)],
    out: &Path,
) -> Result<i32> {
    let (header, vf) = vffile::read_file(file)?;
    let grid = vf.grid();
    let n = grid.rank();
    if dims.0 >= n || dims.1 >= n || dims.0 == dims.1 {
        bail!("slice dims out of range");
    }
    let mut pinned: Vec<Option<usize>> = vec![None; n];
    for &(d, x) in fixed {
        if d >= n {
            bail!("fixed coordinate dimension {d} out of range (grid rank {n})");
        }
        let gd = grid.dim(d);
        if x < gd.lower - 1e-9 || x > gd.upper + 1e-9 {
            bail!(
                "fixed coordinate {x} outside dimension {d} bounds [{}, {}]",
                gd.lower,
                gd.upper
            );
        }
        let idx = ((x - gd.lower) / gd.spacing()).round() as usize;
        pinned[d] = Some(idx.min(gd.nodes - 1));
    }
    for d in 0..n {
        if d != dims.0 && d != dims.1 && pinned[d].is_none() {
            bail!("dimension {d} needs a fixed coordinate");
        }
    }
    let last = vf.snapshots().len() - 1;
    let values = vf.snapshots()[last].values();
    let mut rows = String::from("x,y,value\n");
    let mut idx = vec![0usize; n];
    for (d, p) in pinned.iter().enumerate() {
        if let Some(i) = p {
            idx[d] = *i;
        }
    }
    for i in 0..grid.dim(dims.0).nodes {
        for j in 0..grid.dim(dims.1).nodes {
            idx[dims.0] = i;
            idx[dims.1] = j;
            let flat = grid.flatten(&idx);
            rows.push_str(&format!(
                "{},{},{}\n",
                grid.dim(dims.0).coord(i),
                grid.dim(dims.1).coord(j),
                values[flat]
            ));
        }
    }
    std::fs::write(out, rows)?;
    println!(
        "wrote slice of {} (model {}) to {}",
        file.display(),
        header.model,
        out.display()
    );
    Ok(0)
}

/// Export the per-lookahead extents table (the data behind extent-vs-τ
/// plots).
pub fn cmd_export_extents(file: &Path, eps: Option<f64>, out: &Path) -> Result<i32> {
    let (header, vf) = vffile::read_file(file)?;
    let eps = eps.unwrap_or(header.eps);
    let level = vf.v_min() + eps;
    let mut rows = String::from("tau");
    for d in &header.error_dims {
        rows.push_str(&format!(",extent_dim{d}"));
    }
    rows.push('\n');
    let horizon = vf.horizon();
    let taus: Vec<f64> = if vf.converged() {
        vec![0.0]
    } else {
        vf.times().iter().rev().map(|t| horizon - t).collect()
    };
    for tau in taus {
        let k = if vf.converged() {
            0
        } else {
            vf.snapshot_at_or_below(horizon - tau)
        };
        let values = vf.snapshots()[k].values();
        let grid = vf.grid();
        let n = grid.rank();
        let mut half = vec![0.0f64; header.error_dims.len()];
        let mut coords = vec![0.0f64; n];
        for (flat, &v) in values.iter().enumerate() {
            if v > level {
                continue;
            }
            grid.node_coords(flat, &mut coords);
            for (e, &dim) in header.error_dims.iter().enumerate() {
                half[e] = half[e].max(coords[dim].abs());
            }
        }
        rows.push_str(&tau.to_string());
        for h in &half {
            rows.push(',');
            rows.push_str(&h.to_string());
        }
        rows.push('\n');
    }
    std::fs::write(out, rows)?;
    println!("wrote extents table to {}", out.display());
    Ok(0)
}

/// Recompute the JSON summary from a CSV log.
pub fn cmd_export_log(csv: &Path, out: &Path) -> Result<i32> {
    let text = std::fs::read_to_string(csv)?;
    let log = SimLog::from_csv(&text)?;
    let summary = metrics(&log);
    std::fs::write(out, serde_json::to_string_pretty(&summary)?)?;
    println!("wrote summary to {}", out.display());
    Ok(0)
}
