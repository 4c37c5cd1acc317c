//! TOML run configuration and environment files.
//!
//! A run configuration has four sections:
//!
//! ```toml
//! [model]                       # catalog pair and parameter overrides
//! name = "quad10d_int3d"
//! [model.params]
//! d_max = 0.1
//!
//! [solver]                      # all optional, defaults shown
//! horizon = 30.0
//! cfl = 0.5
//! tolerance = 1e-3
//! snapshots = 9
//! max_steps = 2000000
//! convergence_window = 0.5
//! dissipation = "stencil-local" # or "global"
//! parallel = true
//!
//! [[grids]]                     # one per subsystem (or a single block);
//! lower = [-2.0, -2.0]          # omit the section to use model defaults
//! upper = [2.0, 2.0]
//! nodes = [101, 101]
//! periodic = [false, false]
//!
//! [teb]
//! eps = 0.01                    # omit for the automatic two-cell slack
//!
//! [simulate]                    # only needed by `simulate`
//! environment = "world.toml"
//! values = ["out/quad.x.ftvf", "out/quad.y.ftvf", "out/quad.z.ftvf"]
//! planner = "rrt"               # or "grid"
//! dt = 0.01
//! max_steps = 20000
//! seed = 42
//! disturbance = "adversarial"   # "zero" | "random" | "adversarial"
//! disturbance_seed = 7
//! time_varying = false
//! lookahead_steps = 32
//! allow_undersized_sensor = false
//! initial_tracking = [-12.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]
//! [simulate.hybrid]
//! rule = "value-fraction"       # or "error-threshold"
//! fraction = 0.25
//! threshold = 0.02
//! bandwidth = 2.0
//! [simulate.planner_params]
//! resolution = 0.05             # grid planner lattice cell
//! expansion_budget = 2000000
//! steer_step = 3.0              # RRT
//! goal_bias = 0.1
//! max_iters = 30000
//! ```
//!
//! Environment files list world bounds, the goal box, the sensor, and the
//! true obstacles, all over planning-state dimensions:
//!
//! ```toml
//! bounds_lower = [-15.0, -5.0, -5.0]
//! bounds_upper = [15.0, 5.0, 5.0]
//! goal_lower = [11.0, -1.0, -1.0]
//! goal_upper = [13.0, 1.0, 1.0]
//! [sensor]
//! kind = "radial"               # or "fan"
//! radius = 1.5
//! half_angle = 0.5236           # fan only
//! [[obstacles]]
//! lower = [-2.0, -3.0, -3.0]
//! upper = [2.0, 3.0, 3.0]
//! dims = [0, 1, 2]              # optional; defaults to 0..lower.len()
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use fastrack::grid::Grid;
use fastrack::hjsolver::{Dissipation, SolverConfig};
use fastrack::relsys::{make_model, BoxSet, DomainSpec, ModelPair};
use fastrack::sim::{DisturbancePolicy, HybridConfig, SwitchRule};
use fastrack::world::{Environment, Obstacle, SensorModel};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub grids: Vec<GridSection>,
    #[serde(default)]
    pub teb: TebSection,
    pub simulate: Option<SimulateSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub horizon: f64,
    pub cfl: f64,
    pub tolerance: f64,
    pub snapshots: usize,
    pub max_steps: usize,
    pub convergence_window: f64,
    pub dissipation: String,
    pub parallel: bool,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::new(1.0);
        Self {
            horizon: 30.0,
            cfl: d.cfl,
            tolerance: d.tolerance,
            snapshots: d.snapshots,
            max_steps: d.max_steps,
            convergence_window: d.convergence_window,
            dissipation: "stencil-local".into(),
            parallel: d.parallel,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub nodes: Vec<usize>,
    pub periodic: Vec<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TebSection {
    /// Sublevel slack; omit for the automatic two-cell default.
    pub eps: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub environment: PathBuf,
    #[serde(default)]
    pub values: Vec<PathBuf>,
    pub planner: String,
    pub dt: f64,
    pub max_steps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_disturbance")]
    pub disturbance: String,
    #[serde(default)]
    pub disturbance_seed: u64,
    #[serde(default)]
    pub time_varying: bool,
    #[serde(default = "default_lookahead")]
    pub lookahead_steps: usize,
    #[serde(default)]
    pub allow_undersized_sensor: bool,
    pub initial_tracking: Vec<f64>,
    #[serde(default)]
    pub hybrid: HybridSection,
    #[serde(default)]
    pub planner_params: PlannerParams,
}

fn default_disturbance() -> String {
    "zero".into()
}

fn default_lookahead() -> usize {
    32
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HybridSection {
    pub rule: String,
    pub fraction: f64,
    pub threshold: f64,
    pub bandwidth: f64,
}

impl Default for HybridSection {
    fn default() -> Self {
        Self {
            rule: "value-fraction".into(),
            fraction: 0.25,
            threshold: 0.02,
            bandwidth: 2.0,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerParams {
    pub resolution: Option<f64>,
    pub expansion_budget: usize,
    pub steer_step: f64,
    pub goal_bias: f64,
    pub max_iters: usize,
}

impl Default for PlannerParams {
    fn default() -> Self {
        Self {
            resolution: None,
            expansion_budget: 2_000_000,
            steer_step: 3.0,
            goal_bias: 0.1,
            max_iters: 30_000,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: RunConfig = toml::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if !(self.solver.horizon > 0.0) {
            bail!("solver.horizon must be positive");
        }
        if self.solver.snapshots < 2 {
            bail!("solver.snapshots must be at least 2");
        }
        match self.solver.dissipation.as_str() {
            "stencil-local" | "global" => {}
            other => bail!("solver.dissipation must be stencil-local or global, got `{other}`"),
        }
        if let Some(eps) = self.teb.eps {
            if eps < 0.0 {
                bail!("teb.eps must be nonnegative");
            }
        }
        for (i, g) in self.grids.iter().enumerate() {
            let n = g.lower.len();
            if g.upper.len() != n || g.nodes.len() != n || g.periodic.len() != n {
                bail!("grids[{i}]: lower/upper/nodes/periodic lengths differ");
            }
            if let Some(&bad) = g.nodes.iter().find(|&&k| k < 3) {
                bail!("grids[{i}]: every dimension needs at least 3 nodes, got {bad}");
            }
        }
        if let Some(sim) = &self.simulate {
            match sim.planner.as_str() {
                "grid" | "rrt" => {}
                other => bail!("simulate.planner must be grid or rrt, got `{other}`"),
            }
            match sim.disturbance.as_str() {
                "zero" | "random" | "adversarial" => {}
                other => bail!("simulate.disturbance must be zero|random|adversarial, got `{other}`"),
            }
            match sim.hybrid.rule.as_str() {
                "value-fraction" | "error-threshold" => {}
                other => bail!("simulate.hybrid.rule unknown: `{other}`"),
            }
            if !(sim.dt > 0.0) {
                bail!("simulate.dt must be positive");
            }
        }
        Ok(())
    }

    pub fn pair(&self) -> Result<ModelPair> {
        Ok(make_model(&self.model.name, &self.model.params)?)
    }

    pub fn solver_config(&self) -> SolverConfig {
        let mut cfg = SolverConfig::new(self.solver.horizon);
        cfg.cfl = self.solver.cfl;
        cfg.tolerance = self.solver.tolerance;
        cfg.snapshots = self.solver.snapshots;
        cfg.max_steps = self.solver.max_steps;
        cfg.convergence_window = self.solver.convergence_window;
        cfg.dissipation = match self.solver.dissipation.as_str() {
            "global" => Dissipation::GlobalBound,
            _ => Dissipation::StencilLocal,
        };
        cfg.parallel = self.solver.parallel;
        cfg
    }

    /// Resolve grids: configured sections, or the model's default domains.
    pub fn grids_for(&self, domains: &[&DomainSpec]) -> Result<Vec<Arc<Grid>>> {
        if self.grids.is_empty() {
            return domains
                .iter()
                .map(|d| Ok(Grid::from_bounds(&d.lower, &d.upper, &d.nodes, &d.periodic)?))
                .collect();
        }
        if self.grids.len() != domains.len() {
            bail!(
                "config declares {} grids but the model needs {}",
                self.grids.len(),
                domains.len()
            );
        }
        self.grids
            .iter()
            .map(|g| Ok(Grid::from_bounds(&g.lower, &g.upper, &g.nodes, &g.periodic)?))
            .collect()
    }

    pub fn hybrid(&self) -> Result<HybridConfig> {
        let Some(sim) = &self.simulate else {
            bail!("config has no [simulate] section");
        };
        Ok(HybridConfig {
            rule: match sim.hybrid.rule.as_str() {
                "error-threshold" => SwitchRule::ErrorThreshold(sim.hybrid.threshold),
                _ => SwitchRule::ValueFraction(sim.hybrid.fraction),
            },
            bandwidth: sim.hybrid.bandwidth,
        })
    }

    pub fn policy(&self) -> Result<DisturbancePolicy> {
        let Some(sim) = &self.simulate else {
            bail!("config has no [simulate] section");
        };
        Ok(match sim.disturbance.as_str() {
            "random" => DisturbancePolicy::UniformRandom {
                seed: sim.disturbance_seed,
            },
            "adversarial" => DisturbancePolicy::Adversarial,
            _ => DisturbancePolicy::Zero,
        })
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentFile {
    pub bounds_lower: Vec<f64>,
    pub bounds_upper: Vec<f64>,
    pub goal_lower: Vec<f64>,
    pub goal_upper: Vec<f64>,
    pub sensor: SensorSection,
    #[serde(default)]
    pub obstacles: Vec<ObstacleSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSection {
    pub kind: String,
    pub radius: f64,
    pub half_angle: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleSection {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub dims: Option<Vec<usize>>,
}

impl EnvironmentFile {
    pub fn load(path: &Path) -> Result<Environment> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading environment {}", path.display()))?;
        let file: EnvironmentFile = toml::from_str(&text)
            .with_context(|| format!("parsing environment {}", path.display()))?;
        file.build()
    }

    pub fn build(&self) -> Result<Environment> {
        let sensor = match self.sensor.kind.as_str() {
            "radial" => SensorModel::Radial {
                radius: self.sensor.radius,
            },
            "fan" => SensorModel::Fan {
                radius: self.sensor.radius,
                half_angle: self
                    .sensor
                    .half_angle
                    .context("fan sensor needs half_angle")?,
            },
            other => bail!("sensor.kind must be radial or fan, got `{other}`"),
        };
        let mut obstacles = Vec::new();
        for (i, o) in self.obstacles.iter().enumerate() {
            let dims = o
                .dims
                .clone()
                .unwrap_or_else(|| (0..o.lower.len()).collect());
            obstacles.push(
                Obstacle::new(o.lower.clone(), o.upper.clone(), dims)
                    .with_context(|| format!("obstacle {i}"))?,
            );
        }
        Ok(Environment {
            bounds: BoxSet::new(self.bounds_lower.clone(), self.bounds_upper.clone())?,
            goal: BoxSet::new(self.goal_lower.clone(), self.goal_upper.clone())?,
            obstacles,
            sensor,
        })
    }
}
