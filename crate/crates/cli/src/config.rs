//! JSON run configuration.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context};
use serde::{Deserialize, Serialize};

use lyapstab::lp::SolveOptions;
use lyapstab::simulate::{InitialConditions, RolloutConfig};
use lyapstab::stabilization::Tolerances;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemConfig,
    #[serde(default)]
    pub partition: Option<PartitionConfig>,
    #[serde(default)]
    pub control: Option<ControlConfig>,
    #[serde(default)]
    pub discretization: DiscretizationConfig,
    pub lp: LpConfig,
    #[serde(default)]
    pub simulate: Option<SimulateConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemConfig {
    StandardMap {
        #[serde(default = "default_k")]
        k: f64,
    },
    Identity,
    Shift,
    /// Row-stochastic matrices given directly; the last cell is the attractor.
    Explicit {
        matrices: Vec<Vec<Vec<f64>>>,
        #[serde(default)]
        labels: Option<Vec<String>>,
    },
}

fn default_k() -> f64 {
    0.25
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub wrap: Vec<bool>,
    pub cells_per_dim: Vec<usize>,
    pub attractor_points: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ControlConfig {
    /// `"lo:step:hi"` over a scalar control.
    Range(String),
    Values(Vec<Vec<f64>>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingConfig {
    Stratified,
    SeededRandom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscretizationConfig {
    pub samples_per_cell: usize,
    pub mode: SamplingConfig,
    pub seed: u64,
}

impl Default for DiscretizationConfig {
    fn default() -> Self {
        Self { samples_per_cell: 10, mode: SamplingConfig::Stratified, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CostConfig {
    /// `G(x, u) = sum_d w_d x_d^2 + sum_k r_k u_k^2`, evaluated at cell centers.
    Quadratic { state_weights: Vec<f64>, control_weights: Vec<f64> },
    /// `values[a][j]` for action `a` and non-attractor cell `j`.
    Tabulated { values: Vec<Vec<f64>> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureConfig {
    /// Cell volumes; `1/N` per cell for explicit systems.
    Lebesgue,
    Values(Vec<f64>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseMode {
    /// Run the l1 phase only when the reachability tree leaves cells out.
    Auto,
    Always,
    Never,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceConfig {
    #[serde(default = "d_feas")]
    pub feas_tol: f64,
    #[serde(default = "d_kkt")]
    pub kkt_tol: f64,
    #[serde(default = "d_gap")]
    pub duality_tol: f64,
    #[serde(default = "d_support")]
    pub theta_support_tol: f64,
    #[serde(default = "d_rho")]
    pub rho_tol: f64,
}

fn d_feas() -> f64 {
    Tolerances::default().feas_tol
}
fn d_kkt() -> f64 {
    Tolerances::default().kkt_tol
}
fn d_gap() -> f64 {
    Tolerances::default().duality_tol
}
fn d_support() -> f64 {
    Tolerances::default().theta_support_tol
}
fn d_rho() -> f64 {
    Tolerances::default().rho_tol
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        let t = Tolerances::default();
        Self {
            feas_tol: t.feas_tol,
            kkt_tol: t.kkt_tol,
            duality_tol: t.duality_tol,
            theta_support_tol: t.theta_support_tol,
            rho_tol: t.rho_tol,
        }
    }
}

impl From<&ToleranceConfig> for Tolerances {
    fn from(t: &ToleranceConfig) -> Self {
        Self {
            feas_tol: t.feas_tol,
            kkt_tol: t.kkt_tol,
            duality_tol: t.duality_tol,
            theta_support_tol: t.theta_support_tol,
            rho_tol: t.rho_tol,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LpConfig {
    pub gamma: f64,
    pub cost: CostConfig,
    #[serde(default = "d_measure")]
    pub measure: MeasureConfig,
    #[serde(default)]
    pub tolerances: ToleranceConfig,
    #[serde(default = "d_phase")]
    pub feasibility_phase: PhaseMode,
    /// Relative residual above which the l1 phase masks a cell.
    #[serde(default = "d_resid")]
    pub resid_tol: f64,
    #[serde(default = "d_iters")]
    pub max_iters: usize,
    #[serde(default)]
    pub bland: bool,
}

fn d_measure() -> MeasureConfig {
    MeasureConfig::Lebesgue
}
fn d_phase() -> PhaseMode {
    PhaseMode::Auto
}
fn d_resid() -> f64 {
    1e-7
}
fn d_iters() -> usize {
    SolveOptions::default().max_iters
}

impl LpConfig {
    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions { max_iters: self.max_iters, bland: self.bland, ..SolveOptions::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConditionConfig {
    CellCenters,
    SeededUniform { count: usize, seed: u64 },
    Points(Vec<Vec<f64>>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub initial_conditions: InitialConditionConfig,
    pub horizon: usize,
    #[serde(default)]
    pub epsilon_radius: f64,
    #[serde(default)]
    pub record_trajectories: bool,
}

impl SimulateConfig {
    pub fn rollout_config(&self) -> RolloutConfig {
        let initial_conditions = match &self.initial_conditions {
            InitialConditionConfig::CellCenters => InitialConditions::CellCenters,
            InitialConditionConfig::SeededUniform { count, seed } => {
                InitialConditions::SeededUniform { count: *count, seed: *seed }
            }
            InitialConditionConfig::Points(p) => InitialConditions::Points(p.clone()),
        };
        RolloutConfig {
            initial_conditions,
            horizon: self.horizon,
            epsilon_radius: self.epsilon_radius,
            record_trajectories: self.record_trajectories,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "d_dir")]
    pub directory: PathBuf,
    #[serde(default = "yes")]
    pub transitions: bool,
    #[serde(default)]
    pub mps: bool,
}

fn d_dir() -> PathBuf {
    PathBuf::from("out")
}
fn yes() -> bool {
    true
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { directory: d_dir(), transitions: true, mps: false }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> anyhow::Result<Self> {
        let cfg: Self = serde_json::from_str(text).context("malformed configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn is_explicit(&self) -> bool {
        matches!(self.system, SystemConfig::Explicit { .. })
    }

    /// Structural checks that do not need the discretization.
    pub fn validate(&self) -> anyhow::Result<()> {
        ensure!(
            self.lp.gamma.is_finite() && self.lp.gamma > 1.0,
            "lp.gamma = {} must be greater than 1",
            self.lp.gamma
        );
        if self.is_explicit() {
            ensure!(self.partition.is_none(), "explicit systems take no partition block");
            ensure!(self.simulate.is_none(), "explicit systems cannot be simulated");
            ensure!(matches!(self.lp.cost, CostConfig::Tabulated { .. }), "explicit systems need a tabulated cost");
        } else {
            ensure!(self.partition.is_some(), "partition block is required");
            match &self.control {
                None => bail!("control block is required"),
                Some(ControlConfig::Values(v)) => ensure!(!v.is_empty(), "control grid is empty"),
                Some(ControlConfig::Range(_)) => {}
            }
            ensure!(self.discretization.samples_per_cell >= 1, "samples_per_cell must be at least 1");
        }
        if let Some(sim) = &self.simulate {
            ensure!(sim.horizon >= 1, "simulate.horizon must be at least 1");
            ensure!(sim.epsilon_radius >= 0.0, "simulate.epsilon_radius must be >= 0");
        }
        ensure!(self.lp.resid_tol > 0.0, "lp.resid_tol must be positive");
        Ok(())
    }
}
