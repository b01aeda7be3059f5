//! End-to-end pipeline: discretize, check reachability, solve the LP,
//! extract and certify the policy, roll it out, and write the artifacts.

use std::fmt::{self, Write as _};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, ensure, Context};

use lyapstab::discretization::{
    build_transition_family, lebesgue_vector, ControlGrid, Partition, SamplingMode, TransitionFamily,
};
use lyapstab::feasibility::{default_horizon, grow_tree, transience_certificate, FeasibilityResult, TransienceReport};
use lyapstab::lp::{write_mps, SolveStatus};
use lyapstab::simulate::{rollout, write_trajectories_csv, RolloutResult};
use lyapstab::stabilization::{
    assemble_primal, feasibility_phase, solve_verified, FeasibilityPhaseReport, LPSolution, StabilizationLP, Tolerances,
};
use lyapstab::synthesis::{
    certify, extract_policy, lyapunov_measure, value_consistency, ControlPolicy, LyapunovMeasure, StabilityCertificate,
    ValueReport,
};
use lyapstab::systems::{
    explicit_matrix_system, identity_system, shift_system, standard_map, StandardMapParams, StateBox, SystemDef,
};

use crate::config::{ControlConfig, CostConfig, MeasureConfig, PhaseMode, RunConfig, SamplingConfig, SystemConfig};

/// Process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitKind {
    Ok = 0,
    Other = 1,
    Config = 2,
    Infeasible = 3,
    PartiallyStabilizable = 4,
    CertificateFailure = 5,
}

impl ExitKind {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Config,
    Discretize,
    Feasibility,
    Lp,
    Synthesis,
    Simulate,
    Output,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Config => "config",
            Stage::Discretize => "discretize",
            Stage::Feasibility => "feasibility",
            Stage::Lp => "lp",
            Stage::Synthesis => "synthesis",
            Stage::Simulate => "simulate",
            Stage::Output => "output",
        };
        f.write_str(s)
    }
}

#[derive(Debug)]
pub struct PipelineError {
    pub stage: Stage,
    pub kind: ExitKind,
    pub source: anyhow::Error,
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} stage failed: {:#}", self.stage, self.source)
    }
}

impl std::error::Error for PipelineError {}

trait StageExt<T> {
    fn stage(self, stage: Stage, kind: ExitKind) -> Result<T, PipelineError>;
}

impl<T, E: Into<anyhow::Error>> StageExt<T> for Result<T, E> {
    fn stage(self, stage: Stage, kind: ExitKind) -> Result<T, PipelineError> {
        self.map_err(|e| PipelineError { stage, kind, source: e.into() })
    }
}

/// How far the pipeline runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Through {
    Discretize,
    Solve,
    Run,
}

/// Everything the geometry-aware stages need.
#[derive(Clone, Debug)]
pub struct Geometry {
    pub system: SystemDef,
    pub partition: Partition,
    pub grid: ControlGrid,
}

#[derive(Clone, Debug)]
pub struct Problem {
    pub geometry: Option<Geometry>,
    pub family: TransitionFamily,
    /// Action labels used in exports.
    pub labels: Vec<String>,
}

impl Problem {
    /// `N - 1`.
    pub fn n_cells(&self) -> usize {
        self.family.n_cells() - 1
    }
}

fn system_of(cfg: &RunConfig, state_box: StateBox) -> anyhow::Result<SystemDef> {
    Ok(match &cfg.system {
        SystemConfig::StandardMap { k } => {
            ensure!(state_box.dim() == 2, "standard_map needs a 2-D partition");
            standard_map(StandardMapParams { k: *k })?
        }
        SystemConfig::Identity => identity_system(state_box, 1),
        SystemConfig::Shift => shift_system(state_box),
        SystemConfig::Explicit { .. } => bail!("explicit systems have no geometry"),
    })
}

/// Builds the transition family, either by sampling or from explicit matrices.
pub fn build_problem(cfg: &RunConfig) -> Result<Problem, PipelineError> {
    if let SystemConfig::Explicit { matrices, labels } = &cfg.system {
        let labels = labels.clone().unwrap_or_else(|| (1..=matrices.len()).map(|a| format!("a{a}")).collect());
        let sys = explicit_matrix_system(matrices, labels).stage(Stage::Config, ExitKind::Config)?;
        return Ok(Problem { geometry: None, family: sys.family, labels: sys.labels });
    }
    let pc = cfg.partition.as_ref().expect("validated");
    let state_box =
        StateBox::new(pc.lower.clone(), pc.upper.clone(), pc.wrap.clone()).stage(Stage::Config, ExitKind::Config)?;
    let system = system_of(cfg, state_box.clone()).stage(Stage::Config, ExitKind::Config)?;
    let partition = Partition::new(state_box, pc.cells_per_dim.clone(), &pc.attractor_points)
        .stage(Stage::Config, ExitKind::Config)?;
    let grid = match cfg.control.as_ref().expect("validated") {
        ControlConfig::Range(r) => ControlGrid::parse_range(r),
        ControlConfig::Values(v) => ControlGrid::new(v.clone()),
    }
    .stage(Stage::Config, ExitKind::Config)?;
    if grid.dim() != system.control_dim() {
        return Err(anyhow!("control grid has dimension {}, system expects {}", grid.dim(), system.control_dim()))
            .stage(Stage::Config, ExitKind::Config);
    }
    let mode = match cfg.discretization.mode {
        SamplingConfig::Stratified => SamplingMode::Stratified,
        SamplingConfig::SeededRandom => SamplingMode::SeededRandom,
    };
    let family = build_transition_family(
        &system,
        &partition,
        &grid,
        cfg.discretization.samples_per_cell,
        mode,
        cfg.discretization.seed,
    )
    .stage(Stage::Discretize, ExitKind::Other)?;
    let labels = grid.values().iter().map(|u| u.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(" ")).collect();
    Ok(Problem { geometry: Some(Geometry { system, partition, grid }), family, labels })
}

/// `G(x, u)` for a quadratic cost; tabulated costs have no pointwise form.
pub fn cost_eval(cost: &CostConfig, x: &[f64], u: &[f64]) -> anyhow::Result<f64> {
    match cost {
        CostConfig::Quadratic { state_weights, control_weights } => {
            ensure!(
                state_weights.len() == x.len() && control_weights.len() == u.len(),
                "quadratic cost has {} state and {} control weights for a {}-D state and {}-D control",
                state_weights.len(),
                control_weights.len(),
                x.len(),
                u.len()
            );
            let g = state_weights.iter().zip(x).map(|(w, v)| w * v * v).sum::<f64>()
                + control_weights.iter().zip(u).map(|(w, v)| w * v * v).sum::<f64>();
            ensure!(g.is_finite() && g >= 0.0, "cost {g} at x = {x:?}, u = {u:?} is negative");
            Ok(g)
        }
        CostConfig::Tabulated { .. } => bail!("tabulated costs cannot be evaluated pointwise"),
    }
}

/// `costs[a][j]` plus any warnings about the cost at the attractor.
pub fn cost_matrix(cfg: &RunConfig, problem: &Problem) -> anyhow::Result<(Vec<Vec<f64>>, Vec<String>)> {
    let n = problem.n_cells();
    let m = problem.family.n_actions();
    let mut warnings = Vec::new();
    let costs = match (&cfg.lp.cost, &problem.geometry) {
        (CostConfig::Tabulated { values }, _) => {
            ensure!(
                values.len() == m && values.iter().all(|r| r.len() == n),
                "tabulated cost must be {m} rows of {n} values"
            );
            for (a, row) in values.iter().enumerate() {
                if let Some(j) = row.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
                    bail!("tabulated cost for action {}, cell {} is negative", a + 1, j + 1);
                }
            }
            values.clone()
        }
        (cost @ CostConfig::Quadratic { .. }, Some(geo)) => {
            let centers: Vec<Vec<f64>> = (0..n).map(|j| geo.partition.cell_center(j)).collect();
            let costs = (0..m)
                .map(|a| {
                    centers.iter().map(|c| cost_eval(cost, c, geo.grid.value(a))).collect::<anyhow::Result<Vec<f64>>>()
                })
                .collect::<anyhow::Result<Vec<_>>>()?;
            let zero = vec![0.0; geo.grid.dim()];
            let pts = &cfg.partition.as_ref().expect("geometry implies partition").attractor_points;
            let at_attractor = pts
                .iter()
                .map(|p| cost_eval(cost, p, &zero))
                .collect::<anyhow::Result<Vec<f64>>>()?
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            if at_attractor > 1e-12 {
                let w = format!("cost at the attractor with zero control is {at_attractor}, not 0");
                log::warn!("{w}");
                warnings.push(w);
            }
            costs
        }
        (CostConfig::Quadratic { .. }, None) => bail!("quadratic cost needs a geometric system"),
    };
    Ok((costs, warnings))
}

pub fn measure_vector(cfg: &RunConfig, problem: &Problem) -> anyhow::Result<Vec<f64>> {
    let n = problem.n_cells();
    let m = match (&cfg.lp.measure, &problem.geometry) {
        (MeasureConfig::Lebesgue, Some(geo)) => lebesgue_vector(&geo.partition),
        (MeasureConfig::Lebesgue, None) => vec![1.0 / problem.family.n_cells() as f64; n],
        (MeasureConfig::Values(v), _) => {
            ensure!(v.len() == n, "measure has {} values for {n} cells", v.len());
            v.clone()
        }
    };
    ensure!(
        m.iter().all(|v| v.is_finite() && *v >= 0.0) && m.iter().any(|v| *v > 0.0),
        "measure must be nonnegative with nonempty support"
    );
    Ok(m)
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub exit: ExitKind,
    pub problem: Problem,
    pub feasibility: FeasibilityResult,
    pub transience: Option<TransienceReport>,
    pub phase: Option<FeasibilityPhaseReport>,
    pub spec: Option<StabilizationLP>,
    pub solution: Option<LPSolution>,
    pub retried: bool,
    pub policy: Option<ControlPolicy>,
    pub measure: Option<LyapunovMeasure>,
    pub certificate: Option<StabilityCertificate>,
    pub values: Option<ValueReport>,
    pub rollout: Option<RolloutResult>,
    pub warnings: Vec<String>,
    pub files: Vec<PathBuf>,
}

/// Every file name the pipeline may write.
pub const ARTIFACTS: &[&str] = &[
    "transitions.txt",
    "feasibility.txt",
    "lp.mps",
    "lp_log.txt",
    "policy.csv",
    "measure.csv",
    "certificate.txt",
    "decay.csv",
    "decay_report.txt",
    "trajectories.csv",
];

/// Creates `dir`; refuses to overwrite earlier artifacts unless `force`, in
/// which case they are removed first so no stale file survives.
pub fn prepare_output_dir(dir: &Path, force: bool) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let existing: Vec<&str> = ARTIFACTS.iter().copied().filter(|f| dir.join(f).exists()).collect();
    if !existing.is_empty() {
        ensure!(force, "{} already holds {}; pass --force to overwrite", dir.display(), existing.join(", "));
        for f in existing {
            fs::remove_file(dir.join(f))?;
        }
    }
    Ok(())
}

struct Writer<'a> {
    dir: &'a Path,
    files: Vec<PathBuf>,
}

impl Writer<'_> {
    fn text(&mut self, name: &str, body: &str) -> Result<(), PipelineError> {
        let path = self.dir.join(name);
        fs::write(&path, body)
            .with_context(|| format!("writing {}", path.display()))
            .stage(Stage::Output, ExitKind::Other)?;
        self.files.push(path);
        Ok(())
    }

    fn with<F>(&mut self, name: &str, f: F) -> Result<(), PipelineError>
    where
        F: FnOnce(&mut BufWriter<fs::File>) -> anyhow::Result<()>,
    {
        let path = self.dir.join(name);
        let run = || -> anyhow::Result<()> {
            let mut w = BufWriter::new(fs::File::create(&path)?);
            f(&mut w)?;
            w.flush()?;
            Ok(())
        };
        run().with_context(|| format!("writing {}", path.display())).stage(Stage::Output, ExitKind::Other)?;
        self.files.push(path);
        Ok(())
    }
}

fn feasibility_text(
    result: &FeasibilityResult,
    transience: Option<&TransienceReport>,
    phase: Option<&FeasibilityPhaseReport>,
) -> String {
    let mut s = result.report();
    if let Some(t) = transience {
        let _ = writeln!(s, "[transience]");
        let _ = writeln!(s, "blocks = {}", t.norms.len());
        let _ = writeln!(s, "block_length = {}", t.l_max);
        let _ = writeln!(s, "final_norm = {:.6e}", t.final_norm());
        let _ = writeln!(s, "strictly_decreasing = {}", t.strictly_decreasing);
        let _ = writeln!(s, "mass_before = {:.6e}", t.mass_before);
        let _ = writeln!(s, "mass_after = {:.6e}", t.mass_after);
        let _ = writeln!(s, "spectral_radius = {:.12e}", t.spectral.radius);
        let _ = writeln!(s, "transient = {}", t.is_transient());
    }
    if let Some(p) = phase {
        let _ = writeln!(s, "[l1_phase]");
        s.push_str(&p.report());
    }
    s
}

fn policy_csv(problem: &Problem, policy: &ControlPolicy, v: &[f64], mu: &[f64]) -> String {
    let mut s = String::new();
    let (coords, controls): (Vec<String>, Vec<String>) = match &problem.geometry {
        Some(g) => (
            (1..=g.partition.state_box().dim()).map(|d| format!("x{d}")).collect(),
            (1..=g.grid.dim()).map(|k| format!("u{k}")).collect(),
        ),
        None => (Vec::new(), vec!["control".to_string()]),
    };
    let mut header = vec!["cell_index".to_string()];
    header.extend(coords);
    header.push("action_index".into());
    header.extend(controls.iter().cloned());
    header.push("V".into());
    header.push("mu".into());
    let _ = writeln!(s, "{}", header.join(","));
    for j in 0..problem.n_cells() {
        let mut row = vec![(j + 1).to_string()];
        let action = policy.action_of[j];
        match &problem.geometry {
            Some(g) => {
                row.extend(g.partition.cell_center(j).iter().map(|v| format!("{v}")));
                row.push(action.map(|a| (a + 1).to_string()).unwrap_or_default());
                match action {
                    Some(a) => row.extend(g.grid.value(a).iter().map(|v| format!("{v}"))),
                    None => row.extend(std::iter::repeat_n(String::new(), g.grid.dim())),
                }
            }
            None => {
                row.push(action.map(|a| (a + 1).to_string()).unwrap_or_default());
                row.push(action.map(|a| problem.labels[a].clone()).unwrap_or_default());
            }
        }
        row.push(format!("{}", v[j]));
        row.push(format!("{}", mu[j]));
        let _ = writeln!(s, "{}", row.join(","));
    }
    s
}

fn measure_csv(mu: &[f64]) -> String {
    let mut s = String::from("cell_index,mu\n");
    for (j, v) in mu.iter().enumerate() {
        let _ = writeln!(s, "{},{}", j + 1, v);
    }
    s
}

/// Runs the pipeline up to `through`, writing artifacts into `out_dir`.
///
/// Outcomes that the exit code distinguishes (infeasible LP, partial
/// stabilizability, certificate failure) return `Ok` with the matching
/// [`ExitKind`]; errors are reserved for broken inputs and I/O.
pub fn run_pipeline(
    cfg: &RunConfig,
    out_dir: &Path,
    force: bool,
    through: Through,
) -> Result<RunSummary, PipelineError> {
    cfg.validate().stage(Stage::Config, ExitKind::Config)?;
    prepare_output_dir(out_dir, force).stage(Stage::Output, ExitKind::Other)?;
    let mut out = Writer { dir: out_dir, files: Vec::new() };

    let problem = build_problem(cfg)?;
    log::info!("discretized: {} cells, {} actions", problem.family.n_cells(), problem.family.n_actions());
    if cfg.output.transitions {
        out.with("transitions.txt", |w| Ok(problem.family.write_triplets(w)?))?;
    }

    let feasibility = grow_tree(&problem.family);
    let transience = if feasibility.is_stabilizable() {
        Some(
            transience_certificate(&problem.family, &feasibility, default_horizon(feasibility.l_max()))
                .stage(Stage::Feasibility, ExitKind::Other)?,
        )
    } else {
        None
    };
    log::info!("reachability tree: {:?}, l_max = {}", feasibility.status, feasibility.l_max());

    let mut summary = RunSummary {
        exit: ExitKind::Ok,
        problem,
        feasibility,
        transience,
        phase: None,
        spec: None,
        solution: None,
        retried: false,
        policy: None,
        measure: None,
        certificate: None,
        values: None,
        rollout: None,
        warnings: Vec::new(),
        files: Vec::new(),
    };

    if through == Through::Discretize {
        out.text("feasibility.txt", &feasibility_text(&summary.feasibility, summary.transience.as_ref(), None))?;
        summary.files = out.files;
        return Ok(summary);
    }

    let (costs, warnings) = cost_matrix(cfg, &summary.problem).stage(Stage::Config, ExitKind::Config)?;
    summary.warnings = warnings;
    let m = measure_vector(cfg, &summary.problem).stage(Stage::Config, ExitKind::Config)?;
    let mut spec =
        StabilizationLP::new(cfg.lp.gamma, m, costs, &summary.problem.family).stage(Stage::Config, ExitKind::Config)?;
    let tol = Tolerances::from(&cfg.lp.tolerances);
    let opts = cfg.lp.solve_options();

    let run_phase = match cfg.lp.feasibility_phase {
        PhaseMode::Always => true,
        PhaseMode::Never => false,
        PhaseMode::Auto => !summary.feasibility.is_stabilizable(),
    };
    if run_phase {
        let (masked, report) = feasibility_phase(&spec, &opts, cfg.lp.resid_tol).stage(Stage::Lp, ExitKind::Other)?;
        log::info!("l1 phase masked {} cells", report.masked.len());
        spec = masked;
        summary.phase = Some(report);
    }
    out.text(
        "feasibility.txt",
        &feasibility_text(&summary.feasibility, summary.transience.as_ref(), summary.phase.as_ref()),
    )?;
    let stop_partial = match &summary.phase {
        Some(p) => p.nothing_stabilizable(),
        None => !summary.feasibility.is_stabilizable(),
    };
    if stop_partial {
        log::error!("no stabilizable region to synthesize a controller for");
        summary.exit = ExitKind::PartiallyStabilizable;
        summary.spec = Some(spec);
        summary.files = out.files;
        return Ok(summary);
    }

    if cfg.output.mps {
        let lp = assemble_primal(&spec).stage(Stage::Lp, ExitKind::Other)?;
        out.with("lp.mps", |w| Ok(write_mps(&lp, w)?))?;
    }

    let (solution, retried) =
        solve_verified(&spec, &opts, &tol, Some(&summary.feasibility.assignment)).stage(Stage::Lp, ExitKind::Other)?;
    let mut log_text = solution.log_text();
    let _ = writeln!(log_text, "gamma = {}", spec.gamma);
    let _ = writeln!(log_text, "variables = {}", spec.n_cells() * spec.n_actions());
    let _ = writeln!(log_text, "constraints = {}", spec.n_cells());
    let _ = writeln!(log_text, "retried = {retried}");
    if solution.status == SolveStatus::Infeasible {
        let _ = writeln!(
            log_text,
            "note = the LP is infeasible at this gamma; set lp.feasibility_phase to \"always\" to mask non-stabilizable cells"
        );
    }
    out.text("lp_log.txt", &log_text)?;
    log::info!(
        "LP {:?}: objective {:.9e}, {} iterations",
        solution.status,
        solution.primal_objective,
        solution.phase1_iterations + solution.phase2_iterations
    );
    summary.retried = retried;
    match solution.status {
        SolveStatus::Optimal => {}
        SolveStatus::Infeasible => {
            summary.exit = ExitKind::Infeasible;
            summary.spec = Some(spec);
            summary.solution = Some(solution);
            summary.files = out.files;
            return Ok(summary);
        }
        other => {
            return Err(anyhow!("LP solver stopped with status {other:?}")).stage(Stage::Lp, ExitKind::Other);
        }
    }

    let policy = match extract_policy(&spec, &solution, tol.theta_support_tol) {
        Ok(p) => p,
        Err(e) => {
            summary.exit = ExitKind::CertificateFailure;
            log::error!("{e}");
            summary.spec = Some(spec);
            summary.solution = Some(solution);
            summary.files = out.files;
            return Ok(summary);
        }
    };
    let measure = lyapunov_measure(&spec, &policy).stage(Stage::Synthesis, ExitKind::CertificateFailure)?;
    let certificate = certify(&spec, &policy, &solution, &tol);
    let values = value_consistency(&spec, &policy, &solution.v, 200_000);

    out.text("policy.csv", &policy_csv(&summary.problem, &policy, &solution.v, &measure.mu))?;
    out.text("measure.csv", &measure_csv(&measure.mu))?;
    let mut cert_text = certificate.report();
    let _ = writeln!(cert_text, "measure_residual = {:.3e}", measure.residual);
    let _ = writeln!(cert_text, "measure_positive = {}", measure.positive_on(&spec.m));
    let _ = writeln!(cert_text, "kkt_max = {:.3e}", solution.kkt.max());
    let _ = writeln!(cert_text, "value_recursion_residual = {:.3e}", values.recursion_residual);
    let _ = writeln!(cert_text, "value_series_residual = {:.3e}", values.neumann_residual);
    let _ = writeln!(cert_text, "value_series_terms = {}", values.neumann_terms);
    for w in &summary.warnings {
        let _ = writeln!(cert_text, "warning = {w}");
    }
    out.text("certificate.txt", &cert_text)?;
    log::info!(
        "certificate {:?}: rho = {:.9}, 1/gamma = {:.9}",
        certificate.status,
        certificate.spectral_radius_estimate,
        1.0 / spec.gamma
    );
    summary.exit = if certificate.is_valid() { ExitKind::Ok } else { ExitKind::CertificateFailure };

    if through == Through::Run {
        if let (Some(sim), Some(geo)) = (&cfg.simulate, &summary.problem.geometry) {
            let result = rollout(&geo.system, &geo.partition, &geo.grid, &policy.action_of, &sim.rollout_config())
                .stage(Stage::Simulate, ExitKind::Other)?;
            write_rollout(&mut out, geo, &result)?;
            summary.rollout = Some(result);
        }
    }

    summary.spec = Some(spec);
    summary.solution = Some(solution);
    summary.policy = Some(policy);
    summary.measure = Some(measure);
    summary.certificate = Some(certificate);
    summary.values = Some(values);
    summary.files = out.files;
    Ok(summary)
}

fn write_rollout(out: &mut Writer<'_>, geo: &Geometry, result: &RolloutResult) -> Result<(), PipelineError> {
    out.text("decay.csv", &result.report.csv())?;
    out.text("decay_report.txt", &result.report.report())?;
    if let Some(traj) = &result.trajectories {
        let dim = geo.partition.state_box().dim();
        out.with("trajectories.csv", |w| Ok(write_trajectories_csv(traj, dim, w)?))?;
    }
    Ok(())
}

/// Reads the `action_index` column of a policy CSV (1-based, empty for
/// unassigned cells) into 0-based actions.
pub fn read_policy_csv(text: &str, n_cells: usize) -> anyhow::Result<Vec<Option<usize>>> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().context("empty policy file")?.split(',').collect();
    let cell_col = header.iter().position(|h| *h == "cell_index").context("no cell_index column")?;
    let act_col = header.iter().position(|h| *h == "action_index").context("no action_index column")?;
    let mut policy = vec![None; n_cells];
    for (k, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let parse = |col: usize| -> anyhow::Result<Option<usize>> {
            let f = fields.get(col).with_context(|| format!("line {}: missing column {col}", k + 2))?.trim();
            if f.is_empty() {
                return Ok(None);
            }
            let v: usize = f.parse().with_context(|| format!("line {}: bad index '{f}'", k + 2))?;
            ensure!(v >= 1, "line {}: indices are 1-based", k + 2);
            Ok(Some(v - 1))
        };
        let cell = parse(cell_col)?.with_context(|| format!("line {}: missing cell index", k + 2))?;
        ensure!(cell < n_cells, "line {}: cell {} out of range", k + 2, cell + 1);
        policy[cell] = parse(act_col)?;
    }
    Ok(policy)
}

/// Rolls out a stored policy and writes the decay artifacts.
pub fn run_simulate(
    cfg: &RunConfig,
    policy_path: &Path,
    out_dir: &Path,
    force: bool,
) -> Result<RolloutResult, PipelineError> {
    cfg.validate().stage(Stage::Config, ExitKind::Config)?;
    let sim = cfg
        .simulate
        .as_ref()
        .ok_or_else(|| anyhow!("configuration has no simulate block"))
        .stage(Stage::Config, ExitKind::Config)?;
    let pc = cfg.partition.as_ref().expect("validated");
    let state_box =
        StateBox::new(pc.lower.clone(), pc.upper.clone(), pc.wrap.clone()).stage(Stage::Config, ExitKind::Config)?;
    let system = system_of(cfg, state_box.clone()).stage(Stage::Config, ExitKind::Config)?;
    let partition = Partition::new(state_box, pc.cells_per_dim.clone(), &pc.attractor_points)
        .stage(Stage::Config, ExitKind::Config)?;
    let grid = match cfg.control.as_ref().expect("validated") {
        ControlConfig::Range(r) => ControlGrid::parse_range(r),
        ControlConfig::Values(v) => ControlGrid::new(v.clone()),
    }
    .stage(Stage::Config, ExitKind::Config)?;
    let text = fs::read_to_string(policy_path)
        .with_context(|| format!("reading {}", policy_path.display()))
        .stage(Stage::Config, ExitKind::Config)?;
    let policy = read_policy_csv(&text, partition.attractor_index()).stage(Stage::Config, ExitKind::Config)?;
    prepare_output_dir(out_dir, force).stage(Stage::Output, ExitKind::Other)?;
    let result =
        rollout(&system, &partition, &grid, &policy, &sim.rollout_config()).stage(Stage::Simulate, ExitKind::Other)?;
    let geo = Geometry { system, partition, grid };
    let mut out = Writer { dir: out_dir, files: Vec::new() };
    write_rollout(&mut out, &geo, &result)?;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::CostConfig;

    #[test]
    fn quadratic_cost_examples() {
        let c = CostConfig::Quadratic { state_weights: vec![1.0, 1.0], control_weights: vec![1.0] };
        assert!((cost_eval(&c, &[0.25, 0.5], &[0.0]).unwrap() - 0.3125).abs() < 1e-15);
        assert!((cost_eval(&c, &[0.75, 0.5], &[0.5]).unwrap() - 1.0625).abs() < 1e-15);
        let neg = CostConfig::Quadratic { state_weights: vec![-1.0, 1.0], control_weights: vec![1.0] };
        assert!(cost_eval(&neg, &[0.75, 0.5], &[0.0]).is_err());
    }

    #[test]
    fn policy_csv_round_trip() {
        let text = "cell_index,action_index,control,V,mu\n1,2,a2,1,1\n2,,,0,0\n";
        assert_eq!(read_policy_csv(text, 2).unwrap(), vec![Some(1), None]);
        assert!(read_policy_csv(text, 1).is_err());
    }
}
