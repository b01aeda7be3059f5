//! The Lyapunov-measure linear program and its dual.
//!
//! With `M` actions, sub-Markov matrices `P_a` on the `N-1` non-attractor
//! cells, costs `G^a >= 0`, a positive weight `m` and `gamma > 1`:
//!
//! ```text
//! primal:  min  sum_a (G^a)' theta^a
//!          s.t. sum_a theta^a - gamma sum_a P_a' theta^a = m,  theta >= 0
//!
//! dual:    max  m'V
//!          s.t. V <= gamma P_a V + G^a   for every a,  V free
//! ```
//!
//! The primal variable `theta^a_j` sits at column `a (N-1) + j`; the dual
//! constraint for `(a, j)` sits at row `a (N-1) + j`.

use std::fmt::Write as _;

use crate::discretization::TransitionFamily;
use crate::error::{Error, Result};
use crate::lp::{self, LinearProgram, LpResult, RowKind, Sense, SolveOptions, SolveStatus, VarKind};
use crate::sparse::CsrMatrix;

/// Acceptance tolerances for LP solutions and certificates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    /// Equality residual of the primal constraints.
    pub feas_tol: f64,
    /// Dual feasibility and complementarity.
    pub kkt_tol: f64,
    /// Duality gap, relative to `1 + |dual|`.
    pub duality_tol: f64,
    /// A `theta` entry above this counts as support.
    pub theta_support_tol: f64,
    /// Required margin below `1/gamma` for the closed-loop spectral radius.
    pub rho_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { feas_tol: 1e-8, kkt_tol: 1e-7, duality_tol: 1e-6, theta_support_tol: 1e-9, rho_tol: 1e-6 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StabilizationLP {
    pub gamma: f64,
    /// Weight on the non-attractor cells; zero entries are masked cells.
    pub m: Vec<f64>,
    /// `costs[a][j] = G^a_j`.
    pub costs: Vec<Vec<f64>>,
    /// `sub[a] = P_a`, each `(N-1) x (N-1)`.
    pub sub: Vec<CsrMatrix>,
}

impl StabilizationLP {
    pub fn new(gamma: f64, m: Vec<f64>, costs: Vec<Vec<f64>>, family: &TransitionFamily) -> Result<Self> {
        Self::from_parts(gamma, m, costs, family.sub().to_vec())
    }

    pub fn from_parts(gamma: f64, m: Vec<f64>, costs: Vec<Vec<f64>>, sub: Vec<CsrMatrix>) -> Result<Self> {
        let spec = Self { gamma, m, costs, sub };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma > 1.0) {
            return Err(Error::Validation(format!("gamma = {} must exceed 1", self.gamma)));
        }
        let n = self.m.len();
        if self.sub.is_empty() {
            return Err(Error::Validation("at least one action is required".into()));
        }
        if self.costs.len() != self.sub.len() {
            return Err(Error::Dimension(format!("{} cost vectors for {} actions", self.costs.len(), self.sub.len())));
        }
        for (a, (p, g)) in self.sub.iter().zip(&self.costs).enumerate() {
            if p.rows() != n || p.cols() != n {
                return Err(Error::Dimension(format!(
                    "action {a}: matrix is {}x{}, weight has length {n}",
                    p.rows(),
                    p.cols()
                )));
            }
            if g.len() != n {
                return Err(Error::Dimension(format!("action {a}: {} costs for {n} cells", g.len())));
            }
            if let Some(j) = g.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::Validation(format!("action {a}, cell {j}: cost {} is not >= 0", g[j])));
            }
        }
        if let Some(j) = self.m.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Validation(format!("weight m[{j}] = {} is not >= 0", self.m[j])));
        }
        Ok(())
    }

    /// Number of non-attractor cells, `N-1`.
    pub fn n_cells(&self) -> usize {
        self.m.len()
    }

    pub fn n_actions(&self) -> usize {
        self.sub.len()
    }

    pub fn column(&self, action: usize, cell: usize) -> usize {
        action * self.n_cells() + cell
    }

    /// Same data with the listed cells removed from the support of `m`.
    pub fn masked(&self, cells: &[usize]) -> Result<Self> {
        let mut out = self.clone();
        for &j in cells {
            *out.m.get_mut(j).ok_or_else(|| Error::Dimension(format!("masked cell {j} out of range")))? = 0.0;
        }
        Ok(out)
    }

    /// `sum_a theta^a - gamma sum_a P_a' theta^a - m`.
    pub fn equality_residual(&self, theta: &[Vec<f64>]) -> Vec<f64> {
        let mut r: Vec<f64> = self.m.iter().map(|v| -v).collect();
        for (p, t) in self.sub.iter().zip(theta) {
            let pt = p.tmul_vec(t);
            for ((ri, ti), pi) in r.iter_mut().zip(t).zip(pt) {
                *ri += ti - self.gamma * pi;
            }
        }
        r
    }

    /// `gamma P_a V + G^a - V` for every action.
    pub fn dual_slacks(&self, v: &[f64]) -> Vec<Vec<f64>> {
        self.sub
            .iter()
            .zip(&self.costs)
            .map(|(p, g)| p.mul_vec(v).iter().zip(g).zip(v).map(|((pv, gj), vj)| self.gamma * pv + gj - vj).collect())
            .collect()
    }

    pub fn primal_objective(&self, theta: &[Vec<f64>]) -> f64 {
        self.costs.iter().zip(theta).map(|(g, t)| g.iter().zip(t).map(|(a, b)| a * b).sum::<f64>()).sum()
    }

    pub fn dual_objective(&self, v: &[f64]) -> f64 {
        self.m.iter().zip(v).map(|(a, b)| a * b).sum()
    }
}

/// The primal as a general LP over `theta`, right-hand side `+m`.
pub fn assemble_primal(spec: &StabilizationLP) -> Result<LinearProgram> {
    spec.validate()?;
    let n = spec.n_cells();
    let mut columns = Vec::with_capacity(n * spec.n_actions());
    let mut objective = Vec::with_capacity(n * spec.n_actions());
    for (p, g) in spec.sub.iter().zip(&spec.costs) {
        for j in 0..n {
            let mut col: Vec<(usize, f64)> = Vec::new();
            let mut diag = 1.0;
            for (i, v) in p.row(j) {
                if i == j {
                    diag -= spec.gamma * v;
                } else {
                    col.push((i, -spec.gamma * v));
                }
            }
            if diag != 0.0 {
                col.push((j, diag));
            }
            col.retain(|&(_, v)| v != 0.0);
            col.sort_by_key(|&(i, _)| i);
            columns.push(col);
            objective.push(g[j]);
        }
    }
    let cols = columns.len();
    Ok(LinearProgram {
        name: "lyapunov_measure_primal".into(),
        sense: Sense::Minimize,
        objective,
        columns,
        row_kinds: vec![RowKind::Eq; n],
        rhs: spec.m.clone(),
        var_kinds: vec![VarKind::NonNegative; cols],
    })
}

/// The dual as a general LP over free `V`.
pub fn assemble_dual(spec: &StabilizationLP) -> Result<LinearProgram> {
    spec.validate()?;
    let n = spec.n_cells();
    let mut columns: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut rhs = Vec::with_capacity(n * spec.n_actions());
    for (a, (p, g)) in spec.sub.iter().zip(&spec.costs).enumerate() {
        for j in 0..n {
            let row = a * n + j;
            let mut diag = 1.0;
            for (i, v) in p.row(j) {
                if i == j {
                    diag -= spec.gamma * v;
                } else if v != 0.0 {
                    columns[i].push((row, -spec.gamma * v));
                }
            }
            if diag != 0.0 {
                columns[j].push((row, diag));
            }
            rhs.push(g[j]);
        }
    }
    for col in &mut columns {
        col.sort_by_key(|&(i, _)| i);
    }
    Ok(LinearProgram {
        name: "lyapunov_measure_dual".into(),
        sense: Sense::Maximize,
        objective: spec.m.clone(),
        columns,
        row_kinds: vec![RowKind::Le; rhs.len()],
        rhs,
        var_kinds: vec![VarKind::Free; n],
    })
}

/// Maxima of the optimality-system residuals.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct KktReport {
    /// `max |sum_a theta^a - gamma sum_a P_a' theta^a - m|`.
    pub equality: f64,
    /// `max (V - gamma P_a V - G^a)^+`.
    pub dual_violation: f64,
    /// `max theta^a_j |gamma P_a V + G^a - V|_j`.
    pub complementarity: f64,
    /// `max (-theta)^+`.
    pub sign_violation: f64,
}

impl KktReport {
    pub fn max(&self) -> f64 {
        self.equality.max(self.dual_violation).max(self.complementarity).max(self.sign_violation)
    }

    pub fn passes(&self, tol: &Tolerances) -> bool {
        self.equality <= tol.feas_tol
            && self.sign_violation <= tol.feas_tol
            && self.dual_violation <= tol.kkt_tol
            && self.complementarity <= tol.kkt_tol
    }
}

pub fn verify_kkt(spec: &StabilizationLP, theta: &[Vec<f64>], v: &[f64]) -> KktReport {
    let equality = spec.equality_residual(theta).iter().fold(0.0_f64, |a, r| a.max(r.abs()));
    let mut report = KktReport { equality, ..KktReport::default() };
    for (t, s) in theta.iter().zip(spec.dual_slacks(v)) {
        for (tj, sj) in t.iter().zip(s) {
            report.dual_violation = report.dual_violation.max(-sj);
            report.complementarity = report.complementarity.max(tj.max(0.0) * sj.abs());
            report.sign_violation = report.sign_violation.max(-tj);
        }
    }
    report
}

#[derive(Clone, Debug, PartialEq)]
pub struct LPSolution {
    pub status: SolveStatus,
    /// `theta[a][j]`.
    pub theta: Vec<Vec<f64>>,
    /// Simplex multipliers of the primal equality rows, i.e. the dual `V`.
    pub v: Vec<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub kkt: KktReport,
    pub phase1_iterations: usize,
    pub phase2_iterations: usize,
    /// Farkas ray over the cells when the primal is infeasible.
    pub farkas: Option<Vec<f64>>,
}

impl LPSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub fn duality_gap(&self) -> f64 {
        (self.primal_objective - self.dual_objective).abs()
    }

    pub fn gap_ok(&self, tol: &Tolerances) -> bool {
        self.duality_gap() <= tol.duality_tol * (1.0 + self.dual_objective.abs())
    }

    pub fn verified(&self, tol: &Tolerances) -> bool {
        self.is_optimal() && self.gap_ok(tol) && self.kkt.passes(tol)
    }

    /// Iteration counts, objectives, gap and residuals as `key = value` lines.
    pub fn log_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "status = {:?}", self.status);
        let _ = writeln!(s, "phase1_iterations = {}", self.phase1_iterations);
        let _ = writeln!(s, "phase2_iterations = {}", self.phase2_iterations);
        let _ = writeln!(s, "primal_objective = {:.12e}", self.primal_objective);
        let _ = writeln!(s, "dual_objective = {:.12e}", self.dual_objective);
        let _ = writeln!(s, "duality_gap = {:.3e}", self.duality_gap());
        let _ = writeln!(s, "equality_residual = {:.3e}", self.kkt.equality);
        let _ = writeln!(s, "dual_violation = {:.3e}", self.kkt.dual_violation);
        let _ = writeln!(s, "complementarity = {:.3e}", self.kkt.complementarity);
        let _ = writeln!(s, "sign_violation = {:.3e}", self.kkt.sign_violation);
        s
    }
}

fn split_theta(spec: &StabilizationLP, x: &[f64]) -> Vec<Vec<f64>> {
    x.chunks(spec.n_cells()).map(<[f64]>::to_vec).collect()
}

/// Solves the primal by simplex and reads `V` off the multipliers.
///
/// `hint` is an optional cell-wise action choice whose columns seed the
/// starting basis.
pub fn solve_stabilization(
    spec: &StabilizationLP,
    opts: &SolveOptions,
    hint: Option<&[Option<usize>]>,
) -> Result<LPSolution> {
    let lp = assemble_primal(spec)?;
    let mut opts = opts.clone();
    if let Some(h) = hint {
        let cols = h
            .iter()
            .enumerate()
            .take(spec.n_cells())
            .filter_map(|(j, a)| a.filter(|&a| a < spec.n_actions()).map(|a| spec.column(a, j)))
            .collect();
        opts.initial_basis = Some(cols);
    }
    let res: LpResult = lp::solve(&lp, &opts)?;
    let theta = split_theta(spec, &res.x);
    let v = res.y.clone();
    let farkas = res.farkas.clone();
    let (v, dual_objective) = if res.status == SolveStatus::Optimal {
        let d = spec.dual_objective(&v);
        (v, d)
    } else {
        (vec![0.0; spec.n_cells()], f64::NAN)
    };
    let kkt = verify_kkt(spec, &theta, &v);
    Ok(LPSolution {
        status: res.status,
        primal_objective: spec.primal_objective(&theta),
        dual_objective,
        theta,
        v,
        kkt,
        phase1_iterations: res.phase1_iterations,
        phase2_iterations: res.phase2_iterations,
        farkas,
    })
}

/// Solves, verifies, and when an optimal answer fails verification re-solves
/// once with tightened solver tolerances. Returns the solution and whether
/// the retry happened.
pub fn solve_verified(
    spec: &StabilizationLP,
    opts: &SolveOptions,
    tol: &Tolerances,
    hint: Option<&[Option<usize>]>,
) -> Result<(LPSolution, bool)> {
    let first = solve_stabilization(spec, opts, hint)?;
    if !first.is_optimal() || first.verified(tol) {
        return Ok((first, false));
    }
    log::warn!(
        "optimal LP failed verification (kkt max {:.3e}, gap {:.3e}); re-solving with tighter tolerances",
        first.kkt.max(),
        first.duality_gap()
    );
    let tight = SolveOptions { feas_tol: opts.feas_tol * 0.01, opt_tol: opts.opt_tol * 0.01, ..opts.clone() };
    Ok((solve_stabilization(spec, &tight, hint)?, true))
}

/// Solves the dual LP on its own. Intended for cross-checks on small
/// instances; the pipeline reads `V` off the primal multipliers instead.
pub fn solve_dual(spec: &StabilizationLP, opts: &SolveOptions) -> Result<(SolveStatus, Vec<f64>, f64)> {
    let lp = assemble_dual(spec)?;
    let res = lp::solve(&lp, opts)?;
    let obj = spec.dual_objective(&res.x);
    Ok((res.status, res.x, obj))
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeasibilityPhaseReport {
    /// `|residual_j|` of the l1 fit per cell.
    pub residuals: Vec<f64>,
    pub masked: Vec<usize>,
    pub objective: f64,
    pub status: SolveStatus,
}

impl FeasibilityPhaseReport {
    pub fn nothing_stabilizable(&self) -> bool {
        !self.residuals.is_empty() && self.masked.len() == self.residuals.len()
    }

    pub fn report(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "status = {:?}", self.status);
        let _ = writeln!(s, "l1_residual = {:.12e}", self.objective);
        let cells: Vec<String> = self.masked.iter().map(|c| (c + 1).to_string()).collect();
        let _ = writeln!(s, "masked = {}", cells.join(" "));
        if self.nothing_stabilizable() {
            let _ = writeln!(s, "nothing stabilizable");
        }
        s
    }
}

/// Minimizes `||sum_a theta^a - gamma sum_a P_a' theta^a - m||_1` over
/// `theta >= 0` with split residual columns. Cells whose residual exceeds
/// `resid_tol * max(m)` are masked in the returned spec.
pub fn feasibility_phase(
    spec: &StabilizationLP,
    opts: &SolveOptions,
    resid_tol: f64,
) -> Result<(StabilizationLP, FeasibilityPhaseReport)> {
    let mut lp = assemble_primal(spec)?;
    let n = spec.n_cells();
    let theta_cols = lp.n_cols();
    for c in lp.objective.iter_mut() {
        *c = 0.0;
    }
    for i in 0..n {
        for sign in [1.0, -1.0] {
            lp.columns.push(vec![(i, sign)]);
            lp.objective.push(1.0);
            lp.var_kinds.push(VarKind::NonNegative);
        }
    }
    lp.name = "lyapunov_measure_l1_phase".into();
    let res = lp::solve(&lp, opts)?;
    let residuals: Vec<f64> = (0..n)
        .map(|i| {
            let plus = res.x[theta_cols + 2 * i];
            let minus = res.x[theta_cols + 2 * i + 1];
            (plus - minus).abs()
        })
        .collect();
    let scale = spec.m.iter().fold(0.0_f64, |a, b| a.max(*b));
    let masked: Vec<usize> = (0..n).filter(|&i| residuals[i] > resid_tol * scale).collect();
    let report = FeasibilityPhaseReport { objective: res.objective, residuals, masked, status: res.status };
    Ok((spec.masked(&report.masked)?, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(p: f64, gamma: f64, g: f64) -> StabilizationLP {
        let sub = CsrMatrix::from_dense(&[vec![p]]);
        StabilizationLP::from_parts(gamma, vec![1.0], vec![vec![g]], vec![sub]).unwrap()
    }

    #[test]
    fn validation() {
        let sub = CsrMatrix::from_dense(&[vec![0.5]]);
        assert!(StabilizationLP::from_parts(1.0, vec![1.0], vec![vec![1.0]], vec![sub.clone()]).is_err());
        assert!(StabilizationLP::from_parts(1.5, vec![1.0], vec![vec![-1.0]], vec![sub.clone()]).is_err());
        assert!(StabilizationLP::from_parts(1.5, vec![1.0, 1.0], vec![vec![1.0]], vec![sub]).is_err());
    }

    #[test]
    fn one_variable_lp() {
        let s = solve_stabilization(&scalar(0.0, 1.5, 2.0), &SolveOptions::default(), None).unwrap();
        assert!(s.is_optimal());
        assert!((s.theta[0][0] - 1.0).abs() < 1e-12);
        assert!((s.primal_objective - 2.0).abs() < 1e-12);
    }

    #[test]
    fn scalar_closed_form_over_gammas() {
        for gamma in [1.05, 1.1, 1.2] {
            let spec = scalar(0.8, gamma, 3.0);
            let s = solve_stabilization(&spec, &SolveOptions::default(), None).unwrap();
            let expected = 3.0 / (1.0 - gamma * 0.8);
            assert!((s.primal_objective - expected).abs() < 1e-9 * expected);
            assert!((s.v[0] - expected).abs() < 1e-9 * expected);
            assert!(s.duality_gap() < 1e-9);
            assert!(s.kkt.max() < 1e-12);
        }
    }

    #[test]
    fn dual_lp_scalar() {
        let (status, v, obj) = solve_dual(&scalar(0.8, 1.2, 1.0), &SolveOptions::default()).unwrap();
        assert_eq!(status, SolveStatus::Optimal);
        assert!((v[0] - 25.0).abs() < 1e-9);
        assert!((obj - 25.0).abs() < 1e-9);
    }

    #[test]
    fn zero_v_is_dual_feasible() {
        let spec = scalar(0.8, 1.2, 1.0);
        assert!(spec.dual_slacks(&[0.0]).iter().flatten().all(|s| *s >= 0.0));
    }

    #[test]
    fn perturbed_theta_is_flagged() {
        let spec = scalar(0.8, 1.2, 1.0);
        let s = solve_stabilization(&spec, &SolveOptions::default(), None).unwrap();
        let theta: Vec<Vec<f64>> = s.theta.iter().map(|t| t.iter().map(|v| v * 1.01).collect()).collect();
        let k = verify_kkt(&spec, &theta, &s.v);
        assert!((k.equality - 0.01).abs() < 1e-9);
        assert!(!k.passes(&Tolerances::default()));
    }

    #[test]
    fn expansive_self_loop_is_infeasible() {
        let spec = scalar(1.0, 1.2, 1.0);
        let s = solve_stabilization(&spec, &SolveOptions::default(), None).unwrap();
        assert_eq!(s.status, SolveStatus::Infeasible);
        assert!(s.farkas.is_some());
    }

    #[test]
    fn l1_phase_masks_isolated_cell() {
        let p0 = CsrMatrix::from_dense(&[vec![1.0, 0.0], vec![0.0, 0.0]]);
        let p1 = CsrMatrix::from_dense(&[vec![1.0, 0.0], vec![0.0, 0.5]]);
        let spec =
            StabilizationLP::from_parts(1.1, vec![0.5, 0.5], vec![vec![1.0; 2], vec![1.0; 2]], vec![p0, p1]).unwrap();
        let (masked, rep) = feasibility_phase(&spec, &SolveOptions::default(), 1e-7).unwrap();
        assert_eq!(rep.masked, vec![0]);
        assert!((rep.residuals[0] - 0.5).abs() < 1e-9);
        assert_eq!(masked.m, vec![0.0, 0.5]);
        let s = solve_stabilization(&masked, &SolveOptions::default(), None).unwrap();
        assert!(s.is_optimal());
    }

    #[test]
    fn l1_phase_everything_isolated() {
        let p = CsrMatrix::from_dense(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let spec = StabilizationLP::from_parts(1.1, vec![0.5, 0.5], vec![vec![1.0; 2]], vec![p]).unwrap();
        let (_, rep) = feasibility_phase(&spec, &SolveOptions::default(), 1e-7).unwrap();
        assert!(rep.nothing_stabilizable());
        assert!(rep.report().contains("nothing stabilizable"));
    }

    #[test]
    fn dual_assembly_shape() {
        let p0 = CsrMatrix::from_dense(&[vec![0.0, 0.5], vec![0.0, 0.0]]);
        let spec = StabilizationLP::from_parts(1.2, vec![1.0, 1.0], vec![vec![1.0, 2.0]], vec![p0]).unwrap();
        let d = assemble_dual(&spec).unwrap();
        assert_eq!(d.n_rows(), 2);
        assert_eq!(d.columns[0], vec![(0, 1.0)]);
        assert_eq!(d.columns[1], vec![(0, -0.6), (1, 1.0)]);
    }
}
