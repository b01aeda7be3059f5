//! Deterministic policy extraction from an LP solution, the closed-loop
//! Lyapunov measure, and stability certification.

use std::fmt::Write as _;

use crate::dense::solve_shifted;
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;
use crate::spectral::{spectral_radius, PowerIterationOptions, SpectralEstimate};
use crate::stabilization::{LPSolution, StabilizationLP, Tolerances};

/// A cell-wise feedback `u(D_j) = u^{a(j)}` with its closed-loop data.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlPolicy {
    /// `None` only on masked cells that carry no LP mass.
    pub action_of: Vec<Option<usize>>,
    /// Row `j` is row `j` of `P_{a(j)}`; zero for unassigned cells.
    pub closed_loop_sub: CsrMatrix,
    /// `G^{a(j)}_j`; zero for unassigned cells.
    pub closed_loop_cost: Vec<f64>,
}

impl ControlPolicy {
    /// Assembles the closed loop for a given action choice.
    pub fn from_actions(spec: &StabilizationLP, action_of: Vec<Option<usize>>) -> Result<Self> {
        if action_of.len() != spec.n_cells() {
            return Err(Error::Dimension(format!("{} actions for {} cells", action_of.len(), spec.n_cells())));
        }
        let closed_loop_sub = CsrMatrix::select_rows(&spec.sub, &action_of)?;
        let closed_loop_cost = action_of.iter().enumerate().map(|(j, a)| a.map_or(0.0, |a| spec.costs[a][j])).collect();
        Ok(Self { action_of, closed_loop_sub, closed_loop_cost })
    }

    pub fn n_cells(&self) -> usize {
        self.action_of.len()
    }
}

/// Min-index rule: `a(j) = min { a : theta^a_j > support_tol }`.
///
/// A cell with positive weight and no supported action is an error; a masked
/// cell without support stays unassigned.
pub fn extract_policy(spec: &StabilizationLP, solution: &LPSolution, support_tol: f64) -> Result<ControlPolicy> {
    if !solution.is_optimal() {
        return Err(Error::Precondition(format!(
            "policy extraction needs an optimal LP solution, status is {:?}",
            solution.status
        )));
    }
    let n = spec.n_cells();
    let mut action_of = Vec::with_capacity(n);
    for j in 0..n {
        let a = solution.theta.iter().position(|t| t[j] > support_tol);
        if a.is_none() && spec.m[j] > 0.0 {
            return Err(Error::Extraction { cell: j });
        }
        action_of.push(a);
    }
    ControlPolicy::from_actions(spec, action_of)
}

/// Solution of `gamma P_u' mu - mu = -m`.
#[derive(Clone, Debug, PartialEq)]
pub struct LyapunovMeasure {
    pub mu: Vec<f64>,
    /// `||gamma P_u' mu - mu + m||_inf`.
    pub residual: f64,
}

impl LyapunovMeasure {
    /// `mu_j > 0` wherever `m_j > 0`, and `mu >= 0` everywhere.
    pub fn positive_on(&self, m: &[f64]) -> bool {
        self.mu.iter().zip(m).all(|(mu, mj)| if *mj > 0.0 { *mu > 0.0 } else { *mu >= 0.0 })
    }
}

pub fn lyapunov_measure(spec: &StabilizationLP, policy: &ControlPolicy) -> Result<LyapunovMeasure> {
    let p = &policy.closed_loop_sub;
    let mu = solve_shifted(p, spec.gamma, &spec.m, true)
        .map_err(|e| Error::Certificate(format!("closed-loop measure system: {e}")))?;
    let pt = p.tmul_vec(&mu);
    let residual =
        pt.iter().zip(&mu).zip(&spec.m).map(|((a, b), c)| (spec.gamma * a - b + c).abs()).fold(0.0, f64::max);
    Ok(LyapunovMeasure { mu, residual })
}

/// `theta~` concentrated on the chosen action of each cell, with values
/// `(I - gamma P_u')^{-1} m`, and its objective.
pub fn theta_tilde(spec: &StabilizationLP, policy: &ControlPolicy) -> Result<(Vec<Vec<f64>>, f64)> {
    let measure = lyapunov_measure(spec, policy)?;
    let scale = measure.mu.iter().fold(1.0_f64, |a, b| a.max(b.abs()));
    if let Some(j) = measure.mu.iter().position(|&v| v < -1e-12 * scale) {
        return Err(Error::Certificate(format!("closed-loop inverse is not positive: mu[{j}] = {:e}", measure.mu[j])));
    }
    let mut theta = vec![vec![0.0; spec.n_cells()]; spec.n_actions()];
    for (j, a) in policy.action_of.iter().enumerate() {
        if let Some(a) = a {
            theta[*a][j] = measure.mu[j];
        }
    }
    let objective = policy.closed_loop_cost.iter().zip(&measure.mu).map(|(g, mu)| g * mu).sum();
    Ok((theta, objective))
}

/// Closed-loop cost `(G^u)' (I - gamma P_u')^{-1} m` of an arbitrary policy.
pub fn policy_cost(spec: &StabilizationLP, policy: &ControlPolicy) -> Result<f64> {
    theta_tilde(spec, policy).map(|(_, c)| c)
}

/// `V_u = (I - gamma P_u)^{-1} G^u`.
pub fn policy_value(spec: &StabilizationLP, policy: &ControlPolicy) -> Result<Vec<f64>> {
    solve_shifted(&policy.closed_loop_sub, spec.gamma, &policy.closed_loop_cost, false)
        .map_err(|e| Error::Certificate(format!("closed-loop value system: {e}")))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CertificateStatus {
    Valid,
    Invalid,
    /// The spectral estimate did not converge.
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StabilityCertificate {
    pub spectral: SpectralEstimate,
    pub spectral_radius_estimate: f64,
    pub gamma: f64,
    /// `1/gamma - rho`.
    pub margin: f64,
    /// Collatz-Wielandt bound `max_j (P_u V_u)_j / V_j` over cells with
    /// `V_j > 0`, when the policy value is positive.
    pub radius_upper_bound: Option<f64>,
    pub duality_gap: f64,
    /// `|objective(theta~) - primal objective|`.
    pub theta_tilde_check: f64,
    pub status: CertificateStatus,
}

impl StabilityCertificate {
    pub fn is_valid(&self) -> bool {
        self.status == CertificateStatus::Valid
    }

    pub fn report(&self) -> String {
        let mut s = String::new();
        let status = match self.status {
            CertificateStatus::Valid => "valid",
            CertificateStatus::Invalid => "invalid",
            CertificateStatus::Inconclusive => "inconclusive",
        };
        let _ = writeln!(s, "status = {status}");
        let _ = writeln!(s, "gamma = {}", self.gamma);
        let _ = writeln!(s, "spectral_radius_estimate = {:.12e}", self.spectral_radius_estimate);
        let _ = writeln!(s, "power_iterations = {}", self.spectral.iterations);
        let _ = writeln!(s, "power_converged = {}", self.spectral.converged);
        let _ = writeln!(s, "nilpotent = {}", self.spectral.nilpotent);
        let _ = writeln!(s, "inverse_gamma = {:.12e}", 1.0 / self.gamma);
        let _ = writeln!(s, "margin = {:.12e}", self.margin);
        match self.radius_upper_bound {
            Some(b) => {
                let _ = writeln!(s, "radius_upper_bound = {b:.12e}");
            }
            None => {
                let _ = writeln!(s, "radius_upper_bound = none");
            }
        }
        let _ = writeln!(s, "duality_gap = {:.3e}", self.duality_gap);
        let _ = writeln!(s, "theta_tilde_check = {:.3e}", self.theta_tilde_check);
        s
    }
}

fn collatz_bound(p: &CsrMatrix, v: &[f64]) -> Option<f64> {
    if v.iter().any(|&x| !(x > 0.0)) {
        return None;
    }
    let pv = p.mul_vec(v);
    Some(pv.iter().zip(v).map(|(a, b)| a / b).fold(0.0, f64::max))
}

/// Bundles the spectral margin, duality gap and `theta~` consistency.
///
/// Valid iff the power iteration converged with `rho < 1/gamma - rho_tol`
/// and the gap is within `duality_tol (1 + |dual|)`.
pub fn certify(
    spec: &StabilizationLP,
    policy: &ControlPolicy,
    solution: &LPSolution,
    tol: &Tolerances,
) -> StabilityCertificate {
    let spectral = spectral_radius(&policy.closed_loop_sub, PowerIterationOptions::default());
    let rho = spectral.radius;
    let margin = 1.0 / spec.gamma - rho;
    let radius_upper_bound = policy_value(spec, policy).ok().and_then(|v| collatz_bound(&policy.closed_loop_sub, &v));
    let theta_tilde_check = match theta_tilde(spec, policy) {
        Ok((_, obj)) => (obj - solution.primal_objective).abs(),
        Err(_) => f64::INFINITY,
    };
    let duality_gap = solution.duality_gap();
    let status = if !spectral.converged {
        CertificateStatus::Inconclusive
    } else if rho < 1.0 / spec.gamma - tol.rho_tol && solution.is_optimal() && solution.gap_ok(tol) {
        CertificateStatus::Valid
    } else {
        CertificateStatus::Invalid
    };
    StabilityCertificate {
        spectral,
        spectral_radius_estimate: rho,
        gamma: spec.gamma,
        margin,
        radius_upper_bound,
        duality_gap,
        theta_tilde_check,
        status,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValueReport {
    /// `max_j |V_j - gamma (P_u V)_j - G^u_j|` over assigned cells.
    pub recursion_residual: f64,
    /// `max_j |V_j - sum_{k<K} ((gamma P_u)^k G^u)_j|` over assigned cells.
    pub neumann_residual: f64,
    pub neumann_terms: usize,
    /// Sup norm of the last series term added.
    pub neumann_tail: f64,
}

impl ValueReport {
    pub fn passes(&self, tol: &Tolerances) -> bool {
        self.recursion_residual <= tol.kkt_tol && self.neumann_residual <= tol.kkt_tol
    }
}

/// Checks `V = gamma P_u V + G^u` directly and against the truncated series
/// `sum_k (gamma P_u)^k G^u`, summed until the terms stop contributing.
pub fn value_consistency(spec: &StabilizationLP, policy: &ControlPolicy, v: &[f64], max_terms: usize) -> ValueReport {
    let p = &policy.closed_loop_sub;
    let g = &policy.closed_loop_cost;
    let assigned: Vec<usize> = (0..policy.n_cells()).filter(|&j| policy.action_of[j].is_some()).collect();
    let pv = p.mul_vec(v);
    let recursion_residual = assigned.iter().map(|&j| (v[j] - spec.gamma * pv[j] - g[j]).abs()).fold(0.0, f64::max);

    let mut sum = g.clone();
    let mut term = g.clone();
    let mut terms = 1;
    let mut tail = term.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
    while terms < max_terms && tail > 0.0 {
        term = p.mul_vec(&term);
        for t in term.iter_mut() {
            *t *= spec.gamma;
        }
        tail = term.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
        for (s, t) in sum.iter_mut().zip(&term) {
            *s += t;
        }
        terms += 1;
        let size = sum.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
        if tail <= f64::EPSILON * 0.01 * size {
            break;
        }
    }
    let neumann_residual = assigned.iter().map(|&j| (v[j] - sum[j]).abs()).fold(0.0, f64::max);
    ValueReport { recursion_residual, neumann_residual, neumann_terms: terms, neumann_tail: tail }
}
