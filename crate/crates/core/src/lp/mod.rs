//! General linear programs and a self-contained revised simplex solver.
//!
//! Problems are stated as
//!
//! ```text
//! min / max  c'x
//! s.t.       a_i'x  (=, <=, >=)  b_i
//!            x_j >= 0  or  x_j free
//! ```
//!
//! and converted internally to standard form `min c'x, Ax = b, x >= 0,
//! b >= 0` with slack, surplus and split variables.

mod mps;
mod simplex;

pub use mps::{read_mps, write_mps};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowKind {
    Eq,
    Le,
    Ge,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarKind {
    NonNegative,
    Free,
}

/// A sparse column: `(row, coefficient)` pairs with distinct rows.
pub type SparseColumn = Vec<(usize, f64)>;

#[derive(Clone, Debug, PartialEq)]
pub struct LinearProgram {
    pub name: String,
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub columns: Vec<SparseColumn>,
    pub row_kinds: Vec<RowKind>,
    pub rhs: Vec<f64>,
    pub var_kinds: Vec<VarKind>,
}

impl LinearProgram {
    pub fn n_rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn n_cols(&self) -> usize {
        self.objective.len()
    }

    pub fn validate(&self) -> Result<()> {
        let (m, n) = (self.n_rows(), self.n_cols());
        if self.columns.len() != n || self.var_kinds.len() != n || self.row_kinds.len() != m {
            return Err(Error::Dimension(format!(
                "{} objective entries, {} columns, {} variable kinds; {} rhs entries, {} row kinds",
                n,
                self.columns.len(),
                self.var_kinds.len(),
                m,
                self.row_kinds.len()
            )));
        }
        if self.objective.iter().chain(&self.rhs).any(|v| !v.is_finite()) {
            return Err(Error::Validation("objective and right-hand side must be finite".into()));
        }
        for (j, col) in self.columns.iter().enumerate() {
            for &(i, v) in col {
                if i >= m || !v.is_finite() {
                    return Err(Error::Validation(format!("column {j}: bad entry ({i}, {v})")));
                }
            }
        }
        Ok(())
    }

    /// `A x` over the original rows.
    pub fn row_activity(&self, x: &[f64]) -> Vec<f64> {
        let mut ax = vec![0.0; self.n_rows()];
        for (col, &xj) in self.columns.iter().zip(x) {
            for &(i, v) in col {
                ax[i] += v * xj;
            }
        }
        ax
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Iteration budget exhausted; the reported point is the last iterate.
    IterationLimit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOptions {
    pub max_iters: usize,
    /// Primal feasibility tolerance on basic values and row residuals.
    pub feas_tol: f64,
    /// Reduced-cost tolerance, relative to `max(1, |c|_inf)`.
    pub opt_tol: f64,
    pub pivot_tol: f64,
    /// Use Bland's smallest-index rule throughout instead of only after
    /// runs of degenerate pivots.
    pub bland: bool,
    /// Original (nonnegative) variables to crash into the starting basis.
    pub initial_basis: Option<Vec<usize>>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { max_iters: 500_000, feas_tol: 1e-9, opt_tol: 1e-11, pivot_tol: 1e-9, bland: false, initial_basis: None }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpResult {
    pub status: SolveStatus,
    /// Values of the original variables.
    pub x: Vec<f64>,
    /// Row multipliers: at an optimum `c - A'y` is dual feasible and
    /// `b'y` equals the objective. For an infeasible problem this holds a
    /// Farkas ray instead (see [`LpResult::farkas`]).
    pub y: Vec<f64>,
    pub objective: f64,
    pub phase1_iterations: usize,
    pub phase2_iterations: usize,
    /// Farkas certificate for infeasibility, in original row space: a
    /// vector with `b'y > 0` that no feasible point can satisfy.
    pub farkas: Option<Vec<f64>>,
    /// Max row violation of `x` against the original constraints.
    pub primal_residual: f64,
}

impl LpResult {
    pub fn iterations(&self) -> usize {
        self.phase1_iterations + self.phase2_iterations
    }

    /// `b'y`.
    pub fn dual_objective(&self, lp: &LinearProgram) -> f64 {
        lp.rhs.iter().zip(&self.y).map(|(b, y)| b * y).sum()
    }
}

#[derive(Clone, Copy, Debug)]
enum StdCol {
    Var { index: usize, sign: f64 },
    Slack,
}

/// Standard-form data consumed by the simplex core.
#[derive(Debug)]
pub(crate) struct StandardForm {
    pub m: usize,
    pub columns: Vec<SparseColumn>,
    pub cost: Vec<f64>,
    pub rhs: Vec<f64>,
    origin: Vec<StdCol>,
    row_sign: Vec<f64>,
    /// Standard-form column of the positive part of each original variable.
    first_col: Vec<usize>,
}

impl StandardForm {
    fn build(lp: &LinearProgram) -> Self {
        let m = lp.n_rows();
        let row_sign: Vec<f64> = lp.rhs.iter().map(|&b| if b < 0.0 { -1.0 } else { 1.0 }).collect();
        let obj_sign = match lp.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let mut columns = Vec::new();
        let mut cost = Vec::new();
        let mut origin = Vec::new();
        let mut first_col = Vec::with_capacity(lp.n_cols());
        for (j, col) in lp.columns.iter().enumerate() {
            let signs: &[f64] = match lp.var_kinds[j] {
                VarKind::NonNegative => &[1.0],
                VarKind::Free => &[1.0, -1.0],
            };
            first_col.push(columns.len());
            for &s in signs {
                columns.push(col.iter().map(|&(i, v)| (i, s * v * row_sign[i])).collect());
                cost.push(obj_sign * s * lp.objective[j]);
                origin.push(StdCol::Var { index: j, sign: s });
            }
        }
        for (i, kind) in lp.row_kinds.iter().enumerate() {
            let coef = match kind {
                RowKind::Eq => continue,
                RowKind::Le => 1.0,
                RowKind::Ge => -1.0,
            };
            columns.push(vec![(i, coef * row_sign[i])]);
            cost.push(0.0);
            origin.push(StdCol::Slack);
        }
        let rhs = lp.rhs.iter().zip(&row_sign).map(|(b, s)| b * s).collect();
        Self { m, columns, cost, rhs, origin, row_sign, first_col }
    }
}

/// Solves `lp` with the two-phase revised simplex method.
pub fn solve(lp: &LinearProgram, opts: &SolveOptions) -> Result<LpResult> {
    lp.validate()?;
    let std = StandardForm::build(lp);
    let hint: Option<Vec<usize>> = match &opts.initial_basis {
        Some(vars) => Some(
            vars.iter()
                .map(|&j| {
                    std.first_col
                        .get(j)
                        .copied()
                        .ok_or_else(|| Error::Dimension(format!("basis hint names variable {j} of {}", lp.n_cols())))
                })
                .collect::<Result<_>>()?,
        ),
        None => None,
    };
    let out = simplex::run(&std, opts, hint.as_deref())?;

    let mut x = vec![0.0; lp.n_cols()];
    for (k, origin) in std.origin.iter().enumerate() {
        if let StdCol::Var { index, sign } = origin {
            x[*index] += sign * out.x[k];
        }
    }
    let obj_sign = match lp.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let y: Vec<f64> = out.y.iter().zip(&std.row_sign).map(|(y, s)| obj_sign * y * s).collect();
    let farkas = out.farkas.map(|f| f.iter().zip(&std.row_sign).map(|(y, s)| y * s).collect());
    let primal_residual = row_violation(lp, &x);
    Ok(LpResult {
        status: out.status,
        objective: lp.objective_value(&x),
        x,
        y,
        phase1_iterations: out.phase1_iterations,
        phase2_iterations: out.phase2_iterations,
        farkas,
        primal_residual,
    })
}

/// Largest violation of the original row constraints and sign bounds.
pub fn row_violation(lp: &LinearProgram, x: &[f64]) -> f64 {
    let ax = lp.row_activity(x);
    let rows = ax.iter().zip(&lp.rhs).zip(&lp.row_kinds).map(|((a, b), kind)| match kind {
        RowKind::Eq => (a - b).abs(),
        RowKind::Le => (a - b).max(0.0),
        RowKind::Ge => (b - a).max(0.0),
    });
    let bounds = x.iter().zip(&lp.var_kinds).map(|(v, kind)| match kind {
        VarKind::NonNegative => (-v).max(0.0),
        VarKind::Free => 0.0,
    });
    rows.chain(bounds).fold(0.0, f64::max)
}
