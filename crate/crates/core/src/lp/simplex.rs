//! Two-phase revised simplex on standard-form data.
//!
//! The basis inverse is kept explicitly (dense, column-major) and updated
//! with product-form pivots; it is refactored from scratch whenever the
//! primal residual drifts. Pricing is Dantzig's rule, switching to Bland's
//! rule after a run of degenerate pivots so the method cannot cycle.

use super::{SolveOptions, SolveStatus, StandardForm};
use crate::dense::DenseLu;
use crate::error::Result;

const NOT_BASIC: usize = usize::MAX;
const DEGENERATE_RUN: usize = 50;
const DUAL_REFRESH: usize = 50;
const RESIDUAL_CHECK: usize = 200;
const CRASH_PIVOT_TOL: f64 = 1e-7;

pub(crate) struct RawOutcome {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub farkas: Option<Vec<f64>>,
    pub phase1_iterations: usize,
    pub phase2_iterations: usize,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Phase {
    One,
    Two,
}

enum Step {
    Optimal,
    Unbounded,
    IterationLimit,
}

struct Simplex<'a> {
    lp: &'a StandardForm,
    m: usize,
    /// Structural column count; artificial `i` has index `n + i`.
    n: usize,
    art_cols: Vec<Vec<(usize, f64)>>,
    basis: Vec<usize>,
    position: Vec<usize>,
    binv: Vec<f64>,
    xb: Vec<f64>,
    y: Vec<f64>,
    cost: Vec<f64>,
    b_scale: f64,
    iterations: usize,
}

impl<'a> Simplex<'a> {
    /// Starting basis: a positive unit column where one exists, otherwise the
    /// artificial for that row. The basis matrix is diagonal.
    fn new(lp: &'a StandardForm) -> Self {
        let m = lp.m;
        let n = lp.columns.len();
        let mut unit: Vec<Option<(usize, f64)>> = vec![None; m];
        for (j, col) in lp.columns.iter().enumerate() {
            if let [(i, v)] = col[..] {
                if v > 0.0 && unit[i].is_none() {
                    unit[i] = Some((j, v));
                }
            }
        }
        let mut basis = Vec::with_capacity(m);
        let mut position = vec![NOT_BASIC; n + m];
        let mut binv = vec![0.0; m * m];
        let mut xb = vec![0.0; m];
        for i in 0..m {
            let (j, v) = unit[i].unwrap_or((n + i, 1.0));
            basis.push(j);
            position[j] = i;
            binv[i * m + i] = 1.0 / v;
            xb[i] = lp.rhs[i] / v;
        }
        let b_scale = 1.0 + lp.rhs.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
        Self {
            lp,
            m,
            n,
            art_cols: (0..m).map(|i| vec![(i, 1.0)]).collect(),
            basis,
            position,
            binv,
            xb,
            y: vec![0.0; m],
            cost: vec![0.0; n + m],
            b_scale,
            iterations: 0,
        }
    }

    fn column(&self, j: usize) -> &[(usize, f64)] {
        if j < self.n {
            &self.lp.columns[j]
        } else {
            &self.art_cols[j - self.n]
        }
    }

    fn is_artificial(&self, j: usize) -> bool {
        j >= self.n
    }

    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut alpha = vec![0.0; m];
        for &(k, a) in self.column(j) {
            for (out, &b) in alpha.iter_mut().zip(&self.binv[k * m..(k + 1) * m]) {
                *out += a * b;
            }
        }
        alpha
    }

    fn refresh_duals(&mut self) {
        let m = self.m;
        let cb: Vec<f64> = self.basis.iter().map(|&j| self.cost[j]).collect();
        for j in 0..m {
            let col = &self.binv[j * m..(j + 1) * m];
            self.y[j] = col.iter().zip(&cb).map(|(b, c)| b * c).sum();
        }
    }

    fn refine_duals(&mut self) {
        let m = self.m;
        let r: Vec<f64> = self
            .basis
            .iter()
            .map(|&j| self.cost[j] - self.column(j).iter().map(|&(i, a)| a * self.y[i]).sum::<f64>())
            .collect();
        for j in 0..m {
            let col = &self.binv[j * m..(j + 1) * m];
            self.y[j] += col.iter().zip(&r).map(|(b, ri)| b * ri).sum::<f64>();
        }
    }

    fn primal_residual(&self) -> Vec<f64> {
        let mut r = self.lp.rhs.clone();
        for (pos, &j) in self.basis.iter().enumerate() {
            let x = self.xb[pos];
            for &(i, a) in self.column(j) {
                r[i] -= a * x;
            }
        }
        r
    }

    fn refine_primal(&mut self) {
        let m = self.m;
        let r = self.primal_residual();
        for (k, &rk) in r.iter().enumerate() {
            if rk != 0.0 {
                for (x, &b) in self.xb.iter_mut().zip(&self.binv[k * m..(k + 1) * m]) {
                    *x += b * rk;
                }
            }
        }
    }

    fn recompute_primal(&mut self) {
        let m = self.m;
        self.xb = vec![0.0; m];
        for k in 0..m {
            let bk = self.lp.rhs[k];
            if bk != 0.0 {
                for (x, &b) in self.xb.iter_mut().zip(&self.binv[k * m..(k + 1) * m]) {
                    *x += b * bk;
                }
            }
        }
    }

    fn reinvert(&mut self) -> Result<()> {
        let m = self.m;
        let mut dense = vec![0.0; m * m];
        for (pos, &j) in self.basis.iter().enumerate() {
            for &(i, a) in self.column(j) {
                dense[i * m + pos] = a;
            }
        }
        self.binv = DenseLu::factor(m, dense)?.inverse_col_major();
        self.recompute_primal();
        self.refine_primal();
        self.refresh_duals();
        log::debug!("simplex: basis refactored at iteration {}", self.iterations);
        Ok(())
    }

    /// Replaces the variable at basis position `r` by column `q`, updating the
    /// inverse only.
    fn pivot_inverse(&mut self, r: usize, q: usize, alpha: &[f64]) {
        let m = self.m;
        let ar = alpha[r];
        for col in self.binv.chunks_exact_mut(m) {
            let t = col[r] / ar;
            if t != 0.0 {
                for (v, &a) in col.iter_mut().zip(alpha) {
                    *v -= a * t;
                }
                col[r] = t;
            }
        }
        let leaving = self.basis[r];
        self.position[leaving] = NOT_BASIC;
        self.basis[r] = q;
        self.position[q] = r;
    }

    fn pivot(&mut self, r: usize, q: usize, alpha: &[f64], reduced_cost: f64) {
        let step = self.xb[r] / alpha[r];
        for (x, &a) in self.xb.iter_mut().zip(alpha) {
            *x -= step * a;
        }
        self.xb[r] = step;
        self.pivot_inverse(r, q, alpha);
        let m = self.m;
        for (k, yk) in self.y.iter_mut().enumerate() {
            *yk += reduced_cost * self.binv[k * m + r];
        }
    }

    fn reduced_cost(&self, j: usize) -> f64 {
        self.cost[j] - self.column(j).iter().map(|&(i, a)| a * self.y[i]).sum::<f64>()
    }

    fn price(&self, bland: bool, tol: f64) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.n {
            if self.position[j] != NOT_BASIC {
                continue;
            }
            let d = self.reduced_cost(j);
            if d < -tol {
                if bland {
                    return Some((j, d));
                }
                if best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((j, d));
                }
            }
        }
        best
    }

    fn ratio_test(&self, alpha: &[f64], phase: Phase, bland: bool, pivot_tol: f64) -> Option<usize> {
        let mut best: Option<(usize, f64, f64)> = None;
        for (i, &a) in alpha.iter().enumerate() {
            let basic = self.basis[i];
            let ratio = if phase == Phase::Two && self.is_artificial(basic) && a.abs() > pivot_tol {
                0.0
            } else if a > pivot_tol {
                self.xb[i].max(0.0) / a
            } else {
                continue;
            };
            let replace = match best {
                None => true,
                Some((bi, br, ba)) => {
                    let tie = 1e-12 * (1.0 + br);
                    if ratio < br - tie {
                        true
                    } else if ratio <= br + tie {
                        if bland {
                            basic < self.basis[bi]
                        } else {
                            a.abs() > ba
                        }
                    } else {
                        false
                    }
                }
            };
            if replace {
                best = Some((i, ratio, a.abs()));
            }
        }
        best.map(|(i, _, _)| i)
    }

    fn iterate(&mut self, phase: Phase, opts: &SolveOptions, counter: &mut usize) -> Result<Step> {
        let cmax = self.cost.iter().fold(0.0_f64, |a, c| a.max(c.abs()));
        let tol = opts.opt_tol * cmax.max(1.0);
        let mut degenerate = 0usize;
        let mut since_refresh = 0usize;
        loop {
            let bland = opts.bland || degenerate >= DEGENERATE_RUN;
            let entering = match self.price(bland, tol) {
                Some(e) => e,
                None => {
                    self.refine_primal();
                    self.refresh_duals();
                    self.refine_duals();
                    match self.price(bland, tol) {
                        Some(e) => e,
                        None => return Ok(Step::Optimal),
                    }
                }
            };
            if self.iterations >= opts.max_iters {
                return Ok(Step::IterationLimit);
            }
            let (q, d) = entering;
            let alpha = self.ftran(q);
            let Some(r) = self.ratio_test(&alpha, phase, bland, opts.pivot_tol) else {
                return Ok(Step::Unbounded);
            };
            let step = self.xb[r].max(0.0) / alpha[r];
            if step.abs() <= opts.feas_tol {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(r, q, &alpha, d);
            self.iterations += 1;
            *counter += 1;
            since_refresh += 1;
            if since_refresh.is_multiple_of(DUAL_REFRESH) {
                self.refresh_duals();
            }
            if since_refresh.is_multiple_of(RESIDUAL_CHECK) {
                let drift = self.primal_residual().iter().fold(0.0_f64, |a, v| a.max(v.abs()));
                if drift > 1e-9 * self.b_scale {
                    self.reinvert()?;
                }
            }
        }
    }

    /// Crashes hint columns into artificial positions. Keeps the result only
    /// if the crashed basis is primal feasible.
    fn crash(&mut self, hint: &[usize], feas_tol: f64) {
        let saved = (self.basis.clone(), self.position.clone(), self.binv.clone(), self.xb.clone());
        for &q in hint {
            if q >= self.n || self.position[q] != NOT_BASIC {
                continue;
            }
            let alpha = self.ftran(q);
            let target = (0..self.m)
                .filter(|&i| self.is_artificial(self.basis[i]))
                .max_by(|&a, &b| alpha[a].abs().total_cmp(&alpha[b].abs()));
            if let Some(r) = target {
                if alpha[r].abs() > CRASH_PIVOT_TOL {
                    self.pivot_inverse(r, q, &alpha);
                }
            }
        }
        self.recompute_primal();
        self.refine_primal();
        if self.xb.iter().any(|&x| x < -feas_tol * self.b_scale) {
            log::debug!("simplex: crash basis infeasible, falling back to slack basis");
            (self.basis, self.position, self.binv, self.xb) = saved;
        }
    }

    /// Pivots zero-level artificials out of the basis where possible.
    fn drive_out_artificials(&mut self) -> usize {
        let m = self.m;
        let mut pivots = 0;
        for r in 0..m {
            if !self.is_artificial(self.basis[r]) {
                continue;
            }
            let row: Vec<f64> = (0..m).map(|k| self.binv[k * m + r]).collect();
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.n {
                if self.position[j] != NOT_BASIC {
                    continue;
                }
                let v: f64 = self.column(j).iter().map(|&(i, a)| a * row[i]).sum();
                if v.abs() > 1e-7 && best.is_none_or(|(_, bv)| v.abs() > bv) {
                    best = Some((j, v.abs()));
                }
            }
            if let Some((q, _)) = best {
                let alpha = self.ftran(q);
                self.pivot(r, q, &alpha, 0.0);
                pivots += 1;
            }
        }
        pivots
    }

    fn structural_solution(&self, feas_tol: f64) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        for (pos, &j) in self.basis.iter().enumerate() {
            if j < self.n {
                let v = self.xb[pos];
                x[j] = if v < 0.0 && v > -feas_tol * self.b_scale { 0.0 } else { v };
            }
        }
        x
    }
}

pub(crate) fn run(lp: &StandardForm, opts: &SolveOptions, hint: Option<&[usize]>) -> Result<RawOutcome> {
    let mut s = Simplex::new(lp);
    if let Some(h) = hint {
        s.crash(h, opts.feas_tol);
    }
    let n = s.n;
    let mut phase1 = 0usize;
    let mut phase2 = 0usize;

    let infeasibility = |s: &Simplex| -> f64 {
        s.basis.iter().zip(&s.xb).filter(|(&j, _)| s.is_artificial(j)).map(|(_, &x)| x.max(0.0)).sum()
    };

    if s.basis.iter().any(|&j| j >= n) {
        if infeasibility(&s) > opts.feas_tol * s.b_scale {
            for j in n..n + s.m {
                s.cost[j] = 1.0;
            }
            s.refresh_duals();
            let step = s.iterate(Phase::One, opts, &mut phase1)?;
            if let Step::IterationLimit = step {
                return Ok(RawOutcome {
                    status: SolveStatus::IterationLimit,
                    x: s.structural_solution(opts.feas_tol),
                    y: s.y.clone(),
                    farkas: None,
                    phase1_iterations: phase1,
                    phase2_iterations: 0,
                });
            }
            let w = infeasibility(&s);
            if w > opts.feas_tol * s.b_scale {
                log::debug!("simplex: phase one ends with infeasibility {w:e}");
                return Ok(RawOutcome {
                    status: SolveStatus::Infeasible,
                    x: s.structural_solution(opts.feas_tol),
                    y: vec![0.0; s.m],
                    farkas: Some(s.y.clone()),
                    phase1_iterations: phase1,
                    phase2_iterations: 0,
                });
            }
            for j in n..n + s.m {
                s.cost[j] = 0.0;
            }
        }
        phase1 += s.drive_out_artificials();
    }

    s.cost[..n].copy_from_slice(&lp.cost);
    s.refresh_duals();
    let step = s.iterate(Phase::Two, opts, &mut phase2)?;
    let status = match step {
        Step::Optimal => SolveStatus::Optimal,
        Step::Unbounded => SolveStatus::Unbounded,
        Step::IterationLimit => SolveStatus::IterationLimit,
    };
    log::debug!("simplex: {status:?} after {phase1} + {phase2} iterations");
    Ok(RawOutcome {
        status,
        x: s.structural_solution(opts.feas_tol),
        y: s.y.clone(),
        farkas: None,
        phase1_iterations: phase1,
        phase2_iterations: phase2,
    })
}
