//! Controlled discrete-time systems `x' = T(x, u)`.

use std::fmt;
use std::sync::Arc;

use crate::discretization::{SamplingMode, TransitionFamily};
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Axis-aligned state box with optional periodic (wrapped) coordinates.
///
/// Wrapped coordinates live on the half-open interval `[lower, upper)`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
    wrap: Vec<bool>,
}

impl StateBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, wrap: Vec<bool>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::Validation("state box needs at least one dimension".into()));
        }
        if lower.len() != upper.len() || lower.len() != wrap.len() {
            return Err(Error::Dimension(format!(
                "box bounds have lengths {}, {}, {}",
                lower.len(),
                upper.len(),
                wrap.len()
            )));
        }
        for (d, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Validation(format!(
                    "dimension {d}: lower bound {lo} must be below upper bound {hi}"
                )));
            }
        }
        Ok(Self { lower, upper, wrap })
    }

    /// The unit torus `[0,1)^dim`.
    pub fn unit_torus(dim: usize) -> Self {
        Self::new(vec![0.0; dim], vec![1.0; dim], vec![true; dim]).expect("valid unit box")
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn wrap(&self) -> &[bool] {
        &self.wrap
    }

    pub fn width(&self, d: usize) -> f64 {
        self.upper[d] - self.lower[d]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|d| self.width(d)).product()
    }

    /// Folds wrapped coordinates into `[lower, upper)`. A value that lands on
    /// `upper` after rounding folds to `lower`.
    pub fn fold(&self, x: &mut [f64]) {
        for d in 0..self.dim() {
            if self.wrap[d] {
                x[d] = fold_periodic(x[d], self.lower[d], self.upper[d]);
            }
        }
    }

    /// Checks membership; wrapped coordinates only need to be finite.
    pub fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Dimension(format!("state has {} coordinates, box has {}", x.len(), self.dim())));
        }
        for (d, &v) in x.iter().enumerate() {
            let inside = if self.wrap[d] { v.is_finite() } else { v >= self.lower[d] && v < self.upper[d] };
            if !inside {
                return Err(Error::Domain(format!(
                    "coordinate {d} = {v} outside [{}, {})",
                    self.lower[d], self.upper[d]
                )));
            }
        }
        Ok(())
    }
}

fn fold_periodic(v: f64, lo: f64, hi: f64) -> f64 {
    let len = hi - lo;
    let r = (v - lo).rem_euclid(len);
    if r >= len {
        lo
    } else {
        lo + r
    }
}

type MapFn = dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync;

/// A deterministic controlled map on a state box.
#[derive(Clone)]
pub struct SystemDef {
    name: String,
    state_box: StateBox,
    control_dim: usize,
    map: Arc<MapFn>,
}

impl fmt::Debug for SystemDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemDef")
            .field("name", &self.name)
            .field("state_box", &self.state_box)
            .field("control_dim", &self.control_dim)
            .finish_non_exhaustive()
    }
}

impl SystemDef {
    pub fn new<F>(name: impl Into<String>, state_box: StateBox, control_dim: usize, map: F) -> Self
    where
        F: Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        Self { name: name.into(), state_box, control_dim, map: Arc::new(map) }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.state_box.dim()
    }

    pub fn control_dim(&self) -> usize {
        self.control_dim
    }

    pub fn state_box(&self) -> &StateBox {
        &self.state_box
    }

    /// `T(x, u)`, folded into the box on wrapped dimensions.
    pub fn evaluate(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        self.state_box.check(x)?;
        if u.len() != self.control_dim {
            return Err(Error::Dimension(format!(
                "control has {} entries, system expects {}",
                u.len(),
                self.control_dim
            )));
        }
        Ok(self.evaluate_unchecked(x, u))
    }

    /// `T(x, u)` without argument validation.
    pub fn evaluate_unchecked(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let mut y = (self.map)(x, u);
        self.state_box.fold(&mut y);
        y
    }
}

/// Perturbation strength of the controlled standard map.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StandardMapParams {
    pub k: f64,
}

impl Default for StandardMapParams {
    fn default() -> Self {
        Self { k: 0.25 }
    }
}

/// The controlled standard (Chirikov) map on the unit torus:
///
/// ```text
/// x' = x + y + K u sin(2 pi x)   (mod 1)
/// y' =     y + K u sin(2 pi x)   (mod 1)
/// ```
pub fn standard_map(params: StandardMapParams) -> Result<SystemDef> {
    if !params.k.is_finite() {
        return Err(Error::Validation(format!("K = {} is not finite", params.k)));
    }
    let k = params.k;
    Ok(SystemDef::new("standard_map", StateBox::unit_torus(2), 1, move |x, u| {
        let kick = k * u[0] * (2.0 * std::f64::consts::PI * x[0]).sin();
        vec![x[0] + x[1] + kick, x[1] + kick]
    }))
}

/// `T(x, u) = x` on the given box; the control dimension is arbitrary.
pub fn identity_system(state_box: StateBox, control_dim: usize) -> SystemDef {
    SystemDef::new("identity", state_box, control_dim, |x, _| x.to_vec())
}

/// `T(x, u) = x + u`, componentwise; control dimension equals the state
/// dimension. Intended for wrapped boxes.
pub fn shift_system(state_box: StateBox) -> SystemDef {
    let dim = state_box.dim();
    SystemDef::new("shift", state_box, dim, |x, u| x.iter().zip(u).map(|(a, b)| a + b).collect())
}

/// A system given directly by its per-action transition matrices. The last
/// cell is the attractor macro-cell; there is no state geometry.
#[derive(Clone, Debug, PartialEq)]
pub struct ExplicitSystem {
    pub family: TransitionFamily,
    pub labels: Vec<String>,
}

/// Validates dense row-stochastic matrices (rows summing to one within
/// 1e-12, nonnegative entries) and wraps them as a transition family.
pub fn explicit_matrix_system(matrices: &[Vec<Vec<f64>>], labels: Vec<String>) -> Result<ExplicitSystem> {
    if labels.len() != matrices.len() {
        return Err(Error::Dimension(format!("{} labels for {} matrices", labels.len(), matrices.len())));
    }
    let n = matrices.first().map_or(0, Vec::len);
    let mut full = Vec::with_capacity(matrices.len());
    for (a, m) in matrices.iter().enumerate() {
        if m.len() != n || m.iter().any(|row| row.len() != n) {
            return Err(Error::Dimension(format!("matrix {a} is not {n}x{n}")));
        }
        full.push(CsrMatrix::from_dense(m));
    }
    let family = TransitionFamily::from_full(full, 0, SamplingMode::Explicit)?;
    Ok(ExplicitSystem { family, labels })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn standard_map_uncontrolled_is_shift() {
        let sys = standard_map(StandardMapParams::default()).unwrap();
        let y = sys.evaluate(&[0.25, 0.5], &[0.0]).unwrap();
        assert!(close(&y, &[0.75, 0.5]));
    }

    #[test]
    fn standard_map_kick_examples() {
        let sys = standard_map(StandardMapParams { k: 0.25 }).unwrap();
        let y = sys.evaluate(&[0.25, 0.5], &[1.0]).unwrap();
        assert!(close(&y, &[0.0, 0.75]), "{y:?}");
        let y = sys.evaluate(&[0.75, 0.5], &[1.0]).unwrap();
        assert!(close(&y, &[0.0, 0.25]), "{y:?}");
    }

    #[test]
    fn identity_and_shift() {
        let line = StateBox::unit_torus(1);
        assert_eq!(identity_system(line.clone(), 1).evaluate(&[0.3], &[5.0]).unwrap(), vec![0.3]);
        let y = shift_system(line).evaluate(&[0.9], &[0.2]).unwrap();
        assert!((y[0] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn fold_is_half_open() {
        assert_eq!(fold_periodic(1.0, 0.0, 1.0), 0.0);
        assert_eq!(fold_periodic(-1e-18, 0.0, 1.0), 0.0);
        assert_eq!(fold_periodic(-0.25, 0.0, 1.0), 0.75);
    }

    #[test]
    fn out_of_box_state_rejected_on_plain_dimension() {
        let b = StateBox::new(vec![0.0], vec![1.0], vec![false]).unwrap();
        let sys = identity_system(b, 1);
        assert!(matches!(sys.evaluate(&[1.0], &[0.0]), Err(Error::Domain(_))));
        assert!(sys.evaluate(&[0.5], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn explicit_systems_validate_rows() {
        let ok = explicit_matrix_system(&[vec![vec![1.0, 0.0], vec![0.0, 1.0]]], vec!["a".into()]).unwrap();
        assert_eq!(ok.family.n_cells(), 2);
        let bad = explicit_matrix_system(&[vec![vec![0.9, 0.0], vec![0.0, 1.0]]], vec!["a".into()]);
        assert!(matches!(bad, Err(Error::NotStochastic { row: 0, .. })));
        let neg = explicit_matrix_system(&[vec![vec![1.5, -0.5], vec![0.0, 1.0]]], vec!["a".into()]);
        assert!(neg.is_err());
    }

    #[test]
    fn invalid_box_rejected() {
        assert!(StateBox::new(vec![1.0], vec![1.0], vec![false]).is_err());
        assert!(StateBox::new(vec![], vec![], vec![]).is_err());
    }
}
