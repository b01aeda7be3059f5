//! Backward reachability tree: a deterministic stabilizing assignment built
//! layer by layer outward from the attractor cell, and the transience check
//! of the resulting closed loop.

use std::fmt::Write as _;

use crate::discretization::TransitionFamily;
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;
use crate::spectral::{power_inf_norms, spectral_radius, PowerIterationOptions, SpectralEstimate};

/// Entries at or below this value do not count as reachable transitions.
pub const POSITIVE_ENTRY_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stabilizability {
    Stabilizable,
    PartiallyStabilizable,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeasibilityResult {
    pub status: Stabilizability,
    /// `layers[0]` is the attractor cell; `layers[l]` holds the cells first
    /// reached at depth `l`, ascending.
    pub layers: Vec<Vec<usize>>,
    /// Action per cell; `None` for the attractor and unstabilizable cells.
    pub assignment: Vec<Option<usize>>,
    pub unstabilizable: Vec<usize>,
}

impl FeasibilityResult {
    /// Depth of the deepest nonempty layer.
    pub fn l_max(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn is_stabilizable(&self) -> bool {
        self.status == Stabilizability::Stabilizable
    }

    /// Structured text report, 1-based cell and action indices.
    pub fn report(&self) -> String {
        let mut out = String::new();
        let status = match self.status {
            Stabilizability::Stabilizable => "stabilizable",
            Stabilizability::PartiallyStabilizable => "partially_stabilizable",
        };
        let _ = writeln!(out, "status = {status}");
        let _ = writeln!(out, "l_max = {}", self.l_max());
        let _ = writeln!(out, "[layers]");
        for (l, layer) in self.layers.iter().enumerate() {
            let cells: Vec<String> = layer.iter().map(|c| (c + 1).to_string()).collect();
            let _ = writeln!(out, "{l}: {}", cells.join(" "));
        }
        let _ = writeln!(out, "[assignment]");
        for (i, a) in self.assignment.iter().enumerate() {
            if let Some(a) = a {
                let _ = writeln!(out, "{} {}", i + 1, a + 1);
            }
        }
        let _ = writeln!(out, "[unstabilizable]");
        let cells: Vec<String> = self.unstabilizable.iter().map(|c| (c + 1).to_string()).collect();
        let _ = writeln!(out, "{}", cells.join(" "));
        out
    }
}

/// Grows the backward tree from the attractor cell `N`.
///
/// Each round scans the cells not yet layered in ascending order and gives
/// each one the smallest action with a positive transition into the
/// previous layer. Stops when every cell is layered or a round adds nothing.
pub fn grow_tree(family: &TransitionFamily) -> FeasibilityResult {
    let n = family.n_cells();
    let attractor = n - 1;
    let mut layer_of: Vec<Option<usize>> = vec![None; n];
    layer_of[attractor] = Some(0);
    let mut assignment = vec![None; n];
    let mut layers = vec![vec![attractor]];
    let mut layered = 1;

    let status = loop {
        let depth = layers.len() - 1;
        let mut next = Vec::new();
        for i in 0..attractor {
            if layer_of[i].is_some() {
                continue;
            }
            let chosen = family
                .full()
                .iter()
                .position(|p| p.row(i).any(|(j, v)| v > POSITIVE_ENTRY_TOL && layer_of[j] == Some(depth)));
            if let Some(a) = chosen {
                assignment[i] = Some(a);
                next.push(i);
            }
        }
        for &i in &next {
            layer_of[i] = Some(depth + 1);
        }
        layered += next.len();
        if next.is_empty() {
            break if layered == n { Stabilizability::Stabilizable } else { Stabilizability::PartiallyStabilizable };
        }
        layers.push(next);
        if layered == n {
            break Stabilizability::Stabilizable;
        }
    };

    let unstabilizable = (0..n).filter(|&i| layer_of[i].is_none()).collect();
    FeasibilityResult { status, layers, assignment, unstabilizable }
}

/// Closed-loop sub-Markov matrix for a (partial) cell-wise assignment.
pub fn closed_loop_sub(family: &TransitionFamily, assignment: &[Option<usize>]) -> Result<CsrMatrix> {
    let n = family.n_cells();
    if assignment.len() < n - 1 {
        return Err(Error::Dimension(format!("assignment covers {} cells, family has {}", assignment.len(), n - 1)));
    }
    CsrMatrix::select_rows(family.sub(), &assignment[..n - 1])
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransienceReport {
    pub l_max: usize,
    /// `||(P1)^(k L_max)||_inf` for k = 1..=horizon.
    pub norms: Vec<f64>,
    pub strictly_decreasing: bool,
    /// Total mass of the uniform distribution before and after `L_max` steps.
    pub mass_before: f64,
    pub mass_after: f64,
    pub spectral: SpectralEstimate,
}

impl TransienceReport {
    pub fn final_norm(&self) -> f64 {
        self.norms.last().copied().unwrap_or(1.0)
    }

    /// Mass leaks within `L_max` steps, powers decrease strictly and the
    /// spectral radius is below one.
    pub fn is_transient(&self) -> bool {
        self.strictly_decreasing
            && self.mass_after < self.mass_before
            && self.spectral.converged
            && self.spectral.radius < 1.0
    }
}

/// Default number of `L_max`-step blocks: enough to cover 200 steps.
pub fn default_horizon(l_max: usize) -> usize {
    200_usize.div_ceil(l_max.max(1))
}

/// Certifies that the tree assignment drains every cell into the attractor.
pub fn transience_certificate(
    family: &TransitionFamily,
    result: &FeasibilityResult,
    horizon: usize,
) -> Result<TransienceReport> {
    if !result.is_stabilizable() {
        return Err(Error::Precondition(format!(
            "{} cells cannot reach the attractor; transience needs a stabilizable assignment",
            result.unstabilizable.len()
        )));
    }
    let p = closed_loop_sub(family, &result.assignment)?;
    let l_max = result.l_max().max(1);
    let norms = power_inf_norms(&p, l_max, horizon);
    let mut prev = 1.0;
    let mut strictly_decreasing = true;
    for &v in &norms {
        if !(v < prev || (v == 0.0 && prev == 0.0)) {
            strictly_decreasing = false;
        }
        prev = v;
    }
    let dim = p.rows();
    let mut mu = vec![1.0 / dim.max(1) as f64; dim];
    let mass_before: f64 = mu.iter().sum();
    for _ in 0..l_max {
        mu = p.tmul_vec(&mu);
    }
    let mass_after: f64 = mu.iter().sum();
    let spectral = spectral_radius(&p, PowerIterationOptions { max_iters: 10_000, tol: 1e-12 });
    Ok(TransienceReport { l_max, norms, strictly_decreasing, mass_before, mass_after, spectral })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::explicit_matrix_system;

    fn family(ms: &[Vec<Vec<f64>>]) -> TransitionFamily {
        let labels = (0..ms.len()).map(|a| format!("a{a}")).collect();
        explicit_matrix_system(ms, labels).unwrap().family
    }

    fn chain() -> TransitionFamily {
        family(&[vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![0.0, 0.0, 1.0]]])
    }

    #[test]
    fn chain_layers() {
        let r = grow_tree(&chain());
        assert_eq!(r.status, Stabilizability::Stabilizable);
        assert_eq!(r.layers, vec![vec![2], vec![1], vec![0]]);
        assert_eq!(r.assignment, vec![Some(0), Some(0), None]);
        assert_eq!(r.l_max(), 2);
        assert!(r.unstabilizable.is_empty());
    }

    #[test]
    fn isolated_cell_is_unstabilizable() {
        let f = family(&[
            vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0], vec![0.0, 0.0, 1.0]],
            vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.5, 0.5], vec![0.0, 0.0, 1.0]],
        ]);
        let r = grow_tree(&f);
        assert_eq!(r.status, Stabilizability::PartiallyStabilizable);
        assert_eq!(r.unstabilizable, vec![0]);
        assert!(matches!(transience_certificate(&f, &r, 5), Err(Error::Precondition(_))));
    }

    #[test]
    fn smallest_action_wins() {
        let f = family(&[vec![vec![0.5, 0.5], vec![0.0, 1.0]], vec![vec![0.0, 1.0], vec![0.0, 1.0]]]);
        let r = grow_tree(&f);
        assert_eq!(r.assignment[0], Some(0));
    }

    #[test]
    fn nilpotent_chain_certificate() {
        let f = chain();
        let r = grow_tree(&f);
        let rep = transience_certificate(&f, &r, 3).unwrap();
        assert_eq!(rep.norms, vec![0.0, 0.0, 0.0]);
        assert!(rep.strictly_decreasing);
        assert!(rep.mass_after < rep.mass_before);
        assert_eq!(rep.spectral.radius, 0.0);
        assert!(rep.is_transient());
    }

    #[test]
    fn identity_dynamics_fail_precondition() {
        let f = family(&[vec![vec![1.0, 0.0], vec![0.0, 1.0]]]);
        let r = grow_tree(&f);
        assert_eq!(r.unstabilizable, vec![0]);
        assert!(transience_certificate(&f, &r, 1).is_err());
    }

    #[test]
    fn report_is_one_based() {
        let rep = grow_tree(&chain()).report();
        assert!(rep.contains("status = stabilizable"));
        assert!(rep.contains("0: 3\n1: 2\n2: 1\n"));
        assert!(rep.contains("[assignment]\n1 1\n2 1\n"));
    }

    #[test]
    fn default_horizon_covers_two_hundred_steps() {
        assert_eq!(default_horizon(7), 29);
        assert_eq!(default_horizon(0), 200);
    }
}
