//! Spectral radius estimation for nonnegative matrices.

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use crate::sparse::{CsrBuilder, CsrMatrix};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerIterationOptions {
    pub max_iters: usize,
    /// Convergence threshold on successive estimates.
    pub tol: f64,
}

impl Default for PowerIterationOptions {
    fn default() -> Self {
        Self { max_iters: 10_000, tol: 1e-10 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralEstimate {
    pub radius: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `true` when the nonzero pattern has no cycle, so the matrix is
    /// nilpotent and the radius is exactly 0.
    pub nilpotent: bool,
}

/// Estimates the Perron root of a square nonnegative matrix.
///
/// The radius of a reducible matrix is the largest radius among its strongly
/// connected blocks, so the graph of `A` is split first. A block that is a
/// single cell contributes its diagonal entry exactly, and a graph without
/// cycles marks `A` as nilpotent. Each remaining block is irreducible, so its
/// Perron root is simple. Power iteration runs on `block + I`, where `rho + 1`
/// is the unique eigenvalue of maximal modulus even for periodic blocks. The
/// estimate is `1'Bx` for the 1-normalized nonnegative iterate.
pub fn spectral_radius(a: &CsrMatrix, opts: PowerIterationOptions) -> SpectralEstimate {
    let n = a.rows();
    assert_eq!(n, a.cols(), "spectral_radius needs a square matrix");
    let mut out = SpectralEstimate { radius: 0.0, iterations: 0, converged: true, nilpotent: true };
    for block in strong_components(a) {
        if let [i] = block[..] {
            let d = a.get(i, i);
            if d != 0.0 {
                out.nilpotent = false;
                out.radius = out.radius.max(d);
            }
            continue;
        }
        out.nilpotent = false;
        let sub = principal_block(a, &block);
        let est = shifted_power(&sub, opts);
        out.iterations += est.iterations;
        out.converged &= est.converged;
        out.radius = out.radius.max(est.radius);
    }
    out
}

fn shifted_power(a: &CsrMatrix, opts: PowerIterationOptions) -> SpectralEstimate {
    let n = a.rows();
    let mut x = vec![1.0 / n as f64; n];
    let mut prev = f64::NAN;
    for k in 0..opts.max_iters {
        let ax = a.mul_vec(&x);
        let estimate: f64 = ax.iter().sum();
        if (estimate - prev).abs() <= opts.tol * estimate.abs().max(1.0) {
            return SpectralEstimate { radius: estimate, iterations: k + 1, converged: true, nilpotent: false };
        }
        prev = estimate;
        let total = estimate + 1.0;
        for (xi, axi) in x.iter_mut().zip(ax) {
            *xi = (*xi + axi) / total;
        }
    }
    SpectralEstimate { radius: prev, iterations: opts.max_iters, converged: false, nilpotent: false }
}

fn principal_block(a: &CsrMatrix, cells: &[usize]) -> CsrMatrix {
    let mut local = vec![usize::MAX; a.rows()];
    for (k, &i) in cells.iter().enumerate() {
        local[i] = k;
    }
    let mut b = CsrBuilder::new(cells.len());
    for &i in cells {
        b.push_row(a.row(i).filter(|&(j, v)| local[j] != usize::MAX && v != 0.0).map(|(j, v)| (local[j], v)));
    }
    b.finish()
}

/// Strongly connected components of the nonzero pattern, each sorted.
fn strong_components(a: &CsrMatrix) -> Vec<Vec<usize>> {
    let edges = a.triplets().filter(|&(_, _, v)| v != 0.0).map(|(i, j, _)| (i as u32, j as u32));
    let mut g = DiGraph::<(), ()>::from_edges(edges);
    while g.node_count() < a.rows() {
        g.add_node(());
    }
    tarjan_scc(&g)
        .into_iter()
        .map(|c| {
            let mut block: Vec<usize> = c.into_iter().map(|n| n.index()).collect();
            block.sort_unstable();
            block
        })
        .collect()
}

/// `max_i (A^n 1)_i` for n = `step`, `2 step`, ..., `count * step`; for a
/// nonnegative matrix this is the induced infinity norm of each power.
pub fn power_inf_norms(a: &CsrMatrix, step: usize, count: usize) -> Vec<f64> {
    let mut w = vec![1.0; a.rows()];
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        for _ in 0..step {
            w = a.mul_vec(&w);
        }
        out.push(w.iter().fold(0.0_f64, |m, &v| m.max(v)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nilpotent_chain_is_exactly_zero() {
        let a = CsrMatrix::from_dense(&[vec![0.0, 1.0], vec![0.0, 0.0]]);
        let est = spectral_radius(&a, PowerIterationOptions::default());
        assert!(est.nilpotent);
        assert_eq!(est.radius, 0.0);
    }

    #[test]
    fn periodic_matrix_converges() {
        // cyclic permutation scaled by 0.9: eigenvalues 0.9 * roots of unity
        let a = CsrMatrix::from_dense(&[vec![0.0, 0.9, 0.0], vec![0.0, 0.0, 0.9], vec![0.9, 0.0, 0.0]]);
        let est = spectral_radius(&a, PowerIterationOptions::default());
        assert!(est.converged);
        assert!((est.radius - 0.9).abs() < 1e-9);
    }

    #[test]
    fn reducible_takes_dominant_block() {
        let a = CsrMatrix::from_dense(&[vec![0.5, 0.2, 0.0], vec![0.0, 0.7, 0.1], vec![0.0, 0.0, 0.3]]);
        let est = spectral_radius(&a, PowerIterationOptions::default());
        assert!(est.converged);
        assert!((est.radius - 0.7).abs() < 1e-8, "{}", est.radius);
    }

    #[test]
    fn defective_root_converges() {
        // 0.5 twice in one Jordan chain, which stalls a plain power sweep
        let a = CsrMatrix::from_dense(&[vec![0.2, 0.0, 0.0], vec![0.0, 0.5, 0.5], vec![0.0, 0.0, 0.5]]);
        let est = spectral_radius(&a, PowerIterationOptions::default());
        assert!(est.converged);
        assert_eq!(est.radius, 0.5);
    }

    #[test]
    fn components_of_a_chain_of_cycles() {
        let a = CsrMatrix::from_dense(&[
            vec![0.0, 1.0, 1.0, 0.0],
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
            vec![0.0, 0.0, 1.0, 0.0],
        ]);
        let mut blocks = strong_components(&a);
        blocks.sort();
        assert_eq!(blocks, vec![vec![0, 1], vec![2, 3]]);
    }

    #[test]
    fn norms_of_powers() {
        let a = CsrMatrix::from_dense(&[vec![0.5, 0.0], vec![0.0, 0.25]]);
        let norms = power_inf_norms(&a, 2, 2);
        assert_eq!(norms, vec![0.25, 0.0625]);
    }
}
