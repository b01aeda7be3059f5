//! Dense LU factorization with partial pivoting.
//!
//! Used for the closed-loop Lyapunov measure and value solves and for
//! (re)inverting simplex bases. Storage is row-major.

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

#[derive(Clone, Debug)]
pub struct DenseLu {
    n: usize,
    /// Unit-lower `L` below the diagonal, `U` on and above it.
    lu: Vec<f64>,
    /// `perm[i]` is the original row stored at position `i`.
    perm: Vec<usize>,
}

impl DenseLu {
    /// Factors the row-major `n x n` matrix `a`.
    pub fn factor(n: usize, mut a: Vec<f64>) -> Result<Self> {
        if a.len() != n * n {
            return Err(Error::Dimension(format!("expected {} entries, got {}", n * n, a.len())));
        }
        let scale = a.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pivot) =
                (k..n)
                    .map(|i| (i, a[i * n + k].abs()))
                    .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot <= scale * 1e-15 {
                return Err(Error::Validation(format!("matrix is singular at column {k}")));
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let (head, tail) = a.split_at_mut((k + 1) * n);
            let pivot_row = &head[k * n..(k + 1) * n];
            let inv = 1.0 / pivot_row[k];
            for row in tail.chunks_exact_mut(n) {
                let l = row[k] * inv;
                row[k] = l;
                if l != 0.0 {
                    for (x, &u) in row[k + 1..].iter_mut().zip(&pivot_row[k + 1..]) {
                        *x -= l * u;
                    }
                }
            }
        }
        Ok(Self { n, lu: a, perm })
    }

    /// Factors a square sparse matrix after densifying it.
    pub fn from_csr(m: &CsrMatrix) -> Result<Self> {
        if m.rows() != m.cols() {
            return Err(Error::Dimension(format!("{}x{} matrix is not square", m.rows(), m.cols())));
        }
        let n = m.rows();
        let mut a = vec![0.0; n * n];
        for (i, j, v) in m.triplets() {
            a[i * n + j] += v;
        }
        Self::factor(n, a)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = &self.lu[i * n..i * n + i];
            let s: f64 = row.iter().zip(&x[..i]).map(|(l, y)| l * y).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = &self.lu[i * n..(i + 1) * n];
            let s: f64 = row[i + 1..].iter().zip(&x[i + 1..]).map(|(u, y)| u * y).sum();
            x[i] = (x[i] - s) / row[i];
        }
        x
    }

    /// Solves `A' x = b`.
    pub fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut z = b.to_vec();
        // U' z = b, column-oriented sweep over rows of U.
        for i in 0..n {
            z[i] /= self.lu[i * n + i];
            let zi = z[i];
            if zi != 0.0 {
                for (zj, &u) in z[i + 1..].iter_mut().zip(&self.lu[i * n + i + 1..(i + 1) * n]) {
                    *zj -= u * zi;
                }
            }
        }
        // L' w = z
        for i in (0..n).rev() {
            let wi = z[i];
            if wi != 0.0 {
                for (zj, &l) in z[..i].iter_mut().zip(&self.lu[i * n..i * n + i]) {
                    *zj -= l * wi;
                }
            }
        }
        let mut x = vec![0.0; n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = z[i];
        }
        x
    }

    /// The explicit inverse in column-major order.
    pub fn inverse_col_major(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = self.solve(&e);
            out[j * n..(j + 1) * n].copy_from_slice(&col);
            e[j] = 0.0;
        }
        out
    }
}

/// Solves `(I - s A) x = b` for square sparse `A` with one step of iterative
/// refinement. With `transpose` the system is `(I - s A') x = b`.
pub fn solve_shifted(a: &CsrMatrix, s: f64, b: &[f64], transpose: bool) -> Result<Vec<f64>> {
    let n = a.rows();
    let mut dense = vec![0.0; n * n];
    for i in 0..n {
        dense[i * n + i] = 1.0;
    }
    for (i, j, v) in a.triplets() {
        if transpose {
            dense[j * n + i] -= s * v;
        } else {
            dense[i * n + j] -= s * v;
        }
    }
    let lu = DenseLu::factor(n, dense)?;
    let apply = |x: &[f64]| -> Vec<f64> {
        let ax = if transpose { a.tmul_vec(x) } else { a.mul_vec(x) };
        x.iter().zip(ax).map(|(xi, yi)| xi - s * yi).collect()
    };
    let mut x = lu.solve(b);
    for _ in 0..2 {
        let r: Vec<f64> = b.iter().zip(apply(&x)).map(|(bi, yi)| bi - yi).collect();
        let dx = lu.solve(&r);
        for (xi, d) in x.iter_mut().zip(dx) {
            *xi += d;
        }
    }
    Ok(x)
}
