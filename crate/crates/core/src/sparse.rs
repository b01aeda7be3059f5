//! Compressed sparse row storage for transition matrices.

use crate::error::{Error, Result};

/// A sparse matrix in compressed-row form. Column indices within a row are
/// strictly increasing.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, indptr: vec![0; rows + 1], indices: Vec::new(), values: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self { rows: n, cols: n, indptr: (0..=n).collect(), indices: (0..n).collect(), values: vec![1.0; n] }
    }

    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are summed
    /// and explicit zeros are dropped.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        for &(i, j, _) in &sorted {
            if i >= rows || j >= cols {
                return Err(Error::Dimension(format!("entry ({i}, {j}) outside {rows}x{cols} matrix")));
            }
        }
        sorted.sort_by_key(|a| (a.0, a.1));
        let mut builder = CsrBuilder::new(cols);
        let mut current = 0;
        let mut iter = sorted.into_iter().peekable();
        while current < rows {
            let mut row: Vec<(usize, f64)> = Vec::new();
            while let Some(&(i, j, v)) = iter.peek() {
                if i != current {
                    break;
                }
                match row.last_mut() {
                    Some(last) if last.0 == j => last.1 += v,
                    _ => row.push((j, v)),
                }
                iter.next();
            }
            builder.push_row(row.into_iter().filter(|&(_, v)| v != 0.0));
            current += 1;
        }
        Ok(builder.finish())
    }

    pub fn from_dense(dense: &[Vec<f64>]) -> Self {
        let cols = dense.first().map_or(0, Vec::len);
        let mut builder = CsrBuilder::new(cols);
        for row in dense {
            builder.push_row(row.iter().copied().enumerate().filter(|&(_, v)| v != 0.0));
        }
        builder.finish()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.cols]; self.rows];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        out
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates `(column, value)` over the stored entries of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[i]..self.indptr[i + 1];
        self.indices[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.values[self.indptr[i]..self.indptr[i + 1]].iter().sum()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let span = self.indptr[i]..self.indptr[i + 1];
        match self.indices[span.clone()].binary_search(&j) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    /// Iterates all stored entries as `(row, col, value)` in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    /// `y = A x`
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    /// `y = A' x`
    pub fn tmul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.rows);
        let mut y = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (j, v) in self.row(i) {
                y[j] += v * xi;
            }
        }
        y
    }

    /// The leading `k x k` block, copied entry for entry.
    pub fn leading_block(&self, k: usize) -> Self {
        let mut builder = CsrBuilder::new(k);
        for i in 0..k.min(self.rows) {
            builder.push_row(self.row(i).filter(|&(j, _)| j < k));
        }
        builder.finish()
    }

    /// Assembles a matrix whose row `i` is row `i` of `sources[choice[i]]`,
    /// or an empty row when `choice[i]` is `None`.
    pub fn select_rows(sources: &[CsrMatrix], choice: &[Option<usize>]) -> Result<Self> {
        let cols = sources.first().map_or(0, |m| m.cols);
        let mut builder = CsrBuilder::new(cols);
        for (i, c) in choice.iter().enumerate() {
            match c {
                Some(a) => {
                    let src =
                        sources.get(*a).ok_or_else(|| Error::Dimension(format!("action index {a} out of range")))?;
                    if i >= src.rows || src.cols != cols {
                        return Err(Error::Dimension(format!("row {i} not available in source matrix {a}")));
                    }
                    builder.push_row(src.row(i));
                }
                None => builder.push_row(std::iter::empty()),
            }
        }
        Ok(builder.finish())
    }

    /// Replaces row `i` by the given entries (column indices strictly increasing).
    pub fn replace_row(&mut self, i: usize, entries: &[(usize, f64)]) {
        let mut builder = CsrBuilder::new(self.cols);
        for r in 0..self.rows {
            if r == i {
                builder.push_row(entries.iter().copied());
            } else {
                builder.push_row(self.row(r));
            }
        }
        *self = builder.finish();
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.values {
            *v *= factor;
        }
    }
}

/// Incremental row-by-row construction of a [`CsrMatrix`].
#[derive(Debug)]
pub struct CsrBuilder {
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrBuilder {
    pub fn new(cols: usize) -> Self {
        Self { cols, indptr: vec![0], indices: Vec::new(), values: Vec::new() }
    }

    /// Appends a row; entries must arrive with strictly increasing columns.
    pub fn push_row(&mut self, entries: impl IntoIterator<Item = (usize, f64)>) {
        for (j, v) in entries {
            debug_assert!(j < self.cols);
            debug_assert!(self.indices.len() == *self.indptr.last().unwrap() || *self.indices.last().unwrap() < j);
            self.indices.push(j);
            self.values.push(v);
        }
        self.indptr.push(self.indices.len());
    }

    pub fn finish(self) -> CsrMatrix {
        CsrMatrix {
            rows: self.indptr.len() - 1,
            cols: self.cols,
            indptr: self.indptr,
            indices: self.indices,
            values: self.values,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates_and_drop_zeros() {
        let m = CsrMatrix::from_triplets(2, 3, &[(1, 2, 0.5), (0, 1, 1.0), (1, 2, 0.25), (0, 0, 0.0)]).unwrap();
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(1, 2), 0.75);
        assert_eq!(m.get(0, 0), 0.0);
    }

    #[test]
    fn products_match_dense() {
        let dense = vec![vec![0.0, 2.0, 1.0], vec![3.0, 0.0, 0.0]];
        let m = CsrMatrix::from_dense(&dense);
        assert_eq!(m.mul_vec(&[1.0, 1.0, 2.0]), vec![4.0, 3.0]);
        assert_eq!(m.tmul_vec(&[1.0, 2.0]), vec![6.0, 2.0, 1.0]);
        assert_eq!(m.to_dense(), dense);
    }

    #[test]
    fn leading_block_is_exact_copy() {
        let m = CsrMatrix::from_dense(&[vec![0.1, 0.2, 0.7], vec![0.0, 0.5, 0.5], vec![0.0, 0.0, 1.0]]);
        let sub = m.leading_block(2);
        assert_eq!(sub.to_dense(), vec![vec![0.1, 0.2], vec![0.0, 0.5]]);
    }

    #[test]
    fn select_rows_mixes_sources() {
        let a = CsrMatrix::identity(2);
        let b = CsrMatrix::from_dense(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let m = CsrMatrix::select_rows(&[a, b], &[Some(1), None]).unwrap();
        assert_eq!(m.to_dense(), vec![vec![0.0, 1.0], vec![0.0, 0.0]]);
    }

    #[test]
    fn out_of_range_triplet_rejected() {
        assert!(CsrMatrix::from_triplets(2, 2, &[(2, 0, 1.0)]).is_err());
    }
}
