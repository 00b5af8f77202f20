//! Compressed Sparse Row matrices and the dense SpMV oracle.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CsrError {
    #[error("row offsets must be non-decreasing (row {0})")]
    OffsetsNotMonotone(usize),
    #[error("row offsets length {got}, expected {want}")]
    OffsetsLength { got: usize, want: usize },
    #[error("column index {col} out of bounds for {n_cols} columns")]
    ColumnOutOfBounds { col: usize, n_cols: usize },
    #[error("col_idx length {got} does not match final offset {want}")]
    NnzMismatch { got: usize, want: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    /// Length `n_rows + 1`, non-decreasing, final entry = nnz.
    pub offsets: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn new(
        n_rows: usize,
        n_cols: usize,
        offsets: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self, CsrError> {
        let m = CsrMatrix {
            n_rows,
            n_cols,
            offsets,
            col_idx,
            values,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), CsrError> {
        if self.offsets.len() != self.n_rows + 1 {
            return Err(CsrError::OffsetsLength {
                got: self.offsets.len(),
                want: self.n_rows + 1,
            });
        }
        for r in 0..self.n_rows {
            if self.offsets[r] > self.offsets[r + 1] {
                return Err(CsrError::OffsetsNotMonotone(r));
            }
        }
        let nnz = *self.offsets.last().unwrap();
        if self.col_idx.len() != nnz || self.values.len() != nnz {
            return Err(CsrError::NnzMismatch {
                got: self.col_idx.len(),
                want: nnz,
            });
        }
        for &c in &self.col_idx {
            if c >= self.n_cols {
                return Err(CsrError::ColumnOutOfBounds {
                    col: c,
                    n_cols: self.n_cols,
                });
            }
        }
        Ok(())
    }

    pub fn nnz(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn identity(n: usize) -> CsrMatrix {
        CsrMatrix {
            n_rows: n,
            n_cols: n,
            offsets: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Builds a CSR from (row, col, value) triples; duplicates are summed.
    pub fn from_triples(
        n_rows: usize,
        n_cols: usize,
        mut triples: Vec<(usize, usize, f64)>,
    ) -> Result<CsrMatrix, CsrError> {
        triples.sort_by_key(|&(r, c, _)| (r, c));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(triples.len());
        for (r, c, v) in triples {
            match merged.last_mut() {
                Some((lr, lc, lv)) if *lr == r && *lc == c => *lv += v,
                _ => merged.push((r, c, v)),
            }
        }
        let mut offsets = vec![0usize; n_rows + 1];
        for &(r, _, _) in &merged {
            offsets[r + 1] += 1;
        }
        for r in 0..n_rows {
            offsets[r + 1] += offsets[r];
        }
        let col_idx = merged.iter().map(|&(_, c, _)| c).collect();
        let values = merged.iter().map(|&(_, _, v)| v).collect();
        CsrMatrix::new(n_rows, n_cols, offsets, col_idx, values)
    }

    /// Dense oracle: y = M * x, accumulating in CSR entry order so results
    /// match the interpreter bit for bit.
    pub fn spmv(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_rows];
        for r in 0..self.n_rows {
            let mut acc = 0.0;
            for k in self.offsets[r]..self.offsets[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            y[r] = acc;
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_spmv_is_identity() {
        let m = CsrMatrix::identity(4);
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(m.spmv(&x), x.to_vec());
    }

    #[test]
    fn dense_2x2() {
        let m = CsrMatrix::new(2, 2, vec![0, 2, 4], vec![0, 1, 0, 1], vec![1.0, 2.0, 3.0, 4.0])
            .unwrap();
        assert_eq!(m.spmv(&[1.0, 1.0]), vec![3.0, 7.0]);
    }

    #[test]
    fn bad_offsets_rejected() {
        let err = CsrMatrix::new(2, 2, vec![0, 3, 2], vec![0, 1], vec![1.0, 1.0]).unwrap_err();
        assert_eq!(err, CsrError::OffsetsNotMonotone(1));
    }

    #[test]
    fn from_triples_sums_duplicates() {
        let m = CsrMatrix::from_triples(2, 2, vec![(0, 0, 1.0), (0, 0, 2.0), (1, 1, 5.0)]).unwrap();
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.values, vec![3.0, 5.0]);
    }
}
