use crate::error::Error;
use crate::sparse::partition::StripPartition;
use rayon::prelude::*;

/// Compressed sparse row matrix, 64-bit real entries.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Build from raw CSR arrays, validating the storage invariants:
    /// monotone offsets, strictly increasing in-row columns, finite values.
    pub fn from_parts(
        nrows: usize,
        ncols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self, Error> {
        if row_offsets.len() != nrows + 1 {
            return Err(Error::InvalidMatrix(format!(
                "row_offsets length {} != nrows+1 = {}",
                row_offsets.len(),
                nrows + 1
            )));
        }
        if row_offsets[0] != 0 || *row_offsets.last().unwrap() != values.len() {
            return Err(Error::InvalidMatrix(
                "row_offsets must start at 0 and end at nnz".into(),
            ));
        }
        if col_indices.len() != values.len() {
            return Err(Error::InvalidMatrix(
                "col_indices and values length differ".into(),
            ));
        }
        for i in 0..nrows {
            let (lo, hi) = (row_offsets[i], row_offsets[i + 1]);
            if lo > hi {
                return Err(Error::InvalidMatrix(format!("row {i} has negative extent")));
            }
            let mut prev = None;
            for k in lo..hi {
                let c = col_indices[k];
                if c >= ncols {
                    return Err(Error::InvalidMatrix(format!(
                        "row {i} column index {c} out of bounds ({ncols} cols)"
                    )));
                }
                if let Some(p) = prev {
                    if c <= p {
                        return Err(Error::InvalidMatrix(format!(
                            "row {i} columns not strictly increasing at {c}"
                        )));
                    }
                }
                prev = Some(c);
                if !values[k].is_finite() {
                    return Err(Error::InvalidMatrix(format!(
                        "non-finite value at row {i} col {c}"
                    )));
                }
            }
        }
        Ok(Self {
            nrows,
            ncols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Build from (row, col, value) triplets. Duplicates are an error.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self, Error> {
        let mut entries: Vec<(usize, usize, f64)> = triplets.to_vec();
        entries.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 && w[0].1 == w[1].1 {
                return Err(Error::InvalidMatrix(format!(
                    "duplicate entry at ({}, {})",
                    w[0].0, w[0].1
                )));
            }
        }
        let mut row_offsets = vec![0usize; nrows + 1];
        for &(r, c, _) in &entries {
            if r >= nrows || c >= ncols {
                return Err(Error::InvalidMatrix(format!(
                    "entry ({r}, {c}) outside {nrows}x{ncols}"
                )));
            }
            row_offsets[r + 1] += 1;
        }
        for i in 0..nrows {
            row_offsets[i + 1] += row_offsets[i];
        }
        let col_indices = entries.iter().map(|e| e.1).collect();
        let values = entries.iter().map(|e| e.2).collect();
        Self::from_parts(nrows, ncols, row_offsets, col_indices, values)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diag(&vec![1.0; n])
    }

    pub fn from_diag(d: &[f64]) -> Self {
        let n = d.len();
        Self {
            nrows: n,
            ncols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: d.to_vec(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.row_offsets[i], self.row_offsets[i + 1]);
        (&self.col_indices[lo..hi], &self.values[lo..hi])
    }

    /// Main diagonal, zeros where unstored.
    pub fn diag(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.nrows.min(self.ncols)];
        for i in 0..d.len() {
            let (cols, vals) = self.row(i);
            if let Ok(k) = cols.binary_search(&i) {
                d[i] = vals[k];
            }
        }
        d
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut row_offsets = vec![0usize; self.ncols + 1];
        for &c in &self.col_indices {
            row_offsets[c + 1] += 1;
        }
        for i in 0..self.ncols {
            row_offsets[i + 1] += row_offsets[i];
        }
        let mut col_indices = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        let mut cursor = row_offsets.clone();
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                let k = cursor[*c];
                col_indices[k] = r;
                values[k] = *v;
                cursor[*c] += 1;
            }
        }
        // rows of the transpose come out sorted because we sweep r upward
        CsrMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            row_offsets,
            col_indices,
            values,
        }
    }

    pub fn is_value_symmetric(&self, tol: f64) -> bool {
        if self.nrows != self.ncols {
            return false;
        }
        let t = self.transpose();
        if t.row_offsets != self.row_offsets || t.col_indices != self.col_indices {
            return false;
        }
        self.values
            .iter()
            .zip(&t.values)
            .all(|(a, b)| (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0))
    }

    fn spmv_rows(&self, rows: std::ops::Range<usize>, x: &[f64], y: &mut [f64]) {
        for (yi, i) in y.iter_mut().zip(rows) {
            let (cols, vals) = self.row(i);
            let mut s = 0.0;
            for (c, v) in cols.iter().zip(vals) {
                s += v * x[*c];
            }
            *yi = s;
        }
    }

    /// y = A x, row-parallel over strips. Each row is reduced
    /// sequentially, so the result is bitwise independent of the strip
    /// count and thread count.
    pub fn spmv_into(&self, x: &[f64], y: &mut [f64], strips: &StripPartition) {
        assert_eq!(x.len(), self.ncols, "spmv input length");
        assert_eq!(y.len(), self.nrows, "spmv output length");
        let parts = strips.split_mut(y);
        parts
            .into_par_iter()
            .zip(strips.ranges().par_iter())
            .for_each(|(part, range)| {
                self.spmv_rows(range.clone(), x, part);
            });
    }

    pub fn spmv(&self, x: &[f64]) -> Vec<f64> {
        let strips = StripPartition::for_csr(self, rayon::current_num_threads());
        let mut y = vec![0.0; self.nrows];
        self.spmv_into(x, &mut y, &strips);
        y
    }

    /// y = A^T x without materializing the transpose. Sequential scatter;
    /// deterministic, and cheap relative to the solves around it.
    pub fn spmv_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows, "spmv_transpose input length");
        let mut y = vec![0.0; self.ncols];
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            let xr = x[r];
            if xr == 0.0 {
                continue;
            }
            for (c, v) in cols.iter().zip(vals) {
                y[*c] += v * xr;
            }
        }
        y
    }

    /// Dense row-major copy, for small-system factorization and tests.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.nrows * self.ncols];
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                d[r * self.ncols + c] = *v;
            }
        }
        d
    }
}
