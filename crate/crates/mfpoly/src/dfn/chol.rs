//! Per-block exact Cholesky of the fracture-local matrix A.
//!
//! Blocks come from 2D discretizations, so a profile (envelope) factorization
//! is enough above the dense cutoff: the factor fills only between each row's
//! first stored column and the diagonal, which the grid orderings keep
//! narrow.

use rayon::prelude::*;

use crate::dense::DenseChol;
use crate::sparse::{BlockDiagMatrix, CsrMatrix};
use crate::{Error, Result};

pub const DENSE_BLOCK_CUTOFF: usize = 64;

/// Profile Cholesky: row i of L is stored contiguously from `first[i]` to the
/// diagonal. The profile of A is preserved by the factorization.
#[derive(Debug, Clone)]
pub struct EnvelopeChol {
    n: usize,
    first: Vec<usize>,
    ptr: Vec<usize>,
    rows: Vec<f64>,
}

impl EnvelopeChol {
    pub fn factor(m: &CsrMatrix) -> Result<Self> {
        let n = m.nrows();
        assert_eq!(n, m.ncols(), "envelope factor needs a square block");
        let mut first = vec![0usize; n];
        for i in 0..n {
            let (cols, _) = m.row(i);
            first[i] = cols.iter().copied().find(|&c| c <= i).unwrap_or(i);
        }
        let mut ptr = Vec::with_capacity(n + 1);
        ptr.push(0);
        for i in 0..n {
            ptr.push(ptr[i] + (i - first[i] + 1));
        }
        let mut rows = vec![0.0; ptr[n]];
        for i in 0..n {
            let (cols, vals) = m.row(i);
            for (c, v) in cols.iter().zip(vals) {
                if *c <= i {
                    rows[ptr[i] + (c - first[i])] = *v;
                }
            }
        }

        for i in 0..n {
            for j in first[i]..=i {
                let lo = first[i].max(first[j]);
                let mut s = rows[ptr[i] + (j - first[i])];
                for k in lo..j {
                    s -= rows[ptr[i] + (k - first[i])] * rows[ptr[j] + (k - first[j])];
                }
                if j < i {
                    rows[ptr[i] + (j - first[i])] = s / rows[ptr[j] + (j - first[j])];
                } else {
                    if s <= 0.0 || !s.is_finite() {
                        return Err(Error::NotPositiveDefinite(format!(
                            "pivot {s:.3e} at row {i}"
                        )));
                    }
                    rows[ptr[i] + (j - first[i])] = s.sqrt();
                }
            }
        }
        Ok(EnvelopeChol { n, first, ptr, rows })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// In-place solve of L L' x = b (one forward and one backward sweep).
    pub fn solve_in_place(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.n, "envelope solve length");
        for i in 0..self.n {
            let base = self.ptr[i];
            let fi = self.first[i];
            let mut s = x[i];
            for j in fi..i {
                s -= self.rows[base + (j - fi)] * x[j];
            }
            x[i] = s / self.rows[base + (i - fi)];
        }
        for i in (0..self.n).rev() {
            let base = self.ptr[i];
            let fi = self.first[i];
            let xi = x[i] / self.rows[base + (i - fi)];
            x[i] = xi;
            for j in fi..i {
                x[j] -= self.rows[base + (j - fi)] * xi;
            }
        }
    }
}

#[derive(Debug, Clone)]
enum BlockFactor {
    Dense(DenseChol),
    Envelope(EnvelopeChol),
}

impl BlockFactor {
    fn solve_in_place(&self, x: &mut [f64]) {
        match self {
            BlockFactor::Dense(f) => f.solve_in_place(x),
            BlockFactor::Envelope(f) => f.solve_in_place(x),
        }
    }
}

/// Block-diagonal Cholesky of A; applying it to a vector is the exact A^{-1}.
#[derive(Debug, Clone)]
pub struct BlockCholesky {
    offsets: Vec<usize>,
    sizes: Vec<usize>,
    factors: Vec<BlockFactor>,
}

pub fn factor_blocks(a: &BlockDiagMatrix) -> Result<BlockCholesky> {
    let factors: Vec<BlockFactor> = a
        .blocks()
        .par_iter()
        .enumerate()
        .map(|(i, blk)| {
            let res = if blk.nrows() <= DENSE_BLOCK_CUTOFF {
                DenseChol::factor(&blk.to_dense(), blk.nrows()).map(BlockFactor::Dense)
            } else {
                EnvelopeChol::factor(blk).map(BlockFactor::Envelope)
            };
            res.map_err(|e| {
                Error::NotPositiveDefinite(format!("fracture block {i} is not SPD: {e}"))
            })
        })
        .collect::<Result<_>>()?;

    let sizes = a.block_sizes().to_vec();
    let mut offsets = Vec::with_capacity(sizes.len() + 1);
    offsets.push(0);
    for s in &sizes {
        offsets.push(offsets.last().unwrap() + s);
    }
    Ok(BlockCholesky { offsets, sizes, factors })
}

impl BlockCholesky {
    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn nblocks(&self) -> usize {
        self.factors.len()
    }

    /// x <- A^{-1} x, block solves in parallel.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.dim(), "block solve length");
        let mut parts: Vec<&mut [f64]> = Vec::with_capacity(self.factors.len());
        let mut rest = x;
        for s in &self.sizes {
            let (head, tail) = rest.split_at_mut(*s);
            parts.push(head);
            rest = tail;
        }
        parts
            .into_par_iter()
            .zip(self.factors.par_iter())
            .for_each(|(part, f)| f.solve_in_place(part));
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Solve restricted to one block; `x` holds just that block's rows.
    pub fn solve_block_in_place(&self, k: usize, x: &mut [f64]) {
        assert_eq!(x.len(), self.sizes[k], "block {k} solve length");
        self.factors[k].solve_in_place(x);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_laplacian(r: usize, c: usize) -> CsrMatrix {
        let n = r * c;
        let mut t = Vec::new();
        for i in 0..r {
            for j in 0..c {
                let row = i * c + j;
                t.push((row, row, 4.0));
                if i > 0 {
                    t.push((row, row - c, -1.0));
                }
                if i + 1 < r {
                    t.push((row, row + c, -1.0));
                }
                if j > 0 {
                    t.push((row, row - 1, -1.0));
                }
                if j + 1 < c {
                    t.push((row, row + 1, -1.0));
                }
            }
        }
        CsrMatrix::from_triplets(n, n, &t).unwrap()
    }

    #[test]
    fn single_entry_block() {
        let a = BlockDiagMatrix::new(vec![CsrMatrix::from_diag(&[4.0])]).unwrap();
        let f = factor_blocks(&a).unwrap();
        assert_eq!(f.solve(&[8.0]), vec![2.0]);
    }

    #[test]
    fn envelope_matches_dense_on_grid() {
        let m = grid_laplacian(9, 9);
        assert!(m.nrows() > DENSE_BLOCK_CUTOFF);
        let env = EnvelopeChol::factor(&m).unwrap();
        let dense = DenseChol::factor(&m.to_dense(), m.nrows()).unwrap();
        let b: Vec<f64> = (0..m.nrows()).map(|i| ((i * 13 % 7) as f64) - 3.0).collect();
        let mut xe = b.clone();
        env.solve_in_place(&mut xe);
        let xd = dense.solve(&b);
        for (e, d) in xe.iter().zip(&xd) {
            assert!((e - d).abs() < 1e-11, "{e} vs {d}");
        }
    }

    #[test]
    fn block_solve_applies_inverse() {
        let a = BlockDiagMatrix::new(vec![grid_laplacian(3, 3), grid_laplacian(2, 5)]).unwrap();
        let f = factor_blocks(&a).unwrap();
        let x_true: Vec<f64> = (0..a.dim()).map(|i| (i as f64 * 0.3).sin()).collect();
        let b = a.spmv(&x_true);
        let x = f.solve(&b);
        for (xi, ti) in x.iter().zip(&x_true) {
            assert!((xi - ti).abs() < 1e-12);
        }
    }

    #[test]
    fn indefinite_block_names_its_index() {
        let good = grid_laplacian(2, 2);
        let bad = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)])
            .unwrap();
        let a = BlockDiagMatrix::new(vec![good, bad]).unwrap();
        let err = factor_blocks(&a).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("block 1"), "message was: {msg}");
    }

    #[test]
    fn per_block_solve_matches_full_solve() {
        let a = BlockDiagMatrix::new(vec![grid_laplacian(2, 3), grid_laplacian(3, 3)]).unwrap();
        let f = factor_blocks(&a).unwrap();
        let b: Vec<f64> = (0..a.dim()).map(|i| 1.0 + i as f64).collect();
        let full = f.solve(&b);
        let mut head = b[..6].to_vec();
        f.solve_block_in_place(0, &mut head);
        assert_eq!(&full[..6], &head[..]);
    }
}
