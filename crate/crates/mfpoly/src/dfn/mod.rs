//! Three-by-three block systems from discrete fracture network flow and
//! their matrix-free Schur-complement machinery.
//!
//! The permuted system groups the fracture-local unknowns (head h, multiplier
//! p) in front of the trace fluxes u:
//!
//! ```text
//! [ A    0    -C  ] [h]   [q]
//! [ G^h  A  -a B  ] [p] = [0]
//! [-a B' -C'  G^u ] [u]   [0]
//! ```
//!
//! Eliminating the leading 2x2 block, whose inverse only needs A^{-1}, leaves
//! the trace-flux Schur complement
//! `S_u = G^u - a B'A^{-1}C - a C'A^{-1}B + C'A^{-1}G^h A^{-1}C`,
//! symmetric and positive definite for admissible coupling weights. S_u is
//! never assembled: each application costs six triangular solves with the
//! per-block Cholesky factors of A plus seven sparse products.

mod chol;
mod io;
mod schur;
mod synth;

pub use chol::{factor_blocks, BlockCholesky, EnvelopeChol, DENSE_BLOCK_CUTOFF};
pub use io::{load_system, save_system};
pub use schur::{recover_hp, schur_diag, SchurOperator};
pub use synth::generate_synthetic;

use crate::sparse::{BlockDiagMatrix, CsrMatrix};
use crate::{Error, Result};

/// The block system (A, G^h, G^u, B, C, alpha, q).
///
/// A and G^h share the fracture partition of the n^h head unknowns; C couples
/// each fracture's heads only to its own traces (its column partition is the
/// fracture partition of the n^u trace unknowns), while B = C + E adds
/// cross-fracture entries that vanish on C's own nonzero positions.
#[derive(Debug, Clone)]
pub struct DfnBlockSystem {
    a: BlockDiagMatrix,
    gh: BlockDiagMatrix,
    gu: CsrMatrix,
    b: CsrMatrix,
    c: CsrMatrix,
    c_col_blocks: Vec<usize>,
    c_col_offsets: Vec<usize>,
    alpha: f64,
    q: Vec<f64>,
}

const SYM_TOL: f64 = 1e-10;

impl DfnBlockSystem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a: BlockDiagMatrix,
        gh: BlockDiagMatrix,
        gu: CsrMatrix,
        b: CsrMatrix,
        c: CsrMatrix,
        c_col_blocks: Vec<usize>,
        alpha: f64,
        q: Vec<f64>,
    ) -> Result<Self> {
        let nh = a.dim();
        let nu = gu.nrows();
        if gh.dim() != nh {
            return Err(Error::DimensionMismatch(format!(
                "G^h is {}x{} but A is {nh}x{nh}",
                gh.dim(),
                gh.dim()
            )));
        }
        if gh.block_sizes() != a.block_sizes() {
            return Err(Error::InvalidMatrix(
                "A and G^h must share the fracture block partition".into(),
            ));
        }
        if gu.ncols() != nu {
            return Err(Error::DimensionMismatch("G^u must be square".into()));
        }
        for (name, m) in [("B", &b), ("C", &c)] {
            if m.nrows() != nh || m.ncols() != nu {
                return Err(Error::DimensionMismatch(format!(
                    "{name} is {}x{}, expected {nh}x{nu}",
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        if q.len() != nh {
            return Err(Error::DimensionMismatch(format!(
                "right-hand side has length {}, expected {nh}",
                q.len()
            )));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InadmissibleAlpha {
                alpha,
                msg: "coupling weight must be positive and finite".into(),
            });
        }
        if c_col_blocks.len() != a.nblocks() {
            return Err(Error::InvalidMatrix(format!(
                "C has {} column blocks but A has {} fracture blocks",
                c_col_blocks.len(),
                a.nblocks()
            )));
        }
        let col_total: usize = c_col_blocks.iter().sum();
        if col_total != nu {
            return Err(Error::DimensionMismatch(format!(
                "C column blocks sum to {col_total}, expected {nu}"
            )));
        }
        let mut c_col_offsets = Vec::with_capacity(c_col_blocks.len() + 1);
        let mut acc = 0;
        c_col_offsets.push(0);
        for s in &c_col_blocks {
            acc += s;
            c_col_offsets.push(acc);
        }

        if !gu.is_value_symmetric(SYM_TOL) {
            return Err(Error::InvalidMatrix("G^u is not symmetric".into()));
        }
        for (name, m) in [("A", &a), ("G^h", &gh)] {
            for (i, blk) in m.blocks().iter().enumerate() {
                if !blk.is_value_symmetric(SYM_TOL) {
                    return Err(Error::InvalidMatrix(format!(
                        "{name} block {i} is not symmetric"
                    )));
                }
            }
        }

        // Fracture locality of C: entry (r, j) must pair a row and a column
        // of the same fracture block.
        let mut row_block = vec![0usize; nh];
        for k in 0..a.nblocks() {
            let off = a.block_offset(k);
            for r in off..off + a.block_sizes()[k] {
                row_block[r] = k;
            }
        }
        for r in 0..nh {
            let (cols, _) = c.row(r);
            let k = row_block[r];
            for &j in cols {
                if j < c_col_offsets[k] || j >= c_col_offsets[k + 1] {
                    return Err(Error::InvalidMatrix(format!(
                        "C entry ({r}, {j}) crosses fracture blocks"
                    )));
                }
            }
        }

        // E = B - C must vanish on C's nonzeros: B carries C's value exactly
        // wherever C is structurally nonzero.
        for r in 0..nh {
            let (ccols, cvals) = c.row(r);
            let (bcols, bvals) = b.row(r);
            for (j, cv) in ccols.iter().zip(cvals) {
                match bcols.binary_search(j) {
                    Ok(pos) if bvals[pos] == *cv => {}
                    Ok(pos) => {
                        return Err(Error::InvalidMatrix(format!(
                            "B({r}, {j}) = {} differs from C({r}, {j}) = {cv}; \
                             E must vanish on C's support",
                            bvals[pos]
                        )))
                    }
                    Err(_) => {
                        return Err(Error::InvalidMatrix(format!(
                            "C({r}, {j}) is nonzero but B({r}, {j}) is structurally zero"
                        )))
                    }
                }
            }
        }

        Ok(DfnBlockSystem { a, gh, gu, b, c, c_col_blocks, c_col_offsets, alpha, q })
    }

    pub fn nh(&self) -> usize {
        self.a.dim()
    }

    pub fn nu(&self) -> usize {
        self.gu.nrows()
    }

    pub fn nblocks(&self) -> usize {
        self.a.nblocks()
    }

    pub fn a(&self) -> &BlockDiagMatrix {
        &self.a
    }

    pub fn gh(&self) -> &BlockDiagMatrix {
        &self.gh
    }

    pub fn gu(&self) -> &CsrMatrix {
        &self.gu
    }

    pub fn b(&self) -> &CsrMatrix {
        &self.b
    }

    pub fn c(&self) -> &CsrMatrix {
        &self.c
    }

    pub fn c_col_blocks(&self) -> &[usize] {
        &self.c_col_blocks
    }

    pub fn c_col_offset(&self, k: usize) -> usize {
        self.c_col_offsets[k]
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    /// Residuals of the three permuted block rows for a candidate solution,
    /// each relative to the right-hand side norm (rows two and three have
    /// zero right-hand sides, so those are scaled by ||q|| as well).
    pub fn block_residuals(&self, h: &[f64], p: &[f64], u: &[f64]) -> [f64; 3] {
        let qn = crate::kernels::raw_norm2(&self.q).max(f64::MIN_POSITIVE);
        let ah = self.a.spmv(h);
        let cu = self.c.spmv(u);
        let mut r1 = 0.0;
        for i in 0..self.nh() {
            let v = ah[i] - cu[i] - self.q[i];
            r1 += v * v;
        }
        let ghh = self.gh.spmv(h);
        let ap = self.a.spmv(p);
        let bu = self.b.spmv(u);
        let mut r2 = 0.0;
        for i in 0..self.nh() {
            let v = ghh[i] + ap[i] - self.alpha * bu[i];
            r2 += v * v;
        }
        let bth = self.b.spmv_transpose(h);
        let ctp = self.c.spmv_transpose(p);
        let guu = self.gu.spmv(u);
        let mut r3 = 0.0;
        for j in 0..self.nu() {
            let v = -self.alpha * bth[j] - ctp[j] + guu[j];
            r3 += v * v;
        }
        [r1.sqrt() / qn, r2.sqrt() / qn, r3.sqrt() / qn]
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;

    /// Hand-sized one-fracture system: A=[2], Gh=[0], Gu=[3], B=C=[1].
    pub fn unit_system(alpha: f64, q: f64) -> DfnBlockSystem {
        let a = BlockDiagMatrix::new(vec![CsrMatrix::from_diag(&[2.0])]).unwrap();
        let gh =
            BlockDiagMatrix::new(vec![CsrMatrix::from_triplets(1, 1, &[(0, 0, 0.0)]).unwrap()])
                .unwrap();
        let gu = CsrMatrix::from_diag(&[3.0]);
        let b = CsrMatrix::from_triplets(1, 1, &[(0, 0, 1.0)]).unwrap();
        let c = b.clone();
        DfnBlockSystem::new(a, gh, gu, b, c, vec![1], alpha, vec![q]).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_system_validates() {
        let s = testutil::unit_system(1.0, 1.0);
        assert_eq!(s.nh(), 1);
        assert_eq!(s.nu(), 1);
    }

    #[test]
    fn rejects_cross_block_c_entry() {
        let a = BlockDiagMatrix::new(vec![
            CsrMatrix::from_diag(&[2.0]),
            CsrMatrix::from_diag(&[2.0]),
        ])
        .unwrap();
        let gh = BlockDiagMatrix::new(vec![
            CsrMatrix::from_triplets(1, 1, &[(0, 0, 0.0)]).unwrap(),
            CsrMatrix::from_triplets(1, 1, &[(0, 0, 0.0)]).unwrap(),
        ])
        .unwrap();
        let gu = CsrMatrix::from_diag(&[3.0, 3.0]);
        // C(0, 1) lives in block 0's row but block 1's column.
        let c = CsrMatrix::from_triplets(2, 2, &[(0, 1, 1.0)]).unwrap();
        let b = c.clone();
        let err = DfnBlockSystem::new(a, gh, gu, b, c, vec![1, 1], 1.0, vec![0.0, 0.0])
            .unwrap_err();
        assert!(matches!(err, Error::InvalidMatrix(_)));
    }

    #[test]
    fn rejects_b_missing_c_support() {
        let a = BlockDiagMatrix::new(vec![CsrMatrix::from_diag(&[2.0])]).unwrap();
        let gh =
            BlockDiagMatrix::new(vec![CsrMatrix::from_triplets(1, 1, &[(0, 0, 0.0)]).unwrap()])
                .unwrap();
        let gu = CsrMatrix::from_diag(&[3.0]);
        let c = CsrMatrix::from_triplets(1, 1, &[(0, 0, 1.0)]).unwrap();
        let b = CsrMatrix::from_triplets(1, 1, &[(0, 0, 2.0)]).unwrap();
        let err =
            DfnBlockSystem::new(a, gh, gu, b, c, vec![1], 1.0, vec![0.0]).unwrap_err();
        assert!(matches!(err, Error::InvalidMatrix(_)));
    }

    #[test]
    fn rejects_nonpositive_alpha() {
        let a = BlockDiagMatrix::new(vec![CsrMatrix::from_diag(&[2.0])]).unwrap();
        let gh =
            BlockDiagMatrix::new(vec![CsrMatrix::from_triplets(1, 1, &[(0, 0, 0.0)]).unwrap()])
                .unwrap();
        let gu = CsrMatrix::from_diag(&[3.0]);
        let b = CsrMatrix::from_triplets(1, 1, &[(0, 0, 1.0)]).unwrap();
        let c = b.clone();
        let err = DfnBlockSystem::new(a, gh, gu, b, c, vec![1], 0.0, vec![0.0]).unwrap_err();
        assert!(matches!(err, Error::InadmissibleAlpha { .. }));
    }
}
