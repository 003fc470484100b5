//! Low-rank spectral correction for polynomial preconditioners.
//!
//! Given a handful of eigenvectors for the smallest operator eigenvalues, the
//! corrected preconditioner adds `V (V'AV)^{-1} V'` to the polynomial apply.
//! On those eigenvectors the preconditioned operator then acts as
//! `1 + p(lambda)`, which lifts the troublesome leftmost cluster into the
//! interior of the spectrum without any extra operator applications per
//! iteration.

use crate::dense::DenseChol;
use crate::kernels::{raw_axpy, raw_dot};
use crate::linop::LinearOperator;
use crate::polyprec::BoundPreconditioner;
use crate::{Error, Result};

pub const MAX_RANK: usize = 50;

#[derive(Debug, Clone)]
pub struct SpectralCorrection {
    /// Orthonormalized correction basis, one column per vector.
    basis: Vec<Vec<f64>>,
    /// Projected operator V'AV, row-major p x p, kept for inspection.
    projected: Vec<f64>,
    chol: DenseChol,
    dim: usize,
}

impl SpectralCorrection {
    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    pub fn projected(&self) -> &[f64] {
        &self.projected
    }

    /// Adds the correction term `V (V'AV)^{-1} V' r` onto `out`.
    ///
    /// Projection products use uncounted kernels: they are rank-p work, not
    /// global solver dots, and are reported separately by callers that care.
    fn accumulate(&self, r: &[f64], out: &mut [f64]) {
        let p = self.basis.len();
        let mut coeffs = vec![0.0; p];
        for (c, col) in coeffs.iter_mut().zip(&self.basis) {
            *c = raw_dot(col, r);
        }
        self.chol.solve_in_place(&mut coeffs);
        for (c, col) in coeffs.iter().zip(&self.basis) {
            raw_axpy(*c, col, out);
        }
    }
}

/// Builds the correction from `p` candidate vectors, spending exactly `p`
/// operator applications. Vectors are re-orthonormalized by modified
/// Gram-Schmidt first since eigensolvers deliver them at loose tolerance.
pub fn build_correction(
    a: &dyn LinearOperator,
    vectors: &[Vec<f64>],
) -> Result<SpectralCorrection> {
    let p = vectors.len();
    let n = a.dim();
    if p == 0 {
        return Err(Error::InvalidInput("correction needs at least one vector".into()));
    }
    if p > MAX_RANK {
        return Err(Error::InvalidInput(format!(
            "correction rank {p} exceeds the supported maximum {MAX_RANK}"
        )));
    }
    if vectors.iter().any(|v| v.len() != n) {
        return Err(Error::DimensionMismatch(format!(
            "correction vectors must have length {n}"
        )));
    }

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(p);
    for v in vectors {
        let mut w = v.clone();
        // Two MGS passes; the second mops up cancellation from the first.
        for _ in 0..2 {
            for q in &basis {
                let c = raw_dot(q, &w);
                raw_axpy(-c, q, &mut w);
            }
        }
        let nrm = raw_dot(&w, &w).sqrt();
        let orig = raw_dot(v, v).sqrt();
        if !(nrm > 1e-10 * orig.max(1e-300)) {
            return Err(Error::InvalidInput(
                "correction vectors are numerically linearly dependent".into(),
            ));
        }
        for wi in w.iter_mut() {
            *wi /= nrm;
        }
        basis.push(w);
    }

    let mut projected = vec![0.0; p * p];
    let mut av = vec![0.0; n];
    for (j, col) in basis.iter().enumerate() {
        a.apply(col, &mut av);
        for (i, row) in basis.iter().enumerate() {
            projected[i * p + j] = raw_dot(row, &av);
        }
    }
    // Symmetrize before factoring; the two triangles differ only by rounding.
    for i in 0..p {
        for j in 0..i {
            let s = 0.5 * (projected[i * p + j] + projected[j * p + i]);
            projected[i * p + j] = s;
            projected[j * p + i] = s;
        }
    }

    let chol = DenseChol::factor(&projected, p).map_err(|_| {
        Error::NotPositiveDefinite(
            "projected matrix V'AV is not positive definite; correction vectors are bad".into(),
        )
    })?;

    Ok(SpectralCorrection { basis, projected, chol, dim: n })
}

/// Applies the corrected preconditioner: `P0 r + V (V'AV)^{-1} V' r`.
pub fn apply_corrected(
    p0: &BoundPreconditioner<'_>,
    corr: &SpectralCorrection,
    r: &[f64],
) -> Result<Vec<f64>> {
    if r.len() != p0.dim() || corr.dim() != p0.dim() {
        return Err(Error::DimensionMismatch(format!(
            "corrected apply: preconditioner dim {}, correction dim {}, vector length {}",
            p0.dim(),
            corr.dim(),
            r.len()
        )));
    }
    let mut out = vec![0.0; r.len()];
    p0.apply(r, &mut out);
    corr.accumulate(r, &mut out);
    Ok(out)
}

/// The corrected preconditioner as an operator, ready for the PCG driver.
pub struct CorrectedPreconditioner<'a> {
    p0: BoundPreconditioner<'a>,
    corr: &'a SpectralCorrection,
}

impl<'a> CorrectedPreconditioner<'a> {
    pub fn new(p0: BoundPreconditioner<'a>, corr: &'a SpectralCorrection) -> Result<Self> {
        if corr.dim() != p0.dim() {
            return Err(Error::DimensionMismatch(format!(
                "preconditioner dim {} vs correction dim {}",
                p0.dim(),
                corr.dim()
            )));
        }
        Ok(CorrectedPreconditioner { p0, corr })
    }
}

impl LinearOperator for CorrectedPreconditioner<'_> {
    fn dim(&self) -> usize {
        self.p0.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.p0.apply(x, y);
        self.corr.accumulate(x, y);
    }
}
