//! Linear operators as apply-only routines. Everything downstream
//! (polynomial application, CG, eigenvalue estimation, the Schur
//! complement) sees only `dim` and `apply`, so explicit matrices,
//! scaled wrappers and implicit operators are interchangeable.

use crate::counters::CounterSet;
use crate::error::Error;
use crate::kernels;
use crate::sparse::{BlockDiagMatrix, CsrMatrix, StripPartition};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
    fn is_symmetric(&self) -> bool {
        true
    }

    fn apply_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.apply(x, &mut y);
        y
    }
}

/// Square CSR with a precomputed strip partition.
pub struct CsrOperator {
    matrix: CsrMatrix,
    strips: StripPartition,
    symmetric: bool,
}

impl CsrOperator {
    pub fn new(matrix: CsrMatrix) -> Result<Self, Error> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "operator must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let symmetric = matrix.is_value_symmetric(1e-12);
        let strips = StripPartition::for_csr(&matrix, rayon::current_num_threads());
        Ok(Self {
            matrix,
            strips,
            symmetric,
        })
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }
}

impl LinearOperator for CsrOperator {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matrix.spmv_into(x, y, &self.strips);
    }

    fn is_symmetric(&self) -> bool {
        self.symmetric
    }
}

pub struct BlockDiagOperator {
    matrix: BlockDiagMatrix,
    symmetric: bool,
}

impl BlockDiagOperator {
    pub fn new(matrix: BlockDiagMatrix) -> Self {
        let symmetric = matrix.blocks().iter().all(|b| b.is_value_symmetric(1e-12));
        Self { matrix, symmetric }
    }

    pub fn matrix(&self) -> &BlockDiagMatrix {
        &self.matrix
    }
}

impl LinearOperator for BlockDiagOperator {
    fn dim(&self) -> usize {
        self.matrix.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matrix.spmv_into(x, y);
    }

    fn is_symmetric(&self) -> bool {
        self.symmetric
    }
}

pub struct DiagOperator {
    d: Vec<f64>,
}

impl DiagOperator {
    pub fn new(d: Vec<f64>) -> Self {
        Self { d }
    }

    /// The 1..n diagonal used throughout the de-clustering experiments.
    pub fn ramp(n: usize) -> Self {
        Self::new((1..=n).map(|i| i as f64).collect())
    }

    pub fn diag(&self) -> &[f64] {
        &self.d
    }
}

impl LinearOperator for DiagOperator {
    fn dim(&self) -> usize {
        self.d.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.d.len());
        for ((yi, xi), di) in y.iter_mut().zip(x).zip(&self.d) {
            *yi = di * xi;
        }
    }
}

/// W A W with W = diag(1/sqrt(d)): the symmetrically scaled system of a
/// factored (diagonal) seed preconditioner.
pub struct ScaledOperator<'a> {
    inner: &'a dyn LinearOperator,
    w: Vec<f64>,
}

impl<'a> ScaledOperator<'a> {
    pub fn new(inner: &'a dyn LinearOperator, d: &[f64]) -> Result<Self, Error> {
        if d.len() != inner.dim() {
            return Err(Error::DimensionMismatch(format!(
                "scale length {} vs operator dim {}",
                d.len(),
                inner.dim()
            )));
        }
        if let Some(bad) = d.iter().find(|v| **v <= 0.0 || !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "scaling entries must be positive and finite, got {bad}"
            )));
        }
        let w = d.iter().map(|v| 1.0 / v.sqrt()).collect();
        Ok(Self { inner, w })
    }

    pub fn scale(&self) -> &[f64] {
        &self.w
    }

    /// Map a solution of the scaled system back: x = W x̂.
    pub fn unscale_solution(&self, xhat: &[f64]) -> Vec<f64> {
        xhat.iter().zip(&self.w).map(|(x, w)| x * w).collect()
    }

    /// Map a right-hand side into the scaled system: b̂ = W b.
    pub fn scale_rhs(&self, b: &[f64]) -> Vec<f64> {
        b.iter().zip(&self.w).map(|(x, w)| x * w).collect()
    }
}

pub fn make_scaled_operator<'a>(
    inner: &'a dyn LinearOperator,
    d: &[f64],
) -> Result<ScaledOperator<'a>, Error> {
    ScaledOperator::new(inner, d)
}

impl LinearOperator for ScaledOperator<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let wx: Vec<f64> = x.iter().zip(&self.w).map(|(a, b)| a * b).collect();
        self.inner.apply(&wx, y);
        for (yi, wi) in y.iter_mut().zip(&self.w) {
            *yi *= wi;
        }
    }

    fn is_symmetric(&self) -> bool {
        self.inner.is_symmetric()
    }
}

/// Counting wrapper: each apply is one system-operator application.
/// Counters live with the solve, not the operator, so concurrent solves
/// over one operator stay independent.
pub struct Counted<'a> {
    pub op: &'a dyn LinearOperator,
    pub counters: &'a CounterSet,
}

impl<'a> Counted<'a> {
    pub fn new(op: &'a dyn LinearOperator, counters: &'a CounterSet) -> Self {
        Counted { op, counters }
    }
}

impl LinearOperator for Counted<'_> {
    fn dim(&self) -> usize {
        self.op.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.counters.inc_mvp(1);
        self.op.apply(x, y);
    }

    fn is_symmetric(&self) -> bool {
        self.op.is_symmetric()
    }
}

/// Max over random unit pairs of |<Ax,y> - <x,Ay>|. Probes are seeded,
/// so repeated calls agree.
pub fn probe_symmetry(a: &dyn LinearOperator, trials: usize) -> f64 {
    let n = a.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e_ed);
    let mut worst = 0.0f64;
    for _ in 0..trials.max(1) {
        let mut x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        let mut y: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        let nx = kernels::raw_norm2(&x);
        let ny = kernels::raw_norm2(&y);
        if nx == 0.0 || ny == 0.0 {
            continue;
        }
        x.iter_mut().for_each(|v| *v /= nx);
        y.iter_mut().for_each(|v| *v /= ny);
        let ax = a.apply_vec(&x);
        let ay = a.apply_vec(&y);
        let d = (kernels::raw_dot(&ax, &y) - kernels::raw_dot(&x, &ay)).abs();
        worst = worst.max(d);
    }
    worst
}
