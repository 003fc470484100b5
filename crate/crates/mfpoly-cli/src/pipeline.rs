use std::path::PathBuf;
use std::time::Instant;

use mfpoly::counters::CounterSet;
use mfpoly::dfn::{load_system, SchurOperator};
use mfpoly::eigest::{estimate_extremes, leftmost_eigenpairs};
use mfpoly::linop::{Counted, CsrOperator, DiagOperator};
use mfpoly::lowrank::{build_correction, CorrectedPreconditioner};
use mfpoly::pcg::{pcg_solve_counted, SolveConfig, SolveReport};
use mfpoly::sparse::read_matrix_market;
use mfpoly::{Error, LinearOperator, Result};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::config::{PrecArgs, SourceArgs};

pub enum SourceKind {
    Diag(usize),
    Matrix(PathBuf),
    Dfn(PathBuf),
}

impl SourceArgs {
    pub fn kind(&self) -> Result<SourceKind> {
        if let Some(n) = self.diag_test {
            Ok(SourceKind::Diag(n))
        } else if let Some(p) = &self.matrix {
            Ok(SourceKind::Matrix(p.clone()))
        } else if let Some(d) = &self.dfn {
            Ok(SourceKind::Dfn(d.clone()))
        } else {
            Err(Error::InvalidInput(
                "pass one of --diag-test, --matrix, --dfn".into(),
            ))
        }
    }
}

/// Runs `f` with the operator described by `kind`. Block systems are
/// reduced to their diagonally scaled Schur complement and pass the
/// reduced forcing term along; other sources pass None and the caller
/// draws its own right-hand side.
pub fn with_operator<T>(
    kind: &SourceKind,
    f: impl FnOnce(&dyn LinearOperator, Option<Vec<f64>>) -> Result<T>,
) -> Result<T> {
    match kind {
        SourceKind::Diag(n) => {
            let op = DiagOperator::ramp(*n);
            f(&op, None)
        }
        SourceKind::Matrix(path) => {
            let op = CsrOperator::new(read_matrix_market(path)?)?;
            if !op.is_symmetric() {
                return Err(Error::InvalidInput(format!(
                    "{} is not symmetric; the solver requires an SPD matrix",
                    path.display()
                )));
            }
            f(&op, None)
        }
        SourceKind::Dfn(dir) => {
            let sys = load_system(dir)?;
            let op = SchurOperator::new(&sys)?.with_jacobi_scaling()?;
            let b = op.rhs();
            f(&op, Some(b))
        }
    }
}

pub fn gaussian_rhs(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

pub struct PipelineResult {
    pub x: Vec<f64>,
    pub report: SolveReport,
    pub alpha: f64,
    pub beta: f64,
    pub degree: usize,
    pub variant: &'static str,
    pub eig_seconds: f64,
}

/// The standard solve chain: estimate the spectral interval, build the
/// polynomial, optionally attach the low-rank correction, then run
/// preconditioned CG with shared operator counters.
pub fn run_pipeline(
    op: &dyn LinearOperator,
    b: &[f64],
    prec_args: &PrecArgs,
    lowrank: usize,
    tol_eig: f64,
    cfg: &SolveConfig,
) -> Result<PipelineResult> {
    let t0 = Instant::now();
    let est = estimate_extremes(op, tol_eig)?;
    let bounds = mfpoly::SpectralBounds::new(est.alpha, est.beta, prec_args.xi)?;
    let prec = prec_args.build(&bounds)?;
    let pairs = if lowrank > 0 {
        Some(leftmost_eigenpairs(op, lowrank, tol_eig)?)
    } else {
        None
    };
    let eig_seconds = t0.elapsed().as_secs_f64();

    let corr = match &pairs {
        Some(p) => Some(build_correction(op, &p.vectors)?),
        None => None,
    };

    let counters = CounterSet::new();
    let counted = Counted::new(op, &counters);
    let bound = prec.bind(&counted);
    let (x, report) = match &corr {
        Some(c) => {
            let corrected = CorrectedPreconditioner::new(bound, c)?;
            pcg_solve_counted(&counted, Some(&corrected), b, cfg, &counters)?
        }
        None => pcg_solve_counted(&counted, Some(&bound), b, cfg, &counters)?,
    };

    let variant = match prec.variant() {
        mfpoly::polyprec::PolyVariant::Newton => "newton",
        mfpoly::polyprec::PolyVariant::Chebyshev => "chebyshev",
    };
    Ok(PipelineResult {
        x,
        report,
        alpha: bounds.alpha,
        beta: bounds.beta,
        degree: prec.degree(),
        variant,
        eig_seconds,
    })
}
