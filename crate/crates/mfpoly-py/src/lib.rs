//! Python bindings: scalar polynomial maps, the preconditioned solver
//! pipeline, and the fracture block system end to end.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use mfpoly::counters::CounterSet;
use mfpoly::dfn::{generate_synthetic, load_system, recover_hp, save_system, SchurOperator};
use mfpoly::eigest::{estimate_extremes, leftmost_eigenpairs};
use mfpoly::linop::{Counted, CsrOperator, DiagOperator};
use mfpoly::lowrank::{build_correction, CorrectedPreconditioner};
use mfpoly::pcg::{pcg_solve_counted, SolveConfig, SolveReport};
use mfpoly::polyprec::{preconditioned_spectrum_report, PolyPreconditioner, PolyVariant};
use mfpoly::sparse::CsrMatrix;
use mfpoly::{Error, LinearOperator, SpectralBounds};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::NoConvergence { .. } | Error::Breakdown(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn build_poly(
    bounds: &SpectralBounds,
    variant: &str,
    nlev: Option<usize>,
    degree: Option<usize>,
) -> Result<PolyPreconditioner, Error> {
    match variant {
        "newton" => {
            let k = match (nlev, degree) {
                (Some(k), _) => k,
                (None, Some(m)) => {
                    if !(m + 1).is_power_of_two() {
                        return Err(Error::InvalidInput(format!(
                            "newton degree must be 2^k - 1, got {m}"
                        )));
                    }
                    (m + 1).trailing_zeros() as usize
                }
                (None, None) => 6,
            };
            PolyPreconditioner::newton(bounds, k)
        }
        "chebyshev" => {
            let m = match (degree, nlev) {
                (Some(m), _) => m,
                (None, Some(k)) => (1usize << k) - 1,
                (None, None) => 63,
            };
            PolyPreconditioner::chebyshev(bounds, m)
        }
        other => Err(Error::InvalidInput(format!(
            "variant must be 'newton' or 'chebyshev', got '{other}'"
        ))),
    }
}

fn variant_name(v: PolyVariant) -> &'static str {
    match v {
        PolyVariant::Newton => "newton",
        PolyVariant::Chebyshev => "chebyshev",
    }
}

/// Scalar view of a polynomial preconditioner on a fixed spectral
/// interval: evaluates the mapped eigenvalue lambda * p(lambda).
#[pyclass]
struct PolyMap {
    prec: PolyPreconditioner,
    alpha: f64,
    beta: f64,
    xi: f64,
}

#[pymethods]
impl PolyMap {
    #[new]
    #[pyo3(signature = (alpha, beta, xi=0.0, variant="newton", nlev=None, degree=None))]
    fn new(
        alpha: f64,
        beta: f64,
        xi: f64,
        variant: &str,
        nlev: Option<usize>,
        degree: Option<usize>,
    ) -> PyResult<Self> {
        let bounds = SpectralBounds::new(alpha, beta, xi).map_err(to_py)?;
        let prec = build_poly(&bounds, variant, nlev, degree).map_err(to_py)?;
        Ok(PolyMap {
            prec,
            alpha,
            beta,
            xi,
        })
    }

    /// Mapped eigenvalue lambda * p(lambda).
    fn eval(&self, lam: f64) -> f64 {
        self.prec.eval_scalar(lam)
    }

    /// Scalar map of the applied operator, including the Newton ladder's
    /// trailing constant.
    fn eval_applied(&self, lam: f64) -> f64 {
        self.prec.eval_applied(lam)
    }

    /// (mapped ascending, normalized by the max; kappa; kappa_10).
    fn spectrum_report(&self, eigenvalues: Vec<f64>) -> PyResult<(Vec<f64>, f64, f64)> {
        let rep = preconditioned_spectrum_report(&self.prec, &eigenvalues).map_err(to_py)?;
        Ok((rep.mapped, rep.kappa, rep.kappa10))
    }

    #[getter]
    fn degree(&self) -> usize {
        self.prec.degree()
    }

    #[getter]
    fn variant(&self) -> &'static str {
        variant_name(self.prec.variant())
    }

    fn __repr__(&self) -> String {
        format!(
            "PolyMap(alpha={}, beta={}, xi={}, variant='{}', degree={})",
            self.alpha,
            self.beta,
            self.xi,
            variant_name(self.prec.variant()),
            self.prec.degree()
        )
    }
}

fn gaussian_rhs(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

struct Solved {
    x: Vec<f64>,
    report: SolveReport,
    alpha: f64,
    beta: f64,
    degree: usize,
    variant: &'static str,
}

/// estimate bounds -> build polynomial -> optional low-rank correction
/// -> counted preconditioned CG.
#[allow(clippy::too_many_arguments)]
fn run_pipeline(
    op: &dyn LinearOperator,
    b: &[f64],
    variant: &str,
    nlev: Option<usize>,
    degree: Option<usize>,
    xi: f64,
    lowrank: usize,
    tol_eig: f64,
    cfg: &SolveConfig,
) -> Result<Solved, Error> {
    let est = estimate_extremes(op, tol_eig)?;
    let bounds = SpectralBounds::new(est.alpha, est.beta, xi)?;
    let prec = build_poly(&bounds, variant, nlev, degree)?;
    let corr = if lowrank > 0 {
        let pairs = leftmost_eigenpairs(op, lowrank, tol_eig)?;
        Some(build_correction(op, &pairs.vectors)?)
    } else {
        None
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
    Ok(Solved {
        x,
        report,
        alpha: bounds.alpha,
        beta: bounds.beta,
        degree: prec.degree(),
        variant: variant_name(prec.variant()),
    })
}

fn solved_dict<'py>(py: Python<'py>, s: &Solved, with_x: bool) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("iters", s.report.iters)?;
    d.set_item("converged", s.report.converged)?;
    d.set_item("mvp", s.report.mvp)?;
    d.set_item("ddot", s.report.ddot)?;
    d.set_item("final_relres", s.report.final_relres)?;
    d.set_item("alpha", s.alpha)?;
    d.set_item("beta", s.beta)?;
    d.set_item("degree", s.degree)?;
    d.set_item("variant", s.variant)?;
    d.set_item("solve_seconds", s.report.solve_seconds)?;
    if with_x {
        d.set_item("x", s.x.clone())?;
    }
    Ok(d)
}

/// Solve diag(1..=n) x = b with the polynomial-preconditioned CG chain;
/// b defaults to a seeded Gaussian vector.
#[pyfunction]
#[pyo3(signature = (n, nlev=None, degree=None, xi=0.0, variant="newton",
                    tol=1e-10, max_iters=10_000, seed=1234, lowrank=0,
                    tol_eig=1e-3, rhs=None, return_x=false))]
#[allow(clippy::too_many_arguments)]
fn solve_diag_ramp<'py>(
    py: Python<'py>,
    n: usize,
    nlev: Option<usize>,
    degree: Option<usize>,
    xi: f64,
    variant: &str,
    tol: f64,
    max_iters: usize,
    seed: u64,
    lowrank: usize,
    tol_eig: f64,
    rhs: Option<Vec<f64>>,
    return_x: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let op = DiagOperator::ramp(n);
    let b = rhs.unwrap_or_else(|| gaussian_rhs(n, seed));
    let cfg = SolveConfig {
        tol,
        max_iters,
        record_history: false,
    };
    let solved = run_pipeline(&op, &b, variant, nlev, degree, xi, lowrank, tol_eig, &cfg)
        .map_err(to_py)?;
    solved_dict(py, &solved, return_x)
}

/// Solve a symmetric positive definite system given in triplet form.
#[pyfunction]
#[pyo3(signature = (n, rows, cols, values, rhs, nlev=None, degree=None, xi=0.0,
                    variant="newton", tol=1e-10, max_iters=10_000, lowrank=0,
                    tol_eig=1e-3, return_x=true))]
#[allow(clippy::too_many_arguments)]
fn solve_csr<'py>(
    py: Python<'py>,
    n: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
    rhs: Vec<f64>,
    nlev: Option<usize>,
    degree: Option<usize>,
    xi: f64,
    variant: &str,
    tol: f64,
    max_iters: usize,
    lowrank: usize,
    tol_eig: f64,
    return_x: bool,
) -> PyResult<Bound<'py, PyDict>> {
    if rows.len() != cols.len() || rows.len() != values.len() {
        return Err(PyValueError::new_err("rows, cols, values must align"));
    }
    let triplets: Vec<(usize, usize, f64)> = rows
        .into_iter()
        .zip(cols)
        .zip(values)
        .map(|((r, c), v)| (r, c, v))
        .collect();
    let m = CsrMatrix::from_triplets(n, n, &triplets).map_err(to_py)?;
    let op = CsrOperator::new(m).map_err(to_py)?;
    if !op.is_symmetric() {
        return Err(PyValueError::new_err("matrix is not symmetric"));
    }
    let cfg = SolveConfig {
        tol,
        max_iters,
        record_history: false,
    };
    let solved = run_pipeline(&op, &rhs, variant, nlev, degree, xi, lowrank, tol_eig, &cfg)
        .map_err(to_py)?;
    solved_dict(py, &solved, return_x)
}

/// Generate a synthetic fracture block system and write it to `path`.
#[pyfunction]
#[pyo3(signature = (path, nf, avg_block=40, trace_density=0.15, alpha=1.0, seed=1234))]
fn generate_dfn<'py>(
    py: Python<'py>,
    path: &str,
    nf: usize,
    avg_block: usize,
    trace_density: f64,
    alpha: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let sys = generate_synthetic(nf, avg_block, trace_density, alpha, seed).map_err(to_py)?;
    save_system(path, &sys).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("nblocks", sys.nblocks())?;
    d.set_item("nh", sys.nh())?;
    d.set_item("nu", sys.nu())?;
    d.set_item("alpha", sys.alpha())?;
    Ok(d)
}

/// Load a fracture block system from `path` and solve it through the
/// diagonally scaled Schur complement, recovering all three unknown
/// blocks.
#[pyfunction]
#[pyo3(signature = (path, nlev=None, degree=None, xi=0.0, variant="newton",
                    tol=1e-10, max_iters=10_000, lowrank=0, tol_eig=1e-3,
                    return_solution=false))]
#[allow(clippy::too_many_arguments)]
fn solve_dfn<'py>(
    py: Python<'py>,
    path: &str,
    nlev: Option<usize>,
    degree: Option<usize>,
    xi: f64,
    variant: &str,
    tol: f64,
    max_iters: usize,
    lowrank: usize,
    tol_eig: f64,
    return_solution: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let sys = load_system(path).map_err(to_py)?;
    let op = SchurOperator::new(&sys)
        .and_then(SchurOperator::with_jacobi_scaling)
        .map_err(to_py)?;
    let b = op.rhs();
    let cfg = SolveConfig {
        tol,
        max_iters,
        record_history: false,
    };
    let solved = run_pipeline(&op, &b, variant, nlev, degree, xi, lowrank, tol_eig, &cfg)
        .map_err(to_py)?;

    let mut u = solved.x.clone();
    op.unscale_solution(&mut u);
    let (h, p) = recover_hp(&sys, op.factors(), &u).map_err(to_py)?;
    let residuals = sys.block_residuals(&h, &p, &u);

    let d = solved_dict(py, &solved, false)?;
    d.set_item("nblocks", sys.nblocks())?;
    d.set_item("nh", sys.nh())?;
    d.set_item("nu", sys.nu())?;
    d.set_item("block_residuals", residuals.to_vec())?;
    if return_solution {
        d.set_item("u", u)?;
        d.set_item("h", h)?;
        d.set_item("p", p)?;
    }
    Ok(d)
}

/// Extremal eigenvalue estimates (alpha, beta) of diag(1..=n); mostly a
/// smoke hook for the estimator.
#[pyfunction]
#[pyo3(signature = (n, tol_eig=1e-3))]
fn estimate_diag_bounds(n: usize, tol_eig: f64) -> PyResult<(f64, f64)> {
    let op = DiagOperator::ramp(n);
    let est = estimate_extremes(&op, tol_eig).map_err(to_py)?;
    Ok((est.alpha, est.beta))
}

#[pyfunction]
fn version() -> &'static str {
    mfpoly::version()
}

#[pymodule]
fn mfpoly_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PolyMap>()?;
    m.add_function(wrap_pyfunction!(solve_diag_ramp, m)?)?;
    m.add_function(wrap_pyfunction!(solve_csr, m)?)?;
    m.add_function(wrap_pyfunction!(generate_dfn, m)?)?;
    m.add_function(wrap_pyfunction!(solve_dfn, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_diag_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(version, m)?)?;
    Ok(())
}
