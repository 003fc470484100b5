use std::path::PathBuf;

use clap::Args;
use mfpoly::dfn::{load_system, recover_hp, SchurOperator};
use mfpoly::eigest::DEFAULT_TOL_EIG;
use mfpoly::kernels::raw_norm2;
use mfpoly::linop::{make_scaled_operator, CsrOperator, DiagOperator};
use mfpoly::pcg::{history_csv, SolveConfig};
use mfpoly::sparse::{read_matrix_market, read_vector, write_vector};
use mfpoly::{Error, LinearOperator, Result};
use serde::Serialize;

use crate::config::{init_threads, write_report, write_text, PrecArgs, RunConfig, SourceArgs};
use crate::pipeline::{gaussian_rhs, run_pipeline, PipelineResult, SourceKind};

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[command(flatten)]
    pub source: SourceArgs,

    /// Right-hand side file, one value per line. Defaults to a seeded
    /// Gaussian vector (block systems use their stored forcing term).
    #[arg(long, value_name = "FILE")]
    pub rhs: Option<PathBuf>,

    #[command(flatten)]
    pub prec: PrecArgs,

    /// Jacobi seed: solve D^{-1/2} A D^{-1/2} and unscale. Defaults to on
    /// for --dfn (scaled Schur complement) and off otherwise.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub jacobi: Option<bool>,

    /// Rank of the low-rank spectral correction (0 disables it).
    #[arg(long, default_value_t = 0)]
    pub lowrank: usize,

    /// Relative residual target.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,

    #[arg(long, default_value_t = 10_000)]
    pub max_iters: usize,

    /// Accuracy of the extremal eigenvalue estimates.
    #[arg(long, default_value_t = DEFAULT_TOL_EIG)]
    pub tol_eig: f64,

    /// Record the per-iteration residual and write it as CSV.
    #[arg(long)]
    pub history: bool,

    /// Write the solution vector here (trace unknowns for --dfn).
    #[arg(long, value_name = "FILE")]
    pub solution: Option<PathBuf>,

    /// RNG seed for generated right-hand sides.
    #[arg(long, default_value_t = 1234)]
    pub seed: u64,

    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0, env = "MFPOLY_THREADS")]
    pub threads: usize,

    /// Directory reports are written to.
    #[arg(long, default_value = ".", env = "MFPOLY_OUTPUT_DIR")]
    pub output: PathBuf,
}

#[derive(Serialize)]
struct DfnBody {
    nh: usize,
    nu: usize,
    nblocks: usize,
    /// Relative residuals of the three permuted block equations after
    /// recovering the fracture unknowns.
    block_residuals: [f64; 3],
}

#[derive(Serialize)]
struct SolveBody {
    n: usize,
    alpha: f64,
    beta: f64,
    effective_variant: String,
    effective_degree: usize,
    jacobi_seed: bool,
    iters: usize,
    converged: bool,
    mvp: u64,
    ddot: u64,
    final_relres: f64,
    /// Residual of the original (unscaled) system, when it differs from
    /// the solver's own measure.
    true_relres: Option<f64>,
    eig_seconds: f64,
    setup_seconds: f64,
    solve_seconds: f64,
    dfn: Option<DfnBody>,
    history_path: Option<String>,
    solution_path: Option<String>,
}

struct Solved {
    n: usize,
    pr: PipelineResult,
    solution: Vec<f64>,
    true_relres: Option<f64>,
    jacobi: bool,
    dfn: Option<DfnBody>,
}

pub fn run(args: &SolveArgs) -> Result<()> {
    init_threads(args.threads)?;
    let cfg = SolveConfig {
        tol: args.tol,
        max_iters: args.max_iters,
        record_history: args.history,
    };
    let kind = args.source.kind()?;

    let solved = match &kind {
        SourceKind::Diag(n) => {
            let op = DiagOperator::ramp(*n);
            let d = op.diag().to_vec();
            solve_plain(&op, Some(d), args, &cfg)?
        }
        SourceKind::Matrix(path) => {
            let op = CsrOperator::new(read_matrix_market(path)?)?;
            if !op.is_symmetric() {
                return Err(Error::InvalidInput(format!(
                    "{} is not symmetric; the solver requires an SPD matrix",
                    path.display()
                )));
            }
            let d = op.matrix().diag();
            solve_plain(&op, Some(d), args, &cfg)?
        }
        SourceKind::Dfn(dir) => {
            let sys = load_system(dir)?;
            let jacobi = args.jacobi.unwrap_or(true);
            let mut op = SchurOperator::new(&sys)?;
            if jacobi {
                op = op.with_jacobi_scaling()?;
            }
            let b = op.rhs();
            let pr = run_pipeline(&op, &b, &args.prec, args.lowrank, args.tol_eig, &cfg)?;
            let mut u = pr.x.clone();
            op.unscale_solution(&mut u);
            let (h, p) = recover_hp(&sys, op.factors(), &u)?;
            let block_residuals = sys.block_residuals(&h, &p, &u);
            let worst = block_residuals.iter().cloned().fold(0.0f64, f64::max);
            Solved {
                n: op.dim(),
                pr,
                solution: u,
                true_relres: Some(worst),
                jacobi,
                dfn: Some(DfnBody {
                    nh: sys.nh(),
                    nu: sys.nu(),
                    nblocks: sys.nblocks(),
                    block_residuals,
                }),
            }
        }
    };

    let history_path = if args.history {
        let csv = history_csv(&solved.pr.report.history);
        Some(write_text(&args.output, "residual_history.csv", &csv)?)
    } else {
        None
    };
    let solution_path = match &args.solution {
        Some(path) => {
            write_vector(&solved.solution, path)?;
            Some(path.clone())
        }
        None => None,
    };

    let mut config = RunConfig::new("solve");
    config.source = Some(args.source.describe());
    config.rhs_path = args.rhs.as_ref().map(|p| p.display().to_string());
    config.variant = args.prec.variant.name().into();
    config.nlev = args.prec.nlev;
    config.degree = args.prec.degree;
    config.xi = args.prec.xi;
    config.jacobi_seed = solved.jacobi;
    config.lowrank = args.lowrank;
    config.tol = args.tol;
    config.max_iters = args.max_iters;
    config.tol_eig = args.tol_eig;
    config.seed = args.seed;
    config.threads = args.threads;
    config.output_dir = args.output.display().to_string();

    let report = &solved.pr.report;
    let body = SolveBody {
        n: solved.n,
        alpha: solved.pr.alpha,
        beta: solved.pr.beta,
        effective_variant: solved.pr.variant.into(),
        effective_degree: solved.pr.degree,
        jacobi_seed: solved.jacobi,
        iters: report.iters,
        converged: report.converged,
        mvp: report.mvp,
        ddot: report.ddot,
        final_relres: report.final_relres,
        true_relres: solved.true_relres,
        eig_seconds: solved.pr.eig_seconds,
        setup_seconds: report.setup_seconds,
        solve_seconds: report.solve_seconds,
        dfn: solved.dfn,
        history_path: history_path.as_ref().map(|p| p.display().to_string()),
        solution_path: solution_path.as_ref().map(|p| p.display().to_string()),
    };
    let path = write_report(&args.output, "solve_report.json", &config, &body)?;

    println!(
        "n={} variant={} degree={} xi={:e} iters={} relres={:.3e} mvp={} ddot={} solve={:.3}s",
        body.n,
        body.effective_variant,
        body.effective_degree,
        args.prec.xi,
        body.iters,
        body.final_relres,
        body.mvp,
        body.ddot,
        body.solve_seconds
    );
    if let Some(d) = &body.dfn {
        println!(
            "blocks={} nh={} nu={} block residuals [{:.3e}, {:.3e}, {:.3e}]",
            d.nblocks, d.nh, d.nu, d.block_residuals[0], d.block_residuals[1], d.block_residuals[2]
        );
    }
    println!("report: {}", path.display());

    if !report.converged {
        return Err(Error::NoConvergence {
            iters: report.iters,
            residual: report.final_relres,
        });
    }
    Ok(())
}

/// Diagonal and explicit-matrix path; `d` is the matrix diagonal for the
/// optional Jacobi seed (off by default for these sources).
fn solve_plain(
    op: &dyn LinearOperator,
    d: Option<Vec<f64>>,
    args: &SolveArgs,
    cfg: &SolveConfig,
) -> Result<Solved> {
    let n = op.dim();
    let b = match &args.rhs {
        Some(path) => {
            let v = read_vector(path)?;
            if v.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "rhs has {} entries, operator dimension is {n}",
                    v.len()
                )));
            }
            v
        }
        None => gaussian_rhs(n, args.seed),
    };

    let jacobi = args.jacobi.unwrap_or(false);
    if jacobi {
        let d = d.ok_or_else(|| {
            Error::InvalidInput("this source does not expose a diagonal for --jacobi".into())
        })?;
        let scaled = make_scaled_operator(op, &d)?;
        let w: Vec<f64> = d.iter().map(|di| 1.0 / di.sqrt()).collect();
        let bh: Vec<f64> = b.iter().zip(&w).map(|(bi, wi)| bi * wi).collect();
        let pr = run_pipeline(&scaled, &bh, &args.prec, args.lowrank, args.tol_eig, cfg)?;
        let x: Vec<f64> = pr.x.iter().zip(&w).map(|(xi, wi)| xi * wi).collect();
        let true_relres = relative_residual(op, &x, &b);
        Ok(Solved {
            n,
            pr,
            solution: x,
            true_relres: Some(true_relres),
            jacobi,
            dfn: None,
        })
    } else {
        let pr = run_pipeline(op, &b, &args.prec, args.lowrank, args.tol_eig, cfg)?;
        let x = pr.x.clone();
        Ok(Solved {
            n,
            pr,
            solution: x,
            true_relres: None,
            jacobi,
            dfn: None,
        })
    }
}

fn relative_residual(op: &dyn LinearOperator, x: &[f64], b: &[f64]) -> f64 {
    let mut r = op.apply_vec(x);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let nb = raw_norm2(b);
    if nb == 0.0 {
        0.0
    } else {
        raw_norm2(&r) / nb
    }
}
