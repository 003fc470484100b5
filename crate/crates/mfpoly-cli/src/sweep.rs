use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use mfpoly::counters::CounterSet;
use mfpoly::eigest::{estimate_extremes, DEFAULT_TOL_EIG};
use mfpoly::linop::Counted;
use mfpoly::pcg::{pcg_solve_counted, SolveConfig};
use mfpoly::{LinearOperator, Result};
use serde::Serialize;

use crate::config::{
    build_variant, csv_field, init_threads, write_report, write_text, RunConfig, SourceArgs,
    VariantArg,
};
use crate::pipeline::{gaussian_rhs, with_operator};

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub source: SourceArgs,

    /// Comma-separated xi values, one sweep row group per value.
    #[arg(
        long = "xi-list",
        value_delimiter = ',',
        num_args = 0..,
        default_values_t = vec![0.0, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2]
    )]
    pub xi_list: Vec<f64>,

    /// Comma-separated polynomial degrees.
    #[arg(
        long = "degree-list",
        value_delimiter = ',',
        num_args = 0..,
        default_values_t = vec![63usize]
    )]
    pub degree_list: Vec<usize>,

    /// Polynomial family used for every cell.
    #[arg(long, value_enum, default_value_t = VariantArg::Newton)]
    pub variant: VariantArg,

    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,

    #[arg(long, default_value_t = 10_000)]
    pub max_iters: usize,

    /// Accuracy of the shared extremal eigenvalue estimates.
    #[arg(long, default_value_t = DEFAULT_TOL_EIG)]
    pub tol_eig: f64,

    /// RNG seed for the shared right-hand side.
    #[arg(long, default_value_t = 1234)]
    pub seed: u64,

    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0, env = "MFPOLY_THREADS")]
    pub threads: usize,

    /// Directory the CSV and report are written to.
    #[arg(long, default_value = ".", env = "MFPOLY_OUTPUT_DIR")]
    pub output: PathBuf,
}

#[derive(Serialize, Clone)]
struct SweepRow {
    xi: f64,
    degree: usize,
    iters: Option<usize>,
    converged: Option<bool>,
    mvp: Option<u64>,
    ddot: Option<u64>,
    relres: Option<f64>,
    seconds: Option<f64>,
    error: Option<String>,
}

#[derive(Serialize)]
struct SweepBody {
    alpha: Option<f64>,
    beta: Option<f64>,
    estimate_seconds: Option<f64>,
    rows: Vec<SweepRow>,
    csv_path: String,
}

const CSV_HEADER: &str = "xi,degree,iters,converged,mvp,ddot,relres,seconds,error\n";

fn rows_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    for r in rows {
        let opt = |v: Option<String>| v.unwrap_or_default();
        out.push_str(&format!(
            "{:e},{},{},{},{},{},{},{},{}\n",
            r.xi,
            r.degree,
            opt(r.iters.map(|v| v.to_string())),
            opt(r.converged.map(|v| v.to_string())),
            opt(r.mvp.map(|v| v.to_string())),
            opt(r.ddot.map(|v| v.to_string())),
            opt(r.relres.map(|v| format!("{v:.6e}"))),
            opt(r.seconds.map(|v| format!("{v:.6}"))),
            csv_field(r.error.as_deref().unwrap_or("")),
        ));
    }
    out
}

pub fn run(args: &SweepArgs) -> Result<()> {
    init_threads(args.threads)?;

    let mut config = RunConfig::new("sweep");
    config.source = Some(args.source.describe());
    config.variant = args.variant.name().into();
    config.xi_list = Some(args.xi_list.clone());
    config.degree_list = Some(args.degree_list.clone());
    config.tol = args.tol;
    config.max_iters = args.max_iters;
    config.tol_eig = args.tol_eig;
    config.seed = args.seed;
    config.threads = args.threads;
    config.output_dir = args.output.display().to_string();

    if args.xi_list.is_empty() || args.degree_list.is_empty() {
        let csv_path = write_text(&args.output, "sweep.csv", CSV_HEADER)?;
        let body = SweepBody {
            alpha: None,
            beta: None,
            estimate_seconds: None,
            rows: Vec::new(),
            csv_path: csv_path.display().to_string(),
        };
        let path = write_report(&args.output, "sweep_report.json", &config, &body)?;
        println!("empty grid; wrote header-only {}", csv_path.display());
        println!("report: {}", path.display());
        return Ok(());
    }

    let kind = args.source.kind()?;
    let body = with_operator(&kind, |op, natural_rhs| {
        let t0 = Instant::now();
        let bounds0 = estimate_extremes(op, args.tol_eig)?;
        let estimate_seconds = t0.elapsed().as_secs_f64();
        let b = natural_rhs.unwrap_or_else(|| gaussian_rhs(op.dim(), args.seed));
        let cfg = SolveConfig {
            tol: args.tol,
            max_iters: args.max_iters,
            record_history: false,
        };

        let mut rows = Vec::new();
        for &xi in &args.xi_list {
            for &degree in &args.degree_list {
                let row = run_cell(op, &b, &bounds0, args.variant, xi, degree, &cfg);
                match (&row.iters, &row.error) {
                    (Some(it), _) => println!(
                        "xi={xi:e} degree={degree} iters={it} converged={}",
                        row.converged.unwrap_or(false)
                    ),
                    (None, Some(e)) => println!("xi={xi:e} degree={degree} failed: {e}"),
                    _ => {}
                }
                rows.push(row);
            }
        }
        let csv_path = write_text(&args.output, "sweep.csv", &rows_to_csv(&rows))?;
        Ok(SweepBody {
            alpha: Some(bounds0.alpha),
            beta: Some(bounds0.beta),
            estimate_seconds: Some(estimate_seconds),
            rows,
            csv_path: csv_path.display().to_string(),
        })
    })?;

    let path = write_report(&args.output, "sweep_report.json", &config, &body)?;
    println!("csv: {}", body.csv_path);
    println!("report: {}", path.display());
    Ok(())
}

fn run_cell(
    op: &dyn LinearOperator,
    b: &[f64],
    bounds0: &mfpoly::SpectralBounds,
    variant: VariantArg,
    xi: f64,
    degree: usize,
    cfg: &SolveConfig,
) -> SweepRow {
    let mut row = SweepRow {
        xi,
        degree,
        iters: None,
        converged: None,
        mvp: None,
        ddot: None,
        relres: None,
        seconds: None,
        error: None,
    };
    let outcome = mfpoly::SpectralBounds::new(bounds0.alpha, bounds0.beta, xi)
        .and_then(|bb| build_variant(variant, &bb, degree))
        .and_then(|prec| {
            let counters = CounterSet::new();
            let counted = Counted::new(op, &counters);
            let bound = prec.bind(&counted);
            pcg_solve_counted(&counted, Some(&bound), b, cfg, &counters)
        });
    match outcome {
        Ok((_, report)) => {
            row.iters = Some(report.iters);
            row.converged = Some(report.converged);
            row.mvp = Some(report.mvp);
            row.ddot = Some(report.ddot);
            row.relres = Some(report.final_relres);
            row.seconds = Some(report.solve_seconds);
            if !report.converged {
                row.error = Some(format!(
                    "no convergence in {} iterations (residual {:.3e})",
                    report.iters, report.final_relres
                ));
            }
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}
