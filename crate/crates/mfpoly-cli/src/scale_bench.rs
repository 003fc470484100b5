use std::path::PathBuf;

use clap::Args;
use mfpoly::eigest::DEFAULT_TOL_EIG;
use mfpoly::pcg::SolveConfig;
use mfpoly::{Error, Result};
use serde::Serialize;

use crate::config::{init_threads, write_report, write_text, PrecArgs, RunConfig, SourceArgs};
use crate::pipeline::{gaussian_rhs, run_pipeline, with_operator};

#[derive(Args, Debug)]
pub struct ScaleBenchArgs {
    #[command(flatten)]
    pub source: SourceArgs,

    /// Thread counts to benchmark; the smallest is the efficiency reference.
    #[arg(
        long = "threads-list",
        value_delimiter = ',',
        num_args = 1..,
        default_values_t = vec![1usize, 2, 4, 8]
    )]
    pub threads_list: Vec<usize>,

    #[command(flatten)]
    pub prec: PrecArgs,

    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,

    #[arg(long, default_value_t = 10_000)]
    pub max_iters: usize,

    #[arg(long, default_value_t = DEFAULT_TOL_EIG)]
    pub tol_eig: f64,

    /// RNG seed for generated right-hand sides.
    #[arg(long, default_value_t = 1234)]
    pub seed: u64,

    /// Directory the CSV and report are written to.
    #[arg(long, default_value = ".", env = "MFPOLY_OUTPUT_DIR")]
    pub output: PathBuf,
}

#[derive(Serialize, Clone)]
struct BenchRow {
    threads: usize,
    iters: usize,
    converged: bool,
    mvp: u64,
    solve_seconds: f64,
    total_seconds: f64,
    /// Measured speed-up over the reference divided by the ideal
    /// speed-up, in percent.
    eta_percent: f64,
}

#[derive(Serialize)]
struct BenchBody {
    reference_threads: usize,
    iterations_identical: bool,
    rows: Vec<BenchRow>,
    csv_path: String,
}

pub fn run(args: &ScaleBenchArgs) -> Result<()> {
    if args.threads_list.is_empty() {
        return Err(Error::InvalidInput("threads list is empty".into()));
    }
    if let Some(&bad) = args.threads_list.iter().find(|&&t| t == 0) {
        return Err(Error::InvalidInput(format!("thread count must be >= 1, got {bad}")));
    }
    init_threads(0)?;

    let kind = args.source.kind()?;
    let cfg = SolveConfig {
        tol: args.tol,
        max_iters: args.max_iters,
        record_history: false,
    };

    // (threads, solve seconds, total seconds, iters, converged, mvp)
    let mut raw = Vec::new();
    for &t in &args.threads_list {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::InvalidInput(format!("thread pool setup: {e}")))?;
        let start = std::time::Instant::now();
        let pr = pool.install(|| {
            with_operator(&kind, |op, natural_rhs| {
                let b = natural_rhs.unwrap_or_else(|| gaussian_rhs(op.dim(), args.seed));
                run_pipeline(op, &b, &args.prec, 0, args.tol_eig, &cfg)
            })
        })?;
        let total = start.elapsed().as_secs_f64();
        println!(
            "threads={t} iters={} solve={:.3}s total={:.3}s",
            pr.report.iters, pr.report.solve_seconds, total
        );
        raw.push((t, pr.report.solve_seconds, total, pr.report.iters, pr.report.converged, pr.report.mvp));
    }

    let &(t_ref, time_ref, ..) = raw
        .iter()
        .min_by_key(|r| r.0)
        .expect("nonempty list checked above");
    let rows: Vec<BenchRow> = raw
        .iter()
        .map(|&(t, solve, total, iters, converged, mvp)| BenchRow {
            threads: t,
            iters,
            converged,
            mvp,
            solve_seconds: solve,
            total_seconds: total,
            eta_percent: 100.0 * (time_ref / solve) * (t_ref as f64 / t as f64),
        })
        .collect();
    let iterations_identical = rows.iter().all(|r| r.iters == rows[0].iters);

    let mut csv = String::from("threads,iters,solve_seconds,eta_percent\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{:.6},{:.2}\n",
            r.threads, r.iters, r.solve_seconds, r.eta_percent
        ));
    }
    let csv_path = write_text(&args.output, "scale_bench.csv", &csv)?;

    let mut config = RunConfig::new("scale-bench");
    config.source = Some(args.source.describe());
    config.variant = args.prec.variant.name().into();
    config.nlev = args.prec.nlev;
    config.degree = args.prec.degree;
    config.xi = args.prec.xi;
    config.tol = args.tol;
    config.max_iters = args.max_iters;
    config.tol_eig = args.tol_eig;
    config.seed = args.seed;
    config.threads_list = Some(args.threads_list.clone());
    config.output_dir = args.output.display().to_string();

    let body = BenchBody {
        reference_threads: t_ref,
        iterations_identical,
        rows,
        csv_path: csv_path.display().to_string(),
    };
    let path = write_report(&args.output, "scale_bench_report.json", &config, &body)?;
    for r in &body.rows {
        println!("threads={:>3} eta={:6.2}%", r.threads, r.eta_percent);
    }
    if !body.iterations_identical {
        eprintln!("warning: iteration counts differ across thread counts");
    }
    println!("report: {}", path.display());
    Ok(())
}
