use std::path::PathBuf;

use clap::Args;
use mfpoly::polyprec::preconditioned_spectrum_report;
use mfpoly::sparse::read_vector;
use mfpoly::{Result, SpectralBounds};
use serde::Serialize;

use crate::config::{parse_diag_test, write_report, write_text, PrecArgs, RunConfig};

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
pub struct SpectrumSource {
    /// Use the eigenvalues 1..=n of the diagonal test matrix.
    #[arg(long = "diag-test", value_name = "n=N", value_parser = parse_diag_test)]
    pub diag_test: Option<usize>,

    /// File of eigenvalues, one per line.
    #[arg(long, value_name = "FILE")]
    pub eigs: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub source: SpectrumSource,

    /// Lower end of the preconditioner interval (default: smallest input).
    #[arg(long)]
    pub alpha: Option<f64>,

    /// Upper end of the preconditioner interval (default: largest input).
    #[arg(long)]
    pub beta: Option<f64>,

    #[command(flatten)]
    pub prec: PrecArgs,

    /// Directory the CSV and report are written to.
    #[arg(long, default_value = ".", env = "MFPOLY_OUTPUT_DIR")]
    pub output: PathBuf,
}

#[derive(Serialize)]
struct SpectrumBody {
    count: usize,
    alpha: Option<f64>,
    beta: Option<f64>,
    effective_degree: Option<usize>,
    kappa: Option<f64>,
    kappa10: Option<f64>,
    csv_path: String,
}

pub fn run(args: &SpectrumArgs) -> Result<()> {
    let lambdas: Vec<f64> = if let Some(n) = args.source.diag_test {
        (1..=n).map(|i| i as f64).collect()
    } else {
        read_vector(args.source.eigs.as_ref().unwrap())?
    };

    let mut config = RunConfig::new("spectrum");
    config.source = Some(if let Some(n) = args.source.diag_test {
        format!("diag-test n={n}")
    } else {
        format!("eigs {}", args.source.eigs.as_ref().unwrap().display())
    });
    config.variant = args.prec.variant.name().into();
    config.nlev = args.prec.nlev;
    config.degree = args.prec.degree;
    config.xi = args.prec.xi;
    config.output_dir = args.output.display().to_string();

    let mut csv = String::from("lambda,mapped\n");
    let body = if lambdas.is_empty() {
        let csv_path = write_text(&args.output, "spectrum.csv", &csv)?;
        println!("empty spectrum; wrote header-only {}", csv_path.display());
        SpectrumBody {
            count: 0,
            alpha: None,
            beta: None,
            effective_degree: None,
            kappa: None,
            kappa10: None,
            csv_path: csv_path.display().to_string(),
        }
    } else {
        let lo = lambdas.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = lambdas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let alpha = args.alpha.unwrap_or(lo);
        let beta = args.beta.unwrap_or(hi);
        let bounds = SpectralBounds::new(alpha, beta, args.prec.xi)?;
        let prec = args.prec.build(&bounds)?;
        let report = preconditioned_spectrum_report(&prec, &lambdas)?;
        for l in &lambdas {
            let mapped = prec.eval_scalar(*l) / report.scale;
            csv.push_str(&format!("{l:.17e},{mapped:.17e}\n"));
        }
        let csv_path = write_text(&args.output, "spectrum.csv", &csv)?;
        println!(
            "{} eigenvalues, degree {}: kappa={:.4} kappa10={:.4}",
            lambdas.len(),
            prec.degree(),
            report.kappa,
            report.kappa10
        );
        println!("csv: {}", csv_path.display());
        SpectrumBody {
            count: lambdas.len(),
            alpha: Some(alpha),
            beta: Some(beta),
            effective_degree: Some(prec.degree()),
            kappa: Some(report.kappa),
            kappa10: Some(report.kappa10),
            csv_path: csv_path.display().to_string(),
        }
    };

    let path = write_report(&args.output, "spectrum_report.json", &config, &body)?;
    println!("report: {}", path.display());
    Ok(())
}
