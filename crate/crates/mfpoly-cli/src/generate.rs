use std::path::PathBuf;

use clap::Args;
use mfpoly::dfn::{generate_synthetic, save_system};
use mfpoly::Result;
use serde::Serialize;

use crate::config::{write_report, RunConfig};

#[derive(Args, Debug)]
pub struct GenerateArgs {
    /// Number of fracture blocks.
    #[arg(long)]
    pub nf: usize,

    /// Average fracture block size (rows per block).
    #[arg(long = "avg-block", default_value_t = 40)]
    pub avg_block: usize,

    /// Fraction of each block's unknowns carrying trace couplings, in (0, 1].
    #[arg(long = "trace-density", default_value_t = 0.15)]
    pub trace_density: f64,

    /// Interface coupling weight; the generator enforces admissibility.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,

    #[arg(long, default_value_t = 1234)]
    pub seed: u64,

    /// Directory the system is written to.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct GenerateBody {
    nf: usize,
    nh: usize,
    nu: usize,
    alpha: f64,
    nnz_a: usize,
    nnz_gh: usize,
    nnz_gu: usize,
    nnz_b: usize,
    nnz_c: usize,
    system_dir: String,
}

pub fn run(args: &GenerateArgs) -> Result<()> {
    let sys = generate_synthetic(
        args.nf,
        args.avg_block,
        args.trace_density,
        args.alpha,
        args.seed,
    )?;
    save_system(&args.out, &sys)?;

    let mut config = RunConfig::new("generate");
    config.seed = args.seed;
    config.output_dir = args.out.display().to_string();

    let body = GenerateBody {
        nf: sys.nblocks(),
        nh: sys.nh(),
        nu: sys.nu(),
        alpha: sys.alpha(),
        nnz_a: sys.a().nnz(),
        nnz_gh: sys.gh().nnz(),
        nnz_gu: sys.gu().nnz(),
        nnz_b: sys.b().nnz(),
        nnz_c: sys.c().nnz(),
        system_dir: args.out.display().to_string(),
    };
    let path = write_report(&args.out, "generate_report.json", &config, &body)?;
    println!(
        "wrote {} blocks (nh={}, nu={}, alpha={}) to {}",
        body.nf,
        body.nh,
        body.nu,
        body.alpha,
        args.out.display()
    );
    println!("report: {}", path.display());
    Ok(())
}
