use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use mfpoly::eigest::DEFAULT_TOL_EIG;
use mfpoly::polyprec::PolyPreconditioner;
use mfpoly::{Error, SpectralBounds};
use serde::Serialize;

/// Everything that went into a run. Echoed verbatim into each report so a
/// result can be reproduced from the report alone; fields that a command
/// does not use stay at their defaults.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub source: Option<String>,
    pub rhs_path: Option<String>,
    pub variant: String,
    pub nlev: Option<usize>,
    pub degree: Option<usize>,
    pub xi: f64,
    pub xi_list: Option<Vec<f64>>,
    pub degree_list: Option<Vec<usize>>,
    pub jacobi_seed: bool,
    pub lowrank: usize,
    pub tol: f64,
    pub max_iters: usize,
    pub tol_eig: f64,
    pub seed: u64,
    pub threads: usize,
    pub threads_list: Option<Vec<usize>>,
    pub output_dir: String,
}

impl RunConfig {
    pub fn new(command: &str) -> Self {
        RunConfig {
            command: command.to_string(),
            source: None,
            rhs_path: None,
            variant: "newton".into(),
            nlev: None,
            degree: None,
            xi: 0.0,
            xi_list: None,
            degree_list: None,
            jacobi_seed: false,
            lowrank: 0,
            tol: 1e-10,
            max_iters: 10_000,
            tol_eig: DEFAULT_TOL_EIG,
            seed: 0,
            threads: 0,
            threads_list: None,
            output_dir: ".".into(),
        }
    }
}

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    version: &'static str,
    config: &'a RunConfig,
    #[serde(flatten)]
    body: T,
}

/// Writes `body` wrapped with the config and library version as pretty JSON.
pub fn write_report<T: Serialize>(
    dir: &Path,
    name: &str,
    config: &RunConfig,
    body: &T,
) -> Result<PathBuf, Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.display().to_string(),
        source: e,
    })?;
    let path = dir.join(name);
    let report = Report {
        version: mfpoly::version(),
        config,
        body,
    };
    let mut text = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::InvalidInput(format!("report serialization: {e}")))?;
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    Ok(path)
}

pub fn write_text(dir: &Path, name: &str, text: &str) -> Result<PathBuf, Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.display().to_string(),
        source: e,
    })?;
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    Ok(path)
}

/// Quotes a CSV field the minimal way: only when it contains a comma,
/// quote, or newline.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(ValueEnum, Copy, Clone, Debug, PartialEq, Eq)]
pub enum VariantArg {
    Newton,
    Chebyshev,
}

impl VariantArg {
    pub fn name(self) -> &'static str {
        match self {
            VariantArg::Newton => "newton",
            VariantArg::Chebyshev => "chebyshev",
        }
    }
}

/// Polynomial selection shared by the solve-like commands.
#[derive(Args, Debug, Clone)]
pub struct PrecArgs {
    /// Polynomial family applied as the preconditioner.
    #[arg(long, value_enum, default_value_t = VariantArg::Newton)]
    pub variant: VariantArg,

    /// Newton composition levels; the resulting degree is 2^nlev - 1.
    #[arg(long, conflicts_with = "degree")]
    pub nlev: Option<usize>,

    /// Polynomial degree. The newton variant only supports 2^k - 1.
    #[arg(long)]
    pub degree: Option<usize>,

    /// Spectral interval inflation separating the smallest mapped
    /// eigenvalues (0 keeps the classical construction).
    #[arg(long, default_value_t = 0.0)]
    pub xi: f64,
}

pub fn newton_levels_for_degree(m: usize) -> Result<usize, Error> {
    if !(m + 1).is_power_of_two() {
        return Err(Error::InvalidInput(format!(
            "newton degree must be 2^k - 1, got {m}; pass --nlev or --variant chebyshev"
        )));
    }
    Ok((m + 1).trailing_zeros() as usize)
}

impl PrecArgs {
    /// Degree the run will use, before looking at the operator.
    pub fn effective_degree(&self) -> Result<usize, Error> {
        match self.variant {
            VariantArg::Newton => {
                let k = match (self.nlev, self.degree) {
                    (Some(k), _) => k,
                    (None, Some(m)) => newton_levels_for_degree(m)?,
                    (None, None) => 6,
                };
                Ok((1usize << k) - 1)
            }
            VariantArg::Chebyshev => Ok(match (self.degree, self.nlev) {
                (Some(m), _) => m,
                (None, Some(k)) => (1usize << k) - 1,
                (None, None) => 63,
            }),
        }
    }

    pub fn build(&self, bounds: &SpectralBounds) -> Result<PolyPreconditioner, Error> {
        let m = self.effective_degree()?;
        build_variant(self.variant, bounds, m)
    }
}

/// Builds one polynomial of the given family and degree; the newton family
/// routes through the xi-aware facade.
pub fn build_variant(
    variant: VariantArg,
    bounds: &SpectralBounds,
    degree: usize,
) -> Result<PolyPreconditioner, Error> {
    match variant {
        VariantArg::Newton => {
            let k = newton_levels_for_degree(degree)?;
            PolyPreconditioner::newton(bounds, k)
        }
        VariantArg::Chebyshev => PolyPreconditioner::chebyshev(bounds, degree),
    }
}

pub fn parse_diag_test(s: &str) -> Result<usize, String> {
    let rest = s
        .strip_prefix("n=")
        .ok_or_else(|| format!("expected n=<size>, got '{s}'"))?;
    let n: usize = rest
        .replace('_', "")
        .parse()
        .map_err(|e| format!("bad size '{rest}': {e}"))?;
    if n == 0 {
        return Err("size must be positive".into());
    }
    Ok(n)
}

/// Input system selection; exactly one source must be given.
#[derive(Args, Debug, Clone)]
#[group(required = true, multiple = false)]
pub struct SourceArgs {
    /// In-process diagonal test matrix diag(1..=n), written as n=<size>.
    #[arg(long = "diag-test", value_name = "n=N", value_parser = parse_diag_test)]
    pub diag_test: Option<usize>,

    /// Square symmetric matrix in Matrix Market coordinate format.
    #[arg(long, value_name = "FILE")]
    pub matrix: Option<PathBuf>,

    /// Directory holding a saved fracture block system.
    #[arg(long, value_name = "DIR")]
    pub dfn: Option<PathBuf>,
}

impl SourceArgs {
    pub fn describe(&self) -> String {
        if let Some(n) = self.diag_test {
            format!("diag-test n={n}")
        } else if let Some(p) = &self.matrix {
            format!("matrix {}", p.display())
        } else if let Some(d) = &self.dfn {
            format!("dfn {}", d.display())
        } else {
            "none".into()
        }
    }
}

pub fn init_threads(threads: usize) -> Result<(), Error> {
    if threads == 0 {
        return Ok(());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::InvalidInput(format!("thread pool setup: {e}")))
}
