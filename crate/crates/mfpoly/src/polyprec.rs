//! Polynomial preconditioners for SPD operators.
//!
//! Two constructions over an estimated spectral interval [alpha, beta]:
//!
//! * Newton: the fixed-point ladder P_{j+1} = zeta_{j+1}(2 P_j - P_j A P_j),
//!   P_0 = zeta_0 I, of effective degree 2^nlev - 1.
//! * Chebyshev: the three-term recurrence of arbitrary degree m.
//!
//! Both take the interval midpoint through theta_bar = (alpha+beta)(1+xi)/2.
//! At xi = 0 the two applied maps coincide exactly at matching degree. For
//! xi > 0 only the Chebyshev recurrence spreads the smallest mapped
//! eigenvalues apart (the de-clustering effect); the Newton ladder's first
//! correction step reabsorbs the midpoint shift, leaving the map nearly
//! unchanged. The solve-facing constructor below therefore realizes a
//! requested "Newton level nlev with xi > 0" through Chebyshev coefficients
//! of the same degree and cost.

use crate::eigest::SpectralBounds;
use crate::error::Error;
use crate::linop::LinearOperator;
use serde::{Deserialize, Serialize};

/// Largest supported polynomial degree (Newton nlev <= 10).
pub const MAX_DEGREE: usize = 1023;
pub const MAX_NLEV: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolyVariant {
    Newton,
    Chebyshev,
}

/// Scalars of the Newton ladder: zeta_0 = 1/theta_bar, then
/// zeta_1 = 2/(1 + 2 a z0 - (a z0)^2) and
/// zeta_i = 2/(1 + 2 z_{i-1} - z_{i-1}^2) for i >= 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewtonCoeffs {
    pub nlev: usize,
    pub zetas: Vec<f64>,
    pub theta_bar: f64,
}

/// Scalars of the Chebyshev recurrence: delta = (beta-alpha)/2,
/// sigma = theta_bar/delta, rho_0 = 1/sigma, rho_k = 1/(2 sigma - rho_{k-1}).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChebCoeffs {
    pub m: usize,
    pub theta_bar: f64,
    pub delta: f64,
    pub sigma: f64,
    pub rhos: Vec<f64>,
}

pub fn build_newton(bounds: &SpectralBounds, nlev: usize) -> Result<NewtonCoeffs, Error> {
    if nlev > MAX_NLEV {
        return Err(Error::InvalidInput(format!(
            "nlev {nlev} exceeds the supported maximum {MAX_NLEV}"
        )));
    }
    let theta_bar = bounds.theta_bar();
    let mut zetas = Vec::with_capacity(nlev + 1);
    zetas.push(1.0 / theta_bar);
    if nlev >= 1 {
        let az = bounds.alpha * zetas[0];
        zetas.push(2.0 / (1.0 + 2.0 * az - az * az));
    }
    for i in 2..=nlev {
        let z = zetas[i - 1];
        zetas.push(2.0 / (1.0 + 2.0 * z - z * z));
    }
    Ok(NewtonCoeffs {
        nlev,
        zetas,
        theta_bar,
    })
}

pub fn build_chebyshev(bounds: &SpectralBounds, m: usize) -> Result<ChebCoeffs, Error> {
    if m > MAX_DEGREE {
        return Err(Error::InvalidInput(format!(
            "degree {m} exceeds the supported maximum {MAX_DEGREE}"
        )));
    }
    if bounds.is_degenerate() {
        return Err(Error::DegenerateSpectrum(bounds.alpha));
    }
    let theta_bar = bounds.theta_bar();
    let delta = 0.5 * (bounds.beta - bounds.alpha);
    let sigma = theta_bar / delta;
    let mut rhos = Vec::with_capacity(m + 1);
    rhos.push(1.0 / sigma);
    for _ in 1..=m {
        let prev = rhos.last().unwrap();
        rhos.push(1.0 / (2.0 * sigma - prev));
    }
    Ok(ChebCoeffs {
        m,
        theta_bar,
        delta,
        sigma,
        rhos,
    })
}

impl NewtonCoeffs {
    pub fn degree(&self) -> usize {
        (1usize << self.nlev) - 1
    }

    /// Scalar map of the preconditioned operator: nu_1 = f(zeta_0 lam),
    /// nu_{j+1} = f(zeta_j nu_j) with f(t) = 2t - t^2. Sup over the
    /// interval is 1. The applied ladder differs from this by the
    /// constant factor zeta_nlev (its trailing scaling), which CG is
    /// invariant to; see `applied_scale`.
    pub fn eval_scalar(&self, lambda: f64) -> f64 {
        let f = |t: f64| 2.0 * t - t * t;
        if self.nlev == 0 {
            return self.zetas[0] * lambda;
        }
        let mut nu = f(self.zetas[0] * lambda);
        for j in 1..self.nlev {
            nu = f(self.zetas[j] * nu);
        }
        nu
    }

    /// Constant relating the applied ladder to `eval_scalar`:
    /// apply == applied_scale() * eval_scalar pointwise on the spectrum.
    pub fn applied_scale(&self) -> f64 {
        if self.nlev == 0 {
            1.0
        } else {
            self.zetas[self.nlev]
        }
    }
}

impl ChebCoeffs {
    pub fn degree(&self) -> usize {
        self.m
    }

    /// lambda * p_m(lambda) through the same recurrence the vector
    /// application uses, run on scalars.
    pub fn eval_scalar(&self, lambda: f64) -> f64 {
        if self.m == 0 {
            return lambda / self.theta_bar;
        }
        let mut x_old = 1.0 / self.theta_bar;
        let mut x = (2.0 * self.rhos[1] / self.delta) * (2.0 - lambda / self.theta_bar);
        for k in 2..=self.m {
            let z = (2.0 / self.delta) * (1.0 - lambda * x);
            let xhat = self.rhos[k] * (2.0 * self.sigma * x - self.rhos[k - 1] * x_old + z);
            x_old = x;
            x = xhat;
        }
        lambda * x
    }
}

/// P_nlev r by the ladder recursion. Exactly 2^nlev - 1 applications of A.
pub fn apply_newton(coeffs: &NewtonCoeffs, a: &dyn LinearOperator, r: &[f64]) -> Vec<f64> {
    assert_eq!(r.len(), a.dim(), "apply_newton dimension");
    apply_newton_level(coeffs, a, r, coeffs.nlev)
}

fn apply_newton_level(
    coeffs: &NewtonCoeffs,
    a: &dyn LinearOperator,
    r: &[f64],
    level: usize,
) -> Vec<f64> {
    if level == 0 {
        return r.iter().map(|v| coeffs.zetas[0] * v).collect();
    }
    // P_j r = zeta_j (2 u - P_{j-1} A u), u = P_{j-1} r
    let u = apply_newton_level(coeffs, a, r, level - 1);
    let au = a.apply_vec(&u);
    let w = apply_newton_level(coeffs, a, &au, level - 1);
    let z = coeffs.zetas[level];
    u.iter()
        .zip(&w)
        .map(|(ui, wi)| z * (2.0 * ui - wi))
        .collect()
}

/// P_m r by the three-term recurrence. Exactly m applications of A.
pub fn apply_chebyshev(coeffs: &ChebCoeffs, a: &dyn LinearOperator, r: &[f64]) -> Vec<f64> {
    assert_eq!(r.len(), a.dim(), "apply_chebyshev dimension");
    let n = r.len();
    let th = coeffs.theta_bar;
    if coeffs.m == 0 {
        return r.iter().map(|v| v / th).collect();
    }
    let de = coeffs.delta;
    let sg = coeffs.sigma;
    let mut x_old: Vec<f64> = r.iter().map(|v| v / th).collect();
    let ar = a.apply_vec(r);
    let c1 = 2.0 * coeffs.rhos[1] / de;
    let mut x: Vec<f64> = r
        .iter()
        .zip(&ar)
        .map(|(ri, ari)| c1 * (2.0 * ri - ari / th))
        .collect();
    let mut ax = vec![0.0; n];
    for k in 2..=coeffs.m {
        a.apply(&x, &mut ax);
        let rho = coeffs.rhos[k];
        let rho_prev = coeffs.rhos[k - 1];
        for i in 0..n {
            let z = (2.0 / de) * (r[i] - ax[i]);
            let xhat = rho * (2.0 * sg * x[i] - rho_prev * x_old[i] + z);
            x_old[i] = x[i];
            x[i] = xhat;
        }
    }
    x
}

/// A built polynomial preconditioner, ready to bind to an operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PolyPreconditioner {
    Newton(NewtonCoeffs),
    Chebyshev(ChebCoeffs),
}

impl PolyPreconditioner {
    /// Solve-facing constructor honoring the de-clustering knob. With
    /// xi = 0 a Newton request builds the ladder itself; with xi > 0 it
    /// builds the Chebyshev form of the same degree 2^nlev - 1, which is
    /// the construction that actually moves the smallest mapped
    /// eigenvalues apart (identical map and cost at xi = 0 either way).
    pub fn newton(bounds: &SpectralBounds, nlev: usize) -> Result<Self, Error> {
        if nlev > MAX_NLEV {
            return Err(Error::InvalidInput(format!(
                "nlev {nlev} exceeds the supported maximum {MAX_NLEV}"
            )));
        }
        if bounds.xi > 0.0 && !bounds.is_degenerate() {
            let m = (1usize << nlev) - 1;
            Ok(Self::Chebyshev(build_chebyshev(bounds, m)?))
        } else {
            Ok(Self::Newton(build_newton(bounds, nlev)?))
        }
    }

    /// The ladder regardless of xi (diagnostics, equivalence tests).
    pub fn newton_ladder(bounds: &SpectralBounds, nlev: usize) -> Result<Self, Error> {
        Ok(Self::Newton(build_newton(bounds, nlev)?))
    }

    pub fn chebyshev(bounds: &SpectralBounds, m: usize) -> Result<Self, Error> {
        if bounds.is_degenerate() {
            // degenerate spectra have an exact one-step scaling
            return Ok(Self::Newton(build_newton(bounds, 0)?));
        }
        Ok(Self::Chebyshev(build_chebyshev(bounds, m)?))
    }

    pub fn variant(&self) -> PolyVariant {
        match self {
            Self::Newton(_) => PolyVariant::Newton,
            Self::Chebyshev(_) => PolyVariant::Chebyshev,
        }
    }

    /// Operator applications consumed per preconditioner application.
    pub fn degree(&self) -> usize {
        match self {
            Self::Newton(c) => c.degree(),
            Self::Chebyshev(c) => c.degree(),
        }
    }

    pub fn apply(&self, a: &dyn LinearOperator, r: &[f64]) -> Vec<f64> {
        match self {
            Self::Newton(c) => apply_newton(c, a, r),
            Self::Chebyshev(c) => apply_chebyshev(c, a, r),
        }
    }

    pub fn eval_scalar(&self, lambda: f64) -> f64 {
        match self {
            Self::Newton(c) => c.eval_scalar(lambda),
            Self::Chebyshev(c) => c.eval_scalar(lambda),
        }
    }

    /// Scalar map of the *applied* operator (matches `apply` exactly,
    /// including the Newton ladder's trailing constant).
    pub fn eval_applied(&self, lambda: f64) -> f64 {
        match self {
            Self::Newton(c) => c.applied_scale() * c.eval_scalar(lambda),
            Self::Chebyshev(c) => c.eval_scalar(lambda),
        }
    }

    /// Bind to an operator, giving a symmetric LinearOperator view.
    pub fn bind<'a>(&'a self, a: &'a dyn LinearOperator) -> BoundPreconditioner<'a> {
        BoundPreconditioner { coeffs: self, a }
    }
}

pub struct BoundPreconditioner<'a> {
    coeffs: &'a PolyPreconditioner,
    a: &'a dyn LinearOperator,
}

impl LinearOperator for BoundPreconditioner<'_> {
    fn dim(&self) -> usize {
        self.a.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let out = self.coeffs.apply(self.a, x);
        y.copy_from_slice(&out);
    }
}

/// Sorted mapped spectrum and its condition numbers. Mapped values are
/// reported relative to the largest one (the normalization used when
/// quoting de-clustered spectra); kappa and kappa_10 are scale-free.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumReport {
    /// eval_scalar at each input eigenvalue, ascending, divided by the max.
    pub mapped: Vec<f64>,
    /// The raw maximum divided out of `mapped`.
    pub scale: f64,
    pub kappa: f64,
    pub kappa10: f64,
}

pub fn preconditioned_spectrum_report(
    coeffs: &PolyPreconditioner,
    eigenvalues: &[f64],
) -> Result<SpectrumReport, Error> {
    if eigenvalues.is_empty() {
        return Err(Error::InvalidInput("empty eigenvalue list".into()));
    }
    if let Some(bad) = eigenvalues.iter().find(|v| **v <= 0.0 || !v.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "eigenvalues must be positive, got {bad}"
        )));
    }
    let mut mapped: Vec<f64> = eigenvalues.iter().map(|l| coeffs.eval_scalar(*l)).collect();
    mapped.sort_by(|a, b| a.total_cmp(b));
    let max = *mapped.last().unwrap();
    let min = mapped[0];
    if !(min > 0.0) {
        return Err(Error::NotPositiveDefinite(format!(
            "mapped spectrum reaches {min:.3e}; bounds do not contain the spectrum"
        )));
    }
    let kappa = max / min;
    let tenth = if mapped.len() >= 10 { mapped[9] } else { min };
    let kappa10 = max / tenth;
    let inv = 1.0 / max;
    for v in &mut mapped {
        *v *= inv;
    }
    Ok(SpectrumReport {
        mapped,
        scale: max,
        kappa,
        kappa10,
    })
}
