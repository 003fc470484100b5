//! Extremal eigenvalue estimation by nonlinear-CG minimization of the
//! generalized Rayleigh quotient q(x) = (x'Mx)/(x'Nx) with deflation
//! (DACG). Smallest eigenvalue of SPD A: pencil (A, I). Largest: pencil
//! (I, A), whose leftmost value is 1/lambda_max.

use crate::error::Error;
use crate::kernels::{raw_dot, raw_norm2};
use crate::linop::LinearOperator;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Estimated spectral interval plus the de-clustering knob xi.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralBounds {
    pub alpha: f64,
    pub beta: f64,
    pub xi: f64,
}

impl SpectralBounds {
    pub fn new(alpha: f64, beta: f64, xi: f64) -> Result<Self, Error> {
        if !(alpha > 0.0 && beta >= alpha) {
            return Err(Error::InvalidInput(format!(
                "need 0 < alpha <= beta, got alpha={alpha}, beta={beta}"
            )));
        }
        if !(xi >= 0.0) {
            return Err(Error::InvalidInput(format!("xi must be >= 0, got {xi}")));
        }
        Ok(Self { alpha, beta, xi })
    }

    pub fn with_xi(mut self, xi: f64) -> Self {
        self.xi = xi;
        self
    }

    /// Scaled interval midpoint. xi > 0 lifts it, de-clustering the
    /// smallest mapped eigenvalues at the price of a larger condition
    /// number.
    pub fn theta_bar(&self) -> f64 {
        0.5 * (self.alpha + self.beta) * (1.0 + self.xi)
    }

    pub fn is_degenerate(&self) -> bool {
        self.beta <= self.alpha * (1.0 + 1e-12)
    }
}

#[derive(Debug, Clone)]
pub struct EigenPairSet {
    /// Ascending approximate eigenvalues.
    pub values: Vec<f64>,
    /// Unit-norm, mutually orthonormal vectors, one per value.
    pub vectors: Vec<Vec<f64>>,
}

pub const DEFAULT_TOL_EIG: f64 = 1e-3;

fn max_iters_for(dim: usize) -> usize {
    50 * (dim as f64).sqrt().ceil() as usize
}

fn project_out(v: &mut [f64], basis: &[Vec<f64>]) {
    for u in basis {
        let c = raw_dot(u, v);
        for (vi, ui) in v.iter_mut().zip(u) {
            *vi -= c * ui;
        }
    }
}

/// Best stationary point of q(x + t p) below the current quotient.
/// Coefficients follow from d/dt of the quotient of two quadratics:
/// (ce - bf) t^2 + (cd - af) t + (bd - ae) = 0.
fn line_search(a: f64, b: f64, c: f64, d: f64, e: f64, f: f64, q: f64) -> (f64, f64) {
    let qa = c * e - b * f;
    let qb = c * d - a * f;
    let qc = b * d - a * e;
    let mut candidates = [0.0f64; 2];
    let mut ncand = 0;
    if qa != 0.0 {
        let disc = qb * qb - 4.0 * qa * qc;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            candidates[0] = (-qb + sq) / (2.0 * qa);
            candidates[1] = (-qb - sq) / (2.0 * qa);
            ncand = 2;
        }
    } else if qb != 0.0 {
        candidates[0] = -qc / qb;
        ncand = 1;
    }
    let mut best_t = 0.0;
    let mut best_q = q;
    for &t in &candidates[..ncand] {
        if !t.is_finite() {
            continue;
        }
        let num = a + 2.0 * t * b + t * t * c;
        let den = d + 2.0 * t * e + t * t * f;
        if den > 0.0 && num / den < best_q {
            best_t = t;
            best_q = num / den;
        }
    }
    (best_t, best_q)
}

struct DacgOutcome {
    q: f64,
    x: Vec<f64>,
    iters: usize,
    residual: f64,
}

/// Minimize q over the complement of `deflate`. Converges when the
/// pencil residual ||Mx - qNx|| / ||Nx|| drops below tol * |q|.
fn dacg(
    apply_m: &dyn Fn(&[f64]) -> Vec<f64>,
    apply_n: &dyn Fn(&[f64]) -> Vec<f64>,
    n: usize,
    rng: &mut ChaCha8Rng,
    tol: f64,
    max_iters: usize,
    deflate: &[Vec<f64>],
) -> DacgOutcome {
    let mut x: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    project_out(&mut x, deflate);
    let nx0 = raw_norm2(&x);
    x.iter_mut().for_each(|v| *v /= nx0);

    let mut mx = apply_m(&x);
    let mut nxv = apply_n(&x);
    let mut xmx = raw_dot(&x, &mx);
    let mut xnx = raw_dot(&x, &nxv);
    let mut q = xmx / xnx;

    let mut g: Vec<f64> = mx
        .iter()
        .zip(&nxv)
        .map(|(m, nn)| 2.0 * (m - q * nn) / xnx)
        .collect();
    let mut gg = raw_dot(&g, &g);
    let mut p: Vec<f64> = g.iter().map(|v| -v).collect();
    project_out(&mut p, deflate);

    let mut residual = {
        let r2: f64 = mx
            .iter()
            .zip(&nxv)
            .map(|(m, nn)| (m - q * nn) * (m - q * nn))
            .sum();
        r2.sqrt() / raw_norm2(&nxv)
    };
    if residual <= tol * q.abs() {
        return DacgOutcome { q, x, iters: 0, residual };
    }

    let mut iters = 0usize;
    while iters < max_iters {
        iters += 1;
        let mut mp = apply_m(&p);
        let mut np = apply_n(&p);
        let (mut b, mut c) = (raw_dot(&x, &mp), raw_dot(&p, &mp));
        let (mut e, mut f) = (raw_dot(&x, &np), raw_dot(&p, &np));
        let (mut t, _) = line_search(xmx, b, c, xnx, e, f, q);
        if t == 0.0 {
            // restart steepest-descent; if that also stalls we are at a
            // numerically stationary point
            p = g.iter().map(|v| -v).collect();
            project_out(&mut p, deflate);
            mp = apply_m(&p);
            np = apply_n(&p);
            b = raw_dot(&x, &mp);
            c = raw_dot(&p, &mp);
            e = raw_dot(&x, &np);
            f = raw_dot(&p, &np);
            let (t2, _) = line_search(xmx, b, c, xnx, e, f, q);
            if t2 == 0.0 {
                break;
            }
            t = t2;
        }
        for i in 0..n {
            x[i] += t * p[i];
            mx[i] += t * mp[i];
            nxv[i] += t * np[i];
        }
        let nn = raw_norm2(&x);
        let inv = 1.0 / nn;
        x.iter_mut().for_each(|v| *v *= inv);
        mx.iter_mut().for_each(|v| *v *= inv);
        nxv.iter_mut().for_each(|v| *v *= inv);
        if !deflate.is_empty() && iters % 10 == 0 {
            project_out(&mut x, deflate);
            mx = apply_m(&x);
            nxv = apply_n(&x);
        }
        xmx = raw_dot(&x, &mx);
        xnx = raw_dot(&x, &nxv);
        q = xmx / xnx;
        let g_new: Vec<f64> = mx
            .iter()
            .zip(&nxv)
            .map(|(m, nn)| 2.0 * (m - q * nn) / xnx)
            .collect();
        let r2: f64 = mx
            .iter()
            .zip(&nxv)
            .map(|(m, nn)| (m - q * nn) * (m - q * nn))
            .sum();
        residual = r2.sqrt() / raw_norm2(&nxv);
        if residual <= tol * q.abs() {
            break;
        }
        let gg_new = raw_dot(&g_new, &g_new);
        let diff: f64 = g_new.iter().zip(&g).map(|(gn, go)| gn * (gn - go)).sum();
        let beta = (diff / gg).max(0.0); // Polak-Ribiere, clipped
        g = g_new;
        gg = gg_new;
        for i in 0..n {
            p[i] = -g[i] + beta * p[i];
        }
        project_out(&mut p, deflate);
    }
    DacgOutcome { q, x, iters, residual }
}

fn check_converged(out: &DacgOutcome, tol: f64, what: &str) -> Result<(), Error> {
    // stagnation at a numerically stationary point counts as converged
    // only if the pencil residual actually dropped below tolerance
    if out.residual <= tol * out.q.abs() {
        Ok(())
    } else {
        Err(Error::Breakdown(format!(
            "{what} estimation stopped after {} iterations at residual {:.3e}",
            out.iters, out.residual
        )))
    }
}

/// Estimate the extremal eigenvalues of an SPD operator.
///
/// The returned beta carries a 1.01 safety factor at the default (loose)
/// tolerance: an underestimated beta maps the top of the spectrum outside
/// the contraction interval and can make the polynomial preconditioner
/// indefinite, while an overestimate only shifts the effective interval
/// slightly. Degenerate spectra (alpha = beta to machine precision) skip
/// the factor so the exact-scaling path sees equal bounds.
pub fn estimate_extremes(a: &dyn LinearOperator, tol_eig: f64) -> Result<SpectralBounds, Error> {
    if a.dim() < 2 {
        return Err(Error::InvalidInput(
            "extreme estimation needs operator dimension >= 2".into(),
        ));
    }
    if !(tol_eig > 0.0 && tol_eig < 1.0) {
        return Err(Error::InvalidInput(format!(
            "tol_eig must be in (0, 1), got {tol_eig}"
        )));
    }
    let n = a.dim();
    let max_iters = max_iters_for(n);
    let apply_a = |x: &[f64]| a.apply_vec(x);
    let apply_i = |x: &[f64]| x.to_vec();

    let mut rng = ChaCha8Rng::seed_from_u64(0xE16E_5701);
    let largest = dacg(&apply_i, &apply_a, n, &mut rng, tol_eig, max_iters, &[]);
    check_converged(&largest, tol_eig, "largest eigenvalue")?;
    let beta_raw = 1.0 / largest.q;

    let mut rng = ChaCha8Rng::seed_from_u64(0xE16E_5702);
    let smallest = dacg(&apply_a, &apply_i, n, &mut rng, tol_eig, max_iters, &[]);
    check_converged(&smallest, tol_eig, "smallest eigenvalue")?;
    let alpha = smallest.q;

    let degenerate = beta_raw <= alpha * (1.0 + 1e-9);
    let beta = if degenerate {
        alpha
    } else if tol_eig >= DEFAULT_TOL_EIG {
        beta_raw * 1.01
    } else {
        beta_raw
    };
    SpectralBounds::new(alpha, beta, 0.0)
}

/// p approximate leftmost eigenpairs via deflated restarts.
pub fn leftmost_eigenpairs(
    a: &dyn LinearOperator,
    p: usize,
    tol_eig: f64,
) -> Result<EigenPairSet, Error> {
    let n = a.dim();
    if p == 0 {
        return Err(Error::InvalidInput("p must be >= 1".into()));
    }
    if p >= n {
        return Err(Error::InvalidInput(format!(
            "requested {p} eigenpairs of a dimension-{n} operator"
        )));
    }
    if !(tol_eig > 0.0 && tol_eig < 1.0) {
        return Err(Error::InvalidInput(format!(
            "tol_eig must be in (0, 1), got {tol_eig}"
        )));
    }
    let max_iters = max_iters_for(n);
    let apply_a = |x: &[f64]| a.apply_vec(x);
    let apply_i = |x: &[f64]| x.to_vec();

    let mut values = Vec::with_capacity(p);
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(p);
    for k in 0..p {
        let mut rng = ChaCha8Rng::seed_from_u64(0xd1a6 + k as u64);
        let out = dacg(&apply_a, &apply_i, n, &mut rng, tol_eig, max_iters, &vectors);
        check_converged(&out, tol_eig, "leftmost eigenpair")?;
        let mut v = out.x;
        // tidy the basis: remove converged components, renormalize
        project_out(&mut v, &vectors);
        let nv = raw_norm2(&v);
        v.iter_mut().for_each(|c| *c /= nv);
        values.push(out.q);
        vectors.push(v);
    }
    // deflated minimization returns them leftmost-first already; sort to
    // guard against near-degenerate crossings
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let values = order.iter().map(|&i| values[i]).collect();
    let vectors = order.into_iter().map(|i| std::mem::take(&mut vectors[i])).collect();
    Ok(EigenPairSet { values, vectors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linop::DiagOperator;

    #[test]
    fn identity_bounds_are_exact() {
        let a = DiagOperator::new(vec![1.0; 10]);
        let b = estimate_extremes(&a, 1e-3).unwrap();
        assert!((b.alpha - 1.0).abs() <= 1e-10);
        assert!((b.beta - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn ramp_diag_bounds_within_one_percent() {
        let a = DiagOperator::ramp(100);
        let b = estimate_extremes(&a, 1e-3).unwrap();
        assert!((b.alpha - 1.0).abs() <= 0.01, "alpha = {}", b.alpha);
        // beta carries the 1.01 safety factor
        assert!(b.beta >= 100.0 * 0.99 && b.beta <= 100.0 * 1.02, "beta = {}", b.beta);
    }

    #[test]
    fn laplacian_extremes() {
        let n = 32;
        let mut trips = Vec::new();
        for i in 0..n {
            trips.push((i, i, 2.0));
            if i + 1 < n {
                trips.push((i, i + 1, -1.0));
                trips.push((i + 1, i, -1.0));
            }
        }
        let m = crate::sparse::CsrMatrix::from_triplets(n, n, &trips).unwrap();
        let op = crate::linop::CsrOperator::new(m).unwrap();
        let b = estimate_extremes(&op, 1e-4).unwrap();
        let h = std::f64::consts::PI / (2.0 * (n as f64 + 1.0));
        let lmin = 4.0 * (h).sin().powi(2);
        let lmax = 4.0 * (n as f64 * h).sin().powi(2);
        assert!((b.alpha - lmin).abs() / lmin <= 0.01, "alpha {} vs {}", b.alpha, lmin);
        assert!((b.beta - lmax).abs() / lmax <= 0.01, "beta {} vs {}", b.beta, lmax);
    }

    #[test]
    fn leftmost_three_of_ramp() {
        let a = DiagOperator::ramp(100);
        let pairs = leftmost_eigenpairs(&a, 3, 1e-3).unwrap();
        for (k, v) in pairs.values.iter().enumerate() {
            let truth = (k + 1) as f64;
            assert!((v - truth).abs() / truth <= 0.01, "pair {k}: {v}");
        }
        // orthonormality
        for i in 0..3 {
            for j in 0..3 {
                let d = raw_dot(&pairs.vectors[i], &pairs.vectors[j]);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((d - want).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn residual_bound_holds() {
        let a = DiagOperator::ramp(50);
        let tol = 1e-3;
        let pairs = leftmost_eigenpairs(&a, 2, tol).unwrap();
        let beta = 50.0;
        for (v, vecx) in pairs.values.iter().zip(&pairs.vectors) {
            let av = a.apply_vec(vecx);
            let r: f64 = av
                .iter()
                .zip(vecx.iter())
                .map(|(avi, vi)| (avi - v * vi) * (avi - v * vi))
                .sum::<f64>()
                .sqrt();
            assert!(r <= tol * beta, "residual {r} vs {}", tol * beta);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let a = DiagOperator::ramp(10);
        assert!(estimate_extremes(&a, 0.0).is_err());
        assert!(leftmost_eigenpairs(&a, 10, 1e-3).is_err());
        let tiny = DiagOperator::new(vec![1.0]);
        assert!(estimate_extremes(&tiny, 1e-3).is_err());
    }
}
