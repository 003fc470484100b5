//! Matrix-free Schur complement on the trace fluxes.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dfn::{BlockCholesky, DfnBlockSystem};
use crate::kernels::{raw_axpy, raw_dot, raw_norm2};
use crate::linop::LinearOperator;
use crate::sparse::{CsrMatrix, StripPartition};
use crate::{Error, Result};

const PROBE_SEED: u64 = 0x5c0b_e001;
const PROBE_STEPS: usize = 40;
/// Negative Ritz values beyond this fraction of the spectral scale reject
/// the coupling weight; smaller excursions are factorization roundoff.
const ADMISSIBLE_SLACK: f64 = 1e-8;

/// `S_u = G^u - a B'A^{-1}C - a C'A^{-1}B + C'A^{-1}G^h A^{-1}C`, applied in
/// eleven fixed steps: six per-block triangular solves and seven sparse
/// products. Optionally wraps itself in symmetric Jacobi scaling by the
/// explicit Schur diagonal.
pub struct SchurOperator<'a> {
    sys: &'a DfnBlockSystem,
    chol: BlockCholesky,
    bt: CsrMatrix,
    ct: CsrMatrix,
    strips_b: StripPartition,
    strips_c: StripPartition,
    strips_bt: StripPartition,
    strips_ct: StripPartition,
    strips_gu: StripPartition,
    /// 1/sqrt(diag S_u) when Jacobi scaling is on.
    inv_sqrt_diag: Option<Vec<f64>>,
}

impl<'a> SchurOperator<'a> {
    /// Factors A and probes the smallest Ritz value of S_u; a clearly
    /// negative value rejects alpha before any solve starts.
    pub fn new(sys: &'a DfnBlockSystem) -> Result<Self> {
        let chol = super::factor_blocks(sys.a())?;
        Self::with_factors(sys, chol)
    }

    pub fn with_factors(sys: &'a DfnBlockSystem, chol: BlockCholesky) -> Result<Self> {
        if chol.dim() != sys.nh() {
            return Err(Error::DimensionMismatch(format!(
                "factor dim {} vs system n^h {}",
                chol.dim(),
                sys.nh()
            )));
        }
        let nstrips = rayon::current_num_threads();
        let bt = sys.b().transpose();
        let ct = sys.c().transpose();
        let op = SchurOperator {
            strips_b: StripPartition::for_csr(sys.b(), nstrips),
            strips_c: StripPartition::for_csr(sys.c(), nstrips),
            strips_bt: StripPartition::for_csr(&bt, nstrips),
            strips_ct: StripPartition::for_csr(&ct, nstrips),
            strips_gu: StripPartition::for_csr(sys.gu(), nstrips),
            sys,
            chol,
            bt,
            ct,
            inv_sqrt_diag: None,
        };

        let (ritz_min, scale) = smallest_ritz(&op, PROBE_STEPS, PROBE_SEED);
        if ritz_min < -ADMISSIBLE_SLACK * scale {
            return Err(Error::InadmissibleAlpha {
                alpha: sys.alpha(),
                msg: format!(
                    "smallest Ritz value of the Schur complement is {ritz_min:.6e}; \
                     pick the coupling weight more carefully (the complement is SPD \
                     for wisely chosen alpha)"
                ),
            });
        }
        Ok(op)
    }

    /// Switches to the symmetrically scaled operator D^{-1/2} S_u D^{-1/2}
    /// with D = diag(S_u) computed explicitly (fracture-local work).
    pub fn with_jacobi_scaling(mut self) -> Result<Self> {
        let d = schur_diag(self.sys, &self.chol)?;
        self.inv_sqrt_diag = Some(d.iter().map(|v| 1.0 / v.sqrt()).collect());
        Ok(self)
    }

    pub fn is_scaled(&self) -> bool {
        self.inv_sqrt_diag.is_some()
    }

    pub fn system(&self) -> &DfnBlockSystem {
        self.sys
    }

    pub fn factors(&self) -> &BlockCholesky {
        &self.chol
    }

    /// Maps a right-hand side of the unscaled Schur system into the scaled
    /// one (identity when scaling is off).
    pub fn scale_rhs(&self, r: &mut [f64]) {
        if let Some(w) = &self.inv_sqrt_diag {
            for (ri, wi) in r.iter_mut().zip(w) {
                *ri *= wi;
            }
        }
    }

    /// Maps a solution of the scaled system back to the unscaled unknowns.
    pub fn unscale_solution(&self, u: &mut [f64]) {
        if let Some(w) = &self.inv_sqrt_diag {
            for (ui, wi) in u.iter_mut().zip(w) {
                *ui *= wi;
            }
        }
    }

    /// The eleven-step application of the raw (unscaled) S_u.
    fn apply_raw(&self, r: &[f64], y: &mut [f64]) {
        let sys = self.sys;
        let alpha = sys.alpha();
        let nh = sys.nh();

        let mut t = vec![0.0; nh];
        sys.c().spmv_into(r, &mut t, &self.strips_c); // v = C r
        let mut w = vec![0.0; nh];
        sys.b().spmv_into(r, &mut w, &self.strips_b); // z = B r
        self.chol.solve_in_place(&mut t); // t = A^{-1} C r
        self.chol.solve_in_place(&mut w); // w = A^{-1} B r

        sys.gu().spmv_into(r, y, &self.strips_gu);
        let mut tmp = vec![0.0; sys.nu()];
        self.bt.spmv_into(&t, &mut tmp, &self.strips_bt);
        raw_axpy(-alpha, &tmp, y); // y -= a B' t
        self.ct.spmv_into(&w, &mut tmp, &self.strips_ct);
        raw_axpy(-alpha, &tmp, y); // y -= a C' w

        let mut v2 = sys.gh().spmv(&t);
        self.chol.solve_in_place(&mut v2); // A^{-1} G^h A^{-1} C r
        self.ct.spmv_into(&v2, &mut tmp, &self.strips_ct);
        raw_axpy(1.0, &tmp, y); // y += C' (that)
    }

    /// Right-hand side of the Schur system, one extra pass of the same
    /// machinery: r = a B'A^{-1}q - C'A^{-1}G^h A^{-1}q, then scaled if
    /// Jacobi scaling is on.
    pub fn rhs(&self) -> Vec<f64> {
        let sys = self.sys;
        let mut t = sys.q().to_vec();
        self.chol.solve_in_place(&mut t); // A^{-1} q
        let mut r = vec![0.0; sys.nu()];
        self.bt.spmv_into(&t, &mut r, &self.strips_bt);
        for ri in r.iter_mut() {
            *ri *= sys.alpha();
        }
        let mut v = sys.gh().spmv(&t);
        self.chol.solve_in_place(&mut v);
        let mut tmp = vec![0.0; sys.nu()];
        self.ct.spmv_into(&v, &mut tmp, &self.strips_ct);
        raw_axpy(-1.0, &tmp, &mut r);
        self.scale_rhs(&mut r);
        r
    }
}

impl LinearOperator for SchurOperator<'_> {
    fn dim(&self) -> usize {
        self.sys.nu()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        match &self.inv_sqrt_diag {
            None => self.apply_raw(x, y),
            Some(w) => {
                let scaled: Vec<f64> = x.iter().zip(w).map(|(xi, wi)| xi * wi).collect();
                self.apply_raw(&scaled, y);
                for (yi, wi) in y.iter_mut().zip(w) {
                    *yi *= wi;
                }
            }
        }
    }
}

/// Explicit diag(S_u) by fracture blocks: with Z = A^{-1}C (block-local
/// because C is fracture-local), entry j is
/// `(G^u)_jj + z_j'G^h z_j - 2a z_j'b_j`.
pub fn schur_diag(sys: &DfnBlockSystem, chol: &BlockCholesky) -> Result<Vec<f64>> {
    let gu_diag = sys.gu().diag();
    let alpha = sys.alpha();
    let nblocks = sys.nblocks();

    let per_block: Vec<Vec<f64>> = (0..nblocks)
        .into_par_iter()
        .map(|k| {
            let row_off = sys.a().block_offset(k);
            let nk = sys.a().block_sizes()[k];
            let col_off = sys.c_col_offset(k);
            let mk = sys.c_col_blocks()[k];
            if mk == 0 {
                return Vec::new();
            }

            // Z_k = A_k^{-1} C_k, one dense column per local trace.
            let mut z = vec![vec![0.0; nk]; mk];
            for r in row_off..row_off + nk {
                let (cols, vals) = sys.c().row(r);
                for (j, v) in cols.iter().zip(vals) {
                    z[j - col_off][r - row_off] = *v;
                }
            }
            for col in z.iter_mut() {
                chol.solve_block_in_place(k, col);
            }

            // b-column dots, gathered from B's rows of this block; columns
            // outside the block pair with zero rows of Z and drop out.
            let mut zb = vec![0.0; mk];
            for r in row_off..row_off + nk {
                let (cols, vals) = sys.b().row(r);
                for (j, v) in cols.iter().zip(vals) {
                    if *j >= col_off && *j < col_off + mk {
                        zb[j - col_off] += z[j - col_off][r - row_off] * v;
                    }
                }
            }

            let gh_block = sys.gh().block(k);
            z.iter()
                .enumerate()
                .map(|(jl, col)| {
                    let ghz = gh_block.spmv(col);
                    raw_dot(col, &ghz) - 2.0 * alpha * zb[jl]
                })
                .collect()
        })
        .collect();

    let mut d = gu_diag;
    for (k, vals) in per_block.iter().enumerate() {
        let off = sys.c_col_offset(k);
        for (jl, v) in vals.iter().enumerate() {
            d[off + jl] += v;
        }
    }

    for (j, v) in d.iter().enumerate() {
        if !(*v > 0.0) {
            return Err(Error::InadmissibleAlpha {
                alpha,
                msg: format!(
                    "diag(S_u)[{j}] = {v:.6e} is not positive; try a larger alpha"
                ),
            });
        }
    }
    Ok(d)
}

/// Recovers the fracture unknowns once the trace fluxes are solved:
/// `h = A^{-1}(q + C u)`, `p = A^{-1}(a B u - G^h h)`.
pub fn recover_hp(
    sys: &DfnBlockSystem,
    chol: &BlockCholesky,
    u: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    if u.len() != sys.nu() {
        return Err(Error::DimensionMismatch(format!(
            "trace solution has length {}, expected {}",
            u.len(),
            sys.nu()
        )));
    }
    let mut h = sys.c().spmv(u);
    raw_axpy(1.0, sys.q(), &mut h);
    chol.solve_in_place(&mut h);

    let mut p = sys.b().spmv(u);
    for pi in p.iter_mut() {
        *pi *= sys.alpha();
    }
    let ghh = sys.gh().spmv(&h);
    raw_axpy(-1.0, &ghh, &mut p);
    chol.solve_in_place(&mut p);
    Ok((h, p))
}

/// Short Lanczos probe: returns the smallest Ritz value and a spectral scale
/// for judging it. Full reorthogonalization is affordable at this depth.
fn smallest_ritz(op: &dyn LinearOperator, max_steps: usize, seed: u64) -> (f64, f64) {
    let n = op.dim();
    let steps = max_steps.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let nrm = raw_norm2(&v);
    for vi in v.iter_mut() {
        *vi /= nrm;
    }

    let mut basis = vec![v];
    let mut diag = Vec::new();
    let mut off = Vec::new();
    let mut w = vec![0.0; n];
    for k in 0..steps {
        op.apply(&basis[k], &mut w);
        let a = raw_dot(&basis[k], &w);
        diag.push(a);
        let mut next = w.clone();
        // Two reorthogonalization sweeps keep the basis clean.
        for _ in 0..2 {
            for q in &basis {
                let c = raw_dot(q, &next);
                raw_axpy(-c, q, &mut next);
            }
        }
        let b = raw_norm2(&next);
        if k + 1 == steps || b < 1e-12 * diag[0].abs().max(1.0) {
            break;
        }
        off.push(b);
        for vi in next.iter_mut() {
            *vi /= b;
        }
        basis.push(next);
    }

    let lo = tridiag_extreme(&diag, &off, false);
    let hi = tridiag_extreme(&diag, &off, true);
    (lo, hi.abs().max(lo.abs()).max(1e-300))
}

/// Extreme eigenvalue of a symmetric tridiagonal by Sturm-count bisection.
fn tridiag_extreme(diag: &[f64], off: &[f64], largest: bool) -> f64 {
    let n = diag.len();
    assert_eq!(off.len() + 1, n.max(1), "tridiagonal shape");
    // Gershgorin enclosure.
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { off[i - 1].abs() } else { 0.0 }
            + if i < n - 1 { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    let scale = hi.abs().max(lo.abs()).max(1e-300);
    // Count of eigenvalues below x via the LDL' pivot signs.
    let count_below = |x: f64| -> usize {
        let mut q = diag[0] - x;
        let mut c = (q < 0.0) as usize;
        for i in 1..n {
            if q == 0.0 {
                q = 1e-300;
            }
            q = diag[i] - x - off[i - 1] * off[i - 1] / q;
            c += (q < 0.0) as usize;
        }
        c
    };
    let want = if largest { n - 1 } else { 0 };
    let (mut a, mut b) = (lo, hi);
    for _ in 0..200 {
        if b - a <= 1e-14 * scale {
            break;
        }
        let mid = 0.5 * (a + b);
        // Eigenvalue index `want` is below mid iff count > want.
        if count_below(mid) > want {
            b = mid;
        } else {
            a = mid;
        }
    }
    0.5 * (a + b)
}
