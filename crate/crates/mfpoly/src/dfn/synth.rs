//! Deterministic synthetic block systems with the structure of the fracture
//! problem: grid-Laplacian fracture blocks, fracture-local trace coupling,
//! and a globally coupled trace matrix. Stands in for the unavailable
//! application matrices in tests and benchmarks.

use std::collections::BTreeMap;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dfn::{factor_blocks, schur_diag, DfnBlockSystem, SchurOperator};
use crate::sparse::{BlockDiagMatrix, CsrMatrix};
use crate::{Error, Result};

const MAX_SPD_RETRIES: usize = 8;

/// 5-point grid matrix scaled by `kappa`: diag 4, neighbors -1. SPD.
fn grid_stiffness(r: usize, c: usize, kappa: f64) -> CsrMatrix {
    let n = r * c;
    let mut t = Vec::with_capacity(5 * n);
    for i in 0..r {
        for j in 0..c {
            let row = i * c + j;
            t.push((row, row, 4.0 * kappa));
            if i > 0 {
                t.push((row, row - c, -kappa));
            }
            if i + 1 < r {
                t.push((row, row + c, -kappa));
            }
            if j > 0 {
                t.push((row, row - 1, -kappa));
            }
            if j + 1 < c {
                t.push((row, row + 1, -kappa));
            }
        }
    }
    CsrMatrix::from_triplets(n, n, &t).unwrap()
}

/// Grid graph Laplacian scaled by `g`: diag = degree, neighbors -1. SPSD
/// with a one-dimensional kernel (the constant vector).
fn grid_laplacian(r: usize, c: usize, g: f64) -> CsrMatrix {
    let n = r * c;
    let mut t = Vec::with_capacity(5 * n);
    for i in 0..r {
        for j in 0..c {
            let row = i * c + j;
            let mut deg = 0.0;
            if i > 0 {
                t.push((row, row - c, -g));
                deg += 1.0;
            }
            if i + 1 < r {
                t.push((row, row + c, -g));
                deg += 1.0;
            }
            if j > 0 {
                t.push((row, row - 1, -g));
                deg += 1.0;
            }
            if j + 1 < c {
                t.push((row, row + 1, -g));
                deg += 1.0;
            }
            t.push((row, row, g * deg));
        }
    }
    CsrMatrix::from_triplets(n, n, &t).unwrap()
}

pub fn generate_synthetic(
    nf: usize,
    avg_block: usize,
    trace_density: f64,
    alpha: f64,
    seed: u64,
) -> Result<DfnBlockSystem> {
    if nf < 2 {
        return Err(Error::InvalidInput("need at least two fractures".into()));
    }
    if avg_block < 2 {
        return Err(Error::InvalidInput("average block size must be at least 2".into()));
    }
    if !(trace_density > 0.0 && trace_density <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "trace density must lie in (0, 1], got {trace_density}"
        )));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InadmissibleAlpha {
            alpha,
            msg: "coupling weight must be positive and finite".into(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut a_blocks = Vec::with_capacity(nf);
    let mut gh_blocks = Vec::with_capacity(nf);
    let mut block_sizes = Vec::with_capacity(nf);
    let mut col_sizes = Vec::with_capacity(nf);
    for _ in 0..nf {
        let lo = 2.max(avg_block * 3 / 4);
        let hi = (avg_block * 5 / 4).max(lo + 1);
        let target = rng.random_range(lo..=hi);
        let r = 1.max((target as f64).sqrt().round() as usize);
        let c = 1.max(target.div_ceil(r));
        let nk = r * c;
        let kappa = 0.5 + 1.5 * rng.random::<f64>();
        a_blocks.push(grid_stiffness(r, c, kappa));
        let g = 0.2 + 0.8 * rng.random::<f64>();
        gh_blocks.push(grid_laplacian(r, c, g));
        block_sizes.push(nk);
        col_sizes.push(1.max((trace_density * nk as f64).round() as usize));
    }
    let nh: usize = block_sizes.iter().sum();
    let nu: usize = col_sizes.iter().sum();
    let mut row_off = Vec::with_capacity(nf + 1);
    let mut col_off = Vec::with_capacity(nf + 1);
    row_off.push(0usize);
    col_off.push(0usize);
    for k in 0..nf {
        row_off.push(row_off[k] + block_sizes[k]);
        col_off.push(col_off[k] + col_sizes[k]);
    }

    // C: each trace column touches a few rows of its own fracture.
    let mut c_trip = Vec::new();
    for k in 0..nf {
        let nk = block_sizes[k];
        for jl in 0..col_sizes[k] {
            let j = col_off[k] + jl;
            let s = rng.random_range(2..=4).min(nk);
            let rows = rand::seq::index::sample(&mut rng, nk, s);
            for rl in rows.iter() {
                let v: f64 = rng.sample::<f64, _>(StandardNormal);
                c_trip.push((row_off[k] + rl, j, v));
            }
        }
    }
    let c_mat = CsrMatrix::from_triplets(nh, nu, &c_trip)?;

    // E: cross-fracture entries only, so its support never meets C's.
    let mut e_map: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for k in 0..nf {
        for jl in 0..col_sizes[k] {
            let j = col_off[k] + jl;
            let ne = rng.random_range(0..=2);
            for _ in 0..ne {
                let mut kp = rng.random_range(0..nf - 1);
                if kp >= k {
                    kp += 1;
                }
                let rl = rng.random_range(0..block_sizes[kp]);
                let v: f64 = 0.1 * rng.sample::<f64, _>(StandardNormal);
                *e_map.entry((row_off[kp] + rl, j)).or_insert(0.0) += v;
            }
        }
    }
    let mut b_trip = c_trip;
    for ((r, j), v) in &e_map {
        b_trip.push((*r, *j, *v));
    }
    let b_mat = CsrMatrix::from_triplets(nh, nu, &b_trip)?;

    // Trace coupling graph: a ring plus random chords, then a diagonal
    // shift sized (and grown on retry) to keep the Schur complement SPD.
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    if nu > 1 {
        for j in 0..nu {
            let w = 0.1 + rng.random::<f64>();
            edges.push((j, (j + 1) % nu, w));
        }
        for _ in 0..nu {
            let j1 = rng.random_range(0..nu);
            let j2 = rng.random_range(0..nu);
            if j1 != j2 {
                let w = 0.1 + rng.random::<f64>();
                edges.push((j1.min(j2), j1.max(j2), w));
            }
        }
    }

    let q: Vec<f64> = (0..nh).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();

    let a = BlockDiagMatrix::new(a_blocks)?;
    let gh = BlockDiagMatrix::new(gh_blocks)?;
    let chol = factor_blocks(&a)?;

    let mut shift = 2.0 + 4.0 * alpha;
    for _ in 0..MAX_SPD_RETRIES {
        let mut gu_map: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for j in 0..nu {
            gu_map.insert((j, j), shift);
        }
        for (j1, j2, w) in &edges {
            *gu_map.entry((*j1, *j2)).or_insert(0.0) -= w;
            *gu_map.entry((*j2, *j1)).or_insert(0.0) -= w;
            *gu_map.entry((*j1, *j1)).or_insert(0.0) += w;
            *gu_map.entry((*j2, *j2)).or_insert(0.0) += w;
        }
        let gu_trip: Vec<(usize, usize, f64)> =
            gu_map.iter().map(|((r, c), v)| (*r, *c, *v)).collect();
        let gu = CsrMatrix::from_triplets(nu, nu, &gu_trip)?;

        let sys = DfnBlockSystem::new(
            a.clone(),
            gh.clone(),
            gu,
            b_mat.clone(),
            c_mat.clone(),
            col_sizes.clone(),
            alpha,
            q.clone(),
        )?;
        let admissible = SchurOperator::with_factors(&sys, chol.clone()).is_ok()
            && schur_diag(&sys, &chol).is_ok();
        if admissible {
            return Ok(sys);
        }
        shift *= 2.0;
    }
    Err(Error::InadmissibleAlpha {
        alpha,
        msg: format!(
            "synthetic system still fails the SPD probe after {MAX_SPD_RETRIES} \
             diagonal inflations; raise alpha"
        ),
    })
}
