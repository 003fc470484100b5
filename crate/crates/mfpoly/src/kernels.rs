//! Vector kernels with deterministic reduction order.
//!
//! Inner products are accumulated per fixed-size chunk (sequentially
//! inside each chunk) and the chunk partials are combined in index
//! order. The chunk grid depends only on the vector length, never on
//! the worker count, so results are bitwise identical for 1..n threads.

use crate::counters::CounterSet;
use rayon::prelude::*;

/// Reduction granularity. Small enough to give threads work on the
/// problem sizes we target, large enough that the partial pass is cheap.
const CHUNK: usize = 8192;

fn chunk_dot(x: &[f64], y: &[f64]) -> f64 {
    let mut s = 0.0;
    for (a, b) in x.iter().zip(y) {
        s += a * b;
    }
    s
}

/// Deterministic dot product, counted as one global inner product.
pub fn dot(x: &[f64], y: &[f64], counters: &CounterSet) -> f64 {
    counters.inc_ddot();
    raw_dot(x, y)
}

/// Same reduction as `dot` without touching counters (local
/// orthogonalization work, diagnostics).
pub fn raw_dot(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "dot of unequal lengths");
    if x.len() <= CHUNK {
        return chunk_dot(x, y);
    }
    let partials: Vec<f64> = x
        .par_chunks(CHUNK)
        .zip(y.par_chunks(CHUNK))
        .map(|(cx, cy)| chunk_dot(cx, cy))
        .collect();
    // combine in chunk-index order
    partials.iter().sum()
}

pub fn norm2(x: &[f64], counters: &CounterSet) -> f64 {
    dot(x, x, counters).sqrt()
}

pub fn raw_norm2(x: &[f64]) -> f64 {
    raw_dot(x, x).sqrt()
}

/// y += alpha * x, counted.
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64], counters: &CounterSet) {
    counters.inc_axpy();
    raw_axpy(alpha, x, y);
}

pub fn raw_axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    assert_eq!(x.len(), y.len(), "axpy of unequal lengths");
    if x.len() <= CHUNK {
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi += alpha * xi;
        }
        return;
    }
    y.par_chunks_mut(CHUNK)
        .zip(x.par_chunks(CHUNK))
        .for_each(|(cy, cx)| {
            for (yi, xi) in cy.iter_mut().zip(cx) {
                *yi += alpha * xi;
            }
        });
}

/// p = z + beta * p (the CG direction update), counted as one axpy.
pub fn xpby(z: &[f64], beta: f64, p: &mut [f64], counters: &CounterSet) {
    counters.inc_axpy();
    assert_eq!(z.len(), p.len());
    if p.len() <= CHUNK {
        for (pi, zi) in p.iter_mut().zip(z) {
            *pi = zi + beta * *pi;
        }
        return;
    }
    p.par_chunks_mut(CHUNK)
        .zip(z.par_chunks(CHUNK))
        .for_each(|(cp, cz)| {
            for (pi, zi) in cp.iter_mut().zip(cz) {
                *pi = zi + beta * *pi;
            }
        });
}

pub fn scale(alpha: f64, x: &mut [f64]) {
    if x.len() <= CHUNK {
        for xi in x.iter_mut() {
            *xi *= alpha;
        }
        return;
    }
    x.par_chunks_mut(CHUNK).for_each(|c| {
        for xi in c.iter_mut() {
            *xi *= alpha;
        }
    });
}
