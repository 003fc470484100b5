//! Matrix-free polynomial preconditioning for the conjugate gradient method.
//!
//! The library builds high-degree Newton and Chebyshev polynomial
//! preconditioners from estimated spectral bounds, optionally de-clusters
//! the smallest preconditioned eigenvalues through a scaled midpoint
//! (the `xi` knob), corrects a handful of leftmost eigenvalues with a
//! low-rank term, and solves 3x3 block systems (flow in fracture
//! networks) through a matrix-free Schur complement. All kernels use
//! deterministic reduction orders so iteration counts do not depend on
//! the number of threads.

pub mod counters;
pub mod dense;
pub mod dfn;
pub mod eigest;
pub mod kernels;
pub mod linop;
pub mod lowrank;
pub mod pcg;
pub mod polyprec;
pub mod sparse;

mod error;

pub use counters::CounterSet;
pub use eigest::SpectralBounds;
pub use error::Error;
pub use linop::LinearOperator;

pub type Result<T> = std::result::Result<T, Error>;

/// Library version, for embedding in reports written by front ends.
pub fn version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}
