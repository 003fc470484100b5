//! Sparse storage (CSR and block-diagonal), strip partitioning for
//! row-parallel kernels, and MatrixMarket I/O.

mod blockdiag;
mod csr;
mod market;
mod partition;

pub use blockdiag::BlockDiagMatrix;
pub use csr::CsrMatrix;
pub use market::{
    read_block_structure, read_matrix_market, read_vector, write_block_structure,
    write_matrix_market, write_vector,
};
pub use partition::StripPartition;
