use crate::error::Error;
use crate::sparse::csr::CsrMatrix;
use rayon::prelude::*;

/// Square block-diagonal matrix; each block is its own CSR. Models the
/// fracture-local leading block of the 3x3 systems, where no coupling
/// exists between fractures.
#[derive(Debug, Clone)]
pub struct BlockDiagMatrix {
    block_sizes: Vec<usize>,
    offsets: Vec<usize>,
    blocks: Vec<CsrMatrix>,
}

impl BlockDiagMatrix {
    pub fn new(blocks: Vec<CsrMatrix>) -> Result<Self, Error> {
        let mut block_sizes = Vec::with_capacity(blocks.len());
        let mut offsets = vec![0usize];
        for (i, b) in blocks.iter().enumerate() {
            if b.nrows() != b.ncols() {
                return Err(Error::InvalidMatrix(format!(
                    "block {i} is {}x{}, blocks must be square",
                    b.nrows(),
                    b.ncols()
                )));
            }
            block_sizes.push(b.nrows());
            offsets.push(offsets[i] + b.nrows());
        }
        Ok(Self {
            block_sizes,
            offsets,
            blocks,
        })
    }

    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn nblocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn block_sizes(&self) -> &[usize] {
        &self.block_sizes
    }

    pub fn blocks(&self) -> &[CsrMatrix] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &CsrMatrix {
        &self.blocks[i]
    }

    /// Row offset of block i inside the assembled matrix.
    pub fn block_offset(&self, i: usize) -> usize {
        self.offsets[i]
    }

    pub fn nnz(&self) -> usize {
        self.blocks.iter().map(|b| b.nnz()).sum()
    }

    /// y = A x, parallel over blocks (a block never splits).
    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim(), "spmv input length");
        assert_eq!(y.len(), self.dim(), "spmv output length");
        let mut parts: Vec<(usize, &mut [f64])> = Vec::with_capacity(self.blocks.len());
        let mut rest = y;
        for (i, s) in self.block_sizes.iter().enumerate() {
            let (head, tail) = rest.split_at_mut(*s);
            parts.push((i, head));
            rest = tail;
        }
        parts.into_par_iter().for_each(|(i, part)| {
            let lo = self.offsets[i];
            let hi = self.offsets[i + 1];
            let strips = crate::sparse::StripPartition::for_csr(&self.blocks[i], 1);
            self.blocks[i].spmv_into(&x[lo..hi], part, &strips);
        });
    }

    pub fn spmv(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.spmv_into(x, &mut y);
        y
    }

    /// Split a global CSR back into diagonal blocks of the given sizes.
    /// Rejects entries falling outside the block-diagonal footprint.
    pub fn from_csr(m: &CsrMatrix, sizes: &[usize]) -> Result<Self, Error> {
        let total: usize = sizes.iter().sum();
        if m.nrows() != total || m.ncols() != total {
            return Err(Error::DimensionMismatch(format!(
                "matrix is {}x{} but block sizes sum to {total}",
                m.nrows(),
                m.ncols()
            )));
        }
        let mut blocks = Vec::with_capacity(sizes.len());
        let mut off = 0;
        for (i, &sz) in sizes.iter().enumerate() {
            let mut triplets = Vec::new();
            for r in off..off + sz {
                let (cols, vals) = m.row(r);
                for (c, v) in cols.iter().zip(vals) {
                    if *c < off || *c >= off + sz {
                        return Err(Error::InvalidMatrix(format!(
                            "entry ({r}, {c}) lies outside diagonal block {i}"
                        )));
                    }
                    triplets.push((r - off, c - off, *v));
                }
            }
            blocks.push(CsrMatrix::from_triplets(sz, sz, &triplets)?);
            off += sz;
        }
        BlockDiagMatrix::new(blocks)
    }

    /// Assemble into one CSR (tests, file output).
    pub fn to_csr(&self) -> CsrMatrix {
        let n = self.dim();
        let mut triplets = Vec::with_capacity(self.nnz());
        for (i, b) in self.blocks.iter().enumerate() {
            let off = self.offsets[i];
            for r in 0..b.nrows() {
                let (cols, vals) = b.row(r);
                for (c, v) in cols.iter().zip(vals) {
                    triplets.push((off + r, off + c, *v));
                }
            }
        }
        CsrMatrix::from_triplets(n, n, &triplets).expect("block assembly cannot produce duplicates")
    }
}
