use crate::sparse::csr::CsrMatrix;
use std::ops::Range;

/// Consecutive, disjoint row ranges covering a matrix. Kernels walk one
/// strip per task; for block-diagonal matrices strips never cut a block.
#[derive(Debug, Clone)]
pub struct StripPartition {
    ranges: Vec<Range<usize>>,
}

impl StripPartition {
    pub fn new(ranges: Vec<Range<usize>>, nrows: usize) -> Self {
        debug_assert!(ranges.first().map_or(nrows == 0, |r| r.start == 0));
        debug_assert!(ranges.last().map_or(nrows == 0, |r| r.end == nrows));
        debug_assert!(ranges.windows(2).all(|w| w[0].end == w[1].start));
        Self { ranges }
    }

    /// Greedy split of `nrows` rows into at most `nstrips` strips with
    /// near-equal nonzero counts. `weights` gives the per-row nnz.
    pub fn balanced(weights: &[usize], nstrips: usize) -> Self {
        let nrows = weights.len();
        let nstrips = nstrips.max(1);
        let total: usize = weights.iter().sum::<usize>().max(1);
        let target = total.div_ceil(nstrips);
        let mut ranges = Vec::with_capacity(nstrips);
        let mut start = 0usize;
        let mut acc = 0usize;
        for (i, w) in weights.iter().enumerate() {
            acc += w;
            let strips_left = nstrips - ranges.len();
            let rows_left = nrows - i - 1;
            // close the strip when it reaches the target, but keep enough
            // rows for the remaining strips to be nonempty
            if acc >= target && strips_left > 1 && rows_left >= strips_left - 1 {
                ranges.push(start..i + 1);
                start = i + 1;
                acc = 0;
            }
        }
        if start < nrows || ranges.is_empty() {
            ranges.push(start..nrows);
        }
        Self::new(ranges, nrows)
    }

    pub fn for_csr(m: &CsrMatrix, nstrips: usize) -> Self {
        let weights: Vec<usize> = (0..m.nrows())
            .map(|i| m.row_offsets()[i + 1] - m.row_offsets()[i] + 1)
            .collect();
        Self::balanced(&weights, nstrips)
    }

    /// Blocks are atomic: partition block indices, then expand to rows.
    pub fn for_blocks(block_sizes: &[usize], block_nnz: &[usize], nstrips: usize) -> Self {
        let block_part = Self::balanced(block_nnz, nstrips);
        let mut offsets = Vec::with_capacity(block_sizes.len() + 1);
        let mut acc = 0usize;
        offsets.push(0);
        for s in block_sizes {
            acc += s;
            offsets.push(acc);
        }
        let ranges = block_part
            .ranges
            .iter()
            .map(|r| offsets[r.start]..offsets[r.end])
            .collect();
        Self::new(ranges, acc)
    }

    pub fn ranges(&self) -> &[Range<usize>] {
        &self.ranges
    }

    pub fn nstrips(&self) -> usize {
        self.ranges.len()
    }

    /// Split a vector into per-strip mutable slices.
    pub fn split_mut<'a>(&self, mut buf: &'a mut [f64]) -> Vec<&'a mut [f64]> {
        let mut parts = Vec::with_capacity(self.ranges.len());
        for r in &self.ranges {
            let (head, tail) = buf.split_at_mut(r.end - r.start);
            parts.push(head);
            buf = tail;
        }
        parts
    }
}
