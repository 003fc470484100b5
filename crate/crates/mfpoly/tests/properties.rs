//! Randomized invariants: storage roundtrips, strip-count independence of
//! the parallel kernels, file I/O exactness, solver counter discipline, and
//! the agreement between scalar polynomial maps and operator applications.

use std::collections::BTreeMap;

use mfpoly::linop::{probe_symmetry, CsrOperator, DiagOperator};
use mfpoly::pcg::{pcg_solve, SolveConfig};
use mfpoly::polyprec::PolyPreconditioner;
use mfpoly::sparse::{
    read_block_structure, read_matrix_market, read_vector, write_block_structure,
    write_matrix_market, write_vector, BlockDiagMatrix, CsrMatrix, StripPartition,
};
use mfpoly::SpectralBounds;
use proptest::prelude::*;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn csr_strategy(max_dim: usize) -> impl Strategy<Value = CsrMatrix> {
    (1..=max_dim, 1..=max_dim).prop_flat_map(move |(nr, nc)| {
        prop::collection::btree_map((0..nr, 0..nc), -1e3..1e3f64, 0..=(nr * nc).min(80)).prop_map(
            move |map: BTreeMap<(usize, usize), f64>| {
                let triplets: Vec<(usize, usize, f64)> =
                    map.into_iter().map(|((r, c), v)| (r, c, v)).collect();
                CsrMatrix::from_triplets(nr, nc, &triplets).unwrap()
            },
        )
    })
}

/// Symmetric diagonally dominant matrix, guaranteed SPD.
fn random_spd_csr(n: usize, seed: u64) -> CsrMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..i {
            let v = rng.random::<f64>() - 0.5;
            entries[i * n + j] = v;
            entries[j * n + i] = v;
        }
    }
    let mut triplets = Vec::new();
    for i in 0..n {
        let off: f64 = (0..n).filter(|j| *j != i).map(|j| entries[i * n + j].abs()).sum();
        for j in 0..n {
            let v = if i == j { 1.0 + off } else { entries[i * n + j] };
            if v != 0.0 {
                triplets.push((i, j, v));
            }
        }
    }
    CsrMatrix::from_triplets(n, n, &triplets).unwrap()
}

proptest! {
    #[test]
    fn triplets_survive_csr_construction(m in csr_strategy(14)) {
        let dense = m.to_dense();
        let nc = m.ncols();
        let mut seen = 0;
        for r in 0..m.nrows() {
            let (cols, vals) = m.row(r);
            // rows come back sorted by column with no duplicates
            for w in cols.windows(2) {
                prop_assert!(w[0] < w[1]);
            }
            for (c, v) in cols.iter().zip(vals) {
                prop_assert_eq!(dense[r * nc + c].to_bits(), v.to_bits());
                seen += 1;
            }
        }
        prop_assert_eq!(seen, m.nnz());
        // everything not stored is an exact zero in the dense image
        let stored: std::collections::BTreeSet<(usize, usize)> = (0..m.nrows())
            .flat_map(|r| m.row(r).0.iter().map(move |c| (r, *c)).collect::<Vec<_>>())
            .collect();
        for r in 0..m.nrows() {
            for c in 0..nc {
                if !stored.contains(&(r, c)) {
                    prop_assert_eq!(dense[r * nc + c], 0.0);
                }
            }
        }
    }

    #[test]
    fn transpose_is_an_involution(m in csr_strategy(14)) {
        let tt = m.transpose().transpose();
        prop_assert_eq!(m.row_offsets(), tt.row_offsets());
        prop_assert_eq!(m.col_indices(), tt.col_indices());
        for (a, b) in m.values().iter().zip(tt.values()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn spmv_is_independent_of_strip_count(
        m in csr_strategy(16),
        seed in any::<u64>(),
        nstrips in 1usize..9,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..m.ncols()).map(|_| rng.random::<f64>() - 0.5).collect();

        let reference = StripPartition::for_csr(&m, 1);
        let mut y1 = vec![0.0; m.nrows()];
        m.spmv_into(&x, &mut y1, &reference);

        let strips = StripPartition::for_csr(&m, nstrips);
        let mut y = vec![0.0; m.nrows()];
        m.spmv_into(&x, &mut y, &strips);

        // bitwise: each row is a sequential dot regardless of partitioning
        for (a, b) in y1.iter().zip(&y) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn partition_covers_every_row_exactly_once(
        weights in prop::collection::vec(0usize..40, 1..60),
        nstrips in 1usize..10,
    ) {
        let part = StripPartition::balanced(&weights, nstrips);
        let mut next = 0;
        for r in part.ranges() {
            prop_assert_eq!(r.start, next);
            prop_assert!(r.end >= r.start);
            next = r.end;
        }
        prop_assert_eq!(next, weights.len());
        prop_assert!(part.nstrips() >= 1);
    }

    #[test]
    fn blockdiag_agrees_with_flattened_csr(
        sizes in prop::collection::vec(1usize..7, 1..6),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let blocks: Vec<CsrMatrix> = sizes
            .iter()
            .map(|&s| {
                let mut t = Vec::new();
                for i in 0..s {
                    for j in 0..s {
                        if i == j || rng.random::<f64>() < 0.5 {
                            t.push((i, j, rng.random::<f64>() - 0.5));
                        }
                    }
                }
                CsrMatrix::from_triplets(s, s, &t).unwrap()
            })
            .collect();
        let bd = BlockDiagMatrix::new(blocks).unwrap();
        let flat = bd.to_csr();
        let n = bd.dim();
        prop_assert_eq!(flat.nrows(), n);
        prop_assert_eq!(flat.nnz(), bd.nnz());

        let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        let a = bd.spmv(&x);
        let b = flat.spmv(&x);
        for (u, v) in a.iter().zip(&b) {
            prop_assert_eq!(u.to_bits(), v.to_bits());
        }

        let back = BlockDiagMatrix::from_csr(&flat, bd.block_sizes()).unwrap();
        prop_assert_eq!(back.to_csr().to_dense(), flat.to_dense());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn matrix_market_roundtrip_is_bitwise(m in csr_strategy(12)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.mtx");
        write_matrix_market(&m, &path).unwrap();
        let back = read_matrix_market(&path).unwrap();
        prop_assert_eq!(back.nrows(), m.nrows());
        prop_assert_eq!(back.ncols(), m.ncols());
        prop_assert_eq!(back.row_offsets(), m.row_offsets());
        prop_assert_eq!(back.col_indices(), m.col_indices());
        for (a, b) in m.values().iter().zip(back.values()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn vector_file_roundtrip_is_bitwise(v in prop::collection::vec(-1e12..1e12f64, 0..50)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.txt");
        write_vector(&v, &path).unwrap();
        let back = read_vector(&path).unwrap();
        prop_assert_eq!(back.len(), v.len());
        for (a, b) in v.iter().zip(&back) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn block_structure_roundtrip(sizes in prop::collection::vec(1usize..1000, 1..40)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("blocks.txt");
        write_block_structure(&sizes, &path).unwrap();
        prop_assert_eq!(read_block_structure(&path).unwrap(), sizes);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn pcg_converges_on_random_spd(n in 4usize..40, seed in any::<u64>()) {
        let m = random_spd_csr(n, seed);
        let op = CsrOperator::new(m.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xb0b);
        let b: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        let cfg = SolveConfig { tol: 1e-12, max_iters: 10 * n, record_history: true };
        let (x, report) = pcg_solve(&op, None, &b, &cfg).unwrap();
        prop_assert!(report.converged);
        prop_assert!(report.final_relres <= 1e-12);
        prop_assert_eq!(report.history.len(), report.iters + 1);
        prop_assert_eq!(report.history[0], 1.0);

        // recomputed residual, not the recursive one
        let r = m.spmv(&x);
        let num: f64 = r.iter().zip(&b).map(|(ri, bi)| (ri - bi) * (ri - bi)).sum::<f64>().sqrt();
        let den: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        if den > 0.0 {
            prop_assert!(num / den <= 1e-9);
        }

        // one matvec per iteration, three dots per iteration, small setup slack
        prop_assert!(report.mvp >= report.iters as u64);
        prop_assert!(report.mvp <= report.iters as u64 + 3);
        prop_assert!(report.ddot >= 3 * report.iters as u64);
        prop_assert!(report.ddot <= 3 * report.iters as u64 + 3);
    }

    #[test]
    fn poly_apply_on_diagonal_matches_scalar_map(
        alpha in 0.01..10.0f64,
        log_ratio in 0.1..4.0f64,
        xi in prop_oneof![Just(0.0), 1e-6..1e-2f64],
        nlev in 0usize..5,
        seed in any::<u64>(),
    ) {
        let beta = alpha * 10f64.powf(log_ratio);
        let bounds = SpectralBounds::new(alpha, beta, xi).unwrap();
        let n = 12;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut d: Vec<f64> = (0..n).map(|_| alpha + (beta - alpha) * rng.random::<f64>()).collect();
        d[0] = alpha;
        d[n - 1] = beta;
        let op = DiagOperator::new(d.clone());
        let r: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();

        for prec in [
            PolyPreconditioner::newton(&bounds, nlev).unwrap(),
            PolyPreconditioner::newton_ladder(&bounds, nlev).unwrap(),
            PolyPreconditioner::chebyshev(&bounds, 2 * nlev).unwrap(),
        ] {
            let y = prec.apply(&op, &r);
            for i in 0..n {
                let want = prec.eval_applied(d[i]) / d[i] * r[i];
                let scale = want.abs().max(1e-300);
                prop_assert!(
                    (y[i] - want).abs() / scale <= 1e-11,
                    "variant {:?} degree {} entry {}: {} vs {}",
                    prec.variant(), prec.degree(), i, y[i], want
                );
            }
        }
    }

    #[test]
    fn mapped_spectrum_stays_positive_and_bounded(
        alpha in 0.01..10.0f64,
        log_ratio in 0.1..5.0f64,
        xi in prop_oneof![Just(0.0), 1e-6..1e-2f64],
        nlev in 1usize..7,
    ) {
        let beta = alpha * 10f64.powf(log_ratio);
        let bounds = SpectralBounds::new(alpha, beta, xi).unwrap();
        let ladder = PolyPreconditioner::newton_ladder(&bounds, nlev).unwrap();
        let cheb = PolyPreconditioner::chebyshev(&bounds, (1 << nlev) - 1).unwrap();
        for k in 0..=64 {
            let lam = alpha + (beta - alpha) * (k as f64) / 64.0;
            let nu = ladder.eval_scalar(lam);
            // normalized Newton iterate lives in (0, 1] once a level ran
            prop_assert!(nu > 0.0 && nu <= 1.0 + 1e-12, "nu({lam}) = {nu}");
            prop_assert!(ladder.eval_applied(lam) > 0.0);
            // the shifted Chebyshev residual stays below one on the spectrum
            prop_assert!(cheb.eval_applied(lam) > 0.0, "cheb map at {lam}");
        }
    }
}

#[test]
fn zero_rhs_short_circuits() {
    let op = DiagOperator::ramp(50);
    let b = vec![0.0; 50];
    let cfg = SolveConfig::default();
    let (x, report) = pcg_solve(&op, None, &b, &cfg).unwrap();
    assert!(report.converged);
    assert_eq!(report.iters, 0);
    assert!(x.iter().all(|v| *v == 0.0));
}

#[test]
fn symmetry_probe_separates_symmetric_from_skewed() {
    let sym = CsrOperator::new(random_spd_csr(30, 7)).unwrap();
    assert!(probe_symmetry(&sym, 5) <= 1e-13);

    let mut triplets = vec![(0usize, 1usize, 3.0), (1, 0, -3.0)];
    for i in 0..30 {
        triplets.push((i, i, 2.0));
    }
    let skew = CsrOperator::new(CsrMatrix::from_triplets(30, 30, &triplets).unwrap());
    // constructor inspects values, so a frankly nonsymmetric matrix is
    // still constructible; the probe must expose it
    let skew = skew.unwrap();
    assert!(probe_symmetry(&skew, 5) > 1e-3);
}

#[test]
fn csr_rejects_malformed_triplets() {
    assert!(CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 0, 2.0)]).is_err());
    assert!(CsrMatrix::from_triplets(2, 2, &[(2, 0, 1.0)]).is_err());
    assert!(CsrMatrix::from_triplets(2, 2, &[(0, 5, 1.0)]).is_err());
}

#[test]
fn solve_config_validation_rejects_junk() {
    let op = DiagOperator::ramp(4);
    let b = vec![1.0; 4];
    let bad_tol = SolveConfig { tol: 0.0, ..SolveConfig::default() };
    assert!(pcg_solve(&op, None, &b, &bad_tol).is_err());
    let bad_iters = SolveConfig { max_iters: 0, ..SolveConfig::default() };
    assert!(pcg_solve(&op, None, &b, &bad_iters).is_err());
    let short_rhs = SolveConfig::default();
    assert!(pcg_solve(&op, None, &[1.0; 3], &short_rhs).is_err());
}
