//! On-disk layout for a block system: one directory holding
//!
//! ```text
//! A.mtx   A.blk    fracture stiffness, block sizes
//! Gh.mtx  Gh.blk   fracture-local SPSD part
//! Gu.mtx           global trace matrix
//! B.mtx            full coupling (B = C + E)
//! C.mtx   C.blk    fracture-local coupling, trace column block sizes
//! alpha.txt        scalar coupling weight
//! q.vec            right-hand side, one value per line
//! ```
//!
//! Matrices are MatrixMarket coordinate files; `.blk` sidecars carry one
//! block size per line. Loading re-validates the full system contract.

use std::fs;
use std::path::Path;

use crate::dfn::DfnBlockSystem;
use crate::sparse::{
    read_block_structure, read_matrix_market, read_vector, write_block_structure,
    write_matrix_market, write_vector, BlockDiagMatrix,
};
use crate::{Error, Result};

const FILE_A: &str = "A.mtx";
const FILE_A_BLK: &str = "A.blk";
const FILE_GH: &str = "Gh.mtx";
const FILE_GH_BLK: &str = "Gh.blk";
const FILE_GU: &str = "Gu.mtx";
const FILE_B: &str = "B.mtx";
const FILE_C: &str = "C.mtx";
const FILE_C_BLK: &str = "C.blk";
const FILE_ALPHA: &str = "alpha.txt";
const FILE_Q: &str = "q.vec";

pub fn save_system(dir: impl AsRef<Path>, sys: &DfnBlockSystem) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.display().to_string(),
        source: e,
    })?;
    write_matrix_market(&sys.a().to_csr(), dir.join(FILE_A))?;
    write_block_structure(sys.a().block_sizes(), dir.join(FILE_A_BLK))?;
    write_matrix_market(&sys.gh().to_csr(), dir.join(FILE_GH))?;
    write_block_structure(sys.gh().block_sizes(), dir.join(FILE_GH_BLK))?;
    write_matrix_market(sys.gu(), dir.join(FILE_GU))?;
    write_matrix_market(sys.b(), dir.join(FILE_B))?;
    write_matrix_market(sys.c(), dir.join(FILE_C))?;
    write_block_structure(sys.c_col_blocks(), dir.join(FILE_C_BLK))?;
    let alpha_path = dir.join(FILE_ALPHA);
    fs::write(&alpha_path, format!("{:.17e}\n", sys.alpha())).map_err(|e| Error::Io {
        path: alpha_path.display().to_string(),
        source: e,
    })?;
    write_vector(sys.q(), dir.join(FILE_Q))?;
    Ok(())
}

pub fn load_system(dir: impl AsRef<Path>) -> Result<DfnBlockSystem> {
    let dir = dir.as_ref();
    let a_csr = read_matrix_market(dir.join(FILE_A))?;
    let a_sizes = read_block_structure(dir.join(FILE_A_BLK))?;
    let a = BlockDiagMatrix::from_csr(&a_csr, &a_sizes)?;
    let gh_csr = read_matrix_market(dir.join(FILE_GH))?;
    let gh_sizes = read_block_structure(dir.join(FILE_GH_BLK))?;
    let gh = BlockDiagMatrix::from_csr(&gh_csr, &gh_sizes)?;
    let gu = read_matrix_market(dir.join(FILE_GU))?;
    let b = read_matrix_market(dir.join(FILE_B))?;
    let c = read_matrix_market(dir.join(FILE_C))?;
    let c_blocks = read_block_structure(dir.join(FILE_C_BLK))?;
    let alpha = read_scalar(&dir.join(FILE_ALPHA))?;
    let q = read_vector(dir.join(FILE_Q))?;
    DfnBlockSystem::new(a, gh, gu, b, c, c_blocks, alpha, q)
}

fn read_scalar(path: &Path) -> Result<f64> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    for (idx, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') || t.starts_with('#') {
            continue;
        }
        return t.parse().map_err(|_| Error::Parse {
            path: path.display().to_string(),
            line: idx + 1,
            msg: "expected one real value".into(),
        });
    }
    Err(Error::Parse {
        path: path.display().to_string(),
        line: 1,
        msg: "file holds no value".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dfn::generate_synthetic;
    use crate::dfn::testutil::unit_system;

    #[test]
    fn roundtrip_preserves_unit_system() {
        let dir = tempfile::tempdir().unwrap();
        let sys = unit_system(1.0, 1.0);
        save_system(dir.path(), &sys).unwrap();
        let back = load_system(dir.path()).unwrap();
        assert_eq!(back.nh(), 1);
        assert_eq!(back.nu(), 1);
        assert_eq!(back.alpha(), 1.0);
        assert_eq!(back.q(), &[1.0]);
    }

    #[test]
    fn roundtrip_is_bit_exact_on_synthetic() {
        let dir = tempfile::tempdir().unwrap();
        let sys = generate_synthetic(3, 5, 0.4, 1.0, 99).unwrap();
        save_system(dir.path(), &sys).unwrap();
        let back = load_system(dir.path()).unwrap();
        assert_eq!(sys.alpha(), back.alpha());
        assert_eq!(sys.q(), back.q());
        let (m1, m2) = (sys.gu(), back.gu());
        assert_eq!(m1.values(), m2.values());
        assert_eq!(m1.col_indices(), m2.col_indices());
        let (b1, b2) = (sys.b(), back.b());
        assert_eq!(b1.values(), b2.values());
        let (a1, a2) = (sys.a().to_csr(), back.a().to_csr());
        assert_eq!(a1.values(), a2.values());
        assert_eq!(sys.c_col_blocks(), back.c_col_blocks());
    }

    #[test]
    fn missing_file_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_system(dir.path()).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
