//! MatrixMarket coordinate I/O (real, general or symmetric) plus the
//! block-structure sidecar format: one positive block size per line.

use crate::error::Error;
use crate::sparse::csr::CsrMatrix;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<CsrMatrix, Error> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut lines = BufReader::new(file).lines().enumerate();

    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "empty file"))?;
    let header = header.map_err(|e| io_err(path, e))?;
    let h: Vec<String> = header.split_whitespace().map(|t| t.to_lowercase()).collect();
    if h.len() < 4 || h[0] != "%%matrixmarket" || h[1] != "matrix" || h[2] != "coordinate" {
        return Err(parse_err(path, 1, format!("unsupported header: {header}")));
    }
    if h[3] != "real" && h[3] != "integer" {
        return Err(parse_err(path, 1, format!("unsupported field type {}", h[3])));
    }
    let symmetric = match h.get(4).map(|s| s.as_str()) {
        Some("general") | None => false,
        Some("symmetric") => true,
        Some(other) => return Err(parse_err(path, 1, format!("unsupported symmetry {other}"))),
    };

    let mut dims: Option<(usize, usize, usize)> = None;
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    for (idx, line) in lines {
        let line = line.map_err(|e| io_err(path, e))?;
        let lineno = idx + 1;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let toks: Vec<&str> = t.split_whitespace().collect();
        match dims {
            None => {
                if toks.len() != 3 {
                    return Err(parse_err(path, lineno, "size line needs nrows ncols nnz"));
                }
                let nrows: usize = toks[0]
                    .parse()
                    .map_err(|_| parse_err(path, lineno, "bad nrows"))?;
                let ncols: usize = toks[1]
                    .parse()
                    .map_err(|_| parse_err(path, lineno, "bad ncols"))?;
                let nnz: usize = toks[2]
                    .parse()
                    .map_err(|_| parse_err(path, lineno, "bad nnz"))?;
                if symmetric && nrows != ncols {
                    return Err(parse_err(path, lineno, "symmetric matrix must be square"));
                }
                dims = Some((nrows, ncols, nnz));
                triplets.reserve(if symmetric { 2 * nnz } else { nnz });
            }
            Some((nrows, ncols, _)) => {
                if toks.len() != 3 {
                    return Err(parse_err(path, lineno, "entry line needs row col value"));
                }
                let r: usize = toks[0]
                    .parse()
                    .map_err(|_| parse_err(path, lineno, "bad row index"))?;
                let c: usize = toks[1]
                    .parse()
                    .map_err(|_| parse_err(path, lineno, "bad col index"))?;
                let v: f64 = toks[2]
                    .parse()
                    .map_err(|_| parse_err(path, lineno, "bad value"))?;
                if r < 1 || r > nrows || c < 1 || c > ncols {
                    return Err(parse_err(path, lineno, format!("index ({r}, {c}) out of bounds")));
                }
                if symmetric && c > r {
                    return Err(parse_err(
                        path,
                        lineno,
                        "symmetric file must store the lower triangle",
                    ));
                }
                triplets.push((r - 1, c - 1, v));
                if symmetric && r != c {
                    triplets.push((c - 1, r - 1, v));
                }
            }
        }
    }
    let (nrows, ncols, nnz) = dims.ok_or_else(|| parse_err(path, 1, "missing size line"))?;
    let stored = if symmetric {
        triplets.iter().filter(|t| t.0 <= t.1).count()
    } else {
        triplets.len()
    };
    if stored != nnz {
        return Err(parse_err(
            path,
            0,
            format!("size line promised {nnz} entries, found {stored}"),
        ));
    }
    CsrMatrix::from_triplets(nrows, ncols, &triplets)
}

/// Writes general coordinate format (full storage, 1-based indices).
pub fn write_matrix_market(m: &CsrMatrix, path: impl AsRef<Path>) -> Result<(), Error> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    (|| -> std::io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", m.nrows(), m.ncols(), m.nnz())?;
        for r in 0..m.nrows() {
            let (cols, vals) = m.row(r);
            for (c, v) in cols.iter().zip(vals) {
                writeln!(w, "{} {} {:.17e}", r + 1, c + 1, v)?;
            }
        }
        w.flush()
    })()
    .map_err(|e| io_err(path, e))
}

pub fn read_block_structure(path: impl AsRef<Path>) -> Result<Vec<usize>, Error> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut sizes = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') || t.starts_with('#') {
            continue;
        }
        let s: i64 = t
            .parse()
            .map_err(|_| parse_err(path, idx + 1, "expected one integer block size"))?;
        if s <= 0 {
            return Err(parse_err(path, idx + 1, format!("non-positive block size {s}")));
        }
        sizes.push(s as usize);
    }
    if sizes.is_empty() {
        return Err(parse_err(path, 1, "no block sizes found"));
    }
    Ok(sizes)
}

pub fn write_block_structure(sizes: &[usize], path: impl AsRef<Path>) -> Result<(), Error> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    (|| -> std::io::Result<()> {
        for s in sizes {
            writeln!(w, "{s}")?;
        }
        w.flush()
    })()
    .map_err(|e| io_err(path, e))
}

/// Plain vector file: one value per line, `%`/`#` comments allowed.
pub fn read_vector(path: impl AsRef<Path>) -> Result<Vec<f64>, Error> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut v = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') || t.starts_with('#') {
            continue;
        }
        let x: f64 = t
            .parse()
            .map_err(|_| parse_err(path, idx + 1, "expected one real value"))?;
        if !x.is_finite() {
            return Err(parse_err(path, idx + 1, format!("non-finite value {x}")));
        }
        v.push(x);
    }
    Ok(v)
}

pub fn write_vector(v: &[f64], path: impl AsRef<Path>) -> Result<(), Error> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    (|| -> std::io::Result<()> {
        for x in v {
            writeln!(w, "{x:.17e}")?;
        }
        w.flush()
    })()
    .map_err(|e| io_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn reads_identity() {
        let f = write_tmp(
            "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n2 2 1.0\n",
        );
        let m = read_matrix_market(f.path()).unwrap();
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.spmv(&[3.0, 4.0]), vec![3.0, 4.0]);
    }

    #[test]
    fn expands_symmetric_lower_triangle() {
        let f = write_tmp(
            "%%MatrixMarket matrix coordinate real symmetric\n2 2 3\n1 1 2.0\n2 1 1.0\n2 2 2.0\n",
        );
        let m = read_matrix_market(f.path()).unwrap();
        assert_eq!(m.nnz(), 4);
        assert_eq!(m.spmv(&[1.0, 1.0]), vec![3.0, 3.0]);
    }

    #[test]
    fn rejects_duplicates() {
        let f = write_tmp(
            "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n1 1 2.0\n",
        );
        assert!(read_matrix_market(f.path()).is_err());
    }

    #[test]
    fn rejects_out_of_bounds() {
        let f = write_tmp("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n");
        assert!(read_matrix_market(f.path()).is_err());
    }

    #[test]
    fn rejects_bad_header() {
        let f = write_tmp("%%MatrixMarket matrix array real general\n2 2\n1.0\n1.0\n");
        assert!(read_matrix_market(f.path()).is_err());
    }

    #[test]
    fn block_structure_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sizes.blk");
        write_block_structure(&[3, 5, 2], &p).unwrap();
        assert_eq!(read_block_structure(&p).unwrap(), vec![3, 5, 2]);
    }

    #[test]
    fn block_structure_rejects_nonpositive() {
        let f = write_tmp("3\n0\n");
        assert!(read_block_structure(f.path()).is_err());
    }
}
