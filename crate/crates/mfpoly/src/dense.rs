//! Small dense symmetric factorization. Covers the projected p x p
//! systems of the low-rank correction (p <= 50) and fracture blocks up
//! to the dense cutoff; anything larger goes through the envelope
//! factorization in the dfn module.

use crate::error::Error;

/// Lower Cholesky factor stored row-major, full n x n.
#[derive(Debug, Clone)]
pub struct DenseChol {
    n: usize,
    l: Vec<f64>,
}

impl DenseChol {
    /// Factor a symmetric positive definite matrix given row-major.
    /// Only the lower triangle is read.
    pub fn factor(a: &[f64], n: usize) -> Result<Self, Error> {
        assert_eq!(a.len(), n * n, "dense factor input size");
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = a[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if s <= 0.0 || !s.is_finite() {
                        return Err(Error::NotPositiveDefinite(format!(
                            "pivot {s:.3e} at column {j}"
                        )));
                    }
                    l[i * n + j] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Ok(Self { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solve L L^T x = b in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        for i in 0..self.n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l[i * self.n + k] * b[k];
            }
            b[i] = s / self.l[i * self.n + i];
        }
        for i in (0..self.n).rev() {
            let mut s = b[i];
            for k in i + 1..self.n {
                s -= self.l[k * self.n + i] * b[k];
            }
            b[i] = s / self.l[i * self.n + i];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}
