//! Cholesky factorization of symmetric banded matrices.

use super::{Matrix, Vector};

/// Lower factor `L` of a symmetric positive definite matrix with half
/// bandwidth `bw`; row `i` stores columns `i - bw ..= i`.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    dim: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandCholesky {
    /// Factors `a`, reading only entries within `bw` of the diagonal.
    /// Returns `None` on a nonpositive pivot.
    pub fn new(a: &Matrix, bw: usize) -> Option<Self> {
        let dim = a.nrows();
        let bw = bw.min(dim.saturating_sub(1));
        let w = bw + 1;
        let mut data = vec![0.0; dim * w];
        for i in 0..dim {
            let lo_i = i.saturating_sub(bw);
            for j in lo_i..=i {
                let lo = lo_i.max(j.saturating_sub(bw));
                let mut s = a[(i, j)];
                for l in lo..j {
                    s -= data[i * w + (l + bw - i)] * data[j * w + (l + bw - j)];
                }
                if j == i {
                    if !(s > 0.0) {
                        return None;
                    }
                    data[i * w + bw] = s.sqrt();
                } else {
                    data[i * w + (j + bw - i)] = s / data[j * w + bw];
                }
            }
        }
        Some(BandCholesky { dim, bw, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn diagonal(&self) -> Vector {
        Vector::from_fn(self.dim, |i, _| self.data[i * (self.bw + 1) + self.bw])
    }

    /// `L⁻¹ x`, column by column.
    pub fn solve_lower(&self, x: &Matrix) -> Matrix {
        assert_eq!(x.nrows(), self.dim, "row count of the right-hand side");
        let w = self.bw + 1;
        let mut out = x.clone();
        for c in 0..x.ncols() {
            let mut col = out.column_mut(c);
            for i in 0..self.dim {
                let lo = i.saturating_sub(self.bw);
                let mut s = col[i];
                for l in lo..i {
                    s -= self.data[i * w + (l + self.bw - i)] * col[l];
                }
                col[i] = s / self.data[i * w + self.bw];
            }
        }
        out
    }

    /// Dense copy of `L`.
    pub fn unpack(&self) -> Matrix {
        let w = self.bw + 1;
        Matrix::from_fn(self.dim, self.dim, |i, j| {
            if j <= i && i - j <= self.bw {
                self.data[i * w + (j + self.bw - i)]
            } else {
                0.0
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mathcore::Rng;
    use nalgebra::Cholesky;

    fn banded_spd(dim: usize, bw: usize, rng: &mut Rng) -> Matrix {
        let mut a = Matrix::zeros(dim, dim);
        for i in 0..dim {
            for j in i.saturating_sub(bw)..i {
                let v = rng.standard_normal();
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
            a[(i, i)] = 2.0 * bw as f64 + 1.0 + rng.uniform();
        }
        a
    }

    #[test]
    fn matches_dense_cholesky() {
        let mut rng = Rng::new(5, 0);
        for &(dim, bw) in &[(1, 0), (7, 0), (9, 2), (12, 5), (6, 10)] {
            let a = banded_spd(dim, bw, &mut rng);
            let band = BandCholesky::new(&a, bw).unwrap();
            let dense = Cholesky::new(a.clone()).unwrap().unpack();
            assert!((band.unpack() - &dense).amax() < 1e-12);
            let x = Matrix::from_fn(dim, 3, |i, j| (i + 2 * j) as f64 - 1.5);
            let want = dense.solve_lower_triangular(&x).unwrap();
            assert!((band.solve_lower(&x) - want).amax() < 1e-10);
        }
    }

    #[test]
    fn rejects_indefinite() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(BandCholesky::new(&a, 1).is_none());
    }
}
