use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::linalg::{sym_sqrt, Matrix, SpdMatrix, Vector};
use crate::error::{ensure_dims, Result};

/// Counter-based random stream: `(master_seed, stream_index)` fully determines
/// the sequence, and distinct stream indices give independent ChaCha streams.
#[derive(Debug, Clone)]
pub struct Rng {
    master_seed: u64,
    stream_index: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(master_seed);
        inner.set_stream(stream_index);
        Rng {
            master_seed,
            stream_index,
            inner,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    /// A fresh stream under the same master seed.
    pub fn substream(&self, stream_index: u64) -> Rng {
        Rng::new(self.master_seed, stream_index)
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn standard_normal_vector(&mut self, n: usize) -> Vector {
        Vector::from_fn(n, |_, _| self.standard_normal())
    }
}

impl RngCore for Rng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }
    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }
}

/// Gaussian with a precomputed symmetric square-root factor, for repeated draws.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    mean: Vector,
    factor: Matrix,
}

impl GaussianSampler {
    pub fn new(mean: Vector, cov: &Matrix) -> Result<Self> {
        ensure_dims(cov.nrows() == mean.len() && cov.is_square(), || {
            format!(
                "mean length {} vs covariance {}x{}",
                mean.len(),
                cov.nrows(),
                cov.ncols()
            )
        })?;
        let factor = sym_sqrt(cov)?;
        Ok(GaussianSampler { mean, factor })
    }

    pub fn zero_mean(cov: &SpdMatrix) -> Self {
        GaussianSampler {
            mean: Vector::zeros(cov.dim()),
            factor: cov.sqrt(),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &Vector {
        &self.mean
    }

    pub fn sample(&self, rng: &mut Rng) -> Vector {
        let z = rng.standard_normal_vector(self.mean.len());
        &self.mean + &self.factor * z
    }
}

/// One draw of `mean + cov^{1/2} ζ` with `ζ` standard normal.
pub fn sample_gaussian(mean: &Vector, cov: &Matrix, rng: &mut Rng) -> Result<Vector> {
    Ok(GaussianSampler::new(mean.clone(), cov)?.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_stream_reproduces() {
        let mut a = Rng::new(11, 3);
        let mut b = Rng::new(11, 3);
        let mut c = Rng::new(11, 4);
        let xa: Vec<f64> = (0..5).map(|_| a.standard_normal()).collect();
        let xb: Vec<f64> = (0..5).map(|_| b.standard_normal()).collect();
        let xc: Vec<f64> = (0..5).map(|_| c.standard_normal()).collect();
        assert_eq!(xa, xb);
        assert_ne!(xa, xc);
    }

    #[test]
    fn zero_covariance_returns_mean() {
        let mean = Vector::from_column_slice(&[1.5, -2.0]);
        let mut rng = Rng::new(1, 0);
        let x = sample_gaussian(&mean, &Matrix::zeros(2, 2), &mut rng).unwrap();
        assert_eq!(x, mean);
    }

    #[test]
    fn indefinite_covariance_rejected() {
        let cov = Matrix::from_diagonal(&Vector::from_column_slice(&[1.0, -1.0]));
        assert!(sample_gaussian(&Vector::zeros(2), &cov, &mut Rng::new(0, 0)).is_err());
    }

    #[test]
    fn empirical_moments_match() {
        let cov = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let sampler = GaussianSampler::new(Vector::zeros(2), &cov).unwrap();
        let mut rng = Rng::new(5, 0);
        let n = 100_000;
        let draws: Vec<Vector> = (0..n).map(|_| sampler.sample(&mut rng)).collect();
        let mean = draws.iter().fold(Vector::zeros(2), |acc, x| acc + x) / n as f64;
        assert!(mean.amax() < 0.02);

        let cov2 = Matrix::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 0.5]);
        let sampler = GaussianSampler::new(Vector::zeros(2), &cov2).unwrap();
        let mut emp = Matrix::zeros(2, 2);
        for _ in 0..n {
            let x = sampler.sample(&mut rng);
            emp += &x * x.transpose();
        }
        emp /= n as f64;
        assert!((emp - &cov2).norm() / cov2.norm() < 0.05);
    }
}
