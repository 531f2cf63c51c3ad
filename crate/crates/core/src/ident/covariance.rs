use crate::error::{ensure_dims, Result};
use crate::mathcore::linalg::symmetrize;
use crate::mathcore::{Matrix, SpdMatrix};

use super::regression::Structure;

/// Covariance of the stacked residual `w̃_{[0,T-k]}`; block-banded with
/// nonzero blocks only up to lag `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualCovariance {
    pub k: usize,
    pub n: usize,
    pub matrix: Matrix,
}

impl ResidualCovariance {
    pub fn block(&self, row: usize, col: usize) -> Matrix {
        self.matrix.view((row * self.n, col * self.n), (self.n, self.n)).into_owned()
    }

    pub fn blocks(&self) -> usize {
        self.matrix.nrows().checked_div(self.n).unwrap_or(0)
    }
}

/// Assembles the residual covariance for `T - k + 1` stacked windows.
///
/// For the residual `w̃_j = G_{w,k} w_{[j,j+k-1]} - G_{0,k} ε_j + ε_{j+k}`:
/// - lag 0: `G_w diag_k(Σ_w) G_wᵀ + G_0 Σ_ε G_0ᵀ + Σ_ε`
/// - lag `i < k`: `G_w S_i G_wᵀ`, where `S_i` shifts `diag_{k-i}(Σ_w)` down by `i` blocks
/// - lag `k`: `-Σ_ε G_0ᵀ`
///
/// With [`Structure::Fir`] the `G_0` terms are dropped.
pub fn residual_covariance(
    gw: &Matrix,
    g0: &Matrix,
    sigma_w: &SpdMatrix,
    sigma_eps: &SpdMatrix,
    k: usize,
    t: usize,
    structure: Structure,
) -> Result<ResidualCovariance> {
    let n = gw.nrows();
    let q = sigma_w.dim();
    ensure_dims(gw.ncols() == k * q, || {
        format!("G_w has {} columns, expected k·q = {}", gw.ncols(), k * q)
    })?;
    ensure_dims(g0.shape() == (n, n), || format!("G_0 has shape {:?}", g0.shape()))?;
    ensure_dims(sigma_eps.dim() == n, || "Σ_ε dimension".into())?;
    ensure_dims(t >= k, || format!("T = {t} < k = {k}"))?;
    let nb = t - k + 1;
    let sw = sigma_w.as_matrix();
    let se = sigma_eps.as_matrix();
    let use_g0 = structure == Structure::Full;

    let mut lag_blocks = Vec::with_capacity(k + 1);
    let mut diag = Matrix::zeros(n, n);
    for i in 0..k {
        let gi = gw.columns(i * q, q);
        diag += gi * sw * gi.transpose();
    }
    diag += se;
    if use_g0 {
        diag += g0 * se * g0.transpose();
    }
    lag_blocks.push(symmetrize(&diag));
    for i in 1..k {
        // E[w_{[j..]} w_{[j+i..]}ᵀ]: block (a, b) is Σ_w when a = b + i
        let mut blk = Matrix::zeros(n, n);
        for b in 0..(k - i) {
            let ga = gw.columns((b + i) * q, q);
            let gb = gw.columns(b * q, q);
            blk += ga * sw * gb.transpose();
        }
        lag_blocks.push(blk);
    }
    if use_g0 {
        lag_blocks.push(-(se * g0.transpose()));
    } else {
        lag_blocks.push(Matrix::zeros(n, n));
    }

    let mut matrix = Matrix::zeros(n * nb, n * nb);
    for j in 0..nb {
        for (lag, blk) in lag_blocks.iter().enumerate() {
            let other = j + lag;
            if other >= nb {
                break;
            }
            matrix.view_mut((j * n, other * n), (n, n)).copy_from(blk);
            if lag > 0 {
                matrix.view_mut((other * n, j * n), (n, n)).copy_from(&blk.transpose());
            }
        }
    }
    Ok(ResidualCovariance { k, n, matrix })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mathcore::Rng;
    use crate::system::{random_system_with_noise, MultiStepModel};

    #[test]
    fn one_step_noise_free_measurements_block_diagonal() {
        let mut rng = Rng::new(1, 0);
        let sys = random_system_with_noise(2, 1, 2, 0.9, SpdMatrix::from_diagonal(&[0.3, 0.2]).unwrap(), SpdMatrix::zeros(2), &mut rng);
        let ms = MultiStepModel::from_system(&sys, 1);
        let rc = residual_covariance(ms.gw(1), ms.g0(1), &sys.sigma_w, &sys.sigma_eps, 1, 6, Structure::Full).unwrap();
        let w = sys.process_noise();
        for i in 0..rc.blocks() {
            for j in 0..rc.blocks() {
                let expect = if i == j { w.clone() } else { Matrix::zeros(2, 2) };
                assert!((rc.block(i, j) - expect).amax() < 1e-15);
            }
        }
    }

    #[test]
    fn fir_measurement_noise_only_is_diagonal() {
        let gw = Matrix::from_element(2, 6, 1.0);
        let se = SpdMatrix::from_diagonal(&[0.4, 0.9]).unwrap();
        let rc = residual_covariance(&gw, &Matrix::zeros(2, 2), &SpdMatrix::zeros(2), &se, 3, 8, Structure::Full).unwrap();
        let expect = crate::mathcore::block_diag_repeat(se.as_matrix(), 6);
        assert_eq!(rc.matrix, expect);
    }

    #[test]
    fn band_structure_and_symmetry() {
        let mut rng = Rng::new(2, 0);
        let sys = random_system_with_noise(2, 1, 2, 0.9, SpdMatrix::from_diagonal(&[0.3, 0.2]).unwrap(), SpdMatrix::from_diagonal(&[0.1, 0.05]).unwrap(), &mut rng);
        let ms = MultiStepModel::from_system(&sys, 3);
        let rc = residual_covariance(ms.gw(3), ms.g0(3), &sys.sigma_w, &sys.sigma_eps, 3, 12, Structure::Full).unwrap();
        assert_eq!(rc.matrix, rc.matrix.transpose());
        for i in 0..rc.blocks() {
            for j in 0..rc.blocks() {
                let lag = i.abs_diff(j);
                if lag > 3 {
                    assert_eq!(rc.block(i, j).amax(), 0.0);
                }
                if lag == 3 {
                    assert!(rc.block(i, j).amax() > 0.0);
                }
            }
        }
        assert!(SpdMatrix::new(rc.matrix.clone()).is_ok());
    }
}
