use serde::{Deserialize, Serialize};

use super::model::{GaussianBelief, LinearSystem};
use crate::error::{ensure_dims, Result};
use crate::mathcore::{block_diag_repeat, serde_mat, Matrix, SpdMatrix, Vector};

/// Multi-step predictor `x_k = G_{0,k} x_0 + G_{u,k} u_{[0,k-1]} + G_{w,k} w_{[0,k-1]}`
/// for `k = 1..=horizon`. Index `k - 1` of each vector holds step `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiStepModel {
    pub n: usize,
    pub m: usize,
    pub q: usize,
    #[serde(with = "serde_mat::matrices")]
    pub g0: Vec<Matrix>,
    #[serde(with = "serde_mat::matrices")]
    pub gu: Vec<Matrix>,
    #[serde(with = "serde_mat::matrices")]
    pub gw: Vec<Matrix>,
    pub sigma_w: SpdMatrix,
}

impl MultiStepModel {
    /// Condenses the state-space recursion over `horizon` steps.
    pub fn from_system(sys: &LinearSystem, horizon: usize) -> Self {
        let (n, m, q) = (sys.n(), sys.m(), sys.q());
        let mut g0 = Vec::with_capacity(horizon);
        let mut gu = Vec::with_capacity(horizon);
        let mut gw = Vec::with_capacity(horizon);
        let mut g0k = Matrix::identity(n, n);
        let mut guk = Matrix::zeros(n, 0);
        let mut gwk = Matrix::zeros(n, 0);
        for k in 1..=horizon {
            g0k = &sys.a * g0k;
            // G_{u,k+1} = [A G_{u,k}, B]
            let mut next_u = Matrix::zeros(n, k * m);
            next_u.view_mut((0, 0), (n, (k - 1) * m)).copy_from(&(&sys.a * &guk));
            next_u.view_mut((0, (k - 1) * m), (n, m)).copy_from(&sys.b);
            guk = next_u;
            let mut next_w = Matrix::zeros(n, k * q);
            next_w.view_mut((0, 0), (n, (k - 1) * q)).copy_from(&(&sys.a * &gwk));
            next_w.view_mut((0, (k - 1) * q), (n, q)).copy_from(&sys.e);
            gwk = next_w;
            g0.push(g0k.clone());
            gu.push(guk.clone());
            gw.push(gwk.clone());
        }
        MultiStepModel { n, m, q, g0, gu, gw, sigma_w: sys.sigma_w.clone() }
    }

    /// Assembles a model from per-step matrices (e.g. identified predictors).
    pub fn from_parts(g0: Vec<Matrix>, gu: Vec<Matrix>, gw: Vec<Matrix>, sigma_w: SpdMatrix) -> Result<Self> {
        let horizon = g0.len();
        ensure_dims(gu.len() == horizon && gw.len() == horizon, || {
            "per-step matrix lists differ in length".into()
        })?;
        let n = g0.first().map(|g| g.nrows()).unwrap_or(0);
        let m = gu.first().map(|g| g.ncols()).unwrap_or(0);
        let q = sigma_w.dim();
        for k in 1..=horizon {
            let (a, b, c) = (&g0[k - 1], &gu[k - 1], &gw[k - 1]);
            ensure_dims(a.shape() == (n, n), || format!("G_0,{k} has shape {:?}", a.shape()))?;
            ensure_dims(b.shape() == (n, k * m), || format!("G_u,{k} has shape {:?}", b.shape()))?;
            ensure_dims(c.shape() == (n, k * q), || format!("G_w,{k} has shape {:?}", c.shape()))?;
        }
        Ok(MultiStepModel { n, m, q, g0, gu, gw, sigma_w })
    }

    pub fn horizon(&self) -> usize {
        self.g0.len()
    }

    pub fn g0(&self, k: usize) -> &Matrix {
        &self.g0[k - 1]
    }

    pub fn gu(&self, k: usize) -> &Matrix {
        &self.gu[k - 1]
    }

    pub fn gw(&self, k: usize) -> &Matrix {
        &self.gw[k - 1]
    }

    /// `G_{w,k} diag_k(Σ_w) G_{w,k}ᵀ`.
    pub fn disturbance_cov(&self, k: usize) -> Matrix {
        let gw = self.gw(k);
        gw * block_diag_repeat(self.sigma_w.as_matrix(), k) * gw.transpose()
    }

    /// `Σ_{x,k} = G_{0,k} Σ_{x,0} G_{0,k}ᵀ + G_{w,k} diag_k(Σ_w) G_{w,k}ᵀ`.
    pub fn state_cov(&self, k: usize, cov0: &Matrix) -> Matrix {
        let g0 = self.g0(k);
        g0 * cov0 * g0.transpose() + self.disturbance_cov(k)
    }

    /// Noise-free mean `G_{0,k} x̄_0 + G_{u,k} u_{[0,k-1]}`.
    pub fn mean(&self, k: usize, x0: &Vector, inputs: &[Vector]) -> Vector {
        self.g0(k) * x0 + self.gu(k) * stack_inputs(&inputs[..k])
    }
}

/// Stacks `u_0, …, u_{k-1}` into one vector.
pub fn stack_inputs(inputs: &[Vector]) -> Vector {
    let refs: Vec<&Vector> = inputs.iter().collect();
    crate::mathcore::vstack_vectors(&refs)
}

/// Mean/covariance recursion `x̄_{k+1} = A x̄_k + B u_k`, `Σ_{k+1} = A Σ_k Aᵀ + E Σ_w Eᵀ`.
pub fn propagate_moments_statespace(
    sys: &LinearSystem,
    init: &GaussianBelief,
    inputs: &[Vector],
) -> Result<Vec<GaussianBelief>> {
    ensure_dims(init.dim() == sys.n(), || "initial belief dimension".into())?;
    ensure_dims(inputs.iter().all(|u| u.len() == sys.m()), || "input dimension".into())?;
    let w = sys.process_noise();
    let mut out = Vec::with_capacity(inputs.len() + 1);
    let mut mean = init.mean.clone();
    let mut cov = init.cov.as_matrix().clone();
    out.push(init.clone());
    for u in inputs {
        mean = &sys.a * &mean + &sys.b * u;
        cov = &sys.a * &cov * sys.a.transpose() + &w;
        cov = (&cov + cov.transpose()) * 0.5;
        out.push(GaussianBelief { mean: mean.clone(), cov: SpdMatrix::new(cov.clone())? });
    }
    Ok(out)
}

/// Moments obtained directly from the multi-step predictor for `k = 0..=len(inputs)`.
pub fn propagate_moments_multistep(
    model: &MultiStepModel,
    init: &GaussianBelief,
    inputs: &[Vector],
) -> Result<Vec<GaussianBelief>> {
    ensure_dims(init.dim() == model.n, || "initial belief dimension".into())?;
    ensure_dims(model.horizon() >= inputs.len(), || {
        format!("model horizon {} shorter than {} inputs", model.horizon(), inputs.len())
    })?;
    ensure_dims(inputs.iter().all(|u| u.len() == model.m), || "input dimension".into())?;
    let mut out = Vec::with_capacity(inputs.len() + 1);
    out.push(init.clone());
    for k in 1..=inputs.len() {
        let mean = model.mean(k, &init.mean, inputs);
        let cov = crate::mathcore::linalg::symmetrize(&model.state_cov(k, init.cov.as_matrix()));
        out.push(GaussianBelief { mean, cov: SpdMatrix::new(cov)? });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mathcore::Rng;
    use crate::system::random_system;

    #[test]
    fn first_and_second_step_blocks() {
        let mut rng = Rng::new(1, 0);
        let sys = random_system(3, 2, 2, 0.9, &mut rng);
        let ms = MultiStepModel::from_system(&sys, 3);
        assert_eq!(ms.g0(1), &sys.a);
        assert_eq!(ms.gu(1), &sys.b);
        assert_eq!(ms.gw(1), &sys.e);
        let ab = &sys.a * &sys.b;
        assert!((ms.gu(2).columns(0, 2) - ab).amax() < 1e-15);
        assert_eq!(ms.gu(2).columns(2, 2), sys.b.columns(0, 2));
    }

    #[test]
    fn condensing_identity() {
        let mut rng = Rng::new(2, 0);
        let sys = random_system(3, 2, 1, 0.95, &mut rng);
        let ms = MultiStepModel::from_system(&sys, 6);
        for k in 1..6 {
            let next = &sys.a * ms.g0(k);
            assert!((ms.g0(k + 1) - next).amax() <= 1e-12 * ms.g0(k + 1).amax().max(1.0));
            let au = &sys.a * ms.gu(k);
            assert!((ms.gu(k + 1).columns(0, k * 2) - au).amax() < 1e-12);
        }
    }

    #[test]
    fn scalar_variance_geometric_sum() {
        let a = 0.7;
        let sigma2 = 0.3;
        let sys = LinearSystem::new(
            Matrix::from_element(1, 1, a),
            Matrix::from_element(1, 1, 1.0),
            Matrix::from_element(1, 1, 1.0),
            SpdMatrix::from_diagonal(&[sigma2]).unwrap(),
            SpdMatrix::zeros(1),
        )
        .unwrap();
        let init = GaussianBelief::new(Vector::from_element(1, 1.0), SpdMatrix::from_diagonal(&[2.0]).unwrap()).unwrap();
        let inputs = vec![Vector::zeros(1); 6];
        let seq = propagate_moments_statespace(&sys, &init, &inputs).unwrap();
        for (k, b) in seq.iter().enumerate() {
            let geo: f64 = (0..k).map(|i| a.powi(2 * i as i32)).sum();
            let expect = a.powi(2 * k as i32) * 2.0 + sigma2 * geo;
            assert!((b.cov.as_matrix()[(0, 0)] - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn deterministic_system_zero_covariance() {
        let mut rng = Rng::new(5, 0);
        let mut sys = random_system(2, 1, 2, 0.8, &mut rng);
        sys.sigma_w = SpdMatrix::zeros(2);
        let init = GaussianBelief::deterministic(Vector::from_column_slice(&[1.0, -1.0]));
        let inputs = vec![Vector::from_element(1, 0.5); 4];
        for b in propagate_moments_statespace(&sys, &init, &inputs).unwrap() {
            assert_eq!(b.cov.as_matrix().amax(), 0.0);
        }
    }

    #[test]
    fn two_propagation_routes_agree() {
        let mut rng = Rng::new(8, 0);
        for _ in 0..10 {
            let sys = random_system(3, 2, 2, 0.99, &mut rng);
            let init = GaussianBelief::new(rng.standard_normal_vector(3), SpdMatrix::from_diagonal(&[0.3, 0.1, 0.2]).unwrap()).unwrap();
            let inputs: Vec<Vector> = (0..7).map(|_| rng.standard_normal_vector(2)).collect();
            let ss = propagate_moments_statespace(&sys, &init, &inputs).unwrap();
            let model = MultiStepModel::from_system(&sys, 7);
            let ms = propagate_moments_multistep(&model, &init, &inputs).unwrap();
            for (a, b) in ss.iter().zip(&ms) {
                assert!((&a.mean - &b.mean).amax() < 1e-10);
                assert!((a.cov.as_matrix() - b.cov.as_matrix()).amax() < 1e-10);
            }
        }
    }

    #[test]
    fn fir_mean_ignores_initial_state() {
        // nilpotent A: A² = 0
        let sys = LinearSystem::new(
            Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
            Matrix::from_row_slice(2, 1, &[0.0, 1.0]),
            Matrix::identity(2, 2),
            SpdMatrix::identity(2),
            SpdMatrix::zeros(2),
        )
        .unwrap();
        let model = MultiStepModel::from_system(&sys, 3);
        assert_eq!(model.g0(3).amax(), 0.0);
        let inputs = vec![Vector::from_element(1, 1.0); 3];
        let m1 = model.mean(3, &Vector::from_column_slice(&[5.0, 5.0]), &inputs);
        let m2 = model.mean(3, &Vector::zeros(2), &inputs);
        assert_eq!(m1, m2);
    }
}
