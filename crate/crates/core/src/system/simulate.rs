use std::io::{Read, Write};

use super::model::{GaussianBelief, LinearSystem};
use crate::error::{ensure_dims, Error, Result};
use crate::mathcore::{spectral_radius, GaussianSampler, Matrix, Rng, SpdMatrix, Vector};

/// Simulated experiment. Ground-truth noise realizations are kept so tests can
/// replay the recursion exactly; estimators only look at `measurements` and `inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<Vector>,
    pub measurements: Vec<Vector>,
    pub inputs: Vec<Vector>,
    pub disturbances: Vec<Vector>,
    pub noises: Vec<Vector>,
}

impl Trajectory {
    /// Number of transitions `T`.
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn n(&self) -> usize {
        self.states.first().map(|x| x.len()).unwrap_or(0)
    }

    pub fn m(&self) -> usize {
        self.inputs.first().map(|x| x.len()).unwrap_or(0)
    }

    pub fn q(&self) -> usize {
        self.disturbances.first().map(|x| x.len()).unwrap_or(0)
    }

    /// Replays `x_{k+1} = A x_k + B u_k + E w_k` from the stored `x_0` and noise.
    pub fn replay(&self, sys: &LinearSystem) -> Vec<Vector> {
        let mut xs = vec![self.states[0].clone()];
        for k in 0..self.len() {
            let next = &sys.a * &xs[k] + &sys.b * &self.inputs[k] + &sys.e * &self.disturbances[k];
            xs.push(next);
        }
        xs
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let (n, m, q) = (self.n(), self.m(), self.q());
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = Vec::new();
        header.extend((0..n).map(|i| format!("x{i}")));
        header.extend((0..n).map(|i| format!("xt{i}")));
        header.extend((0..m).map(|i| format!("u{i}")));
        header.extend((0..q).map(|i| format!("w{i}")));
        header.extend((0..n).map(|i| format!("eps{i}")));
        wtr.write_record(&header)?;
        let fmt = |v: Option<&Vector>, len: usize| -> Vec<String> {
            match v {
                Some(v) => v.iter().map(|x| format!("{x:?}")).collect(),
                None => vec![String::new(); len],
            }
        };
        for t in 0..=self.len() {
            let mut row = fmt(Some(&self.states[t]), n);
            row.extend(fmt(Some(&self.measurements[t]), n));
            row.extend(fmt(self.inputs.get(t), m));
            row.extend(fmt(self.disturbances.get(t), q));
            row.extend(fmt(Some(&self.noises[t]), n));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let header = rdr.headers()?.clone();
        let mut cols: [Vec<usize>; 5] = Default::default();
        for (i, h) in header.iter().enumerate() {
            let slot = if h.starts_with("xt") {
                1
            } else if h.starts_with('x') {
                0
            } else if h.starts_with('u') {
                2
            } else if h.starts_with('w') {
                3
            } else if h.starts_with("eps") {
                4
            } else {
                return Err(Error::Parse(format!("unknown trajectory column {h}")));
            };
            cols[slot].push(i);
        }
        let mut parts: [Vec<Vector>; 5] = Default::default();
        for rec in rdr.records() {
            let rec = rec?;
            for (slot, idx) in cols.iter().enumerate() {
                if idx.is_empty() {
                    continue;
                }
                let fields: Vec<&str> = idx.iter().map(|&i| rec.get(i).unwrap_or("")).collect();
                if fields.iter().all(|f| f.is_empty()) {
                    continue;
                }
                let vals = fields
                    .iter()
                    .map(|f| f.parse::<f64>().map_err(|e| Error::Parse(format!("{f}: {e}"))))
                    .collect::<Result<Vec<f64>>>()?;
                parts[slot].push(Vector::from_vec(vals));
            }
        }
        let [states, measurements, inputs, disturbances, noises] = parts;
        let traj = Trajectory { states, measurements, inputs, disturbances, noises };
        let t = traj.inputs.len();
        ensure_dims(
            traj.states.len() == t + 1 && traj.measurements.len() == t + 1 && traj.noises.len() == t + 1,
            || "trajectory column lengths are inconsistent".into(),
        )?;
        Ok(traj)
    }
}

/// Simulates the system from `x_0 ~ init` under the given input sequence.
pub fn simulate(sys: &LinearSystem, init: &GaussianBelief, inputs: &[Vector], rng: &mut Rng) -> Result<Trajectory> {
    ensure_dims(!inputs.is_empty(), || "need at least one input".into())?;
    ensure_dims(init.dim() == sys.n(), || "initial belief dimension".into())?;
    ensure_dims(inputs.iter().all(|u| u.len() == sys.m()), || "input dimension".into())?;
    let x0 = GaussianSampler::new(init.mean.clone(), init.cov.as_matrix())?;
    let w = GaussianSampler::zero_mean(&sys.sigma_w);
    let eps = GaussianSampler::zero_mean(&sys.sigma_eps);

    let t = inputs.len();
    let mut states = Vec::with_capacity(t + 1);
    let mut measurements = Vec::with_capacity(t + 1);
    let mut disturbances = Vec::with_capacity(t);
    let mut noises = Vec::with_capacity(t + 1);

    let mut x = x0.sample(rng);
    let e0 = eps.sample(rng);
    measurements.push(&x + &e0);
    states.push(x.clone());
    noises.push(e0);
    for u in inputs {
        let wk = w.sample(rng);
        x = &sys.a * &x + &sys.b * u + &sys.e * &wk;
        let ek = eps.sample(rng);
        measurements.push(&x + &ek);
        states.push(x.clone());
        noises.push(ek);
        disturbances.push(wk);
    }
    Ok(Trajectory { states, measurements, inputs: inputs.to_vec(), disturbances, noises })
}

/// Zero-mean i.i.d. Gaussian probing input with the given per-channel variance.
pub fn probing_inputs(m: usize, t: usize, variance: f64, rng: &mut Rng) -> Vec<Vector> {
    let s = variance.max(0.0).sqrt();
    (0..t).map(|_| rng.standard_normal_vector(m) * s).collect()
}

/// Random test system with `ρ(A) ≤ spectral_radius_max`, unit-scale `B`, `E`,
/// `Σ_w = 0.01 I` and `Σ_ε = 0`.
pub fn random_system(n: usize, m: usize, q: usize, spectral_radius_max: f64, rng: &mut Rng) -> LinearSystem {
    random_system_with_noise(
        n,
        m,
        q,
        spectral_radius_max,
        SpdMatrix::new(Matrix::identity(q, q) * 0.01).expect("diagonal"),
        SpdMatrix::zeros(n),
        rng,
    )
}

pub fn random_system_with_noise(
    n: usize,
    m: usize,
    q: usize,
    spectral_radius_max: f64,
    sigma_w: SpdMatrix,
    sigma_eps: SpdMatrix,
    rng: &mut Rng,
) -> LinearSystem {
    assert!(spectral_radius_max > 0.0, "spectral radius bound must be positive");
    let mut a = Matrix::from_fn(n, n, |_, _| rng.standard_normal());
    let rho = spectral_radius(&a);
    // target radius drawn in [0.3, 1] × bound
    let target = spectral_radius_max * (0.3 + 0.7 * rng.uniform()) * (1.0 - 1e-12);
    if rho > 0.0 {
        a *= target / rho;
    }
    let b = Matrix::from_fn(n, m, |_, _| rng.standard_normal());
    let e = Matrix::from_fn(n, q, |_, _| rng.standard_normal());
    LinearSystem { a, b, e, sigma_w, sigma_eps }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(a: f64, b: f64, e: f64, sw: f64) -> LinearSystem {
        LinearSystem::new(
            Matrix::from_element(1, 1, a),
            Matrix::from_element(1, 1, b),
            Matrix::from_element(1, 1, e),
            SpdMatrix::from_diagonal(&[sw]).unwrap(),
            SpdMatrix::zeros(1),
        )
        .unwrap()
    }

    #[test]
    fn noise_free_fixed_point() {
        let sys = LinearSystem::new(
            Matrix::identity(2, 2),
            Matrix::zeros(2, 1),
            Matrix::identity(2, 2),
            SpdMatrix::zeros(2),
            SpdMatrix::zeros(2),
        )
        .unwrap();
        let x0 = Vector::from_column_slice(&[1.0, 2.0]);
        let traj = simulate(&sys, &GaussianBelief::deterministic(x0.clone()), &vec![Vector::zeros(1); 5], &mut Rng::new(0, 0)).unwrap();
        assert!(traj.states.iter().all(|x| *x == x0));
    }

    #[test]
    fn geometric_series() {
        let sys = scalar(0.5, 1.0, 0.0, 0.0);
        let traj = simulate(&sys, &GaussianBelief::deterministic(Vector::zeros(1)), &vec![Vector::from_element(1, 1.0); 10], &mut Rng::new(0, 0)).unwrap();
        for (k, x) in traj.states.iter().enumerate() {
            assert!((x[0] - 2.0 * (1.0 - 0.5f64.powi(k as i32))).abs() < 1e-15);
        }
    }

    #[test]
    fn replay_reproduces_states() {
        let mut rng = Rng::new(3, 0);
        let sys = random_system(3, 2, 2, 0.9, &mut rng);
        let inputs = probing_inputs(2, 30, 1.0, &mut rng);
        let traj = simulate(&sys, &GaussianBelief::new(Vector::zeros(3), SpdMatrix::identity(3)).unwrap(), &inputs, &mut rng).unwrap();
        assert_eq!(traj.replay(&sys), traj.states);
    }

    #[test]
    fn empirical_one_step_covariance() {
        let mut rng = Rng::new(4, 0);
        let sys = random_system_with_noise(2, 1, 2, 0.9, SpdMatrix::from_diagonal(&[0.5, 0.2]).unwrap(), SpdMatrix::zeros(2), &mut rng);
        let cov0 = Matrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.5]);
        let init = GaussianBelief::new(Vector::zeros(2), SpdMatrix::new(cov0.clone()).unwrap()).unwrap();
        let expect = &sys.a * &cov0 * sys.a.transpose() + sys.process_noise();
        let n = 100_000;
        let mut emp = Matrix::zeros(2, 2);
        let u = vec![Vector::zeros(1)];
        for i in 0..n {
            let mut r = Rng::new(4, 1 + i);
            let t = simulate(&sys, &init, &u, &mut r).unwrap();
            emp += &t.states[1] * t.states[1].transpose();
        }
        emp /= n as f64;
        assert!((emp - &expect).norm() / expect.norm() < 0.05);
    }

    #[test]
    fn csv_round_trip_and_shape() {
        let mut rng = Rng::new(5, 0);
        let sys = random_system_with_noise(2, 1, 1, 0.9, SpdMatrix::identity(1), SpdMatrix::from_diagonal(&[0.1, 0.1]).unwrap(), &mut rng);
        let inputs = probing_inputs(1, 100, 1.0, &mut rng);
        let traj = simulate(&sys, &GaussianBelief::deterministic(Vector::zeros(2)), &inputs, &mut rng).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 102);
        assert!(text.starts_with("x0,x1,xt0,xt1,u0,w0,eps0,eps1\n"));
        assert_eq!(Trajectory::read_csv(&buf[..]).unwrap(), traj);
    }

    #[test]
    fn random_system_properties() {
        let a = random_system(3, 2, 1, 0.9, &mut Rng::new(10, 0));
        let b = random_system(3, 2, 1, 0.9, &mut Rng::new(10, 0));
        assert_eq!(a, b);
        assert!(spectral_radius(&a.a) <= 0.9);
        assert_eq!(a.a.shape(), (3, 3));
        assert_eq!(a.b.shape(), (3, 2));
    }
}
