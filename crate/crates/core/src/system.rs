//! Linear system simulation `x' = A x + B u + η` with reproducible noise.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::control::LqrProblem;
use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseKind {
    Gaussian,
    /// ±1 with equal probability.
    ScaledRademacher,
    /// Uniform on `[−√3, √3]`.
    ScaledUniform,
}

impl NoiseKind {
    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::Gaussian => "gaussian",
            NoiseKind::ScaledRademacher => "scaled_rademacher",
            NoiseKind::ScaledUniform => "scaled_uniform",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "gaussian" => Some(NoiseKind::Gaussian),
            "scaled_rademacher" | "rademacher" => Some(NoiseKind::ScaledRademacher),
            "scaled_uniform" | "uniform" => Some(NoiseKind::ScaledUniform),
            _ => None,
        }
    }

    /// One zero-mean, unit-variance draw.
    #[inline]
    fn unit<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            NoiseKind::Gaussian => rng.sample(StandardNormal),
            NoiseKind::ScaledRademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            NoiseKind::ScaledUniform => {
                let s3 = 3f64.sqrt();
                rng.random_range(-s3..=s3)
            }
        }
    }
}

/// Isotropic noise with per-coordinate standard deviation `sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub sigma: f64,
}

impl NoiseModel {
    pub fn gaussian(sigma: f64) -> Self {
        Self {
            kind: NoiseKind::Gaussian,
            sigma,
        }
    }

    /// Variance proxy used by the hysteresis thresholds.
    pub fn sigma2(&self) -> f64 {
        self.sigma * self.sigma
    }

    pub fn sample<T: Real>(&self, rng: &mut RngStream, dim: usize) -> Vector<T> {
        sample_noise(self, rng, dim, self.sigma)
    }
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::gaussian(1.0)
    }
}

/// Role of a random stream inside one episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamRole {
    ProcessNoise = 0,
    InputPerturbation = 1,
}

/// A ChaCha stream keyed by `(master_seed, stream_id)`. Streams with
/// different ids never overlap, whatever the draw order.
#[derive(Debug, Clone)]
pub struct RngStream {
    master_seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(stream_id);
        Self {
            master_seed,
            stream_id,
            rng,
        }
    }

    pub fn for_episode(master_seed: u64, episode: u64, role: StreamRole) -> Self {
        Self::new(master_seed, episode.wrapping_mul(2).wrapping_add(role as u64))
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

/// Vector of `dim` independent draws of `model.kind`, each with standard
/// deviation `scale`. `model.sigma` is not applied here.
pub fn sample_noise<T: Real>(model: &NoiseModel, rng: &mut RngStream, dim: usize, scale: f64) -> Vector<T> {
    if scale == 0.0 {
        return Vector::zeros(dim);
    }
    Vector::from_iterator(dim, (0..dim).map(|_| T::lit(scale * model.kind.unit(&mut rng.rng))))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState<T: Real> {
    pub t: usize,
    pub x: Vector<T>,
    /// `Σ_{s≤t} ‖x_s‖²`.
    pub cumulative_state_energy: T,
}

impl<T: Real> SimState<T> {
    /// `x_0 = 0`.
    pub fn new(dx: usize) -> Self {
        Self {
            t: 0,
            x: Vector::zeros(dx),
            cumulative_state_energy: T::zero(),
        }
    }
}

/// Advances one step. Fails with the step index on non-finite inputs or
/// results.
pub fn step<T: Real>(state: &SimState<T>, u: &Vector<T>, eta: &Vector<T>, problem: &LqrProblem<T>) -> Result<SimState<T>> {
    let mut next = state.clone();
    step_in_place(&mut next, u, eta, problem)?;
    Ok(next)
}

pub fn step_in_place<T: Real>(
    state: &mut SimState<T>,
    u: &Vector<T>,
    eta: &Vector<T>,
    problem: &LqrProblem<T>,
) -> Result<()> {
    check_len(u, problem.du(), "u")?;
    check_len(eta, problem.dx(), "eta")?;
    if !all_finite(u) || !all_finite(eta) || !all_finite(&state.x) {
        return Err(Error::NonFinite { step: state.t });
    }
    let mut x = problem.a() * &state.x;
    x.gemv(T::one(), problem.b(), u, T::one());
    x += eta;
    let energy = x.norm_squared();
    if !energy.is_finite() {
        return Err(Error::NonFinite { step: state.t + 1 });
    }
    state.x = x;
    state.t += 1;
    state.cumulative_state_energy += energy;
    Ok(())
}

/// `xᵀQx + uᵀRu`.
pub fn instantaneous_cost<T: Real>(x: &Vector<T>, u: &Vector<T>, q: &Mat<T>, r: &Mat<T>) -> T {
    linalg::quad_form(q, x) + linalg::quad_form(r, u)
}

fn all_finite<T: Real>(v: &Vector<T>) -> bool {
    v.iter().all(|e| e.is_finite())
}

fn check_len<T: Real>(v: &Vector<T>, n: usize, context: &'static str) -> Result<()> {
    if v.len() != n {
        return Err(Error::DimensionMismatch {
            context,
            expected: n.to_string(),
            got: v.len().to_string(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn scalar_identity() -> LqrProblem<f64> {
        LqrProblem::new(
            Mat::identity(1, 1),
            Mat::identity(1, 1),
            Mat::identity(1, 1) * 2.0,
            Mat::identity(1, 1),
            Mat::from_element(1, 1, -0.5),
        )
        .unwrap()
    }

    #[test]
    fn zero_step_stays_at_zero() {
        let p = scalar_identity();
        let s = step(&SimState::new(1), &Vector::zeros(1), &Vector::zeros(1), &p).unwrap();
        assert_eq!(s.x[0], 0.0);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn scalar_arithmetic() {
        let p = scalar_identity();
        let mut s = SimState::new(1);
        s.x[0] = 1.0;
        let s = step(&s, &Vector::from_element(1, 2.0), &Vector::from_element(1, 0.5), &p).unwrap();
        assert_eq!(s.x[0], 3.5);
        assert_eq!(s.cumulative_state_energy, 12.25);
    }

    #[test]
    fn step_matches_naive_loop() {
        let a = Mat::from_row_slice(3, 3, &[0.5, 0.1, -0.2, 0.0, 0.3, 0.4, 0.2, -0.1, 0.1]);
        let b = Mat::from_row_slice(3, 2, &[1.0, 0.5, -0.3, 0.2, 0.7, -1.1]);
        let p = LqrProblem::new(a.clone(), b.clone(), Mat::identity(3, 3) * 2.0, Mat::identity(2, 2), Mat::zeros(2, 3))
            .unwrap();
        let mut s = SimState::new(3);
        s.x = Vector::from_vec(vec![0.3, -1.2, 2.0]);
        let u = Vector::from_vec(vec![0.7, -0.4]);
        let eta = Vector::from_vec(vec![0.01, 0.02, -0.03]);
        let next = step(&s, &u, &eta, &p).unwrap();
        for i in 0..3 {
            let mut v = eta[i];
            for j in 0..3 {
                v += a[(i, j)] * s.x[j];
            }
            for j in 0..2 {
                v += b[(i, j)] * u[j];
            }
            assert_abs_diff_eq!(next.x[i], v, epsilon = 1e-12);
        }
    }

    #[test]
    fn non_finite_input_reports_step() {
        let p = scalar_identity();
        let mut s = SimState::new(1);
        s.t = 7;
        let err = step(&s, &Vector::from_element(1, f64::NAN), &Vector::zeros(1), &p).unwrap_err();
        assert_eq!(err, Error::NonFinite { step: 7 });
    }

    #[test]
    fn cost_examples() {
        let q = Mat::from_element(1, 1, 2.0);
        let r = Mat::from_element(1, 1, 1.0);
        assert_eq!(instantaneous_cost(&Vector::zeros(1), &Vector::zeros(1), &q, &r), 0.0);
        let c = instantaneous_cost(&Vector::from_element(1, 3.0), &Vector::from_element(1, 2.0), &q, &r);
        assert_eq!(c, 22.0);
    }

    #[test]
    fn zero_scale_gives_zero_vector() {
        let mut rng = RngStream::new(1, 0);
        let v: Vector<f64> = sample_noise(&NoiseModel::default(), &mut rng, 4, 0.0);
        assert!(v.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn streams_are_deterministic_and_distinct() {
        let m = NoiseModel::default();
        let a: Vector<f64> = sample_noise(&m, &mut RngStream::new(42, 3), 5, 1.0);
        let b: Vector<f64> = sample_noise(&m, &mut RngStream::new(42, 3), 5, 1.0);
        let c: Vector<f64> = sample_noise(&m, &mut RngStream::new(42, 4), 5, 1.0);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn every_model_is_isotropic() {
        for kind in [NoiseKind::Gaussian, NoiseKind::ScaledRademacher, NoiseKind::ScaledUniform] {
            let m = NoiseModel { kind, sigma: 1.0 };
            let mut rng = RngStream::new(7, 11);
            let n = 100_000;
            let scale = 1.5;
            let mut cov = Mat::<f64>::zeros(3, 3);
            let mut mean = Vector::<f64>::zeros(3);
            for _ in 0..n {
                let v: Vector<f64> = sample_noise(&m, &mut rng, 3, scale);
                cov += &v * v.transpose();
                mean += v;
            }
            cov /= n as f64;
            mean /= n as f64;
            let target = Mat::identity(3, 3) * scale * scale;
            let rel = linalg::op_norm(&(cov - &target)) / (scale * scale);
            assert!(rel < 0.05, "{kind:?}: relative covariance error {rel}");
            assert!(mean.norm() < 0.05, "{kind:?}: mean {mean}");
        }
    }
}
