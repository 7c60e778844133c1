use crate::control::lyapunov::{check_stable, solve_lyapunov, DEFAULT_LYAPUNOV_TOL};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::scalar::Real;

/// Envelope threshold below which the power series is truncated.
pub const DEFAULT_ENVELOPE_TOL: f64 = 1e-12;
/// Hard cap on explicitly summed powers; beyond it the tail bound takes over.
const MAX_TERMS: usize = 10_000_000;

/// Transient-growth summary of a stable matrix `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityProfile<T: Real> {
    /// `𝓛(M, I)`.
    pub l: Mat<T>,
    /// Certified upper estimate of `Σ_{s≥0} ‖Mˢ‖`.
    pub gain_g: T,
    /// `1 − 1/‖L‖`; `‖Mᵏ‖ ≤ decay_base^{k/2} ‖L‖^{1/2}`.
    pub decay_base: T,
    /// Number of explicitly summed powers.
    pub terms: usize,
}

impl<T: Real> StabilityProfile<T> {
    /// `(1 − 1/‖L‖)^{k/2} ‖L‖^{1/2}`.
    pub fn envelope(&self, k: usize) -> T {
        let l_norm = linalg::op_norm(&self.l);
        self.decay_base.sqrt().powi(k as i32) * l_norm.sqrt()
    }
}

pub fn spectral_radius<T: Real>(m: &Mat<T>) -> Result<T> {
    linalg::spectral_radius(m)
}

/// `𝓛(M, I)` together with its operator norm.
fn lyapunov_identity<T: Real>(m: &Mat<T>) -> Result<(Mat<T>, T)> {
    let d = m.nrows();
    let l = solve_lyapunov(m, &Mat::identity(d, d), T::lit(DEFAULT_LYAPUNOV_TOL))?;
    let norm = linalg::op_norm(&l);
    Ok((l, norm))
}

/// `𝒢_M = Σ_{s≥0} ‖Mˢ‖`, summed explicitly until the envelope
/// `(1−1/‖L‖)^{s/2}‖L‖^{1/2}` drops below `tol`, plus the geometric tail of
/// that envelope.
pub fn toeplitz_gain<T: Real>(m: &Mat<T>, tol: T) -> Result<StabilityProfile<T>> {
    let d = m.nrows();
    linalg::check_square(m, "M", d)?;
    check_stable(m)?;
    let (l, l_norm) = lyapunov_identity(m)?;
    // ‖L‖ ≥ 1 since L ⪰ I; clamp rounding.
    let l_norm_c = l_norm.max(T::one());
    let decay_base = (T::one() - T::one() / l_norm_c).max(T::zero());
    let ratio = decay_base.sqrt();
    let root = l_norm_c.sqrt();

    let mut gain = T::zero();
    let mut power = Mat::identity(d, d);
    let mut envelope_next = ratio * root;
    let mut terms = 0;
    loop {
        gain += linalg::op_norm(&power);
        terms += 1;
        if envelope_next < tol || terms >= MAX_TERMS {
            break;
        }
        power = &power * m;
        envelope_next *= ratio;
    }
    let tail = if ratio < T::one() {
        envelope_next / (T::one() - ratio)
    } else {
        T::zero()
    };
    Ok(StabilityProfile {
        l,
        gain_g: gain + tail,
        decay_base,
        terms,
    })
}

/// Upper bound `2‖L‖^{3/2}/(1 − x)` with `x = 2ε‖L‖^{3/2}` on the gain of
/// any product of matrices within `ε` of `M`.
pub fn perturbed_gain_bound<T: Real>(m: &Mat<T>, eps: T) -> Result<T> {
    if eps < T::zero() {
        return Err(Error::InvalidArgument {
            reason: "perturbation size must be nonnegative".into(),
        });
    }
    check_stable(m)?;
    let (_, l_norm) = lyapunov_identity(m)?;
    let n = l_norm * l_norm.sqrt();
    let x = T::lit(2.0) * eps * n;
    if x >= T::one() {
        return Err(Error::NotApplicable {
            reason: format!(
                "eps = {} is not below 1/(2‖L‖^(3/2)) = {}",
                eps.as_f64(),
                (T::one() / (T::lit(2.0) * n)).as_f64()
            ),
        });
    }
    Ok(T::lit(2.0) * n / (T::one() - x))
}
