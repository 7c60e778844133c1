use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::scalar::Real;

/// Non-fatal observations made while validating an [`LqrProblem`].
#[derive(Debug, Clone, PartialEq)]
pub enum ValidationWarning {
    /// `Q` is not strictly above the identity; regret constants assume `Q ≻ I`.
    StateCostBelowIdentity { min_eigenvalue: f64 },
    /// `R` differs from the identity; perturbation constants assume `R = I`.
    InputCostNotIdentity { max_deviation: f64 },
}

impl fmt::Display for ValidationWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::StateCostBelowIdentity { min_eigenvalue } => write!(
                f,
                "Q is not above the identity (smallest eigenvalue {min_eigenvalue}); theoretical constants assume the normalized form"
            ),
            Self::InputCostNotIdentity { max_deviation } => write!(
                f,
                "R differs from the identity (max deviation {max_deviation}); theoretical constants assume R = I"
            ),
        }
    }
}

/// Linear dynamics `x' = A x + B u + η` with quadratic costs and a known
/// stabilizing feedback `K_stab` (`ρ(A + B K_stab) < 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct LqrProblem<T: Real> {
    a: Mat<T>,
    b: Mat<T>,
    q: Mat<T>,
    r: Mat<T>,
    k_stab: Mat<T>,
    warnings: Vec<ValidationWarning>,
}

impl<T: Real> LqrProblem<T> {
    /// Validates dimensions, symmetry, definiteness and the stabilizer.
    pub fn new(a: Mat<T>, b: Mat<T>, q: Mat<T>, r: Mat<T>, k_stab: Mat<T>) -> Result<Self> {
        let dx = a.nrows();
        if dx == 0 {
            return Err(Error::InvalidArgument {
                reason: "state dimension must be positive".into(),
            });
        }
        linalg::check_square(&a, "A", dx)?;
        let du = b.ncols();
        if du == 0 {
            return Err(Error::InvalidArgument {
                reason: "input dimension must be positive".into(),
            });
        }
        linalg::check_shape(&b, "B", dx, du)?;
        linalg::check_square(&q, "Q", dx)?;
        linalg::check_square(&r, "R", du)?;
        linalg::check_shape(&k_stab, "K_stab", du, dx)?;

        let q_asym = linalg::asymmetry(&q);
        if q_asym > T::lit(1e-12) {
            return Err(Error::NotSymmetric {
                name: "Q",
                asymmetry: q_asym.as_f64(),
            });
        }
        let r_asym = linalg::asymmetry(&r);
        if r_asym > T::lit(1e-12) {
            return Err(Error::NotSymmetric {
                name: "R",
                asymmetry: r_asym.as_f64(),
            });
        }
        if !linalg::is_psd(&q) {
            return Err(Error::NotPositive {
                name: "Q",
                kind: "semidefinite",
                min_eigenvalue: linalg::min_eigenvalue(&q).as_f64(),
            });
        }
        let r_min = linalg::min_eigenvalue(&r);
        if r_min <= T::zero() {
            return Err(Error::NotPositive {
                name: "R",
                kind: "definite",
                min_eigenvalue: r_min.as_f64(),
            });
        }

        let closed = &a + &b * &k_stab;
        let radius = linalg::spectral_radius(&closed)?;
        if !(radius < T::one()) {
            return Err(Error::UnstableStabilizer {
                radius: radius.as_f64(),
            });
        }

        let mut warnings = Vec::new();
        let q_min = linalg::min_eigenvalue(&q);
        if q_min <= T::one() {
            warnings.push(ValidationWarning::StateCostBelowIdentity {
                min_eigenvalue: q_min.as_f64(),
            });
        }
        let r_dev = (&r - Mat::identity(du, du)).abs().max();
        if r_dev > T::lit(1e-12) {
            warnings.push(ValidationWarning::InputCostNotIdentity {
                max_deviation: r_dev.as_f64(),
            });
        }

        Ok(Self {
            a,
            b,
            q,
            r,
            k_stab,
            warnings,
        })
    }

    pub fn a(&self) -> &Mat<T> {
        &self.a
    }

    pub fn b(&self) -> &Mat<T> {
        &self.b
    }

    pub fn q(&self) -> &Mat<T> {
        &self.q
    }

    pub fn r(&self) -> &Mat<T> {
        &self.r
    }

    pub fn k_stab(&self) -> &Mat<T> {
        &self.k_stab
    }

    pub fn dx(&self) -> usize {
        self.a.nrows()
    }

    pub fn du(&self) -> usize {
        self.b.ncols()
    }

    pub fn warnings(&self) -> &[ValidationWarning] {
        &self.warnings
    }

    /// `A + B K`.
    pub fn closed_loop(&self, k: &Mat<T>) -> Mat<T> {
        &self.a + &self.b * k
    }
}
