//! Gaussian states described by their Wigner function
//! `ρ(z) = det(Γ)^{-1/2} exp(-½ (z-m)·Γ^{-1}(z-m))`.

use std::f64::consts::LN_2;

use nalgebra::Cholesky;

use crate::hamiltonian::QuadraticHamiltonian;
use crate::symplectic::{
    check_positive_definite, check_symmetric, symplectic_eigenvalues_in, williamson, SymplecticForm,
};
use crate::{Error, Mat, Result, Vector};

/// Tolerance on symplectic eigenvalues for validity and purity flags.
pub const VALIDITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    mean: Vector,
    cov: Mat,
}

impl GaussianState {
    /// Builds a state from mean and covariance. The covariance must be
    /// symmetric positive-definite; quantum validity is checked separately by
    /// [`validate`] or [`GaussianState::new_valid`].
    pub fn new(mean: Vector, cov: Mat) -> Result<Self> {
        if cov.nrows() % 2 != 0 || cov.nrows() == 0 {
            return Err(Error::DimensionMismatch {
                what: "covariance (non-empty, even dimension)",
                expected: cov.nrows() + 1,
                found: cov.nrows(),
            });
        }
        if mean.len() != cov.nrows() {
            return Err(Error::DimensionMismatch {
                what: "mean vs covariance",
                expected: cov.nrows(),
                found: mean.len(),
            });
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "mean" });
        }
        check_positive_definite(&cov)?;
        let cov = (&cov + cov.transpose()) * 0.5;
        Ok(Self { mean, cov })
    }

    /// As [`GaussianState::new`], additionally rejecting covariances with a
    /// symplectic eigenvalue below `1/2`.
    pub fn new_valid(mean: Vector, cov: Mat) -> Result<Self> {
        let s = Self::new(mean, cov)?;
        let report = validate(&s)?;
        if !report.valid {
            return Err(Error::InvalidState {
                min_symplectic_eigenvalue: report.min,
            });
        }
        Ok(s)
    }

    pub fn centered(cov: Mat) -> Result<Self> {
        Self::new(Vector::zeros(cov.nrows()), cov)
    }

    /// Ground state of `n` unit oscillators, `Γ = I/2`.
    pub fn vacuum(n: usize) -> Self {
        Self {
            mean: Vector::zeros(2 * n),
            cov: Mat::identity(2 * n, 2 * n) * 0.5,
        }
    }

    /// `Γ = I/(2τ)`: a thermal state of unit oscillators for `0 < τ ≤ 1`.
    pub fn thermal_tau(n: usize, tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
        }
        Ok(Self {
            mean: Vector::zeros(2 * n),
            cov: Mat::identity(2 * n, 2 * n) / (2.0 * tau),
        })
    }

    /// Squeezed vacuum, `Γ = diag(e^{-2r}/2 .., e^{2r}/2 ..)`.
    pub fn squeezed(n: usize, r: f64) -> Result<Self> {
        if !r.is_finite() {
            return Err(Error::NonFinite { what: "squeezing" });
        }
        let mut d = vec![0.5 * (-2.0 * r).exp(); n];
        d.extend(vec![0.5 * (2.0 * r).exp(); n]);
        Ok(Self {
            mean: Vector::zeros(2 * n),
            cov: Mat::from_diagonal(&Vector::from_vec(d)),
        })
    }

    pub fn with_mean(mut self, mean: Vector) -> Result<Self> {
        if mean.len() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                what: "mean",
                expected: self.mean.len(),
                found: mean.len(),
            });
        }
        self.mean = mean;
        Ok(self)
    }

    pub fn dof(&self) -> usize {
        self.cov.nrows() / 2
    }

    pub fn mean(&self) -> &Vector {
        &self.mean
    }

    pub fn cov(&self) -> &Mat {
        &self.cov
    }

    /// Product state `self ⊗ other` in the standard layout of `n_1 + n_2` modes.
    pub fn tensor(&self, other: &GaussianState) -> GaussianState {
        let (a, b) = (self.dof(), other.dof());
        let p = SymplecticForm::direct_sum(&[a, b]).to_standard_permutation();
        let mut cov = Mat::zeros(2 * (a + b), 2 * (a + b));
        cov.view_mut((0, 0), (2 * a, 2 * a)).copy_from(&self.cov);
        cov.view_mut((2 * a, 2 * a), (2 * b, 2 * b)).copy_from(&other.cov);
        let mut mean = Vector::zeros(2 * (a + b));
        mean.rows_mut(0, 2 * a).copy_from(&self.mean);
        mean.rows_mut(2 * a, 2 * b).copy_from(&other.mean);
        GaussianState {
            mean: p.transpose() * mean,
            cov: p.transpose() * cov * p,
        }
    }
}

/// Result of [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidityReport {
    /// Ascending.
    pub symplectic_eigenvalues: Vec<f64>,
    pub min: f64,
    /// All symplectic eigenvalues `≥ 1/2 - 1e-9`.
    pub valid: bool,
    /// All symplectic eigenvalues within `1e-9` of `1/2`.
    pub pure: bool,
    /// Valid, not pure, but some mode sits at `1/2`.
    pub partially_pure: bool,
}

impl ValidityReport {
    fn from_eigenvalues(ev: Vec<f64>) -> Self {
        let min = ev.first().copied().unwrap_or(f64::INFINITY);
        let valid = ev.iter().all(|&l| l >= 0.5 - VALIDITY_TOL);
        let at_half = |l: f64| (l - 0.5).abs() <= VALIDITY_TOL;
        let pure = ev.iter().all(|&l| at_half(l));
        let partially_pure = valid && !pure && ev.iter().any(|&l| at_half(l));
        Self {
            symplectic_eigenvalues: ev,
            min,
            valid,
            pure,
            partially_pure,
        }
    }
}

pub fn validate(state: &GaussianState) -> Result<ValidityReport> {
    validate_covariance(&state.cov)
}

/// Validity of a covariance in the standard layout.
pub fn validate_covariance(cov: &Mat) -> Result<ValidityReport> {
    validate_covariance_in(cov, &SymplecticForm::standard(cov.nrows() / 2))
}

/// Validity of a covariance with respect to an arbitrary block layout.
pub fn validate_covariance_in(cov: &Mat, form: &SymplecticForm) -> Result<ValidityReport> {
    check_symmetric(cov)?;
    Ok(ValidityReport::from_eigenvalues(symplectic_eigenvalues_in(cov, form)?))
}

fn require_valid(state: &GaussianState) -> Result<ValidityReport> {
    let report = validate(state)?;
    if !report.valid {
        return Err(Error::InvalidState {
            min_symplectic_eigenvalue: report.min,
        });
    }
    Ok(report)
}

/// `2^{-n} det(Γ)^{-1/2}` without a validity check.
pub fn purity_of_covariance(cov: &Mat) -> f64 {
    let n = cov.nrows() / 2;
    0.5f64.powi(n as i32) / cov.determinant().sqrt()
}

pub fn purity(state: &GaussianState) -> Result<f64> {
    require_valid(state)?;
    Ok(purity_of_covariance(&state.cov))
}

pub fn linear_entropy(state: &GaussianState) -> Result<f64> {
    Ok(1.0 - purity(state)?)
}

/// Entropy in bits of a single thermal mode with parameter `τ`;
/// `τ ≥ 1` (pure, or pure within tolerance) gives `0`.
pub fn mode_entropy(tau: f64) -> f64 {
    if tau >= 1.0 {
        return 0.0;
    }
    ((1.0 - tau) / (2.0 * tau) * ((1.0 + tau) / (1.0 - tau)).ln() - (2.0 * tau / (1.0 + tau)).ln()) / LN_2
}

/// Von Neumann entropy in bits, `Σ E(τ_j)` with `τ_j = 1/(2λ_j)`.
pub fn von_neumann_entropy(state: &GaussianState) -> Result<f64> {
    let report = require_valid(state)?;
    Ok(entropy_from_symplectic(&report.symplectic_eigenvalues))
}

pub fn entropy_from_symplectic(lambda: &[f64]) -> f64 {
    lambda.iter().map(|&l| mode_entropy(1.0 / (2.0 * l))).sum()
}

/// Per-mode thermal parameters `τ_j ∈ (0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralThermalParams {
    pub tau: Vec<f64>,
}

impl SpectralThermalParams {
    pub fn new(tau: Vec<f64>) -> Result<Self> {
        if let Some(t) = tau.iter().find(|&&t| !(t > 0.0 && t <= 1.0)) {
            return Err(Error::InvalidParameter(format!("thermal parameter {t} outside (0, 1]")));
        }
        Ok(Self { tau })
    }

    /// `τ_j = 1/(2λ_j)` from the symplectic eigenvalues, clamped to 1.
    pub fn of_state(state: &GaussianState) -> Result<Self> {
        let report = require_valid(state)?;
        Ok(Self {
            tau: report
                .symplectic_eigenvalues
                .iter()
                .map(|&l| (1.0 / (2.0 * l)).min(1.0))
                .collect(),
        })
    }

    pub fn linear_entropy(&self) -> f64 {
        1.0 - self.tau.iter().product::<f64>()
    }

    pub fn von_neumann_entropy(&self) -> f64 {
        self.tau.iter().map(|&t| mode_entropy(t)).sum()
    }
}

/// Gibbs state `e^{-βH}/Z` of a positive-definite quadratic Hamiltonian.
///
/// With `(S, λ)` the Williamson form of the Hessian, mode `j` oscillates at
/// frequency `λ_j` and `Γ = S diag(1/(2 tanh(βλ_j/2)), ..) S^T`.
pub fn thermal_state(h: &QuadraticHamiltonian, beta: f64) -> Result<GaussianState> {
    Ok(thermal_state_with_params(h, beta)?.0)
}

pub fn thermal_state_with_params(
    h: &QuadraticHamiltonian,
    beta: f64,
) -> Result<(GaussianState, SpectralThermalParams)> {
    if !(beta > 0.0) || beta.is_nan() {
        return Err(Error::InvalidParameter(format!("inverse temperature must be positive, got {beta}")));
    }
    if !h.is_autonomous() {
        return Err(Error::InvalidParameter("thermal state needs an autonomous Hamiltonian".into()));
    }
    let hess = h.hessian_at(0.0)?;
    let w = williamson(&hess)?;
    let tau: Vec<f64> = w.lambda.iter().map(|&l| (0.5 * beta * l).tanh()).collect();
    let mut d: Vec<f64> = tau.iter().map(|&t| 0.5 / t).collect();
    d.extend_from_slice(&d.clone());
    let cov = &w.s * Mat::from_diagonal(&Vector::from_vec(d)) * w.s.transpose();
    let cov = (&cov + cov.transpose()) * 0.5;
    let state = GaussianState::centered(cov)?;
    Ok((state, SpectralThermalParams { tau }))
}

/// Wigner function value at `z`, normalised with `c_Γ = det(Γ)^{-1/2}`.
pub fn wigner_eval(state: &GaussianState, z: &Vector) -> Result<f64> {
    if z.len() != state.mean.len() {
        return Err(Error::DimensionMismatch {
            what: "phase-space point",
            expected: state.mean.len(),
            found: z.len(),
        });
    }
    require_valid(state)?;
    let chol = Cholesky::new(state.cov.clone()).ok_or(Error::NotPositiveDefinite {
        min_eigenvalue: f64::NAN,
    })?;
    let dz = z - &state.mean;
    let q = dz.dot(&chol.solve(&dz));
    let det: f64 = chol.l().diagonal().iter().map(|v| v * v).product();
    Ok(det.powf(-0.5) * (-0.5 * q).exp())
}
