//! Rates at `t = 0`: second derivative of the purity and onset of
//! system–environment correlations.

use crate::bipartite::BipartiteSystem;
use crate::states::{validate, GaussianState};
use crate::symplectic::SymplecticForm;
use crate::{Error, Mat, Result};

/// `p̈(0)` split into its covariance and commutator parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PurityRate {
    /// `p̈(0) = classical + quantum_correction`, never positive.
    pub value: f64,
    /// `-4 tr(Γ_S G Γ_E G^T)`.
    pub classical: f64,
    /// `-tr(J_S G J_E G^T)`.
    pub quantum_correction: f64,
}

fn traces(g: &Mat, cov_s: &Mat, cov_e: &Mat) -> (f64, f64) {
    let js = SymplecticForm::standard(cov_s.nrows() / 2);
    let je = SymplecticForm::standard(cov_e.nrows() / 2);
    let classical = (cov_s * g * cov_e * g.transpose()).trace();
    let commutator = (js.matrix() * g * je.matrix() * g.transpose()).trace();
    (classical, commutator)
}

/// `4 tr(Γ_S G Γ_E G^T) - tr(J_S G J_E G^T)`, non-negative when `Γ_S` is a
/// pure-state covariance and `Γ_E` a valid one.
pub fn uncertainty_gap(g: &Mat, cov_s: &Mat, cov_e: &Mat) -> f64 {
    let (c, q) = traces(g, cov_s, cov_e);
    4.0 * c - q
}

/// Second derivative of the reduced purity at `t = 0` for a pure Gaussian
/// system state and a centred Gaussian environment:
/// `p̈(0) = -4 tr(Γ_S G Γ_E G^T) - tr(J_S G J_E G^T)`.
///
/// The free Hamiltonians do not enter. A positive value would violate the
/// uncertainty principle and is reported as an error.
pub fn purity_rate_initial(sys: &BipartiteSystem, s0: &GaussianState, e0: &GaussianState) -> Result<PurityRate> {
    crate::reduced::check_inputs(sys.d(), sys.n_env(), s0, e0)?;
    let report = validate(s0)?;
    if !report.pure {
        return Err(Error::NotPure {
            max_symplectic_eigenvalue: report.symplectic_eigenvalues.last().copied().unwrap_or(f64::NAN),
        });
    }
    let norm = e0.mean().amax();
    if norm > 1e-12 {
        return Err(Error::NonZeroMean { norm });
    }
    let g = sys.g_at(0.0)?;
    let (c, q) = traces(&g, s0.cov(), e0.cov());
    let rate = PurityRate {
        value: -4.0 * c - q,
        classical: -4.0 * c,
        quantum_correction: -q,
    };
    let scale = (4.0 * c).abs() + q.abs();
    if rate.value > 1e-9 * scale.max(1.0) {
        return Err(Error::UncertaintyViolation { value: rate.value });
    }
    Ok(rate)
}

/// Initial rate of the cross term `C(t)` in `ρ(t, z, u) ∝ K(z) L(u) e^{-z·C(t)u}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationRate {
    /// `Ċ(0) = Γ_S^{-1} J_S G - G J_E Γ_E^{-1}`.
    pub rate: Mat,
    pub norm: f64,
    /// `J_S Γ_S G J_E Γ_E^{-1} + G`; equals `-J_S Γ_S Ċ(0)`.
    pub criterion: Mat,
    pub criterion_norm: f64,
    /// Whether the criterion is nonzero (relative to `|G|`), i.e. the system
    /// becomes correlated with its environment immediately.
    pub correlated: bool,
}

pub fn correlation_rate(sys: &BipartiteSystem, s0: &GaussianState, e0: &GaussianState) -> Result<CorrelationRate> {
    crate::reduced::check_inputs(sys.d(), sys.n_env(), s0, e0)?;
    let g = sys.g_at(0.0)?;
    let js = SymplecticForm::standard(sys.d());
    let je = SymplecticForm::standard(sys.n_env());
    let inv = |m: &Mat| {
        m.clone().try_inverse().ok_or(Error::NotPositiveDefinite {
            min_eigenvalue: 0.0,
        })
    };
    let (gs_inv, ge_inv) = (inv(s0.cov())?, inv(e0.cov())?);
    let rate = &gs_inv * js.matrix() * &g - &g * je.matrix() * &ge_inv;
    let criterion = js.matrix() * s0.cov() * &g * je.matrix() * &ge_inv + &g;
    let criterion_norm = criterion.norm();
    Ok(CorrelationRate {
        norm: rate.norm(),
        rate,
        correlated: criterion_norm > 1e-12 * g.norm().max(f64::MIN_POSITIVE),
        criterion,
        criterion_norm,
    })
}
