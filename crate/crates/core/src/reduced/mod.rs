//! The reduced system `(S)`: exact Gaussian evolution, master-equation
//! coefficients, critical time, initial rates and grid Wigner propagation.

pub mod critical;
pub mod master;
pub mod rates;
pub mod wigner;

use crate::bipartite::{FlowBundle, FlowSample};
use crate::par::{self, Execution};
use crate::states::{entropy_from_symplectic, purity_of_covariance, validate, validate_covariance, GaussianState};
use crate::{Error, Mat, Result, Vector};

/// Dynamics picture for master-equation coefficients and moments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Picture {
    /// Free evolution factored out; blocks of `Ψ^t`, coupling `G(t)`.
    #[default]
    Interaction,
    /// Blocks of `Φ^t`, coupling `G`, plus free transport by `H_S`.
    Schrodinger,
}

/// Reduced state and diagnostics at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedPoint {
    pub t: f64,
    pub mean: Vector,
    pub cov: Mat,
    pub purity: f64,
    pub linear_entropy: f64,
    /// Bits.
    pub von_neumann_entropy: f64,
    pub min_symplectic_eigenvalue: f64,
    pub det_ii: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedTrajectory {
    pub points: Vec<ReducedPoint>,
}

impl ReducedTrajectory {
    pub fn times(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.t).collect()
    }

    pub fn min_symplectic_eigenvalue(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.min_symplectic_eigenvalue)
            .fold(f64::INFINITY, f64::min)
    }
}

pub(crate) fn check_inputs(d: usize, n_env: usize, s0: &GaussianState, e0: &GaussianState) -> Result<()> {
    if s0.dof() != d {
        return Err(Error::DimensionMismatch {
            what: "system state",
            expected: 2 * d,
            found: 2 * s0.dof(),
        });
    }
    if e0.dof() != n_env {
        return Err(Error::DimensionMismatch {
            what: "environment state",
            expected: 2 * n_env,
            found: 2 * e0.dof(),
        });
    }
    for s in [s0, e0] {
        let r = validate(s)?;
        if !r.valid {
            return Err(Error::InvalidState {
                min_symplectic_eigenvalue: r.min,
            });
        }
    }
    Ok(())
}

/// `Γ_S(t) = Φ_ii Γ_S Φ_ii^T + Φ_ie Γ_E Φ_ie^T` and `m_S(t) = Φ_ii m_S + Φ_ie m_E`.
pub fn reduced_moments(sample: &FlowSample, s0: &GaussianState, e0: &GaussianState) -> (Vector, Mat) {
    let (ii, ie) = (sample.phi.ii(), sample.phi.ie());
    let mean = &ii * s0.mean() + &ie * e0.mean();
    let cov = &ii * s0.cov() * ii.transpose() + &ie * e0.cov() * ie.transpose();
    (mean, (&cov + cov.transpose()) * 0.5)
}

/// Environment marginal `Γ_E(t) = Φ_ee Γ_E Φ_ee^T + Φ_ei Γ_S Φ_ei^T`.
pub fn environment_covariance(sample: &FlowSample, s0: &GaussianState, e0: &GaussianState) -> Mat {
    let (ee, ei) = (sample.phi.ee(), sample.phi.ei());
    let cov = &ee * e0.cov() * ee.transpose() + &ei * s0.cov() * ei.transpose();
    (&cov + cov.transpose()) * 0.5
}

/// Full covariance `Φ (Γ_S ⊕ Γ_E) Φ^T`.
pub fn total_covariance(sample: &FlowSample, s0: &GaussianState, e0: &GaussianState) -> Mat {
    let (_, cov0) = crate::bipartite::product_state(s0, e0);
    let m = &sample.phi.m;
    m * cov0 * m.transpose()
}

/// `det Γ_S(t) det Γ_E(t) - det Γ(t)`: non-negative, and positive exactly
/// when the evolved state is no longer a product.
pub fn correlation_defect(sample: &FlowSample, s0: &GaussianState, e0: &GaussianState) -> f64 {
    let (_, gs) = reduced_moments(sample, s0, e0);
    let ge = environment_covariance(sample, s0, e0);
    gs.determinant() * ge.determinant() - total_covariance(sample, s0, e0).determinant()
}

fn point(sample: &FlowSample, s0: &GaussianState, e0: &GaussianState) -> Result<ReducedPoint> {
    let (mean, cov) = reduced_moments(sample, s0, e0);
    let report = validate_covariance(&cov)?;
    let purity = purity_of_covariance(&cov);
    Ok(ReducedPoint {
        t: sample.t,
        mean,
        purity,
        linear_entropy: 1.0 - purity,
        von_neumann_entropy: entropy_from_symplectic(&report.symplectic_eigenvalues),
        min_symplectic_eigenvalue: report.min,
        det_ii: sample.phi.det_ii(),
        cov,
    })
}

/// Exact reduced Gaussian evolution on the bundle's grid (valid for all
/// times, including beyond the critical time).
pub fn evolve_reduced(
    bundle: &FlowBundle,
    s0: &GaussianState,
    e0: &GaussianState,
    execution: Execution,
) -> Result<ReducedTrajectory> {
    check_inputs(bundle.d, bundle.n_env, s0, e0)?;
    let points = par::try_map(execution, &bundle.samples, |s| point(s, s0, e0))?;
    Ok(ReducedTrajectory { points })
}

/// `(t, S_ℓ(t))` pairs of a trajectory.
pub fn linear_entropy_curve(traj: &ReducedTrajectory) -> Vec<(f64, f64)> {
    traj.points.iter().map(|p| (p.t, p.linear_entropy)).collect()
}

/// Decomposition of the reduced covariance into the part transported from
/// the initial system state and the part received from the environment.
#[derive(Debug, Clone, PartialEq)]
pub struct InformationSplit {
    /// `Φ_ii Γ_S Φ_ii^T`.
    pub transported: Mat,
    /// `Φ_ie Γ_E Φ_ie^T`, the thermal covariance `Θ(t)`.
    pub received: Mat,
    /// Dimension of `ker Φ_ii` (singular values below `1e-10 σ_max`): directions
    /// of the initial state that can no longer be recovered.
    pub lost_dimensions: usize,
}

pub fn information_split(sample: &FlowSample, s0: &GaussianState, e0: &GaussianState) -> InformationSplit {
    let (ii, ie) = (sample.phi.ii(), sample.phi.ie());
    let sv = ii.clone().singular_values();
    let max = sv.max();
    InformationSplit {
        transported: &ii * s0.cov() * ii.transpose(),
        received: &ie * e0.cov() * ie.transpose(),
        lost_dimensions: sv.iter().filter(|&&s| s <= 1e-10 * max).count(),
    }
}

/// Linear entropy from the spectral formula
/// `S_ℓ(t) = 1 - (2π)^{-d} ∫ exp(-ζ·Θζ) |χ_0(Φ_ii^T ζ)|² dζ`,
/// where `χ_0` is the characteristic function of the initial system state
/// (`χ_0(0) = 1`), integrated by the trapezoidal rule on `[-z_max, z_max]^{2d}`
/// with `n` nodes per axis.
pub fn linear_entropy_spectral<F>(sample: &FlowSample, theta: &Mat, chi0_abs_sq: F, z_max: f64, n: usize) -> f64
where
    F: Fn(&Vector) -> f64,
{
    let dim = 2 * sample.phi.d;
    let mt = sample.phi.ii().transpose();
    let h = 2.0 * z_max / (n - 1) as f64;
    let total = n.pow(dim as u32);
    let mut sum = 0.0;
    let mut zeta = Vector::zeros(dim);
    for idx in 0..total {
        let mut rem = idx;
        let mut weight = 1.0;
        for a in 0..dim {
            let k = rem % n;
            rem /= n;
            zeta[a] = -z_max + k as f64 * h;
            if k == 0 || k == n - 1 {
                weight *= 0.5;
            }
        }
        let damp = (-zeta.dot(&(theta * &zeta))).exp();
        sum += weight * damp * chi0_abs_sq(&(&mt * &zeta));
    }
    let d = sample.phi.d as i32;
    1.0 - sum * h.powi(dim as i32) / (2.0 * std::f64::consts::PI).powi(d)
}

/// `|χ_0(ω)|² = exp(-ω·Γ ω)` for a Gaussian state.
pub fn gaussian_chi_abs_sq(state: &GaussianState) -> impl Fn(&Vector) -> f64 + '_ {
    move |w: &Vector| (-w.dot(&(state.cov() * w))).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bipartite::{full_flow, BundleOptions};
    use crate::models::{two_oscillator_system, TwoOscillatorParams};

    #[test]
    fn decoupled_purity_constant() {
        let sys = two_oscillator_system(&TwoOscillatorParams::new(1.3, 0.7, 0.0).unwrap()).unwrap();
        let grid: Vec<f64> = (0..30).map(|k| 0.3 * k as f64).collect();
        let b = full_flow(&sys, &grid, &BundleOptions::default()).unwrap();
        let s0 = GaussianState::squeezed(1, 0.4).unwrap();
        let e0 = GaussianState::thermal_tau(1, 0.3).unwrap();
        let tr = evolve_reduced(&b, &s0, &e0, Execution::Sequential).unwrap();
        for p in &tr.points {
            assert!((p.purity - 1.0).abs() < 1e-12);
        }
        assert_eq!(tr.points[0].cov, *s0.cov());
    }

    #[test]
    fn reduced_is_sub_block_of_total() {
        let sys = two_oscillator_system(&TwoOscillatorParams::new(1.0, 1.0, 0.5).unwrap()).unwrap();
        let b = full_flow(&sys, &[0.0, 0.8, 2.0, 7.0], &BundleOptions::default()).unwrap();
        let s0 = GaussianState::vacuum(1);
        let e0 = GaussianState::thermal_tau(1, 0.5).unwrap();
        for s in &b.samples {
            let (_, gs) = reduced_moments(s, &s0, &e0);
            let total = total_covariance(s, &s0, &e0);
            assert!((gs - total.view((0, 0), (2, 2))).amax() < 1e-12);
            assert!(correlation_defect(s, &s0, &e0) >= -1e-12);
        }
    }

    #[test]
    fn spectral_entropy_matches_determinant() {
        let sys = two_oscillator_system(&TwoOscillatorParams::new(1.0, 1.0, 0.5).unwrap()).unwrap();
        let b = full_flow(&sys, &[0.0, 1.5], &BundleOptions::default()).unwrap();
        let s0 = GaussianState::vacuum(1);
        let e0 = GaussianState::vacuum(1);
        let s = &b.samples[1];
        let split = information_split(s, &s0, &e0);
        let sl = linear_entropy_spectral(s, &split.received, gaussian_chi_abs_sq(&s0), 12.0, 161);
        let (_, gs) = reduced_moments(s, &s0, &e0);
        assert!((sl - (1.0 - purity_of_covariance(&gs))).abs() < 1e-10);
        assert_eq!(split.lost_dimensions, 0);
    }
}
