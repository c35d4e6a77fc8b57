//! Reference models: two coupled oscillators with a closed-form flow, and a
//! finite bath of oscillators (quantum Brownian motion).

use crate::bipartite::{full_flow, BipartiteSystem, BundleOptions};
use crate::hamiltonian::QuadraticHamiltonian;
use crate::reduced::critical::{first_sign_change, SignChangeScan};
use crate::symplectic::PhaseSpaceFlow;
use crate::{Error, Mat, Result, Vector};

/// `H = ½(ξ² + η² + ω_S² x² + ω_E² y²) + γ x y`.
///
/// `ω_E²` may be negative (unstable environment). The potential matrix
/// `[[ω_S², γ], [γ, ω_E²]]` has eigenvalues `λ±` and is diagonalised by a
/// rotation of angle `θ`, with `cos 2θ = (ω_S² - ω_E²)/R`, `sin 2θ = 2γ/R`,
/// `R = ((ω_S² - ω_E²)² + 4γ²)^{1/2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoOscillatorParams {
    pub omega_s: f64,
    pub omega_e_sq: f64,
    pub gamma: f64,
    lambda_plus: f64,
    lambda_minus: f64,
    cos_sq: f64,
    sin_sq: f64,
    sin_cos: f64,
}

impl TwoOscillatorParams {
    pub fn new(omega_s: f64, omega_e_sq: f64, gamma: f64) -> Result<Self> {
        if !(omega_s > 0.0) || !omega_s.is_finite() {
            return Err(Error::InvalidParameter(format!("omega_S must be positive, got {omega_s}")));
        }
        if !omega_e_sq.is_finite() || !gamma.is_finite() {
            return Err(Error::NonFinite { what: "two-oscillator parameters" });
        }
        let ws2 = omega_s * omega_s;
        let delta = ws2 - omega_e_sq;
        let sum = ws2 + omega_e_sq;
        let r = delta.hypot(2.0 * gamma);
        let prod = ws2 * omega_e_sq - gamma * gamma;
        // avoid cancellation in the smaller root
        let (lambda_plus, lambda_minus) = if sum > 0.0 {
            let lp = 0.5 * (sum + r);
            (lp, prod / lp)
        } else {
            let lm = 0.5 * (sum - r);
            if lm == 0.0 {
                (0.0, 0.0)
            } else {
                (prod / lm, lm)
            }
        };
        let (cos_sq, sin_sq, sin_cos) = if r == 0.0 {
            (1.0, 0.0, 0.0)
        } else if delta >= 0.0 {
            ((r + delta) / (2.0 * r), 2.0 * gamma * gamma / (r * (r + delta)), gamma / r)
        } else {
            (2.0 * gamma * gamma / (r * (r - delta)), (r - delta) / (2.0 * r), gamma / r)
        };
        Ok(Self {
            omega_s,
            omega_e_sq,
            gamma,
            lambda_plus,
            lambda_minus,
            cos_sq,
            sin_sq,
            sin_cos,
        })
    }

    pub fn lambda_plus(&self) -> f64 {
        self.lambda_plus
    }

    pub fn lambda_minus(&self) -> f64 {
        self.lambda_minus
    }

    /// `cos θ ≥ 0`.
    pub fn cos_theta(&self) -> f64 {
        self.cos_sq.sqrt()
    }

    /// `sin θ`, carrying the sign of `γ`.
    pub fn sin_theta(&self) -> f64 {
        self.sin_sq.sqrt().copysign(if self.gamma == 0.0 { 1.0 } else { self.gamma })
    }

    /// Stable regime without coupling-induced instability: `ω_S² ω_E² > γ²`.
    pub fn is_stable(&self) -> bool {
        self.lambda_minus > 0.0
    }
}

/// `cos(t√λ)`, continued to `cosh(t√-λ)` for `λ < 0`.
pub fn even_part(lambda: f64, t: f64) -> f64 {
    if lambda > 0.0 {
        (t * lambda.sqrt()).cos()
    } else if lambda < 0.0 {
        (t * (-lambda).sqrt()).cosh()
    } else {
        1.0
    }
}

/// `sin(t√λ)/√λ`, continued to `sinh(t√-λ)/√-λ` for `λ < 0` and `t` at `λ = 0`.
pub fn odd_part(lambda: f64, t: f64) -> f64 {
    if lambda > 0.0 {
        let w = lambda.sqrt();
        (t * w).sin() / w
    } else if lambda < 0.0 {
        let w = (-lambda).sqrt();
        (t * w).sinh() / w
    } else {
        t
    }
}

/// Bipartite system for the two-oscillator model (`d = N = 1`).
pub fn two_oscillator_system(p: &TwoOscillatorParams) -> Result<BipartiteSystem> {
    let hs = QuadraticHamiltonian::oscillators(&[1.0], &[p.omega_s * p.omega_s])?;
    let he = QuadraticHamiltonian::oscillators(&[1.0], &[p.omega_e_sq])?;
    let mut g = Mat::zeros(2, 2);
    g[(0, 0)] = p.gamma;
    BipartiteSystem::new(hs, he, g)
}

/// Closed-form flow in the library layout `(x, ξ, y, η)`.
pub fn two_oscillator_flow(p: &TwoOscillatorParams, t: f64) -> PhaseSpaceFlow {
    let (lp, lm) = (p.lambda_plus, p.lambda_minus);
    let (cp, cm) = (even_part(lp, t), even_part(lm, t));
    let (sp, sm) = (odd_part(lp, t), odd_part(lm, t));
    let (c2, s2, cs) = (p.cos_sq, p.sin_sq, p.sin_cos);

    let block = |a: f64, b: f64, even_a: f64, even_b: f64, odd_a: f64, odd_b: f64, la: f64, lb: f64| {
        Mat::from_row_slice(
            2,
            2,
            &[
                a * even_a + b * even_b,
                a * odd_a + b * odd_b,
                -(a * la * odd_a + b * lb * odd_b),
                a * even_a + b * even_b,
            ],
        )
    };
    let ii = block(c2, s2, cp, cm, sp, sm, lp, lm);
    let ee = block(c2, s2, cm, cp, sm, sp, lm, lp);
    let ie = block(cs, -cs, cp, cm, sp, sm, lp, lm);

    let mut m = Mat::zeros(4, 4);
    m.view_mut((0, 0), (2, 2)).copy_from(&ii);
    m.view_mut((0, 2), (2, 2)).copy_from(&ie);
    m.view_mut((2, 0), (2, 2)).copy_from(&ie);
    m.view_mut((2, 2), (2, 2)).copy_from(&ee);
    PhaseSpaceFlow { d: 1, n_env: 1, t, m }
}

/// Permutation from the interleaved layout `(x, y, ξ, η)` to `(x, ξ, y, η)`.
fn interleaved_to_block() -> Mat {
    let mut q = Mat::zeros(4, 4);
    for (block, interleaved) in [(0, 0), (1, 2), (2, 1), (3, 3)] {
        q[(block, interleaved)] = 1.0;
    }
    q
}

/// Same flow computed as `Π Φ_diag Π^{-1}` in the normal-mode basis.
pub fn two_oscillator_flow_modal(p: &TwoOscillatorParams, t: f64) -> PhaseSpaceFlow {
    let (c, s) = (p.cos_theta(), p.sin_theta());
    let rot = Mat::from_row_slice(2, 2, &[c, -s, s, c]);
    let mut pi = Mat::zeros(4, 4);
    pi.view_mut((0, 0), (2, 2)).copy_from(&rot);
    pi.view_mut((2, 2), (2, 2)).copy_from(&rot);
    let (lp, lm) = (p.lambda_plus, p.lambda_minus);
    let mut diag = Mat::zeros(4, 4);
    for (k, l) in [(0, lp), (1, lm)] {
        diag[(k, k)] = even_part(l, t);
        diag[(k, k + 2)] = odd_part(l, t);
        diag[(k + 2, k)] = -l * odd_part(l, t);
        diag[(k + 2, k + 2)] = even_part(l, t);
    }
    let interleaved = &pi * diag * pi.transpose();
    let q = interleaved_to_block();
    PhaseSpaceFlow {
        d: 1,
        n_env: 1,
        t,
        m: &q * interleaved * q.transpose(),
    }
}

/// `det Φ_ii^t = 1 + 2γ²/R² (C₊C₋ + (ω_S² + ω_E²)/2 · S₊S₋ - 1)` with
/// `C = cos(t√λ)`, `S = sin(t√λ)/√λ`.
pub fn two_oscillator_det_ii(p: &TwoOscillatorParams, t: f64) -> f64 {
    let ws2 = p.omega_s * p.omega_s;
    let r_sq = (ws2 - p.omega_e_sq).powi(2) + 4.0 * p.gamma * p.gamma;
    if p.gamma == 0.0 || r_sq == 0.0 {
        return 1.0;
    }
    let (lp, lm) = (p.lambda_plus, p.lambda_minus);
    let bracket = even_part(lp, t) * even_part(lm, t) + 0.5 * (ws2 + p.omega_e_sq) * odd_part(lp, t) * odd_part(lm, t)
        - 1.0;
    1.0 + 2.0 * p.gamma * p.gamma / r_sq * bracket
}

/// The same determinant written with the mixing angle,
/// `1 + 2 sin²θ cos²θ (C₊C₋ + (λ₊ + λ₋)/2 · S₊S₋ - 1)`.
pub fn two_oscillator_det_ii_modal(p: &TwoOscillatorParams, t: f64) -> f64 {
    let (lp, lm) = (p.lambda_plus, p.lambda_minus);
    let bracket = even_part(lp, t) * even_part(lm, t) + 0.5 * (lp + lm) * odd_part(lp, t) * odd_part(lm, t) - 1.0;
    1.0 + 2.0 * p.sin_cos * p.sin_cos * bracket
}

/// First zero of the closed-form determinant on `(0, t_max]`.
pub fn two_oscillator_critical_time(p: &TwoOscillatorParams, t_max: f64, step: f64) -> Result<SignChangeScan> {
    first_sign_change(|t| Ok(two_oscillator_det_ii(p, t)), t_max, step, 1e-9, 1e-12)
}

/// Oscillator of mass `m` in the potential `ω_S² x²/2`, tied to `N` bath
/// oscillators by springs, `H = ξ²/2m + ω_S² x²/2 + Σ η_j²/2m_j + ½ k_j (y_j - x)²`.
#[derive(Debug, Clone, PartialEq)]
pub struct QBMParams {
    pub mass: f64,
    pub omega_s: f64,
    pub k: Vec<f64>,
    /// Bath masses; all 1 when `None`.
    pub bath_masses: Option<Vec<f64>>,
}

impl QBMParams {
    pub fn new(mass: f64, omega_s: f64, k: Vec<f64>) -> Result<Self> {
        let p = Self {
            mass,
            omega_s,
            k,
            bath_masses: None,
        };
        p.check()?;
        Ok(p)
    }

    pub fn n(&self) -> usize {
        self.k.len()
    }

    fn check(&self) -> Result<()> {
        if !(self.mass > 0.0) {
            return Err(Error::InvalidParameter(format!("mass must be positive, got {}", self.mass)));
        }
        if !self.omega_s.is_finite() {
            return Err(Error::NonFinite { what: "omega_S" });
        }
        if let Some(k) = self.k.iter().find(|&&k| !(k > 0.0 && k.is_finite())) {
            return Err(Error::InvalidParameter(format!("spring constants must be positive, got {k}")));
        }
        if let Some(m) = &self.bath_masses {
            if m.len() != self.k.len() {
                return Err(Error::DimensionMismatch {
                    what: "bath masses vs spring constants",
                    expected: self.k.len(),
                    found: m.len(),
                });
            }
            if let Some(v) = m.iter().find(|&&v| !(v > 0.0)) {
                return Err(Error::InvalidParameter(format!("bath masses must be positive, got {v}")));
            }
        }
        Ok(())
    }

    fn bath_mass(&self, j: usize) -> f64 {
        self.bath_masses.as_ref().map_or(1.0, |m| m[j])
    }

    fn require_unit_bath_masses(&self) -> Result<()> {
        if self.bath_masses.as_ref().is_some_and(|m| m.iter().any(|&v| v != 1.0)) {
            return Err(Error::InvalidParameter(
                "memory kernel and force assume unit bath masses".into(),
            ));
        }
        Ok(())
    }
}

/// Splits the bath model into `H_S = ξ²/2m + (ω_S² + Σk_j) x²/2`,
/// `H_E = Σ η_j²/2m_j + k_j y_j²/2` and `H_I = -x Σ k_j y_j`.
///
/// For `N = 1`, `m = m_1 = 1` this is the two-oscillator model with
/// `ω_S'² = ω_S² + k_1`, `ω_E² = k_1`, `γ = -k_1`.
pub fn qbm_build(p: &QBMParams) -> Result<BipartiteSystem> {
    p.check()?;
    let n = p.n();
    let ksum: f64 = p.k.iter().sum();
    let hs = QuadraticHamiltonian::new(Mat::from_row_slice(
        2,
        2,
        &[p.omega_s * p.omega_s + ksum, 0.0, 0.0, 1.0 / p.mass],
    ))?;
    let mut he = Mat::zeros(2 * n, 2 * n);
    let mut g = Mat::zeros(2, 2 * n);
    for j in 0..n {
        he[(j, j)] = p.k[j];
        he[(n + j, n + j)] = 1.0 / p.bath_mass(j);
        g[(0, j)] = -p.k[j];
    }
    BipartiteSystem::new(hs, QuadraticHamiltonian::new(he)?, g)
}

/// Memory kernel `K(t) = Σ k_j cos(√k_j t)`.
pub fn qbm_kernel(p: &QBMParams, t: f64) -> Result<f64> {
    p.require_unit_bath_masses()?;
    Ok(p.k.iter().map(|&k| k * (k.sqrt() * t).cos()).sum())
}

/// Bath force `F(t) = Σ k_j y_j(0) cos(√k_j t) + √k_j η_j(0) sin(√k_j t)`.
///
/// `initial` is the full phase point `(x, ξ, y_1..y_N, η_1..η_N)`.
pub fn qbm_force(p: &QBMParams, initial: &Vector, t: f64) -> Result<f64> {
    p.require_unit_bath_masses()?;
    let n = p.n();
    check_initial(n, initial)?;
    Ok((0..n)
        .map(|j| {
            let k = p.k[j];
            let w = k.sqrt();
            k * initial[2 + j] * (w * t).cos() + w * initial[2 + n + j] * (w * t).sin()
        })
        .sum())
}

fn check_initial(n: usize, initial: &Vector) -> Result<()> {
    if initial.len() != 2 + 2 * n {
        return Err(Error::DimensionMismatch {
            what: "bath-model initial condition",
            expected: 2 + 2 * n,
            found: initial.len(),
        });
    }
    Ok(())
}

/// Residual of the memory equation along an exact trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct QbmResidual {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub residual: Vec<f64>,
    pub sup_norm: f64,
}

/// Evaluates `m ẍ + ∫₀ᵗ K(t-s) ẋ(s) ds + ω_S² x + K(t) x(0) - F(t)` on a grid
/// starting at 0. The trajectory comes from the exact flow, `ẋ = ξ/m` and `ẍ`
/// from Hamilton's equations; the memory integral uses the trapezoidal rule.
pub fn qbm_residual(p: &QBMParams, initial: &Vector, t_grid: &[f64], opts: &BundleOptions) -> Result<QbmResidual> {
    p.require_unit_bath_masses()?;
    check_initial(p.n(), initial)?;
    let max_w = p.k.iter().fold(0.0f64, |a, &k| a.max(k.sqrt()));
    let max_dt = t_grid.windows(2).map(|w| w[1] - w[0]).fold(0.0f64, f64::max);
    if max_dt * max_w >= std::f64::consts::PI {
        return Err(Error::GridTooCoarse {
            reason: format!(
                "time step {max_dt} does not resolve bath frequency {max_w} (need step * frequency < pi)"
            ),
        });
    }
    let sys = qbm_build(p)?;
    let bundle = full_flow(&sys, t_grid, opts)?;
    let n = p.n();
    let ksum: f64 = p.k.iter().sum();
    let states: Vec<Vector> = bundle.samples.iter().map(|s| &s.phi.m * initial).collect();
    let x: Vec<f64> = states.iter().map(|z| z[0]).collect();
    let xdot: Vec<f64> = states.iter().map(|z| z[1] / p.mass).collect();
    let xddot: Vec<f64> = states
        .iter()
        .map(|z| {
            let pull: f64 = (0..n).map(|j| p.k[j] * z[2 + j]).sum();
            (-(p.omega_s * p.omega_s + ksum) * z[0] + pull) / p.mass
        })
        .collect();
    let mut residual = Vec::with_capacity(t_grid.len());
    for (i, &t) in t_grid.iter().enumerate() {
        let mut memory = 0.0;
        for k in 1..=i {
            let h = t_grid[k] - t_grid[k - 1];
            let a = qbm_kernel(p, t - t_grid[k - 1])? * xdot[k - 1];
            let b = qbm_kernel(p, t - t_grid[k])? * xdot[k];
            memory += 0.5 * h * (a + b);
        }
        let lhs = p.mass * xddot[i] + memory + p.omega_s * p.omega_s * x[i] + qbm_kernel(p, t)? * x[0];
        residual.push(lhs - qbm_force(p, initial, t)?);
    }
    let sup_norm = residual.iter().fold(0.0f64, |a, r| a.max(r.abs()));
    Ok(QbmResidual {
        t: t_grid.to_vec(),
        x,
        residual,
        sup_norm,
    })
}
