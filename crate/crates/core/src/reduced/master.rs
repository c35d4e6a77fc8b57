//! Coefficients of the reduced master equation
//! `∂ρ = (A∇)·zρ + (B∇)·∇ρ + v·∇ρ` (plus `{H_S, ρ}` in the Schrödinger picture).

use crate::bipartite::{BipartiteSystem, FlowBundle, FlowSample};
use crate::ode::{integrate, OdeOptions};
use crate::par::{self, Execution};
use crate::reduced::Picture;
use crate::states::GaussianState;
use crate::symplectic::SymplecticForm;
use crate::{Error, Mat, Result, Vector};

/// Relative singular-value threshold below which `P_ii` counts as singular.
pub const SINGULAR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct MasterCoefficients {
    pub t: f64,
    pub picture: Picture,
    /// Drift `A(t)`.
    pub a: Mat,
    /// Diffusion `B(t)`, symmetric.
    pub b: Mat,
    /// Mean drift `v(t)`.
    pub v: Vector,
    /// Thermal covariance `Θ(t) = P_ie Γ_E P_ie^T`.
    pub theta: Mat,
    /// Free transport generator `J_S ∇²H_S(t)` (zero in the interaction picture).
    pub transport: Mat,
    pub det_ii: f64,
    /// `σ_max / σ_min` of the `ii` block.
    pub condition_ii: f64,
}

impl MasterCoefficients {
    /// Effective linear drift of the moments, `K - A^T`.
    pub fn drift(&self) -> Mat {
        &self.transport - self.a.transpose()
    }
}

fn picture_blocks(sample: &FlowSample, picture: Picture) -> (&crate::symplectic::PhaseSpaceFlow, &Mat) {
    match picture {
        Picture::Interaction => (&sample.psi, &sample.g_t),
        Picture::Schrodinger => (&sample.phi, &sample.g),
    }
}

/// Coefficients at one flow sample.
///
/// With `P` the flow of the chosen picture and `g` its coupling:
/// `A^T = -J_S g P_ei P_ii^{-1}`, `L = J_S g (P_ee - P_ei P_ii^{-1} P_ie) Γ_E P_ie^T`,
/// `B = (L + L^T)/2`, `v = -J_S g (P_ee - P_ei P_ii^{-1} P_ie) m_E`.
pub fn coefficients_at(sample: &FlowSample, e0: &GaussianState, picture: Picture) -> Result<MasterCoefficients> {
    let (flow, g) = picture_blocks(sample, picture);
    let d = flow.d;
    if e0.dof() != flow.n_env {
        return Err(Error::DimensionMismatch {
            what: "environment state",
            expected: 2 * flow.n_env,
            found: 2 * e0.dof(),
        });
    }
    let (ii, ie, ei, ee) = (flow.ii(), flow.ie(), flow.ei(), flow.ee());
    let det_ii = ii.determinant();
    let sv = ii.clone().singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    let condition_ii = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(smin > SINGULAR_TOL * smax) {
        return Err(Error::SingularBlock {
            t: sample.t,
            det: det_ii,
            condition: condition_ii,
        });
    }
    let lu = ii.clone().lu();
    let solve_right = |m: &Mat| -> Result<Mat> {
        // X = M P_ii^{-1}  <=>  P_ii^T X^T = M^T
        let xt = ii
            .transpose()
            .lu()
            .solve(&m.transpose())
            .ok_or(Error::SingularBlock {
                t: sample.t,
                det: det_ii,
                condition: condition_ii,
            })?;
        Ok(xt.transpose())
    };
    let js = SymplecticForm::standard(d);
    let jg = js.matrix() * g;
    let ei_inv = solve_right(&ei)?;
    let a_t = -(&jg * &ei_inv);
    let inv_ie = lu.solve(&ie).ok_or(Error::SingularBlock {
        t: sample.t,
        det: det_ii,
        condition: condition_ii,
    })?;
    let schur = &ee - &ei * inv_ie;
    let l = &jg * &schur * e0.cov() * ie.transpose();
    let b = (&l + l.transpose()) * 0.5;
    let v = -(&jg * &schur * e0.mean());
    let theta = &ie * e0.cov() * ie.transpose();
    let transport = match picture {
        Picture::Interaction => Mat::zeros(2 * d, 2 * d),
        Picture::Schrodinger => sample.ks.clone(),
    };
    Ok(MasterCoefficients {
        t: sample.t,
        picture,
        a: a_t.transpose(),
        b,
        v,
        theta: (&theta + theta.transpose()) * 0.5,
        transport,
        det_ii,
        condition_ii,
    })
}

/// Coefficients on every grid point; fails at the first singular `ii` block.
pub fn master_coefficients(
    bundle: &FlowBundle,
    e0: &GaussianState,
    picture: Picture,
    execution: Execution,
) -> Result<Vec<MasterCoefficients>> {
    par::try_map(execution, &bundle.samples, |s| coefficients_at(s, e0, picture))
}

/// Coefficients at an arbitrary time.
pub fn coefficients_at_time(
    sys: &BipartiteSystem,
    t: f64,
    e0: &GaussianState,
    picture: Picture,
    tol: f64,
) -> Result<MasterCoefficients> {
    coefficients_at(&FlowSample::at(sys, t, tol)?, e0, picture)
}

/// Time scale `1/|K|_F` of the coupled generator at `t = 0`.
pub fn timescale(sys: &BipartiteSystem) -> Result<f64> {
    let n = crate::bipartite::generator(sys, 0.0)?.norm();
    Ok(if n > 0.0 { 1.0 / n } else { 1.0 })
}

/// `d/dt A^T` and `d/dt B` at `t = 0`: `-J_S G J_E G^T` and `-J_S G Γ_E G^T J_S`.
pub fn initial_coefficient_rates(sys: &BipartiteSystem, e0: &GaussianState) -> Result<(Mat, Mat)> {
    let g = sys.g_at(0.0)?;
    let js = SymplecticForm::standard(sys.d());
    let je = SymplecticForm::standard(sys.n_env());
    let a_t_dot = -(js.matrix() * &g * je.matrix() * g.transpose());
    let b_dot = -(js.matrix() * &g * e0.cov() * g.transpose() * js.matrix());
    Ok((a_t_dot, b_dot))
}

/// Checks `2B = A^T Θ + Θ A + dΘ/dt` (minus `KΘ + ΘK^T` in the Schrödinger
/// picture) with a central difference of step `1e-5 · timescale`; returns the
/// largest entrywise mismatch relative to `max(1, |B|_max)`.
pub fn consistency_residual(
    sys: &BipartiteSystem,
    t: f64,
    e0: &GaussianState,
    picture: Picture,
    tol: f64,
) -> Result<f64> {
    let h = 1e-5 * timescale(sys)?;
    let c = coefficients_at_time(sys, t, e0, picture, tol)?;
    let theta = |s: f64| -> Result<Mat> {
        let sample = FlowSample::at(sys, s, tol)?;
        let (flow, _) = picture_blocks(&sample, picture);
        let ie = flow.ie();
        Ok(&ie * e0.cov() * ie.transpose())
    };
    let dtheta = (theta(t + h)? - theta(t - h)?) / (2.0 * h);
    let at = c.a.transpose();
    let mut rhs = &at * &c.theta + &c.theta * &c.a + dtheta;
    if picture == Picture::Schrodinger {
        rhs -= &c.transport * &c.theta + &c.theta * c.transport.transpose();
    }
    Ok((rhs * 0.5 - &c.b).amax() / c.b.amax().max(1.0))
}

/// First and second moments `(m, μ)` with `μ = Γ + m m^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub t: f64,
    pub mean: Vector,
    pub second: Mat,
}

/// Closed-form moments: `m = P_ii m_S + P_ie m_E`,
/// `μ = P_ii Γ_S P_ii^T + P_ie Γ_E P_ie^T + m m^T`.
pub fn closed_form_moments(sample: &FlowSample, s0: &GaussianState, e0: &GaussianState, picture: Picture) -> Moments {
    let (flow, _) = picture_blocks(sample, picture);
    let (ii, ie) = (flow.ii(), flow.ie());
    let mean = &ii * s0.mean() + &ie * e0.mean();
    let cov = &ii * s0.cov() * ii.transpose() + &ie * e0.cov() * ie.transpose();
    let second = cov + &mean * mean.transpose();
    Moments {
        t: sample.t,
        mean,
        second,
    }
}

/// Integrates the moment equations
/// `ṁ = (K - A^T) m - v`, `μ̇ = 2B + (K - A^T) μ + μ (K - A^T)^T - v m^T - m v^T`
/// with coefficients evaluated from the exact flows, on a grid starting at 0.
/// Only meaningful before the critical time.
pub fn propagate_moments(
    sys: &BipartiteSystem,
    s0: &GaussianState,
    e0: &GaussianState,
    picture: Picture,
    t_grid: &[f64],
    tol: f64,
) -> Result<Vec<Moments>> {
    crate::reduced::check_inputs(sys.d(), sys.n_env(), s0, e0)?;
    let s = 2 * sys.d();
    let pack = |m: &Vector, mu: &Mat| {
        let mut y = Vec::with_capacity(s + s * s);
        y.extend_from_slice(m.as_slice());
        y.extend_from_slice(mu.as_slice());
        Vector::from_vec(y)
    };
    let unpack = |y: &Vector| {
        (
            Vector::from_column_slice(&y.as_slice()[..s]),
            Mat::from_column_slice(s, s, &y.as_slice()[s..]),
        )
    };
    let mu0 = s0.cov() + s0.mean() * s0.mean().transpose();
    let mut y = pack(s0.mean(), &mu0);
    let rhs = |t: f64, y: &Vector| -> Result<Vector> {
        let c = coefficients_at_time(sys, t, e0, picture, tol * 1e-2)?;
        let (m, mu) = unpack(y);
        let k = c.drift();
        let dm = &k * &m - &c.v;
        let vm = &c.v * m.transpose();
        let dmu = &c.b * 2.0 + &k * &mu + &mu * k.transpose() - &vm - vm.transpose();
        Ok(pack(&dm, &dmu))
    };
    let opts = OdeOptions::with_tol(tol);
    let mut out = Vec::with_capacity(t_grid.len());
    let mut prev = 0.0;
    for &t in t_grid {
        if t < prev {
            return Err(Error::InvalidGrid("time grid must be sorted and start at 0".into()));
        }
        if t > prev {
            y = integrate(rhs, prev, t, y, &opts)?.0;
            prev = t;
        }
        let (mean, second) = unpack(&y);
        out.push(Moments { t, mean, second });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bipartite::{full_flow, BundleOptions};
    use crate::models::{two_oscillator_system, TwoOscillatorParams};

    fn system() -> BipartiteSystem {
        two_oscillator_system(&TwoOscillatorParams::new(1.0, 1.0, 0.5).unwrap()).unwrap()
    }

    #[test]
    fn coefficients_vanish_at_zero() {
        let b = full_flow(&system(), &[0.0], &BundleOptions::default()).unwrap();
        let e0 = GaussianState::thermal_tau(1, 0.5).unwrap();
        for pic in [Picture::Interaction, Picture::Schrodinger] {
            let c = coefficients_at(&b.samples[0], &e0, pic).unwrap();
            assert_eq!(c.a.amax(), 0.0);
            assert_eq!(c.b.amax(), 0.0);
            assert_eq!(c.theta.amax(), 0.0);
        }
    }

    #[test]
    fn singular_block_is_reported() {
        let p = TwoOscillatorParams::new(1.0, 1.0, 0.5).unwrap();
        let sys = two_oscillator_system(&p).unwrap();
        let scan = crate::models::two_oscillator_critical_time(&p, 20.0, 0.01).unwrap();
        let tc = scan.root.unwrap();
        let mut sample = FlowSample::at(&sys, tc, 1e-12).unwrap();
        let e0 = GaussianState::vacuum(1);
        let near = coefficients_at(&sample, &e0, Picture::Schrodinger).unwrap();
        assert!(near.condition_ii > 1e8);
        sample.phi.m.view_mut((0, 0), (2, 2)).fill(1.0);
        let r = coefficients_at(&sample, &e0, Picture::Schrodinger);
        assert!(matches!(r, Err(Error::SingularBlock { .. })));
    }

    #[test]
    fn consistency_identity_both_pictures() {
        let sys = system();
        let e0 = GaussianState::thermal_tau(1, 0.4).unwrap();
        for pic in [Picture::Interaction, Picture::Schrodinger] {
            for &t in &[0.3, 1.7] {
                let r = consistency_residual(&sys, t, &e0, pic, 1e-12).unwrap();
                assert!(r < 1e-7, "{pic:?} {t} {r}");
            }
        }
    }

    #[test]
    fn mean_transport_matches_flow() {
        let sys = system();
        let s0 = GaussianState::vacuum(1)
            .with_mean(Vector::from_vec(vec![0.4, -0.2]))
            .unwrap();
        let e0 = GaussianState::thermal_tau(1, 0.7)
            .unwrap()
            .with_mean(Vector::from_vec(vec![0.1, 0.3]))
            .unwrap();
        let grid = [0.0, 0.5, 1.0, 2.0];
        let bundle = full_flow(&sys, &grid, &BundleOptions::default()).unwrap();
        for pic in [Picture::Interaction, Picture::Schrodinger] {
            let m = propagate_moments(&sys, &s0, &e0, pic, &grid, 1e-10).unwrap();
            for (mm, s) in m.iter().zip(&bundle.samples) {
                let exact = closed_form_moments(s, &s0, &e0, pic);
                assert!((&mm.mean - &exact.mean).amax() < 1e-7, "{pic:?}");
                assert!((&mm.second - &exact.second).amax() < 1e-7, "{pic:?}");
            }
        }
    }
}
