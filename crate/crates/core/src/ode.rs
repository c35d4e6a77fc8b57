//! Adaptive embedded Runge–Kutta integration (Dormand–Prince 5(4)).

use crate::symplectic::SymplecticForm;
use crate::{Error, Mat, Result, Vector};

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    /// Local error target, used both as absolute and relative tolerance.
    pub tol: f64,
    pub initial_step: Option<f64>,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            initial_step: None,
            max_steps: 5_000_000,
        }
    }
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evaluations: usize,
    pub last_step: f64,
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// difference between the 5th- and 4th-order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates `y' = f(t, y)` from `t0` to `t1` (either direction).
pub fn integrate<F>(mut f: F, t0: f64, t1: f64, y0: Vector, opts: &OdeOptions) -> Result<(Vector, OdeStats)>
where
    F: FnMut(f64, &Vector) -> Result<Vector>,
{
    if !(t0.is_finite() && t1.is_finite()) {
        return Err(Error::NonFinite { what: "integration interval" });
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let mut stats = OdeStats::default();
    let span = t1 - t0;
    if span == 0.0 {
        return Ok((y0, stats));
    }
    let dir = span.signum();
    let n = y0.len();

    let mut eval = |t: f64, y: &Vector, stats: &mut OdeStats| -> Result<Vector> {
        stats.rhs_evaluations += 1;
        let k = f(t, y)?;
        if k.len() != n {
            return Err(Error::DimensionMismatch {
                what: "ODE right-hand side",
                expected: n,
                found: k.len(),
            });
        }
        if k.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "ODE right-hand side" });
        }
        Ok(k)
    };

    let mut t = t0;
    let mut y = y0;
    let mut k1 = eval(t, &y, &mut stats)?;

    let mut h = match opts.initial_step {
        Some(h) => h.abs(),
        None => {
            let d0 = y.amax();
            let d1 = k1.amax();
            if d0 < 1e-5 || d1 < 1e-5 {
                1e-6
            } else {
                0.01 * d0 / d1
            }
        }
    }
    .min(span.abs());

    let mut k: [Vector; 7] = std::array::from_fn(|_| Vector::zeros(n));
    loop {
        let remaining = (t1 - t) * dir;
        if remaining <= 0.0 {
            break;
        }
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::TooManySteps {
                max_steps: opts.max_steps,
                target: t1,
            });
        }
        let mut last = false;
        if h >= remaining {
            h = remaining;
            last = true;
        }
        if h <= 1e-14 * t.abs().max(1.0) {
            return Err(Error::StepSizeUnderflow { t, step: h });
        }
        let hs = h * dir;

        k[0] = k1.clone();
        for s in 1..7 {
            let mut ys = y.clone();
            for (j, kj) in k.iter().enumerate().take(s) {
                let a = A[s][j];
                if a != 0.0 {
                    ys.axpy(hs * a, kj, 1.0);
                }
            }
            if s == 6 {
                // stage 7 is evaluated at the proposed solution (FSAL)
                k[6] = eval(t + hs, &ys, &mut stats)?;
                break;
            }
            k[s] = eval(t + C[s] * hs, &ys, &mut stats)?;
        }
        let mut y_new = y.clone();
        for (j, kj) in k.iter().enumerate().take(6) {
            let b = A[6][j];
            if b != 0.0 {
                y_new.axpy(hs * b, kj, 1.0);
            }
        }
        let mut err: f64 = 0.0;
        for i in 0..n {
            let mut e = 0.0;
            for (j, kj) in k.iter().enumerate() {
                e += E[j] * kj[i];
            }
            let sc = opts.tol * (1.0 + y[i].abs().max(y_new[i].abs()));
            err = err.max((hs * e).abs() / sc);
        }
        if !err.is_finite() {
            return Err(Error::NonFinite { what: "ODE error estimate" });
        }
        if err <= 1.0 {
            stats.accepted += 1;
            stats.last_step = h;
            t = if last { t1 } else { t + hs };
            y = y_new;
            k1 = k[6].clone();
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h *= factor;
        } else {
            stats.rejected += 1;
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
        }
    }
    Ok((y, stats))
}

/// Options for [`integrate_flow`].
#[derive(Debug, Clone)]
pub struct FlowOptions {
    pub ode: OdeOptions,
    /// When set, the symplectic deviation of the result is reported.
    pub form: Option<SymplecticForm>,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            ode: OdeOptions::default(),
            form: None,
        }
    }
}

impl FlowOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            ode: OdeOptions::with_tol(tol),
            form: None,
        }
    }

    pub fn checked(mut self, form: SymplecticForm) -> Self {
        self.form = Some(form);
        self
    }
}

#[derive(Debug, Clone)]
pub struct FlowIntegration {
    pub u: Mat,
    pub stats: OdeStats,
    /// `max |U^T J U - J|` when a form was supplied; the result is never projected.
    pub symplectic_deviation: Option<f64>,
}

/// Propagator `U(t1, t0)` of `U' = K(t) U`, `U(t0) = I`.
pub fn integrate_flow<F>(generator: F, t0: f64, t1: f64, opts: &FlowOptions) -> Result<FlowIntegration>
where
    F: Fn(f64) -> Result<Mat>,
{
    let probe = generator(t0)?;
    if probe.nrows() != probe.ncols() {
        return Err(Error::NotSquare {
            rows: probe.nrows(),
            cols: probe.ncols(),
        });
    }
    let dim = probe.nrows();
    if let Some(form) = &opts.form {
        if form.dim() != dim {
            return Err(Error::DimensionMismatch {
                what: "symplectic form vs generator",
                expected: dim,
                found: form.dim(),
            });
        }
    }
    let y0 = Vector::from_column_slice(Mat::identity(dim, dim).as_slice());
    let (y, stats) = integrate(
        |t, y| {
            let k = generator(t)?;
            if k.nrows() != dim || k.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    what: "generator",
                    expected: dim,
                    found: k.nrows(),
                });
            }
            if k.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { what: "generator" });
            }
            let u = Mat::from_column_slice(dim, dim, y.as_slice());
            Ok(Vector::from_column_slice((k * u).as_slice()))
        },
        t0,
        t1,
        y0,
        &opts.ode,
    )?;
    let u = Mat::from_column_slice(dim, dim, y.as_slice());
    let symplectic_deviation = opts.form.as_ref().map(|f| f.deviation(&u));
    Ok(FlowIntegration {
        u,
        stats,
        symplectic_deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let (y, stats) = integrate(
            |_, y| Ok(-y.clone()),
            0.0,
            3.0,
            Vector::from_element(1, 1.0),
            &OdeOptions::with_tol(1e-12),
        )
        .unwrap();
        assert!((y[0] - (-3.0f64).exp()).abs() < 1e-11);
        assert!(stats.accepted > 0);
    }

    #[test]
    fn backwards_integration() {
        let (y, _) = integrate(
            |_, y| Ok(y.clone()),
            1.0,
            0.0,
            Vector::from_element(1, 1.0f64.exp()),
            &OdeOptions::with_tol(1e-12),
        )
        .unwrap();
        assert!((y[0] - 1.0).abs() < 1e-11);
    }

    #[test]
    fn harmonic_oscillator_phase() {
        let (y, _) = integrate(
            |_, y| Ok(Vector::from_vec(vec![y[1], -y[0]])),
            0.0,
            10.0,
            Vector::from_vec(vec![1.0, 0.0]),
            &OdeOptions::with_tol(1e-12),
        )
        .unwrap();
        assert!((y[0] - 10f64.cos()).abs() < 1e-10);
        assert!((y[1] + 10f64.sin()).abs() < 1e-10);
    }

    #[test]
    fn non_finite_rhs_is_rejected() {
        let r = integrate(
            |_, _| Ok(Vector::from_element(1, f64::NAN)),
            0.0,
            1.0,
            Vector::from_element(1, 1.0),
            &OdeOptions::default(),
        );
        assert!(matches!(r, Err(Error::NonFinite { .. })));
    }

    #[test]
    fn blow_up_underflows() {
        // y' = y^2 blows up at t = 1
        let r = integrate(
            |_, y| Ok(y.component_mul(y)),
            0.0,
            2.0,
            Vector::from_element(1, 1.0),
            &OdeOptions::with_tol(1e-10),
        );
        assert!(r.is_err());
    }

    #[test]
    fn zero_generator_gives_identity() {
        let r = integrate_flow(|_| Ok(Mat::zeros(4, 4)), 0.0, 3.0, &FlowOptions::default()).unwrap();
        assert_eq!(r.u, Mat::identity(4, 4));
    }

    #[test]
    fn constant_generator_matches_exponential() {
        let form = SymplecticForm::standard(2);
        let mut h = Mat::identity(4, 4);
        h[(0, 1)] = 0.4;
        h[(1, 0)] = 0.4;
        h[(2, 2)] = 2.0;
        let k = form.matrix() * h;
        let opts = FlowOptions::with_tol(1e-12).checked(form);
        let r = integrate_flow(|_| Ok(k.clone()), 0.0, 2.5, &opts).unwrap();
        let e = crate::symplectic::matrix_exponential(&k, 2.5).unwrap();
        assert!((&r.u - e).amax() < 1e-10);
        assert!(r.symplectic_deviation.unwrap() < 1e-10);
    }

    #[test]
    fn group_property() {
        let form = SymplecticForm::standard(1);
        let k = |t: f64| Ok(form.matrix() * Mat::from_diagonal(&Vector::from_vec(vec![1.0 + 0.5 * t.sin(), 1.0])));
        let opts = FlowOptions::with_tol(1e-12);
        let a = integrate_flow(k, 0.0, 1.0, &opts).unwrap().u;
        let b = integrate_flow(k, 1.0, 2.0, &opts).unwrap().u;
        let c = integrate_flow(k, 0.0, 2.0, &opts).unwrap().u;
        assert!((b * a - c).amax() < 1e-10);
    }
}
