//! Critical time: first zero of `det Φ_ii^t`.

use crate::bipartite::{generator, BipartiteSystem};
use crate::ode::{integrate_flow, FlowOptions};
use crate::par::{self, Execution};
use crate::symplectic::matrix_exponential;
use crate::{Error, Result};

/// Result of scanning a scalar function for its first sign change on `[0, t_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignChangeScan {
    pub root: Option<f64>,
    /// Smallest `|f|` seen before the root (or over the whole range).
    pub min_abs: f64,
    pub samples: usize,
    /// Sample times where `|f|` had a local minimum below the margin without
    /// a sign change.
    pub near_misses: Vec<f64>,
}

/// Scans `values[k] = f(times[k])` for the first sign change and refines it
/// by bisection on `f` to relative accuracy `rel_tol`.
pub fn first_sign_change_sampled<F>(
    f: F,
    times: &[f64],
    values: &[f64],
    margin: f64,
    rel_tol: f64,
) -> Result<SignChangeScan>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut min_abs = f64::INFINITY;
    let mut near_misses = Vec::new();
    for k in 0..values.len() {
        let v = values[k];
        if !v.is_finite() {
            return Err(Error::NonFinite { what: "sampled determinant" });
        }
        if v == 0.0 {
            return Ok(SignChangeScan {
                root: Some(times[k]),
                min_abs: 0.0,
                samples: k + 1,
                near_misses,
            });
        }
        if k > 0 && (values[k - 1] > 0.0) != (v > 0.0) {
            let root = bisect(&f, times[k - 1], times[k], values[k - 1], rel_tol)?;
            return Ok(SignChangeScan {
                root: Some(root),
                min_abs: min_abs.min(v.abs()),
                samples: k + 1,
                near_misses,
            });
        }
        min_abs = min_abs.min(v.abs());
        let local_min = k > 0
            && k + 1 < values.len()
            && v.abs() < values[k - 1].abs()
            && v.abs() <= values[k + 1].abs();
        if local_min && v.abs() < margin {
            near_misses.push(times[k]);
        }
    }
    Ok(SignChangeScan {
        root: None,
        min_abs,
        samples: values.len(),
        near_misses,
    })
}

fn bisect<F>(f: &F, mut lo: f64, mut hi: f64, f_lo: f64, rel_tol: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let lo_positive = f_lo > 0.0;
    for _ in 0..200 {
        if hi - lo <= rel_tol * hi.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let v = f(mid)?;
        if v == 0.0 {
            return Ok(mid);
        }
        if (v > 0.0) == lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Uniform sample times `0, h, 2h, .., t_max` (the last one exactly `t_max`).
pub fn sample_times(t_max: f64, step: f64) -> Vec<f64> {
    let n = (t_max / step).ceil().max(1.0) as usize;
    (0..=n).map(|k| (k as f64 * step).min(t_max)).collect()
}

/// First sign change of `f` on `[0, t_max]` sampled with spacing `step`.
pub fn first_sign_change<F>(f: F, t_max: f64, step: f64, margin: f64, rel_tol: f64) -> Result<SignChangeScan>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(t_max > 0.0 && step > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need t_max > 0 and step > 0, got {t_max} and {step}"
        )));
    }
    let times = sample_times(t_max, step);
    let values = times.iter().map(|&t| f(t)).collect::<Result<Vec<_>>>()?;
    first_sign_change_sampled(f, &times, &values, margin, rel_tol)
}

#[derive(Debug, Clone, Copy)]
pub struct CriticalTimeOptions {
    /// Sampling step; defaults to `0.02 / |K|_F` with `K` the generator at 0.
    pub step: Option<f64>,
    /// `|det|` below this without a sign change triggers a warning.
    pub margin: f64,
    pub rel_tol: f64,
    /// Integrator tolerance for time-dependent systems.
    pub ode_tol: f64,
    pub execution: Execution,
}

impl Default for CriticalTimeOptions {
    fn default() -> Self {
        Self {
            step: None,
            margin: 1e-6,
            rel_tol: 1e-10,
            ode_tol: 1e-11,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalTimeReport {
    /// First zero of `det Φ_ii^t` in `(0, t_max]`, if any.
    pub t_c: Option<f64>,
    pub t_max: f64,
    pub step: f64,
    pub min_abs_det: f64,
    pub samples: usize,
    /// `t_c · |G|_F`, bounded below for small coupling.
    pub scaled_t_c: Option<f64>,
    pub warnings: Vec<String>,
}

/// Locates the critical time of a coupled system on `(0, t_max]`.
pub fn critical_time(sys: &BipartiteSystem, t_max: f64, opts: &CriticalTimeOptions) -> Result<CriticalTimeReport> {
    if !(t_max > 0.0) || !t_max.is_finite() {
        return Err(Error::InvalidParameter(format!("t_max must be positive, got {t_max}")));
    }
    let k0 = generator(sys, 0.0)?;
    let step = match opts.step {
        Some(h) if h > 0.0 => h,
        Some(h) => return Err(Error::InvalidParameter(format!("sampling step must be positive, got {h}"))),
        None => {
            let norm = k0.norm();
            if norm > 0.0 {
                (0.02 / norm).min(t_max)
            } else {
                t_max / 1000.0
            }
        }
    };
    let s = 2 * sys.d();
    let det_ii = |m: &crate::Mat| m.view((0, 0), (s, s)).determinant();
    let times = sample_times(t_max, step);
    let (values, eval): (Vec<f64>, Box<dyn Fn(f64) -> Result<f64> + '_>) = if sys.is_autonomous() {
        let k = k0.clone();
        let values = par::try_map(opts.execution, &times, |&t| Ok(det_ii(&matrix_exponential(&k, t)?)))?;
        (values, Box::new(move |t| Ok(det_ii(&matrix_exponential(&k0, t)?))))
    } else {
        let gen = |t: f64| generator(sys, t);
        let fopts = FlowOptions::with_tol(opts.ode_tol);
        let dim = sys.dim();
        let mut values = Vec::with_capacity(times.len());
        let mut u = crate::Mat::identity(dim, dim);
        let mut prev = 0.0;
        for &t in &times {
            if t > prev {
                u = integrate_flow(gen, prev, t, &fopts)?.u * u;
                prev = t;
            }
            values.push(det_ii(&u));
        }
        (
            values,
            Box::new(move |t| Ok(det_ii(&integrate_flow(gen, 0.0, t, &fopts)?.u))),
        )
    };
    let scan = first_sign_change_sampled(eval, &times, &values, opts.margin, opts.rel_tol)?;
    let mut warnings: Vec<String> = scan
        .near_misses
        .iter()
        .map(|t| format!("|det Phi_ii| dips below {:e} near t = {t} without a sign change", opts.margin))
        .collect();
    if scan.root.is_none() && scan.min_abs < opts.margin && warnings.is_empty() {
        warnings.push(format!(
            "|det Phi_ii| reached {:e} without a sign change; sampling may be too coarse",
            scan.min_abs
        ));
    }
    let g_norm = sys.g_at(0.0)?.norm();
    Ok(CriticalTimeReport {
        t_c: scan.root,
        t_max,
        step,
        min_abs_det: scan.min_abs,
        samples: scan.samples,
        scaled_t_c: scan.root.map(|t| t * g_norm),
        warnings,
    })
}
