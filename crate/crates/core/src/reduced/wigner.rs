//! Reduced Wigner functions on a phase-space grid, propagated in Fourier
//! space: `ρ̃_S(t, ζ) = ρ̃_S(0, Φ_ii^T ζ) exp(-½ ζ·Θ(t) ζ) e^{-iζ·Φ_ie m_E}`.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::bipartite::FlowSample;
use crate::par::{self, Execution};
use crate::states::{wigner_eval, GaussianState};
use crate::{Error, Result, Vector};

/// Uniform axis `min, min + step, .., min + (len - 1) step`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub min: f64,
    pub step: f64,
    pub len: usize,
}

impl Axis {
    /// `len` points symmetric about 0 spanning `[-half_width, half_width]`.
    pub fn symmetric(half_width: f64, len: usize) -> Self {
        Self {
            min: -half_width,
            step: 2.0 * half_width / (len - 1) as f64,
            len,
        }
    }

    pub fn point(&self, k: usize) -> f64 {
        self.min + k as f64 * self.step
    }

    pub fn center(&self) -> f64 {
        self.min + 0.5 * (self.len - 1) as f64 * self.step
    }
}

/// Rectangular grid on `R^{2d}`, one axis per coordinate in `(x.., ξ..)`
/// order; samples are stored row-major (last axis fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseGrid {
    pub axes: Vec<Axis>,
}

impl PhaseGrid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() || axes.len() % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "phase-space grid needs an even number of axes, got {}",
                axes.len()
            )));
        }
        if axes.len() > 4 {
            return Err(Error::InvalidGrid("grid propagation supports d <= 2".into()));
        }
        for a in &axes {
            if a.len < 4 || !(a.step > 0.0) || !a.min.is_finite() {
                return Err(Error::InvalidGrid(format!("bad axis {a:?}")));
            }
        }
        Ok(Self { axes })
    }

    pub fn d(&self) -> usize {
        self.axes.len() / 2
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.step).product()
    }

    pub fn point(&self, mut idx: usize) -> Vector {
        let mut z = Vector::zeros(self.axes.len());
        for (a, axis) in self.axes.iter().enumerate().rev() {
            z[a] = axis.point(idx % axis.len);
            idx /= axis.len;
        }
        z
    }

    fn on_boundary(&self, mut idx: usize) -> bool {
        for axis in self.axes.iter().rev() {
            let k = idx % axis.len;
            if k == 0 || k == axis.len - 1 {
                return true;
            }
            idx /= axis.len;
        }
        false
    }
}

/// Samples of a Gaussian Wigner function on a grid.
pub fn sample_gaussian(grid: &PhaseGrid, state: &GaussianState) -> Result<Vec<f64>> {
    (0..grid.len()).map(|k| wigner_eval(state, &grid.point(k))).collect()
}

/// `(2π)^{-d} Σ ρ h^{2d}`: the trace of the represented operator.
pub fn grid_trace(grid: &PhaseGrid, samples: &[f64]) -> f64 {
    let s: f64 = samples.iter().sum();
    s * grid.cell_volume() / (2.0 * std::f64::consts::PI).powi(grid.d() as i32)
}

#[derive(Debug, Clone, Copy)]
pub struct WignerOptions {
    /// Zero-padding factor per axis; `None` picks 2 for `d = 1`, 1 for `d = 2`.
    pub pad: Option<usize>,
    /// Lagrange stencil width for the frequency pullback (even); `None` picks
    /// 8 for `d = 1`, 6 for `d = 2`.
    pub order: Option<usize>,
    /// Maximum boundary/peak ratio of the input samples.
    pub boundary_tol: f64,
    /// Maximum spectrum magnitude (relative to its peak) in the outer 10% of the band.
    pub band_tol: f64,
    pub execution: Execution,
}

impl Default for WignerOptions {
    fn default() -> Self {
        Self {
            pad: None,
            order: None,
            boundary_tol: 1e-8,
            band_tol: 1e-6,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WignerGrid {
    pub samples: Vec<f64>,
    /// `false` when the output spectrum is not resolved by the grid because
    /// `Φ_ii` is (nearly) singular; samples are then only indicative.
    pub resolved: bool,
    /// Largest output spectrum magnitude near the band edge, relative to its peak.
    pub band_edge_ratio: f64,
    /// Largest imaginary part of the inverse transform, relative to the peak.
    pub max_imag: f64,
}

struct Spectrum {
    dims: Vec<usize>,
    data: Vec<Complex64>,
}

impl Spectrum {
    fn fft(&mut self, planner: &mut FftPlanner<f64>, inverse: bool) {
        let total = self.data.len();
        let mut stride = 1;
        for a in (0..self.dims.len()).rev() {
            let n = self.dims[a];
            let fft = if inverse {
                planner.plan_fft_inverse(n)
            } else {
                planner.plan_fft_forward(n)
            };
            let mut line = vec![Complex64::new(0.0, 0.0); n];
            for outer in 0..total / (n * stride) {
                for inner in 0..stride {
                    let base = outer * n * stride + inner;
                    for (k, l) in line.iter_mut().enumerate() {
                        *l = self.data[base + k * stride];
                    }
                    fft.process(&mut line);
                    for (k, l) in line.iter().enumerate() {
                        self.data[base + k * stride] = *l;
                    }
                }
            }
            stride *= n;
        }
    }

    fn unravel(&self, mut idx: usize, out: &mut [usize]) {
        for a in (0..self.dims.len()).rev() {
            out[a] = idx % self.dims[a];
            idx /= self.dims[a];
        }
    }
}

fn lagrange_weights(s: f64, width: usize, w: &mut [f64]) {
    // nodes 0..width at integer offsets; s is the position in node units
    for (m, wm) in w.iter_mut().enumerate().take(width) {
        let mut v = 1.0;
        for n in 0..width {
            if n != m {
                v *= (s - n as f64) / (m as f64 - n as f64);
            }
        }
        *wm = v;
    }
}

/// Propagates grid samples of `ρ_S(0)` to the time of `sample`.
///
/// The samples are Fourier transformed (centred on the grid midpoint, with
/// zero padding), the spectrum is pulled back by `Φ_ii^T` with tensor Lagrange
/// interpolation, damped by `exp(-½ζ·Θζ)` and transformed back. The
/// environment must be Gaussian; its mean contributes a translation.
pub fn reduced_wigner_grid(
    sample: &FlowSample,
    grid: &PhaseGrid,
    initial: &[f64],
    e0: &GaussianState,
    opts: &WignerOptions,
) -> Result<WignerGrid> {
    let d = grid.d();
    let dim = 2 * d;
    if sample.phi.d != d {
        return Err(Error::DimensionMismatch {
            what: "grid dimension vs system",
            expected: 2 * sample.phi.d,
            found: dim,
        });
    }
    if e0.dof() != sample.phi.n_env {
        return Err(Error::DimensionMismatch {
            what: "environment state",
            expected: 2 * sample.phi.n_env,
            found: 2 * e0.dof(),
        });
    }
    if initial.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            what: "grid samples",
            expected: grid.len(),
            found: initial.len(),
        });
    }
    if initial.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "grid samples" });
    }
    let peak = initial.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if peak == 0.0 {
        return Err(Error::InvalidGrid("input samples vanish identically".into()));
    }
    let boundary = (0..grid.len())
        .filter(|&k| grid.on_boundary(k))
        .fold(0.0f64, |a, k| a.max(initial[k].abs()));
    if boundary > opts.boundary_tol * peak {
        return Err(Error::BoundaryDecay {
            ratio: boundary / peak,
        });
    }
    let pad = opts.pad.unwrap_or(if d == 1 { 2 } else { 1 }).max(1);
    let width = opts.order.unwrap_or(if d == 1 { 8 } else { 6 });
    if width < 2 || width % 2 != 0 {
        return Err(Error::InvalidParameter(format!("interpolation order must be even, got {width}")));
    }

    let dims: Vec<usize> = grid.axes.iter().map(|a| a.len * pad).collect();
    let total: usize = dims.iter().product();
    let dzeta: Vec<f64> = grid
        .axes
        .iter()
        .zip(&dims)
        .map(|(a, &n)| 2.0 * std::f64::consts::PI / (n as f64 * a.step))
        .collect();
    let centers: Vec<f64> = grid.axes.iter().map(|a| a.center()).collect();
    let mins: Vec<f64> = grid.axes.iter().map(|a| a.min).collect();
    let signed = |j: usize, n: usize| if j < n / 2 { j as f64 } else { j as f64 - n as f64 };

    let mut planner = FftPlanner::new();
    let mut spec = Spectrum {
        dims: dims.clone(),
        data: vec![Complex64::new(0.0, 0.0); total],
    };
    {
        let mut idx = vec![0usize; dim];
        for (k, &v) in initial.iter().enumerate() {
            let mut rem = k;
            for a in (0..dim).rev() {
                idx[a] = rem % grid.axes[a].len;
                rem /= grid.axes[a].len;
            }
            let mut flat = 0;
            for a in 0..dim {
                flat = flat * dims[a] + idx[a];
            }
            spec.data[flat] = Complex64::new(v, 0.0);
        }
    }
    spec.fft(&mut planner, false);

    // centred spectrum F_c(ζ) = Σ f_k e^{-i(z_k - c)·ζ}, rearranged so that
    // index u corresponds to ζ = (u - n/2) Δζ
    let mut centred = vec![Complex64::new(0.0, 0.0); total];
    let mut input_edge: f64 = 0.0;
    let mut input_peak: f64 = 0.0;
    {
        let mut j = vec![0usize; dim];
        for flat in 0..total {
            spec.unravel(flat, &mut j);
            let mut phase = 0.0;
            let mut target = 0;
            let mut edge = false;
            for a in 0..dim {
                let js = signed(j[a], dims[a]);
                phase -= (mins[a] - centers[a]) * js * dzeta[a];
                let u = (js + (dims[a] / 2) as f64) as usize;
                target = target * dims[a] + u;
                edge |= js.abs() >= 0.9 * (dims[a] / 2) as f64;
            }
            let v = spec.data[flat] * Complex64::from_polar(1.0, phase);
            input_peak = input_peak.max(v.norm());
            if edge {
                input_edge = input_edge.max(v.norm());
            }
            centred[target] = v;
        }
    }
    if input_edge > opts.band_tol * input_peak {
        return Err(Error::GridTooCoarse {
            reason: format!(
                "input spectrum at the band edge is {:e} of its peak",
                input_edge / input_peak
            ),
        });
    }

    let flow_ii = sample.phi.ii();
    let mt = flow_ii.transpose();
    let theta = {
        let ie = sample.phi.ie();
        &ie * e0.cov() * ie.transpose()
    };
    let shift = sample.phi.ie() * e0.mean();
    let cell = grid.cell_volume();

    let spectrum: Vec<Complex64> = par::map_range(opts.execution, total, |flat| {
        let mut j = vec![0usize; dim];
        let mut rem = flat;
        for a in (0..dim).rev() {
            j[a] = rem % dims[a];
            rem /= dims[a];
        }
        let zeta = Vector::from_iterator(dim, (0..dim).map(|a| signed(j[a], dims[a]) * dzeta[a]));
        let omega = &mt * &zeta;
        let value = interpolate(&centred, &dims, &dzeta, &omega, width);
        if value == Complex64::new(0.0, 0.0) {
            return value;
        }
        let damp = (-0.5 * zeta.dot(&(&theta * &zeta))).exp();
        let mut phase = 0.0;
        for a in 0..dim {
            phase += -centers[a] * omega[a] - shift[a] * zeta[a] + mins[a] * zeta[a];
        }
        value * Complex64::from_polar(cell * damp, phase)
    });

    let out_peak = spectrum.iter().fold(0.0f64, |a, v| a.max(v.norm()));
    let mut out_edge: f64 = 0.0;
    {
        let mut j = vec![0usize; dim];
        for (flat, v) in spectrum.iter().enumerate() {
            spec.unravel(flat, &mut j);
            if (0..dim).any(|a| signed(j[a], dims[a]).abs() >= 0.9 * (dims[a] / 2) as f64) {
                out_edge = out_edge.max(v.norm());
            }
        }
    }
    let band_edge_ratio = if out_peak > 0.0 { out_edge / out_peak } else { 0.0 };
    let mut resolved = true;
    if band_edge_ratio > opts.band_tol {
        if flow_ii.determinant().abs() < 1e-8 {
            resolved = false;
        } else {
            return Err(Error::GridTooCoarse {
                reason: format!(
                    "propagated spectrum at the band edge is {band_edge_ratio:e} of its peak; refine the grid"
                ),
            });
        }
    }

    spec.data = spectrum;
    spec.fft(&mut planner, true);
    let norm = 1.0 / (total as f64 * cell);
    let mut samples = Vec::with_capacity(grid.len());
    let mut max_imag: f64 = 0.0;
    for k in 0..grid.len() {
        let mut rem = k;
        let mut flat = 0;
        let mut mult = 1;
        for a in (0..dim).rev() {
            let i = rem % grid.axes[a].len;
            rem /= grid.axes[a].len;
            flat += i * mult;
            mult *= dims[a];
        }
        let v = spec.data[flat] * norm;
        max_imag = max_imag.max(v.im.abs());
        samples.push(v.re);
    }
    let out_max = samples.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    Ok(WignerGrid {
        samples,
        resolved,
        band_edge_ratio,
        max_imag: if out_max > 0.0 { max_imag / out_max } else { max_imag },
    })
}

fn interpolate(data: &[Complex64], dims: &[usize], dzeta: &[f64], omega: &Vector, width: usize) -> Complex64 {
    let dim = dims.len();
    let mut first = [0isize; 4];
    let mut weights = [[0.0f64; 16]; 4];
    for a in 0..dim {
        let u = omega[a] / dzeta[a] + (dims[a] / 2) as f64;
        if !(u >= -1.0 && u <= dims[a] as f64) {
            return Complex64::new(0.0, 0.0);
        }
        let base = u.floor() as isize - (width / 2) as isize + 1;
        first[a] = base;
        lagrange_weights(u - base as f64, width, &mut weights[a]);
    }
    let mut acc = Complex64::new(0.0, 0.0);
    let count = width.pow(dim as u32);
    'outer: for s in 0..count {
        let mut rem = s;
        let mut flat = 0usize;
        let mut w = 1.0;
        for a in 0..dim {
            let m = rem % width;
            rem /= width;
            let i = first[a] + m as isize;
            if i < 0 || i >= dims[a] as isize {
                continue 'outer;
            }
            flat = flat * dims[a] + i as usize;
            w *= weights[a][m];
        }
        acc += data[flat] * w;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bipartite::{BipartiteSystem, FlowSample};
    use crate::models::{two_oscillator_system, TwoOscillatorParams};
    use crate::reduced::reduced_moments;

    fn grid1(n: usize, w: f64) -> PhaseGrid {
        PhaseGrid::new(vec![Axis::symmetric(w, n), Axis::symmetric(w, n)]).unwrap()
    }

    fn sys() -> BipartiteSystem {
        two_oscillator_system(&TwoOscillatorParams::new(1.0, 1.0, 0.5).unwrap()).unwrap()
    }

    #[test]
    fn identity_at_time_zero() {
        let grid = grid1(64, 8.0);
        let s0 = GaussianState::vacuum(1)
            .with_mean(Vector::from_vec(vec![0.5, -0.3]))
            .unwrap();
        let f0 = sample_gaussian(&grid, &s0).unwrap();
        let sample = FlowSample::at(&sys(), 0.0, 1e-12).unwrap();
        let out = reduced_wigner_grid(&sample, &grid, &f0, &GaussianState::vacuum(1), &WignerOptions::default()).unwrap();
        let err = out.samples.iter().zip(&f0).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        assert!(err < 1e-10, "{err}");
        assert!(out.resolved);
    }

    #[test]
    fn gaussian_propagation_matches_covariance() {
        let grid = grid1(96, 9.0);
        let s0 = GaussianState::squeezed(1, 0.2)
            .unwrap()
            .with_mean(Vector::from_vec(vec![0.7, 0.2]))
            .unwrap();
        let e0 = GaussianState::thermal_tau(1, 0.6).unwrap();
        let f0 = sample_gaussian(&grid, &s0).unwrap();
        let sample = FlowSample::at(&sys(), 1.3, 1e-12).unwrap();
        let out = reduced_wigner_grid(&sample, &grid, &f0, &e0, &WignerOptions::default()).unwrap();
        let (m, c) = reduced_moments(&sample, &s0, &e0);
        let exact = sample_gaussian(&grid, &GaussianState::new(m, c).unwrap()).unwrap();
        let peak = exact.iter().fold(0.0f64, |a, v| a.max(*v));
        let err = out.samples.iter().zip(&exact).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        assert!(err < 1e-6 * peak, "{err}");
        let dm = (grid_trace(&grid, &out.samples) - grid_trace(&grid, &f0)).abs();
        assert!(dm < 1e-6, "{dm}");
    }

    #[test]
    fn boundary_decay_is_checked() {
        let grid = grid1(32, 2.0);
        let f0 = sample_gaussian(&grid, &GaussianState::thermal_tau(1, 0.2).unwrap()).unwrap();
        let sample = FlowSample::at(&sys(), 0.5, 1e-12).unwrap();
        let r = reduced_wigner_grid(&sample, &grid, &f0, &GaussianState::vacuum(1), &WignerOptions::default());
        assert!(matches!(r, Err(Error::BoundaryDecay { .. })));
    }

    #[test]
    fn lagrange_reproduces_polynomials() {
        let mut w = [0.0; 8];
        lagrange_weights(3.3, 8, &mut w);
        let p = |x: f64| 1.0 + x - 0.5 * x.powi(3) + 0.01 * x.powi(7);
        let approx: f64 = (0..8).map(|m| w[m] * p(m as f64)).sum();
        assert!((approx - p(3.3)).abs() < 1e-9);
    }
}
