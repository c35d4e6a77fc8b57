//! Coupled system `(S) ∪ (E)` with `H = H_S + H_E + z·G u`, and its full and
//! interaction-picture flows.

use crate::hamiltonian::{QuadraticHamiltonian, TimeMatrix};
use crate::ode::{integrate, integrate_flow, FlowOptions, OdeOptions};
use crate::par::{self, Execution};
use crate::states::GaussianState;
use crate::symplectic::{matrix_exponential, PhaseSpaceFlow, SymplecticForm};
use crate::{Error, Mat, Result, Vector};

#[derive(Debug, Clone)]
pub struct BipartiteSystem {
    hs: QuadraticHamiltonian,
    he: QuadraticHamiltonian,
    g: TimeMatrix,
}

impl BipartiteSystem {
    pub fn new(hs: QuadraticHamiltonian, he: QuadraticHamiltonian, g: Mat) -> Result<Self> {
        Self::with_coupling(hs, he, TimeMatrix::Constant(g))
    }

    pub fn with_coupling(hs: QuadraticHamiltonian, he: QuadraticHamiltonian, g: TimeMatrix) -> Result<Self> {
        let expected = (2 * hs.dof(), 2 * he.dof());
        if g.shape() != expected {
            return Err(Error::DimensionMismatch {
                what: "coupling matrix G (2d x 2N)",
                expected: expected.0 * expected.1,
                found: g.shape().0 * g.shape().1,
            });
        }
        Ok(Self { hs, he, g })
    }

    pub fn d(&self) -> usize {
        self.hs.dof()
    }

    pub fn n_env(&self) -> usize {
        self.he.dof()
    }

    pub fn dim(&self) -> usize {
        2 * (self.d() + self.n_env())
    }

    pub fn hs(&self) -> &QuadraticHamiltonian {
        &self.hs
    }

    pub fn he(&self) -> &QuadraticHamiltonian {
        &self.he
    }

    pub fn coupling(&self) -> &TimeMatrix {
        &self.g
    }

    pub fn g_at(&self, t: f64) -> Result<Mat> {
        self.g.at(t)
    }

    pub fn is_autonomous(&self) -> bool {
        self.hs.is_autonomous() && self.he.is_autonomous() && self.g.is_constant()
    }

    /// `J_S ⊕ J_E`.
    pub fn form(&self) -> SymplecticForm {
        SymplecticForm::direct_sum(&[self.d(), self.n_env()])
    }

    /// Same system with the coupling switched off.
    pub fn decoupled(&self) -> Self {
        let (r, c) = self.g.shape();
        Self {
            hs: self.hs.clone(),
            he: self.he.clone(),
            g: TimeMatrix::Constant(Mat::zeros(r, c)),
        }
    }

    /// Same system with the coupling scaled by `s`.
    pub fn scaled_coupling(&self, s: f64) -> Self {
        let g = match &self.g {
            TimeMatrix::Constant(m) => TimeMatrix::Constant(m * s),
            TimeMatrix::Func { rows, cols, f } => {
                let f = f.clone();
                TimeMatrix::func(*rows, *cols, move |t| f(t) * s)
            }
        };
        Self {
            hs: self.hs.clone(),
            he: self.he.clone(),
            g,
        }
    }
}

/// `[[H_S, G], [G^T, H_E]]` at time `t`.
pub fn total_hessian(sys: &BipartiteSystem, t: f64) -> Result<Mat> {
    let (s, e) = (2 * sys.d(), 2 * sys.n_env());
    let mut h = Mat::zeros(s + e, s + e);
    let g = sys.g_at(t)?;
    h.view_mut((0, 0), (s, s)).copy_from(&sys.hs.hessian_at(t)?);
    h.view_mut((s, s), (e, e)).copy_from(&sys.he.hessian_at(t)?);
    h.view_mut((0, s), (s, e)).copy_from(&g);
    h.view_mut((s, 0), (e, s)).copy_from(&g.transpose());
    Ok(h)
}

/// `J ∇²H(t)` of the coupled system.
pub fn generator(sys: &BipartiteSystem, t: f64) -> Result<Mat> {
    Ok(sys.form().matrix() * total_hessian(sys, t)?)
}

/// Covariance `Γ_S ⊕ Γ_E` and mean `(m_S, m_E)` of a product state.
pub fn product_state(s: &GaussianState, e: &GaussianState) -> (Vector, Mat) {
    let (a, b) = (s.cov().nrows(), e.cov().nrows());
    let mut cov = Mat::zeros(a + b, a + b);
    cov.view_mut((0, 0), (a, a)).copy_from(s.cov());
    cov.view_mut((a, a), (b, b)).copy_from(e.cov());
    let mut mean = Vector::zeros(a + b);
    mean.rows_mut(0, a).copy_from(s.mean());
    mean.rows_mut(a, b).copy_from(e.mean());
    (mean, cov)
}

/// Settings for flow computations.
#[derive(Debug, Clone, Copy)]
pub struct BundleOptions {
    /// Integrator tolerance for non-autonomous systems.
    pub tol: f64,
    pub execution: Execution,
}

impl Default for BundleOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            execution: Execution::default(),
        }
    }
}

/// Flows of the coupled system at a single time.
#[derive(Debug, Clone)]
pub struct FlowSample {
    pub t: f64,
    /// Full flow `Φ^t`.
    pub phi: PhaseSpaceFlow,
    /// Interaction flow `Ψ^t = (Φ_0^t)^{-1} Φ^t`.
    pub psi: PhaseSpaceFlow,
    /// Free system flow `Φ_S^t`.
    pub phi_s: Mat,
    /// Free environment flow `Φ_E^t`.
    pub phi_e: Mat,
    /// Schrödinger-picture coupling `G` at time `t`.
    pub g: Mat,
    /// Interaction-picture coupling `G(t) = (Φ_S^t)^T G Φ_E^t`.
    pub g_t: Mat,
    /// Free system generator `J_S ∇²H_S(t)`.
    pub ks: Mat,
}

impl FlowSample {
    fn assemble(sys: &BipartiteSystem, t: f64, phi: Mat, phi_s: Mat, phi_e: Mat) -> Result<Self> {
        let (d, n) = (sys.d(), sys.n_env());
        let (s, e) = (2 * d, 2 * n);
        let mut phi0 = Mat::zeros(s + e, s + e);
        phi0.view_mut((0, 0), (s, s)).copy_from(&phi_s);
        phi0.view_mut((s, s), (e, e)).copy_from(&phi_e);
        let psi = sys.form().inverse_of(&phi0) * &phi;
        let g = sys.g_at(t)?;
        let g_t = phi_s.transpose() * &g * &phi_e;
        Ok(Self {
            t,
            phi: PhaseSpaceFlow::new(d, n, t, phi)?,
            psi: PhaseSpaceFlow::new(d, n, t, psi)?,
            phi_s,
            phi_e,
            g,
            g_t,
            ks: sys.hs.generator_at(t)?,
        })
    }

    /// Flows at an arbitrary time (negative times allowed).
    pub fn at(sys: &BipartiteSystem, t: f64, tol: f64) -> Result<Self> {
        let phi = propagate(sys.dim(), |s| generator(sys, s), sys.is_autonomous(), 0.0, t, tol)?;
        let phi_s = free_propagator(&sys.hs, 0.0, t, tol)?;
        let phi_e = free_propagator(&sys.he, 0.0, t, tol)?;
        Self::assemble(sys, t, phi, phi_s, phi_e)
    }
}

fn propagate<F>(dim: usize, gen: F, autonomous: bool, t0: f64, t1: f64, tol: f64) -> Result<Mat>
where
    F: Fn(f64) -> Result<Mat>,
{
    if autonomous {
        matrix_exponential(&gen(t0)?, t1 - t0)
    } else if dim == 0 {
        Ok(Mat::zeros(0, 0))
    } else {
        Ok(integrate_flow(gen, t0, t1, &FlowOptions::with_tol(tol))?.u)
    }
}

fn free_propagator(h: &QuadraticHamiltonian, t0: f64, t1: f64, tol: f64) -> Result<Mat> {
    propagate(2 * h.dof(), |s| h.generator_at(s), h.is_autonomous(), t0, t1, tol)
}

/// Flows on a time grid.
#[derive(Debug, Clone)]
pub struct FlowBundle {
    pub d: usize,
    pub n_env: usize,
    pub samples: Vec<FlowSample>,
    /// Largest `|M^T J M - J|_max` over `Φ^t` and `Ψ^t` on the grid.
    pub max_symplectic_deviation: f64,
    /// Same, scaled by `max(1, |M|_max^2)`.
    pub max_relative_deviation: f64,
}

impl FlowBundle {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn form(&self) -> SymplecticForm {
        SymplecticForm::direct_sum(&[self.d, self.n_env])
    }
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::InvalidGrid("empty time grid".into()));
    }
    if t_grid[0] != 0.0 {
        return Err(Error::InvalidGrid(format!("time grid must start at 0, starts at {}", t_grid[0])));
    }
    if t_grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::NonFinite { what: "time grid" });
    }
    if t_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidGrid("time grid must be sorted".into()));
    }
    Ok(())
}

/// Cumulative propagators `U(t_k, 0)` on a sorted grid.
fn cumulative<F>(dim: usize, gen: F, t_grid: &[f64], tol: f64) -> Result<Vec<Mat>>
where
    F: Fn(f64) -> Result<Mat>,
{
    let mut out = Vec::with_capacity(t_grid.len());
    let mut u = Mat::identity(dim, dim);
    let mut prev = t_grid[0];
    for &t in t_grid {
        if t > prev {
            let step = integrate_flow(&gen, prev, t, &FlowOptions::with_tol(tol))?.u;
            u = step * u;
            prev = t;
        }
        out.push(u.clone());
    }
    Ok(out)
}

/// `Φ^t`, `Φ_S^t`, `Φ_E^t`, `Ψ^t` and `G(t)` on a grid starting at 0.
///
/// Autonomous systems use one matrix exponential per grid point (points are
/// independent and run in parallel); time-dependent systems are integrated
/// cumulatively from point to point.
pub fn full_flow(sys: &BipartiteSystem, t_grid: &[f64], opts: &BundleOptions) -> Result<FlowBundle> {
    check_grid(t_grid)?;
    let samples = if sys.is_autonomous() {
        let k = generator(sys, 0.0)?;
        let ks = sys.hs.generator_at(0.0)?;
        let ke = sys.he.generator_at(0.0)?;
        par::try_map(opts.execution, t_grid, |&t| {
            FlowSample::assemble(
                sys,
                t,
                matrix_exponential(&k, t)?,
                matrix_exponential(&ks, t)?,
                matrix_exponential(&ke, t)?,
            )
        })?
    } else {
        let phi = cumulative(sys.dim(), |s| generator(sys, s), t_grid, opts.tol)?;
        let phi_s = cumulative(2 * sys.d(), |s| sys.hs.generator_at(s), t_grid, opts.tol)?;
        let phi_e = cumulative(2 * sys.n_env(), |s| sys.he.generator_at(s), t_grid, opts.tol)?;
        t_grid
            .iter()
            .zip(phi)
            .zip(phi_s.into_iter().zip(phi_e))
            .map(|((&t, p), (ps, pe))| FlowSample::assemble(sys, t, p, ps, pe))
            .collect::<Result<Vec<_>>>()?
    };
    let form = sys.form();
    let mut dev: f64 = 0.0;
    let mut rel: f64 = 0.0;
    for s in &samples {
        for m in [&s.phi.m, &s.psi.m] {
            dev = dev.max(form.deviation(m));
            rel = rel.max(form.relative_deviation(m));
        }
    }
    Ok(FlowBundle {
        d: sys.d(),
        n_env: sys.n_env(),
        samples,
        max_symplectic_deviation: dev,
        max_relative_deviation: rel,
    })
}

/// `[[0, J_S G(t)], [J_E G(t)^T, 0]]` for given free flows at `t`.
pub fn interaction_generator_with(sys: &BipartiteSystem, t: f64, phi_s: &Mat, phi_e: &Mat) -> Result<Mat> {
    let g_t = phi_s.transpose() * sys.g_at(t)? * phi_e;
    Ok(interaction_generator_from_coupling(sys.d(), sys.n_env(), &g_t))
}

fn interaction_generator_from_coupling(d: usize, n: usize, g_t: &Mat) -> Mat {
    let (s, e) = (2 * d, 2 * n);
    let mut k = Mat::zeros(s + e, s + e);
    let js = SymplecticForm::standard(d);
    let je = SymplecticForm::standard(n);
    k.view_mut((0, s), (s, e)).copy_from(&(js.matrix() * g_t));
    k.view_mut((s, 0), (e, s)).copy_from(&(je.matrix() * g_t.transpose()));
    k
}

/// Generator of the interaction flow, `J ∇²V(t)` with `V(t) = z·G(t)u`.
pub fn interaction_generator(sys: &BipartiteSystem, t: f64, tol: f64) -> Result<Mat> {
    let phi_s = free_propagator(&sys.hs, 0.0, t, tol)?;
    let phi_e = free_propagator(&sys.he, 0.0, t, tol)?;
    interaction_generator_with(sys, t, &phi_s, &phi_e)
}

/// `Ψ^t` on a grid by integrating `Ψ' = J∇²V(t) Ψ` directly, with the free
/// flows integrated alongside; independent of [`full_flow`].
pub fn interaction_flow(sys: &BipartiteSystem, t_grid: &[f64], tol: f64) -> Result<Vec<PhaseSpaceFlow>> {
    check_grid(t_grid)?;
    let (d, n) = (sys.d(), sys.n_env());
    let (s, e, dim) = (2 * d, 2 * n, sys.dim());
    let sizes = [s * s, e * e, dim * dim];
    let mut y = Vec::with_capacity(sizes.iter().sum());
    for m in [s, e, dim] {
        y.extend_from_slice(Mat::identity(m, m).as_slice());
    }
    let mut y = Vector::from_vec(y);
    let rhs = |t: f64, y: &Vector| -> Result<Vector> {
        let ps = Mat::from_column_slice(s, s, &y.as_slice()[..sizes[0]]);
        let pe = Mat::from_column_slice(e, e, &y.as_slice()[sizes[0]..sizes[0] + sizes[1]]);
        let psi = Mat::from_column_slice(dim, dim, &y.as_slice()[sizes[0] + sizes[1]..]);
        let dps = sys.hs.generator_at(t)? * &ps;
        let dpe = sys.he.generator_at(t)? * &pe;
        let dpsi = interaction_generator_with(sys, t, &ps, &pe)? * psi;
        let mut out = Vec::with_capacity(y.len());
        out.extend_from_slice(dps.as_slice());
        out.extend_from_slice(dpe.as_slice());
        out.extend_from_slice(dpsi.as_slice());
        Ok(Vector::from_vec(out))
    };
    let mut out = Vec::with_capacity(t_grid.len());
    let mut prev = 0.0;
    let opts = OdeOptions::with_tol(tol);
    for &t in t_grid {
        if t > prev {
            y = integrate(rhs, prev, t, y, &opts)?.0;
            prev = t;
        }
        let psi = Mat::from_column_slice(dim, dim, &y.as_slice()[sizes[0] + sizes[1]..]);
        out.push(PhaseSpaceFlow::new(d, n, t, psi)?);
    }
    Ok(out)
}
