//! Dense symplectic linear algebra.

use nalgebra::{Complex, DMatrix, SymmetricEigen};

use crate::{Error, Mat, Result};

/// Largest matrix accepted by [`matrix_exponential`] unless overridden.
pub const DEFAULT_MAX_EXP_DIM: usize = 512;

/// Relative asymmetry accepted by [`check_symmetric`].
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Smallest eigenvalue (relative to the largest entry) accepted as positive-definite.
pub const POSITIVITY_TOL: f64 = 1e-12;

/// `J = [[0, I], [-I, 0]]` for `n` degrees of freedom.
pub fn standard_j(n: usize) -> Mat {
    let mut j = Mat::zeros(2 * n, 2 * n);
    for k in 0..n {
        j[(k, n + k)] = 1.0;
        j[(n + k, k)] = -1.0;
    }
    j
}

/// Canonical symplectic form, possibly a direct sum of standard forms
/// (one block per subsystem, each laid out as `(x.., ξ..)`).
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticForm {
    blocks: Vec<usize>,
    j: Mat,
}

impl SymplecticForm {
    pub fn standard(n: usize) -> Self {
        Self::direct_sum(&[n])
    }

    /// `J_1 ⊕ J_2 ⊕ ...` with `blocks[k]` degrees of freedom in block `k`.
    pub fn direct_sum(blocks: &[usize]) -> Self {
        let dim: usize = blocks.iter().map(|b| 2 * b).sum();
        let mut j = Mat::zeros(dim, dim);
        let mut off = 0;
        for &n in blocks {
            j.view_mut((off, off), (2 * n, 2 * n)).copy_from(&standard_j(n));
            off += 2 * n;
        }
        Self {
            blocks: blocks.to_vec(),
            j,
        }
    }

    /// Total degrees of freedom.
    pub fn dof(&self) -> usize {
        self.blocks.iter().sum()
    }

    pub fn dim(&self) -> usize {
        self.j.nrows()
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    pub fn matrix(&self) -> &Mat {
        &self.j
    }

    /// `max |M^T J M - J|`.
    pub fn deviation(&self, m: &Mat) -> f64 {
        (m.transpose() * &self.j * m - &self.j).amax()
    }

    /// Deviation scaled by `max(1, |M|_max^2)`, meaningful for growing flows.
    pub fn relative_deviation(&self, m: &Mat) -> f64 {
        let s = m.amax();
        self.deviation(m) / (s * s).max(1.0)
    }

    /// Inverse of a symplectic matrix, `J^T M^T J`.
    pub fn inverse_of(&self, m: &Mat) -> Mat {
        self.j.transpose() * m.transpose() * &self.j
    }

    /// Permutation `P` with `P^T J P = J_standard`, mapping standard ordering
    /// (all positions, then all momenta) to this block layout.
    pub fn to_standard_permutation(&self) -> Mat {
        let dim = self.dim();
        let total = self.dof();
        let mut p = Mat::zeros(dim, dim);
        let (mut off, mut pos) = (0, 0);
        for &n in &self.blocks {
            for k in 0..n {
                p[(off + k, pos + k)] = 1.0;
                p[(off + n + k, total + pos + k)] = 1.0;
            }
            off += 2 * n;
            pos += n;
        }
        p
    }
}

/// Symplectic matrix of a coupled system with named blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpaceFlow {
    pub d: usize,
    pub n_env: usize,
    pub t: f64,
    pub m: Mat,
}

impl PhaseSpaceFlow {
    pub fn new(d: usize, n_env: usize, t: f64, m: Mat) -> Result<Self> {
        let dim = 2 * (d + n_env);
        if m.nrows() != dim || m.ncols() != dim {
            return Err(Error::DimensionMismatch {
                what: "phase-space flow",
                expected: dim,
                found: m.nrows().max(m.ncols()),
            });
        }
        Ok(Self { d, n_env, t, m })
    }

    pub fn identity(d: usize, n_env: usize) -> Self {
        let dim = 2 * (d + n_env);
        Self {
            d,
            n_env,
            t: 0.0,
            m: Mat::identity(dim, dim),
        }
    }

    pub fn ii(&self) -> Mat {
        let s = 2 * self.d;
        self.m.view((0, 0), (s, s)).into_owned()
    }

    pub fn ie(&self) -> Mat {
        let (s, e) = (2 * self.d, 2 * self.n_env);
        self.m.view((0, s), (s, e)).into_owned()
    }

    pub fn ei(&self) -> Mat {
        let (s, e) = (2 * self.d, 2 * self.n_env);
        self.m.view((s, 0), (e, s)).into_owned()
    }

    pub fn ee(&self) -> Mat {
        let (s, e) = (2 * self.d, 2 * self.n_env);
        self.m.view((s, s), (e, e)).into_owned()
    }

    pub fn form(&self) -> SymplecticForm {
        SymplecticForm::direct_sum(&[self.d, self.n_env])
    }

    pub fn symplectic_deviation(&self) -> f64 {
        self.form().deviation(&self.m)
    }

    pub fn det_ii(&self) -> f64 {
        self.ii().determinant()
    }
}

fn check_square(m: &Mat) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(())
}

fn check_finite(m: &Mat, what: &'static str) -> Result<()> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what });
    }
    Ok(())
}

/// `exp(tM)` by scaling and squaring with a degree-13 Padé approximant.
pub fn matrix_exponential(m: &Mat, t: f64) -> Result<Mat> {
    matrix_exponential_with_max(m, t, DEFAULT_MAX_EXP_DIM)
}

pub fn matrix_exponential_with_max(m: &Mat, t: f64, max_dim: usize) -> Result<Mat> {
    check_square(m)?;
    if m.nrows() > max_dim {
        return Err(Error::TooLarge {
            dim: m.nrows(),
            max: max_dim,
        });
    }
    if !t.is_finite() {
        return Err(Error::NonFinite { what: "exponential time" });
    }
    check_finite(m, "exponential argument")?;
    if m.nrows() == 0 {
        return Ok(m.clone());
    }
    let e = (m * t).exp();
    check_finite(&e, "matrix exponential (overflow)")?;
    Ok(e)
}

/// Checks `|Γ - Γ^T|_max <= 1e-10 * max(1, |Γ|_max)`.
pub fn check_symmetric(g: &Mat) -> Result<()> {
    check_square(g)?;
    check_finite(g, "symmetric matrix")?;
    let asym = (g - g.transpose()).amax();
    if asym > SYMMETRY_TOL * g.amax().max(1.0) {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }
    Ok(())
}

fn sym_eigen(g: &Mat) -> SymmetricEigen<f64, nalgebra::Dyn> {
    let s = (g + g.transpose()) * 0.5;
    SymmetricEigen::new(s)
}

/// Checks symmetry and `λ_min > 1e-12 * |Γ|_max`.
pub fn check_positive_definite(g: &Mat) -> Result<()> {
    check_symmetric(g)?;
    if g.nrows() == 0 {
        return Ok(());
    }
    let min = sym_eigen(g).eigenvalues.min();
    if !(min > POSITIVITY_TOL * g.amax()) {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: min });
    }
    Ok(())
}

fn sym_power(g: &Mat, p: f64) -> Mat {
    let eig = sym_eigen(g);
    let d = eig.eigenvalues.map(|v| v.powf(p));
    &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose()
}

/// Square root of a symmetric positive semi-definite matrix.
pub fn sym_sqrt(g: &Mat) -> Result<Mat> {
    check_symmetric(g)?;
    let eig = sym_eigen(g);
    let d = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose())
}

/// Inverse square root of a symmetric positive-definite matrix.
pub fn sym_inv_sqrt(g: &Mat) -> Result<Mat> {
    check_positive_definite(g)?;
    Ok(sym_power(g, -0.5))
}

/// Symplectic eigenvalues of `Γ` for the standard form, ascending.
pub fn symplectic_eigenvalues(g: &Mat) -> Result<Vec<f64>> {
    check_square(g)?;
    if g.nrows() % 2 != 0 {
        return Err(Error::DimensionMismatch {
            what: "covariance (even dimension)",
            expected: g.nrows() + 1,
            found: g.nrows(),
        });
    }
    symplectic_eigenvalues_in(g, &SymplecticForm::standard(g.nrows() / 2))
}

/// Symplectic eigenvalues of `Γ` with respect to `form`, ascending.
///
/// Computed as square roots of the (pairwise equal) eigenvalues of
/// `Γ^{1/2} J^T Γ J Γ^{1/2}`.
pub fn symplectic_eigenvalues_in(g: &Mat, form: &SymplecticForm) -> Result<Vec<f64>> {
    if g.nrows() != form.dim() {
        return Err(Error::DimensionMismatch {
            what: "covariance vs symplectic form",
            expected: form.dim(),
            found: g.nrows(),
        });
    }
    check_positive_definite(g)?;
    let root = sym_power(g, 0.5);
    let j = form.matrix();
    let m = &root * j.transpose() * g * j * &root;
    let mut ev: Vec<f64> = sym_eigen(&m).eigenvalues.iter().map(|v| v.max(0.0)).collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev
        .chunks(2)
        .map(|p| 0.5 * (p[0].sqrt() + p[1].sqrt()))
        .collect())
}

/// Williamson normal form: `S^T J S = J`, `S^T Γ S = diag(λ, λ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Williamson {
    pub s: Mat,
    /// Symplectic eigenvalues, ascending.
    pub lambda: Vec<f64>,
}

impl Williamson {
    /// `diag(λ_1..λ_n, λ_1..λ_n)`.
    pub fn diagonal(&self) -> Mat {
        let mut d: Vec<f64> = self.lambda.clone();
        d.extend_from_slice(&self.lambda);
        Mat::from_diagonal(&crate::Vector::from_vec(d))
    }

    /// `(S^T)^{-1} D S^{-1}`; `S^{-1} = J^T S^T J`.
    pub fn reconstruct(&self) -> Mat {
        let n = self.lambda.len();
        let form = SymplecticForm::standard(n);
        let s_inv = form.inverse_of(&self.s);
        s_inv.transpose() * self.diagonal() * s_inv
    }
}

/// Williamson decomposition of a positive-definite `Γ` (standard form).
///
/// With `A = Γ^{-1/2} J Γ^{-1/2}` antisymmetric, the Hermitian matrix `iA`
/// has eigenpairs `(ν, x + iy)`, `ν > 0`. The real vectors `v = √2 y`,
/// `v* = √2 x` are orthonormal with `A v = -ν v*`, `A v* = ν v`, so
/// `R = [v.., v*..]` block-diagonalises `A` and
/// `S = Γ^{-1/2} R diag(ν^{-1/2}, ν^{-1/2})`, `λ = 1/ν`.
pub fn williamson(g: &Mat) -> Result<Williamson> {
    check_square(g)?;
    let dim = g.nrows();
    if dim % 2 != 0 {
        return Err(Error::DimensionMismatch {
            what: "covariance (even dimension)",
            expected: dim + 1,
            found: dim,
        });
    }
    let n = dim / 2;
    let inv_root = sym_inv_sqrt(g)?;
    let a = &inv_root * standard_j(n) * &inv_root;
    let a = (&a - a.transpose()) * 0.5;
    let ia: DMatrix<Complex<f64>> = a.map(|v| Complex::new(0.0, v));
    let eig = SymmetricEigen::new(ia);

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&p, &q| eig.eigenvalues[q].total_cmp(&eig.eigenvalues[p]));
    // the n largest are the positive ν; λ = 1/ν ascending means ν descending
    let mut r = Mat::zeros(dim, dim);
    let mut lambda = Vec::with_capacity(n);
    let mut scale = Vec::with_capacity(dim);
    for (k, &idx) in order.iter().take(n).enumerate() {
        let nu = eig.eigenvalues[idx];
        if !(nu > 0.0) {
            return Err(Error::NotPositiveDefinite { min_eigenvalue: nu });
        }
        let w = eig.eigenvectors.column(idx);
        for i in 0..dim {
            r[(i, k)] = std::f64::consts::SQRT_2 * w[i].im;
            r[(i, n + k)] = std::f64::consts::SQRT_2 * w[i].re;
        }
        lambda.push(1.0 / nu);
        scale.push(nu.powf(-0.5));
    }
    let mut s = inv_root * r;
    for k in 0..n {
        let c = scale[k];
        s.column_mut(k).scale_mut(c);
        s.column_mut(n + k).scale_mut(c);
    }
    Ok(Williamson { s, lambda })
}
