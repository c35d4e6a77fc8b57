//! Quadratic Hamiltonians `H(t, z) = ½ z·H(t) z`, possibly time-dependent.

use std::fmt;
use std::sync::Arc;

use crate::symplectic::{check_symmetric, SymplecticForm};
use crate::{Error, Mat, Result};

type MatFn = Arc<dyn Fn(f64) -> Mat + Send + Sync>;

/// Matrix-valued function of time: either constant or a callback.
#[derive(Clone)]
pub enum TimeMatrix {
    Constant(Mat),
    Func { rows: usize, cols: usize, f: MatFn },
}

impl fmt::Debug for TimeMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeMatrix::Constant(m) => f.debug_tuple("Constant").field(m).finish(),
            TimeMatrix::Func { rows, cols, .. } => f
                .debug_struct("Func")
                .field("rows", rows)
                .field("cols", cols)
                .finish_non_exhaustive(),
        }
    }
}

impl TimeMatrix {
    pub fn func<F>(rows: usize, cols: usize, f: F) -> Self
    where
        F: Fn(f64) -> Mat + Send + Sync + 'static,
    {
        TimeMatrix::Func {
            rows,
            cols,
            f: Arc::new(f),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        match self {
            TimeMatrix::Constant(m) => m.shape(),
            TimeMatrix::Func { rows, cols, .. } => (*rows, *cols),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, TimeMatrix::Constant(_))
    }

    /// Value at `t`, checked for shape and finiteness.
    pub fn at(&self, t: f64) -> Result<Mat> {
        match self {
            TimeMatrix::Constant(m) => Ok(m.clone()),
            TimeMatrix::Func { rows, cols, f } => {
                let m = f(t);
                if m.shape() != (*rows, *cols) {
                    return Err(Error::DimensionMismatch {
                        what: "time-dependent matrix",
                        expected: rows * cols,
                        found: m.nrows() * m.ncols(),
                    });
                }
                if m.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite { what: "time-dependent matrix" });
                }
                Ok(m)
            }
        }
    }
}

impl From<Mat> for TimeMatrix {
    fn from(m: Mat) -> Self {
        TimeMatrix::Constant(m)
    }
}

/// Quadratic Hamiltonian of `n` degrees of freedom given by its Hessian.
#[derive(Debug, Clone)]
pub struct QuadraticHamiltonian {
    n: usize,
    hessian: TimeMatrix,
}

impl QuadraticHamiltonian {
    /// Autonomous Hamiltonian; the Hessian must be symmetric with even dimension.
    pub fn new(hessian: Mat) -> Result<Self> {
        check_symmetric(&hessian)?;
        Self::from_time_matrix(TimeMatrix::Constant(hessian))
    }

    /// Time-dependent Hamiltonian; symmetry is checked whenever it is evaluated.
    pub fn time_dependent<F>(dim: usize, f: F) -> Result<Self>
    where
        F: Fn(f64) -> Mat + Send + Sync + 'static,
    {
        Self::from_time_matrix(TimeMatrix::func(dim, dim, f))
    }

    fn from_time_matrix(hessian: TimeMatrix) -> Result<Self> {
        let (r, c) = hessian.shape();
        if r != c || r % 2 != 0 {
            return Err(Error::DimensionMismatch {
                what: "Hessian (square, even dimension)",
                expected: 2 * r.div_ceil(2),
                found: c,
            });
        }
        Ok(Self { n: r / 2, hessian })
    }

    /// Free Hamiltonian of dimension `2n`.
    pub fn zero(n: usize) -> Self {
        Self {
            n,
            hessian: TimeMatrix::Constant(Mat::zeros(2 * n, 2 * n)),
        }
    }

    /// `½(ξ²/m + m ω² x²)` summed over independent modes.
    pub fn oscillators(masses: &[f64], omegas_sq: &[f64]) -> Result<Self> {
        if masses.len() != omegas_sq.len() {
            return Err(Error::DimensionMismatch {
                what: "oscillator masses vs frequencies",
                expected: masses.len(),
                found: omegas_sq.len(),
            });
        }
        let n = masses.len();
        let mut h = Mat::zeros(2 * n, 2 * n);
        for k in 0..n {
            if !(masses[k] > 0.0) {
                return Err(Error::InvalidParameter(format!("mass must be positive, got {}", masses[k])));
            }
            h[(k, k)] = masses[k] * omegas_sq[k];
            h[(n + k, n + k)] = 1.0 / masses[k];
        }
        Self::new(h)
    }

    pub fn dof(&self) -> usize {
        self.n
    }

    pub fn is_autonomous(&self) -> bool {
        self.hessian.is_constant()
    }

    pub fn hessian(&self) -> &TimeMatrix {
        &self.hessian
    }

    pub fn hessian_at(&self, t: f64) -> Result<Mat> {
        let h = self.hessian.at(t)?;
        if !self.is_autonomous() {
            check_symmetric(&h)?;
        }
        Ok(h)
    }

    /// `J ∇²H(t)`.
    pub fn generator_at(&self, t: f64) -> Result<Mat> {
        Ok(SymplecticForm::standard(self.n).matrix() * self.hessian_at(t)?)
    }

    pub fn energy(&self, t: f64, z: &crate::Vector) -> Result<f64> {
        let h = self.hessian_at(t)?;
        Ok(0.5 * z.dot(&(h * z)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oscillator_hessian() {
        let h = QuadraticHamiltonian::oscillators(&[2.0], &[3.0]).unwrap();
        let m = h.hessian_at(0.0).unwrap();
        assert_eq!(m[(0, 0)], 6.0);
        assert_eq!(m[(1, 1)], 0.5);
        let k = h.generator_at(0.0).unwrap();
        assert_eq!(k[(0, 1)], 0.5);
        assert_eq!(k[(1, 0)], -6.0);
    }

    #[test]
    fn rejects_odd_or_asymmetric() {
        assert!(QuadraticHamiltonian::new(Mat::identity(3, 3)).is_err());
        let mut m = Mat::identity(2, 2);
        m[(0, 1)] = 1.0;
        assert!(QuadraticHamiltonian::new(m).is_err());
        let h = QuadraticHamiltonian::time_dependent(2, |t| {
            let mut m = Mat::identity(2, 2);
            m[(0, 1)] = t;
            m
        })
        .unwrap();
        assert!(h.hessian_at(0.0).is_ok());
        assert!(h.hessian_at(1.0).is_err());
    }
}
