//! Exact phase-space simulation of open quantum systems with quadratic
//! Hamiltonians and bilinear system–environment coupling.
//!
//! The total system `(S) ∪ (E)` evolves by a linear symplectic flow, so every
//! Gaussian input stays Gaussian and the reduced state of `(S)` is available
//! in closed form for all times. The crate is organised bottom-up:
//!
//! * [`symplectic`]: symplectic forms, matrix exponentials, adaptive flow
//!   integration, symplectic eigenvalues and the Williamson normal form.
//! * [`states`]: Gaussian Wigner functions, validity, purity and entropies.
//! * [`bipartite`]: assembly of the coupled system and its full and
//!   interaction-picture flows.
//! * [`reduced`]: reduced covariance evolution, master-equation coefficients,
//!   the critical time, purity and correlation rates, grid Wigner propagation.
//! * [`models`]: closed-form reference models (two coupled oscillators and a
//!   finite quantum-Brownian-motion bath).
//!
//! Conventions: `ħ = 1`; phase-space coordinates of an `n` degree-of-freedom
//! system are ordered `(x_1..x_n, ξ_1..ξ_n)` with `J = [[0, I], [-I, 0]]`; the
//! coupled system uses the direct sum `(z, u)` with `J = J_S ⊕ J_E`.

pub mod bipartite;
mod error;
pub mod hamiltonian;
pub mod models;
pub mod ode;
pub mod par;
pub mod reduced;
pub mod states;
pub mod symplectic;

pub use error::{Error, Result};

/// Dense real matrix used throughout the crate.
pub type Mat = nalgebra::DMatrix<f64>;
/// Dense real vector used throughout the crate.
pub type Vector = nalgebra::DVector<f64>;

/// Library version embedded in run reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
