//! Structure-preserving time integration for the 1-D nonlinear Schrödinger
//! equation with white noise dispersion,
//!
//! ```text
//! i du + Lap u o dW(t) + |u|^(2 sigma) u dt = 0,
//! ```
//!
//! driven by a scalar Brownian motion `W` in Stratonovich form. The crate
//! provides:
//!
//! * [`brownian`] — reproducible driving paths with exact blockwise
//!   subsampling, so coarse and fine runs share one noise realization;
//! * [`field`] — grid, field state, and the discrete functionals (charge,
//!   energy, l2 and spectral norms);
//! * [`linops`] — the centered-difference Laplacian, complex tridiagonal and
//!   spectral implicit solves, the unitary Cayley propagator, the exact
//!   dispersive flow `exp(i tau Lap)`, and a slow kernel-quadrature oracle;
//! * [`integrators`] — the implicit midpoint scheme, the Lie splitting
//!   scheme, the explicit Euler-Maruyama comparator, an optional smooth norm
//!   truncation of the nonlinearity, and the tangent (linearized) maps of
//!   all three;
//! * [`diagnostics`] — charge drift, energy traces, the global symplectic
//!   2-form on tangent pairs, and the local multi-symplectic residual of the
//!   midpoint full discretization;
//! * [`harness`] — trajectory driver, path-coupled Monte-Carlo convergence
//!   study, conservation comparison, and profile dumps, all with
//!   deterministic CSV output.
//!
//! The numerical core is generic over the scalar type via `num-traits`
//! (`f32` or `f64`); the aliases below fix the common `f64` instantiation.

pub mod brownian;
pub mod diagnostics;
pub mod error;
pub mod field;
pub mod harness;
pub mod integrators;
pub mod linops;
pub mod scalar;
mod spectral;

pub use brownian::{BrownianPath, PathKey};
pub use error::{Error, Result};
pub use scalar::Scalar;

/// Complex number over the crate's scalar.
pub type Complex<T> = num_complex::Complex<T>;

/// `f64` grid.
pub type Grid64 = field::Grid1D<f64>;
/// `f64` field state.
pub type Field64 = field::FieldState<f64>;
/// `f64` tangent field.
pub type Tangent64 = integrators::TangentField<f64>;
/// `f64` scheme configuration.
pub type SchemeConfig64 = integrators::SchemeConfig<f64>;
/// `f64` one-step integrator.
pub type Integrator64 = integrators::Integrator<f64>;
/// `f64` complex number.
pub type Complex64 = num_complex::Complex<f64>;
