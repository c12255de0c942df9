//! Pseudo-spectral simulation and diagnostics for the two-dimensional coupled
//! wave / Klein-Gordon system with null-form nonlinearities
//!
//! ```text
//! -□w     = C1 Q0(w,v) + C1^{ab} Q_ab(w,v)
//! -□v + v = C2 Q0(w,v) + C2^{ab} Q_ab(w,v)
//! ```
//!
//! on a periodic truncation of the plane, with the Klainerman vector-field
//! machinery applied to snapshots of the numerical solution.
//!
//! Conventions used throughout: `□ = -∂t² + ∂1² + ∂2²`, the metric is
//! `η = diag(-1, 1, 1)`, index 0 is time, and fields are stored row-major
//! with `values[i * n + j] = f(x1 = x_i, x2 = x_j)`.

pub mod diagnostics;
pub mod error;
pub mod fields;
pub mod grid;
pub mod nullforms;
pub mod propagate;
pub mod vectorfields;

pub use error::{Error, Result};
