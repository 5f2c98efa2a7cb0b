//! Degenerate edge bifurcation of the threshold resonance of the 1D linearized
//! NLS near the cubic power.
//!
//! The crate computes the coefficient `alpha_2` in `alpha = alpha_2 eps^2 + O(eps^3)`,
//! where `z = 1 - alpha^2` is the eigenvalue that emerges from the threshold
//! resonance for `p = 3 + eps`, and validates it against a direct eigensolve
//! of the linearized operator.
//!
//! Modules, bottom-up:
//!
//! - [`soliton`]: closed-form soliton, potential, expansion, weights
//! - [`grid`]: truncated grids, quadrature, grid functions, projections
//! - [`operator`]: resolvent kernels and Birman-Schwinger operators
//! - [`expansion`]: the Lyapunov-Schmidt expansion data and `alpha_2`
//! - [`spectrum`]: finite-difference eigensolve of the linearized operator
//! - [`report`]: run configuration, commands, and serialized output
//!
//! See `examples/` for one runnable program per capability.

pub mod error;
pub mod expansion;
pub mod fit;
pub mod grid;
pub mod operator;
pub mod report;
pub mod soliton;
pub mod spectrum;

pub use error::{Error, Result};
