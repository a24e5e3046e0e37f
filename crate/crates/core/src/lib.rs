//! Numerical laboratory for the degenerate parabolic problem
//! `∂ₜu = Δuᵐ + uᵖ` (porous medium diffusion with a power source).
//!
//! The crate is organised bottom-up:
//!
//! - [`params`]: exponent algebra for `(N, m, p)` and regime classification.
//! - [`special`]: the scalar function family (`Ψ`, `η`, the `γ` time scale,
//!   optimal-singularity data and the initial-trace envelope).
//! - [`field`] and [`norms`]: sampled fields and the uniformly local
//!   Morrey / Orlicz–Morrey functionals evaluated on them.
//! - [`solver`]: explicit finite-difference integrator with blow-up detection.
//! - [`necessary`]: cut-off machinery producing explicit envelope constants and
//!   initial-trace measurements.
//! - [`harness`]: experiments (dichotomy bisection, scaling, Fujita, decay,
//!   energy monitors), configuration parsing and CSV / JSON-lines output.

pub mod error;
pub mod field;
pub mod harness;
pub mod necessary;
pub mod norms;
pub mod numerics;
pub mod params;
pub mod solver;
pub mod special;

pub use error::{LabError, Result};
pub use field::{Boundary, BoxGrid, Geometry, GridField, RadialGrid};
pub use params::{ProblemParams, Regime};
