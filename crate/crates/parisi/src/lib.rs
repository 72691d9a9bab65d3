//! Variational formulas for permutation-invariant mean-field vector spin
//! glasses.
//!
//! The crate evaluates and maximizes Parisi-type functionals over monotone
//! step paths, computes the cascade transform `psi` by the exact backward
//! recursion over cascade levels, takes monotone convex conjugates over
//! cones, and cross-checks everything against brute-force small-N disorder
//! averages.
//!
//! Modules mirror the moving parts:
//!
//! * [`model`] — interaction functions `xi` as symmetrized matrix
//!   polynomials, reference measures, derived functions (`xi_dagger`,
//!   `xi_perp`, `cap_xi`, `theta`) and structural checks.
//! * [`paths`] — monotone step paths on cones, permutation-invariant
//!   matrices in eigenvalue coordinates, and the piecewise-linear
//!   lift/project operators with their approximation bounds.
//! * [`conjugate`] — monotone convex conjugates over truncated cones.
//! * [`cascade`] — the cascade transform `psi` and quantile paths.
//! * [`parisi`] — the variational objectives, the multistart optimizer, the
//!   nonconvex upper bound and the uniqueness probe.
//! * [`simulate`] — exact-enumeration disorder averages of the corrected
//!   free energy at small N.
//! * [`files`] — the model/path document formats used by the CLI and tools.
//! * [`verify`] — the umbrella property suite behind `parisi verify`.

pub mod cascade;
pub mod conjugate;
mod error;
pub mod files;
pub mod model;
pub mod parisi;
pub mod paths;
pub(crate) mod quadrature;
pub mod rng;
pub mod simulate;
pub mod verify;

pub use error::{Error, Result};
