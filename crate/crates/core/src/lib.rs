//! Numerical toolkit for pseudo-Hermitian quantum systems: biorthogonal
//! eigenframes, the metric-corrected non-Abelian gauge field of a degenerate
//! level, path-ordered holonomies, adiabatic time evolution and the tripod
//! gain/loss benchmark with its holonomic gates.

pub mod biortho;
pub mod bundles;
#[cfg(feature = "cli")]
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod gaugeholo;
pub mod matrix;
pub mod random;
pub mod tripod;

pub use error::{Error, Result};
