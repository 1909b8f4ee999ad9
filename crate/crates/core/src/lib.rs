//! Numerical laboratory for weak measurements with phase-space pointers.
//!
//! The meter lives in a truncated Fock space ([`fock`]); its phase plane is
//! transformed by the quadratic generators in [`algebra`]. [`weak`] couples a
//! finite system to the meter, post-selects, and compares exact pointer
//! shifts against first-order weak-value formulas. [`ensemble`] recovers the
//! same shifts by Monte-Carlo sampling and [`husimi`] exports phase-space
//! densities of meter states.

pub mod algebra;
pub mod ensemble;
pub mod error;
pub mod experiment;
pub mod fit;
pub mod fock;
pub mod husimi;
pub mod linalg;
pub mod weak;

pub use error::{Error, Result};
pub use fock::{Basis, FockConfig, Ket, Operator};
pub use num_complex::Complex64 as C64;
