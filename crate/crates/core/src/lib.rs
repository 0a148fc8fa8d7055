//! Entropic full counting statistics of finite-dimensional quantum
//! dynamical semigroups built from weak-coupling (Davies) generators.

pub mod cli;
pub mod corpus;
pub mod davies;
pub mod error;
pub mod fcs;
pub mod lindblad;
pub mod liouville;
pub mod tolerances;
pub mod unravel;

pub use error::{Error, Result};
pub use tolerances::Tolerances;
