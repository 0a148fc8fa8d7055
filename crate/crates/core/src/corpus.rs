//! Bundled reference models.

use crate::davies::{ModelFile, WeakCouplingModel};
use crate::error::{Error, Result};
use crate::tolerances::Tolerances;

/// Qubit H = diag(0, 1) with σ_x couplings to reservoirs at β = (1, 2),
/// flat spectral densities 1 and 0.5.
pub const QUBIT2R: &str = include_str!("../fixtures/qubit2r.json");
/// QUBIT2R with both reservoirs at β = 1.
pub const QUBIT2R_EQUILIBRIUM: &str = include_str!("../fixtures/qubit2r_equilibrium.json");
/// Three levels, two reservoirs, non-commuting couplings, matrix-valued
/// spectral tables and a Lamb shift.
pub const QUTRIT_GENERIC: &str = include_str!("../fixtures/qutrit_generic.json");
/// Couplings that never reach the top level: not irreducible.
pub const REDUCIBLE: &str = include_str!("../fixtures/reducible.json");

pub const NAMES: [&str; 4] = ["qubit2r", "qubit2r_equilibrium", "qutrit_generic", "reducible"];

pub fn source(name: &str) -> Result<&'static str> {
    match name {
        "qubit2r" => Ok(QUBIT2R),
        "qubit2r_equilibrium" => Ok(QUBIT2R_EQUILIBRIUM),
        "qutrit_generic" => Ok(QUTRIT_GENERIC),
        "reducible" => Ok(REDUCIBLE),
        other => Err(Error::InvalidArgument(format!("unknown corpus model \"{other}\""))),
    }
}

pub fn load(name: &str) -> Result<WeakCouplingModel> {
    ModelFile::from_json(source(name)?)?.build(&Tolerances::default())
}
