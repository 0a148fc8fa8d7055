use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Numerical tolerances shared by every module. All of them can be
/// overridden by name (`--tol name=value` on the command line).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub herm: f64,
    pub trace: f64,
    pub psd: f64,
    pub eig: f64,
    pub exp: f64,
    pub faithful: f64,
    /// Relative clustering threshold for Bohr and modular frequencies.
    pub bohr: f64,
    /// Relative separation below which two eigenvalues count as one.
    pub simple: f64,
    /// Pass threshold for structural residual checks.
    pub check: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            herm: 1e-12,
            trace: 1e-12,
            psd: 1e-10,
            eig: 1e-9,
            exp: 1e-10,
            faithful: 1e-12,
            bohr: 1e-9,
            simple: 1e-7,
            check: 1e-9,
        }
    }
}

impl Tolerances {
    pub const NAMES: [&'static str; 9] =
        ["herm", "trace", "psd", "eig", "exp", "faithful", "bohr", "simple", "check"];

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance {name} must be positive")));
        }
        let slot = match name {
            "herm" => &mut self.herm,
            "trace" => &mut self.trace,
            "psd" => &mut self.psd,
            "eig" => &mut self.eig,
            "exp" => &mut self.exp,
            "faithful" => &mut self.faithful,
            "bohr" => &mut self.bohr,
            "simple" => &mut self.simple,
            "check" => &mut self.check,
            _ => return Err(Error::InvalidArgument(format!("unknown tolerance {name:?}"))),
        };
        *slot = value;
        Ok(())
    }

    /// Parses `name=value`.
    pub fn apply_override(&mut self, spec: &str) -> Result<()> {
        let (name, value) = spec
            .split_once('=')
            .ok_or_else(|| Error::InvalidArgument(format!("expected name=value, got {spec:?}")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad tolerance value in {spec:?}")))?;
        self.set(name.trim(), value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_by_name() {
        let mut tol = Tolerances::default();
        tol.apply_override("psd=1e-8").unwrap();
        assert_eq!(tol.psd, 1e-8);
        assert!(tol.apply_override("nope=1").is_err());
        assert!(tol.apply_override("eig=-1").is_err());
        assert!(tol.apply_override("eig").is_err());
    }
}
