use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{assemble, LambShift, ReservoirSpec, SpectralDensity, SystemSpec, WeakCouplingModel};
use crate::error::{Error, Result};
use crate::liouville::{MatrixJson, Operator, C64};
use crate::tolerances::Tolerances;

#[allow(non_snake_case)]
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemJson {
    pub H_S: MatrixJson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableJson {
    pub omega_values: Vec<f64>,
    pub matrices: Vec<MatrixJson>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpectralJson {
    Table(TableJson),
    Named { form: String, gamma: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReservoirJson {
    pub beta: f64,
    pub couplings: Vec<MatrixJson>,
    pub h: SpectralJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<TableJson>,
}

/// On-disk model description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub system: SystemJson,
    pub reservoirs: Vec<ReservoirJson>,
}

fn table(t: &TableJson, path: &str, n: usize) -> Result<(Vec<f64>, Vec<DMatrix<C64>>)> {
    if t.omega_values.len() != t.matrices.len() {
        return Err(Error::model(
            path,
            format!("{} omega_values but {} matrices", t.omega_values.len(), t.matrices.len()),
        ));
    }
    if let Some(k) = t.omega_values.iter().position(|w| !w.is_finite()) {
        return Err(Error::model(format!("{path}.omega_values[{k}]"), "frequency is not finite"));
    }
    let matrices = t
        .matrices
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let p = format!("{path}.matrices[{k}]");
            if m.dim != n {
                return Err(Error::model(&p, format!("expected a {n}x{n} matrix (one row per coupling), found dim {}", m.dim)));
            }
            m.to_operator(&p).map(Operator::into_matrix)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((t.omega_values.clone(), matrices))
}

impl ModelFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::model("<model>", e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::model(path.display().to_string(), e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model file serializes")
    }

    /// Validates every field and converts to builder inputs.
    pub fn to_specs(&self, tol: &Tolerances) -> Result<(SystemSpec, Vec<ReservoirSpec>)> {
        let h = self.system.H_S.to_operator("system.H_S")?;
        let d = h.dim();
        if h.hermitian_residual() > tol.herm * h.max_abs().max(1.0) {
            return Err(Error::model("system.H_S", "matrix is not Hermitian"));
        }
        let sys = SystemSpec::new(h, tol)?;
        if self.reservoirs.is_empty() {
            return Err(Error::model("reservoirs", "at least one reservoir is required"));
        }
        let mut specs = Vec::new();
        for (j, r) in self.reservoirs.iter().enumerate() {
            let p = format!("reservoirs[{j}]");
            if !(r.beta > 0.0 && r.beta.is_finite()) {
                return Err(Error::model(format!("{p}.beta"), format!("must be positive and finite, got {}", r.beta)));
            }
            if r.couplings.is_empty() {
                return Err(Error::model(format!("{p}.couplings"), "at least one coupling operator is required"));
            }
            let couplings = r
                .couplings
                .iter()
                .enumerate()
                .map(|(k, m)| {
                    let cp = format!("{p}.couplings[{k}]");
                    let q = m.to_operator(&cp)?;
                    if q.dim() != d {
                        return Err(Error::model(&cp, format!("expected dim {d}, found {}", q.dim())));
                    }
                    if q.hermitian_residual() > tol.herm * q.max_abs().max(1.0) {
                        return Err(Error::model(&cp, "coupling operator is not Hermitian"));
                    }
                    Ok(q)
                })
                .collect::<Result<Vec<_>>>()?;
            let n = couplings.len();
            let h = match &r.h {
                SpectralJson::Table(t) => {
                    let (omegas, matrices) = table(t, &format!("{p}.h"), n)?;
                    if let Some(k) = omegas.iter().position(|&w| w < 0.0) {
                        return Err(Error::model(format!("{p}.h.omega_values[{k}]"), "h is given on ω ≥ 0 only"));
                    }
                    SpectralDensity::Table { omegas, matrices }
                }
                SpectralJson::Named { form, gamma } => {
                    if form != "flat" {
                        return Err(Error::model(format!("{p}.h.form"), format!("unknown form \"{form}\"")));
                    }
                    if !(*gamma >= 0.0 && gamma.is_finite()) {
                        return Err(Error::model(format!("{p}.h.gamma"), "must be nonnegative and finite"));
                    }
                    SpectralDensity::Flat { gamma: *gamma }
                }
            };
            let s = match &r.s {
                None => LambShift::default(),
                Some(t) => {
                    let (omegas, matrices) = table(t, &format!("{p}.s"), n)?;
                    LambShift { omegas, matrices }
                }
            };
            specs.push(ReservoirSpec { beta: r.beta, couplings, h, s });
        }
        Ok((sys, specs))
    }

    pub fn build(&self, tol: &Tolerances) -> Result<WeakCouplingModel> {
        let (sys, specs) = self.to_specs(tol)?;
        assemble(&sys, &specs, tol)
    }
}
