use super::{build_sub, spohn_condition, ReservoirSpec, SystemSpec};
use crate::error::{Error, Result};
use crate::lindblad::{
    detailed_balance_check, irreducible, positivity_improving_check, time_reversal_check, Lindbladian, PropertyReport,
    SubLindbladian, TimeReversal,
};
use crate::liouville::{Operator, Superoperator, C64};
use crate::tolerances::Tolerances;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelFlags {
    /// Time-reversal invariance under complex conjugation.
    pub tri: bool,
    /// Positivity improving (ergodicity).
    pub er: bool,
    /// Reference states are Gibbs states of one Hamiltonian; true by construction.
    pub kms: bool,
}

/// System plus reservoirs, with one detailed-balance sub-Lindbladian per
/// reservoir and their sum.
#[derive(Clone, Debug)]
pub struct WeakCouplingModel {
    pub system: SystemSpec,
    pub reservoirs: Vec<ReservoirSpec>,
    pub subs: Vec<SubLindbladian>,
    pub total: Lindbladian,
    pub flags: ModelFlags,
    pub tol: Tolerances,
}

pub fn assemble(system: &SystemSpec, reservoirs: &[ReservoirSpec], tol: &Tolerances) -> Result<WeakCouplingModel> {
    if reservoirs.is_empty() {
        return Err(Error::model("reservoirs", "at least one reservoir is required"));
    }
    let subs = reservoirs
        .iter()
        .enumerate()
        .map(|(j, r)| {
            build_sub(system, r, tol).map_err(|e| match e {
                Error::Model { path, message } => Error::Model { path: format!("reservoirs[{j}].{path}"), message },
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let total = Lindbladian::sum(&subs.iter().map(|s| &s.lind).collect::<Vec<_>>(), tol)?;
    let er = positivity_improving_check(&total, tol).passed;
    let all_real = system.hamiltonian().is_real() && reservoirs.iter().all(ReservoirSpec::is_real);
    let theta = TimeReversal::conjugation(system.dim());
    let tri = all_real
        && subs
            .iter()
            .map(|s| time_reversal_check(&theta, &s.rho_ref, &s.lind, tol).map(|r| r.passed))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .all(|p| p);
    Ok(WeakCouplingModel {
        system: system.clone(),
        reservoirs: reservoirs.to_vec(),
        subs,
        total,
        flags: ModelFlags { tri, er, kms: true },
        tol: tol.clone(),
    })
}

impl WeakCouplingModel {
    pub fn dim(&self) -> usize {
        self.system.dim()
    }

    pub fn num_reservoirs(&self) -> usize {
        self.reservoirs.len()
    }

    pub fn betas(&self) -> Vec<f64> {
        self.reservoirs.iter().map(|r| r.beta).collect()
    }

    pub fn generator(&self) -> &Superoperator {
        self.total.generator()
    }

    /// Same system and spectral data with new inverse temperatures.
    pub fn with_betas(&self, betas: &[f64]) -> Result<WeakCouplingModel> {
        if betas.len() != self.num_reservoirs() {
            return Err(Error::DimensionMismatch { expected: self.num_reservoirs(), found: betas.len() });
        }
        let reservoirs: Vec<ReservoirSpec> =
            self.reservoirs.iter().zip(betas).map(|(r, &b)| r.with_beta(b)).collect();
        assemble(&self.system, &reservoirs, &self.tol)
    }

    /// The common inverse temperature if all reservoirs agree to 1e-12.
    pub fn equilibrium_beta(&self) -> Option<f64> {
        let b0 = self.reservoirs[0].beta;
        self.reservoirs.iter().all(|r| (r.beta - b0).abs() <= 1e-12).then_some(b0)
    }

    /// Every structural hypothesis, in a fixed order. `required` marks the
    /// ones the analyses depend on.
    pub fn validation_reports(&self) -> Result<Vec<(PropertyReport, bool)>> {
        let tol = &self.tol;
        let mut out = Vec::new();
        for (j, sub) in self.subs.iter().enumerate() {
            let mut r = detailed_balance_check(&sub.rho_ref, &sub.lind, tol)?;
            r.name = format!("detailed balance (reservoir {j})");
            out.push((r, true));
        }
        let d = self.dim();
        let unital = self.total.apply(&Operator::identity(d)).max_abs();
        out.push((PropertyReport::threshold("unitality L(1) = 0", unital, tol.check, ""), true));
        let free = Superoperator::commutator_with(self.system.hamiltonian()).scale(C64::new(0.0, 1.0));
        let comm = (self.generator().compose(&free) - free.compose(self.generator())).max_abs();
        out.push((
            PropertyReport::threshold("[L, i[H_S, .]] = 0", comm, tol.check * self.generator().max_abs().max(1.0), ""),
            true,
        ));
        out.push((PropertyReport::new("KMS reference states", self.flags.kms, 0.0, "Gibbs states of H_S by construction"), true));
        let qs: Vec<Operator> = self.reservoirs.iter().flat_map(|r| r.couplings.iter().cloned()).collect();
        out.push((spohn_condition(&qs, self.system.hamiltonian()), false));
        out.push((irreducible(self.total.phi()), false));
        out.push((positivity_improving_check(&self.total, tol), true));
        let theta = TimeReversal::conjugation(d);
        for (j, sub) in self.subs.iter().enumerate() {
            let mut r = time_reversal_check(&theta, &sub.rho_ref, &sub.lind, tol)?;
            r.name = format!("time reversal (reservoir {j})");
            out.push((r, false));
        }
        Ok(out)
    }
}
