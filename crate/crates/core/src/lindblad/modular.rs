use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{detailed_balance_check, KrausMap, Lindbladian, PropertyReport};
use crate::error::{Error, Result};
use crate::liouville::{
    frequency_pairs, random::random_operator, rho_adjoint, spectral_projections, Operator, Superoperator,
};
use crate::tolerances::Tolerances;

/// The part Φ_ω of the CP map that scales by e^{−aω} under X ↦ X ρ^{−a}, ρ^a.
#[derive(Clone, Debug)]
pub struct ModularPart {
    /// Entropy quantum ω (an eigenvalue of log Δ_ρ).
    pub quantum: f64,
    pub kraus: KrausMap,
    pub superop: Superoperator,
}

/// A Lindbladian in detailed balance with a faithful reference state,
/// with its CP part resolved along the modular spectrum.
#[derive(Clone, Debug)]
pub struct SubLindbladian {
    pub rho_ref: Operator,
    pub lind: Lindbladian,
    /// Sorted by quantum.
    pub modular_parts: Vec<ModularPart>,
}

impl SubLindbladian {
    pub fn part(&self, quantum: f64, tol: f64) -> Option<&ModularPart> {
        self.modular_parts.iter().find(|p| (p.quantum - quantum).abs() <= tol)
    }

    /// Σ_ω e^{−αω} Φ_ω
    pub fn deformed_phi(&self, alpha: f64) -> Superoperator {
        self.modular_parts.iter().fold(Superoperator::zeros(self.lind.dim()), |acc, p| {
            acc + p.superop.scale_re((-alpha * p.quantum).exp())
        })
    }

    /// Checks every structural relation of the decomposition on seeded
    /// random operators.
    pub fn check_invariants(&self, tol: &Tolerances) -> Result<Vec<PropertyReport>> {
        let d = self.lind.dim();
        let rho = &self.rho_ref;
        let mut reports = Vec::new();
        let stationary = self.lind.adjoint_apply(rho).max_abs();
        reports.push(PropertyReport::threshold("stationary reference state", stationary, tol.check, ""));

        let phi = self.lind.phi_superop();
        let scale = phi.max_abs().max(1.0);
        let total = self.modular_parts.iter().fold(Superoperator::zeros(d), |acc, p| acc + p.superop.clone());
        reports.push(PropertyReport::threshold(
            "modular completeness",
            (&total - phi).max_abs() / scale,
            tol.check,
            format!("{} parts", self.modular_parts.len()),
        ));

        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0002);
        let mut covariance = 0.0_f64;
        for a in [0.5, 1.0, -0.3] {
            let (rho_pos, rho_neg) = (rho.powf(a), rho.powf(-a));
            for _ in 0..3 {
                let x = random_operator(d, &mut rng);
                for p in &self.modular_parts {
                    let lhs = p.superop.apply(&(&x * &rho_neg)) * &rho_pos;
                    let rhs = p.superop.apply(&x).scale_re((-a * p.quantum).exp());
                    covariance = covariance.max((lhs - rhs).max_abs() / x.max_abs() / scale);
                }
            }
        }
        reports.push(PropertyReport::threshold("modular covariance", covariance, tol.check, "a in {0.5, 1, -0.3}"));

        let mut reflection = 0.0_f64;
        let mut duality = 0.0_f64;
        for p in &self.modular_parts {
            let q = self.part(-p.quantum, 1e-9 * p.quantum.abs().max(1.0));
            let mirror = q.map(|q| q.superop.clone()).unwrap_or_else(|| Superoperator::zeros(d));
            let rho_adj = rho_adjoint(&p.superop, rho, tol)?;
            reflection = reflection.max((&rho_adj - &mirror).max_abs() / scale);
            let dual = p.superop.adjoint() - mirror.scale_re(p.quantum.exp());
            duality = duality.max(dual.max_abs() / scale / p.quantum.exp().max(1.0));
        }
        reports.push(PropertyReport::threshold("Phi_w^rho = Phi_-w", reflection, tol.check, ""));
        reports.push(PropertyReport::threshold("Phi_w* = e^w Phi_-w", duality, tol.check, ""));
        Ok(reports)
    }
}

/// Splits the Kraus family of a detailed-balance Lindbladian along the
/// eigenprojections P_λ of log ρ: the component of V_k at quantum ω is
/// Σ_{λ−μ=ω} P_λ V_k P_μ.
pub fn modular_decompose(rho: &Operator, l: &Lindbladian, tol: &Tolerances) -> Result<SubLindbladian> {
    let report = detailed_balance_check(rho, l, tol)?;
    if !report.passed {
        return Err(Error::DetailedBalance(report.residual));
    }
    let eig = rho.require_faithful(tol)?;
    let proj = spectral_projections(&eig.map(f64::ln), tol.bohr);
    let mut modular_parts = Vec::new();
    for (quantum, pairs) in frequency_pairs(&proj, tol.bohr) {
        let ops: Vec<Operator> = l
            .phi()
            .ops()
            .iter()
            .map(|v| pairs.iter().fold(Operator::zeros(l.dim()), |acc, &(a, b)| acc + &proj[a].1 * v * &proj[b].1))
            .filter(|w| w.norm() > 1e-14)
            .collect();
        if ops.is_empty() {
            continue;
        }
        let kraus = KrausMap::new(ops)?;
        let superop = kraus.superoperator();
        modular_parts.push(ModularPart { quantum, kraus, superop });
    }
    let sub = SubLindbladian { rho_ref: rho.clone(), lind: l.clone(), modular_parts };
    let total = sub.modular_parts.iter().fold(Superoperator::zeros(l.dim()), |acc, p| acc + p.superop.clone());
    let residual = (&total - l.phi_superop()).max_abs();
    if residual > tol.check * l.phi_superop().max_abs().max(1.0) {
        return Err(Error::CrossCheck(format!("modular parts do not sum to Phi (residual {residual:.3e})")));
    }
    Ok(sub)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lindblad::lindblad_generator;
    use crate::liouville::testing::random_operator;

    #[test]
    fn tracial_state_gives_a_single_part() {
        let tol = Tolerances::default();
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let h = random_operator(3, &mut rng).hermitian_part();
        let l = lindblad_generator(&Operator::zeros(3), &KrausMap::new(vec![h]).unwrap(), &tol).unwrap();
        let sub = modular_decompose(&Operator::identity(3).scale_re(1.0 / 3.0), &l, &tol).unwrap();
        assert_eq!(sub.modular_parts.len(), 1);
        assert!(sub.modular_parts[0].quantum.abs() < 1e-12);
        assert!((&sub.modular_parts[0].superop - l.phi_superop()).max_abs() < 1e-12);
    }

    #[test]
    fn thermal_qubit_splits_into_emission_and_absorption() {
        let tol = Tolerances::default();
        let beta = 1.0_f64;
        let z = 1.0 + (-beta).exp();
        let rho = Operator::diagonal(&[1.0 / z, (-beta).exp() / z]);
        // Down jump with rate 1, up jump with rate e^{−β}.
        let down = Operator::unit(2, 0, 1);
        let up = Operator::unit(2, 1, 0).scale_re((-beta / 2.0).exp());
        let l = lindblad_generator(&Operator::zeros(2), &KrausMap::new(vec![down, up]).unwrap(), &tol).unwrap();
        let sub = modular_decompose(&rho, &l, &tol).unwrap();
        let quanta: Vec<f64> = sub.modular_parts.iter().map(|p| p.quantum).collect();
        assert_eq!(quanta.len(), 2);
        assert!((quanta[0] + 1.0).abs() < 1e-12 && (quanta[1] - 1.0).abs() < 1e-12);
        let one = Operator::identity(2);
        let sum = sub.modular_parts.iter().fold(Operator::zeros(2), |acc, p| acc + p.superop.apply(&one));
        assert!((sum - l.phi().apply_identity()).max_abs() < 1e-14);
        for r in sub.check_invariants(&tol).unwrap() {
            assert!(r.passed, "{r:?}");
        }
    }

    #[test]
    fn detailed_balance_violation_is_an_error() {
        let tol = Tolerances::default();
        let down = Operator::unit(2, 0, 1);
        let l = lindblad_generator(&Operator::zeros(2), &KrausMap::new(vec![down]).unwrap(), &tol).unwrap();
        let rho = Operator::diagonal(&[0.6, 0.4]);
        assert!(matches!(modular_decompose(&rho, &l, &tol), Err(Error::DetailedBalance(_))));
    }
}
