//! Lindblad generators in the Heisenberg picture,
//! L(X) = i[T, X] − ½{Φ(1), X} + Φ(X) with Φ(X) = Σ V†XV,
//! and the structural checks built on them.

mod checks;
mod modular;
mod time_reversal;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::liouville::{sandwich, Operator, Superoperator, C64};
use crate::tolerances::Tolerances;

pub use checks::{
    choi_is_cp, choi_matrix, detailed_balance_check, detailed_balance_normal_form, dissipation, irreducible,
    kraus_from_choi, positivity_improving_check, DetailedBalanceForm, NormalForm,
};
pub use modular::{modular_decompose, ModularPart, SubLindbladian};
pub use time_reversal::{time_reversal_check, TimeReversal};

/// Outcome of a numerical property check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub name: String,
    pub passed: bool,
    pub residual: f64,
    pub details: String,
}

impl PropertyReport {
    pub fn new(name: impl Into<String>, passed: bool, residual: f64, details: impl Into<String>) -> Self {
        PropertyReport { name: name.into(), passed, residual: residual.max(0.0), details: details.into() }
    }

    /// Passes iff `residual <= tol`.
    pub fn threshold(name: impl Into<String>, residual: f64, tol: f64, details: impl Into<String>) -> Self {
        PropertyReport::new(name, residual <= tol, residual, details)
    }
}

/// A CP map X ↦ Σ V†XV given by its Kraus operators.
#[derive(Clone, Debug)]
pub struct KrausMap {
    ops: Vec<Operator>,
}

impl KrausMap {
    pub fn new(ops: Vec<Operator>) -> Result<Self> {
        let first = ops.first().ok_or_else(|| Error::InvalidArgument("a Kraus map needs at least one operator".into()))?;
        let d = first.dim();
        for v in &ops {
            v.check_dim(d)?;
        }
        Ok(KrausMap { ops })
    }

    pub fn ops(&self) -> &[Operator] {
        &self.ops
    }

    pub fn dim(&self) -> usize {
        self.ops[0].dim()
    }

    pub fn apply(&self, x: &Operator) -> Operator {
        self.ops.iter().fold(Operator::zeros(self.dim()), |acc, v| acc + v.adjoint() * x * v)
    }

    /// Φ(1) = Σ V†V
    pub fn apply_identity(&self) -> Operator {
        self.ops.iter().fold(Operator::zeros(self.dim()), |acc, v| acc + v.adjoint() * v)
    }

    pub fn superoperator(&self) -> Superoperator {
        self.ops
            .iter()
            .fold(Superoperator::zeros(self.dim()), |acc, v| acc + sandwich(&v.adjoint(), v).expect("same dims"))
    }

    /// Operators with Frobenius norm above `threshold`.
    pub fn pruned(&self, threshold: f64) -> Vec<Operator> {
        self.ops.iter().filter(|v| v.norm() > threshold).cloned().collect()
    }

    /// The map c·Φ for c ≥ 0.
    pub fn scaled(&self, c: f64) -> KrausMap {
        KrausMap { ops: self.ops.iter().map(|v| v.scale_re(c.sqrt())).collect() }
    }

    pub fn concat<'a>(maps: impl IntoIterator<Item = &'a KrausMap>) -> Result<KrausMap> {
        KrausMap::new(maps.into_iter().flat_map(|m| m.ops.iter().cloned()).collect())
    }
}

/// Generator of a semigroup of CP maps together with a Kraus family of its
/// jump part; the input of the positivity-improving check.
pub trait CpGenerator {
    fn superop(&self) -> &Superoperator;
    fn jump_kraus(&self) -> &KrausMap;
}

/// −½{A, X}
fn anticommutator_superop(a: &Operator) -> Superoperator {
    let one = Operator::identity(a.dim());
    (sandwich(a, &one).unwrap() + sandwich(&one, a).unwrap()).scale_re(-0.5)
}

/// X ↦ −½{Φ(1), X} + Φ(X)
pub fn dissipator(phi: &Superoperator) -> Superoperator {
    let d = phi.dim();
    anticommutator_superop(&phi.apply(&Operator::identity(d))) + phi.clone()
}

#[derive(Clone, Debug)]
pub struct Lindbladian {
    t: Operator,
    phi: KrausMap,
    phi_superop: Superoperator,
    generator: Superoperator,
}

impl Lindbladian {
    pub fn t(&self) -> &Operator {
        &self.t
    }

    pub fn phi(&self) -> &KrausMap {
        &self.phi
    }

    pub fn phi_superop(&self) -> &Superoperator {
        &self.phi_superop
    }

    pub fn generator(&self) -> &Superoperator {
        &self.generator
    }

    pub fn dim(&self) -> usize {
        self.t.dim()
    }

    pub fn apply(&self, x: &Operator) -> Operator {
        self.generator.apply(x)
    }

    /// Schrödinger-picture action L†(ρ).
    pub fn adjoint_apply(&self, rho: &Operator) -> Operator {
        self.generator.adjoint().apply(rho)
    }

    /// Σ L_j with the Kraus families concatenated.
    pub fn sum(parts: &[&Lindbladian], tol: &Tolerances) -> Result<Lindbladian> {
        let first = parts.first().ok_or_else(|| Error::InvalidArgument("empty Lindbladian sum".into()))?;
        let t = parts.iter().skip(1).fold(first.t.clone(), |acc, l| acc + &l.t);
        let phi = KrausMap::concat(parts.iter().map(|l| &l.phi))?;
        lindblad_generator(&t, &phi, tol)
    }
}

impl CpGenerator for Lindbladian {
    fn superop(&self) -> &Superoperator {
        &self.generator
    }
    fn jump_kraus(&self) -> &KrausMap {
        &self.phi
    }
}

pub fn lindblad_generator(t: &Operator, phi: &KrausMap, tol: &Tolerances) -> Result<Lindbladian> {
    t.check_dim(phi.dim())?;
    t.require_hermitian(tol.herm)?;
    let phi_superop = phi.superoperator();
    let generator = Superoperator::commutator_with(t).scale(C64::new(0.0, 1.0)) + dissipator(&phi_superop);
    Ok(Lindbladian { t: t.clone(), phi: phi.clone(), phi_superop, generator })
}
