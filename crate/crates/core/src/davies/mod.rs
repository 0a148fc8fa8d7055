//! Weak-coupling (Davies) generators for a system coupled to thermal
//! reservoirs through Hermitian coupling operators.

mod model;
mod model_file;
mod reservoir;

use crate::error::{Error, Result};
use crate::lindblad::PropertyReport;
use crate::liouville::{frequency_pairs, null_space, spectral_projections, Operator, Superoperator};
use crate::tolerances::Tolerances;

pub use model::{assemble, ModelFlags, WeakCouplingModel};
pub use model_file::{ModelFile, ReservoirJson, SpectralJson, SystemJson, TableJson};
pub use reservoir::{build_sub, kms_complete, LambShift, ReservoirSpec, SpectralDensity};

/// System Hamiltonian with its eigenprojections and Bohr frequencies.
#[derive(Clone, Debug)]
pub struct SystemSpec {
    h: Operator,
    levels: Vec<(f64, Operator)>,
    /// Bohr frequency ω with the level pairs (a, b), E_a − E_b = ω.
    transitions: Vec<(f64, Vec<(usize, usize)>)>,
}

impl SystemSpec {
    pub fn new(h: Operator, tol: &Tolerances) -> Result<Self> {
        h.require_hermitian(tol.herm)?;
        let h = h.hermitian_part();
        let levels = spectral_projections(&h, tol.bohr);
        let transitions = frequency_pairs(&levels, tol.bohr);
        Ok(SystemSpec { h, levels, transitions })
    }

    pub fn hamiltonian(&self) -> &Operator {
        &self.h
    }

    pub fn dim(&self) -> usize {
        self.h.dim()
    }

    /// (energy, eigenprojection), ascending.
    pub fn levels(&self) -> &[(f64, Operator)] {
        &self.levels
    }

    /// Sorted Bohr frequencies, symmetric about 0.
    pub fn bohr_frequencies(&self) -> Vec<f64> {
        self.transitions.iter().map(|t| t.0).collect()
    }
}

/// V(ω) = Σ_{μ−ν=ω} P_ν Q P_μ for every Bohr frequency ω (zero blocks kept).
pub fn jump_operators(q: &Operator, sys: &SystemSpec, tol: &Tolerances) -> Result<Vec<(f64, Operator)>> {
    q.check_dim(sys.dim())?;
    q.require_hermitian(tol.herm)?;
    Ok(sys
        .transitions
        .iter()
        .map(|(omega, pairs)| {
            let v = pairs.iter().fold(Operator::zeros(sys.dim()), |acc, &(mu, nu)| {
                acc + &sys.levels[nu].1 * q * &sys.levels[mu].1
            });
            (*omega, v)
        })
        .collect())
}

/// e^{−βH}/tr e^{−βH}
pub fn gibbs_state(h: &Operator, beta: f64) -> Result<Operator> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidArgument(format!("inverse temperature must be positive, got {beta}")));
    }
    let eig = h.eigh();
    let ground = eig.values[0];
    let unnormalized = eig.map(|e| (-beta * (e - ground)).exp());
    let z = unnormalized.trace().re;
    Ok(unnormalized.scale_re(1.0 / z))
}

/// Dimension of the joint commutant of the couplings and H_S; the
/// condition holds iff it is 1 (multiples of the identity only).
pub fn spohn_condition(qs: &[Operator], h: &Operator) -> PropertyReport {
    let d = h.dim();
    let n = d * d;
    let blocks: Vec<Superoperator> =
        qs.iter().chain(std::iter::once(h)).map(Superoperator::commutator_with).collect();
    let mut stacked = nalgebra::DMatrix::zeros(n * blocks.len(), n);
    for (k, b) in blocks.iter().enumerate() {
        stacked.view_mut((k * n, 0), (n, n)).copy_from(b.matrix());
    }
    let dim = null_space(&stacked, 1e-10).len();
    PropertyReport::new(
        "Spohn condition",
        dim == 1,
        (dim as f64 - 1.0).abs(),
        format!("joint commutant of couplings and H_S has dimension {dim}"),
    )
}
