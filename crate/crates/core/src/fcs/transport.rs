use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use super::{drazin_apply, fluxes, require_ergodic, richardson_hessian, steady_state, HESSIAN_STEP};
use super::symmetry::energetic_cgf;
use crate::davies::WeakCouplingModel;
use crate::error::{Error, Result};
use crate::lindblad::dissipation;
use crate::liouville::{Operator, Superoperator, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportMethod {
    FiniteDifferenceZeta,
    GreenKubo,
    HessianSymmetry,
    LebowitzSpohn,
}

/// Kinetic coefficients L_jk = ∂φ̄_j/∂ζ_k at ζ = 0, with ζ_j = β₀ − β_j.
#[derive(Clone, Debug)]
pub struct TransportMatrix {
    pub l: DMatrix<f64>,
    pub method: TransportMethod,
}

impl TransportMatrix {
    /// max_k |Σ_j L_jk|
    pub fn column_sum_residual(&self) -> f64 {
        self.l.column_iter().map(|c| c.sum().abs()).fold(0.0, f64::max)
    }

    /// max |L_jk − L_kj|
    pub fn onsager_residual(&self) -> f64 {
        (&self.l - self.l.transpose()).amax()
    }

    /// Smallest eigenvalue of ½(L + Lᵀ).
    pub fn min_symmetric_eigenvalue(&self) -> f64 {
        ((&self.l + self.l.transpose()) * 0.5).symmetric_eigen().eigenvalues.min()
    }
}

/// Central differences of the steady energy fluxes in ζ, rebuilding every
/// reservoir at β₀ − ζ_j from its positive-frequency data.
pub fn kinetic_coefficients(model: &WeakCouplingModel, beta0: f64, dzeta: f64) -> Result<TransportMatrix> {
    if !(beta0 > 0.0 && dzeta > 0.0 && dzeta < beta0) {
        return Err(Error::InvalidArgument(format!("need 0 < dzeta < beta0, got beta0 = {beta0}, dzeta = {dzeta}")));
    }
    let m = model.num_reservoirs();
    let columns: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|k| {
            let at = |z: f64| -> Result<Vec<f64>> {
                let betas: Vec<f64> = (0..m).map(|j| if j == k { beta0 - z } else { beta0 }).collect();
                let shifted = model.with_betas(&betas)?;
                Ok(fluxes(&shifted)?.mean_energy_fluxes())
            };
            let plus = at(dzeta)?;
            let minus = at(-dzeta)?;
            Ok(plus.iter().zip(&minus).map(|(p, q)| (p - q) / (2.0 * dzeta)).collect())
        })
        .collect::<Result<_>>()?;
    Ok(TransportMatrix { l: DMatrix::from_fn(m, m, |j, k| columns[k][j]), method: TransportMethod::FiniteDifferenceZeta })
}

fn equilibrium(model: &WeakCouplingModel) -> Result<f64> {
    model
        .equilibrium_beta()
        .ok_or_else(|| Error::NotEquilibrium(format!("inverse temperatures {:?} differ", model.betas())))
}

/// Hessian of χ(α) = e(−α/β) at 0.
pub fn energetic_hessian0(model: &WeakCouplingModel) -> Result<DMatrix<f64>> {
    require_ergodic(model)?;
    let m = model.num_reservoirs();
    richardson_hessian(&|a: &[f64]| energetic_cgf(model, a), &vec![0.0; m], HESSIAN_STEP)
}

/// The Green-Kubo integral route and the Hessian route at equilibrium.
#[derive(Clone, Debug)]
pub struct GreenKubo {
    /// −∫ρ₀(e^{tL}(F_j)F_k)dt + ½δ_jk ρ₀(D_j(H_S, H_S))
    pub integral: TransportMatrix,
    /// ½ ∂²χ/∂α_j∂α_k at 0
    pub hessian: TransportMatrix,
}

pub fn green_kubo_matrix(model: &WeakCouplingModel) -> Result<GreenKubo> {
    equilibrium(model)?;
    require_ergodic(model)?;
    let rho0 = steady_state(model)?;
    let h = model.system.hamiltonian();
    let m = model.num_reservoirs();
    let f: Vec<Operator> = model.subs.iter().map(|s| s.lind.apply(h)).collect();
    let integrated: Vec<Operator> =
        f.iter().map(|fj| drazin_apply(model.generator(), &rho0, fj, &model.tol)).collect::<Result<_>>()?;
    let l = DMatrix::from_fn(m, m, |j, k| {
        let mut v = -rho0.expect(&(&integrated[j] * &f[k])).re;
        if j == k {
            v += 0.5 * rho0.expect(&dissipation(&model.subs[j].lind, h, h)).re;
        }
        v
    });
    let hessian = energetic_hessian0(model)? * 0.5;
    Ok(GreenKubo {
        integral: TransportMatrix { l, method: TransportMethod::GreenKubo },
        hessian: TransportMatrix { l: hessian, method: TransportMethod::HessianSymmetry },
    })
}

/// Y with (S − |r⟩⟨l|)Y = −X, i.e. ∫₀^∞ e^{tS}(X)dt when r, l span the
/// right and left kernels of S and ⟨l|X⟩ = 0.
fn reduced_solve(s: &Superoperator, right: &Operator, left: &Operator, x: &Operator) -> Result<Operator> {
    let a = s.matrix() - right.vectorize() * left.vectorize().adjoint();
    let rhs: DVector<C64> = -x.vectorize();
    let y = a.clone().lu().solve(&rhs).ok_or(Error::Singular(f64::INFINITY))?;
    let residual = (&a * &y - &rhs).norm();
    if residual > 1e-9 * a.norm().max(1.0) * y.norm().max(1.0) {
        return Err(Error::Singular(residual));
    }
    Ok(Operator::devectorize(s.dim(), &y))
}

/// Steady-state response route: ∂ρ₊/∂ζ_k = −∫e^{tL†}(F_kρ₀)dt solved in the
/// Schrödinger picture; off-diagonal L_jk = tr(F_j ∂ρ₊/∂ζ_k), diagonal
/// entries from Σ_j L_jk = 0.
pub fn lebowitz_spohn(model: &WeakCouplingModel) -> Result<TransportMatrix> {
    equilibrium(model)?;
    require_ergodic(model)?;
    let rho0 = steady_state(model)?;
    let h = model.system.hamiltonian();
    let m = model.num_reservoirs();
    let f: Vec<Operator> = model.subs.iter().map(|s| s.lind.apply(h)).collect();
    let dual = model.generator().adjoint();
    let one = Operator::identity(model.dim());
    let mut l = DMatrix::zeros(m, m);
    for k in 0..m {
        let source = &f[k] * &rho0;
        let response = reduced_solve(&dual, &rho0, &one, &source)?.scale_re(-1.0);
        for j in (0..m).filter(|&j| j != k) {
            l[(j, k)] = (&f[j] * &response).trace().re;
        }
        let off: f64 = (0..m).filter(|&j| j != k).map(|j| l[(j, k)]).sum();
        l[(k, k)] = -off;
    }
    Ok(TransportMatrix { l, method: TransportMethod::LebowitzSpohn })
}

/// max |D − 2L| with D the energetic Hessian and L the Green-Kubo matrix.
pub fn fdt_residual(model: &WeakCouplingModel) -> Result<f64> {
    let gk = green_kubo_matrix(model)?;
    let d = energetic_hessian0(model)?;
    Ok((d - gk.integral.l * 2.0).amax())
}
