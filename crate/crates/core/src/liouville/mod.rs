//! Dense linear algebra on operators and superoperators.
//!
//! Operators are vectorized by column stacking, vec(X)[i + j·d] = X[i, j],
//! so that the map X ↦ A X B is the Kronecker product Bᵀ ⊗ A.

mod matrix_json;
mod operator;
pub mod random;
mod spectral;
mod superop;

pub use matrix_json::MatrixJson;
pub use operator::{hs_inner, HermitianEigen, Operator};
pub use spectral::{
    dominant_spectral_point, eigenvalues, matrix_eigenvalues, null_space, semigroup, semigroup_apply,
    spectral_abscissa, SpectralPoint,
};
pub use superop::{
    adjoint, frequency_pairs, left_mul, modular_superops, rho_adjoint, right_mul, sandwich,
    spectral_projections, ModularSpectrum, Superoperator,
};

pub type C64 = nalgebra::Complex<f64>;

/// Sorts `values` and merges neighbours closer than `tol`. Returns the mean
/// of each cluster together with the original indices, ascending.
pub fn cluster(values: &[f64], tol: f64) -> Vec<(f64, Vec<usize>)> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for k in order {
        match groups.last_mut() {
            Some(g) if values[k] - values[*g.last().unwrap()] <= tol => g.push(k),
            _ => groups.push(vec![k]),
        }
    }
    groups
        .into_iter()
        .map(|g| (g.iter().map(|&k| values[k]).sum::<f64>() / g.len() as f64, g))
        .collect()
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;

    pub use super::random::{random_cp_map, random_operator, random_state};

    pub fn pauli() -> (Operator, Operator, Operator) {
        let z = C64::new(0.0, 0.0);
        let one = C64::new(1.0, 0.0);
        let i = C64::new(0.0, 1.0);
        let x = Operator::from_fn(2, |a, b| if a != b { one } else { z });
        let y = Operator::from_fn(2, |a, b| match (a, b) {
            (0, 1) => -i,
            (1, 0) => i,
            _ => z,
        });
        let zz = Operator::diagonal(&[1.0, -1.0]);
        (x, y, zz)
    }

    /// Heisenberg-picture generator γ(σ₊Xσ₋ − ½{σ₊σ₋, X}) with σ₋ = |0⟩⟨1|.
    pub fn amplitude_damping(gamma: f64) -> Superoperator {
        let lower = Operator::unit(2, 0, 1).scale_re(gamma.sqrt());
        let n = lower.adjoint() * &lower;
        let one = Operator::identity(2);
        sandwich(&lower.adjoint(), &lower).unwrap()
            - (sandwich(&n, &one).unwrap() + sandwich(&one, &n).unwrap()).scale_re(0.5)
    }


    #[test]
    fn clustering_merges_close_values() {
        let c = cluster(&[1.0, 0.0, 1.0 + 1e-12, -1.0], 1e-9);
        assert_eq!(c.len(), 3);
        assert_eq!(c[2].1.len(), 2);
    }
}
