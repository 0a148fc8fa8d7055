use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{dissipator, CpGenerator, KrausMap, Lindbladian, PropertyReport};
use crate::error::{Error, Result};
use crate::liouville::{
    modular_superops, random::random_unit_vector, rho_adjoint, semigroup, Operator, Superoperator, C64,
};
use crate::tolerances::Tolerances;

/// Choi matrix C[(i,a),(j,b)] = S(E_ij)[a,b], row index i·d + a.
pub fn choi_matrix(s: &Superoperator) -> DMatrix<C64> {
    let d = s.dim();
    let mut c = DMatrix::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            let image = s.apply(&Operator::unit(d, i, j));
            for a in 0..d {
                for b in 0..d {
                    c[(i * d + a, j * d + b)] = image.get(a, b);
                }
            }
        }
    }
    c
}

pub fn choi_is_cp(s: &Superoperator, tol: &Tolerances) -> PropertyReport {
    let c = Operator::from_matrix(choi_matrix(s));
    let non_hermitian = c.hermitian_residual();
    let eig = c.eigh();
    let min = eig.values[0];
    let max = *eig.values.last().unwrap();
    let residual = (-min).max(0.0).max(non_hermitian);
    PropertyReport::threshold(
        "complete positivity",
        residual,
        tol.psd * max.abs().max(1.0),
        format!("Choi eigenvalues in [{min:.6e}, {max:.6e}], hermiticity residual {non_hermitian:.3e}"),
    )
}

/// Kraus operators from the spectral decomposition of the Choi matrix.
pub fn kraus_from_choi(s: &Superoperator, tol: &Tolerances) -> Result<KrausMap> {
    let d = s.dim();
    let report = choi_is_cp(s, tol);
    if !report.passed {
        return Err(Error::CrossCheck(format!("map is not completely positive: {}", report.details)));
    }
    let eig = Operator::from_matrix(choi_matrix(s)).eigh();
    let max = eig.values.last().copied().unwrap_or(0.0);
    let mut ops = Vec::new();
    for (k, &lambda) in eig.values.iter().enumerate() {
        if lambda <= tol.psd * max.max(1.0) {
            continue;
        }
        let v = eig.vector(k);
        let root = lambda.sqrt();
        ops.push(Operator::from_fn(d, |i, a| (v[i * d + a] * root).conj()));
    }
    if ops.is_empty() {
        ops.push(Operator::zeros(d));
    }
    KrausMap::new(ops)
}

/// D(X, Y) = L(X†Y) − L(X†)Y − X†L(Y)
pub fn dissipation(l: &Lindbladian, x: &Operator, y: &Operator) -> Operator {
    let xa = x.adjoint();
    l.apply(&(&xa * y)) - l.apply(&xa) * y - xa * l.apply(y)
}

/// Tests L†(ρ) = 0 and Φ^ρ = Φ for the given decomposition.
pub fn detailed_balance_check(rho: &Operator, l: &Lindbladian, tol: &Tolerances) -> Result<PropertyReport> {
    let phi = l.phi_superop();
    let phi_rho = rho_adjoint(phi, rho, tol)?;
    let stationary = l.adjoint_apply(rho).max_abs();
    let self_adjoint = (&phi_rho - phi).max_abs();
    let scale = phi.max_abs().max(1.0);
    Ok(PropertyReport::threshold(
        "detailed balance",
        stationary.max(self_adjoint / scale),
        tol.check,
        format!("|L*(rho)| = {stationary:.3e}, |Phi^rho - Phi| = {self_adjoint:.3e}"),
    ))
}

/// A decomposition L = i[T, ·] − ½{Φ(1), ·} + Φ with Φ ρ-self-adjoint.
#[derive(Clone, Debug)]
pub struct DetailedBalanceForm {
    pub t: Operator,
    pub phi: Superoperator,
    /// Reconstruction residual |L − (i[T,·] − ½{Φ(1),·} + Φ)|.
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub enum NormalForm {
    Found(DetailedBalanceForm),
    Failed(PropertyReport),
}

/// Decomposition-independent detailed balance test. The CP part is
/// averaged over the modular group (block projection onto the spectral
/// subspaces of log Δ_ρ) and symmetrized; what remains of L must then be a
/// commutator i[T′, ·].
pub fn detailed_balance_normal_form(rho: &Operator, l: &Lindbladian, tol: &Tolerances) -> Result<NormalForm> {
    rho.check_dim(l.dim())?;
    rho.require_faithful(tol)?;
    let stationary = l.adjoint_apply(rho).max_abs();
    if stationary > tol.check {
        return Err(Error::DetailedBalance(stationary));
    }
    let d = l.dim();
    let modular = modular_superops(rho, tol)?;
    let psi = l.phi_superop();
    let xi = modular
        .parts
        .iter()
        .fold(Superoperator::zeros(d), |acc, (_, p)| acc + p.compose(psi).compose(p));
    let phi_prime = (&xi + &rho_adjoint(&xi, rho, tol)?).scale_re(0.5);
    let remainder = l.generator() - &dissipator(&phi_prime);

    // Least squares for i[T′, ·] = remainder over the matrix units of T′.
    let n = d * d;
    let mut design = DMatrix::zeros(n * n, n);
    for b in 0..d {
        for a in 0..d {
            let c = Superoperator::commutator_with(&Operator::unit(d, a, b)).scale(C64::new(0.0, 1.0));
            design.set_column(a + b * d, &DVector::from_column_slice(c.matrix().as_slice()));
        }
    }
    let rhs = DVector::from_column_slice(remainder.matrix().as_slice());
    let coeffs = design
        .svd(true, true)
        .solve(&rhs, 1e-12)
        .map_err(|e| Error::CrossCheck(format!("normal form least squares: {e}")))?;
    let t_prime = Operator::devectorize(d, &coeffs).hermitian_part();
    let rebuilt = Superoperator::commutator_with(&t_prime).scale(C64::new(0.0, 1.0)) + dissipator(&phi_prime);
    let residual = (l.generator() - &rebuilt).max_abs();
    let scale = l.generator().max_abs().max(1.0);
    if residual <= tol.check * scale {
        Ok(NormalForm::Found(DetailedBalanceForm { t: t_prime, phi: phi_prime, residual }))
    } else {
        Ok(NormalForm::Failed(PropertyReport::new(
            "detailed balance (normal form)",
            false,
            residual,
            "the rho-anti-Hermitian part of L is not a commutator",
        )))
    }
}

/// Dimension of the algebra generated by the operators and 1, by
/// Gram–Schmidt closure under left multiplication.
fn generated_algebra_dimension(generators: &[Operator], d: usize) -> usize {
    let full = d * d;
    let mut basis: Vec<DVector<C64>> = Vec::new();
    let mut frontier: Vec<Operator> = Vec::new();
    let admit = |x: Operator, basis: &mut Vec<DVector<C64>>| -> Option<Operator> {
        let mut v = x.vectorize();
        let norm0 = v.norm();
        if norm0 == 0.0 {
            return None;
        }
        // Two passes of modified Gram–Schmidt.
        for _ in 0..2 {
            for b in basis.iter() {
                let c = b.dotc(&v);
                v -= b * c;
            }
        }
        let n = v.norm();
        if n <= 1e-10 * norm0 {
            return None;
        }
        basis.push(v / C64::new(n, 0.0));
        Some(x.scale_re(1.0 / norm0))
    };
    if let Some(x) = admit(Operator::identity(d), &mut basis) {
        frontier.push(x);
    }
    while let Some(b) = frontier.pop() {
        if basis.len() == full {
            break;
        }
        for g in generators {
            if let Some(x) = admit(g * &b, &mut basis) {
                frontier.push(x);
            }
        }
    }
    basis.len()
}

/// Φ is irreducible iff {V_j} and 1 generate the full matrix algebra.
pub fn irreducible(phi: &KrausMap) -> PropertyReport {
    let d = phi.dim();
    let generators = phi.pruned(1e-14);
    let dim = generated_algebra_dimension(&generators, d);
    PropertyReport::new(
        "irreducibility",
        dim == d * d,
        (d * d - dim) as f64,
        format!("generated algebra has dimension {dim} of {}", d * d),
    )
}

/// Irreducibility of the jump part, plus a numerical witness: e^{L}(|ψ⟩⟨ψ|)
/// must be strictly positive for 20 seeded random pure states.
pub fn positivity_improving_check<G: CpGenerator + ?Sized>(generator: &G, tol: &Tolerances) -> PropertyReport {
    let _ = tol;
    let irr = irreducible(generator.jump_kraus());
    let d = generator.superop().dim();
    let evolved = semigroup(generator.superop(), 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    let mut min_eig = f64::INFINITY;
    for _ in 0..20 {
        let psi = random_unit_vector(d, &mut rng);
        let out = evolved.apply(&Operator::outer(&psi, &psi));
        min_eig = min_eig.min(out.min_eigenvalue());
    }
    let witness = min_eig > 1e-12;
    PropertyReport::new(
        "positivity improving",
        irr.passed && witness,
        (-min_eig).max(0.0),
        format!("{}; min eigenvalue of e^L(|psi><psi|) over 20 pure states = {min_eig:.6e}", irr.details),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lindblad::lindblad_generator;
    use crate::liouville::testing::{pauli, random_operator, random_state};
    use crate::liouville::{sandwich, Superoperator};

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn kraus(ops: Vec<Operator>) -> KrausMap {
        KrausMap::new(ops).unwrap()
    }

    #[test]
    fn single_kraus_map_is_cp() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let a = random_operator(3, &mut rng);
        let s = sandwich(&a.adjoint(), &a).unwrap();
        assert!(choi_is_cp(&s, &tol()).passed);
    }

    #[test]
    fn transpose_map_is_not_cp() {
        let t = Superoperator::from_map(2, |x| x.transpose());
        let report = choi_is_cp(&t, &tol());
        assert!(!report.passed);
        // The Choi matrix of the transpose is the swap, eigenvalues ±1.
        assert!((report.residual - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exponentiated_generators_are_cp() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let t = random_operator(3, &mut rng).hermitian_part();
        let phi = kraus(vec![random_operator(3, &mut rng), random_operator(3, &mut rng)]);
        let l = lindblad_generator(&t, &phi, &tol()).unwrap();
        for time in [0.1, 1.0, 10.0] {
            assert!(choi_is_cp(&semigroup(l.generator(), time), &tol()).passed);
        }
    }

    #[test]
    fn kraus_from_choi_reconstructs_the_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let phi = kraus(vec![random_operator(3, &mut rng), random_operator(3, &mut rng)]);
        let s = phi.superoperator();
        let back = kraus_from_choi(&s, &tol()).unwrap();
        assert_eq!(back.ops().len(), 2);
        assert!((back.superoperator() - s).max_abs() < 1e-11);
    }

    #[test]
    fn dissipation_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let t = random_operator(3, &mut rng).hermitian_part();
        let vs = vec![random_operator(3, &mut rng), random_operator(3, &mut rng)];
        let l = lindblad_generator(&t, &kraus(vs.clone()), &tol()).unwrap();
        let one = Operator::identity(3);
        assert!(dissipation(&l, &one, &one).max_abs() < 1e-12);
        for _ in 0..50 {
            let x = random_operator(3, &mut rng);
            let dxx = dissipation(&l, &x, &x);
            let expected = vs.iter().fold(Operator::zeros(3), |acc, v| {
                let c = v.commutator(&x);
                acc + c.adjoint() * c
            });
            assert!((&dxx - &expected).max_abs() < 1e-10 * expected.max_abs().max(1.0));
            assert!(dxx.min_eigenvalue() > -1e-10 * dxx.max_abs().max(1.0));
        }
        // The commutant of a single Hermitian Kraus operator contains its polynomials.
        let h = random_operator(3, &mut rng).hermitian_part();
        let l = lindblad_generator(&t, &kraus(vec![h.clone()]), &tol()).unwrap();
        let x = &h * &h + h.scale_re(0.3);
        assert!(dissipation(&l, &x, &x).max_abs() < 1e-10);
    }

    #[test]
    fn hamiltonian_generator_not_in_detailed_balance_with_noncommuting_state() {
        let (x, _, _) = pauli();
        let l = lindblad_generator(&x, &kraus(vec![Operator::zeros(2)]), &tol()).unwrap();
        let rho = Operator::diagonal(&[0.7, 0.3]);
        let report = detailed_balance_check(&rho, &l, &tol()).unwrap();
        assert!(!report.passed);
        // L*(ρ) = −i[σx, ρ] has off-diagonal magnitude 0.4.
        assert!((report.residual - 0.4).abs() < 1e-12);
    }

    #[test]
    fn tracial_state_with_self_adjoint_phi() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let h = random_operator(3, &mut rng).hermitian_part();
        let l = lindblad_generator(&Operator::zeros(3), &kraus(vec![h]), &tol()).unwrap();
        let rho = Operator::identity(3).scale_re(1.0 / 3.0);
        assert!(detailed_balance_check(&rho, &l, &tol()).unwrap().passed);
    }

    #[test]
    fn normal_form_recovers_t_for_tracial_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let h1 = random_operator(3, &mut rng).hermitian_part();
        let h2 = random_operator(3, &mut rng).hermitian_part();
        let t = random_operator(3, &mut rng).hermitian_part();
        let l = lindblad_generator(&t, &kraus(vec![h1, h2]), &tol()).unwrap();
        let rho = Operator::identity(3).scale_re(1.0 / 3.0);
        let NormalForm::Found(form) = detailed_balance_normal_form(&rho, &l, &tol()).unwrap() else {
            panic!("normal form should exist");
        };
        // T′ − T is a multiple of the identity.
        let diff = &form.t - &t;
        let shift = diff.trace().re / 3.0;
        assert!((diff - Operator::identity(3).scale_re(shift)).max_abs() < 1e-10);
        assert!((rho_adjoint(&form.phi, &rho, &tol()).unwrap() - form.phi.clone()).max_abs() < 1e-10);
    }

    #[test]
    fn normal_form_requires_stationarity() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        let l = lindblad_generator(&Operator::zeros(2), &kraus(vec![Operator::unit(2, 0, 1)]), &tol()).unwrap();
        let rho = random_state(2, &mut rng);
        assert!(matches!(detailed_balance_normal_form(&rho, &l, &tol()), Err(Error::DetailedBalance(_))));
    }

    #[test]
    fn irreducibility_examples() {
        let (x, _, _) = pauli();
        let single = irreducible(&kraus(vec![x]));
        assert!(!single.passed);
        assert!(single.details.contains("dimension 2"));
        let lower = Operator::unit(2, 0, 1);
        assert!(irreducible(&kraus(vec![lower.clone(), lower.adjoint()])).passed);
        assert!(!irreducible(&kraus(vec![Operator::identity(2)])).passed);
    }

    #[test]
    fn hamiltonian_semigroup_is_not_positivity_improving() {
        let mut rng = ChaCha8Rng::seed_from_u64(27);
        let t = random_operator(3, &mut rng).hermitian_part();
        let l = lindblad_generator(&t, &kraus(vec![Operator::zeros(3)]), &tol()).unwrap();
        assert!(!positivity_improving_check(&l, &tol()).passed);
    }
}
