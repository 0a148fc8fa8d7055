//! Seeded random operators, used by property checks and tests.

use nalgebra::DVector;
use rand::Rng;

use super::{sandwich, Operator, Superoperator, C64};

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // Box–Muller
    let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let v: f64 = rng.random();
    (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
}

pub fn random_operator<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Operator {
    Operator::from_fn(d, |_, _| C64::new(gaussian(rng), gaussian(rng)))
}

pub fn random_hermitian<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Operator {
    random_operator(d, rng).hermitian_part()
}

pub fn random_unit_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DVector<C64> {
    let v = DVector::from_fn(d, |_, _| C64::new(gaussian(rng), gaussian(rng)));
    let n = v.norm();
    v / C64::new(n, 0.0)
}

/// Faithful density matrix A A† / tr + small multiple of the identity.
pub fn random_state<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Operator {
    let a = random_operator(d, rng);
    let p = &a * a.adjoint() + Operator::identity(d).scale_re(0.05);
    let tr = p.trace().re;
    p.scale_re(1.0 / tr)
}

/// Heisenberg-picture CP map X ↦ Σ V†XV with `k` Gaussian Kraus operators;
/// optionally rescaled to be unital.
pub fn random_cp_map<R: Rng + ?Sized>(d: usize, k: usize, rng: &mut R, unital: bool) -> Superoperator {
    let mut ops: Vec<Operator> = (0..k).map(|_| random_operator(d, rng)).collect();
    if unital {
        let s = ops.iter().fold(Operator::zeros(d), |acc, v| acc + v.adjoint() * v);
        let inv_sqrt = s.hermitian_fn(|x| 1.0 / x.sqrt());
        ops = ops.into_iter().map(|v| v * &inv_sqrt).collect();
    }
    ops.iter().fold(Superoperator::zeros(d), |acc, v| acc + sandwich(&v.adjoint(), v).unwrap())
}

