use nalgebra::{linalg::Schur, DMatrix, DVector};

use super::{Operator, Superoperator, C64};
use crate::error::{Error, Result};
use crate::tolerances::Tolerances;

/// A simple eigenvalue with its right and left eigenvectors.
#[derive(Clone, Debug)]
pub struct SpectralPoint {
    pub value: C64,
    pub right_vec: Operator,
    pub left_vec: Operator,
    /// Distance from the rest of the spectrum to the line Re z = Re value
    /// (+∞ when nothing else is left).
    pub gap: f64,
}

/// All eigenvalues of a square complex matrix (complex Schur form).
pub fn matrix_eigenvalues(m: &DMatrix<C64>) -> Vec<C64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let (_, t) = Schur::new(m.clone()).unpack();
    t.diagonal().iter().copied().collect()
}

pub fn eigenvalues(s: &Superoperator) -> Vec<C64> {
    matrix_eigenvalues(s.matrix())
}

/// max Re over the spectrum, with no simplicity requirement.
pub fn spectral_abscissa(s: &Superoperator) -> f64 {
    eigenvalues(s).iter().fold(f64::NEG_INFINITY, |acc, z| acc.max(z.re))
}

/// Orthonormal basis of the numerical kernel of `m`.
pub fn null_space(m: &DMatrix<C64>, rel_tol: f64) -> Vec<DVector<C64>> {
    let (r, c) = m.shape();
    let padded = if r < c {
        let mut p = DMatrix::zeros(c, c);
        p.view_mut((0, 0), (r, c)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let smax = svd.singular_values.iter().fold(0.0_f64, |a, &b| a.max(b));
    let thr = rel_tol * smax.max(1.0);
    (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] <= thr)
        .map(|k| v_t.row(k).adjoint())
        .collect()
}

/// Right and left singular vectors for the smallest singular value.
/// Right singular vector of the smallest singular value.
fn smallest_singular_vector(m: &DMatrix<C64>) -> DVector<C64> {
    let svd = m.clone().svd(false, true);
    let k = (0..svd.singular_values.len())
        .min_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]))
        .expect("non-empty matrix");
    svd.v_t.expect("right singular vectors requested").row(k).adjoint()
}

/// Two steps of inverse iteration at a shift just off `mu`.
fn polish(m: &DMatrix<C64>, mu: C64, v: DVector<C64>, scale: f64) -> DVector<C64> {
    let n = m.nrows();
    let lu = (m - DMatrix::identity(n, n) * (mu + C64::new(1e-10 * scale, 0.0))).lu();
    let mut v = v;
    for _ in 0..2 {
        match lu.solve(&v) {
            Some(x) if x.iter().all(|z| z.re.is_finite() && z.im.is_finite()) && x.norm() > 0.0 => {
                let norm = x.norm();
                v = x / C64::new(norm, 0.0);
            }
            _ => break,
        }
    }
    v
}

fn fix_phase(v: &mut DVector<C64>, d: usize) {
    let n = v.norm();
    *v /= C64::new(n, 0.0);
    let tr: C64 = (0..d).map(|i| v[i + i * d]).sum();
    let anchor = if tr.norm() > 1e-8 {
        tr
    } else {
        *v.iter().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap()
    };
    *v *= anchor.conj() / anchor.norm();
}

/// Eigenvalue with the largest real part, required to be simple and the
/// only one on its vertical line.
pub fn dominant_spectral_point(s: &Superoperator, tol: &Tolerances) -> Result<SpectralPoint> {
    let d = s.dim();
    let n = d * d;
    let eig = eigenvalues(s);
    let top = (0..n).max_by(|&a, &b| eig[a].re.total_cmp(&eig[b].re)).unwrap();
    let lead = eig[top];
    let scale = eig.iter().fold(1.0_f64, |acc, z| acc.max(z.norm()));
    let thr = tol.simple * scale;
    let crowding: Vec<C64> = (0..n)
        .filter(|&k| k != top && (eig[k].re - lead.re).abs() <= thr)
        .map(|k| eig[k])
        .collect();
    if !crowding.is_empty() {
        let reason = if crowding.iter().any(|z| (z - lead).norm() <= thr) {
            "algebraic multiplicity > 1".to_string()
        } else {
            format!("another eigenvalue {} lies on the same vertical line", crowding[0])
        };
        return Err(Error::DegenerateDominant { value: lead, reason });
    }
    let gap = (0..n)
        .filter(|&k| k != top)
        .map(|k| lead.re - eig[k].re)
        .fold(f64::INFINITY, f64::min);

    let shifted = s.matrix() - DMatrix::identity(n, n) * lead;
    let right = polish(s.matrix(), lead, smallest_singular_vector(&shifted), scale);
    let adjoint = s.matrix().adjoint();
    let mut left = polish(&adjoint, lead.conj(), smallest_singular_vector(&shifted.adjoint()), scale);
    let mut right = right;
    fix_phase(&mut right, d);
    let overlap = left.dotc(&right);
    if overlap.norm() < 1e-300 {
        return Err(Error::DegenerateDominant { value: lead, reason: "left and right eigenvectors are orthogonal".into() });
    }
    left /= overlap.conj();
    // Rayleigh refinement with the biorthogonal pair.
    let value = left.dotc(&(s.matrix() * &right));
    let residual = (s.matrix() * &right - &right * value).norm();
    if residual > tol.eig * s.norm().max(1.0) {
        return Err(Error::CrossCheck(format!("dominant eigenvector residual {residual:.3e}")));
    }
    let left_residual = (&adjoint * &left - &left * value.conj()).norm();
    if left_residual > tol.eig * s.norm().max(1.0) * left.norm() {
        return Err(Error::CrossCheck(format!("dominant left eigenvector residual {left_residual:.3e}")));
    }
    Ok(SpectralPoint {
        value,
        right_vec: Operator::devectorize(d, &right),
        left_vec: Operator::devectorize(d, &left),
        gap,
    })
}

/// e^{tS}
pub fn semigroup(s: &Superoperator, t: f64) -> Superoperator {
    assert!(t >= 0.0, "semigroup time must be non-negative");
    Superoperator::from_matrix(s.dim(), (s.matrix() * C64::new(t, 0.0)).exp())
}

/// e^{tS}(X)
pub fn semigroup_apply(s: &Superoperator, t: f64, x: &Operator) -> Operator {
    if t == 0.0 {
        return x.clone();
    }
    semigroup(s, t).apply(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liouville::testing::{amplitude_damping, random_operator};
    use crate::liouville::{hs_inner, sandwich};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn diagonal_superop(entries: &[C64]) -> Superoperator {
        let d = (entries.len() as f64).sqrt() as usize;
        let v = DVector::from_column_slice(entries);
        Superoperator::from_matrix(d, DMatrix::from_diagonal(&v))
    }

    #[test]
    fn zero_superoperator_in_dimension_one() {
        let p = dominant_spectral_point(&Superoperator::zeros(1), &Tolerances::default()).unwrap();
        assert_eq!(p.value, C64::new(0.0, 0.0));
        assert_eq!(p.gap, f64::INFINITY);
    }

    #[test]
    fn diagonal_dominant_point() {
        let s = diagonal_superop(&[
            C64::new(-1.0, 0.0),
            C64::new(-2.0, 3.0),
            C64::new(0.5, 0.0),
            C64::new(-4.0, 0.0),
        ]);
        let p = dominant_spectral_point(&s, &Tolerances::default()).unwrap();
        assert!((p.value - C64::new(0.5, 0.0)).norm() < 1e-14);
        assert!((p.gap - 1.5).abs() < 1e-14);
        assert!((hs_inner(&p.left_vec, &p.right_vec).unwrap() - C64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn degenerate_dominant_is_an_error() {
        let s = diagonal_superop(&[C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(-1.0, 0.0)]);
        assert!(matches!(dominant_spectral_point(&s, &Tolerances::default()), Err(Error::DegenerateDominant { .. })));
        let pair = diagonal_superop(&[C64::new(1.0, 1.0), C64::new(1.0, -1.0), C64::new(0.0, 0.0), C64::new(-1.0, 0.0)]);
        assert!(matches!(dominant_spectral_point(&pair, &Tolerances::default()), Err(Error::DegenerateDominant { .. })));
        assert_eq!(spectral_abscissa(&pair), 1.0);
    }

    #[test]
    fn amplitude_damping_relaxes() {
        let l = amplitude_damping(0.7);
        let p = dominant_spectral_point(&l, &Tolerances::default()).unwrap();
        assert!(p.value.norm() < 1e-12);
        // Right eigenvector is proportional to the identity.
        let r = &p.right_vec;
        assert!((r.get(0, 0) - r.get(1, 1)).norm() < 1e-12 && r.get(0, 1).norm() < 1e-12);
        assert!((p.gap - 0.35).abs() < 1e-12);
    }

    #[test]
    fn semigroup_basic_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = random_operator(2, &mut rng);
        let l = amplitude_damping(1.3);
        assert_eq!(semigroup_apply(&l, 0.0, &x), x);
        let one = Operator::identity(2);
        assert!((semigroup_apply(&l, 3.0, &one) - &one).max_abs() < 1e-12);
        let c = 0.8;
        let decay = sandwich(&Operator::identity(2).scale_re(-1.0), &Operator::identity(2)).unwrap().scale_re(c);
        let out = semigroup_apply(&decay, 2.0, &x);
        assert!((out - x.scale_re((-c * 2.0f64).exp())).max_abs() < 1e-13);
        let ts = semigroup_apply(&l, 1.7, &semigroup_apply(&l, 0.4, &x));
        assert!((ts - semigroup_apply(&l, 2.1, &x)).max_abs() <= 1e-10 * x.norm());
    }

    #[test]
    fn null_space_of_rank_deficient_matrix() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]).map(|x| C64::new(x, 0.0));
        let ns = null_space(&m, 1e-12);
        assert_eq!(ns.len(), 1);
        assert!((ns[0][2].norm() - 1.0).abs() < 1e-12);
    }
}
