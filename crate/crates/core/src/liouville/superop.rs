use std::ops::{Add, Mul, Sub};

use nalgebra::DMatrix;

use super::{cluster, Operator, C64};
use crate::error::Result;
use crate::tolerances::Tolerances;

/// A linear map on operators, stored as a d²×d² matrix in the
/// column-stacking basis.
#[derive(Clone, Debug, PartialEq)]
pub struct Superoperator {
    d: usize,
    m: DMatrix<C64>,
}

impl Superoperator {
    pub fn from_matrix(d: usize, m: DMatrix<C64>) -> Self {
        assert!(m.nrows() == d * d && m.ncols() == d * d, "superoperator must be d²×d²");
        Superoperator { d, m }
    }

    pub fn zeros(d: usize) -> Self {
        Superoperator { d, m: DMatrix::zeros(d * d, d * d) }
    }

    pub fn identity(d: usize) -> Self {
        Superoperator { d, m: DMatrix::identity(d * d, d * d) }
    }

    /// Builds the matrix column by column from the images of matrix units.
    pub fn from_map(d: usize, f: impl Fn(&Operator) -> Operator) -> Self {
        let mut m = DMatrix::zeros(d * d, d * d);
        for j in 0..d {
            for i in 0..d {
                let image = f(&Operator::unit(d, i, j)).vectorize();
                m.set_column(i + j * d, &image);
            }
        }
        Superoperator { d, m }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn apply(&self, x: &Operator) -> Operator {
        assert_eq!(x.dim(), self.d, "operator dimension does not match superoperator");
        Operator::devectorize(self.d, &(&self.m * x.vectorize()))
    }

    /// Hilbert–Schmidt adjoint: the conjugate transpose.
    pub fn adjoint(&self) -> Superoperator {
        Superoperator { d: self.d, m: self.m.adjoint() }
    }

    /// self ∘ other
    pub fn compose(&self, other: &Superoperator) -> Superoperator {
        Superoperator { d: self.d, m: &self.m * &other.m }
    }

    pub fn scale(&self, c: C64) -> Superoperator {
        Superoperator { d: self.d, m: &self.m * c }
    }

    pub fn scale_re(&self, c: f64) -> Superoperator {
        self.scale(C64::new(c, 0.0))
    }

    pub fn norm(&self) -> f64 {
        self.m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }

    /// X ↦ [T, X]
    pub fn commutator_with(t: &Operator) -> Superoperator {
        let d = t.dim();
        let one = Operator::identity(d);
        sandwich_unchecked(t, &one) - sandwich_unchecked(&one, t)
    }
}

fn sandwich_unchecked(a: &Operator, b: &Operator) -> Superoperator {
    Superoperator { d: a.dim(), m: b.matrix().transpose().kronecker(a.matrix()) }
}

/// The map X ↦ A X B.
pub fn sandwich(a: &Operator, b: &Operator) -> Result<Superoperator> {
    b.check_dim(a.dim())?;
    Ok(sandwich_unchecked(a, b))
}

/// X ↦ A X
pub fn left_mul(a: &Operator) -> Superoperator {
    sandwich_unchecked(a, &Operator::identity(a.dim()))
}

/// X ↦ X B
pub fn right_mul(b: &Operator) -> Superoperator {
    sandwich_unchecked(&Operator::identity(b.dim()), b)
}

pub fn adjoint(s: &Superoperator) -> Superoperator {
    s.adjoint()
}

/// S^ρ(X) = S†(Xρ)ρ⁻¹, the adjoint for the pairing ⟨X|Y⟩_ρ = tr(ρX†Y).
pub fn rho_adjoint(s: &Superoperator, rho: &Operator, tol: &Tolerances) -> Result<Superoperator> {
    rho.check_dim(s.dim())?;
    let eig = rho.require_faithful(tol)?;
    let rho_inv = eig.map(|x| 1.0 / x);
    Ok(right_mul(&rho_inv).compose(&s.adjoint()).compose(&right_mul(rho)))
}

/// Modular operator together with the spectral resolution of its logarithm.
#[derive(Clone, Debug)]
pub struct ModularSpectrum {
    /// Δ_ρ(X) = ρ X ρ⁻¹
    pub delta: Superoperator,
    /// (ω, P_ω) sorted by ω; P_ω(X) = Σ_{λ−μ=ω} P_λ X P_μ over eigenprojections of log ρ.
    pub parts: Vec<(f64, Superoperator)>,
}

/// Spectral projections of a Hermitian operator, eigenvalues clustered.
pub fn spectral_projections(h: &Operator, rel_tol: f64) -> Vec<(f64, Operator)> {
    let eig = h.eigh();
    let diameter = eig.values.last().unwrap() - eig.values[0];
    let tol = rel_tol * diameter.max(1.0);
    cluster(&eig.values, tol)
        .into_iter()
        .map(|(value, members)| {
            let mut p = Operator::zeros(h.dim());
            for k in members {
                let v = eig.vector(k);
                p += &Operator::outer(&v, &v);
            }
            (value, p)
        })
        .collect()
}

/// Groups projection pairs (a, b) by the difference of their eigenvalues.
pub fn frequency_pairs(eigen: &[(f64, Operator)], rel_tol: f64) -> Vec<(f64, Vec<(usize, usize)>)> {
    let mut diffs = Vec::new();
    let mut pairs = Vec::new();
    for (a, (la, _)) in eigen.iter().enumerate() {
        for (b, (lb, _)) in eigen.iter().enumerate() {
            diffs.push(la - lb);
            pairs.push((a, b));
        }
    }
    let diameter = diffs.iter().fold(0.0_f64, |acc, x| acc.max(x.abs())) * 2.0;
    let tol = rel_tol * diameter.max(1.0);
    cluster(&diffs, tol)
        .into_iter()
        .map(|(omega, members)| (omega, members.into_iter().map(|k| pairs[k]).collect()))
        .collect()
}

pub fn modular_superops(rho: &Operator, tol: &Tolerances) -> Result<ModularSpectrum> {
    let eig = rho.require_faithful(tol)?;
    let rho_inv = eig.map(|x| 1.0 / x);
    let delta = sandwich(rho, &rho_inv)?;
    let log_rho = eig.map(f64::ln);
    let proj = spectral_projections(&log_rho, tol.bohr);
    let parts = frequency_pairs(&proj, tol.bohr)
        .into_iter()
        .map(|(omega, members)| {
            let mut p = Superoperator::zeros(rho.dim());
            for (a, b) in members {
                p = p + sandwich_unchecked(&proj[a].1, &proj[b].1);
            }
            (omega, p)
        })
        .collect();
    Ok(ModularSpectrum { delta, parts })
}

macro_rules! binop {
    ($tr:ident, $f:ident, $op:tt) => {
        impl $tr<&Superoperator> for &Superoperator {
            type Output = Superoperator;
            fn $f(self, rhs: &Superoperator) -> Superoperator {
                Superoperator { d: self.d, m: &self.m $op &rhs.m }
            }
        }
        impl $tr<Superoperator> for Superoperator {
            type Output = Superoperator;
            fn $f(self, rhs: Superoperator) -> Superoperator {
                Superoperator { d: self.d, m: self.m $op rhs.m }
            }
        }
    };
}

binop!(Add, add, +);
binop!(Sub, sub, -);
binop!(Mul, mul, *);
