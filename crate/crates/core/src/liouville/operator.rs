use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};

use super::C64;
use crate::error::{Error, Result};
use crate::tolerances::Tolerances;

/// A d×d complex matrix acting on the system Hilbert space.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    m: DMatrix<C64>,
}

/// Eigendecomposition of a Hermitian operator, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Columns are orthonormal eigenvectors, in the order of `values`.
    pub vectors: DMatrix<C64>,
}

impl HermitianEigen {
    pub fn vector(&self, k: usize) -> DVector<C64> {
        self.vectors.column(k).into_owned()
    }

    /// Reassembles Σ f(λ_k) v_k v_k†.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Operator {
        let diag = DMatrix::from_diagonal(&DVector::from_iterator(
            self.values.len(),
            self.values.iter().map(|&x| C64::new(f(x), 0.0)),
        ));
        Operator::from_matrix(&self.vectors * diag * self.vectors.adjoint())
    }
}

impl Operator {
    pub fn from_matrix(m: DMatrix<C64>) -> Self {
        assert!(m.is_square(), "operators are square matrices");
        Operator { m }
    }

    pub fn zeros(d: usize) -> Self {
        Operator { m: DMatrix::zeros(d, d) }
    }

    pub fn identity(d: usize) -> Self {
        Operator { m: DMatrix::identity(d, d) }
    }

    pub fn from_fn(d: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        Operator { m: DMatrix::from_fn(d, d, f) }
    }

    /// Row-major real entries.
    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let d = rows.len();
        Operator::from_fn(d, |i, j| C64::new(rows[i][j], 0.0))
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let d = values.len();
        Operator::from_fn(d, |i, j| if i == j { C64::new(values[i], 0.0) } else { C64::new(0.0, 0.0) })
    }

    /// |ψ⟩⟨φ|
    pub fn outer(psi: &DVector<C64>, phi: &DVector<C64>) -> Self {
        Operator::from_matrix(psi * phi.adjoint())
    }

    /// Matrix unit E_ij = |i⟩⟨j|.
    pub fn unit(d: usize, i: usize, j: usize) -> Self {
        let mut m = DMatrix::zeros(d, d);
        m[(i, j)] = C64::new(1.0, 0.0);
        Operator { m }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.m[(i, j)]
    }

    pub fn adjoint(&self) -> Operator {
        Operator { m: self.m.adjoint() }
    }

    pub fn transpose(&self) -> Operator {
        Operator { m: self.m.transpose() }
    }

    pub fn conjugate(&self) -> Operator {
        Operator { m: self.m.conjugate() }
    }

    pub fn trace(&self) -> C64 {
        self.m.trace()
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }

    pub fn scale(&self, c: C64) -> Operator {
        Operator { m: &self.m * c }
    }

    pub fn scale_re(&self, c: f64) -> Operator {
        self.scale(C64::new(c, 0.0))
    }

    pub fn commutator(&self, other: &Operator) -> Operator {
        Operator { m: &self.m * &other.m - &other.m * &self.m }
    }

    pub fn anticommutator(&self, other: &Operator) -> Operator {
        Operator { m: &self.m * &other.m + &other.m * &self.m }
    }

    pub fn check_dim(&self, d: usize) -> Result<()> {
        if self.dim() == d {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: d, found: self.dim() })
        }
    }

    /// max |X − X†|
    pub fn hermitian_residual(&self) -> f64 {
        (&self.m - self.m.adjoint()).iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }

    pub fn is_real(&self) -> bool {
        self.m.iter().all(|z| z.im == 0.0)
    }

    pub fn require_hermitian(&self, tol: f64) -> Result<()> {
        let residual = self.hermitian_residual();
        if residual <= tol * self.max_abs().max(1.0) {
            Ok(())
        } else {
            Err(Error::NotHermitian { residual })
        }
    }

    /// ½(X + X†)
    pub fn hermitian_part(&self) -> Operator {
        Operator { m: (&self.m + self.m.adjoint()) * C64::new(0.5, 0.0) }
    }

    /// Eigendecomposition of the Hermitian part, eigenvalues ascending.
    pub fn eigh(&self) -> HermitianEigen {
        let eig = self.hermitian_part().m.symmetric_eigen();
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let d = self.dim();
        let vectors = DMatrix::from_fn(d, d, |i, k| eig.eigenvectors[(i, order[k])]);
        HermitianEigen { values: order.iter().map(|&k| eig.eigenvalues[k]).collect(), vectors }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigh().values[0]
    }

    /// Functional calculus on the Hermitian part.
    pub fn hermitian_fn(&self, f: impl Fn(f64) -> f64) -> Operator {
        self.eigh().map(f)
    }

    pub fn require_faithful(&self, tol: &Tolerances) -> Result<HermitianEigen> {
        self.require_hermitian(tol.herm)?;
        let eig = self.eigh();
        let min = eig.values[0];
        if min > tol.faithful {
            Ok(eig)
        } else {
            Err(Error::NotFaithful { min_eigenvalue: min })
        }
    }

    pub fn require_state(&self, tol: &Tolerances) -> Result<()> {
        self.require_hermitian(tol.herm)?;
        let tr = self.trace();
        if (tr.re - 1.0).abs() > tol.trace.max(1e-12) * 10.0 || tr.im.abs() > tol.trace * 10.0 {
            return Err(Error::NotAState(format!("trace {tr}")));
        }
        let min = self.min_eigenvalue();
        if min < -tol.psd {
            return Err(Error::NotAState(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(())
    }

    /// ρ^p for a faithful Hermitian ρ.
    pub fn powf(&self, p: f64) -> Operator {
        self.hermitian_fn(|x| x.powf(p))
    }

    pub fn log(&self) -> Operator {
        self.hermitian_fn(f64::ln)
    }

    pub fn inverse(&self) -> Result<Operator> {
        self.m
            .clone()
            .try_inverse()
            .map(Operator::from_matrix)
            .ok_or(Error::Singular(f64::INFINITY))
    }

    /// Expectation ρ(X) = tr(ρX) with `self` as the state.
    pub fn expect(&self, x: &Operator) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                acc += self.m[(i, j)] * x.m[(j, i)];
            }
        }
        acc
    }

    pub fn apply_vector(&self, v: &DVector<C64>) -> DVector<C64> {
        &self.m * v
    }

    /// Column stacking: vec(X)[i + j·d] = X[i, j].
    pub fn vectorize(&self) -> DVector<C64> {
        DVector::from_column_slice(self.m.as_slice())
    }

    pub fn devectorize(d: usize, v: &DVector<C64>) -> Operator {
        assert_eq!(v.len(), d * d, "vector length must be d²");
        Operator { m: DMatrix::from_column_slice(d, d, v.as_slice()) }
    }
}

/// Hilbert–Schmidt inner product tr(X†Y).
pub fn hs_inner(x: &Operator, y: &Operator) -> Result<C64> {
    y.check_dim(x.dim())?;
    Ok(x.m.iter().zip(y.m.iter()).map(|(a, b)| a.conj() * b).sum())
}

macro_rules! binop {
    ($tr:ident, $f:ident, $op:tt) => {
        impl $tr<&Operator> for &Operator {
            type Output = Operator;
            fn $f(self, rhs: &Operator) -> Operator {
                Operator { m: &self.m $op &rhs.m }
            }
        }
        impl $tr<Operator> for Operator {
            type Output = Operator;
            fn $f(self, rhs: Operator) -> Operator {
                Operator { m: self.m $op rhs.m }
            }
        }
        impl $tr<&Operator> for Operator {
            type Output = Operator;
            fn $f(self, rhs: &Operator) -> Operator {
                Operator { m: self.m $op &rhs.m }
            }
        }
        impl $tr<Operator> for &Operator {
            type Output = Operator;
            fn $f(self, rhs: Operator) -> Operator {
                Operator { m: &self.m $op rhs.m }
            }
        }
    };
}

binop!(Add, add, +);
binop!(Sub, sub, -);
binop!(Mul, mul, *);

impl AddAssign<&Operator> for Operator {
    fn add_assign(&mut self, rhs: &Operator) {
        self.m += &rhs.m;
    }
}

impl Neg for Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        Operator { m: -self.m }
    }
}
