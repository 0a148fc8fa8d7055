use super::{Lindbladian, PropertyReport};
use crate::error::{Error, Result};
use crate::liouville::{rho_adjoint, Operator};
use crate::tolerances::Tolerances;

/// Anti-unitary involution θ = U∘K (K: entrywise conjugation), acting on
/// operators as Θ(X) = θXθ = U X̄ Ū.
#[derive(Clone, Debug)]
pub struct TimeReversal {
    u: Operator,
}

impl TimeReversal {
    /// Plain complex conjugation in the computational basis.
    pub fn conjugation(d: usize) -> Self {
        TimeReversal { u: Operator::identity(d) }
    }

    pub fn new(u: Operator, tol: &Tolerances) -> Result<Self> {
        let d = u.dim();
        let unitarity = (u.adjoint() * &u - Operator::identity(d)).max_abs();
        if unitarity > tol.check {
            return Err(Error::InvalidArgument(format!("time reversal is not unitary (residual {unitarity:.3e})")));
        }
        Ok(TimeReversal { u })
    }

    pub fn dim(&self) -> usize {
        self.u.dim()
    }

    pub fn apply(&self, x: &Operator) -> Operator {
        &self.u * x.conjugate() * self.u.conjugate()
    }

    /// max |Θ(Θ(E_ab)) − E_ab| over matrix units.
    pub fn involution_residual(&self) -> f64 {
        let d = self.dim();
        let mut r = 0.0_f64;
        for a in 0..d {
            for b in 0..d {
                let e = Operator::unit(d, a, b);
                r = r.max((self.apply(&self.apply(&e)) - e).max_abs());
            }
        }
        r
    }
}

/// Tests L^ρ∘Θ = Θ∘L and Θ(ρ) = ρ. Both sides are antilinear, so agreement
/// on matrix units is agreement everywhere.
pub fn time_reversal_check(theta: &TimeReversal, rho: &Operator, l: &Lindbladian, tol: &Tolerances) -> Result<PropertyReport> {
    let d = l.dim();
    rho.check_dim(d)?;
    theta.u.check_dim(d)?;
    let involution = theta.involution_residual();
    if involution > tol.check {
        return Err(Error::InvalidArgument(format!("time reversal is not an involution (residual {involution:.3e})")));
    }
    let l_rho = rho_adjoint(l.generator(), rho, tol)?;
    let mut commutation = 0.0_f64;
    for a in 0..d {
        for b in 0..d {
            let e = Operator::unit(d, a, b);
            let lhs = l_rho.apply(&theta.apply(&e));
            let rhs = theta.apply(&l.apply(&e));
            commutation = commutation.max((lhs - rhs).max_abs());
        }
    }
    let invariance = (theta.apply(rho) - rho).max_abs();
    let scale = l.generator().max_abs().max(1.0);
    Ok(PropertyReport::threshold(
        "time reversal",
        (commutation / scale).max(invariance),
        tol.check,
        format!("|L^rho Theta - Theta L| = {commutation:.3e}, |Theta(rho) - rho| = {invariance:.3e}"),
    ))
}
