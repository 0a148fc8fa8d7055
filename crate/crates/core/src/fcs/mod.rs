//! Entropic full counting statistics: the deformed generator L_(α), its
//! dominant eigenvalue e(α) and the quantities derived from it.

mod scan;
mod symmetry;
mod transport;

use nalgebra::{DMatrix, DVector};

use crate::davies::WeakCouplingModel;
use crate::error::{Error, Result};
use crate::lindblad::dissipation;
use crate::liouville::{
    dominant_spectral_point, left_mul, null_space, right_mul, semigroup_apply, Operator, SpectralPoint,
    Superoperator, C64,
};
use crate::tolerances::Tolerances;

pub use scan::{
    cgf_scan, chebyshev_smoothness, convexity_residual, linspace, rate_function, tensor_grid, CgfScan, RateEstimate,
};
pub use symmetry::{
    energetic_cgf, energetic_symmetry_residuals, es_symmetry_residual, spectrum_distance,
    translation_symmetry_residual, SymmetryReport,
};
pub use transport::{
    energetic_hessian0, fdt_residual, green_kubo_matrix, kinetic_coefficients, lebowitz_spohn, GreenKubo,
    TransportMatrix, TransportMethod,
};

/// Central-difference step for the gradient at 0.
pub const GRADIENT_STEP: f64 = 1e-5;
/// Base step of the Richardson-refined second differences.
pub const HESSIAN_STEP: f64 = 1e-3;
/// Perturbative and finite-difference gradients must agree to this.
pub const GRADIENT_AGREEMENT: f64 = 1e-6;
/// Finite-difference and integral Hessians must agree to this, entrywise.
pub const HESSIAN_AGREEMENT: f64 = 1e-5;

#[derive(Clone, Debug)]
pub struct DeformedGenerator {
    pub alpha: Vec<f64>,
    pub matrix: Superoperator,
}

fn check_alpha(model: &WeakCouplingModel, alpha: &[f64]) -> Result<()> {
    if alpha.len() != model.num_reservoirs() {
        return Err(Error::DimensionMismatch { expected: model.num_reservoirs(), found: alpha.len() });
    }
    if alpha.iter().any(|a| !a.is_finite()) {
        return Err(Error::InvalidArgument("deformation parameter is not finite".into()));
    }
    Ok(())
}

/// K = Σ_j (½Φ_j(1) + iT_j), the generator of the no-jump evolution.
pub fn no_jump_operator(model: &WeakCouplingModel) -> Operator {
    let one = Operator::identity(model.dim());
    model.subs.iter().fold(Operator::zeros(model.dim()), |acc, s| {
        acc + s.lind.phi().apply(&one).scale_re(0.5) + s.lind.t().scale(C64::new(0.0, 1.0))
    })
}

/// Σ_j Σ_ω e^{−α_jω} Φ_{j,ω} plus X ↦ −K†X − XK.
pub fn deform_modular(model: &WeakCouplingModel, alpha: &[f64]) -> Superoperator {
    let k = no_jump_operator(model);
    let base = (left_mul(&k.adjoint()) + right_mul(&k)).scale_re(-1.0);
    model.subs.iter().zip(alpha).fold(base, |acc, (s, &a)| acc + s.deformed_phi(a))
}

/// Σ_j R(ρ_j^{α_j}) ∘ L_j ∘ R(ρ_j^{−α_j}), with R the right multiplication.
pub fn deform_direct(model: &WeakCouplingModel, alpha: &[f64]) -> Superoperator {
    model.subs.iter().zip(alpha).fold(Superoperator::zeros(model.dim()), |acc, (s, &a)| {
        let up = right_mul(&s.rho_ref.powf(a));
        let down = right_mul(&s.rho_ref.powf(-a));
        acc + up.compose(s.lind.generator()).compose(&down)
    })
}

/// L_(α), built through the modular parts and checked against the direct
/// formula.
pub fn deform(model: &WeakCouplingModel, alpha: &[f64]) -> Result<DeformedGenerator> {
    check_alpha(model, alpha)?;
    let matrix = deform_modular(model, alpha);
    let direct = deform_direct(model, alpha);
    let diff = (&matrix - &direct).max_abs();
    let scale = matrix.max_abs().max(direct.max_abs()).max(1.0);
    if diff > model.tol.check * scale {
        return Err(Error::CrossCheck(format!(
            "modular and direct deformed generators differ by {diff:.3e} at alpha = {alpha:?}"
        )));
    }
    Ok(DeformedGenerator { alpha: alpha.to_vec(), matrix })
}

/// ∂L_(α)/∂α_j = −Σ_ω ω e^{−α_jω} Φ_{j,ω}
pub fn deform_derivative(model: &WeakCouplingModel, alpha: &[f64], j: usize) -> Superoperator {
    model.subs[j].modular_parts.iter().fold(Superoperator::zeros(model.dim()), |acc, p| {
        acc + p.superop.scale_re(-p.quantum * (-alpha[j] * p.quantum).exp())
    })
}

pub(crate) fn require_ergodic(model: &WeakCouplingModel) -> Result<()> {
    if model.flags.er {
        Ok(())
    } else {
        Err(Error::Hypothesis("the generator is not positivity improving".into()))
    }
}

/// Dominant spectral point of L_(α) with the value checked to be real.
pub fn cgf_point(model: &WeakCouplingModel, alpha: &[f64]) -> Result<SpectralPoint> {
    require_ergodic(model)?;
    let gen = deform(model, alpha)?;
    let point = dominant_spectral_point(&gen.matrix, &model.tol)?;
    if point.value.im.abs() > model.tol.eig * point.value.re.abs().max(1.0) {
        return Err(Error::DegenerateDominant { value: point.value, reason: "imaginary part above tolerance".into() });
    }
    Ok(point)
}

/// e(α)
pub fn cgf(model: &WeakCouplingModel, alpha: &[f64]) -> Result<f64> {
    Ok(cgf_point(model, alpha)?.value.re)
}

/// e(α) with its gradient from first-order perturbation theory of the
/// simple eigenvalue, and the spectral gap.
pub fn cgf_with_gradient(model: &WeakCouplingModel, alpha: &[f64]) -> Result<(f64, Vec<f64>, f64)> {
    let point = cgf_point(model, alpha)?;
    let right = point.right_vec.vectorize();
    let left = point.left_vec.vectorize();
    let grad = (0..model.num_reservoirs())
        .map(|j| left.dotc(&(deform_derivative(model, alpha, j).matrix() * &right)).re)
        .collect();
    Ok((point.value.re, grad, point.gap))
}

/// log tr(ρ e^{tL_(α)}(1))
pub fn finite_time_cgf(model: &WeakCouplingModel, rho: &Operator, t: f64, alpha: &[f64]) -> Result<f64> {
    rho.check_dim(model.dim())?;
    rho.require_state(&model.tol)?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("time must be non-negative, got {t}")));
    }
    let gen = deform(model, alpha)?;
    let evolved = semigroup_apply(&gen.matrix, t, &Operator::identity(model.dim()));
    Ok(rho.expect(&evolved).re.ln())
}

/// Normalized state spanning the kernel of a Schrödinger-picture generator.
pub(crate) fn kernel_state(l: &Superoperator, tol: &Tolerances) -> Result<Operator> {
    let d = l.dim();
    let dual = l.adjoint();
    let kernel = null_space(dual.matrix(), tol.eig);
    if kernel.len() != 1 {
        return Err(Error::KernelDimension(kernel.len()));
    }
    let raw = Operator::devectorize(d, &kernel[0]);
    let rho = raw.scale(raw.trace().inv()).hermitian_part();
    rho.require_faithful(tol)?;
    let residual = dual.apply(&rho).max_abs();
    if residual > tol.check * l.max_abs().max(1.0) {
        return Err(Error::CrossCheck(format!("steady state residual {residual:.3e}")));
    }
    Ok(rho)
}

/// ρ₊, the faithful state with L†(ρ₊) = 0.
pub fn steady_state(model: &WeakCouplingModel) -> Result<Operator> {
    require_ergodic(model)?;
    kernel_state(model.generator(), &model.tol)
}

/// Entropy and energy flux observables of every reservoir.
#[derive(Clone, Debug)]
pub struct FluxSet {
    pub rho_plus: Operator,
    /// S_j = −log ρ_j
    pub entropy: Vec<Operator>,
    /// I_j = L_j(S_j)
    pub entropy_flux: Vec<Operator>,
    /// F_j = L_j(H_S)
    pub energy_flux: Vec<Operator>,
    /// I_j − ρ₊(I_j)
    pub centered: Vec<Operator>,
    /// L_j†(S_jρ₊)ρ₊⁻¹
    pub centered_plus: Vec<Operator>,
}

impl FluxSet {
    /// ρ₊(I_j) = ∂_j e(0)
    pub fn mean_entropy_fluxes(&self) -> Vec<f64> {
        self.entropy_flux.iter().map(|i| self.rho_plus.expect(i).re).collect()
    }

    /// φ̄_j = ρ₊(F_j)
    pub fn mean_energy_fluxes(&self) -> Vec<f64> {
        self.energy_flux.iter().map(|f| self.rho_plus.expect(f).re).collect()
    }

    /// ς̄ = −ρ₊(I), the mean entropy rates carried into the reservoirs.
    pub fn mean_entropy_rates(&self) -> Vec<f64> {
        self.mean_entropy_fluxes().into_iter().map(|x| -x).collect()
    }
}

pub fn fluxes(model: &WeakCouplingModel) -> Result<FluxSet> {
    let rho_plus = steady_state(model)?;
    let rho_inv = rho_plus.inverse()?;
    let h = model.system.hamiltonian();
    let mut set = FluxSet {
        rho_plus: rho_plus.clone(),
        entropy: Vec::new(),
        entropy_flux: Vec::new(),
        energy_flux: Vec::new(),
        centered: Vec::new(),
        centered_plus: Vec::new(),
    };
    let one = Operator::identity(model.dim());
    for sub in &model.subs {
        let s = sub.rho_ref.log().scale_re(-1.0);
        let i = sub.lind.apply(&s);
        let mean = rho_plus.expect(&i);
        set.centered.push(&i - &one.scale(mean));
        set.centered_plus.push(sub.lind.adjoint_apply(&(&s * &rho_plus)) * &rho_inv);
        set.energy_flux.push(sub.lind.apply(h));
        set.entropy_flux.push(i);
        set.entropy.push(s);
    }
    Ok(set)
}

/// σ(ρ) = Σ_j tr(L_j†(ρ)(log ρ_j − log ρ))
pub fn entropy_production(model: &WeakCouplingModel, rho: &Operator) -> Result<f64> {
    rho.check_dim(model.dim())?;
    rho.require_state(&model.tol)?;
    rho.require_faithful(&model.tol)?;
    let log_rho = rho.log();
    Ok(model
        .subs
        .iter()
        .map(|s| s.lind.adjoint_apply(rho).expect(&(s.rho_ref.log() - &log_rho)).re)
        .sum())
}

/// σ(ρ₊), cross-checked against the entropy balance −Σ_j ρ₊(I_j).
pub fn entropy_production_rate(model: &WeakCouplingModel) -> Result<f64> {
    let flux = fluxes(model)?;
    let sigma = entropy_production(model, &flux.rho_plus)?;
    let balance: f64 = flux.mean_entropy_rates().iter().sum();
    if (sigma - balance).abs() > model.tol.check * sigma.abs().max(1.0) {
        return Err(Error::CrossCheck(format!("entropy production {sigma} vs entropy balance {balance}")));
    }
    Ok(sigma)
}

/// Y = ∫₀^∞ e^{tL}(X) dt for ρ₊(X) = 0, from (L − |1⟩⟨ρ₊|)Y = −X.
pub fn drazin_apply(l: &Superoperator, rho_plus: &Operator, x: &Operator, tol: &Tolerances) -> Result<Operator> {
    let d = l.dim();
    x.check_dim(d)?;
    rho_plus.check_dim(d)?;
    let mean = rho_plus.expect(x);
    if mean.norm() > tol.check * x.max_abs().max(1.0) {
        return Err(Error::NotCentered(mean.norm()));
    }
    let one = Operator::identity(d).vectorize();
    let a = l.matrix() - &one * rho_plus.vectorize().adjoint();
    let rhs: DVector<C64> = -x.vectorize();
    let y = a.clone().lu().solve(&rhs).ok_or(Error::Singular(f64::INFINITY))?;
    let residual = (&a * &y - &rhs).norm();
    if !(residual <= tol.check * a.norm().max(1.0) * y.norm().max(1.0)) {
        return Err(Error::Singular(residual));
    }
    Ok(Operator::devectorize(d, &y))
}

/// ∂e/∂α at 0 by two routes plus the flux identity.
#[derive(Clone, Debug)]
pub struct CgfGradient {
    /// ⟨ρ₊|∂_jL_(α)(1)⟩ at α = 0
    pub perturbative: Vec<f64>,
    /// ρ₊(I_j)
    pub flux: Vec<f64>,
    pub finite_difference: Vec<f64>,
}

pub fn cgf_gradient0(model: &WeakCouplingModel) -> Result<CgfGradient> {
    let flux = fluxes(model)?;
    let m = model.num_reservoirs();
    let zero = vec![0.0; m];
    let one = Operator::identity(model.dim());
    let perturbative: Vec<f64> = (0..m)
        .map(|j| flux.rho_plus.expect(&deform_derivative(model, &zero, j).apply(&one)).re)
        .collect();
    let finite_difference = (0..m)
        .map(|j| {
            let mut plus = zero.clone();
            let mut minus = zero.clone();
            plus[j] = GRADIENT_STEP;
            minus[j] = -GRADIENT_STEP;
            Ok((cgf(model, &plus)? - cgf(model, &minus)?) / (2.0 * GRADIENT_STEP))
        })
        .collect::<Result<Vec<f64>>>()?;
    let flux_means = flux.mean_entropy_fluxes();
    for j in 0..m {
        let identity_gap = (perturbative[j] - flux_means[j]).abs();
        if identity_gap > model.tol.check * flux_means[j].abs().max(1.0) {
            return Err(Error::CrossCheck(format!("reservoir {j}: <rho+|dL(1)> differs from rho+(I) by {identity_gap:.3e}")));
        }
        let fd_gap = (perturbative[j] - finite_difference[j]).abs();
        if fd_gap > GRADIENT_AGREEMENT {
            return Err(Error::CrossCheck(format!("reservoir {j}: finite-difference gradient off by {fd_gap:.3e}")));
        }
    }
    Ok(CgfGradient { perturbative, flux: flux_means, finite_difference })
}

/// Symmetric second differences of `f` at `x0` with step `h`, refined once
/// by Richardson extrapolation.
pub(crate) fn richardson_hessian(f: &(dyn Fn(&[f64]) -> Result<f64> + Sync), x0: &[f64], h: f64) -> Result<DMatrix<f64>> {
    let m = x0.len();
    let at = |steps: &[(usize, f64)]| {
        let mut x = x0.to_vec();
        for &(k, s) in steps {
            x[k] += s;
        }
        f(&x)
    };
    let plain = |h: f64| -> Result<DMatrix<f64>> {
        let f0 = f(x0)?;
        let mut out = DMatrix::zeros(m, m);
        for j in 0..m {
            out[(j, j)] = (at(&[(j, h)])? - 2.0 * f0 + at(&[(j, -h)])?) / (h * h);
            for k in 0..j {
                let v = (at(&[(j, h), (k, h)])? - at(&[(j, h), (k, -h)])? - at(&[(j, -h), (k, h)])?
                    + at(&[(j, -h), (k, -h)])?)
                    / (4.0 * h * h);
                out[(j, k)] = v;
                out[(k, j)] = v;
            }
        }
        Ok(out)
    };
    let coarse = plain(h)?;
    let fine = plain(h / 2.0)?;
    Ok((fine * 4.0 - coarse) / 3.0)
}

/// ∂²e/∂α_j∂α_k at 0 by finite differences and by the time-integral
/// formula.
#[derive(Clone, Debug)]
pub struct CgfHessian {
    pub finite_difference: DMatrix<f64>,
    pub integral: DMatrix<f64>,
}

/// −∫ρ₊(e^{tL}(J_j)J_k⁺ + e^{tL}(J_k)J_j⁺)dt + ∫ρ₊(L_k(e^{tL}(J_j)S_k) + L_j(e^{tL}(J_k)S_j))dt
/// + δ_jk ρ₊(D_j(S_j, S_j))
pub fn hessian_integral(model: &WeakCouplingModel) -> Result<DMatrix<f64>> {
    let flux = fluxes(model)?;
    let m = model.num_reservoirs();
    let rho = &flux.rho_plus;
    let integrated: Vec<Operator> = flux
        .centered
        .iter()
        .map(|j| drazin_apply(model.generator(), rho, j, &model.tol))
        .collect::<Result<_>>()?;
    // ρ₊(L_k(Y S_k)) − ρ₊(Y J_k⁺)
    let cross = |y: &Operator, k: usize| {
        let lk = &model.subs[k].lind;
        rho.expect(&lk.apply(&(y * &flux.entropy[k]))).re - rho.expect(&(y * &flux.centered_plus[k])).re
    };
    let mut out = DMatrix::zeros(m, m);
    for j in 0..m {
        for k in 0..m {
            let mut v = cross(&integrated[j], k) + cross(&integrated[k], j);
            if j == k {
                let s = &flux.entropy[j];
                v += rho.expect(&dissipation(&model.subs[j].lind, s, s)).re;
            }
            out[(j, k)] = v;
        }
    }
    Ok(out)
}

pub fn cgf_hessian0(model: &WeakCouplingModel) -> Result<CgfHessian> {
    require_ergodic(model)?;
    let m = model.num_reservoirs();
    let finite_difference = richardson_hessian(&|a: &[f64]| cgf(model, a), &vec![0.0; m], HESSIAN_STEP)?;
    let integral = hessian_integral(model)?;
    let gap = (&finite_difference - &integral).amax();
    if gap > HESSIAN_AGREEMENT {
        return Err(Error::CrossCheck(format!("finite-difference and integral Hessians differ by {gap:.3e}")));
    }
    Ok(CgfHessian { finite_difference, integral })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::davies::gibbs_state;
    use crate::lindblad::{choi_is_cp, positivity_improving_check, CpGenerator, KrausMap, TimeReversal};
    use crate::liouville::{random::random_state, semigroup};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Rates of the two-level rate equation of QUBIT2R: a_j down, b_j up.
    fn qubit_rates(betas: &[f64], gammas: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let a = gammas.to_vec();
        let b = betas.iter().zip(gammas).map(|(b, g)| g * (-b).exp()).collect();
        (a, b)
    }

    /// Largest root of the tilted 2×2 population generator.
    fn tilted_root(betas: &[f64], gammas: &[f64], alpha: &[f64]) -> f64 {
        let (a, b) = qubit_rates(betas, gammas);
        let big_a: f64 = a.iter().sum();
        let big_b: f64 = b.iter().sum();
        let c: f64 = (0..a.len()).map(|j| a[j] * (-alpha[j] * betas[j]).exp()).sum();
        let dd: f64 = (0..a.len()).map(|j| b[j] * (alpha[j] * betas[j]).exp()).sum();
        0.5 * (-(big_a + big_b) + ((big_a - big_b).powi(2) + 4.0 * c * dd).sqrt())
    }

    fn qubit() -> WeakCouplingModel {
        corpus::load("qubit2r").unwrap()
    }

    #[test]
    fn undeformed_generator_is_the_model() {
        for name in ["qubit2r", "qutrit_generic", "reducible"] {
            let m = corpus::load(name).unwrap();
            let zero = vec![0.0; m.num_reservoirs()];
            let gen = deform(&m, &zero).unwrap();
            assert!((&gen.matrix - m.generator()).max_abs() < 1e-13, "{name}");
        }
    }

    #[test]
    fn deformed_semigroup_is_cp_and_positivity_improving() {
        let m = qubit();
        let tol = Tolerances::default();
        for alpha in [[0.7, -0.3], [1.5, 2.0], [-1.0, 0.4]] {
            let gen = deform(&m, &alpha).unwrap();
            assert!(choi_is_cp(&semigroup(&gen.matrix, 1.0), &tol).passed);
            struct Deformed(Superoperator, KrausMap);
            impl CpGenerator for Deformed {
                fn superop(&self) -> &Superoperator {
                    &self.0
                }
                fn jump_kraus(&self) -> &KrausMap {
                    &self.1
                }
            }
            let scaled_ops = m
                .subs
                .iter()
                .zip(&alpha)
                .flat_map(|(s, &a)| {
                    s.modular_parts.iter().flat_map(move |p| {
                        p.kraus.ops().iter().map(move |w| w.scale_re((-0.5 * a * p.quantum).exp()))
                    })
                })
                .collect();
            let g = Deformed(gen.matrix.clone(), KrausMap::new(scaled_ops).unwrap());
            assert!(positivity_improving_check(&g, &tol).passed);
        }
    }

    #[test]
    fn population_block_is_the_tilted_rate_matrix() {
        let m = qubit();
        let alpha = [0.5, 0.0];
        let gen = deform(&m, &alpha).unwrap();
        let (a, b) = qubit_rates(&[1.0, 2.0], &[1.0, 0.5]);
        let betas = [1.0, 2.0];
        // Heisenberg picture on diagonal observables: (L f)(0) = up rates, (L f)(1) = down rates.
        let up: f64 = (0..2).map(|j| b[j] * (alpha[j] * betas[j]).exp()).sum();
        let down: f64 = (0..2).map(|j| a[j] * (-alpha[j] * betas[j]).exp()).sum();
        let exit_up: f64 = b.iter().sum();
        let exit_down: f64 = a.iter().sum();
        let expected = [[-exit_up, up], [down, -exit_down]];
        for (i, row) in expected.iter().enumerate() {
            for (k, &value) in row.iter().enumerate() {
                let image = gen.matrix.apply(&Operator::unit(2, k, k));
                assert!((image.get(i, i).re - value).abs() < 1e-13, "({i},{k})");
            }
        }
    }

    #[test]
    fn cgf_matches_closed_form_root() {
        let m = qubit();
        for alpha in [[0.5, 0.5], [0.0, 0.0], [1.0, 1.0], [-0.7, 1.9], [2.0, -1.0]] {
            let e = cgf(&m, &alpha).unwrap();
            assert!((e - tilted_root(&[1.0, 2.0], &[1.0, 0.5], &alpha)).abs() < 1e-12, "{alpha:?}");
        }
        assert!(cgf(&m, &[1.0, 1.0]).unwrap().abs() < 1e-12);
    }

    #[test]
    fn deformed_generators_are_time_reversal_conjugate() {
        let m = qubit();
        let theta = TimeReversal::conjugation(2);
        let l1 = deform(&m, &[1.0, 1.0]).unwrap().matrix.adjoint();
        let l0 = m.generator();
        for i in 0..2 {
            for j in 0..2 {
                let x = Operator::unit(2, i, j);
                let lhs = theta.apply(&l1.apply(&x));
                let rhs = l0.apply(&theta.apply(&x));
                assert!((lhs - rhs).max_abs() < 1e-12);
            }
        }
    }

    #[test]
    fn reducible_model_has_no_cgf() {
        let m = corpus::load("reducible").unwrap();
        assert!(matches!(cgf(&m, &[0.0, 0.0]), Err(Error::Hypothesis(_))));
        assert!(matches!(steady_state(&m), Err(Error::Hypothesis(_))));
        assert!(matches!(kernel_state(m.generator(), &m.tol), Err(Error::KernelDimension(2))));
    }

    #[test]
    fn gradient_uses_the_cached_eigenvectors() {
        let m = corpus::load("qutrit_generic").unwrap();
        let alpha = [0.3, -0.2];
        let (_, grad, gap) = cgf_with_gradient(&m, &alpha).unwrap();
        assert!(gap > 0.0);
        for j in 0..2 {
            let mut p = alpha;
            let mut q = alpha;
            p[j] += 1e-5;
            q[j] -= 1e-5;
            let fd = (cgf(&m, &p).unwrap() - cgf(&m, &q).unwrap()) / 2e-5;
            assert!((fd - grad[j]).abs() < 1e-7);
        }
    }

    #[test]
    fn finite_time_cgf_properties() {
        let m = qubit();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rho = random_state(2, &mut rng);
        for t in [0.0, 0.5, 3.0] {
            assert!(finite_time_cgf(&m, &rho, t, &[0.0, 0.0]).unwrap().abs() < 1e-12);
        }
        let chaotic = Operator::identity(2).scale_re(0.5);
        for t in [0.3, 2.0] {
            let a = finite_time_cgf(&m, &chaotic, t, &[0.4, -0.6]).unwrap();
            let b = finite_time_cgf(&m, &chaotic, t, &[0.6, 1.6]).unwrap();
            assert!((a - b).abs() < 1e-11);
        }
        let alpha = [0.4, -0.3];
        let e = cgf(&m, &alpha).unwrap();
        for t in [20.0, 40.0] {
            assert!((finite_time_cgf(&m, &rho, t, &alpha).unwrap() / t - e).abs() < 1e-3);
        }
    }

    #[test]
    fn steady_state_oracles() {
        let m = qubit();
        let rho = steady_state(&m).unwrap();
        let (a, b) = qubit_rates(&[1.0, 2.0], &[1.0, 0.5]);
        let excited = b.iter().sum::<f64>() / (a.iter().sum::<f64>() + b.iter().sum::<f64>());
        assert!((rho.get(1, 1).re - excited).abs() < 1e-12);
        assert!(rho.get(0, 1).norm() < 1e-12);
        let eq = corpus::load("qubit2r_equilibrium").unwrap();
        let gibbs = gibbs_state(eq.system.hamiltonian(), 1.0).unwrap();
        assert!((steady_state(&eq).unwrap() - gibbs).max_abs() < 1e-10);
    }

    #[test]
    fn flux_identities() {
        for name in ["qubit2r", "qutrit_generic"] {
            let m = corpus::load(name).unwrap();
            let f = fluxes(&m).unwrap();
            let phi = f.mean_energy_fluxes();
            assert!(phi.iter().sum::<f64>().abs() < 1e-12, "{name}");
            for (j, beta) in m.betas().iter().enumerate() {
                assert!((&f.entropy_flux[j] - &f.energy_flux[j].scale_re(*beta)).max_abs() < 1e-12);
                assert!(f.rho_plus.expect(&f.centered[j]).norm() < 1e-13);
            }
        }
        let eq = corpus::load("qubit2r_equilibrium").unwrap();
        for phi in fluxes(&eq).unwrap().mean_energy_fluxes() {
            assert!(phi.abs() < 1e-12);
        }
    }

    #[test]
    fn qubit_fluxes_against_rate_balance() {
        let m = qubit();
        let (a, b) = qubit_rates(&[1.0, 2.0], &[1.0, 0.5]);
        let p1 = (b[0] + b[1]) / (a[0] + a[1] + b[0] + b[1]);
        // Energy gained by the system from reservoir 1 per unit time.
        let phi1 = b[0] * (1.0 - p1) - a[0] * p1;
        let f = fluxes(&m).unwrap();
        assert!((f.mean_energy_fluxes()[0] - phi1).abs() < 1e-12);
        let sigma = entropy_production_rate(&m).unwrap();
        assert!((sigma - (2.0 - 1.0) * phi1).abs() < 1e-12);
        assert!(sigma > 1e-6);
        let grad = cgf_gradient0(&m).unwrap();
        assert!((grad.perturbative[0] - phi1).abs() < 1e-12);
    }

    #[test]
    fn entropy_production_is_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for name in ["qubit2r", "qutrit_generic"] {
            let m = corpus::load(name).unwrap();
            for _ in 0..50 {
                let rho = random_state(m.dim(), &mut rng);
                assert!(entropy_production(&m, &rho).unwrap() >= -1e-12);
            }
        }
        let single = corpus::load("qubit2r").unwrap();
        let sub = &single.subs[0];
        let one_res = crate::davies::assemble(&single.system, &single.reservoirs[..1], &single.tol).unwrap();
        assert!(entropy_production(&one_res, &sub.rho_ref).unwrap().abs() < 1e-14);
        let pure = Operator::diagonal(&[1.0, 0.0]);
        assert!(matches!(entropy_production(&single, &pure), Err(Error::NotFaithful { .. })));
    }

    #[test]
    fn drazin_inverse_examples() {
        let m = qubit();
        let tol = Tolerances::default();
        let rho = steady_state(&m).unwrap();
        let zero = drazin_apply(m.generator(), &rho, &Operator::zeros(2), &tol).unwrap();
        assert!(zero.max_abs() == 0.0);
        // L(X) = −γ(X − tr(X)/2), rate γ on everything orthogonal to 1.
        let gamma = 0.8;
        let chaotic = Operator::identity(2).scale_re(0.5);
        let l = Superoperator::from_map(2, |x| (x - &Operator::identity(2).scale(chaotic.expect(x))).scale_re(-gamma));
        let x = Operator::unit(2, 0, 1) + Operator::diagonal(&[0.3, -0.3]);
        let y = drazin_apply(&l, &chaotic, &x, &tol).unwrap();
        assert!((y - x.scale_re(1.0 / gamma)).max_abs() < 1e-14);
        let f = fluxes(&m).unwrap();
        for j in &f.centered {
            let y = drazin_apply(m.generator(), &rho, j, &tol).unwrap();
            assert!((m.generator().apply(&y) + j).max_abs() < 1e-12);
            assert!(rho.expect(&y).norm() < 1e-12);
        }
        assert!(matches!(
            drazin_apply(m.generator(), &rho, &Operator::identity(2), &tol),
            Err(Error::NotCentered(_))
        ));
    }

    #[test]
    fn hessian_routes_agree() {
        for name in ["qubit2r", "qutrit_generic", "qubit2r_equilibrium"] {
            let m = corpus::load(name).unwrap();
            let h = cgf_hessian0(&m).unwrap();
            let betas = m.betas();
            let inv = DVector::from_iterator(betas.len(), betas.iter().map(|b| 1.0 / b));
            assert!((&h.integral * inv).amax() < 1e-10, "{name}");
            let eig = h.integral.clone().symmetric_eigen();
            assert!(eig.eigenvalues.min() > -1e-10);
        }
    }

    #[test]
    fn single_reservoir_hessian_is_the_dissipation_term() {
        let m = qubit();
        let one_res = crate::davies::assemble(&m.system, &m.reservoirs[..1], &m.tol).unwrap();
        let h = cgf_hessian0(&one_res).unwrap();
        let sub = &one_res.subs[0];
        let s = sub.rho_ref.log().scale_re(-1.0);
        let direct = sub.rho_ref.expect(&dissipation(&sub.lind, &s, &s)).re;
        // Translation symmetry in one dimension makes e constant, so the
        // integral term cancels the strictly positive dissipation term.
        assert!(h.finite_difference[(0, 0)].abs() < 1e-6);
        assert!(h.integral[(0, 0)].abs() < 1e-10);
        assert!(direct > 1e-3);
    }
}
