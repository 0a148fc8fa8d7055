use nalgebra::DMatrix;

use super::{gibbs_state, jump_operators, SystemSpec};
use crate::error::{Error, Result};
use crate::lindblad::{detailed_balance_check, lindblad_generator, KrausMap, ModularPart, SubLindbladian};
use crate::liouville::{Operator, C64};
use crate::tolerances::Tolerances;

/// Positive-frequency reservoir spectral matrix h(ω), ω ≥ 0.
#[derive(Clone, Debug)]
pub enum SpectralDensity {
    /// Sampled at the listed frequencies; lookups must hit one of them.
    Table { omegas: Vec<f64>, matrices: Vec<DMatrix<C64>> },
    /// h(ω) = γ·1 for every ω ≥ 0.
    Flat { gamma: f64 },
}

/// Lamb-shift matrices s(ω) at signed frequencies; absent entries are zero.
#[derive(Clone, Debug, Default)]
pub struct LambShift {
    pub omegas: Vec<f64>,
    pub matrices: Vec<DMatrix<C64>>,
}

fn same_frequency(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

impl SpectralDensity {
    pub fn at(&self, omega: f64, n: usize) -> Result<DMatrix<C64>> {
        match self {
            SpectralDensity::Flat { gamma } => Ok(DMatrix::identity(n, n) * C64::new(*gamma, 0.0)),
            SpectralDensity::Table { omegas, matrices } => omegas
                .iter()
                .position(|&w| same_frequency(w, omega))
                .map(|k| matrices[k].clone())
                .ok_or_else(|| Error::model("h", format!("no entry for Bohr frequency {omega}"))),
        }
    }
}

impl LambShift {
    pub fn at(&self, omega: f64, n: usize) -> DMatrix<C64> {
        self.omegas
            .iter()
            .position(|&w| same_frequency(w, omega))
            .map(|k| self.matrices[k].clone())
            .unwrap_or_else(|| DMatrix::zeros(n, n))
    }
}

#[derive(Clone, Debug)]
pub struct ReservoirSpec {
    pub beta: f64,
    pub couplings: Vec<Operator>,
    pub h: SpectralDensity,
    pub s: LambShift,
}

impl ReservoirSpec {
    pub fn n(&self) -> usize {
        self.couplings.len()
    }

    pub fn with_beta(&self, beta: f64) -> ReservoirSpec {
        ReservoirSpec { beta, ..self.clone() }
    }

    /// True when every coupling and table entry is real.
    pub fn is_real(&self) -> bool {
        let real = |m: &DMatrix<C64>| m.iter().all(|z| z.im == 0.0);
        self.couplings.iter().all(Operator::is_real)
            && match &self.h {
                SpectralDensity::Flat { .. } => true,
                SpectralDensity::Table { matrices, .. } => matrices.iter().all(real),
            }
            && self.s.matrices.iter().all(real)
    }
}

fn min_hermitian_eigenvalue(m: &DMatrix<C64>) -> f64 {
    Operator::from_matrix(m.clone()).min_eigenvalue()
}

/// Completes a table on ω ≥ 0 by h(−ω) = e^{−βω} h(ω)ᵀ.
pub fn kms_complete(h_pos: &[(f64, DMatrix<C64>)], beta: f64, tol: &Tolerances) -> Result<Vec<(f64, DMatrix<C64>)>> {
    let mut full = Vec::with_capacity(2 * h_pos.len());
    for (omega, h) in h_pos {
        if *omega < 0.0 {
            return Err(Error::model("h.omega_values", format!("negative frequency {omega}")));
        }
        let herm = Operator::from_matrix(h.clone()).hermitian_residual();
        let scale = h.iter().fold(1.0_f64, |a, z| a.max(z.norm()));
        if herm > tol.herm * scale {
            return Err(Error::model("h", format!("h({omega}) is not Hermitian (residual {herm:.3e})")));
        }
        let min = min_hermitian_eigenvalue(h);
        if min < -tol.psd * scale {
            return Err(Error::model("h", format!("h({omega}) is not positive semidefinite (eigenvalue {min:.3e})")));
        }
        full.push((*omega, h.clone()));
        if *omega > 0.0 {
            full.push((-omega, h.transpose() * C64::new((-beta * omega).exp(), 0.0)));
        }
    }
    full.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(full)
}

/// Assembles the Davies sub-Lindbladian of one reservoir.
///
/// For each Bohr frequency ω with h(ω) = u g u†, the Kraus operators are
/// W_m = √g_m Σ_l conj(u_lm) V_l(ω), which reproduces
/// Σ_kl h_kl(ω) V_k(ω)† X V_l(ω). The modular part at entropy quantum β·ω
/// collects the W's of that Bohr frequency.
pub fn build_sub(sys: &SystemSpec, res: &ReservoirSpec, tol: &Tolerances) -> Result<SubLindbladian> {
    if !(res.beta > 0.0 && res.beta.is_finite()) {
        return Err(Error::model("beta", format!("inverse temperature must be positive, got {}", res.beta)));
    }
    let d = sys.dim();
    let n = res.n();
    if n == 0 {
        return Err(Error::model("couplings", "at least one coupling operator is required"));
    }
    let jumps: Vec<Vec<(f64, Operator)>> =
        res.couplings.iter().map(|q| jump_operators(q, sys, tol)).collect::<Result<_>>()?;
    let bohr = sys.bohr_frequencies();

    // Only frequencies carried by some nonzero V(±ω) need spectral data.
    let active = |omega: f64| {
        bohr.iter().enumerate().any(|(idx, &w)| same_frequency(w.abs(), omega) && jumps.iter().any(|j| j[idx].1.norm() > 1e-14))
    };
    let mut h_pos = Vec::new();
    for &omega in bohr.iter().filter(|&&w| w >= 0.0 && active(w)) {
        let h = res.h.at(omega, n)?;
        if h.nrows() != n || h.ncols() != n {
            return Err(Error::model("h", format!("h({omega}) must be {n}x{n}")));
        }
        h_pos.push((omega, h));
    }
    let h_full = kms_complete(&h_pos, res.beta, tol)?;

    let mut t = Operator::zeros(d);
    let mut all_kraus = Vec::new();
    let mut parts = Vec::new();
    for (idx, &omega) in bohr.iter().enumerate() {
        let v: Vec<&Operator> = jumps.iter().map(|j| &j[idx].1).collect();
        let s = res.s.at(omega, n);
        let s_herm = Operator::from_matrix(s.clone()).hermitian_residual();
        if s_herm > tol.herm * s.iter().fold(1.0_f64, |a, z| a.max(z.norm())) {
            return Err(Error::model("s", format!("s({omega}) is not Hermitian")));
        }
        for k in 0..n {
            for l in 0..n {
                if s[(k, l)] != C64::new(0.0, 0.0) {
                    t = t + (v[k].adjoint() * v[l]).scale(s[(k, l)]);
                }
            }
        }
        let Some((_, h)) = h_full.iter().find(|(w, _)| same_frequency(*w, omega)) else {
            continue;
        };
        let eig = Operator::from_matrix(h.clone()).eigh();
        let mut ws = Vec::new();
        for (m, &g) in eig.values.iter().enumerate() {
            if g <= 0.0 {
                continue;
            }
            let w = (0..n).fold(Operator::zeros(d), |acc, l| acc + v[l].scale(eig.vectors[(l, m)].conj()));
            let w = w.scale_re(g.sqrt());
            if w.norm() > 1e-14 {
                ws.push(w);
            }
        }
        if !ws.is_empty() {
            let kraus = KrausMap::new(ws.clone())?;
            let superop = kraus.superoperator();
            parts.push(ModularPart { quantum: res.beta * omega, kraus, superop });
            all_kraus.extend(ws);
        }
    }
    if all_kraus.is_empty() {
        all_kraus.push(Operator::zeros(d));
    }
    let lind = lindblad_generator(&t.hermitian_part(), &KrausMap::new(all_kraus)?, tol)?;
    let rho = gibbs_state(sys.hamiltonian(), res.beta)?;
    let report = detailed_balance_check(&rho, &lind, tol)?;
    if !report.passed {
        return Err(Error::DetailedBalance(report.residual));
    }
    Ok(SubLindbladian { rho_ref: rho, lind, modular_parts: parts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lindblad::modular_decompose;
    use crate::liouville::testing::{pauli, random_operator};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn real(rows: &[&[f64]]) -> DMatrix<C64> {
        Operator::from_real_rows(rows).into_matrix()
    }

    fn qubit_reservoir(beta: f64, gamma: f64) -> ReservoirSpec {
        ReservoirSpec {
            beta,
            couplings: vec![pauli().0],
            h: SpectralDensity::Flat { gamma },
            s: LambShift::default(),
        }
    }

    #[test]
    fn scalar_kms_completion() {
        let full = kms_complete(&[(1.0, real(&[&[2.0]]))], 1.0, &Tolerances::default()).unwrap();
        assert_eq!(full.len(), 2);
        assert_eq!(full[0].0, -1.0);
        assert!((full[0].1[(0, 0)].re - 2.0 * (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn matrix_kms_completion_transposes_and_stays_psd() {
        let h = DMatrix::from_row_slice(2, 2, &[
            C64::new(1.0, 0.0), C64::new(0.3, 0.2),
            C64::new(0.3, -0.2), C64::new(0.5, 0.0),
        ]);
        let full = kms_complete(&[(0.7, h.clone())], 2.0, &Tolerances::default()).unwrap();
        let neg = &full[0].1;
        let f = (-1.4f64).exp();
        for k in 0..2 {
            for l in 0..2 {
                assert!((neg[(k, l)] - h[(l, k)] * f).norm() < 1e-15);
            }
        }
        assert!(min_hermitian_eigenvalue(neg) >= 0.0);
        // Infinite-temperature limit: the negative side is the transpose.
        let hot = kms_complete(&[(0.7, h.clone())], 1e-300, &Tolerances::default()).unwrap();
        assert!((&hot[0].1 - h.transpose()).iter().all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn non_psd_table_names_the_frequency() {
        let err = kms_complete(&[(0.5, real(&[&[1.0, 2.0], &[2.0, 1.0]]))], 1.0, &Tolerances::default())
            .unwrap_err()
            .to_string();
        assert!(err.contains("h(0.5)"), "{err}");
    }

    #[test]
    fn thermal_qubit_rates() {
        let tol = Tolerances::default();
        let sys = SystemSpec::new(Operator::diagonal(&[0.0, 1.0]), &tol).unwrap();
        let sub = build_sub(&sys, &qubit_reservoir(1.0, 1.0), &tol).unwrap();
        // Excited population decays at rate 1 and is fed at rate e^{-1}:
        // L(P_1) = −P_1 + e^{−1} P_0 in the Heisenberg picture.
        let p1 = Operator::diagonal(&[0.0, 1.0]);
        let out = sub.lind.apply(&p1);
        assert!((out.get(1, 1).re + 1.0).abs() < 1e-14);
        assert!((out.get(0, 0).re - (-1.0f64).exp()).abs() < 1e-14);
        assert!(sub.lind.adjoint_apply(&sub.rho_ref).max_abs() < 1e-15);
        let quanta: Vec<f64> = sub.modular_parts.iter().map(|p| p.quantum).collect();
        assert_eq!(quanta, vec![-1.0, 1.0]);
        for r in sub.check_invariants(&tol).unwrap() {
            assert!(r.passed, "{r:?}");
        }
    }

    #[test]
    fn lamb_shift_alone_is_hamiltonian() {
        let tol = Tolerances::default();
        let sys = SystemSpec::new(Operator::diagonal(&[0.0, 1.0]), &tol).unwrap();
        let res = ReservoirSpec {
            beta: 1.0,
            couplings: vec![pauli().0],
            h: SpectralDensity::Flat { gamma: 0.0 },
            s: LambShift { omegas: vec![1.0, -1.0], matrices: vec![real(&[&[0.3]]), real(&[&[-0.2]])] },
        };
        let sub = build_sub(&sys, &res, &tol).unwrap();
        // T = 0.3 V(1)†V(1) − 0.2 V(−1)†V(−1) = diag(−0.2, 0.3)
        let t = Operator::diagonal(&[-0.2, 0.3]);
        assert!((sub.lind.t() - &t).max_abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let x = random_operator(2, &mut rng);
        let expected = t.commutator(&x).scale(C64::new(0.0, 1.0));
        assert!((sub.lind.apply(&x) - expected).max_abs() < 1e-14);
    }

    #[test]
    fn kraus_family_reproduces_the_h_weighted_sum() {
        let tol = Tolerances::default();
        let sys = SystemSpec::new(Operator::diagonal(&[0.0, 1.0, 2.5]), &tol).unwrap();
        let q1 = Operator::from_real_rows(&[&[0.0, 1.0, 0.0], &[1.0, 0.0, 0.4], &[0.0, 0.4, 0.0]]);
        let q2 = Operator::from_real_rows(&[&[0.2, 0.0, 1.0], &[0.0, -0.1, 0.6], &[1.0, 0.6, 0.3]]);
        let hm = |a: f64, b: f64, c: f64| real(&[&[a, b], &[b, c]]);
        let omegas = vec![0.0, 1.0, 1.5, 2.5];
        let matrices = vec![hm(0.5, 0.1, 0.4), hm(1.0, 0.3, 0.5), hm(0.8, -0.2, 0.6), hm(0.4, 0.1, 0.3)];
        let res = ReservoirSpec {
            beta: 1.3,
            couplings: vec![q1.clone(), q2.clone()],
            h: SpectralDensity::Table { omegas: omegas.clone(), matrices: matrices.clone() },
            s: LambShift::default(),
        };
        let sub = build_sub(&sys, &res, &tol).unwrap();
        let h_full = kms_complete(&omegas.iter().cloned().zip(matrices).collect::<Vec<_>>(), 1.3, &tol).unwrap();
        let v1 = jump_operators(&q1, &sys, &tol).unwrap();
        let v2 = jump_operators(&q2, &sys, &tol).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(52);
        let x = random_operator(3, &mut rng);
        let mut oracle = Operator::zeros(3);
        for (idx, (omega, _)) in v1.iter().enumerate() {
            let h = &h_full.iter().find(|e| (e.0 - omega).abs() < 1e-12).unwrap().1;
            let v = [&v1[idx].1, &v2[idx].1];
            for k in 0..2 {
                for l in 0..2 {
                    oracle = oracle + (v[k].adjoint() * &x * v[l]).scale(h[(k, l)]);
                }
            }
        }
        assert!((sub.lind.phi().apply(&x) - oracle).max_abs() < 1e-12);
        // The Kraus grouping agrees with the generic modular decomposition.
        let generic = modular_decompose(&sub.rho_ref, &sub.lind, &tol).unwrap();
        assert_eq!(generic.modular_parts.len(), sub.modular_parts.len());
        for (a, b) in generic.modular_parts.iter().zip(&sub.modular_parts) {
            assert!((a.quantum - b.quantum).abs() < 1e-9);
            assert!((&a.superop - &b.superop).max_abs() < 1e-12);
        }
        for r in sub.check_invariants(&tol).unwrap() {
            assert!(r.passed, "{r:?}");
        }
    }

    #[test]
    fn missing_table_frequency_is_reported() {
        let tol = Tolerances::default();
        let sys = SystemSpec::new(Operator::diagonal(&[0.0, 1.0]), &tol).unwrap();
        let res = ReservoirSpec {
            beta: 1.0,
            couplings: vec![pauli().0 + pauli().2.scale_re(0.5)],
            h: SpectralDensity::Table { omegas: vec![1.0], matrices: vec![real(&[&[1.0]])] },
            s: LambShift::default(),
        };
        let err = build_sub(&sys, &res, &tol).unwrap_err().to_string();
        assert!(err.contains("Bohr frequency 0"), "{err}");
    }
}
