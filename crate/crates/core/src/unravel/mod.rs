//! Quantum-jump unraveling of the weak-coupling generator: every jump is
//! tagged with its reservoir and the entropy quantum it carries.

mod ensemble;

use nalgebra::{DMatrix, DVector, Schur};
use rand::Rng;
use serde::Serialize;

use crate::davies::WeakCouplingModel;
use crate::error::{Error, Result};
use crate::fcs::no_jump_operator;
use crate::lindblad::PropertyReport;
use crate::liouville::{Operator, C64};

pub use ensemble::{
    bootstrap, empirical_clt_check, sample_ensemble, sample_trajectories, write_trajectories_csv, EnsembleStats,
    Estimate, BOOTSTRAP_RESAMPLES, CLT_MIN_SAMPLES,
};

/// Runaway guard.
pub const MAX_EVENTS: usize = 1_000_000;
/// Accuracy of the inverted survival probability.
pub const SURVIVAL_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct JumpChannel {
    pub reservoir: usize,
    /// Entropy quantum delivered to the reservoir.
    pub quantum: f64,
    /// Schrödinger-picture jump ψ ↦ Wψ.
    pub op: Operator,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Event {
    pub reservoir: usize,
    pub quantum: f64,
    pub time: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    pub horizon: f64,
    pub events: Vec<Event>,
}

impl Trajectory {
    /// ς_j = (1/t) Σ_{events in j} ω
    pub fn entropy_rates(&self, reservoirs: usize) -> Vec<f64> {
        let mut out = vec![0.0; reservoirs];
        for e in &self.events {
            out[e.reservoir] += e.quantum;
        }
        out.iter_mut().for_each(|x| *x /= self.horizon);
        out
    }
}

/// e^{−sK}, through a cached eigendecomposition when K is diagonalizable
/// with a well-conditioned basis.
#[derive(Clone, Debug)]
enum Propagator {
    Diagonal { basis: DMatrix<C64>, inverse: DMatrix<C64>, rates: DVector<C64> },
    Dense(DMatrix<C64>),
}

impl Propagator {
    fn new(k: &DMatrix<C64>) -> Self {
        Self::diagonalize(k).map_or_else(|| Propagator::Dense(k.clone()), |(basis, inverse, rates)| Propagator::Diagonal {
            basis,
            inverse,
            rates,
        })
    }

    fn diagonalize(k: &DMatrix<C64>) -> Option<(DMatrix<C64>, DMatrix<C64>, DVector<C64>)> {
        let d = k.nrows();
        let (q, t) = Schur::new(k.clone()).unpack();
        let scale = k.norm().max(1.0);
        let mut tri = DMatrix::<C64>::zeros(d, d);
        for c in 0..d {
            tri[(c, c)] = C64::new(1.0, 0.0);
            for i in (0..c).rev() {
                let gap = t[(i, i)] - t[(c, c)];
                let s: C64 = (i + 1..=c).map(|j| t[(i, j)] * tri[(j, c)]).sum();
                if gap.norm() <= 1e-8 * scale {
                    // repeated eigenvalue: fine only without a Jordan coupling
                    if s.norm() > 1e-12 * scale {
                        return None;
                    }
                    continue;
                }
                tri[(i, c)] = -s / gap;
            }
        }
        let mut basis = q * tri;
        for mut col in basis.column_iter_mut() {
            let n = col.norm();
            col /= C64::new(n, 0.0);
        }
        let inverse = basis.clone().try_inverse()?;
        let rates = DVector::from_iterator(d, (0..d).map(|i| t[(i, i)]));
        let rebuilt = &basis * DMatrix::from_diagonal(&rates) * &inverse;
        ((rebuilt - k).norm() <= 1e-11 * scale).then_some((basis, inverse, rates))
    }

    /// Returns s ↦ e^{−sK}ψ with the ψ-dependent work done once.
    fn flow<'a>(&'a self, psi: &DVector<C64>) -> impl Fn(f64) -> DVector<C64> + 'a {
        let coeffs = match self {
            Propagator::Diagonal { inverse, .. } => inverse * psi,
            Propagator::Dense(_) => psi.clone(),
        };
        move |s| match self {
            Propagator::Diagonal { basis, rates, .. } => {
                basis * coeffs.zip_map(rates, |c, r| c * (-r * s).exp())
            }
            Propagator::Dense(k) => (k * C64::new(-s, 0.0)).exp() * &coeffs,
        }
    }
}

/// Jump channels with the no-jump generator K = Σ_j(½Φ_j(1) + iT_j).
#[derive(Clone, Debug)]
pub struct ChannelSet {
    pub channels: Vec<JumpChannel>,
    pub no_jump: Operator,
    propagator: Propagator,
}

impl ChannelSet {
    /// K = ½ΣW†W + iT.
    pub fn new(channels: Vec<JumpChannel>, hamiltonian: &Operator) -> Result<Self> {
        let d = hamiltonian.dim();
        for c in &channels {
            c.op.check_dim(d)?;
        }
        hamiltonian.require_hermitian(1e-12 * hamiltonian.max_abs().max(1.0))?;
        let rate = channels.iter().fold(Operator::zeros(d), |acc, c| acc + c.op.adjoint() * &c.op);
        let no_jump = rate.scale_re(0.5) + hamiltonian.scale(C64::new(0.0, 1.0));
        Ok(Self::with_no_jump(channels, no_jump))
    }

    fn with_no_jump(channels: Vec<JumpChannel>, no_jump: Operator) -> Self {
        let propagator = Propagator::new(no_jump.matrix());
        ChannelSet { channels, no_jump, propagator }
    }

    pub fn dim(&self) -> usize {
        self.no_jump.dim()
    }

    /// Σ W†W
    pub fn total_rate(&self) -> Operator {
        self.channels.iter().fold(Operator::zeros(self.dim()), |acc, c| acc + c.op.adjoint() * &c.op)
    }

    /// max |ΣW†W − (K + K†)|
    pub fn completeness_residual(&self) -> f64 {
        (self.total_rate() - (&self.no_jump + &self.no_jump.adjoint())).max_abs()
    }

    /// Probability of no jump in [0, dt] and of a first jump through each
    /// channel within [0, dt], computed in closed form from the
    /// eigendecomposition of K.
    pub fn jump_probabilities(&self, psi: &DVector<C64>, dt: f64) -> (f64, Vec<f64>) {
        let survive = self.propagator.flow(psi)(dt).norm_squared();
        let jumps = match &self.propagator {
            Propagator::Diagonal { basis, inverse, rates } => {
                let a = inverse * psi;
                let integral = |z: C64| {
                    if (z * dt).norm() < 1e-8 {
                        C64::new(dt, 0.0) * (C64::new(1.0, 0.0) - z * dt * 0.5)
                    } else {
                        (C64::new(1.0, 0.0) - (-z * dt).exp()) / z
                    }
                };
                self.channels
                    .iter()
                    .map(|c| {
                        let wv = c.op.matrix() * basis;
                        let g = wv.adjoint() * &wv;
                        let mut acc = C64::new(0.0, 0.0);
                        for k in 0..a.len() {
                            for l in 0..a.len() {
                                acc += a[k].conj() * a[l] * g[(k, l)] * integral(rates[k].conj() + rates[l]);
                            }
                        }
                        acc.re
                    })
                    .collect()
            }
            Propagator::Dense(_) => {
                // composite Simpson, fine enough for the fallback
                let n = 2000;
                let flow = self.propagator.flow(psi);
                let h = dt / n as f64;
                let samples: Vec<DVector<C64>> = (0..=n).map(|i| flow(i as f64 * h)).collect();
                self.channels
                    .iter()
                    .map(|c| {
                        let f = |i: usize| (c.op.matrix() * &samples[i]).norm_squared();
                        let inner: f64 = (1..n).map(|i| if i % 2 == 1 { 4.0 * f(i) } else { 2.0 * f(i) }).sum();
                        h / 3.0 * (f(0) + inner + f(n))
                    })
                    .collect()
            }
        };
        (survive, jumps)
    }
}

/// Channels from the modular decomposition of every reservoir, grouped by
/// entropy quantum; a consistency failure of ΣW†W against ΣΦ_j(1) is a
/// cross-check error.
pub fn build_channels(model: &WeakCouplingModel) -> Result<ChannelSet> {
    let mut channels = Vec::new();
    for (j, sub) in model.subs.iter().enumerate() {
        let scale = sub.lind.phi().apply_identity().max_abs().max(f64::MIN_POSITIVE);
        for part in &sub.modular_parts {
            for w in part.kraus.pruned(1e-14 * scale.sqrt()) {
                channels.push(JumpChannel { reservoir: j, quantum: part.quantum, op: w });
            }
        }
    }
    let set = ChannelSet::with_no_jump(channels, no_jump_operator(model));
    let one = Operator::identity(model.dim());
    let phi_one = model.subs.iter().fold(Operator::zeros(model.dim()), |acc, s| acc + s.lind.phi().apply(&one));
    let residual = (set.total_rate() - &phi_one).max_abs();
    if residual > model.tol.check * phi_one.max_abs().max(1.0) {
        return Err(Error::CrossCheck(format!("jump channels miss {residual:.3e} of the total jump rate")));
    }
    Ok(set)
}

/// e^{aS_j} W e^{−aS_j} = e^{−aω} W for a ∈ {1, ½}, S_j = −log ρ_j.
pub fn channel_covariance_check(model: &WeakCouplingModel, set: &ChannelSet) -> PropertyReport {
    let mut worst = 0.0_f64;
    for c in &set.channels {
        let rho = &model.subs[c.reservoir].rho_ref;
        for a in [1.0, 0.5] {
            let lhs = rho.powf(-a) * &c.op * rho.powf(a);
            let rhs = c.op.scale_re((-a * c.quantum).exp());
            worst = worst.max((lhs - &rhs).max_abs() / rhs.max_abs().max(c.op.max_abs()));
        }
    }
    PropertyReport::threshold("jump channel covariance", worst, model.tol.check, format!("{} channels", set.channels.len()))
}

/// For every reservoir and positive quantum ω: ΣtrW₊†W₊ / ΣtrW₋†W₋ = e^ω
/// and the ρ_j-weighted ratio Σtr(ρ_jW₊†W₊) / Σtr(ρ_jW₋†W₋) = 1. The
/// residual is the largest deviation of the log-ratios.
pub fn channel_rate_check(model: &WeakCouplingModel, set: &ChannelSet) -> PropertyReport {
    let tol = model.tol.bohr;
    let mut worst = 0.0_f64;
    let mut pairs = 0;
    for (j, sub) in model.subs.iter().enumerate() {
        let rho = &sub.rho_ref;
        let weight = |q: f64| {
            set.channels
                .iter()
                .filter(|c| c.reservoir == j && (c.quantum - q).abs() <= tol * q.abs().max(1.0))
                .fold((0.0, 0.0), |(plain, weighted), c| {
                    let r = c.op.adjoint() * &c.op;
                    (plain + r.trace().re, weighted + rho.expect(&r).re)
                })
        };
        for part in sub.modular_parts.iter().filter(|p| p.quantum > tol) {
            let (down, down_w) = weight(part.quantum);
            let (up, up_w) = weight(-part.quantum);
            if down == 0.0 && up == 0.0 {
                continue;
            }
            pairs += 1;
            worst = worst.max(((down / up).ln() - part.quantum).abs()).max((down_w / up_w).ln().abs());
        }
    }
    PropertyReport::threshold("jump rate ratios e^omega", worst, 1e-8, format!("{pairs} frequency pairs"))
}

/// Survival below this counts as an underflow of the no-jump norm.
const UNDERFLOW: f64 = 1e-280;

/// One trajectory on [0, t] from the unit vector ψ₀. The waiting time
/// inverts s ↦ |e^{−sK}ψ|² by bisection; the channel is drawn with weight
/// |Wψ′|² from the normalized pre-jump vector ψ′.
pub fn sample_trajectory<R: Rng + ?Sized>(
    set: &ChannelSet,
    psi0: &DVector<C64>,
    t: f64,
    rng: &mut R,
) -> Result<Trajectory> {
    let mut events = Vec::new();
    run_trajectory(set, psi0, t, rng, |e| events.push(e))?;
    Ok(Trajectory { horizon: t, events })
}

pub(crate) fn run_trajectory<R: Rng + ?Sized>(
    set: &ChannelSet,
    psi0: &DVector<C64>,
    t: f64,
    rng: &mut R,
    mut on_event: impl FnMut(Event),
) -> Result<usize> {
    if psi0.len() != set.dim() {
        return Err(Error::DimensionMismatch { expected: set.dim(), found: psi0.len() });
    }
    if (psi0.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidArgument(format!("initial vector has norm {}", psi0.norm())));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("horizon must be positive, got {t}")));
    }
    let mut psi = psi0.clone();
    let mut now = 0.0;
    let mut count = 0;
    loop {
        let u = 1.0 - rng.random::<f64>();
        let flow = set.propagator.flow(&psi);
        let remaining = t - now;
        if flow(remaining).norm_squared() >= u {
            return Ok(count);
        }
        let (mut lo, mut hi) = (0.0, remaining);
        let mut s = 0.5 * remaining;
        loop {
            let p = flow(s).norm_squared();
            if (p - u).abs() <= SURVIVAL_TOLERANCE || hi - lo <= 1e-15 * hi.max(1.0) {
                break;
            }
            if p > u {
                lo = s;
            } else {
                hi = s;
            }
            s = 0.5 * (lo + hi);
        }
        let pre = flow(s);
        let norm = pre.norm();
        if !(norm * norm > UNDERFLOW) {
            return Err(Error::Trajectory { events: count, reason: format!("no-jump norm underflow at time {}", now + s) });
        }
        let pre = pre / C64::new(norm, 0.0);
        let kicked: Vec<DVector<C64>> = set.channels.iter().map(|c| c.op.matrix() * &pre).collect();
        let weights: Vec<f64> = kicked.iter().map(|v| v.norm_squared()).collect();
        let total: f64 = weights.iter().sum();
        if !(total > UNDERFLOW && total.is_finite()) {
            return Err(Error::Trajectory { events: count, reason: format!("vanishing jump rate at time {}", now + s) });
        }
        let mut r = rng.random::<f64>() * total;
        let mut pick = weights.len() - 1;
        for (i, w) in weights.iter().enumerate() {
            if r < *w {
                pick = i;
                break;
            }
            r -= w;
        }
        while weights[pick] == 0.0 {
            pick -= 1;
        }
        now = (now + s).min(t);
        let c = &set.channels[pick];
        on_event(Event { reservoir: c.reservoir, quantum: c.quantum, time: now });
        count += 1;
        if count >= MAX_EVENTS {
            return Err(Error::Trajectory { events: count, reason: format!("event cap {MAX_EVENTS} reached at time {now}") });
        }
        psi = &kicked[pick] / C64::new(weights[pick].sqrt(), 0.0);
    }
}
