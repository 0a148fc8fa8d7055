use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{build_channels, run_trajectory, sample_trajectory, ChannelSet, Trajectory};
use crate::davies::WeakCouplingModel;
use crate::error::{Error, Result};
use crate::lindblad::PropertyReport;
use crate::liouville::{Operator, C64};

pub const BOOTSTRAP_RESAMPLES: usize = 200;
/// Below this many samples the CLT comparison is inconclusive.
pub const CLT_MIN_SAMPLES: usize = 10_000;
/// Bootstrap resamples draw from streams above every trajectory stream.
const BOOTSTRAP_STREAM: u64 = 1 << 63;

/// Point estimate with bootstrap standard error and 95% percentile interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Estimate {
    /// |value − target| in units of the standard error; rounding-level
    /// gaps count as zero so that exact estimators pass.
    pub fn z_score(&self, target: f64) -> f64 {
        let gap = (self.value - target).abs();
        if gap <= 1e-12 * target.abs().max(1.0) {
            0.0
        } else {
            gap / self.std_error
        }
    }
}

/// Nonparametric bootstrap of a vector statistic of n samples. `stat`
/// receives the resampled indices (0..n for the point estimate).
pub fn bootstrap<F>(n: usize, seed: u64, stat: F) -> Vec<Estimate>
where
    F: Fn(&[usize]) -> Vec<f64> + Sync,
{
    let all: Vec<usize> = (0..n).collect();
    let point = stat(&all);
    let replicas: Vec<Vec<f64>> = (0..BOOTSTRAP_RESAMPLES as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(BOOTSTRAP_STREAM + r);
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            stat(&idx)
        })
        .collect();
    let b = replicas.len() as f64;
    (0..point.len())
        .map(|k| {
            let mut col: Vec<f64> = replicas.iter().map(|r| r[k]).collect();
            let mean = col.iter().sum::<f64>() / b;
            let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (b - 1.0);
            col.sort_by(f64::total_cmp);
            let at = |p: f64| col[((b - 1.0) * p).round() as usize];
            Estimate { value: point[k], std_error: var.sqrt(), ci_low: at(0.025), ci_high: at(0.975) }
        })
        .collect()
}

/// Entropy-rate samples ς of an ensemble of trajectories on [0, t].
#[derive(Clone, Debug, Serialize)]
pub struct EnsembleStats {
    pub horizon: f64,
    pub seed: u64,
    /// One ς vector per trajectory, in trajectory order.
    pub samples: Vec<Vec<f64>>,
    pub event_counts: Vec<usize>,
}

impl EnsembleStats {
    pub fn from_trajectories(trajectories: &[Trajectory], reservoirs: usize, seed: u64) -> Self {
        EnsembleStats {
            horizon: trajectories.first().map_or(0.0, |t| t.horizon),
            seed,
            samples: trajectories.iter().map(|t| t.entropy_rates(reservoirs)).collect(),
            event_counts: trajectories.iter().map(|t| t.events.len()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn reservoirs(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    /// ⟨ς_j⟩
    pub fn mean_rates(&self) -> Vec<Estimate> {
        let m = self.reservoirs();
        bootstrap(self.len(), self.seed, |idx| {
            let mut acc = vec![0.0; m];
            for &i in idx {
                acc.iter_mut().zip(&self.samples[i]).for_each(|(a, x)| *a += x);
            }
            acc.iter().map(|a| a / idx.len() as f64).collect()
        })
    }

    /// ⟨e^{−tα·ς}⟩ for each α.
    pub fn laplace(&self, alphas: &[Vec<f64>]) -> Vec<Estimate> {
        let t = self.horizon;
        let weights: Vec<Vec<f64>> = self
            .samples
            .iter()
            .map(|s| alphas.iter().map(|a| (-t * a.iter().zip(s).map(|(x, y)| x * y).sum::<f64>()).exp()).collect())
            .collect();
        bootstrap(self.len(), self.seed, |idx| {
            let mut acc = vec![0.0; alphas.len()];
            for &i in idx {
                acc.iter_mut().zip(&weights[i]).for_each(|(a, w)| *a += w);
            }
            acc.iter().map(|a| a / idx.len() as f64).collect()
        })
    }

    pub fn mean_events(&self) -> Estimate {
        bootstrap(self.len(), self.seed, |idx| {
            vec![idx.iter().map(|&i| self.event_counts[i] as f64).sum::<f64>() / idx.len() as f64]
        })[0]
    }

    fn scaled_covariance_of(&self, idx: &[usize]) -> DMatrix<f64> {
        let m = self.reservoirs();
        let n = idx.len() as f64;
        let mut mean = DVector::zeros(m);
        for &i in idx {
            mean += DVector::from_column_slice(&self.samples[i]);
        }
        mean /= n;
        let mut cov = DMatrix::zeros(m, m);
        for &i in idx {
            let c = DVector::from_column_slice(&self.samples[i]) - &mean;
            cov += &c * c.transpose();
        }
        cov * (self.horizon / (n - 1.0))
    }

    /// Sample covariance of √t(ς − ⟨ς⟩), row-major entries with bootstrap errors.
    pub fn scaled_covariance(&self) -> Vec<Estimate> {
        bootstrap(self.len(), self.seed, |idx| {
            let c = self.scaled_covariance_of(idx);
            c.transpose().as_slice().to_vec()
        })
    }

    /// Variance of √t v·(ς − ⟨ς⟩).
    pub fn directional_variance(&self, v: &[f64]) -> f64 {
        let all: Vec<usize> = (0..self.len()).collect();
        let c = self.scaled_covariance_of(&all);
        let v = DVector::from_column_slice(v);
        (v.transpose() * c * &v)[(0, 0)]
    }
}

/// Pure initial states drawn from the eigendecomposition of ρ.
struct InitialStates {
    cumulative: Vec<f64>,
    vectors: Vec<DVector<C64>>,
}

impl InitialStates {
    fn new(model: &WeakCouplingModel, rho: &Operator) -> Result<Self> {
        rho.check_dim(model.dim())?;
        rho.require_state(&model.tol)?;
        let eig = rho.hermitian_part().eigh();
        let mut cumulative = Vec::new();
        let mut vectors = Vec::new();
        let mut acc = 0.0;
        for (k, &p) in eig.values.iter().enumerate() {
            if p > 0.0 {
                acc += p;
                cumulative.push(acc);
                vectors.push(eig.vector(k));
            }
        }
        cumulative.iter_mut().for_each(|c| *c /= acc);
        Ok(InitialStates { cumulative, vectors })
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> &DVector<C64> {
        let u = rng.random::<f64>();
        let k = self.cumulative.iter().position(|&c| u < c).unwrap_or(self.vectors.len() - 1);
        &self.vectors[k]
    }
}

fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn check_request(t: f64, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one trajectory".into()));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("horizon must be positive, got {t}")));
    }
    Ok(())
}

/// N trajectories with their full event lists; trajectory i uses the
/// random stream (seed, i), so it matches sample i of `sample_ensemble`.
pub fn sample_trajectories(model: &WeakCouplingModel, rho: &Operator, t: f64, n: usize, seed: u64) -> Result<Vec<Trajectory>> {
    check_request(t, n)?;
    let set = build_channels(model)?;
    let init = InitialStates::new(model, rho)?;
    (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i);
            let psi = init.draw(&mut rng).clone();
            sample_trajectory(&set, &psi, t, &mut rng)
        })
        .collect()
}

fn sample_rates(set: &ChannelSet, init: &InitialStates, m: usize, t: f64, seed: u64, i: u64) -> Result<(Vec<f64>, usize)> {
    let mut rng = stream(seed, i);
    let psi = init.draw(&mut rng).clone();
    let mut sums = vec![0.0; m];
    let count = run_trajectory(set, &psi, t, &mut rng, |e| sums[e.reservoir] += e.quantum)?;
    Ok((sums.into_iter().map(|s| s / t).collect(), count))
}

pub fn sample_ensemble(model: &WeakCouplingModel, rho: &Operator, t: f64, n: usize, seed: u64) -> Result<EnsembleStats> {
    check_request(t, n)?;
    let set = build_channels(model)?;
    let init = InitialStates::new(model, rho)?;
    let m = model.num_reservoirs();
    let drawn: Vec<(Vec<f64>, usize)> = (0..n as u64)
        .into_par_iter()
        .map(|i| sample_rates(&set, &init, m, t, seed, i))
        .collect::<Result<_>>()?;
    let (samples, event_counts) = drawn.into_iter().unzip();
    Ok(EnsembleStats { horizon: t, seed, samples, event_counts })
}

/// t·Cov(ς) against D entrywise, passing when every entry is within 5
/// bootstrap standard errors.
pub fn empirical_clt_check(stats: &EnsembleStats, d: &DMatrix<f64>) -> PropertyReport {
    let name = "central limit covariance";
    if stats.len() < CLT_MIN_SAMPLES {
        return PropertyReport::new(
            name,
            false,
            f64::NAN,
            format!("inconclusive: {} samples, need {CLT_MIN_SAMPLES}", stats.len()),
        );
    }
    let m = stats.reservoirs();
    if d.nrows() != m || d.ncols() != m {
        return PropertyReport::new(name, false, f64::NAN, format!("covariance must be {m}x{m}"));
    }
    let cov = stats.scaled_covariance();
    let worst = cov
        .iter()
        .enumerate()
        .map(|(k, e)| e.z_score(d[(k / m, k % m)]))
        .fold(0.0, f64::max);
    let shown: Vec<String> = cov.iter().map(|e| format!("{}+-{}", e.value, e.std_error)).collect();
    PropertyReport::new(name, worst <= 5.0, worst, format!("t Cov = [{}] (residual in standard errors)", shown.join(", ")))
}

/// Columns trajectory_id, event_index, reservoir, quantum, time.
pub fn write_trajectories_csv<W: Write>(trajectories: &[Trajectory], mut out: W) -> std::io::Result<()> {
    writeln!(out, "trajectory_id,event_index,reservoir,quantum,time")?;
    for (i, tr) in trajectories.iter().enumerate() {
        for (k, e) in tr.events.iter().enumerate() {
            writeln!(out, "{i},{k},{},{},{}", e.reservoir, e.quantum, e.time)?;
        }
    }
    Ok(())
}
