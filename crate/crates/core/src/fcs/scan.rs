use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use super::{cgf, cgf_gradient0, cgf_hessian0, cgf_point, cgf_with_gradient};
use crate::davies::WeakCouplingModel;
use crate::error::{Error, Result};

/// e(α) on a tensor grid, plus its derivatives at 0.
#[derive(Clone, Debug)]
pub struct CgfScan {
    /// Grid coordinates per reservoir.
    pub axes: Vec<Vec<f64>>,
    /// Grid points, last axis varying fastest.
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub gaps: Vec<f64>,
    /// ∇e(0) = −ς̄
    pub gradient0: Vec<f64>,
    /// Hessian of e at 0 (the CLT covariance).
    pub hessian0: DMatrix<f64>,
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| if k + 1 == n { hi } else { lo + (hi - lo) * k as f64 / (n - 1) as f64 }).collect()
}

/// All points of the tensor grid with the given axes, last axis fastest.
pub fn tensor_grid(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    axes.iter().fold(vec![Vec::new()], |acc, axis| {
        acc.iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&x| {
                    let mut p = prefix.clone();
                    p.push(x);
                    p
                })
            })
            .collect()
    })
}

pub fn cgf_scan(model: &WeakCouplingModel, lo: &[f64], hi: &[f64], resolution: usize) -> Result<CgfScan> {
    let m = model.num_reservoirs();
    if lo.len() != m || hi.len() != m {
        return Err(Error::DimensionMismatch { expected: m, found: lo.len().min(hi.len()) });
    }
    if resolution < 3 {
        return Err(Error::InvalidArgument("scan resolution must be at least 3".into()));
    }
    if lo.iter().zip(hi).any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
        return Err(Error::InvalidArgument("scan box needs finite lo < hi on every axis".into()));
    }
    let axes: Vec<Vec<f64>> = lo.iter().zip(hi).map(|(&a, &b)| linspace(a, b, resolution)).collect();
    let points = tensor_grid(&axes);
    let evaluated: Vec<(f64, f64)> = points
        .par_iter()
        .map(|a| cgf_point(model, a).map(|p| (p.value.re, p.gap)))
        .collect::<Result<_>>()?;
    let (values, gaps) = evaluated.into_iter().unzip();
    Ok(CgfScan {
        axes,
        points,
        values,
        gaps,
        gradient0: cgf_gradient0(model)?.perturbative,
        hessian0: cgf_hessian0(model)?.finite_difference,
    })
}

impl CgfScan {
    pub fn lower(&self) -> Vec<f64> {
        self.axes.iter().map(|a| a[0]).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.axes.iter().map(|a| a[a.len() - 1]).collect()
    }

    /// ς̄ = −∇e(0)
    pub fn mean_rates(&self) -> Vec<f64> {
        self.gradient0.iter().map(|g| -g).collect()
    }

    fn contains(&self, alpha: &[f64], slack: f64) -> bool {
        alpha.iter().zip(self.lower().iter().zip(self.upper())).all(|(&a, (&l, u))| a >= l - slack && a <= u + slack)
    }
}

/// Largest violation of convexity over all axis-parallel grid lines:
/// max(0, −min second difference).
pub fn convexity_residual(scan: &CgfScan) -> f64 {
    let shape: Vec<usize> = scan.axes.iter().map(Vec::len).collect();
    let m = shape.len();
    let stride = |axis: usize| shape[axis + 1..].iter().product::<usize>();
    let mut worst = 0.0_f64;
    for idx in 0..scan.values.len() {
        for axis in 0..m {
            let s = stride(axis);
            let pos = (idx / s) % shape[axis];
            if pos == 0 || pos + 1 == shape[axis] {
                continue;
            }
            let second = scan.values[idx - s] - 2.0 * scan.values[idx] + scan.values[idx + s];
            worst = worst.max(-second);
        }
    }
    worst
}

/// Max deviation of e along the segment [from, to] from its interpolant at
/// `degree + 1` Chebyshev nodes, sampled between the nodes.
pub fn chebyshev_smoothness(model: &WeakCouplingModel, from: &[f64], to: &[f64], degree: usize) -> Result<f64> {
    let n = degree + 1;
    let point = |s: f64| -> Vec<f64> {
        let u = 0.5 * (s + 1.0);
        from.iter().zip(to).map(|(a, b)| a + (b - a) * u).collect()
    };
    let nodes: Vec<f64> = (0..n).map(|k| (std::f64::consts::PI * (k as f64 + 0.5) / n as f64).cos()).collect();
    let samples: Vec<f64> = nodes.par_iter().map(|&s| cgf(model, &point(s))).collect::<Result<_>>()?;
    let coeffs: Vec<f64> = (0..n)
        .map(|j| {
            let c: f64 = (0..n)
                .map(|k| samples[k] * (std::f64::consts::PI * j as f64 * (k as f64 + 0.5) / n as f64).cos())
                .sum();
            c * 2.0 / n as f64
        })
        .collect();
    let interpolant = |s: f64| {
        let theta = s.clamp(-1.0, 1.0).acos();
        coeffs[0] / 2.0 + (1..n).map(|j| coeffs[j] * (j as f64 * theta).cos()).sum::<f64>()
    };
    let probes: Vec<f64> = (0..2 * n).map(|k| -1.0 + (2.0 * k as f64 + 1.0) / (2 * n) as f64).collect();
    let errors: Vec<f64> = probes
        .par_iter()
        .map(|&s| cgf(model, &point(s)).map(|e| (e - interpolant(s)).abs()))
        .collect::<Result<_>>()?;
    Ok(errors.into_iter().fold(0.0, f64::max))
}

/// I(ς) = −inf_α (α·ς + e(α)); `value` is +∞ when the infimum diverges.
#[derive(Clone, Debug, Serialize)]
pub struct RateEstimate {
    pub value: f64,
    pub argmin: Vec<f64>,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub details: String,
}

const NEWTON_ITERATIONS: usize = 100;
const NEWTON_TOL: f64 = 1e-11;
const HESSIAN_FD_STEP: f64 = 1e-4;
/// Eigenvalues of the Hessian below this fraction of the largest are
/// treated as flat directions.
const FLAT_DIRECTION: f64 = 1e-7;
const DIVERGENCE_SAMPLES: usize = 9;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Objective α·ς + e(α) and its gradient.
fn objective(model: &WeakCouplingModel, varsigma: &[f64], alpha: &[f64]) -> Result<(f64, Vec<f64>)> {
    let (e, grad, _) = cgf_with_gradient(model, alpha)?;
    Ok((dot(alpha, varsigma) + e, grad.iter().zip(varsigma).map(|(g, s)| g + s).collect()))
}

fn hessian(model: &WeakCouplingModel, alpha: &[f64]) -> Result<DMatrix<f64>> {
    let m = alpha.len();
    let mut h = DMatrix::zeros(m, m);
    for k in 0..m {
        let mut p = alpha.to_vec();
        let mut q = alpha.to_vec();
        p[k] += HESSIAN_FD_STEP;
        q[k] -= HESSIAN_FD_STEP;
        let gp = cgf_with_gradient(model, &p)?.1;
        let gq = cgf_with_gradient(model, &q)?.1;
        for j in 0..m {
            h[(j, k)] = (gp[j] - gq[j]) / (2.0 * HESSIAN_FD_STEP);
        }
    }
    Ok((&h + h.transpose()) * 0.5)
}

/// The part of the line α + s·dir inside the scan box, as an s-interval.
fn chord(scan: &CgfScan, alpha: &[f64], dir: &[f64]) -> Option<(f64, f64)> {
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for ((&a, &d), (l, u)) in alpha.iter().zip(dir).zip(scan.lower().into_iter().zip(scan.upper())) {
        if d.abs() < 1e-15 {
            if a < l || a > u {
                return None;
            }
            continue;
        }
        let (s1, s2) = ((l - a) / d, (u - a) / d);
        lo = lo.max(s1.min(s2));
        hi = hi.min(s1.max(s2));
    }
    (lo < hi).then_some((lo, hi))
}

/// Damped Newton on α·ς + e(α), started at the grid argmin, with flat
/// Hessian directions handled by a pseudo-inverse. A residual gradient in
/// the flat directions is tested for divergence along the chord of the
/// scan box through the Newton point.
pub fn rate_function(model: &WeakCouplingModel, scan: &CgfScan, varsigma: &[f64]) -> Result<RateEstimate> {
    let m = model.num_reservoirs();
    if varsigma.len() != m {
        return Err(Error::DimensionMismatch { expected: m, found: varsigma.len() });
    }
    let start = (0..scan.points.len())
        .map(|k| (k, dot(&scan.points[k], varsigma) + scan.values[k]))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(k, _)| scan.points[k].clone())
        .expect("scan is non-empty");
    let width = norm(&scan.upper().iter().zip(scan.lower()).map(|(u, l)| u - l).collect::<Vec<_>>());

    let mut alpha = start;
    let (mut f, mut g) = objective(model, varsigma, &alpha)?;
    let mut iterations = 0;
    let mut flat: Vec<DVector<f64>> = Vec::new();
    let mut range_converged = false;
    while iterations < NEWTON_ITERATIONS {
        iterations += 1;
        let eig = hessian(model, &alpha)?.symmetric_eigen();
        let top = eig.eigenvalues.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
        let gv = DVector::from_column_slice(&g);
        let mut step = DVector::zeros(m);
        let mut range_grad = 0.0;
        flat.clear();
        for i in 0..m {
            let v = eig.eigenvectors.column(i).into_owned();
            let lambda = eig.eigenvalues[i];
            let c = v.dot(&gv);
            if lambda > FLAT_DIRECTION * top.max(1e-300) {
                step -= &v * (c / lambda);
                range_grad += c * c;
            } else {
                flat.push(v);
            }
        }
        if range_grad.sqrt() <= NEWTON_TOL * norm(varsigma).max(1.0) {
            range_converged = true;
            break;
        }
        let slope: f64 = step.dot(&gv);
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-12 {
            let trial: Vec<f64> = alpha.iter().zip(step.iter()).map(|(a, s)| a + t * s).collect();
            if !scan.contains(&trial, 2.0 * width) {
                t *= 0.5;
                continue;
            }
            let (ft, gt) = objective(model, varsigma, &trial)?;
            if ft <= f + 1e-4 * t * slope || (ft < f && t < 1e-6) {
                alpha = trial;
                f = ft;
                g = gt;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let gradient_norm = norm(&g);

    if gradient_norm <= 1e-7 * norm(varsigma).max(1.0) {
        if !scan.contains(&alpha, 1e-9) {
            return Err(Error::ScanBoxTooSmall(format!(
                "minimizer {alpha:?} lies outside the scan box {:?}..{:?}",
                scan.lower(),
                scan.upper()
            )));
        }
        return Ok(RateEstimate {
            value: -f,
            argmin: alpha,
            gradient_norm,
            iterations,
            details: "interior minimum".into(),
        });
    }

    // Divergence test: along −g the objective must decrease across the
    // whole chord with slope bounded away from zero.
    let dir: Vec<f64> = g.iter().map(|x| -x / gradient_norm).collect();
    let not_found = |why: String| {
        Error::ScanBoxTooSmall(format!(
            "no minimizer in {:?}..{:?} for varsigma = {varsigma:?}: {why}",
            scan.lower(),
            scan.upper()
        ))
    };
    if !range_converged {
        return Err(not_found(format!("Newton stalled at {alpha:?} with |grad| = {gradient_norm:.3e}")));
    }
    let Some((s0, s1)) = chord(scan, &alpha, &dir) else {
        return Err(not_found(format!("Newton stopped at {alpha:?} with |grad| = {gradient_norm:.3e}")));
    };
    let mut previous = f64::INFINITY;
    let mut worst_slope = f64::NEG_INFINITY;
    for k in 0..DIVERGENCE_SAMPLES {
        let s = s0 + (s1 - s0) * k as f64 / (DIVERGENCE_SAMPLES - 1) as f64;
        let p: Vec<f64> = alpha.iter().zip(&dir).map(|(a, d)| a + s * d).collect();
        let (fp, gp) = objective(model, varsigma, &p)?;
        let directional = dot(&gp, &dir);
        worst_slope = worst_slope.max(directional);
        if fp >= previous || directional > -0.5 * gradient_norm {
            return Err(not_found(format!(
                "objective not monotone along the residual gradient (slope {directional:.3e} at {p:?})"
            )));
        }
        previous = fp;
    }
    Ok(RateEstimate {
        value: f64::INFINITY,
        argmin: alpha,
        gradient_norm,
        iterations,
        details: format!(
            "objective decreases linearly along {dir:?} across the scan box (slope <= {worst_slope:.3e}); {} flat direction(s)",
            flat.len()
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::fcs::entropy_production_rate;

    fn qubit_scan() -> (WeakCouplingModel, CgfScan) {
        let m = corpus::load("qubit2r").unwrap();
        let scan = cgf_scan(&m, &[-1.0, -1.0], &[2.0, 2.0], 7).unwrap();
        (m, scan)
    }

    #[test]
    fn grid_layout() {
        let g = tensor_grid(&[vec![0.0, 1.0], vec![5.0, 6.0, 7.0]]);
        assert_eq!(g.len(), 6);
        assert_eq!(g[1], vec![0.0, 6.0]);
        assert_eq!(g[3], vec![1.0, 5.0]);
        assert_eq!(linspace(-1.0, 2.0, 4), vec![-1.0, 0.0, 1.0, 2.0]);
    }

    #[test]
    fn scan_is_convex_and_normalized() {
        let (_, scan) = qubit_scan();
        let zero = scan.points.iter().position(|p| p.iter().all(|&x| x == 0.0)).unwrap();
        assert!(scan.values[zero].abs() < 1e-12);
        assert!(convexity_residual(&scan) <= 1e-9);
        assert!(scan.gaps.iter().all(|&g| g > 0.0));
    }

    #[test]
    fn concave_data_is_flagged() {
        let (_, mut scan) = qubit_scan();
        scan.values[24] += 0.5;
        assert!(convexity_residual(&scan) >= 0.4);
    }

    #[test]
    fn cgf_is_smooth_along_segments() {
        let m = corpus::load("qutrit_generic").unwrap();
        let err = chebyshev_smoothness(&m, &[-0.5, 0.0], &[0.5, 0.5], 8).unwrap();
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn rate_function_symmetry() {
        let (m, scan) = qubit_scan();
        let mean = scan.mean_rates();
        let at_mean = rate_function(&m, &scan, &mean).unwrap();
        assert!(at_mean.value.abs() < 1e-10, "{at_mean:?}");
        let mirrored: Vec<f64> = mean.iter().map(|x| -x).collect();
        let at_mirror = rate_function(&m, &scan, &mirrored).unwrap();
        let sigma = entropy_production_rate(&m).unwrap();
        assert!((at_mirror.value - sigma).abs() < 1e-9, "{at_mirror:?} vs {sigma}");
        assert!((at_mirror.value - at_mean.value - mean.iter().sum::<f64>()).abs() < 1e-9);
    }

    #[test]
    fn rate_function_is_infinite_off_the_energy_hyperplane() {
        let (m, scan) = qubit_scan();
        // β⁻¹·ς = 1 + 0.25 ≠ 0
        let r = rate_function(&m, &scan, &[1.0, 0.5]).unwrap();
        assert!(r.value.is_infinite(), "{r:?}");
        let r = rate_function(&m, &scan, &[0.1, -0.2]).unwrap();
        assert!(r.value.is_finite(), "{r:?}");
        assert!(r.value > 0.0);
    }

    #[test]
    fn far_rates_need_a_bigger_box() {
        let (m, scan) = qubit_scan();
        let small = cgf_scan(&m, &[-0.1, -0.1], &[0.1, 0.1], 3).unwrap();
        let mean = scan.mean_rates();
        let far: Vec<f64> = mean.iter().map(|x| -3.0 * x).collect();
        assert!(matches!(rate_function(&m, &small, &far), Err(Error::ScanBoxTooSmall(_))));
    }
}
