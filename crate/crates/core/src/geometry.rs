//! Geodesic distance, parallel transport, and the metric-comparison
//! constant between two Riemannian metrics on a compact grid.

use crate::patch::{
    max_eigenvalue, min_eigenvalue, CompactGrid, GeometryError, MetricField, Patch,
};
use nalgebra::DVector;

/// Tuning for the piecewise-geodesic length minimization.
#[derive(Debug, Clone)]
pub struct DistanceOptions {
    pub initial_points: usize,
    pub max_points: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for DistanceOptions {
    fn default() -> Self {
        Self {
            initial_points: 9,
            max_points: 33,
            max_iterations: 200,
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DistanceResult {
    pub length: f64,
    pub error_estimate: f64,
    pub path: Vec<Vec<f64>>,
}

/// Length of a straight segment under the metric, 3-point Gauss-Legendre.
fn segment_length(metric: &MetricField, a: &[f64], b: &[f64]) -> Result<f64, GeometryError> {
    const NODES: [f64; 3] = [0.112701665379258, 0.5, 0.887298334620742];
    const WEIGHTS: [f64; 3] = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];
    let v: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
    let mut total = 0.0;
    for (s, w) in NODES.iter().zip(WEIGHTS) {
        let x: Vec<f64> = a.iter().zip(&v).map(|(x, dv)| x + s * dv).collect();
        let g = metric.at(&x)?;
        let mut q = 0.0;
        for i in 0..v.len() {
            for j in 0..v.len() {
                q += g[(i, j)] * v[i] * v[j];
            }
        }
        total += w * q.max(0.0).sqrt();
    }
    Ok(total)
}

fn path_length(metric: &MetricField, path: &[Vec<f64>]) -> Result<f64, GeometryError> {
    let mut total = 0.0;
    for w in path.windows(2) {
        total += segment_length(metric, &w[0], &w[1])?;
    }
    Ok(total)
}

/// Gradient-descent relaxation of the interior path points with backtracking.
fn relax_path(
    metric: &MetricField,
    patch: &Patch,
    path: &mut Vec<Vec<f64>>,
    opts: &DistanceOptions,
) -> Result<f64, GeometryError> {
    let dim = patch.dim();
    let mut length = path_length(metric, path)?;
    let scale: f64 = patch
        .bounds()
        .iter()
        .map(|b| b.length())
        .fold(0.0, f64::max);
    let fd = 1e-6 * scale.max(1.0);
    for _ in 0..opts.max_iterations {
        // finite-difference gradient of the two adjacent segment lengths
        let mut grad = vec![vec![0.0; dim]; path.len()];
        for k in 1..path.len() - 1 {
            for d in 0..dim {
                let local = |path: &[Vec<f64>]| -> Result<f64, GeometryError> {
                    Ok(segment_length(metric, &path[k - 1], &path[k])?
                        + segment_length(metric, &path[k], &path[k + 1])?)
                };
                let orig = path[k][d];
                path[k][d] = orig + fd;
                patch.clamp(&mut path[k]);
                let up = local(path)?;
                path[k][d] = orig - fd;
                patch.clamp(&mut path[k]);
                let down = local(path)?;
                path[k][d] = orig;
                grad[k][d] = (up - down) / (2.0 * fd);
            }
        }
        let gnorm: f64 = grad
            .iter()
            .flat_map(|g| g.iter().map(|v| v * v))
            .sum::<f64>()
            .sqrt();
        if gnorm < 1e-12 {
            break;
        }
        // backtracking line search
        let mut step = 0.1 * scale / gnorm.max(1.0);
        let mut improved = false;
        for _ in 0..25 {
            let mut trial = path.clone();
            for k in 1..trial.len() - 1 {
                for d in 0..dim {
                    trial[k][d] -= step * grad[k][d];
                }
                patch.clamp(&mut trial[k]);
            }
            let trial_len = path_length(metric, &trial)?;
            if trial_len < length - 1e-15 {
                *path = trial;
                improved = trial_len < length - 0.1 * opts.tolerance;
                length = trial_len;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    Ok(length)
}

fn refine(path: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(path.len() * 2 - 1);
    for w in path.windows(2) {
        out.push(w[0].clone());
        out.push(
            w[0].iter()
                .zip(&w[1])
                .map(|(a, b)| 0.5 * (a + b))
                .collect(),
        );
    }
    out.push(path.last().unwrap().clone());
    out
}

/// Riemannian distance by path-space minimization over piecewise-linear
/// paths with refinement. Uses the patch metric unless `metric` overrides it.
pub fn geodesic_distance(
    patch: &Patch,
    metric: Option<&MetricField>,
    x1: &[f64],
    x2: &[f64],
    opts: &DistanceOptions,
) -> Result<DistanceResult, GeometryError> {
    if !patch.contains(x1) || !patch.contains(x2) {
        return Err(GeometryError::Invalid(
            "distance endpoints must lie inside the patch".into(),
        ));
    }
    let metric = metric.unwrap_or_else(|| patch.metric());
    let k = opts.initial_points.max(3);
    let mut path: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            let s = i as f64 / (k as f64 - 1.0);
            x1.iter().zip(x2).map(|(a, b)| a + s * (b - a)).collect()
        })
        .collect();
    let mut length = relax_path(metric, patch, &mut path, opts)?;
    let mut error = f64::INFINITY;
    while path.len() < opts.max_points {
        path = refine(&path);
        let refined = relax_path(metric, patch, &mut path, opts)?;
        error = (length - refined).abs();
        length = refined;
        if error <= opts.tolerance {
            return Ok(DistanceResult {
                length,
                error_estimate: error,
                path,
            });
        }
    }
    if error <= opts.tolerance {
        Ok(DistanceResult {
            length,
            error_estimate: error,
            path,
        })
    } else {
        Err(GeometryError::NoPath { last_change: error })
    }
}

/// Transport a vector along a sampled curve by integrating
/// v' = -Gamma(gamma)(gamma', v) with RK4 substeps and step-doubling error
/// control.
pub fn parallel_transport(
    patch: &Patch,
    curve: &[Vec<f64>],
    start: &[f64],
    tol: f64,
) -> Result<Vec<f64>, GeometryError> {
    let n = patch.dim();
    if curve.len() < 2 {
        return Ok(start.to_vec());
    }
    for p in curve {
        if !patch.contains(p) {
            return Err(GeometryError::Invalid(format!(
                "curve sample {p:?} lies outside the patch"
            )));
        }
    }
    let gamma_at = |x: &[f64]| patch.christoffels_at(x);
    let rhs = |x: &[f64], velocity: &[f64], v: &DVector<f64>| -> Result<DVector<f64>, GeometryError> {
        let gamma = gamma_at(x)?;
        let mut out = DVector::zeros(n);
        for k in 0..n {
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    acc += gamma[k * n * n + i * n + j] * velocity[i] * v[j];
                }
            }
            out[k] = -acc;
        }
        Ok(out)
    };

    let mut v = DVector::from_column_slice(start);
    for w in curve.windows(2) {
        let velocity: Vec<f64> = w[1].iter().zip(&w[0]).map(|(b, a)| b - a).collect();
        // substep count doubles until the step-doubling estimate passes
        let mut steps = 4usize;
        loop {
            let coarse = rk4_transport(&rhs, &w[0], &velocity, &v, steps)?;
            let fine = rk4_transport(&rhs, &w[0], &velocity, &v, steps * 2)?;
            let estimate = (&fine - &coarse).norm() / 15.0;
            if estimate <= tol {
                v = fine;
                break;
            }
            steps *= 2;
            if steps > 4096 {
                return Err(GeometryError::StepTooCoarse { estimate, tol });
            }
        }
    }
    Ok(v.as_slice().to_vec())
}

fn rk4_transport<F>(
    rhs: &F,
    seg_start: &[f64],
    velocity: &[f64],
    v0: &DVector<f64>,
    steps: usize,
) -> Result<DVector<f64>, GeometryError>
where
    F: Fn(&[f64], &[f64], &DVector<f64>) -> Result<DVector<f64>, GeometryError>,
{
    let h = 1.0 / steps as f64;
    let mut v = v0.clone();
    for s in 0..steps {
        let at = |frac: f64| -> Vec<f64> {
            let t = (s as f64 + frac) * h;
            seg_start
                .iter()
                .zip(velocity)
                .map(|(a, dv)| a + t * dv)
                .collect()
        };
        let k1 = rhs(&at(0.0), velocity, &v)?;
        let k2 = rhs(&at(0.5), velocity, &(&v + &k1 * (0.5 * h)))?;
        let k3 = rhs(&at(0.5), velocity, &(&v + &k2 * (0.5 * h)))?;
        let k4 = rhs(&at(1.0), velocity, &(&v + &k3 * h))?;
        v += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    Ok(v)
}

#[derive(Debug, Clone)]
pub struct EquivalenceResult {
    /// The certified constant c >= 1 with c^{-1} d1 <= d2 <= c d1.
    pub constant: f64,
    /// Worst observed distance ratio over the sampled pairs.
    pub worst_ratio: f64,
    pub pairs_tested: usize,
}

/// Two-sided comparison constant between the distance functions of two
/// metrics over a compact grid: the pointwise eigenvalue bound, validated on
/// sampled point pairs.
pub fn metric_equivalence_constant(
    patch: &Patch,
    g1: &MetricField,
    g2: &MetricField,
    grid: &CompactGrid,
    pair_budget: usize,
    opts: &DistanceOptions,
) -> Result<EquivalenceResult, GeometryError> {
    // c_x = max(sqrt(lambda_max), 1/sqrt(lambda_min)) of g2 relative to g1,
    // i.e. eigenvalues of g1^{-1} g2 via the Cholesky whitening.
    let mut c: f64 = 1.0;
    for p in grid.points() {
        let a = g1.at(p)?;
        let b = g2.at(p)?;
        let chol = a.clone().cholesky().ok_or(GeometryError::SingularMetric {
            point: p.clone(),
            min_eigenvalue: min_eigenvalue(&a),
        })?;
        let l_inv = chol
            .l()
            .try_inverse()
            .expect("triangular factor of an SPD matrix is invertible");
        let whitened = &l_inv * b * l_inv.transpose();
        let whitened = 0.5 * (&whitened + whitened.transpose());
        let lmax = max_eigenvalue(&whitened);
        let lmin = min_eigenvalue(&whitened);
        if lmin <= 0.0 {
            return Err(GeometryError::SingularMetric {
                point: p.clone(),
                min_eigenvalue: lmin,
            });
        }
        c = c.max(lmax.sqrt()).max(1.0 / lmin.sqrt());
    }

    // validate the two-sided inequality on sampled pairs
    let mut worst: f64 = 1.0;
    let mut tested = 0usize;
    let total = grid.len();
    if total >= 2 && pair_budget > 0 {
        let mut k = 0u64;
        while tested < pair_budget {
            k += 1;
            let i = (crate::numeric::halton(k, 2) * total as f64) as usize % total;
            let j = (crate::numeric::halton(k, 3) * total as f64) as usize % total;
            if i == j {
                continue;
            }
            let p = &grid.points()[i];
            let q = &grid.points()[j];
            let d1 = geodesic_distance(patch, Some(g1), p, q, opts)?.length;
            let d2 = geodesic_distance(patch, Some(g2), p, q, opts)?.length;
            if d1 > 0.0 && d2 > 0.0 {
                worst = worst.max(d2 / d1).max(d1 / d2);
            }
            tested += 1;
        }
    }
    Ok(EquivalenceResult {
        constant: c,
        worst_ratio: worst,
        pairs_tested: tested,
    })
}

/// Bounds on metric eigenvalues over a sample set; used for the coordinate
/// comparison constant in the contraction plan.
pub fn metric_eigen_range(
    metric: &MetricField,
    samples: &[Vec<f64>],
) -> Result<(f64, f64), GeometryError> {
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for p in samples {
        let g = metric.at(p)?;
        lo = lo.min(min_eigenvalue(&g));
        hi = hi.max(max_eigenvalue(&g));
    }
    Ok((lo, hi))
}

/// Quadratic-form distance sqrt(g(mid)(dx, dx)); the local surrogate for
/// d_G between nearby points, used by overlap residuals.
pub fn chord_distance(
    metric: &MetricField,
    a: &[f64],
    b: &[f64],
) -> Result<f64, GeometryError> {
    let mid: Vec<f64> = a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect();
    let g = metric.at(&mid)?;
    let v = DVector::from_iterator(a.len(), a.iter().zip(b).map(|(x, y)| y - x));
    let q = (&g * &v).dot(&v);
    Ok(q.max(0.0).sqrt())
}
