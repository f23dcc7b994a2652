//! Shared numerical utilities: quadrature, interpolation stencils, and
//! deterministic direction/point sampling.

use crate::taylor::DomainError;

/// Adaptive Simpson failed to reach the requested accuracy within budget.
#[derive(Debug, Clone, thiserror::Error)]
#[error("quadrature budget exceeded: estimated error {estimate:.3e} > {tol:.3e}")]
pub struct QuadratureBudgetExceeded {
    pub estimate: f64,
    pub tol: f64,
}

/// Adaptive Simpson on [a, b] with absolute tolerance `tol`.
pub fn adaptive_simpson<F>(
    mut f: F,
    a: f64,
    b: f64,
    tol: f64,
    max_depth: u32,
) -> Result<f64, QuadError>
where
    F: FnMut(f64) -> Result<f64, DomainError>,
{
    fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
        h / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F>(
        f: &mut F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> Result<f64, QuadError>
    where
        F: FnMut(f64) -> Result<f64, DomainError>,
    {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm).map_err(QuadError::Domain)?;
        let frm = f(rm).map_err(QuadError::Domain)?;
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let delta = left + right - whole;
        if delta.abs() <= 15.0 * tol {
            return Ok(left + right + delta / 15.0);
        }
        if depth == 0 {
            return Err(QuadError::Budget(QuadratureBudgetExceeded {
                estimate: delta.abs() / 15.0,
                tol,
            }));
        }
        let l = recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?;
        let r = recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?;
        Ok(l + r)
    }

    if a == b {
        return Ok(0.0);
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let fa = f(lo).map_err(QuadError::Domain)?;
    let m = 0.5 * (lo + hi);
    let fm = f(m).map_err(QuadError::Domain)?;
    let fb = f(hi).map_err(QuadError::Domain)?;
    let whole = simpson(fa, fm, fb, hi - lo);
    let v = recurse(&mut f, lo, hi, fa, fm, fb, whole, tol, max_depth)?;
    Ok(sign * v)
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum QuadError {
    #[error(transparent)]
    Budget(#[from] QuadratureBudgetExceeded),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// Cumulative integral of uniformly sampled values: `out[i]` approximates
/// the integral from node 0 to node i. Composite Simpson on interior pairs,
/// with a quadratic fit for the first half-panel.
pub fn cumulative_simpson(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    if n == 2 {
        out[1] = 0.5 * h * (values[0] + values[1]);
        return out;
    }
    for i in 1..n {
        if i == 1 {
            // integral over [0, h] of the parabola through the first 3 nodes
            out[1] = h / 12.0 * (5.0 * values[0] + 8.0 * values[1] - values[2]);
        } else {
            out[i] = out[i - 2]
                + h / 3.0 * (values[i - 2] + 4.0 * values[i - 1] + values[i]);
        }
    }
    out
}

/// Cumulative trapezoid of uniformly sampled values.
pub fn cumulative_trapezoid(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    let mut out = vec![0.0; n];
    for i in 1..n {
        out[i] = out[i - 1] + 0.5 * h * (values[i - 1] + values[i]);
    }
    out
}

/// Deterministic unit directions: signs in 1-D, equally spaced angles in
/// 2-D, and a Fibonacci sphere in 3-D and above (projected per coordinate
/// triple beyond that, which is adequate at desk scale).
pub fn unit_directions(dim: usize, count: usize) -> Vec<Vec<f64>> {
    match dim {
        0 => vec![],
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count)
            .map(|k| {
                let theta = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
                vec![theta.cos(), theta.sin()]
            })
            .collect(),
        _ => {
            let golden = (1.0 + 5.0_f64.sqrt()) / 2.0;
            (0..count)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / count as f64;
                    let r = (1.0 - z * z).sqrt();
                    let phi = 2.0 * std::f64::consts::PI * k as f64 / golden;
                    let mut v = vec![r * phi.cos(), r * phi.sin(), z];
                    v.resize(dim, 0.0);
                    // pad higher dims with a deterministic Halton twist
                    for (j, slot) in v.iter_mut().enumerate().skip(3) {
                        *slot = halton(k as u64 + 1, PRIMES[j % PRIMES.len()]) - 0.5;
                    }
                    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
                    v.iter_mut().for_each(|a| *a /= norm);
                    v
                })
                .collect()
        }
    }
}

const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

/// Halton low-discrepancy sequence in [0, 1).
pub fn halton(index: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let mut i = index;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Low-discrepancy points inside an axis-aligned box.
pub fn halton_points(bounds: &[[f64; 2]], count: usize) -> Vec<Vec<f64>> {
    (0..count)
        .map(|k| {
            bounds
                .iter()
                .enumerate()
                .map(|(j, b)| {
                    let u = halton(k as u64 + 1, PRIMES[j % PRIMES.len()]);
                    b[0] + u * (b[1] - b[0])
                })
                .collect()
        })
        .collect()
}

/// Index of the grid cell containing `x` in a sorted node list, clamped so a
/// full stencil of `width` nodes fits.
pub fn stencil_start(nodes: &[f64], x: f64, width: usize) -> usize {
    debug_assert!(nodes.len() >= width);
    let mut k = match nodes.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
        Ok(i) => i,
        Err(i) => i.saturating_sub(1),
    };
    // center the stencil on the containing cell
    k = k.saturating_sub((width - 1) / 2);
    k.min(nodes.len() - width)
}

/// Lagrange interpolation weights for nodes `xs` at point `x`.
pub fn lagrange_weights(xs: &[f64], x: f64) -> Vec<f64> {
    let n = xs.len();
    let mut w = vec![1.0; n];
    for (i, wi) in w.iter_mut().enumerate() {
        for j in 0..n {
            if i != j {
                *wi *= (x - xs[j]) / (xs[i] - xs[j]);
            }
        }
    }
    w
}

/// Derivative of the Lagrange interpolant at node index `at` of `xs`.
pub fn lagrange_derivative_weights_at_node(xs: &[f64], at: usize) -> Vec<f64> {
    let n = xs.len();
    let mut w = vec![0.0; n];
    for (j, wj) in w.iter_mut().enumerate() {
        if j == at {
            *wj = (0..n)
                .filter(|&k| k != at)
                .map(|k| 1.0 / (xs[at] - xs[k]))
                .sum();
        } else {
            let mut prod = 1.0 / (xs[j] - xs[at]);
            for k in 0..n {
                if k != j && k != at {
                    prod *= (xs[at] - xs[k]) / (xs[j] - xs[k]);
                }
            }
            *wj = prod;
        }
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn simpson_integrates_kinked_function() {
        // |t - 1/2| over [0,1] integrates to 1/4
        let v = adaptive_simpson(|t: f64| Ok((t - 0.5).abs()), 0.0, 1.0, 1e-10, 40).unwrap();
        assert_relative_eq!(v, 0.25, epsilon = 1e-9);
    }

    #[test]
    fn exhausted_depth_reports_budget() {
        let r = adaptive_simpson(|t: f64| Ok((20.0 * t).sin().abs()), 0.0, 1.0, 1e-300, 2);
        assert!(matches!(r, Err(QuadError::Budget(_))));
    }

    #[test]
    fn cumulative_simpson_is_fourth_order() {
        let n = 65;
        let h = 1.0 / (n as f64 - 1.0);
        let values: Vec<f64> = (0..n).map(|i| (i as f64 * h).exp()).collect();
        let cum = cumulative_simpson(&values, h);
        let exact = std::f64::consts::E - 1.0;
        assert_relative_eq!(cum[n - 1], exact, epsilon = 1e-9);
    }

    #[test]
    fn directions_are_unit() {
        for dim in 1..=3 {
            for v in unit_directions(dim, 16) {
                let norm: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
                assert_relative_eq!(norm, 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn lagrange_reconstructs_cubics() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let f = |x: f64| 2.0 * x * x * x - x + 0.5;
        let w = lagrange_weights(&xs, 1.37);
        let v: f64 = xs.iter().zip(&w).map(|(x, w)| f(*x) * w).sum();
        assert_relative_eq!(v, f(1.37), epsilon = 1e-12);
        let dw = lagrange_derivative_weights_at_node(&xs, 2);
        let dv: f64 = xs.iter().zip(&dw).map(|(x, w)| f(*x) * w).sum();
        assert_relative_eq!(dv, 6.0 * 4.0 - 1.0, epsilon = 1e-12);
    }
}
