//! Flows by contraction mapping: window planning from integral bounds on
//! the field and its dilatation, Picard iteration on coordinate curves,
//! window chaining, domain estimation, and verification residuals.

use crate::expr::FieldExpr;
use crate::field::VectorField;
use crate::geometry::metric_eigen_range;
use crate::jet::taylor_jet;
use crate::numeric::{cumulative_simpson, cumulative_trapezoid};
use crate::patch::{GeometryError, Patch};
use crate::taylor::DomainError;

#[derive(Debug, Clone, thiserror::Error)]
pub enum FlowError {
    #[error("no admissible window: alpha underflowed {floor:.3e} at t0 = {t0}")]
    NoAdmissibleWindow { t0: f64, floor: f64 },
    #[error("picard iteration is not contracting (residual ratio {ratio:.3})")]
    NonContraction { ratio: f64 },
    #[error("picard iteration exceeded {max_iter} iterations (residual {residual:.3e})")]
    MaxIterExceeded { max_iter: usize, residual: f64 },
    #[error("trajectory escaped the patch at t = {t_escape}")]
    EscapedPatch { t_escape: f64, point: Vec<f64> },
    #[error(transparent)]
    Field(#[from] DomainError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("{0}")]
    Invalid(String),
}

/// Tuning knobs for planning and iteration.
#[derive(Debug, Clone)]
pub struct FlowOptions {
    /// Target contraction factor in (0, 1).
    pub lambda_target: f64,
    /// Hard cap on the window length.
    pub alpha_max: f64,
    /// Coordinate-box radius r' around the start point; the invariant ball
    /// has radius r = r' / 2.
    pub ball_radius: f64,
    /// Nodes per Picard window (uniform grid).
    pub nodes: usize,
    /// Fixed-point tolerance in sup norm over the window.
    pub picard_tol: f64,
    pub max_iter: usize,
    /// Window halvings to retry before giving up on chaining.
    pub max_halvings: u32,
    pub min_alpha: f64,
    /// Time nodes used to tabulate the planning integrands.
    pub plan_time_nodes: usize,
    /// Simpson refinement passes after the trapezoid fixed point converges.
    pub correction_passes: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            lambda_target: 0.5,
            alpha_max: 0.25,
            ball_radius: 0.5,
            nodes: 64,
            picard_tol: 1e-10,
            max_iter: 80,
            max_halvings: 20,
            min_alpha: 1e-12,
            plan_time_nodes: 33,
            correction_passes: 2,
        }
    }
}

/// Window certificate: the data making the coordinate-curve iteration a
/// contraction on the ball.
#[derive(Debug, Clone)]
pub struct ContractionPlan {
    pub t0: f64,
    /// +1 forward, -1 backward.
    pub direction: f64,
    pub alpha: f64,
    pub ball_radius: f64,
    /// Invariant-ball radius, half the sampling radius.
    pub r: f64,
    pub lambda_target: f64,
    /// 2 C (integral of dilatation) actually achieved; < lambda_target.
    pub lambda_achieved: f64,
    /// Constant comparing sup-coordinate distance with metric distance.
    pub comparison_c: f64,
    /// Integral over the window of the sup of |X^j| over the ball.
    pub value_integral: f64,
    /// Integral over the window of the sup of the component dilatations.
    pub dil_integral: f64,
}

impl ContractionPlan {
    pub fn window_end(&self) -> f64 {
        self.t0 + self.direction * self.alpha
    }

    /// Worst-case iteration count to reach `tol` from the ball radius.
    pub fn iteration_bound(&self, tol: f64) -> usize {
        let lambda = self.lambda_achieved.clamp(1e-9, 1.0 - 1e-12);
        let steps = (tol / self.r).ln() / lambda.ln();
        steps.ceil().max(1.0) as usize + 2
    }
}

/// Samples of the planning integrands over one side of t0.
struct PlanTable {
    offsets: Vec<f64>,
    value_cumulative: Vec<f64>,
    dil_cumulative: Vec<f64>,
    comparison_c: f64,
}

fn plan_table<F: VectorField + ?Sized>(
    field: &F,
    patch: &Patch,
    t0: f64,
    x0: &[f64],
    direction: f64,
    opts: &FlowOptions,
) -> Result<PlanTable, FlowError> {
    let n = patch.dim();
    // ball samples: the coordinate box of radius r', clipped to the patch
    let steps = [-1.0, 0.0, 1.0];
    let mut samples = vec![vec![]];
    for d in 0..n {
        let mut next = Vec::new();
        for stem in &samples {
            for s in steps {
                let mut p: Vec<f64> = stem.clone();
                let b = patch.bounds()[d];
                p.push((x0[d] + s * opts.ball_radius).clamp(b.lo, b.hi));
                next.push(p);
            }
        }
        samples = next;
    }

    // metric comparison constant over the ball samples
    let (lmin, lmax) = metric_eigen_range(patch.metric(), &samples)?;
    let comparison_c = (lmax * n as f64).sqrt().max(1.0 / lmin.sqrt()).max(1.0);

    // inverse metrics for the dilatation norm
    let inv_metrics: Vec<nalgebra::DMatrix<f64>> = samples
        .iter()
        .map(|p| {
            patch
                .metric()
                .at(p)
                .map(|g| g.try_inverse().expect("SPD metric inverts"))
        })
        .collect::<Result<_, _>>()?;

    let m = opts.plan_time_nodes.max(3);
    let h = opts.alpha_max / (m as f64 - 1.0);
    let mut sup_value = Vec::with_capacity(m);
    let mut sup_dil = Vec::with_capacity(m);
    let mut offsets = Vec::with_capacity(m);
    for k in 0..m {
        let dt = k as f64 * h;
        let t = t0 + direction * dt;
        let mut v_sup: f64 = 0.0;
        let mut d_sup: f64 = 0.0;
        for (p, ginv) in samples.iter().zip(&inv_metrics) {
            let vals = field.eval_vec(t, p)?;
            for j in 0..n {
                v_sup = v_sup.max(vals[j].abs());
                let grad = field.component_gradient(t, p, j)?;
                let mut q = 0.0;
                for a in 0..n {
                    for b in 0..n {
                        q += ginv[(a, b)] * grad[a] * grad[b];
                    }
                }
                d_sup = d_sup.max(q.max(0.0).sqrt());
            }
        }
        offsets.push(dt);
        sup_value.push(v_sup);
        sup_dil.push(d_sup);
    }
    Ok(PlanTable {
        offsets,
        value_cumulative: cumulative_trapezoid(&sup_value, h),
        dil_cumulative: cumulative_trapezoid(&sup_dil, h),
        comparison_c,
    })
}

impl PlanTable {
    fn lookup(&self, cumulative: &[f64], alpha: f64) -> f64 {
        let m = self.offsets.len();
        if alpha >= self.offsets[m - 1] {
            return cumulative[m - 1];
        }
        let h = self.offsets[1] - self.offsets[0];
        let k = ((alpha / h).floor() as usize).min(m - 2);
        let frac = (alpha - self.offsets[k]) / h;
        cumulative[k] + frac * (cumulative[k + 1] - cumulative[k])
    }
}

/// Find the largest admissible window at (t0, x0): both integral bounds of
/// the contraction construction hold over the sampled ball, by bisection on
/// the window length.
pub fn contraction_setup<F: VectorField + ?Sized>(
    field: &F,
    patch: &Patch,
    t0: f64,
    x0: &[f64],
    direction: f64,
    opts: &FlowOptions,
) -> Result<ContractionPlan, FlowError> {
    assert!(direction == 1.0 || direction == -1.0);
    assert!(
        opts.lambda_target > 0.0 && opts.lambda_target < 1.0,
        "lambda target must lie in (0, 1)"
    );
    let table = plan_table(field, patch, t0, x0, direction, opts)?;
    let r = 0.5 * opts.ball_radius;
    let c = table.comparison_c;
    let admissible = |alpha: f64| -> bool {
        let iv = table.lookup(&table.value_cumulative, alpha);
        let id = table.lookup(&table.dil_cumulative, alpha);
        iv < 0.5 * r && id < opts.lambda_target / (2.0 * c)
    };
    if !admissible(opts.min_alpha) {
        return Err(FlowError::NoAdmissibleWindow {
            t0,
            floor: opts.min_alpha,
        });
    }
    let mut lo = opts.min_alpha;
    let mut hi = opts.alpha_max;
    if admissible(hi) {
        lo = hi;
    } else {
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if admissible(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    let alpha = lo;
    let value_integral = table.lookup(&table.value_cumulative, alpha);
    let dil_integral = table.lookup(&table.dil_cumulative, alpha);
    Ok(ContractionPlan {
        t0,
        direction,
        alpha,
        ball_radius: opts.ball_radius,
        r,
        lambda_target: opts.lambda_target,
        lambda_achieved: 2.0 * c * dil_integral,
        comparison_c: c,
        value_integral,
        dil_integral,
    })
}

/// Result of a single-window fixed-point solve.
#[derive(Debug, Clone)]
pub struct FlowResult {
    pub times: Vec<f64>,
    /// Curve samples, one point per time node; values[0] == x0 exactly.
    pub values: Vec<Vec<f64>>,
    pub iterations: usize,
    pub final_residual: f64,
    /// Successive sup-residual ratios observed during iteration.
    pub residual_ratios: Vec<f64>,
    pub plan: ContractionPlan,
}

impl FlowResult {
    pub fn endpoint(&self) -> &[f64] {
        self.values.last().unwrap()
    }
}

/// Picard iteration of the coordinate curves on one window: iterate
/// phi -> x0 + integral of X(s, phi(s)) with trapezoid cumulative sums until
/// the sup change is below tolerance, then refine with Simpson passes.
pub fn picard_solve<F: VectorField + ?Sized>(
    field: &F,
    plan: &ContractionPlan,
    x0: &[f64],
    opts: &FlowOptions,
) -> Result<FlowResult, FlowError> {
    let n = x0.len();
    let nodes = opts.nodes.max(3);
    let t_end = plan.window_end();
    let h = (t_end - plan.t0) / (nodes as f64 - 1.0);
    let times: Vec<f64> = (0..nodes).map(|i| plan.t0 + i as f64 * h).collect();
    let mut curve = vec![x0.to_vec(); nodes];
    let mut residual_ratios = Vec::new();
    let mut prev_residual: Option<f64> = None;
    let mut iterations = 0;
    let mut final_residual = f64::INFINITY;
    let noise_floor =
        1e3 * f64::EPSILON * (1.0 + x0.iter().map(|v| v.abs()).fold(0.0, f64::max));

    let mut vals = vec![vec![0.0; nodes]; n];
    let mut noncontracting_streak = 0u32;
    for iter in 1..=opts.max_iter {
        for (i, t) in times.iter().enumerate() {
            let v = field.eval_vec(*t, &curve[i])?;
            for (j, vj) in v.iter().enumerate() {
                vals[j][i] = *vj;
            }
        }
        let mut residual: f64 = 0.0;
        for (j, comp) in vals.iter().enumerate() {
            let cum = cumulative_trapezoid(comp, h);
            for i in 0..nodes {
                let new = x0[j] + cum[i];
                residual = residual.max((new - curve[i][j]).abs());
                curve[i][j] = new;
            }
        }
        iterations = iter;
        final_residual = residual;
        if let Some(prev) = prev_residual {
            if prev > noise_floor && residual > noise_floor {
                let ratio = residual / prev;
                residual_ratios.push(ratio);
                if ratio > 1.0 {
                    noncontracting_streak += 1;
                    if noncontracting_streak >= 2 {
                        return Err(FlowError::NonContraction { ratio });
                    }
                } else {
                    noncontracting_streak = 0;
                }
            }
        }
        prev_residual = Some(residual);
        if residual <= opts.picard_tol {
            break;
        }
        if iter == opts.max_iter {
            return Err(FlowError::MaxIterExceeded {
                max_iter: opts.max_iter,
                residual,
            });
        }
    }

    // deferred Simpson passes tighten the quadrature without touching the
    // contraction bookkeeping above
    for _ in 0..opts.correction_passes {
        for (i, t) in times.iter().enumerate() {
            let v = field.eval_vec(*t, &curve[i])?;
            for (j, vj) in v.iter().enumerate() {
                vals[j][i] = *vj;
            }
        }
        for (j, comp) in vals.iter().enumerate() {
            let cum = cumulative_simpson(comp, h);
            for i in 0..nodes {
                curve[i][j] = x0[j] + cum[i];
            }
        }
    }

    Ok(FlowResult {
        times,
        values: curve,
        iterations,
        final_residual,
        residual_ratios,
        plan: plan.clone(),
    })
}

/// Locate the first boundary crossing on a window curve, if any.
fn first_escape(patch: &Patch, times: &[f64], values: &[Vec<f64>]) -> Option<(f64, Vec<f64>)> {
    for i in 0..values.len() {
        if !patch.contains(&values[i]) {
            if i == 0 {
                return Some((times[0], values[0].clone()));
            }
            // linear inverse interpolation on the violating coordinate
            let (a, b) = (&values[i - 1], &values[i]);
            let mut frac: f64 = 1.0;
            for (d, bound) in patch.bounds().iter().enumerate() {
                for target in [bound.lo, bound.hi] {
                    let (va, vb) = (a[d], b[d]);
                    if (va - target).signum() != (vb - target).signum() && va != vb {
                        frac = frac.min((target - va) / (vb - va));
                    }
                }
            }
            let frac = frac.clamp(0.0, 1.0);
            let t = times[i - 1] + frac * (times[i] - times[i - 1]);
            let point: Vec<f64> = a
                .iter()
                .zip(b)
                .map(|(va, vb)| va + frac * (vb - va))
                .collect();
            return Some((t, point));
        }
    }
    None
}

/// Chain contraction windows from t0, capturing the state at the requested
/// times. Capture times must be sorted in the direction of travel and lie
/// on one side of t0.
pub fn flow_path<F: VectorField + ?Sized>(
    field: &F,
    patch: &Patch,
    t0: f64,
    x0: &[f64],
    captures: &[f64],
    opts: &FlowOptions,
) -> Result<Vec<Vec<f64>>, FlowError> {
    if !patch.contains(x0) {
        return Err(FlowError::Invalid(format!(
            "start point {x0:?} outside the patch"
        )));
    }
    if captures.is_empty() {
        return Ok(vec![]);
    }
    let direction = if captures[captures.len() - 1] >= t0 {
        1.0
    } else {
        -1.0
    };
    for w in captures.windows(2) {
        if (w[1] - w[0]) * direction < 0.0 {
            return Err(FlowError::Invalid(
                "capture times must be sorted in the direction of travel".into(),
            ));
        }
    }
    let mut out = Vec::with_capacity(captures.len());
    let mut t_cur = t0;
    let mut x_cur = x0.to_vec();
    for &target in captures {
        if (target - t0) * direction < 0.0 {
            return Err(FlowError::Invalid(
                "capture times must lie on one side of t0".into(),
            ));
        }
        while (target - t_cur) * direction > 0.0 {
            let remaining = (target - t_cur).abs();
            let mut plan = contraction_setup(field, patch, t_cur, &x_cur, direction, opts)?;
            plan.alpha = plan.alpha.min(remaining);
            // halve-and-retry on iteration failures
            let mut halvings = 0u32;
            let window = loop {
                match picard_solve(field, &plan, &x_cur, opts) {
                    Ok(w) => break w,
                    Err(FlowError::NonContraction { .. })
                    | Err(FlowError::MaxIterExceeded { .. })
                        if halvings < opts.max_halvings =>
                    {
                        plan.alpha *= 0.5;
                        halvings += 1;
                        if plan.alpha < opts.min_alpha {
                            return Err(FlowError::NoAdmissibleWindow {
                                t0: t_cur,
                                floor: opts.min_alpha,
                            });
                        }
                    }
                    Err(e) => return Err(e),
                }
            };
            if let Some((t_escape, point)) = first_escape(patch, &window.times, &window.values) {
                return Err(FlowError::EscapedPatch { t_escape, point });
            }
            t_cur = *window.times.last().unwrap();
            x_cur = window.endpoint().to_vec();
        }
        out.push(x_cur.clone());
    }
    Ok(out)
}

/// The flow value at a single final time.
pub fn flow_map<F: VectorField + ?Sized>(
    field: &F,
    patch: &Patch,
    t1: f64,
    t0: f64,
    x0: &[f64],
    opts: &FlowOptions,
) -> Result<Vec<f64>, FlowError> {
    if t1 == t0 {
        return Ok(x0.to_vec());
    }
    Ok(flow_path(field, patch, t0, x0, &[t1], opts)?.pop().unwrap())
}

/// One end of an existence-interval estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainEnd {
    pub time: f64,
    /// True when the trajectory left the patch there (open end).
    pub escaped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainEstimate {
    pub lower: DomainEnd,
    pub upper: DomainEnd,
}

/// Expand windows from t0 in both directions until escape or `t_max` away.
pub fn flow_domain<F: VectorField + ?Sized>(
    field: &F,
    patch: &Patch,
    t0: f64,
    x0: &[f64],
    t_max: f64,
    opts: &FlowOptions,
) -> Result<DomainEstimate, FlowError> {
    let mut ends = [DomainEnd {
        time: t0,
        escaped: false,
    }; 2];
    for (slot, direction) in [(0usize, -1.0), (1usize, 1.0)] {
        let target = t0 + direction * t_max;
        match flow_path(field, patch, t0, x0, &[target], opts) {
            Ok(_) => {
                ends[slot] = DomainEnd {
                    time: target,
                    escaped: false,
                };
            }
            Err(FlowError::EscapedPatch { t_escape, .. }) => {
                ends[slot] = DomainEnd {
                    time: t_escape,
                    escaped: true,
                };
            }
            Err(e) => return Err(e),
        }
    }
    Ok(DomainEstimate {
        lower: ends[0],
        upper: ends[1],
    })
}

/// Classical fourth-order one-step reference integrator, fixed step count.
/// Used only as an independent check of the contraction construction.
pub fn rk_oracle<F: VectorField + ?Sized>(
    field: &F,
    patch: &Patch,
    t1: f64,
    t0: f64,
    x0: &[f64],
    steps: usize,
) -> Result<Vec<f64>, FlowError> {
    let n = x0.len();
    let h = (t1 - t0) / steps as f64;
    let mut x = x0.to_vec();
    let mut t = t0;
    for _ in 0..steps {
        let k1 = field.eval_vec(t, &x)?;
        let mid1: Vec<f64> = x.iter().zip(&k1).map(|(a, k)| a + 0.5 * h * k).collect();
        let k2 = field.eval_vec(t + 0.5 * h, &mid1)?;
        let mid2: Vec<f64> = x.iter().zip(&k2).map(|(a, k)| a + 0.5 * h * k).collect();
        let k3 = field.eval_vec(t + 0.5 * h, &mid2)?;
        let end: Vec<f64> = x.iter().zip(&k3).map(|(a, k)| a + h * k).collect();
        let k4 = field.eval_vec(t + h, &end)?;
        for j in 0..n {
            x[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        t += h;
        if !patch.contains(&x) {
            return Err(FlowError::EscapedPatch {
                t_escape: t,
                point: x,
            });
        }
    }
    Ok(x)
}

/// Report from the weak-characterization check.
#[derive(Debug, Clone)]
pub struct ResidualReport {
    /// Max over functions and grid of the integral-identity defect.
    pub weak_max: f64,
    pub per_function: Vec<f64>,
    /// Indicator of the quadrature error in the defect computation.
    pub quad_tolerance: f64,
    pub flagged: bool,
}

/// Check the integral identity f(xi(t)) = f(xi(t0)) + integral of Xf along
/// a sampled curve, for scalar test functions of the coordinates.
pub fn weak_characterization_residual<F: VectorField + ?Sized>(
    field: &F,
    times: &[f64],
    values: &[Vec<f64>],
    test_functions: &[FieldExpr],
) -> Result<ResidualReport, FlowError> {
    assert_eq!(times.len(), values.len());
    if times.len() < 3 {
        return Err(FlowError::Invalid("curve too short for residuals".into()));
    }
    let n = values[0].len();
    let h = times[1] - times[0];
    let uniform = times
        .windows(2)
        .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.abs().max(1e-12));
    if !uniform {
        return Err(FlowError::Invalid(
            "residual checks need a uniform curve grid".into(),
        ));
    }
    let vars: Vec<usize> = (0..n).collect();
    let mut per_function = Vec::with_capacity(test_functions.len());
    let mut quad_tolerance: f64 = 1e-12;
    for f in test_functions {
        // Xf(s, xi(s)) = grad f . X sampled along the curve
        let mut integrand = Vec::with_capacity(times.len());
        let mut f_curve = Vec::with_capacity(times.len());
        for (t, x) in times.iter().zip(values) {
            let jet = taylor_jet(f, x, &vars, 1)?;
            let xv = field.eval_vec(*t, x)?;
            let mut lie = 0.0;
            let mut ix = vec![0u8; n];
            for d in 0..n {
                ix[d] = 1;
                lie += jet.derivative(&ix) * xv[d];
                ix[d] = 0;
            }
            integrand.push(lie);
            f_curve.push(jet.derivative(&vec![0u8; n]));
        }
        let simpson = cumulative_simpson(&integrand, h);
        let trapezoid = cumulative_trapezoid(&integrand, h);
        let mut worst: f64 = 0.0;
        for i in 0..times.len() {
            let defect = (f_curve[i] - f_curve[0] - simpson[i]).abs();
            worst = worst.max(defect);
            quad_tolerance = quad_tolerance.max((simpson[i] - trapezoid[i]).abs());
        }
        per_function.push(worst);
    }
    let weak_max = per_function.iter().cloned().fold(0.0, f64::max);
    let flagged = weak_max > (5.0 * quad_tolerance).max(5e-3);
    Ok(ResidualReport {
        weak_max,
        per_function,
        quad_tolerance,
        flagged,
    })
}

/// Group-law defect |Phi(t2, t1, Phi(t1, t0, x)) - Phi(t2, t0, x)|.
pub fn composition_residual<F: VectorField + ?Sized>(
    field: &F,
    patch: &Patch,
    t2: f64,
    t1: f64,
    t0: f64,
    x0: &[f64],
    opts: &FlowOptions,
) -> Result<f64, FlowError> {
    let mid = flow_map(field, patch, t1, t0, x0, opts)?;
    let via = flow_map(field, patch, t2, t1, &mid, opts)?;
    let direct = flow_map(field, patch, t2, t0, x0, opts)?;
    Ok(via
        .iter()
        .zip(&direct)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// Inverse defect |Phi(t0, t1, Phi(t1, t0, x)) - x|.
pub fn inverse_residual<F: VectorField + ?Sized>(
    field: &F,
    patch: &Patch,
    t1: f64,
    t0: f64,
    x0: &[f64],
    opts: &FlowOptions,
) -> Result<f64, FlowError> {
    let fwd = flow_map(field, patch, t1, t0, x0, opts)?;
    let back = flow_map(field, patch, t0, t1, &fwd, opts)?;
    Ok(back
        .iter()
        .zip(x0)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::TimeVaryingField;
    use crate::patch::Interval;
    use approx::assert_relative_eq;

    fn patch1(lo: f64, hi: f64) -> Patch {
        Patch::euclidean(vec![Interval::new(lo, hi)])
    }

    fn field1(src: &str) -> TimeVaryingField {
        TimeVaryingField::vector_field(&[src], 1, 0).unwrap()
    }

    #[test]
    fn zero_field_plan_saturates_alpha_max() {
        let patch = patch1(-2.0, 2.0);
        let f = field1("0");
        let opts = FlowOptions::default();
        let plan = contraction_setup(&f.bound(&[]), &patch, 0.0, &[0.0], 1.0, &opts).unwrap();
        assert_relative_eq!(plan.alpha, opts.alpha_max);
        assert_eq!(plan.lambda_achieved, 0.0);
    }

    #[test]
    fn unit_field_plan_respects_value_bound() {
        // X = d/dx with sampling radius r' = 0.2 (so r = 0.1): the window
        // satisfies integral |X| = alpha < r/2 = 0.05.
        let patch = patch1(-2.0, 2.0);
        let f = field1("1");
        let opts = FlowOptions {
            ball_radius: 0.2,
            alpha_max: 1.0,
            ..FlowOptions::default()
        };
        let plan = contraction_setup(&f.bound(&[]), &patch, 0.0, &[0.0], 1.0, &opts).unwrap();
        assert!(plan.alpha <= 0.05 + 1e-9, "alpha = {}", plan.alpha);
        assert!(plan.value_integral < 0.5 * plan.r);
        // doubling alpha must violate a bound (bisection maximality)
        assert!(2.0 * plan.alpha >= 0.5 * plan.r);
    }

    #[test]
    fn linear_field_plan_respects_dilatation_bound() {
        // X = x d/dx near x0 = 1 with lambda 0.5, flat metric in 1-D (C = 1):
        // the dilatation bound gives alpha <= lambda / (2 C) = 0.25.
        let patch = patch1(-4.0, 4.0);
        let f = field1("x1");
        let opts = FlowOptions {
            alpha_max: 1.0,
            ..FlowOptions::default()
        };
        let plan = contraction_setup(&f.bound(&[]), &patch, 0.0, &[1.0], 1.0, &opts).unwrap();
        assert_relative_eq!(plan.comparison_c, 1.0);
        assert!(plan.alpha <= 0.25 + 1e-9, "alpha = {}", plan.alpha);
        assert!(plan.dil_integral < plan.lambda_target / (2.0 * plan.comparison_c));
        assert!(plan.lambda_achieved < plan.lambda_target);
    }

    #[test]
    fn constant_curve_in_one_iteration() {
        let patch = patch1(-2.0, 2.0);
        let f = field1("0");
        let opts = FlowOptions::default();
        let plan = contraction_setup(&f.bound(&[]), &patch, 0.0, &[0.5], 1.0, &opts).unwrap();
        let r = picard_solve(&f.bound(&[]), &plan, &[0.5], &opts).unwrap();
        assert_eq!(r.iterations, 1);
        assert!(r.values.iter().all(|v| v[0] == 0.5));
    }

    #[test]
    fn unit_speed_curve_is_linear() {
        let patch = patch1(-2.0, 2.0);
        let f = field1("1");
        let opts = FlowOptions::default();
        let plan = contraction_setup(&f.bound(&[]), &patch, 0.0, &[0.0], 1.0, &opts).unwrap();
        let r = picard_solve(&f.bound(&[]), &plan, &[0.0], &opts).unwrap();
        for (t, v) in r.times.iter().zip(&r.values) {
            assert_relative_eq!(v[0], *t, epsilon = 1e-12);
        }
    }

    #[test]
    fn exponential_flow_value() {
        // xdot = x, x0 = 1: phi(0.1) = e^{0.1}
        let patch = patch1(-4.0, 4.0);
        let f = field1("x1");
        let opts = FlowOptions::default();
        let v = flow_map(&f.bound(&[]), &patch, 0.1, 0.0, &[1.0], &opts).unwrap();
        assert_relative_eq!(v[0], 0.1_f64.exp(), epsilon = 1e-6);
    }

    #[test]
    fn picard_start_point_is_exact() {
        let patch = patch1(-4.0, 4.0);
        let f = field1("sin(x1) + t");
        let opts = FlowOptions::default();
        let plan = contraction_setup(&f.bound(&[]), &patch, 0.3, &[0.7], 1.0, &opts).unwrap();
        let r = picard_solve(&f.bound(&[]), &plan, &[0.7], &opts).unwrap();
        assert_eq!(r.values[0][0], 0.7);
        assert!(r.final_residual <= opts.picard_tol);
        for ratio in &r.residual_ratios {
            assert!(*ratio <= plan.lambda_achieved + 0.05, "ratio {ratio}");
        }
        assert!(r.iterations <= plan.iteration_bound(opts.picard_tol));
    }

    #[test]
    fn rotation_by_quarter_turn() {
        let patch = Patch::euclidean(vec![Interval::new(-2.0, 2.0), Interval::new(-2.0, 2.0)]);
        let f = TimeVaryingField::vector_field(&["x2", "-x1"], 2, 0).unwrap();
        let opts = FlowOptions::default();
        let v = flow_map(
            &f.bound(&[]),
            &patch,
            std::f64::consts::FRAC_PI_2,
            0.0,
            &[1.0, 0.0],
            &opts,
        )
        .unwrap();
        assert_relative_eq!(v[0], 0.0, epsilon = 1e-6);
        assert_relative_eq!(v[1], -1.0, epsilon = 1e-6);
    }

    #[test]
    fn group_law_spot_check() {
        let patch = patch1(-4.0, 4.0);
        let f = field1("sin(x1) + t");
        let opts = FlowOptions::default();
        let r = composition_residual(&f.bound(&[]), &patch, 0.2, 0.1, 0.0, &[0.4], &opts).unwrap();
        assert!(r <= 1e-6, "composition residual {r}");
    }

    #[test]
    fn inverse_round_trip() {
        let patch = patch1(-4.0, 4.0);
        let f = field1("x1");
        let opts = FlowOptions::default();
        let r = inverse_residual(&f.bound(&[]), &patch, 0.5, 0.0, &[1.0], &opts).unwrap();
        assert!(r <= 1e-6, "inverse residual {r}");
    }

    #[test]
    fn trivial_final_time() {
        let patch = patch1(-1.0, 1.0);
        let f = field1("x1");
        let v = flow_map(
            &f.bound(&[]),
            &patch,
            0.3,
            0.3,
            &[0.5],
            &FlowOptions::default(),
        )
        .unwrap();
        assert_eq!(v, vec![0.5]);
    }

    #[test]
    fn blowup_domain_estimate() {
        // xdot = x^2 from x0 = 1 escapes x <= 100 at t = 0.99
        let patch = patch1(-100.0, 100.0);
        let f = field1("x1^2");
        let opts = FlowOptions::default();
        let d = flow_domain(&f.bound(&[]), &patch, 0.0, &[1.0], 2.0, &opts).unwrap();
        assert!(d.upper.escaped);
        assert_relative_eq!(d.upper.time, 0.99, epsilon = 1e-3);
        // backward the solution decays toward zero: no escape
        assert!(!d.lower.escaped);
        assert_relative_eq!(d.lower.time, -2.0);
    }

    #[test]
    fn zero_field_domain_is_full() {
        let patch = patch1(-1.0, 1.0);
        let f = field1("0");
        let d = flow_domain(
            &f.bound(&[]),
            &patch,
            0.5,
            &[0.0],
            3.0,
            &FlowOptions::default(),
        )
        .unwrap();
        assert_eq!(
            d.lower,
            DomainEnd {
                time: -2.5,
                escaped: false
            }
        );
        assert_eq!(
            d.upper,
            DomainEnd {
                time: 3.5,
                escaped: false
            }
        );
    }

    #[test]
    fn oracle_is_exact_on_unit_field() {
        let patch = patch1(-2.0, 2.0);
        let f = field1("1");
        let v = rk_oracle(&f.bound(&[]), &patch, 1.0, 0.0, &[0.0], 10).unwrap();
        assert_relative_eq!(v[0], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn oracle_fourth_order_convergence() {
        let patch = patch1(-4.0, 4.0);
        let f = field1("x1");
        let exact = std::f64::consts::E;
        let mut errors = Vec::new();
        for steps in [8, 16, 32, 64] {
            let v = rk_oracle(&f.bound(&[]), &patch, 1.0, 0.0, &[1.0], steps).unwrap();
            errors.push((v[0] - exact).abs());
        }
        // slope on log-log close to 4
        for w in errors.windows(2) {
            let ratio = w[0] / w[1];
            assert!(ratio > 11.0 && ratio < 22.0, "convergence ratio {ratio}");
        }
        let v = rk_oracle(&f.bound(&[]), &patch, 1.0, 0.0, &[1.0], 1000).unwrap();
        assert!((v[0] - exact).abs() <= 1e-9);
    }

    #[test]
    fn weak_characterization_flags_corruption() {
        let patch = patch1(-4.0, 4.0);
        let f = field1("x1");
        let opts = FlowOptions::default();
        let plan = contraction_setup(&f.bound(&[]), &patch, 0.0, &[1.0], 1.0, &opts).unwrap();
        let r = picard_solve(&f.bound(&[]), &plan, &[1.0], &opts).unwrap();
        let tests = vec![
            FieldExpr::parse("x1", &["x1"]).unwrap(),
            FieldExpr::parse("x1^2 - 2*x1", &["x1"]).unwrap(),
        ];
        let clean =
            weak_characterization_residual(&f.bound(&[]), &r.times, &r.values, &tests).unwrap();
        assert!(!clean.flagged, "clean weak residual {}", clean.weak_max);
        assert!(clean.weak_max <= 5.0 * clean.quad_tolerance.max(1e-9));

        let mut corrupted = r.values.clone();
        for v in corrupted.iter_mut().skip(1) {
            v[0] += 0.01;
        }
        let bad =
            weak_characterization_residual(&f.bound(&[]), &r.times, &corrupted, &tests).unwrap();
        assert!(bad.flagged);
        assert!(bad.weak_max > 5e-3);
    }

    #[test]
    fn initial_time_dependence_is_equi_lipschitz() {
        // t -> Phi(t1, t, x0): jumps on a refined grid stay within the
        // Lipschitz modulus reported on the coarse grid
        let patch = patch1(-4.0, 4.0);
        let f = field1("sin(x1) + t");
        let bound = f.bound(&[]);
        let opts = FlowOptions::default();
        let t1 = 0.5;
        let x0 = [0.4];
        let sample = |n: usize| -> Vec<f64> {
            (0..=n)
                .map(|i| {
                    let t = 0.5 * i as f64 / n as f64;
                    flow_map(&bound, &patch, t1, t, &x0, &opts).unwrap()[0]
                })
                .collect()
        };
        let coarse = sample(16);
        let dt_coarse = 0.5 / 16.0;
        let reported_l = coarse
            .windows(2)
            .map(|w| (w[1] - w[0]).abs() / dt_coarse)
            .fold(0.0, f64::max);
        let fine = sample(64);
        let dt_fine = 0.5 / 64.0;
        for w in fine.windows(2) {
            assert!(
                (w[1] - w[0]).abs() <= reported_l * dt_fine * 1.2 + 1e-12,
                "jump {} above L dt = {}",
                (w[1] - w[0]).abs(),
                reported_l * dt_fine
            );
        }
    }

    #[test]
    fn compact_image_stays_in_reported_box() {
        // the image of a grid of initial conditions over sampled (t, p)
        // stays inside the box reported from a coarser sampling
        let patch = patch1(-4.0, 4.0);
        let f = TimeVaryingField::vector_field(&["p1*sin(x1) + 0.2"], 1, 1).unwrap();
        let opts = FlowOptions::default();
        let image = |nx: usize, nt: usize| -> (f64, f64) {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for p in [0.9, 1.0, 1.1] {
                let bound = f.bound(&[p]);
                for i in 0..nx {
                    let x = -1.0 + 2.0 * i as f64 / (nx as f64 - 1.0);
                    for j in 1..=nt {
                        let t = 0.6 * j as f64 / nt as f64;
                        let v = flow_map(&bound, &patch, t, 0.0, &[x], &opts).unwrap()[0];
                        lo = lo.min(v);
                        hi = hi.max(v);
                    }
                }
            }
            (lo, hi)
        };
        let (lo_c, hi_c) = image(7, 3);
        let (lo_f, hi_f) = image(13, 6);
        let pad = 0.05 * (hi_c - lo_c);
        assert!(lo_f >= lo_c - pad && hi_f <= hi_c + pad);
        assert!(patch.contains(&[lo_f]) && patch.contains(&[hi_f]));
    }

    #[test]
    fn backward_window_solves() {
        let patch = patch1(-4.0, 4.0);
        let f = field1("x1");
        let opts = FlowOptions::default();
        let v = flow_map(&f.bound(&[]), &patch, -0.3, 0.0, &[1.0], &opts).unwrap();
        assert_relative_eq!(v[0], (-0.3_f64).exp(), epsilon = 1e-7);
    }

    #[test]
    fn doctored_plan_detects_noncontraction() {
        // a window far beyond the admissible length on a stiff-ish field
        let patch = patch1(-50.0, 50.0);
        let f = field1("3*x1");
        let opts = FlowOptions {
            max_iter: 200,
            ..FlowOptions::default()
        };
        let plan = ContractionPlan {
            t0: 0.0,
            direction: 1.0,
            alpha: 2.0,
            ball_radius: 0.5,
            r: 0.25,
            lambda_target: 0.5,
            lambda_achieved: 0.5,
            comparison_c: 1.0,
            value_integral: 0.0,
            dil_integral: 0.0,
        };
        let err = picard_solve(&f.bound(&[]), &plan, &[1.0], &opts).unwrap_err();
        assert!(matches!(err, FlowError::NonContraction { .. }), "{err}");
    }
}
