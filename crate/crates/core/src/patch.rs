//! Coordinate-patch model of the manifold: a single chart carrying a
//! Riemannian metric field and an affine connection.

use crate::expr::{FieldExpr, TaylorDomain};
use crate::taylor::{DomainError, TaylorCtx, TaylorPoly};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

pub const SPD_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, thiserror::Error)]
pub enum GeometryError {
    #[error("metric is numerically singular at {point:?} (min eigenvalue {min_eigenvalue:.3e})")]
    SingularMetric {
        point: Vec<f64>,
        min_eigenvalue: f64,
    },
    #[error("path minimization did not converge within budget (last change {last_change:.3e})")]
    NoPath { last_change: f64 },
    #[error("transport step too coarse: local error estimate {estimate:.3e} exceeds {tol:.3e}")]
    StepTooCoarse { estimate: f64, tol: f64 },
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("{0}")]
    Invalid(String),
}

/// Closed interval with a nonempty interior check left to the caller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(lo <= hi, "interval bounds out of order");
        Self { lo, hi }
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// Symmetric matrix-valued metric field g(x), entries as expressions in the
/// patch coordinates.
#[derive(Debug, Clone)]
pub struct MetricField {
    dim: usize,
    /// Row-major upper triangle would do, but a full grid keeps indexing dumb.
    entries: Vec<FieldExpr>,
}

impl MetricField {
    /// Entries in row-major order; symmetry is enforced structurally by
    /// mirroring the upper triangle.
    pub fn from_exprs(dim: usize, entries: Vec<FieldExpr>) -> Result<Self, GeometryError> {
        if entries.len() != dim * dim {
            return Err(GeometryError::Invalid(format!(
                "expected {} metric entries, got {}",
                dim * dim,
                entries.len()
            )));
        }
        Ok(Self { dim, entries })
    }

    /// The flat metric delta_ij.
    pub fn euclidean(dim: usize) -> Self {
        let symbols: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
        let symrefs: Vec<&str> = symbols.iter().map(|s| s.as_str()).collect();
        let entries = (0..dim * dim)
            .map(|k| {
                let (i, j) = (k / dim, k % dim);
                FieldExpr::parse(if i == j { "1" } else { "0" }, &symrefs).unwrap()
            })
            .collect();
        Self { dim, entries }
    }

    /// Constant metric from a matrix.
    pub fn constant(m: &DMatrix<f64>) -> Self {
        let dim = m.nrows();
        let symbols: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
        let symrefs: Vec<&str> = symbols.iter().map(|s| s.as_str()).collect();
        let entries = (0..dim * dim)
            .map(|k| {
                let (i, j) = (k / dim, k % dim);
                FieldExpr::parse(&format!("{:?}", m[(i, j)]), &symrefs).unwrap()
            })
            .collect();
        Self { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Evaluate g(x), symmetrized, and check positive definiteness.
    pub fn at(&self, x: &[f64]) -> Result<DMatrix<f64>, GeometryError> {
        let mut g = DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                g[(i, j)] = self.entries[i * self.dim + j].eval_f64(x)?;
            }
        }
        let g = 0.5 * (&g + g.transpose());
        let min_eig = min_eigenvalue(&g);
        if min_eig <= SPD_TOLERANCE {
            return Err(GeometryError::SingularMetric {
                point: x.to_vec(),
                min_eigenvalue: min_eig,
            });
        }
        Ok(g)
    }

    /// Metric entries as Taylor expansions around `x`.
    pub fn jets(
        &self,
        x: &[f64],
        ctx: &Arc<TaylorCtx>,
    ) -> Result<Vec<TaylorPoly>, GeometryError> {
        let domain = TaylorDomain::new(ctx.clone());
        let vars: Vec<TaylorPoly> = (0..self.dim)
            .map(|i| TaylorPoly::variable(ctx, i, x[i]))
            .collect();
        let mut out = Vec::with_capacity(self.dim * self.dim);
        for e in &self.entries {
            out.push(e.eval(&domain, &vars)?);
        }
        // symmetrize entrywise
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                let a = out[i * self.dim + j].clone();
                let b = out[j * self.dim + i].clone();
                let s = a.add(&b).scale(0.5);
                out[i * self.dim + j] = s.clone();
                out[j * self.dim + i] = s;
            }
        }
        Ok(out)
    }
}

pub fn min_eigenvalue(g: &DMatrix<f64>) -> f64 {
    g.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

pub fn max_eigenvalue(g: &DMatrix<f64>) -> f64 {
    g.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Connection coefficients: Levi-Civita of the patch metric by default, or a
/// user-supplied Christoffel expression field.
#[derive(Debug, Clone)]
pub enum ChristoffelField {
    LeviCivita,
    /// Explicit coefficients, indexed [k][i][j] row-major (k*dim*dim + i*dim + j).
    Explicit(Vec<FieldExpr>),
}

/// A coordinate box carrying a metric and connection; the single-chart
/// realization of the base manifold.
#[derive(Debug, Clone)]
pub struct Patch {
    dim: usize,
    bounds: Vec<Interval>,
    metric: MetricField,
    connection: ChristoffelField,
}

impl Patch {
    pub fn new(
        bounds: Vec<Interval>,
        metric: MetricField,
        connection: ChristoffelField,
    ) -> Result<Self, GeometryError> {
        let dim = bounds.len();
        if dim == 0 {
            return Err(GeometryError::Invalid("patch dimension must be positive".into()));
        }
        if metric.dim() != dim {
            return Err(GeometryError::Invalid(format!(
                "metric dimension {} does not match patch dimension {dim}",
                metric.dim()
            )));
        }
        if let ChristoffelField::Explicit(entries) = &connection {
            if entries.len() != dim * dim * dim {
                return Err(GeometryError::Invalid(format!(
                    "expected {} Christoffel entries, got {}",
                    dim * dim * dim,
                    entries.len()
                )));
            }
            // torsion-free default: lower-index symmetry at sampled points
            let samples: Vec<Vec<f64>> = {
                let mut pts = vec![bounds.iter().map(|b| b.midpoint()).collect::<Vec<f64>>()];
                pts.extend(crate::numeric::halton_points(
                    &bounds.iter().map(|b| [b.lo, b.hi]).collect::<Vec<_>>(),
                    8,
                ));
                pts
            };
            for p in &samples {
                for k in 0..dim {
                    for i in 0..dim {
                        for j in (i + 1)..dim {
                            let a = entries[k * dim * dim + i * dim + j].eval_f64(p)?;
                            let b = entries[k * dim * dim + j * dim + i].eval_f64(p)?;
                            if (a - b).abs() > 1e-9 * (1.0 + a.abs().max(b.abs())) {
                                return Err(GeometryError::Invalid(format!(
                                    "Christoffel field is not symmetric in its lower indices at {p:?}"
                                )));
                            }
                        }
                    }
                }
            }
        }
        Ok(Self {
            dim,
            bounds,
            metric,
            connection,
        })
    }

    /// Euclidean box with the flat metric and its Levi-Civita connection.
    pub fn euclidean(bounds: Vec<Interval>) -> Self {
        let dim = bounds.len();
        Self::new(bounds, MetricField::euclidean(dim), ChristoffelField::LeviCivita).unwrap()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bounds(&self) -> &[Interval] {
        &self.bounds
    }

    pub fn metric(&self) -> &MetricField {
        &self.metric
    }

    pub fn connection(&self) -> &ChristoffelField {
        &self.connection
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim && x.iter().zip(&self.bounds).all(|(v, b)| b.contains(*v))
    }

    /// Distance from `x` to the nearest boundary face, in coordinate units.
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.bounds)
            .map(|(v, b)| (v - b.lo).min(b.hi - v))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (v, b) in x.iter_mut().zip(&self.bounds) {
            *v = v.clamp(b.lo, b.hi);
        }
    }

    /// Christoffel coefficients as Taylor expansions around `x`, indexed
    /// [k][i][j]. For the Levi-Civita default these come from metric jets one
    /// order higher.
    pub fn christoffel_jets(
        &self,
        x: &[f64],
        ctx: &Arc<TaylorCtx>,
    ) -> Result<Vec<TaylorPoly>, GeometryError> {
        let n = self.dim;
        match &self.connection {
            ChristoffelField::Explicit(entries) => {
                let domain = TaylorDomain::new(ctx.clone());
                let vars: Vec<TaylorPoly> =
                    (0..n).map(|i| TaylorPoly::variable(ctx, i, x[i])).collect();
                entries
                    .iter()
                    .map(|e| e.eval(&domain, &vars).map_err(GeometryError::from))
                    .collect()
            }
            ChristoffelField::LeviCivita => {
                // Need metric derivatives one order above the requested
                // truncation, so expand in a larger context and restrict.
                let big = TaylorCtx::new(n, ctx.order() + 1);
                let g = self.metric.jets(x, &big)?;
                let ginv = poly_matrix_inverse(&g, n, &big)?;
                let mut out = Vec::with_capacity(n * n * n);
                for k in 0..n {
                    for i in 0..n {
                        for j in 0..n {
                            let mut acc = TaylorPoly::constant(&big, 0.0);
                            for l in 0..n {
                                let d_i = g[j * n + l].derivative(i);
                                let d_j = g[i * n + l].derivative(j);
                                let d_l = g[i * n + j].derivative(l);
                                let term = d_i.add(&d_j).sub(&d_l);
                                acc = acc.add(&ginv[k * n + l].mul(&term));
                            }
                            out.push(restrict(&acc.scale(0.5), ctx));
                        }
                    }
                }
                Ok(out)
            }
        }
    }

    /// Christoffel values at a point, indexed [k][i][j].
    pub fn christoffels_at(&self, x: &[f64]) -> Result<Vec<f64>, GeometryError> {
        let ctx = TaylorCtx::new(self.dim, 0);
        Ok(self
            .christoffel_jets(x, &ctx)?
            .iter()
            .map(|p| p.value())
            .collect())
    }
}

/// Restrict a Taylor value to a lower-order context over the same variables.
fn restrict(p: &TaylorPoly, ctx: &Arc<TaylorCtx>) -> TaylorPoly {
    let src = p.ctx().clone();
    let mut coeffs = vec![0.0; ctx.len()];
    for (pos, ix) in ctx.indices().iter().enumerate() {
        if let Some(spos) = src.position(ix) {
            coeffs[pos] = p.coeffs()[spos];
        }
    }
    TaylorPoly::from_coeffs(ctx, coeffs)
}

/// Invert a matrix of Taylor values by Gauss-Jordan; pivots are invertible
/// because the constant term is an SPD matrix.
pub fn poly_matrix_inverse(
    entries: &[TaylorPoly],
    n: usize,
    ctx: &Arc<TaylorCtx>,
) -> Result<Vec<TaylorPoly>, GeometryError> {
    let mut a: Vec<TaylorPoly> = entries.to_vec();
    let mut inv: Vec<TaylorPoly> = (0..n * n)
        .map(|k| TaylorPoly::constant(ctx, if k / n == k % n { 1.0 } else { 0.0 }))
        .collect();
    for col in 0..n {
        // partial pivot on constant terms
        let mut pivot = col;
        for row in (col + 1)..n {
            if a[row * n + col].value().abs() > a[pivot * n + col].value().abs() {
                pivot = row;
            }
        }
        if a[pivot * n + col].value().abs() < 1e-14 {
            return Err(GeometryError::SingularMetric {
                point: vec![],
                min_eigenvalue: 0.0,
            });
        }
        if pivot != col {
            for j in 0..n {
                a.swap(col * n + j, pivot * n + j);
                inv.swap(col * n + j, pivot * n + j);
            }
        }
        let pinv = a[col * n + col].recip()?;
        for j in 0..n {
            a[col * n + j] = a[col * n + j].mul(&pinv);
            inv[col * n + j] = inv[col * n + j].mul(&pinv);
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let factor = a[row * n + col].clone();
            for j in 0..n {
                let t = factor.mul(&a[col * n + j]);
                a[row * n + j] = a[row * n + j].sub(&t);
                let t = factor.mul(&inv[col * n + j]);
                inv[row * n + j] = inv[row * n + j].sub(&t);
            }
        }
    }
    Ok(inv)
}

/// A finite sample of a compact set, with the spacing recorded for error
/// reporting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompactGrid {
    points: Vec<Vec<f64>>,
    spacing: f64,
}

impl CompactGrid {
    pub fn new(patch: &Patch, points: Vec<Vec<f64>>, spacing: f64) -> Result<Self, GeometryError> {
        if points.is_empty() {
            return Err(GeometryError::Invalid("compact grid must be nonempty".into()));
        }
        for p in &points {
            if !patch.contains(p) {
                return Err(GeometryError::Invalid(format!(
                    "grid point {p:?} lies outside the patch bounds"
                )));
            }
        }
        Ok(Self { points, spacing })
    }

    /// Uniform grid over a sub-box of the patch, `counts[i]` nodes per axis.
    pub fn uniform(
        patch: &Patch,
        sub: &[Interval],
        counts: &[usize],
    ) -> Result<Self, GeometryError> {
        assert_eq!(sub.len(), patch.dim());
        assert_eq!(counts.len(), patch.dim());
        let mut spacing: f64 = 0.0;
        for (b, &c) in sub.iter().zip(counts) {
            if c == 0 {
                return Err(GeometryError::Invalid("grid axis with zero nodes".into()));
            }
            if c > 1 {
                spacing = spacing.max(b.length() / (c as f64 - 1.0));
            }
        }
        let mut points = vec![vec![]];
        for (b, &c) in sub.iter().zip(counts) {
            let axis: Vec<f64> = if c == 1 {
                vec![b.midpoint()]
            } else {
                (0..c)
                    .map(|i| {
                        if i == 0 {
                            b.lo
                        } else if i == c - 1 {
                            b.hi
                        } else {
                            b.lo + b.length() * i as f64 / (c as f64 - 1.0)
                        }
                    })
                    .collect()
            };
            points = points
                .into_iter()
                .flat_map(|stem: Vec<f64>| {
                    axis.iter().map(move |v| {
                        let mut p = stem.clone();
                        p.push(*v);
                        p
                    })
                })
                .collect();
        }
        Self::new(patch, points, spacing)
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn expr(src: &str, dim: usize) -> FieldExpr {
        let symbols: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
        let refs: Vec<&str> = symbols.iter().map(|s| s.as_str()).collect();
        FieldExpr::parse(src, &refs).unwrap()
    }

    #[test]
    fn euclidean_christoffels_vanish() {
        let patch = Patch::euclidean(vec![Interval::new(-1.0, 1.0), Interval::new(-1.0, 1.0)]);
        let gamma = patch.christoffels_at(&[0.3, -0.2]).unwrap();
        assert!(gamma.iter().all(|&v| v.abs() < 1e-14));
    }

    #[test]
    fn conformal_metric_christoffel() {
        // g = e^{2x} dx^2 on R: Gamma^x_xx = 1
        let metric = MetricField::from_exprs(1, vec![expr("exp(2*x1)", 1)]).unwrap();
        let patch = Patch::new(
            vec![Interval::new(-2.0, 2.0)],
            metric,
            ChristoffelField::LeviCivita,
        )
        .unwrap();
        let gamma = patch.christoffels_at(&[0.0]).unwrap();
        assert_relative_eq!(gamma[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn polar_metric_christoffels() {
        // g = dr^2 + r^2 dtheta^2 with (x1, x2) = (r, theta)
        let metric = MetricField::from_exprs(
            2,
            vec![expr("1", 2), expr("0", 2), expr("0", 2), expr("x1^2", 2)],
        )
        .unwrap();
        let patch = Patch::new(
            vec![Interval::new(0.5, 4.0), Interval::new(-3.2, 3.2)],
            metric,
            ChristoffelField::LeviCivita,
        )
        .unwrap();
        let n = 2;
        let gamma = patch.christoffels_at(&[2.0, 0.7]).unwrap();
        let at = |k: usize, i: usize, j: usize| gamma[k * n * n + i * n + j];
        assert_relative_eq!(at(0, 1, 1), -2.0, epsilon = 1e-12); // Gamma^r_{theta theta} = -r
        assert_relative_eq!(at(1, 0, 1), 0.5, epsilon = 1e-12); // Gamma^theta_{r theta} = 1/r
        assert_relative_eq!(at(1, 1, 0), 0.5, epsilon = 1e-12); // symmetric in lower indices
    }

    #[test]
    fn asymmetric_christoffels_rejected() {
        let syms = &["x1", "x2"];
        let mut entries: Vec<FieldExpr> = (0..8)
            .map(|_| FieldExpr::parse("0", syms).unwrap())
            .collect();
        // Gamma^1_{12} != Gamma^1_{21}
        entries[1] = FieldExpr::parse("1", syms).unwrap();
        let patch = Patch::new(
            vec![Interval::new(-1.0, 1.0), Interval::new(-1.0, 1.0)],
            MetricField::euclidean(2),
            ChristoffelField::Explicit(entries),
        );
        assert!(matches!(patch, Err(GeometryError::Invalid(_))));
    }

    #[test]
    fn singular_metric_is_rejected() {
        let metric = MetricField::from_exprs(1, vec![expr("x1", 1)]).unwrap();
        let patch = Patch::new(
            vec![Interval::new(-1.0, 1.0)],
            metric,
            ChristoffelField::LeviCivita,
        )
        .unwrap();
        assert!(matches!(
            patch.metric().at(&[-0.5]),
            Err(GeometryError::SingularMetric { .. })
        ));
    }

    #[test]
    fn grid_outside_bounds_rejected() {
        let patch = Patch::euclidean(vec![Interval::new(0.0, 1.0)]);
        assert!(CompactGrid::new(&patch, vec![vec![2.0]], 0.1).is_err());
    }
}
