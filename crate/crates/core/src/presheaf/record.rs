//! Sampled local flows on product grids: construction from fields,
//! interpolation, the local-flow axioms, and the flow-space seminorm.

use super::{Cube, FlowSeminormSpec, PresheafError};
use crate::field::VectorField;
use crate::flow::{flow_path, FlowOptions};
use crate::jet::taylor_jet;
use crate::numeric::{cumulative_simpson, lagrange_weights, stencil_start};
use crate::patch::{Interval, Patch};
use serde::{Deserialize, Serialize};

/// Requested grid resolution for a record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecordGridSpec {
    pub final_time_count: usize,
    pub initial_time_count: usize,
    pub space_counts: Vec<usize>,
}

impl RecordGridSpec {
    pub fn new(final_time_count: usize, initial_time_count: usize, space_counts: Vec<usize>) -> Self {
        Self {
            final_time_count,
            initial_time_count,
            space_counts,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RecordTolerances {
    /// Allowed defect in the sampled composition axiom.
    pub composition: f64,
    /// Tolerance the trajectories were integrated to.
    pub integration: f64,
}

impl Default for RecordTolerances {
    fn default() -> Self {
        Self {
            composition: 1e-4,
            integration: 1e-10,
        }
    }
}

/// A sampled flow Phi(t1, t0, x) on a cube, with provenance and tolerances.
///
/// The final-time nodes always include every initial-time node, so the
/// diagonal identity Phi(t0, t0, x) = x holds exactly at nodes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalFlowRecord {
    cube: Cube,
    t1_nodes: Vec<f64>,
    t0_nodes: Vec<f64>,
    x_axes: Vec<Vec<f64>>,
    /// Flattened samples, shape [t1][t0][x1]..[xn][dim].
    values: Vec<f64>,
    provenance: String,
    tolerances: RecordTolerances,
}

fn axis_nodes(b: Interval, count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![b.midpoint()];
    }
    (0..count)
        .map(|i| {
            // pin the endpoints so rounding never leaves the interval
            if i == 0 {
                b.lo
            } else if i == count - 1 {
                b.hi
            } else {
                b.lo + b.length() * i as f64 / (count as f64 - 1.0)
            }
        })
        .collect()
}

/// Final-time nodes: the uniform S' grid merged with the S grid so diagonal
/// nodes exist exactly.
fn merged_t1_nodes(cube: &Cube, spec: &RecordGridSpec) -> (Vec<f64>, Vec<f64>) {
    let t0_nodes = axis_nodes(cube.initial_times, spec.initial_time_count);
    let mut t1_nodes = t0_nodes.clone();
    let span = cube.final_times.length().max(1e-12);
    for v in axis_nodes(cube.final_times, spec.final_time_count) {
        if t1_nodes.iter().all(|&w| (w - v).abs() > 1e-12 * span) {
            t1_nodes.push(v);
        }
    }
    t1_nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    (t1_nodes, t0_nodes)
}

impl LocalFlowRecord {
    /// Integrate the field across the cube: one trajectory per (t0, x) node,
    /// captured at every final-time node.
    pub fn from_field<F: VectorField + ?Sized>(
        field: &F,
        patch: &Patch,
        cube: Cube,
        spec: &RecordGridSpec,
        opts: &FlowOptions,
        provenance: impl Into<String>,
    ) -> Result<Self, PresheafError> {
        let dim = cube.dim();
        assert_eq!(dim, patch.dim());
        let (t1_nodes, t0_nodes) = merged_t1_nodes(&cube, spec);
        let x_axes: Vec<Vec<f64>> = cube
            .space
            .iter()
            .zip(&spec.space_counts)
            .map(|(b, &c)| axis_nodes(*b, c))
            .collect();
        let x_points = cartesian(&x_axes);
        let mut values =
            vec![0.0; t1_nodes.len() * t0_nodes.len() * x_points.len() * dim];
        for (it0, &t0) in t0_nodes.iter().enumerate() {
            let backward: Vec<f64> = t1_nodes
                .iter()
                .cloned()
                .filter(|&t| t < t0)
                .rev()
                .collect();
            let forward: Vec<f64> = t1_nodes.iter().cloned().filter(|&t| t >= t0).collect();
            for (ix, x0) in x_points.iter().enumerate() {
                let mut per_t1 = vec![vec![]; t1_nodes.len()];
                if !backward.is_empty() {
                    let vals = flow_path(field, patch, t0, x0, &backward, opts)?;
                    for (&t, v) in backward.iter().zip(vals) {
                        let k = t1_nodes.iter().position(|&w| w == t).unwrap();
                        per_t1[k] = v;
                    }
                }
                if !forward.is_empty() {
                    let vals = flow_path(field, patch, t0, x0, &forward, opts)?;
                    for (&t, v) in forward.iter().zip(vals) {
                        let k = t1_nodes.iter().position(|&w| w == t).unwrap();
                        per_t1[k] = v;
                    }
                }
                for (it1, v) in per_t1.into_iter().enumerate() {
                    let base = flat_base(
                        it1,
                        it0,
                        ix,
                        t0_nodes.len(),
                        x_points.len(),
                        dim,
                    );
                    values[base..base + dim].copy_from_slice(&v);
                }
            }
        }
        let mut record = Self {
            cube,
            t1_nodes,
            t0_nodes,
            x_axes,
            values,
            provenance: provenance.into(),
            tolerances: RecordTolerances {
                integration: opts.picard_tol,
                ..RecordTolerances::default()
            },
        };
        // the composition axiom is only testable through interpolation, so
        // its band follows the grid's own interpolation estimate
        let band = record.interpolation_estimate(&record.cube.clone());
        record.tolerances.composition = (8.0 * band).max(1e-6);
        record.validate()?;
        Ok(record)
    }

    /// Wrap externally supplied samples; the local-flow axioms are checked
    /// against the given tolerances.
    pub fn from_samples(
        cube: Cube,
        t1_nodes: Vec<f64>,
        t0_nodes: Vec<f64>,
        x_axes: Vec<Vec<f64>>,
        values: Vec<f64>,
        provenance: impl Into<String>,
        tolerances: RecordTolerances,
    ) -> Result<Self, PresheafError> {
        let dim = cube.dim();
        let n_x: usize = x_axes.iter().map(|a| a.len()).product();
        if values.len() != t1_nodes.len() * t0_nodes.len() * n_x * dim {
            return Err(PresheafError::Invalid("record sample shape mismatch".into()));
        }
        for &t0 in &t0_nodes {
            if !t1_nodes.iter().any(|&t1| t1 == t0) {
                return Err(PresheafError::Invalid(
                    "final-time nodes must include every initial-time node".into(),
                ));
            }
        }
        let record = Self {
            cube,
            t1_nodes,
            t0_nodes,
            x_axes,
            values,
            provenance: provenance.into(),
            tolerances,
        };
        record.validate()?;
        Ok(record)
    }

    /// Local-flow axioms: exact identity on the diagonal, composition within
    /// the stated tolerance on sampled triples.
    fn validate(&self) -> Result<(), PresheafError> {
        let dim = self.cube.dim();
        let x_points = cartesian(&self.x_axes);
        for (it0, &t0) in self.t0_nodes.iter().enumerate() {
            let it1 = self.t1_nodes.iter().position(|&t| t == t0).unwrap();
            for (ix, x) in x_points.iter().enumerate() {
                let v = self.at_nodes(it1, it0, ix);
                if v.iter().zip(x).any(|(a, b)| a != b) {
                    return Err(PresheafError::Invalid(format!(
                        "diagonal identity violated at t0 = {t0}, x = {x:?}: {v:?}"
                    )));
                }
            }
        }
        // composition on a few interior triples
        let probe_t = |nodes: &[f64]| -> Vec<f64> {
            let picks = [0usize, nodes.len() / 2, nodes.len() - 1];
            picks.iter().map(|&i| nodes[i]).collect::<Vec<_>>()
        };
        let xs = probe_points(&self.x_axes);
        for &t0 in &probe_t(&self.t0_nodes) {
            for &t1 in &probe_t(&self.t0_nodes) {
                for &t2 in &probe_t(&self.t1_nodes) {
                    for x in &xs {
                        let mid = self.value(t1, t0, x)?;
                        if !self
                            .cube
                            .space
                            .iter()
                            .zip(&mid)
                            .all(|(b, v)| b.contains(*v))
                        {
                            continue; // left the sampled box; axiom not testable here
                        }
                        let via = self.value(t2, t1, &mid)?;
                        let direct = self.value(t2, t0, x)?;
                        let defect = via
                            .iter()
                            .zip(&direct)
                            .map(|(a, b)| (a - b).abs())
                            .fold(0.0, f64::max);
                        if defect > self.tolerances.composition {
                            return Err(PresheafError::Invalid(format!(
                                "composition axiom defect {defect:.3e} exceeds {:.3e} at (t2, t1, t0) = ({t2}, {t1}, {t0})",
                                self.tolerances.composition
                            )));
                        }
                        let _ = dim;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn cube(&self) -> &Cube {
        &self.cube
    }

    pub fn t1_nodes(&self) -> &[f64] {
        &self.t1_nodes
    }

    pub fn t0_nodes(&self) -> &[f64] {
        &self.t0_nodes
    }

    pub fn x_axes(&self) -> &[Vec<f64>] {
        &self.x_axes
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn tolerances(&self) -> RecordTolerances {
        self.tolerances
    }

    fn n_x(&self) -> usize {
        self.x_axes.iter().map(|a| a.len()).product()
    }

    pub(super) fn at_nodes(&self, it1: usize, it0: usize, ix: usize) -> &[f64] {
        let dim = self.cube.dim();
        let base = flat_base(it1, it0, ix, self.t0_nodes.len(), self.n_x(), dim);
        &self.values[base..base + dim]
    }

    fn x_flat_index(&self, per_axis: &[usize]) -> usize {
        let mut idx = 0;
        for (axis, &i) in self.x_axes.iter().zip(per_axis) {
            idx = idx * axis.len() + i;
        }
        idx
    }

    /// Multilinear interpolation on the record grid (the default query and
    /// gluing path).
    pub fn value(&self, t1: f64, t0: f64, x: &[f64]) -> Result<Vec<f64>, PresheafError> {
        if !self.cube.contains(t1, t0, x) {
            return Err(PresheafError::OutsideCover {
                t1,
                t0,
                x: x.to_vec(),
            });
        }
        Ok(self.interpolate(t1, t0, x, 2))
    }

    /// Cubic (4-point Lagrange) interpolation, for derivative-grade queries.
    pub fn value_cubic(&self, t1: f64, t0: f64, x: &[f64]) -> Result<Vec<f64>, PresheafError> {
        if !self.cube.contains(t1, t0, x) {
            return Err(PresheafError::OutsideCover {
                t1,
                t0,
                x: x.to_vec(),
            });
        }
        Ok(self.interpolate(t1, t0, x, 4))
    }

    /// Cubic interpolation without the containment check; spatial queries a
    /// little outside the box extrapolate from the edge stencils. Used by
    /// the inverse map whose preimages can overshoot the sampled box.
    pub(super) fn value_cubic_unchecked(&self, t1: f64, t0: f64, x: &[f64]) -> Vec<f64> {
        self.interpolate(t1, t0, x, 4)
    }

    fn interpolate(&self, t1: f64, t0: f64, x: &[f64], width: usize) -> Vec<f64> {
        let dim = self.cube.dim();
        let mut axes: Vec<&[f64]> = vec![&self.t1_nodes, &self.t0_nodes];
        axes.extend(self.x_axes.iter().map(|a| a.as_slice()));
        let mut coords = vec![t1, t0];
        coords.extend_from_slice(x);
        let mut starts = Vec::with_capacity(axes.len());
        let mut weights = Vec::with_capacity(axes.len());
        for (axis, &c) in axes.iter().zip(&coords) {
            let w = axis.len().min(width);
            let s = stencil_start(axis, c, w);
            starts.push(s);
            weights.push(lagrange_weights(&axis[s..s + w], c));
        }
        let mut out = vec![0.0; dim];
        let mut counters = vec![0usize; axes.len()];
        loop {
            let mut w = 1.0;
            for (d, &c) in counters.iter().enumerate() {
                w *= weights[d][c];
            }
            let it1 = starts[0] + counters[0];
            let it0 = starts[1] + counters[1];
            let per_axis: Vec<usize> = (2..axes.len()).map(|d| starts[d] + counters[d]).collect();
            let ix = self.x_flat_index(&per_axis);
            for (o, v) in out.iter_mut().zip(self.at_nodes(it1, it0, ix)) {
                *o += w * v;
            }
            let mut d = 0;
            loop {
                counters[d] += 1;
                if counters[d] < weights[d].len() {
                    break;
                }
                counters[d] = 0;
                d += 1;
                if d == axes.len() {
                    return out;
                }
            }
        }
    }

    /// Multilinear interpolation error estimate over a region, from second
    /// differences of the stored samples (grid Lipschitz data).
    pub fn interpolation_estimate(&self, region: &Cube) -> f64 {
        let mut est: f64 = 0.0;
        let dim = self.cube.dim();
        let x_counts: Vec<usize> = self.x_axes.iter().map(|a| a.len()).collect();
        // second differences along each axis at stored nodes inside region
        let in_region = |it1: usize, it0: usize, per_axis: &[usize]| -> bool {
            let t1 = self.t1_nodes[it1];
            let t0 = self.t0_nodes[it0];
            region.final_times.contains(t1)
                && region.initial_times.contains(t0)
                && per_axis
                    .iter()
                    .zip(&self.x_axes)
                    .zip(&region.space)
                    .all(|((&i, axis), b)| b.contains(axis[i]))
        };
        let mut per_axis = vec![0usize; x_counts.len()];
        loop {
            for it1 in 0..self.t1_nodes.len() {
                for it0 in 0..self.t0_nodes.len() {
                    if !in_region(it1, it0, &per_axis) {
                        continue;
                    }
                    let ix = self.x_flat_index(&per_axis);
                    let here = self.at_nodes(it1, it0, ix);
                    // t1-axis second difference
                    if it1 + 2 < self.t1_nodes.len() {
                        let a = self.at_nodes(it1 + 1, it0, ix);
                        let b = self.at_nodes(it1 + 2, it0, ix);
                        for d in 0..dim {
                            est = est.max((b[d] - 2.0 * a[d] + here[d]).abs() / 8.0);
                        }
                    }
                    // space axes second differences
                    for (axis_idx, &count) in x_counts.iter().enumerate() {
                        if per_axis[axis_idx] + 2 < count {
                            let mut p1 = per_axis.clone();
                            p1[axis_idx] += 1;
                            let mut p2 = per_axis.clone();
                            p2[axis_idx] += 2;
                            let a = self.at_nodes(it1, it0, self.x_flat_index(&p1));
                            let b = self.at_nodes(it1, it0, self.x_flat_index(&p2));
                            for d in 0..dim {
                                est = est.max((b[d] - 2.0 * a[d] + here[d]).abs() / 8.0);
                            }
                        }
                    }
                }
            }
            // odometer over space axes
            let mut d = 0;
            loop {
                if d == per_axis.len() {
                    return est;
                }
                per_axis[d] += 1;
                if per_axis[d] < x_counts[d] {
                    break;
                }
                per_axis[d] = 0;
                d += 1;
            }
        }
    }
}

pub(super) fn flat_base(
    it1: usize,
    it0: usize,
    ix: usize,
    n_t0: usize,
    n_x: usize,
    dim: usize,
) -> usize {
    ((it1 * n_t0 + it0) * n_x + ix) * dim
}

pub(super) fn cartesian(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = vec![vec![]];
    for axis in axes {
        out = out
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
    out
}

fn probe_points(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let picks: Vec<Vec<f64>> = axes
        .iter()
        .map(|a| {
            let idx = [0usize, a.len() / 2, a.len() - 1];
            let mut v: Vec<f64> = idx.iter().map(|&i| a[i]).collect();
            v.dedup();
            v
        })
        .collect();
    cartesian(&picks)
}

/// Shared grid nodes of two records inside a region, when the grids are
/// commensurate there; None otherwise.
pub(super) fn shared_nodes(
    a: &LocalFlowRecord,
    b: &LocalFlowRecord,
    region: &Cube,
) -> Option<Vec<(f64, f64, Vec<f64>)>> {
    let tol = 1e-9;
    let common = |xs: &[f64], ys: &[f64], lo: f64, hi: f64| -> Vec<f64> {
        xs.iter()
            .filter(|&&v| v >= lo - tol && v <= hi + tol)
            .filter(|&&v| ys.iter().any(|&w| (w - v).abs() <= tol))
            .cloned()
            .collect()
    };
    let t1 = common(
        a.t1_nodes(),
        b.t1_nodes(),
        region.final_times.lo,
        region.final_times.hi,
    );
    let t0 = common(
        a.t0_nodes(),
        b.t0_nodes(),
        region.initial_times.lo,
        region.initial_times.hi,
    );
    if t1.is_empty() || t0.is_empty() {
        return None;
    }
    let mut axes = Vec::new();
    for ((ax, bx), bound) in a.x_axes().iter().zip(b.x_axes()).zip(&region.space) {
        let shared = common(ax, bx, bound.lo, bound.hi);
        if shared.is_empty() {
            return None;
        }
        axes.push(shared);
    }
    let xs = cartesian(&axes);
    let mut out = Vec::new();
    for &tf in &t1 {
        for &ti in &t0 {
            for x in &xs {
                out.push((tf, ti, x.clone()));
            }
        }
    }
    Some(out)
}

/// Uniform probe grid over a cube, `per_axis` nodes per axis.
pub(super) fn probe_grid(region: &Cube, per_axis: usize) -> Vec<(f64, f64, Vec<f64>)> {
    let t1 = axis_nodes(region.final_times, per_axis);
    let t0 = axis_nodes(region.initial_times, per_axis);
    let axes: Vec<Vec<f64>> = region
        .space
        .iter()
        .map(|b| axis_nodes(*b, per_axis))
        .collect();
    let xs = cartesian(&axes);
    let mut out = Vec::new();
    for &tf in &t1 {
        for &ti in &t0 {
            for x in &xs {
                out.push((tf, ti, x.clone()));
            }
        }
    }
    out
}

/// Seminorm of a scalar function sampled on a uniform per-axis grid, with
/// finite-difference jets up to order 2.
fn sampled_scalar_seminorm(
    values: &[f64],
    axes: &[Vec<f64>],
    order: usize,
) -> Result<f64, PresheafError> {
    if order > 2 {
        return Err(PresheafError::Invalid(
            "flow seminorms support finite orders m <= 2 on sampled records".into(),
        ));
    }
    let counts: Vec<usize> = axes.iter().map(|a| a.len()).collect();
    let n: usize = counts.iter().product();
    assert_eq!(values.len(), n);
    let steps: Vec<f64> = axes
        .iter()
        .map(|a| if a.len() > 1 { a[1] - a[0] } else { 1.0 })
        .collect();
    let strides: Vec<usize> = {
        let mut s = vec![1usize; counts.len()];
        for d in (0..counts.len().saturating_sub(1)).rev() {
            s[d] = s[d + 1] * counts[d + 1];
        }
        s
    };
    let idx_of = |flat: usize, d: usize| (flat / strides[d]) % counts[d];
    let mut sup: f64 = 0.0;
    for flat in 0..n {
        let mut sq = values[flat] * values[flat];
        if order >= 1 {
            for d in 0..counts.len() {
                let i = idx_of(flat, d);
                let deriv = if counts[d] < 2 {
                    0.0
                } else if i == 0 {
                    (values[flat + strides[d]] - values[flat]) / steps[d]
                } else if i == counts[d] - 1 {
                    (values[flat] - values[flat - strides[d]]) / steps[d]
                } else {
                    (values[flat + strides[d]] - values[flat - strides[d]]) / (2.0 * steps[d])
                };
                sq += deriv * deriv;
            }
        }
        if order >= 2 {
            for d in 0..counts.len() {
                let i = idx_of(flat, d);
                if counts[d] < 3 || i == 0 || i == counts[d] - 1 {
                    continue;
                }
                let second = (values[flat + strides[d]] - 2.0 * values[flat]
                    + values[flat - strides[d]])
                    / (steps[d] * steps[d]);
                // 1/2! weight squared
                sq += 0.25 * second * second;
            }
        }
        sup = sup.max(sq.sqrt());
    }
    Ok(sup)
}

pub(super) fn flow_seminorm_impl(
    a: &LocalFlowRecord,
    b: &LocalFlowRecord,
    _patch: &Patch,
    spec: &FlowSeminormSpec<'_>,
) -> Result<f64, PresheafError> {
    let dim = a.cube().dim();
    let axes: Vec<Vec<f64>> = spec
        .space
        .iter()
        .zip(spec.space_counts)
        .map(|(bound, &c)| axis_nodes(*bound, c))
        .collect();
    let xs = cartesian(&axes);
    let vars: Vec<usize> = (0..dim).collect();
    // final-time evaluation nodes come from the shared record grid
    let t1_nodes: Vec<f64> = a
        .t1_nodes()
        .iter()
        .filter(|&&t| spec.final_times.contains(t))
        .filter(|&&t| b.t1_nodes().iter().any(|&w| (w - t).abs() <= 1e-9))
        .cloned()
        .collect();
    let t0_nodes: Vec<f64> = a
        .t0_nodes()
        .iter()
        .filter(|&&t| spec.initial_times.contains(t))
        .filter(|&&t| b.t0_nodes().iter().any(|&w| (w - t).abs() <= 1e-9))
        .cloned()
        .collect();
    if t1_nodes.len() < 3 || t0_nodes.is_empty() {
        return Err(PresheafError::Invalid(
            "flow seminorm needs at least 3 shared final-time nodes and one initial-time node"
                .into(),
        ));
    }
    let h = t1_nodes[1] - t1_nodes[0];
    let uniform = t1_nodes
        .windows(2)
        .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.abs().max(1e-12));
    if !uniform {
        return Err(PresheafError::GridIncompatible {
            estimate: f64::INFINITY,
            tol: 0.0,
        });
    }

    // difference of f . Phi on the (t1, t0, x) evaluation grid
    let f_of = |rec: &LocalFlowRecord, t1: f64, t0: f64, x: &[f64]| -> Result<f64, PresheafError> {
        let v = rec.value(t1, t0, x)?;
        let jet = taylor_jet(spec.function, &v, &vars, 0)
            .map_err(|e| PresheafError::Invalid(e.to_string()))?;
        Ok(jet.derivative(&vec![0u8; dim]))
    };
    let mut sup_part: f64 = 0.0;
    // diff[it1][it0][ix]
    let mut diff = vec![0.0; t1_nodes.len() * t0_nodes.len() * xs.len()];
    for (i1, &t1) in t1_nodes.iter().enumerate() {
        for (i0, &t0) in t0_nodes.iter().enumerate() {
            let mut slice = vec![0.0; xs.len()];
            for (k, x) in xs.iter().enumerate() {
                let d = f_of(a, t1, t0, x)? - f_of(b, t1, t0, x)?;
                slice[k] = d;
                diff[(i1 * t0_nodes.len() + i0) * xs.len() + k] = d;
            }
            sup_part = sup_part.max(sampled_scalar_seminorm(&slice, &axes, spec.order)?);
        }
    }

    // integral part: time derivative by central differences in t1
    let mut integrand = vec![0.0; t1_nodes.len()];
    for i1 in 0..t1_nodes.len() {
        let mut sup_t0: f64 = 0.0;
        for i0 in 0..t0_nodes.len() {
            let mut slice = vec![0.0; xs.len()];
            for k in 0..xs.len() {
                let at = |i: usize| diff[(i * t0_nodes.len() + i0) * xs.len() + k];
                slice[k] = if i1 == 0 {
                    (at(1) - at(0)) / h
                } else if i1 == t1_nodes.len() - 1 {
                    (at(i1) - at(i1 - 1)) / h
                } else {
                    (at(i1 + 1) - at(i1 - 1)) / (2.0 * h)
                };
            }
            sup_t0 = sup_t0.max(sampled_scalar_seminorm(&slice, &axes, spec.order)?);
        }
        integrand[i1] = sup_t0;
    }
    let integral = *cumulative_simpson(&integrand, h).last().unwrap();
    Ok(sup_part.max(integral))
}
