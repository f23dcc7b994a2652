//! The exponential map from field families to flow presheaf elements, and
//! its inverse reconstructing a field from a sampled flow.

use super::record::{LocalFlowRecord, RecordGridSpec};
use super::{glue, Cube, PresheafElement, PresheafError};
use crate::field::{SampledField, VectorField};
use crate::flow::{flow_path, FlowError, FlowOptions};
use crate::patch::Patch;

/// Fields assigned per cover cube: the field-presheaf side of the map.
pub struct FieldFamily<'a> {
    pub cover: Vec<Cube>,
    pub fields: Vec<&'a dyn VectorField>,
}

impl<'a> FieldFamily<'a> {
    pub fn new(cover: Vec<Cube>, fields: Vec<&'a dyn VectorField>) -> Self {
        assert_eq!(cover.len(), fields.len(), "one field per cube");
        Self { cover, fields }
    }
}

/// Componentwise exponential: verify each cube lies in its field's flow
/// domain, integrate a record per cube, and glue. Inconsistent families
/// surface as overlap violations.
pub fn exp_map(
    family: &FieldFamily<'_>,
    patch: &Patch,
    spec: &RecordGridSpec,
    opts: &FlowOptions,
    glue_tolerance: f64,
) -> Result<PresheafElement, PresheafError> {
    let mut records = Vec::with_capacity(family.cover.len());
    for (index, (cube, field)) in family.cover.iter().zip(&family.fields).enumerate() {
        // domain membership: coarse corner/center probes must reach both
        // ends of the final-time interval without escaping
        let probes = domain_probes(cube);
        for (t0, x) in &probes {
            for target in [cube.final_times.lo, cube.final_times.hi] {
                if (target - t0).abs() == 0.0 {
                    continue;
                }
                match flow_path(*field, patch, *t0, x, &[target], opts) {
                    Ok(_) => {}
                    Err(FlowError::EscapedPatch { t_escape, point }) => {
                        return Err(PresheafError::DomainViolation {
                            cube_index: index,
                            t_escape,
                            point,
                        });
                    }
                    Err(e) => return Err(e.into()),
                }
            }
        }
        let record = LocalFlowRecord::from_field(
            *field,
            patch,
            cube.clone(),
            spec,
            opts,
            format!("exp:{index}"),
        )
        .map_err(|e| match e {
            PresheafError::Flow(FlowError::EscapedPatch { t_escape, point }) => {
                PresheafError::DomainViolation {
                    cube_index: index,
                    t_escape,
                    point,
                }
            }
            other => other,
        })?;
        records.push(record);
    }
    glue(records, patch, glue_tolerance)
}

fn domain_probes(cube: &Cube) -> Vec<(f64, Vec<f64>)> {
    let t0s = [
        cube.initial_times.lo,
        cube.initial_times.midpoint(),
        cube.initial_times.hi,
    ];
    let mut xs = vec![vec![]];
    for b in &cube.space {
        let mut next = Vec::new();
        for stem in &xs {
            for v in [b.lo, b.midpoint(), b.hi] {
                let mut p: Vec<f64> = stem.clone();
                p.push(v);
                next.push(p);
            }
        }
        xs = next;
    }
    let mut out = Vec::new();
    for &t0 in &t0s {
        for x in &xs {
            out.push((t0, x.clone()));
        }
    }
    out
}

/// Reconstruct the generating field from a sampled flow: central difference
/// in the final time at step `h`, composed with the reverse flow (a Newton
/// inversion of the record in x). Returns samples on the record grid.
///
/// `round_trip_tol` is a floor for the invertibility precheck; the working
/// threshold also covers the grid's own interpolation band, since the
/// reverse-flow round trip runs through the record interpolant.
pub fn exp_inverse(
    record: &LocalFlowRecord,
    patch: &Patch,
    h: f64,
    round_trip_tol: f64,
) -> Result<SampledField, PresheafError> {
    let dim = record.cube().dim();
    let _ = patch;

    // invertibility precheck: reverse-flow round trips at node pairs
    let band = record.interpolation_estimate(record.cube());
    let threshold = round_trip_tol.max(12.0 * band);
    let t0s = record.t0_nodes().to_vec();
    for &ta in &t0s {
        for &tb in &t0s {
            if ta == tb {
                continue;
            }
            for x in probe_x(record) {
                let fwd = record.value(tb, ta, &x)?;
                if !record
                    .cube()
                    .space
                    .iter()
                    .zip(&fwd)
                    .all(|(b, v)| b.contains(*v))
                {
                    continue;
                }
                let back = record.value(ta, tb, &fwd)?;
                let residual = back
                    .iter()
                    .zip(&x)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                if residual > threshold {
                    return Err(PresheafError::NotInvertible {
                        t1: tb,
                        t0: ta,
                        residual,
                    });
                }
            }
        }
    }

    let t_nodes = record.t1_nodes().to_vec();
    let x_points = super::record::cartesian(record.x_axes());
    let t_lo = t_nodes[0];
    let t_hi = *t_nodes.last().unwrap();
    let mut values = Vec::with_capacity(t_nodes.len() * x_points.len() * dim);
    for &t in &t_nodes {
        // anchor the derivative at the nearest initial-time node
        let t0_ref = *t0s
            .iter()
            .min_by(|a, b| {
                (*a - t).abs().partial_cmp(&(*b - t).abs()).unwrap()
            })
            .unwrap();
        for x in &x_points {
            let y = if t == t0_ref {
                x.clone()
            } else {
                invert_in_x(record, t, t0_ref, x)?
            };
            let t_plus = (t + h).min(t_hi);
            let t_minus = (t - h).max(t_lo);
            let up = record.value_cubic_unchecked(t_plus, t0_ref, &y);
            let down = record.value_cubic_unchecked(t_minus, t0_ref, &y);
            for d in 0..dim {
                values.push((up[d] - down[d]) / (t_plus - t_minus));
            }
        }
    }
    Ok(SampledField::new(
        t_nodes,
        record.x_axes().to_vec(),
        values,
    ))
}

fn probe_x(record: &LocalFlowRecord) -> Vec<Vec<f64>> {
    let axes: Vec<Vec<f64>> = record
        .x_axes()
        .iter()
        .map(|a| {
            let picks = [0usize, a.len() / 2, a.len() - 1];
            let mut v: Vec<f64> = picks.iter().map(|&i| a[i]).collect();
            v.dedup();
            v
        })
        .collect();
    super::record::cartesian(&axes)
}

/// Newton solve of Phi(t, t0, y) = x for y on the record interpolant.
/// Preimages may fall a little outside the sampled box; the search box is
/// widened by two grid cells per axis and queries there extrapolate.
fn invert_in_x(
    record: &LocalFlowRecord,
    t: f64,
    t0: f64,
    x: &[f64],
) -> Result<Vec<f64>, PresheafError> {
    let dim = x.len();
    let margins: Vec<(f64, f64)> = record
        .cube()
        .space
        .iter()
        .zip(record.x_axes())
        .map(|(b, axis)| {
            let cell = if axis.len() > 1 {
                axis[1] - axis[0]
            } else {
                b.length()
            };
            (b.lo - 2.0 * cell, b.hi + 2.0 * cell)
        })
        .collect();
    let scale: f64 = record
        .cube()
        .space
        .iter()
        .map(|b| b.length())
        .fold(0.0, f64::max)
        .max(1e-12);
    let fd = 1e-6 * scale;
    let mut y = x.to_vec();
    let mut err = f64::INFINITY;
    for _ in 0..30 {
        let f = record.value_cubic_unchecked(t, t0, &y);
        let residual: Vec<f64> = f.iter().zip(x).map(|(a, b)| a - b).collect();
        err = residual.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if err <= 1e-11 * scale.max(1.0) {
            return Ok(y);
        }
        // finite-difference Jacobian of the interpolant
        let mut jac = nalgebra::DMatrix::zeros(dim, dim);
        for c in 0..dim {
            let mut yp = y.clone();
            yp[c] += fd;
            let mut ym = y.clone();
            ym[c] -= fd;
            let fp = record.value_cubic_unchecked(t, t0, &yp);
            let fm = record.value_cubic_unchecked(t, t0, &ym);
            for r in 0..dim {
                jac[(r, c)] = (fp[r] - fm[r]) / (2.0 * fd);
            }
        }
        let rhs = nalgebra::DVector::from_vec(residual);
        let step = jac.lu().solve(&rhs).ok_or(PresheafError::NotInvertible {
            t1: t,
            t0,
            residual: err,
        })?;
        for (c, v) in y.iter_mut().enumerate() {
            *v = (*v - step[c]).clamp(margins[c].0, margins[c].1);
        }
    }
    if err <= 1e-8 * scale.max(1.0) {
        Ok(y)
    } else {
        Err(PresheafError::NotInvertible {
            t1: t,
            t0,
            residual: err,
        })
    }
}
