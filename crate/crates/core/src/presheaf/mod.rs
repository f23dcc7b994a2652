//! Flow-admissible regions and covers, local-flow records, overlap checking
//! and gluing, flow seminorms, and the exponential map with its inverse.

mod cover;
mod exp;
mod record;

pub use cover::{admissible_check, build_cover, AdmissibilityReport, Region};
pub use exp::{exp_inverse, exp_map, FieldFamily};
pub use record::{LocalFlowRecord, RecordGridSpec, RecordTolerances};

use crate::flow::FlowError;
use crate::geometry::chord_distance;
use crate::patch::{GeometryError, Interval, Patch};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, thiserror::Error)]
pub enum PresheafError {
    #[error("region is not flow admissible; witness point (t1, t0, x) = ({t1}, {t0}, {x:?})")]
    NotAdmissible { t1: f64, t0: f64, x: Vec<f64> },
    #[error("record grids incompatible: interpolation error estimate {estimate:.3e} exceeds half the glue tolerance {tol:.3e}")]
    GridIncompatible { estimate: f64, tol: f64 },
    #[error("overlap condition violated between records {i} and {j}: residual {residual:.6e}")]
    OverlapViolation { i: usize, j: usize, residual: f64 },
    #[error("cube {cube_index} is not contained in the flow domain: escape at t = {t_escape}, {point:?}")]
    DomainViolation {
        cube_index: usize,
        t_escape: f64,
        point: Vec<f64>,
    },
    #[error("record is not invertible in x: round trip residual {residual:.3e} at (t1, t0) = ({t1}, {t0})")]
    NotInvertible { t1: f64, t0: f64, residual: f64 },
    #[error("query ({t1}, {t0}, {x:?}) lies outside every cover cube")]
    OutsideCover { t1: f64, t0: f64, x: Vec<f64> },
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("{0}")]
    Invalid(String),
}

/// A product region S' x S x U of final times, initial times, and space.
/// The containment S subset S' makes every such cube flow admissible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cube {
    pub final_times: Interval,
    pub initial_times: Interval,
    pub space: Vec<Interval>,
}

impl Cube {
    pub fn new(
        final_times: Interval,
        initial_times: Interval,
        space: Vec<Interval>,
    ) -> Result<Self, PresheafError> {
        if !final_times.contains_interval(&initial_times) {
            return Err(PresheafError::Invalid(format!(
                "initial times {initial_times:?} must be contained in final times {final_times:?}"
            )));
        }
        if final_times.length() <= 0.0 || space.iter().any(|b| b.length() <= 0.0) {
            return Err(PresheafError::Invalid(
                "cube needs nonempty interior".into(),
            ));
        }
        Ok(Self {
            final_times,
            initial_times,
            space,
        })
    }

    pub fn dim(&self) -> usize {
        self.space.len()
    }

    pub fn contains(&self, t1: f64, t0: f64, x: &[f64]) -> bool {
        self.final_times.contains(t1)
            && self.initial_times.contains(t0)
            && x.iter().zip(&self.space).all(|(v, b)| b.contains(*v))
    }

    pub fn intersect(&self, other: &Cube) -> Option<Cube> {
        let final_times = self.final_times.intersect(&other.final_times)?;
        let initial_times = self.initial_times.intersect(&other.initial_times)?;
        let mut space = Vec::with_capacity(self.space.len());
        for (a, b) in self.space.iter().zip(&other.space) {
            space.push(a.intersect(b)?);
        }
        Some(Cube {
            final_times,
            initial_times,
            space,
        })
    }

    pub fn center(&self) -> (f64, f64, Vec<f64>) {
        (
            self.final_times.midpoint(),
            self.initial_times.midpoint(),
            self.space.iter().map(|b| b.midpoint()).collect(),
        )
    }
}

/// Pairwise overlap residual entry of a presheaf element.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OverlapEntry {
    pub i: usize,
    pub j: usize,
    /// None when the cubes are disjoint.
    pub residual: Option<f64>,
}

/// Sup distance between two records over their cube intersection.
///
/// When the two grids share nodes on the intersection (commensurate covers)
/// the comparison runs at the shared nodes and carries no interpolation
/// error. Otherwise both records are interpolated on a probe grid, and the
/// second-difference interpolation estimate must stay below half the glue
/// tolerance.
pub fn overlap_residual(
    a: &LocalFlowRecord,
    b: &LocalFlowRecord,
    patch: &Patch,
    glue_tolerance: f64,
) -> Result<Option<f64>, PresheafError> {
    let inter = match a.cube().intersect(b.cube()) {
        Some(c) => c,
        None => return Ok(None),
    };
    let shared = record::shared_nodes(a, b, &inter);
    let mut sup: f64 = 0.0;
    if let Some(nodes) = shared {
        for (t1, t0, mut x) in nodes {
            // nodes of the two lattices agree only to rounding; clamp into
            // the intersection so containment checks cannot reject them
            let t1 = t1.clamp(inter.final_times.lo, inter.final_times.hi);
            let t0 = t0.clamp(inter.initial_times.lo, inter.initial_times.hi);
            for (v, bound) in x.iter_mut().zip(&inter.space) {
                *v = v.clamp(bound.lo, bound.hi);
            }
            let va = a.value(t1, t0, &x)?;
            let vb = b.value(t1, t0, &x)?;
            sup = sup.max(chord_distance(patch.metric(), &va, &vb)?);
        }
        return Ok(Some(sup));
    }
    // incommensurate grids: certified interpolation band or refuse
    let estimate = a.interpolation_estimate(&inter) + b.interpolation_estimate(&inter);
    if estimate > 0.5 * glue_tolerance {
        return Err(PresheafError::GridIncompatible {
            estimate,
            tol: glue_tolerance,
        });
    }
    for (t1, t0, x) in record::probe_grid(&inter, 5) {
        let va = a.value(t1, t0, &x)?;
        let vb = b.value(t1, t0, &x)?;
        sup = sup.max(chord_distance(patch.metric(), &va, &vb)?);
    }
    Ok(Some(sup))
}

/// A finite family of local-flow records over a flow-admissible cover with
/// verified overlap residuals.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PresheafElement {
    records: Vec<LocalFlowRecord>,
    residuals: Vec<OverlapEntry>,
    glue_tolerance: f64,
}

/// Check all pairwise overlaps and assemble the element; any residual above
/// the glue tolerance is a violation.
pub fn glue(
    records: Vec<LocalFlowRecord>,
    patch: &Patch,
    glue_tolerance: f64,
) -> Result<PresheafElement, PresheafError> {
    let mut residuals = Vec::new();
    for i in 0..records.len() {
        for j in (i + 1)..records.len() {
            let residual = overlap_residual(&records[i], &records[j], patch, glue_tolerance)?;
            if let Some(r) = residual {
                if r > glue_tolerance {
                    return Err(PresheafError::OverlapViolation { i, j, residual: r });
                }
            }
            residuals.push(OverlapEntry { i, j, residual });
        }
    }
    Ok(PresheafElement {
        records,
        residuals,
        glue_tolerance,
    })
}

impl PresheafElement {
    pub fn records(&self) -> &[LocalFlowRecord] {
        &self.records
    }

    pub fn residuals(&self) -> &[OverlapEntry] {
        &self.residuals
    }

    pub fn glue_tolerance(&self) -> f64 {
        self.glue_tolerance
    }

    /// Restriction to a cover cube: the record itself, exactly.
    pub fn restrict(&self, index: usize) -> &LocalFlowRecord {
        &self.records[index]
    }

    /// Route a query to the containing cube whose center is nearest; on
    /// overlaps any record may answer, consistency being the overlap
    /// invariant's job.
    pub fn query(&self, t1: f64, t0: f64, x: &[f64]) -> Result<Vec<f64>, PresheafError> {
        let mut best: Option<(f64, usize)> = None;
        for (k, rec) in self.records.iter().enumerate() {
            if rec.cube().contains(t1, t0, x) {
                let (c1, c0, cx) = rec.cube().center();
                let mut d = (t1 - c1).powi(2) + (t0 - c0).powi(2);
                for (v, c) in x.iter().zip(&cx) {
                    d += (v - c).powi(2);
                }
                if best.map_or(true, |(bd, _)| d < bd) {
                    best = Some((d, k));
                }
            }
        }
        match best {
            Some((_, k)) => Ok(self.records[k].value(t1, t0, x)?),
            None => Err(PresheafError::OutsideCover {
                t1,
                t0,
                x: x.to_vec(),
            }),
        }
    }
}

/// The flow-space seminorm between two records: the max of the sup part
/// (seminorm of f . Phi1 - f . Phi2 over final and initial times) and the
/// integral part (time-derivative differences integrated over final times,
/// derivatives by central differences on the record grid).
///
/// The section seminorm on the sampled scalar difference supports finite
/// orders m <= 2 via grid finite differences.
pub struct FlowSeminormSpec<'a> {
    pub function: &'a crate::expr::FieldExpr,
    pub order: usize,
    pub space: &'a [Interval],
    pub space_counts: &'a [usize],
    pub initial_times: Interval,
    pub final_times: Interval,
}

pub fn flow_seminorm(
    a: &LocalFlowRecord,
    b: &LocalFlowRecord,
    patch: &Patch,
    spec: &FlowSeminormSpec<'_>,
) -> Result<f64, PresheafError> {
    record::flow_seminorm_impl(a, b, patch, spec)
}
