//! Flow-admissible regions of (t1, t0, x) space and cover construction.
//!
//! A region is flow admissible when every point can reach the diagonal
//! t1 = t0 along a segment in the final-time axis: off-diagonal points need
//! their own diagonal point inside, diagonal points need some distinct final
//! time inside.

use super::{Cube, PresheafError};
use crate::numeric::halton_points;
use crate::patch::Interval;
use serde::{Deserialize, Serialize};

/// A sampled region of (t1, t0, x) space.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Region {
    /// Union of product cubes.
    Cubes(Vec<Cube>),
    /// Euclidean ball around a center point. Balls around off-diagonal
    /// centers (and even most diagonal-centered balls) fail admissibility;
    /// kept as an explicit negative example.
    Ball {
        center_t1: f64,
        center_t0: f64,
        center_x: Vec<f64>,
        radius: f64,
    },
    /// A ball together with all final-time segments joining its points to
    /// the diagonal; admissible by construction.
    SegmentClosedBall {
        center_t1: f64,
        center_t0: f64,
        center_x: Vec<f64>,
        radius: f64,
    },
}

impl Region {
    pub fn dim(&self) -> usize {
        match self {
            Region::Cubes(cubes) => cubes.first().map_or(0, |c| c.dim()),
            Region::Ball { center_x, .. } | Region::SegmentClosedBall { center_x, .. } => {
                center_x.len()
            }
        }
    }

    pub fn contains(&self, t1: f64, t0: f64, x: &[f64]) -> bool {
        match self {
            Region::Cubes(cubes) => cubes.iter().any(|c| c.contains(t1, t0, x)),
            Region::Ball {
                center_t1,
                center_t0,
                center_x,
                radius,
            } => {
                let mut d = (t1 - center_t1).powi(2) + (t0 - center_t0).powi(2);
                for (v, c) in x.iter().zip(center_x) {
                    d += (v - c).powi(2);
                }
                d < radius * radius
            }
            Region::SegmentClosedBall {
                center_t1,
                center_t0,
                center_x,
                radius,
            } => {
                // the (t0, x) slice of the ball in the t1 axis
                let mut rest = (t0 - center_t0).powi(2);
                for (v, c) in x.iter().zip(center_x) {
                    rest += (v - c).powi(2);
                }
                let slack = radius * radius - rest;
                if slack <= 0.0 {
                    return false;
                }
                let half = slack.sqrt();
                let (lo, hi) = (center_t1 - half, center_t1 + half);
                // the segment closure joins the slice to the diagonal t1 = t0
                t1 >= lo.min(t0) && t1 <= hi.max(t0)
            }
        }
    }

    /// Axis-aligned bounding box (t1, t0, space).
    pub fn bounding_box(&self) -> (Interval, Interval, Vec<Interval>) {
        match self {
            Region::Cubes(cubes) => {
                let mut t1 = cubes[0].final_times;
                let mut t0 = cubes[0].initial_times;
                let mut space = cubes[0].space.clone();
                for c in &cubes[1..] {
                    t1 = Interval::new(t1.lo.min(c.final_times.lo), t1.hi.max(c.final_times.hi));
                    t0 = Interval::new(
                        t0.lo.min(c.initial_times.lo),
                        t0.hi.max(c.initial_times.hi),
                    );
                    for (s, b) in space.iter_mut().zip(&c.space) {
                        *s = Interval::new(s.lo.min(b.lo), s.hi.max(b.hi));
                    }
                }
                (t1, t0, space)
            }
            Region::Ball {
                center_t1,
                center_t0,
                center_x,
                radius,
            } => (
                Interval::new(center_t1 - radius, center_t1 + radius),
                Interval::new(center_t0 - radius, center_t0 + radius),
                center_x
                    .iter()
                    .map(|c| Interval::new(c - radius, c + radius))
                    .collect(),
            ),
            Region::SegmentClosedBall {
                center_t1,
                center_t0,
                center_x,
                radius,
            } => {
                // t1 extends to the whole t0 range by the segment closure
                let t1_lo = (center_t1 - radius).min(center_t0 - radius);
                let t1_hi = (center_t1 + radius).max(center_t0 + radius);
                (
                    Interval::new(t1_lo, t1_hi),
                    Interval::new(center_t0 - radius, center_t0 + radius),
                    center_x
                        .iter()
                        .map(|c| Interval::new(c - radius, c + radius))
                        .collect(),
                )
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdmissibilityReport {
    pub admissible: bool,
    /// A violating point, when not admissible.
    pub witness: Option<(f64, f64, Vec<f64>)>,
    /// For one sampled diagonal point: the distinct final time found for
    /// property (a), logged for reproducibility.
    pub example_companion: Option<(f64, f64, Vec<f64>)>,
    pub samples_checked: usize,
}

/// Sampled admissibility check of the two segment properties. Off-diagonal
/// points come from low-discrepancy samples of the bounding box; diagonal
/// points (measure zero in the box) are sampled deliberately from the
/// (t0, x) slice. Segments are probed at `segment_probes` interior points.
pub fn admissible_check(
    region: &Region,
    samples: usize,
    segment_probes: usize,
) -> AdmissibilityReport {
    let (t1b, t0b, xb) = region.bounding_box();
    let t1_span = t1b.length().max(1e-12);
    let diag_eps = 1e-9 * t1_span;

    let segment_inside = |from_t1: f64, to_t1: f64, t0: f64, x: &[f64]| -> bool {
        (0..=segment_probes).all(|k| {
            // pin the endpoints so rounding cannot push them past the boundary
            let s = if k == 0 {
                from_t1
            } else if k == segment_probes {
                to_t1
            } else {
                from_t1 + (to_t1 - from_t1) * k as f64 / segment_probes as f64
            };
            region.contains(s, t0, x)
        })
    };

    let mut example_companion = None;
    let mut checked = 0usize;

    // property (b) on off-diagonal samples of the whole box
    let mut bounds = vec![[t1b.lo, t1b.hi], [t0b.lo, t0b.hi]];
    bounds.extend(xb.iter().map(|b| [b.lo, b.hi]));
    for p in halton_points(&bounds, samples) {
        let (t1, t0, x) = (p[0], p[1], &p[2..]);
        if !region.contains(t1, t0, x) || (t1 - t0).abs() <= diag_eps {
            continue;
        }
        checked += 1;
        if !region.contains(t0, t0, x) || !segment_inside(t1, t0, t0, x) {
            return AdmissibilityReport {
                admissible: false,
                witness: Some((t1, t0, x.to_vec())),
                example_companion,
                samples_checked: checked,
            };
        }
    }

    // property (a) on diagonal samples of the (t0, x) slice
    let slice_bounds: Vec<[f64; 2]> = bounds[1..].to_vec();
    for p in halton_points(&slice_bounds, samples / 4 + 1) {
        let (t0, x) = (p[0], &p[1..]);
        if !region.contains(t0, t0, x) {
            continue;
        }
        checked += 1;
        // coarse ladder across the box plus a geometric ladder toward t0,
        // so that thin admissible slivers near the boundary are still found
        let mut offsets: Vec<f64> = (1..=32).map(|k| t1_span * k as f64 / 32.0).collect();
        offsets.extend((1..=24).map(|k| t1_span * 0.5_f64.powi(k)));
        let mut found = false;
        'search: for off in offsets {
            for sign in [1.0, -1.0] {
                let t2 = t0 + sign * off;
                if (t2 - t0).abs() > diag_eps
                    && region.contains(t2, t0, x)
                    && segment_inside(t0, t2, t0, x)
                {
                    if example_companion.is_none() {
                        example_companion = Some((t2, t0, x.to_vec()));
                    }
                    found = true;
                    break 'search;
                }
            }
        }
        if !found {
            return AdmissibilityReport {
                admissible: false,
                witness: Some((t0, t0, x.to_vec())),
                example_companion,
                samples_checked: checked,
            };
        }
    }

    AdmissibilityReport {
        admissible: true,
        witness: None,
        example_companion,
        samples_checked: checked,
    }
}

/// Cover an admissible region with flow-admissible product cubes.
///
/// Initial-time and space axes are tiled with the requested overlap
/// fraction; each tile's final-time extent is the hull of the region's
/// final-time slice over the tile together with the tile's own initial
/// times, which reaches the diagonal the way the off-diagonal chain
/// construction does.
pub fn build_cover(
    region: &Region,
    resolution: usize,
    overlap: f64,
) -> Result<Vec<Cube>, PresheafError> {
    assert!(resolution >= 1);
    assert!((0.0..1.0).contains(&overlap));
    let report = admissible_check(region, 4096, 16);
    if !report.admissible {
        let (t1, t0, x) = report.witness.unwrap();
        return Err(PresheafError::NotAdmissible { t1, t0, x });
    }
    let (t1b, t0b, xb) = region.bounding_box();

    let tiles = |b: Interval| -> Vec<Interval> {
        if resolution == 1 {
            return vec![b];
        }
        let size = b.length() / ((resolution as f64 - 1.0) * (1.0 - overlap) + 1.0);
        let stride = size * (1.0 - overlap);
        (0..resolution)
            .map(|k| {
                let lo = b.lo + stride * k as f64;
                Interval::new(lo, (lo + size).min(b.hi))
            })
            .collect()
    };

    let t0_tiles = tiles(t0b);
    let x_tiles: Vec<Vec<Interval>> = xb.iter().map(|b| tiles(*b)).collect();
    let mut x_combos = vec![vec![]];
    for axis in &x_tiles {
        x_combos = x_combos
            .into_iter()
            .flat_map(|stem: Vec<Interval>| {
                axis.iter().map(move |iv| {
                    let mut c = stem.clone();
                    c.push(*iv);
                    c
                })
            })
            .collect();
    }

    // membership samples drive the per-tile final-time extents
    let mut bounds = vec![[t1b.lo, t1b.hi], [t0b.lo, t0b.hi]];
    bounds.extend(xb.iter().map(|b| [b.lo, b.hi]));
    let members: Vec<Vec<f64>> = halton_points(&bounds, 20_000)
        .into_iter()
        .filter(|p| region.contains(p[0], p[1], &p[2..]))
        .collect();
    if members.is_empty() {
        return Err(PresheafError::Invalid("region has no sampled points".into()));
    }

    let mut cubes = Vec::new();
    for t0_tile in &t0_tiles {
        for xc in &x_combos {
            let mut t1_lo = f64::INFINITY;
            let mut t1_hi = f64::NEG_INFINITY;
            let mut hit = false;
            for p in &members {
                let (t1, t0, x) = (p[0], p[1], &p[2..]);
                if t0_tile.contains(t0) && x.iter().zip(xc).all(|(v, b)| b.contains(*v)) {
                    t1_lo = t1_lo.min(t1);
                    t1_hi = t1_hi.max(t1);
                    hit = true;
                }
            }
            if !hit {
                continue;
            }
            // hull with the tile's initial times keeps S inside S'
            let final_times = Interval::new(t1_lo.min(t0_tile.lo), t1_hi.max(t0_tile.hi));
            cubes.push(Cube::new(final_times, *t0_tile, xc.clone())?);
        }
    }

    // the union must cover the sampled region
    for p in &members {
        let (t1, t0, x) = (p[0], p[1], &p[2..]);
        if !cubes.iter().any(|c| c.contains(t1, t0, x)) {
            return Err(PresheafError::Invalid(format!(
                "cover misses region sample ({t1}, {t0}, {x:?})"
            )));
        }
    }
    Ok(cubes)
}
