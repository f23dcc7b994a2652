//! Seminorms for the regularity classes, the local sectional dilatation,
//! and time-integrated seminorms for time-varying sections.

use crate::field::{SectionSnapshot, TimeVaryingField};
use crate::jet::{covariant_jet_tower, directional_jet_derivative_norm, jet_fibre_norm};
use crate::numeric::{adaptive_simpson, unit_directions, QuadError};
use crate::patch::{CompactGrid, GeometryError, Patch};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, thiserror::Error)]
pub enum SeminormError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Domain(#[from] crate::taylor::DomainError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error("point {point:?} is within {distance:.3e} of the boundary; largest dilatation radius is {radius:.3e}")]
    BoundaryTooClose {
        point: Vec<f64>,
        distance: f64,
        radius: f64,
    },
    #[error("{0}")]
    Invalid(String),
}

/// Tagged regularity controlling which seminorm is computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RegularityClass {
    /// m-times continuously differentiable: sup of the order-m jet norm.
    Finite { m: usize },
    /// Finite order plus a Lipschitz top layer measured by the dilatation.
    FiniteLip { m: usize },
    /// Smooth: the whole truncated family of jet-norm sups, orders 0..=m_max.
    Smooth { m_max: usize },
    /// Real analytic: weighted sup over orders with weight products
    /// a_0 a_1 ... a_m; the weight sequence must be positive and nonincreasing.
    RealAnalytic { weights: Vec<f64>, m_max: usize },
    /// Holomorphic patches (dim 2, coordinate z = x1 + i x2): sup modulus.
    Hol,
}

impl RegularityClass {
    pub fn validate(&self) -> Result<(), SeminormError> {
        match self {
            RegularityClass::RealAnalytic { weights, m_max } => {
                if weights.len() < m_max + 1 {
                    return Err(SeminormError::Invalid(format!(
                        "need {} weights for m_max {m_max}, got {}",
                        m_max + 1,
                        weights.len()
                    )));
                }
                if weights.iter().any(|&w| w <= 0.0) {
                    return Err(SeminormError::Invalid(
                        "real-analytic weights must be strictly positive".into(),
                    ));
                }
                if weights.windows(2).any(|w| w[1] > w[0]) {
                    return Err(SeminormError::Invalid(
                        "real-analytic weights must be nonincreasing".into(),
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// The jet order the class needs.
    pub fn jet_order(&self) -> usize {
        match self {
            RegularityClass::Finite { m } | RegularityClass::FiniteLip { m } => *m,
            RegularityClass::Smooth { m_max } => *m_max,
            RegularityClass::RealAnalytic { m_max, .. } => *m_max,
            RegularityClass::Hol => 0,
        }
    }
}

/// Result of a seminorm evaluation with enough context to reproduce it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeminormReport {
    pub value: f64,
    pub class: RegularityClass,
    pub grid_len: usize,
    pub grid_spacing: f64,
    pub truncation_order: usize,
    /// Per-order sups for the smooth and real-analytic families.
    pub per_order: Option<Vec<f64>>,
}

/// Radius schedule for the dilatation: geometric, r_k = r0 * factor^k.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadiusSchedule {
    pub r0: f64,
    pub factor: f64,
    pub count: usize,
}

impl Default for RadiusSchedule {
    fn default() -> Self {
        // exponents 0..=6: smallest radius r0 / 64
        Self {
            r0: 0.05,
            factor: 0.5,
            count: 7,
        }
    }
}

impl RadiusSchedule {
    pub fn radii(&self) -> Vec<f64> {
        (0..self.count)
            .map(|k| self.r0 * self.factor.powi(k as i32))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct DilatationOptions {
    pub schedule: RadiusSchedule,
    pub directions: usize,
    /// Deterministic sample points per shell.
    pub shell_samples: usize,
}

impl Default for DilatationOptions {
    fn default() -> Self {
        Self {
            schedule: RadiusSchedule::default(),
            directions: 64,
            shell_samples: 8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DilatationEstimate {
    pub value: f64,
    /// Ball sups per schedule radius, largest radius first; nonincreasing.
    pub per_radius: Vec<f64>,
}

/// Local sectional dilatation of the order-m jet at `x`: inf over shrinking
/// balls of the sup of directional covariant-derivative norms. Shells are
/// accumulated from the inside out so the per-radius sups are nested.
pub fn dilatation(
    section: &SectionSnapshot<'_>,
    patch: &Patch,
    x: &[f64],
    order: usize,
    opts: &DilatationOptions,
) -> Result<DilatationEstimate, SeminormError> {
    let boundary = patch.boundary_distance(x);
    if boundary < opts.schedule.r0 {
        return Err(SeminormError::BoundaryTooClose {
            point: x.to_vec(),
            distance: boundary,
            radius: opts.schedule.r0,
        });
    }
    let radii = opts.schedule.radii();
    let dirs = unit_directions(patch.dim(), opts.directions);
    let offsets = unit_directions(patch.dim(), opts.shell_samples);

    let sup_at = |y: &[f64]| -> Result<f64, SeminormError> {
        let g = patch.metric().at(y)?;
        let mut best: f64 = 0.0;
        for u in &dirs {
            // normalize u to unit metric length at y
            let mut q = 0.0;
            for i in 0..u.len() {
                for j in 0..u.len() {
                    q += g[(i, j)] * u[i] * u[j];
                }
            }
            let v: Vec<f64> = u.iter().map(|c| c / q.sqrt()).collect();
            let norm = directional_jet_derivative_norm(section, patch, y, order, &v)?;
            best = best.max(norm);
        }
        Ok(best)
    };

    // one shell of samples per radius, plus the center
    let mut shell_sups = Vec::with_capacity(radii.len());
    for r in &radii {
        let mut s: f64 = 0.0;
        for u in &offsets {
            let y: Vec<f64> = x.iter().zip(u).map(|(c, d)| c + r * d).collect();
            s = s.max(sup_at(&y)?);
        }
        shell_sups.push(s);
    }
    let center = sup_at(x)?;
    // cumulative from the smallest radius out: samples of B(r_k) are the
    // shells at radii <= r_k plus the center
    let mut per_radius = vec![0.0; radii.len()];
    let mut acc = center;
    for k in (0..radii.len()).rev() {
        acc = acc.max(shell_sups[k]);
        per_radius[k] = acc;
    }
    let value = per_radius.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(DilatationEstimate { value, per_radius })
}

/// Sup of the dilatation over a grid (the K-sectional Lipschitz layer).
pub fn dilatation_sup(
    section: &SectionSnapshot<'_>,
    patch: &Patch,
    grid: &CompactGrid,
    order: usize,
    opts: &DilatationOptions,
) -> Result<f64, SeminormError> {
    let mut sup: f64 = 0.0;
    for p in grid.points() {
        // shrink the schedule near the boundary rather than failing
        let mut local = opts.clone();
        let boundary = patch.boundary_distance(p);
        if boundary < local.schedule.r0 {
            if boundary <= 0.0 {
                return Err(SeminormError::BoundaryTooClose {
                    point: p.clone(),
                    distance: boundary,
                    radius: local.schedule.r0,
                });
            }
            local.schedule.r0 = 0.5 * boundary;
        }
        sup = sup.max(dilatation(section, patch, p, order, &local)?.value);
    }
    Ok(sup)
}

#[derive(Debug, Clone, Default)]
pub struct SeminormOptions {
    pub dilatation: DilatationOptions,
}

/// The compact-set seminorm of a section snapshot for a regularity class.
pub fn seminorm(
    section: &SectionSnapshot<'_>,
    patch: &Patch,
    class: &RegularityClass,
    grid: &CompactGrid,
    opts: &SeminormOptions,
) -> Result<SeminormReport, SeminormError> {
    class.validate()?;
    if grid.is_empty() {
        return Err(SeminormError::Invalid("seminorm over an empty grid".into()));
    }
    let report = |value: f64, order: usize, per_order: Option<Vec<f64>>| SeminormReport {
        value,
        class: class.clone(),
        grid_len: grid.len(),
        grid_spacing: grid.spacing(),
        truncation_order: order,
        per_order,
    };

    // sups of the order-m jet norm over the grid, for all m <= order
    let order_sups = |order: usize| -> Result<Vec<f64>, SeminormError> {
        let mut sups = vec![0.0_f64; order + 1];
        for p in grid.points() {
            let tower = covariant_jet_tower(section, patch, p, order)?;
            let g = patch.metric().at(p)?;
            for (m, sup) in sups.iter_mut().enumerate() {
                let partial = crate::jet::JetTower {
                    point: tower.point.clone(),
                    order: m,
                    levels: tower.levels[..=m].to_vec(),
                };
                *sup = sup.max(jet_fibre_norm(&partial, &g)?);
            }
        }
        Ok(sups)
    };

    match class {
        RegularityClass::Finite { m } => {
            let sups = order_sups(*m)?;
            Ok(report(sups[*m], *m, None))
        }
        RegularityClass::FiniteLip { m } => {
            let sups = order_sups(*m)?;
            let lip = dilatation_sup(section, patch, grid, *m, &opts.dilatation)?;
            Ok(report(sups[*m].max(lip), *m, None))
        }
        RegularityClass::Smooth { m_max } => {
            let sups = order_sups(*m_max)?;
            let value = *sups.last().unwrap();
            Ok(report(value, *m_max, Some(sups)))
        }
        RegularityClass::RealAnalytic { weights, m_max } => {
            let sups = order_sups(*m_max)?;
            let mut weighted = Vec::with_capacity(*m_max + 1);
            let mut product = 1.0;
            for (m, sup) in sups.iter().enumerate() {
                product *= weights[m];
                weighted.push(product * sup);
            }
            let value = weighted.iter().cloned().fold(0.0, f64::max);
            Ok(report(value, *m_max, Some(weighted)))
        }
        RegularityClass::Hol => {
            let value = hol_seminorm(section, patch, grid)?;
            Ok(report(value, 0, None))
        }
    }
}

/// Sup modulus over the grid for a holomorphic expression in z = x1 + i x2.
fn hol_seminorm(
    section: &SectionSnapshot<'_>,
    patch: &Patch,
    grid: &CompactGrid,
) -> Result<f64, SeminormError> {
    if patch.dim() != 2 {
        return Err(SeminormError::Invalid(
            "holomorphic class needs a 2-dimensional patch (z = x1 + i x2)".into(),
        ));
    }
    let mut sup: f64 = 0.0;
    for p in grid.points() {
        let z = Complex64::new(p[0], p[1]);
        let v = section.eval_complex(z)?;
        sup = sup.max(v.norm());
    }
    Ok(sup)
}

/// Integrated seminorm over a compact time interval: the L^1-in-time
/// topology seminorm, by adaptive quadrature of t -> p(xi_t).
#[allow(clippy::too_many_arguments)]
pub fn time_seminorm(
    field: &TimeVaryingField,
    patch: &Patch,
    class: &RegularityClass,
    grid: &CompactGrid,
    time: crate::patch::Interval,
    params: &[f64],
    tol: f64,
    opts: &SeminormOptions,
) -> Result<f64, SeminormError> {
    let value = adaptive_simpson(
        |t| {
            let snap = field.snapshot(t, params);
            seminorm(&snap, patch, class, grid, opts)
                .map(|r| r.value)
                .map_err(|e| crate::taylor::DomainError(e.to_string()))
        },
        time.lo,
        time.hi,
        tol,
        28,
    )?;
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patch::Interval;
    use approx::assert_relative_eq;

    fn unit_patch() -> Patch {
        Patch::euclidean(vec![Interval::new(-2.0, 2.0)])
    }

    fn grid_on(patch: &Patch, lo: f64, hi: f64, n: usize) -> CompactGrid {
        CompactGrid::uniform(patch, &[Interval::new(lo, hi)], &[n]).unwrap()
    }

    #[test]
    fn zero_field_all_classes() {
        let patch = unit_patch();
        let grid = grid_on(&patch, 0.0, 1.0, 9);
        let f = TimeVaryingField::vector_field(&["0"], 1, 0).unwrap();
        let snap = f.snapshot(0.0, &[]);
        let opts = SeminormOptions::default();
        for class in [
            RegularityClass::Finite { m: 0 },
            RegularityClass::Finite { m: 3 },
            RegularityClass::FiniteLip { m: 1 },
            RegularityClass::Smooth { m_max: 4 },
            RegularityClass::RealAnalytic {
                weights: (0..9).map(|j| 0.5_f64.powi(j + 1)).collect(),
                m_max: 8,
            },
        ] {
            let r = seminorm(&snap, &patch, &class, &grid, &opts).unwrap();
            assert_eq!(r.value, 0.0, "class {class:?}");
        }
    }

    #[test]
    fn sup_of_linear_field() {
        let patch = unit_patch();
        let grid = grid_on(&patch, 0.0, 1.0, 11);
        let f = TimeVaryingField::vector_field(&["x1"], 1, 0).unwrap();
        let snap = f.snapshot(0.0, &[]);
        let r = seminorm(
            &snap,
            &patch,
            &RegularityClass::Finite { m: 0 },
            &grid,
            &SeminormOptions::default(),
        )
        .unwrap();
        assert_relative_eq!(r.value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn real_analytic_weighted_sup() {
        // e^x on [0,1] with a_j = 2^{-(j+1)}: sup attained at m = 0, value e/2
        let patch = unit_patch();
        let grid = grid_on(&patch, 0.0, 1.0, 21);
        let f = TimeVaryingField::vector_field(&["exp(x1)"], 1, 0).unwrap();
        let snap = f.snapshot(0.0, &[]);
        let weights: Vec<f64> = (0..21).map(|j| 0.5_f64.powi(j + 1)).collect();
        let r = seminorm(
            &snap,
            &patch,
            &RegularityClass::RealAnalytic { weights, m_max: 20 },
            &grid,
            &SeminormOptions::default(),
        )
        .unwrap();
        assert_relative_eq!(r.value, std::f64::consts::E / 2.0, epsilon = 1e-4);
        let per = r.per_order.unwrap();
        let argmax = per
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(argmax, 0);
    }

    #[test]
    fn lipschitz_class_takes_the_larger_layer() {
        // X = sin(5x) on K = [0, 0.2]: the value sup is sin(1) but the
        // dilatation layer is 5 sup|cos(5x)| = 5
        let patch = unit_patch();
        let grid = grid_on(&patch, 0.0, 0.2, 9);
        let f = TimeVaryingField::vector_field(&["sin(5*x1)"], 1, 0).unwrap();
        let snap = f.snapshot(0.0, &[]);
        let p0 = seminorm(
            &snap,
            &patch,
            &RegularityClass::Finite { m: 0 },
            &grid,
            &SeminormOptions::default(),
        )
        .unwrap()
        .value;
        let plip = seminorm(
            &snap,
            &patch,
            &RegularityClass::FiniteLip { m: 0 },
            &grid,
            &SeminormOptions::default(),
        )
        .unwrap()
        .value;
        assert_relative_eq!(p0, 1.0_f64.sin(), epsilon = 1e-10);
        assert_relative_eq!(plip, 5.0, epsilon = 1e-2);
    }

    #[test]
    fn dilatation_of_linear_field_is_one() {
        let patch = unit_patch();
        let f = TimeVaryingField::vector_field(&["x1"], 1, 0).unwrap();
        let snap = f.snapshot(0.0, &[]);
        let d = dilatation(&snap, &patch, &[0.5], 0, &DilatationOptions::default()).unwrap();
        assert_relative_eq!(d.value, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn constant_field_has_zero_dilatation() {
        let patch = unit_patch();
        let f = TimeVaryingField::vector_field(&["3"], 1, 0).unwrap();
        let snap = f.snapshot(0.0, &[]);
        let d = dilatation(&snap, &patch, &[0.0], 0, &DilatationOptions::default()).unwrap();
        assert_eq!(d.value, 0.0);
    }

    #[test]
    fn dilatation_of_sine_vanishes_at_crest() {
        let patch = unit_patch();
        let f = TimeVaryingField::vector_field(&["sin(x1)"], 1, 0).unwrap();
        let snap = f.snapshot(0.0, &[]);
        let d = dilatation(
            &snap,
            &patch,
            &[std::f64::consts::FRAC_PI_2],
            0,
            &DilatationOptions::default(),
        )
        .unwrap();
        assert!(d.value <= 1e-3, "dil = {}", d.value);
        for w in d.per_radius.windows(2) {
            assert!(w[1] <= w[0] + 1e-15);
        }
    }

    #[test]
    fn dilatation_needs_interior_point() {
        let patch = unit_patch();
        let f = TimeVaryingField::vector_field(&["x1"], 1, 0).unwrap();
        let snap = f.snapshot(0.0, &[]);
        let r = dilatation(&snap, &patch, &[2.0], 0, &DilatationOptions::default());
        assert!(matches!(r, Err(SeminormError::BoundaryTooClose { .. })));
    }

    #[test]
    fn time_seminorm_of_linear_growth() {
        // xi(t,x) = t d/dx on [0,1] at class C^0: integral of t = 1/2
        let patch = unit_patch();
        let grid = grid_on(&patch, 0.0, 1.0, 5);
        let f = TimeVaryingField::vector_field(&["t"], 1, 0).unwrap();
        let v = time_seminorm(
            &f,
            &patch,
            &RegularityClass::Finite { m: 0 },
            &grid,
            Interval::new(0.0, 1.0),
            &[],
            1e-9,
            &SeminormOptions::default(),
        )
        .unwrap();
        assert_relative_eq!(v, 0.5, epsilon = 1e-8);
    }

    #[test]
    fn time_seminorm_with_kink() {
        // xi(t,x) = |t - 1/2| x d/dx on K=[0,1]: integral = 1/4
        let patch = unit_patch();
        let grid = grid_on(&patch, 0.0, 1.0, 9);
        let f = TimeVaryingField::vector_field(&["abs(t - 0.5)*x1"], 1, 0).unwrap();
        let v = time_seminorm(
            &f,
            &patch,
            &RegularityClass::Finite { m: 0 },
            &grid,
            Interval::new(0.0, 1.0),
            &[],
            1e-9,
            &SeminormOptions::default(),
        )
        .unwrap();
        assert_relative_eq!(v, 0.25, epsilon = 1e-7);
    }

    #[test]
    fn time_constant_field_scales_with_interval() {
        let patch = unit_patch();
        let grid = grid_on(&patch, 0.0, 1.0, 9);
        let f = TimeVaryingField::vector_field(&["x1^2"], 1, 0).unwrap();
        let snap = f.snapshot(0.0, &[]);
        let p = seminorm(
            &snap,
            &patch,
            &RegularityClass::Finite { m: 0 },
            &grid,
            &SeminormOptions::default(),
        )
        .unwrap()
        .value;
        let v = time_seminorm(
            &f,
            &patch,
            &RegularityClass::Finite { m: 0 },
            &grid,
            Interval::new(0.0, 2.0),
            &[],
            1e-9,
            &SeminormOptions::default(),
        )
        .unwrap();
        assert_relative_eq!(v, 2.0 * p, epsilon = 1e-8);
    }

    #[test]
    fn hol_sup_modulus() {
        let patch = Patch::euclidean(vec![Interval::new(-1.0, 1.0), Interval::new(-1.0, 1.0)]);
        let grid = CompactGrid::uniform(
            &patch,
            &[Interval::new(-1.0, 1.0), Interval::new(-1.0, 1.0)],
            &[9, 9],
        )
        .unwrap();
        let f = TimeVaryingField::hol_function("z^2", 0).unwrap();
        let snap = f.snapshot(0.0, &[]);
        let r = seminorm(
            &snap,
            &patch,
            &RegularityClass::Hol,
            &grid,
            &SeminormOptions::default(),
        )
        .unwrap();
        // sup |z^2| over the square is at the corners: |1 + i|^2 = 2
        assert_relative_eq!(r.value, 2.0, epsilon = 1e-12);
    }
}
