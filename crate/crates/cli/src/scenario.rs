//! Scenario schema, parsing, and validation.

use flowpresheaf_core::expr::FieldExpr;
use flowpresheaf_core::patch::{ChristoffelField, Interval, MetricField, Patch};
use flowpresheaf_core::seminorm::RegularityClass;
use flowpresheaf_core::TimeVaryingField;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const SCHEMA_VERSION: &str = "flowpresheaf/v1";

#[derive(Debug, Clone, thiserror::Error)]
#[error("config error at {path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

fn err(path: impl Into<String>, message: impl ToString) -> ConfigError {
    ConfigError {
        path: path.into(),
        message: message.to_string(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub schema: String,
    #[serde(default)]
    pub seed: u64,
    pub patch: PatchSpec,
    /// Named fields; each entry lists the component expressions.
    pub fields: BTreeMap<String, Vec<String>>,
    /// Holomorphic functions of z = x1 + i x2 (2-dimensional patches only);
    /// usable by seminorm experiments under the hol class.
    #[serde(default)]
    pub hol_functions: BTreeMap<String, String>,
    #[serde(default)]
    pub params: ParamSpec,
    #[serde(default)]
    pub regularity: RegularitySpec,
    pub grids: GridSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
    pub experiments: Vec<ExperimentSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PatchSpec {
    pub dim: usize,
    pub bounds: Vec<[f64; 2]>,
    /// Row-major metric entries (dim * dim expressions); identity if absent.
    #[serde(default)]
    pub metric: Option<Vec<String>>,
    /// Explicit Christoffel entries (dim^3); Levi-Civita if absent.
    #[serde(default)]
    pub christoffels: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ParamSpec {
    #[serde(default)]
    pub count: usize,
    #[serde(default)]
    pub base: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "kebab-case")]
pub enum RegularitySpec {
    Finite { m: usize },
    FiniteLip { m: usize },
    Smooth { m_max: usize },
    RealAnalytic { m_max: usize, weights: Vec<f64> },
    Hol,
}

impl Default for RegularitySpec {
    fn default() -> Self {
        RegularitySpec::Finite { m: 0 }
    }
}

impl RegularitySpec {
    pub fn to_class(&self) -> RegularityClass {
        match self {
            RegularitySpec::Finite { m } => RegularityClass::Finite { m: *m },
            RegularitySpec::FiniteLip { m } => RegularityClass::FiniteLip { m: *m },
            RegularitySpec::Smooth { m_max } => RegularityClass::Smooth { m_max: *m_max },
            RegularitySpec::RealAnalytic { m_max, weights } => RegularityClass::RealAnalytic {
                weights: weights.clone(),
                m_max: *m_max,
            },
            RegularitySpec::Hol => RegularityClass::Hol,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSpec {
    /// Compact set K: a sub-box of the patch with per-axis node counts.
    pub k: KGrid,
    /// Time interval S for integrated seminorms and flow experiments.
    pub time: [f64; 2],
    #[serde(default = "default_final_count")]
    pub final_time_count: usize,
    #[serde(default = "default_initial_count")]
    pub initial_time_count: usize,
}

fn default_final_count() -> usize {
    33
}

fn default_initial_count() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KGrid {
    pub bounds: Vec<[f64; 2]>,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tolerances {
    #[serde(default = "default_quad")]
    pub quadrature: f64,
    #[serde(default = "default_glue")]
    pub glue: f64,
    #[serde(default = "default_flow_error")]
    pub flow_error: f64,
    #[serde(default = "default_gronwall_slack")]
    pub gronwall_slack: f64,
    #[serde(default = "default_field_round_trip")]
    pub field_round_trip: f64,
    #[serde(default = "default_flow_round_trip")]
    pub flow_round_trip: f64,
}

fn default_quad() -> f64 {
    1e-9
}
fn default_glue() -> f64 {
    1e-6
}
fn default_flow_error() -> f64 {
    1e-5
}
fn default_gronwall_slack() -> f64 {
    1.2
}
fn default_field_round_trip() -> f64 {
    1e-3
}
fn default_flow_round_trip() -> f64 {
    1e-5
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            quadrature: default_quad(),
            glue: default_glue(),
            flow_error: default_flow_error(),
            gronwall_slack: default_gronwall_slack(),
            field_round_trip: default_field_round_trip(),
            flow_round_trip: default_flow_round_trip(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CubeSpec {
    pub final_times: [f64; 2],
    pub initial_times: [f64; 2],
    pub space: Vec<[f64; 2]>,
}

impl CubeSpec {
    pub fn to_cube(&self) -> Result<flowpresheaf_core::presheaf::Cube, ConfigError> {
        flowpresheaf_core::presheaf::Cube::new(
            Interval::new(self.final_times[0], self.final_times[1]),
            Interval::new(self.initial_times[0], self.initial_times[1]),
            self.space
                .iter()
                .map(|b| Interval::new(b[0], b[1]))
                .collect(),
        )
        .map_err(|e| err("cube", e))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum RegionSpec {
    Cubes { cubes: Vec<CubeSpec> },
    Ball {
        center_t1: f64,
        center_t0: f64,
        center_x: Vec<f64>,
        radius: f64,
    },
    SegmentBall {
        center_t1: f64,
        center_t0: f64,
        center_x: Vec<f64>,
        radius: f64,
    },
}

impl RegionSpec {
    pub fn to_region(&self) -> Result<flowpresheaf_core::presheaf::Region, ConfigError> {
        use flowpresheaf_core::presheaf::Region;
        Ok(match self {
            RegionSpec::Cubes { cubes } => Region::Cubes(
                cubes
                    .iter()
                    .map(|c| c.to_cube())
                    .collect::<Result<_, _>>()?,
            ),
            RegionSpec::Ball {
                center_t1,
                center_t0,
                center_x,
                radius,
            } => Region::Ball {
                center_t1: *center_t1,
                center_t0: *center_t0,
                center_x: center_x.clone(),
                radius: *radius,
            },
            RegionSpec::SegmentBall {
                center_t1,
                center_t0,
                center_x,
                radius,
            } => Region::SegmentClosedBall {
                center_t1: *center_t1,
                center_t0: *center_t0,
                center_x: center_x.clone(),
                radius: *radius,
            },
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExperimentSpec {
    /// Flows versus the reference integrator plus group-law checks.
    Flow {
        field: String,
        #[serde(default = "default_samples")]
        samples: usize,
        #[serde(default = "default_oracle_steps")]
        oracle_steps: usize,
    },
    /// Seminorm of a field snapshot plus homogeneity/triangle spot checks.
    Seminorm {
        field: String,
        #[serde(default)]
        at_time: f64,
    },
    /// Sectional dilatation over the K grid.
    Dil {
        field: String,
        #[serde(default)]
        order: usize,
        #[serde(default)]
        expect_constant: Option<f64>,
        #[serde(default = "default_dil_tol")]
        expect_tolerance: f64,
    },
    /// Admissibility and cover construction for a region.
    Cover {
        region: RegionSpec,
        #[serde(default = "default_resolution")]
        resolution: usize,
        #[serde(default = "default_overlap")]
        overlap: f64,
    },
    /// Record building, overlap residuals, and gluing over a cover.
    Glue {
        assignments: Vec<GlueAssignment>,
        #[serde(default)]
        expect_violation: bool,
    },
    /// q-seminorm flow distances across a parameter sweep with the
    /// Gronwall yardstick.
    ParamSweep {
        field: String,
        function: String,
        #[serde(default)]
        param_index: usize,
        #[serde(default = "default_sweep_points")]
        points: usize,
        t_final: f64,
    },
    /// Perturbation sweep against the measured Gronwall constant.
    ExpCheck {
        field: String,
        perturbation: String,
        #[serde(default = "default_sweep_points")]
        points: usize,
        #[serde(default = "default_eps0")]
        epsilon0: f64,
        t_final: f64,
    },
    /// Field and flow round trips through the inverse of the exponential.
    InverseCheck {
        field: String,
        cube: CubeSpec,
        #[serde(default = "default_h")]
        h: f64,
    },
    /// Two-sided metric comparison constant.
    MetricEquiv {
        g2: Vec<String>,
        #[serde(default = "default_pairs")]
        pairs: usize,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GlueAssignment {
    pub cube: CubeSpec,
    pub field: String,
}

fn default_samples() -> usize {
    20
}
fn default_oracle_steps() -> usize {
    2000
}
fn default_resolution() -> usize {
    2
}
fn default_overlap() -> f64 {
    0.3
}
fn default_sweep_points() -> usize {
    8
}
fn default_eps0() -> f64 {
    0.2
}
fn default_h() -> f64 {
    1e-4
}
fn default_pairs() -> usize {
    200
}
fn default_dil_tol() -> f64 {
    1e-3
}

/// Validated, compiled scenario.
#[derive(Debug)]
pub struct Compiled {
    pub scenario: Scenario,
    pub patch: Patch,
    pub fields: BTreeMap<String, TimeVaryingField>,
    pub base_params: Vec<f64>,
}

pub fn parse(source: &str) -> Result<Scenario, ConfigError> {
    serde_json::from_str(source).map_err(|e| err("$", e))
}

pub fn compile(scenario: Scenario) -> Result<Compiled, ConfigError> {
    if scenario.schema != SCHEMA_VERSION {
        return Err(err(
            "schema",
            format!(
                "unsupported schema {:?}; expected {SCHEMA_VERSION:?}",
                scenario.schema
            ),
        ));
    }
    let dim = scenario.patch.dim;
    if dim == 0 {
        return Err(err("patch.dim", "dimension must be positive"));
    }
    if scenario.patch.bounds.len() != dim {
        return Err(err("patch.bounds", "one [lo, hi] pair per dimension"));
    }
    for (i, b) in scenario.patch.bounds.iter().enumerate() {
        if b[0] >= b[1] {
            return Err(err(format!("patch.bounds[{i}]"), "lo must be below hi"));
        }
    }
    let coord_names: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
    let coord_refs: Vec<&str> = coord_names.iter().map(|s| s.as_str()).collect();
    let metric = match &scenario.patch.metric {
        None => MetricField::euclidean(dim),
        Some(entries) => {
            if entries.len() != dim * dim {
                return Err(err("patch.metric", format!("expected {} entries", dim * dim)));
            }
            let exprs = entries
                .iter()
                .enumerate()
                .map(|(i, src)| {
                    FieldExpr::parse(src, &coord_refs)
                        .map_err(|e| err(format!("patch.metric[{i}]"), e))
                })
                .collect::<Result<Vec<_>, _>>()?;
            MetricField::from_exprs(dim, exprs).map_err(|e| err("patch.metric", e))?
        }
    };
    let connection = match &scenario.patch.christoffels {
        None => ChristoffelField::LeviCivita,
        Some(entries) => {
            if entries.len() != dim * dim * dim {
                return Err(err(
                    "patch.christoffels",
                    format!("expected {} entries", dim * dim * dim),
                ));
            }
            let exprs = entries
                .iter()
                .enumerate()
                .map(|(i, src)| {
                    FieldExpr::parse(src, &coord_refs)
                        .map_err(|e| err(format!("patch.christoffels[{i}]"), e))
                })
                .collect::<Result<Vec<_>, _>>()?;
            ChristoffelField::Explicit(exprs)
        }
    };
    let bounds: Vec<Interval> = scenario
        .patch
        .bounds
        .iter()
        .map(|b| Interval::new(b[0], b[1]))
        .collect();
    let patch = Patch::new(bounds, metric, connection).map_err(|e| err("patch", e))?;

    let n_params = scenario.params.count;
    if scenario.params.base.len() != n_params {
        return Err(err("params.base", "one base value per parameter"));
    }

    let mut fields = BTreeMap::new();
    for (name, comps) in &scenario.fields {
        if comps.len() != dim {
            return Err(err(
                format!("fields.{name}"),
                format!("expected {dim} components"),
            ));
        }
        let srcs: Vec<&str> = comps.iter().map(|s| s.as_str()).collect();
        let field = TimeVaryingField::vector_field(&srcs, dim, n_params)
            .map_err(|e| err(format!("fields.{name}"), e))?;
        fields.insert(name.clone(), field);
    }
    for (name, src) in &scenario.hol_functions {
        if dim != 2 {
            return Err(err(
                format!("hol_functions.{name}"),
                "holomorphic functions need a 2-dimensional patch",
            ));
        }
        if fields.contains_key(name) {
            return Err(err(
                format!("hol_functions.{name}"),
                "name collides with a vector field",
            ));
        }
        let f = TimeVaryingField::hol_function(src, n_params)
            .map_err(|e| err(format!("hol_functions.{name}"), e))?;
        fields.insert(name.clone(), f);
    }

    // grids
    if scenario.grids.k.bounds.len() != dim || scenario.grids.k.counts.len() != dim {
        return Err(err("grids.k", "bounds and counts must match the patch dimension"));
    }
    if scenario.grids.k.counts.iter().any(|&c| c == 0) {
        return Err(err("grids.k.counts", "grid axes need at least one node"));
    }
    for (i, b) in scenario.grids.k.bounds.iter().enumerate() {
        if b[0] > b[1] {
            return Err(err(format!("grids.k.bounds[{i}]"), "lo must not exceed hi"));
        }
        if b[0] < scenario.patch.bounds[i][0] || b[1] > scenario.patch.bounds[i][1] {
            return Err(err(
                format!("grids.k.bounds[{i}]"),
                "K must lie inside the patch bounds",
            ));
        }
    }
    if scenario.grids.time[0] > scenario.grids.time[1] {
        return Err(err("grids.time", "time interval out of order"));
    }
    scenario
        .regularity
        .to_class()
        .validate()
        .map_err(|e| err("regularity", e))?;

    // per-experiment references
    for (i, e) in scenario.experiments.iter().enumerate() {
        let check_field = |name: &str, allow_hol: bool| -> Result<(), ConfigError> {
            match fields.get(name) {
                None => Err(err(
                    format!("experiments[{i}]"),
                    format!("unknown field {name:?}"),
                )),
                Some(f) if f.is_hol() && !allow_hol => Err(err(
                    format!("experiments[{i}]"),
                    format!("field {name:?} is holomorphic; only seminorm experiments accept it"),
                )),
                Some(_) => Ok(()),
            }
        };
        match e {
            ExperimentSpec::Seminorm { field, .. } => check_field(field, true)?,
            ExperimentSpec::Flow { field, .. }
            | ExperimentSpec::Dil { field, .. }
            | ExperimentSpec::ParamSweep { field, .. }
            | ExperimentSpec::ExpCheck { field, .. }
            | ExperimentSpec::InverseCheck { field, .. } => check_field(field, false)?,
            ExperimentSpec::Glue { assignments, .. } => {
                for a in assignments {
                    check_field(&a.field, false)?;
                }
            }
            ExperimentSpec::MetricEquiv { g2, .. } => {
                if g2.len() != dim * dim {
                    return Err(err(
                        format!("experiments[{i}].g2"),
                        format!("expected {} entries", dim * dim),
                    ));
                }
                for (j, src) in g2.iter().enumerate() {
                    FieldExpr::parse(src, &coord_refs)
                        .map_err(|e| err(format!("experiments[{i}].g2[{j}]"), e))?;
                }
            }
            ExperimentSpec::Cover { .. } => {}
        }
        if let ExperimentSpec::ParamSweep { param_index, .. } = e {
            if *param_index >= n_params.max(1) {
                return Err(err(
                    format!("experiments[{i}].param_index"),
                    "parameter index out of range",
                ));
            }
        }
    }

    let base_params = scenario.params.base.clone();
    Ok(Compiled {
        scenario,
        patch,
        fields,
        base_params,
    })
}
