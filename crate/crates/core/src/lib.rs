//! Flows of time-varying, parameter-dependent vector fields on coordinate
//! patches, built by contraction mapping, measured in seminorm topologies,
//! and glued into presheaf elements over flow-admissible covers.
//!
//! The crate is organized around the pipeline:
//! expression DSL -> jets -> seminorms and dilatation -> Picard flows ->
//! local-flow records, covers, and gluing -> the exponential map and its
//! inverse.

pub mod expr;
pub mod field;
pub mod flow;
pub mod geometry;
pub mod jet;
pub mod numeric;
pub mod patch;
pub mod presheaf;
pub mod seminorm;
pub mod taylor;

pub use expr::{FieldExpr, SyntaxError};
pub use field::{Fiber, SampledField, TimeVaryingField, VectorField};
pub use flow::{
    composition_residual, contraction_setup, flow_domain, flow_map, flow_path, inverse_residual,
    picard_solve, rk_oracle, weak_characterization_residual, ContractionPlan, FlowError,
    FlowOptions, FlowResult,
};
pub use geometry::{
    chord_distance, geodesic_distance, metric_equivalence_constant, parallel_transport,
    DistanceOptions,
};
pub use jet::{covariant_jet_tower, jet_fibre_norm, taylor_jet, JetTower};
pub use patch::{ChristoffelField, CompactGrid, GeometryError, Interval, MetricField, Patch};
pub use presheaf::{
    admissible_check, build_cover, exp_inverse, exp_map, flow_seminorm, glue, overlap_residual,
    Cube, FieldFamily, FlowSeminormSpec, LocalFlowRecord, PresheafElement, PresheafError,
    RecordGridSpec, Region,
};
pub use seminorm::{
    dilatation, dilatation_sup, seminorm, time_seminorm, DilatationOptions, RadiusSchedule,
    RegularityClass, SeminormError, SeminormOptions, SeminormReport,
};
pub use taylor::DomainError;
