//! Experiment execution: each scenario item runs independently and returns
//! a result with tables; ordering and seeds are fixed by the item index.

use crate::report::{ExperimentResult, Table};
use crate::scenario::{Compiled, ExperimentSpec, GlueAssignment};
use flowpresheaf_core::expr::FieldExpr;
use flowpresheaf_core::field::VectorField;
use flowpresheaf_core::flow::{
    composition_residual, flow_map, inverse_residual, rk_oracle, FlowOptions,
};
use flowpresheaf_core::geometry::{metric_equivalence_constant, DistanceOptions};
use flowpresheaf_core::patch::{CompactGrid, Interval, MetricField, Patch};
use flowpresheaf_core::presheaf::{
    admissible_check, build_cover, exp_inverse, flow_seminorm, glue, Cube, FlowSeminormSpec,
    LocalFlowRecord, PresheafError, RecordGridSpec,
};
use flowpresheaf_core::seminorm::{dilatation, seminorm, time_seminorm, SeminormOptions};
use flowpresheaf_core::TimeVaryingField;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn run_experiment(compiled: &Compiled, index: usize, seed: u64) -> ExperimentResult {
    let spec = &compiled.scenario.experiments[index];
    let rng = ChaCha8Rng::seed_from_u64(seed ^ (index as u64).wrapping_mul(0x9e37_79b9));
    let outcome = match spec {
        ExperimentSpec::Flow {
            field,
            samples,
            oracle_steps,
        } => run_flow(compiled, field, *samples, *oracle_steps, rng),
        ExperimentSpec::Seminorm { field, at_time } => run_seminorm(compiled, field, *at_time),
        ExperimentSpec::Dil {
            field,
            order,
            expect_constant,
            expect_tolerance,
        } => run_dil(compiled, field, *order, *expect_constant, *expect_tolerance),
        ExperimentSpec::Cover {
            region,
            resolution,
            overlap,
        } => run_cover(compiled, region, *resolution, *overlap),
        ExperimentSpec::Glue {
            assignments,
            expect_violation,
        } => run_glue(compiled, assignments, *expect_violation),
        ExperimentSpec::ParamSweep {
            field,
            function,
            param_index,
            points,
            t_final,
        } => run_param_sweep(compiled, field, function, *param_index, *points, *t_final),
        ExperimentSpec::ExpCheck {
            field,
            perturbation,
            points,
            epsilon0,
            t_final,
        } => run_exp_check(compiled, field, perturbation, *points, *epsilon0, *t_final),
        ExperimentSpec::InverseCheck { field, cube, h } => {
            run_inverse_check(compiled, field, cube, *h)
        }
        ExperimentSpec::MetricEquiv { g2, pairs } => run_metric_equiv(compiled, g2, *pairs),
    };
    match outcome {
        Ok((pass, detail, tables)) => ExperimentResult {
            index,
            kind: kind_name(spec).to_string(),
            pass,
            detail,
            tables,
        },
        Err(e) => ExperimentResult {
            index,
            kind: kind_name(spec).to_string(),
            pass: false,
            detail: format!("error: {e}"),
            tables: vec![],
        },
    }
}

fn kind_name(spec: &ExperimentSpec) -> &'static str {
    match spec {
        ExperimentSpec::Flow { .. } => "flow",
        ExperimentSpec::Seminorm { .. } => "seminorm",
        ExperimentSpec::Dil { .. } => "dil",
        ExperimentSpec::Cover { .. } => "cover",
        ExperimentSpec::Glue { .. } => "glue",
        ExperimentSpec::ParamSweep { .. } => "param-sweep",
        ExperimentSpec::ExpCheck { .. } => "exp-check",
        ExperimentSpec::InverseCheck { .. } => "inverse-check",
        ExperimentSpec::MetricEquiv { .. } => "metric-equiv",
    }
}

type Outcome = Result<(bool, String, Vec<Table>), anyhow::Error>;

fn k_grid(compiled: &Compiled) -> Result<CompactGrid, anyhow::Error> {
    let k = &compiled.scenario.grids.k;
    let sub: Vec<Interval> = k.bounds.iter().map(|b| Interval::new(b[0], b[1])).collect();
    Ok(CompactGrid::uniform(&compiled.patch, &sub, &k.counts)?)
}

fn field<'a>(compiled: &'a Compiled, name: &str) -> &'a TimeVaryingField {
    &compiled.fields[name]
}

fn run_flow(
    compiled: &Compiled,
    name: &str,
    samples: usize,
    oracle_steps: usize,
    mut rng: ChaCha8Rng,
) -> Outcome {
    let f = field(compiled, name);
    let bound = f.bound(&compiled.base_params);
    let patch = &compiled.patch;
    let opts = FlowOptions::default();
    let time = compiled.scenario.grids.time;
    let kb = &compiled.scenario.grids.k.bounds;
    let mut rows = Vec::new();
    let mut worst_oracle: f64 = 0.0;
    let mut worst_group: f64 = 0.0;
    let mut done = 0usize;
    while done < samples {
        let t0 = rng.gen_range(time[0]..=time[1]);
        let t1 = rng.gen_range(time[0]..=time[1]);
        let t2 = rng.gen_range(time[0]..=time[1]);
        let x0: Vec<f64> = kb.iter().map(|b| rng.gen_range(b[0]..=b[1])).collect();
        if (t1 - t0).abs() < 1e-3 {
            continue;
        }
        let picard = flow_map(&bound, patch, t1, t0, &x0, &opts)?;
        let oracle = rk_oracle(&bound, patch, t1, t0, &x0, oracle_steps)?;
        let err = picard
            .iter()
            .zip(&oracle)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let comp = composition_residual(&bound, patch, t2, t1, t0, &x0, &opts)?;
        let inv = inverse_residual(&bound, patch, t1, t0, &x0, &opts)?;
        worst_oracle = worst_oracle.max(err);
        worst_group = worst_group.max(comp).max(inv);
        rows.push(vec![
            Table::cell(t1),
            Table::cell(t0),
            format!("{x0:?}"),
            Table::cell(err),
            Table::cell(comp),
            Table::cell(inv),
        ]);
        done += 1;
    }
    let tol = compiled.scenario.tolerances.flow_error;
    let pass = worst_oracle <= tol && worst_group <= 1e-6;
    Ok((
        pass,
        format!("oracle error {worst_oracle:.3e} (tol {tol:.1e}); group-law residual {worst_group:.3e}"),
        vec![Table {
            name: format!("flow_{name}"),
            invariant: "picard-oracle agreement and group law".into(),
            headers: ["t1", "t0", "x0", "oracle_error", "composition", "inverse"]
                .map(String::from)
                .to_vec(),
            rows,
            plot: None,
        }],
    ))
}

fn run_seminorm(compiled: &Compiled, name: &str, at_time: f64) -> Outcome {
    let f = field(compiled, name);
    let patch = &compiled.patch;
    let grid = k_grid(compiled)?;
    let class = compiled.scenario.regularity.to_class();
    let opts = SeminormOptions::default();
    let snap = f.snapshot(at_time, &compiled.base_params);
    let r = seminorm(&snap, patch, &class, &grid, &opts)?;
    let time = compiled.scenario.grids.time;
    let integrated = time_seminorm(
        f,
        patch,
        &class,
        &grid,
        Interval::new(time[0], time[1]),
        &compiled.base_params,
        compiled.scenario.tolerances.quadrature,
        &opts,
    )?;
    // homogeneity spot check against a doubled field
    let dim = patch.dim();
    let doubled = if f.is_hol() {
        TimeVaryingField::hol_function(&format!("2*({})", f.components()[0]), f.n_params())?
    } else {
        let doubled_sources: Vec<String> = f
            .components()
            .iter()
            .map(|c| format!("2*({c})"))
            .collect();
        let refs: Vec<&str> = doubled_sources.iter().map(|s| s.as_str()).collect();
        TimeVaryingField::vector_field(&refs, dim, f.n_params())?
    };
    let p2 = seminorm(
        &doubled.snapshot(at_time, &compiled.base_params),
        patch,
        &class,
        &grid,
        &opts,
    )?
    .value;
    let homogeneity_defect = (p2 - 2.0 * r.value).abs();
    let pass = homogeneity_defect <= 1e-9 * (1.0 + p2);
    let mut rows = vec![vec![
        "snapshot".to_string(),
        Table::cell(r.value),
        Table::cell(r.grid_spacing),
        r.truncation_order.to_string(),
    ]];
    rows.push(vec![
        "integrated".to_string(),
        Table::cell(integrated),
        Table::cell(r.grid_spacing),
        r.truncation_order.to_string(),
    ]);
    if let Some(per) = &r.per_order {
        for (m, v) in per.iter().enumerate() {
            rows.push(vec![
                format!("order_{m}"),
                Table::cell(*v),
                Table::cell(r.grid_spacing),
                m.to_string(),
            ]);
        }
    }
    Ok((
        pass,
        format!(
            "seminorm {:.6e}, integrated {:.6e}, homogeneity defect {homogeneity_defect:.2e}",
            r.value, integrated
        ),
        vec![Table {
            name: format!("seminorm_{name}"),
            invariant: "seminorm values and scaling homogeneity".into(),
            headers: ["kind", "value", "grid_spacing", "order"]
                .map(String::from)
                .to_vec(),
            rows,
            plot: None,
        }],
    ))
}

fn run_dil(
    compiled: &Compiled,
    name: &str,
    order: usize,
    expect_constant: Option<f64>,
    expect_tolerance: f64,
) -> Outcome {
    let f = field(compiled, name);
    let patch = &compiled.patch;
    let grid = k_grid(compiled)?;
    let snap = f.snapshot(0.0, &compiled.base_params);
    let opts = flowpresheaf_core::seminorm::DilatationOptions::default();
    let mut rows = Vec::new();
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    let mut worst_dev: f64 = 0.0;
    for p in grid.points() {
        let mut local = opts.clone();
        let boundary = patch.boundary_distance(p);
        if boundary < local.schedule.r0 {
            local.schedule.r0 = 0.5 * boundary;
        }
        let d = dilatation(&snap, patch, p, order, &local)?;
        lo = lo.min(d.value);
        hi = hi.max(d.value);
        if let Some(c) = expect_constant {
            worst_dev = worst_dev.max((d.value - c).abs());
        }
        rows.push(vec![
            format!("{p:?}"),
            Table::cell(d.value),
            Table::cell(*d.per_radius.first().unwrap()),
            Table::cell(*d.per_radius.last().unwrap()),
        ]);
    }
    let pass = match expect_constant {
        Some(_) => worst_dev <= expect_tolerance,
        None => hi.is_finite(),
    };
    Ok((
        pass,
        format!("dil range [{lo:.4e}, {hi:.4e}], worst deviation {worst_dev:.2e}"),
        vec![Table {
            name: format!("dil_{name}"),
            invariant: "local sectional dilatation over K".into(),
            headers: ["x", "dil", "sup_largest_ball", "sup_smallest_ball"]
                .map(String::from)
                .to_vec(),
            rows,
            plot: None,
        }],
    ))
}

fn run_cover(
    compiled: &Compiled,
    region_spec: &crate::scenario::RegionSpec,
    resolution: usize,
    overlap: f64,
) -> Outcome {
    let region = region_spec.to_region()?;
    let report = admissible_check(&region, 4096, 16);
    let mut rows = Vec::new();
    if !report.admissible {
        let (t1, t0, x) = report.witness.clone().unwrap();
        return Ok((
            false,
            format!("region not flow admissible; witness ({t1}, {t0}, {x:?})"),
            vec![],
        ));
    }
    let cover = build_cover(&region, resolution, overlap)?;
    for (i, c) in cover.iter().enumerate() {
        rows.push(vec![
            i.to_string(),
            format!("[{}, {}]", c.final_times.lo, c.final_times.hi),
            format!("[{}, {}]", c.initial_times.lo, c.initial_times.hi),
            format!(
                "{:?}",
                c.space
                    .iter()
                    .map(|b| [b.lo, b.hi])
                    .collect::<Vec<_>>()
            ),
        ]);
    }
    let _ = &compiled.patch;
    Ok((
        true,
        format!(
            "admissible ({} samples); cover with {} cubes",
            report.samples_checked,
            cover.len()
        ),
        vec![Table {
            name: "cover".into(),
            invariant: "flow-admissible cover of the region".into(),
            headers: ["cube", "final_times", "initial_times", "space"]
                .map(String::from)
                .to_vec(),
            rows,
            plot: None,
        }],
    ))
}

fn run_glue(compiled: &Compiled, assignments: &[GlueAssignment], expect_violation: bool) -> Outcome {
    let patch = &compiled.patch;
    let opts = FlowOptions::default();
    let glue_tol = compiled.scenario.tolerances.glue;
    let spec = RecordGridSpec::new(
        compiled.scenario.grids.final_time_count,
        compiled.scenario.grids.initial_time_count,
        compiled.scenario.grids.k.counts.clone(),
    );
    let mut records = Vec::new();
    for (i, a) in assignments.iter().enumerate() {
        let cube = a.cube.to_cube()?;
        let spec_i = RecordGridSpec {
            space_counts: spec.space_counts.clone(),
            ..spec.clone()
        };
        let bound = field(compiled, &a.field).bound(&compiled.base_params);
        let rec = LocalFlowRecord::from_field(&bound, patch, cube, &spec_i, &opts, format!("glue:{i}"))?;
        records.push(rec);
    }
    let mut rows = Vec::new();
    match glue(records, patch, glue_tol) {
        Ok(element) => {
            for e in element.residuals() {
                rows.push(vec![
                    format!("{}-{}", e.i, e.j),
                    e.residual.map_or("disjoint".into(), Table::cell),
                ]);
            }
            Ok((
                !expect_violation,
                format!("glued {} records within {glue_tol:.1e}", element.records().len()),
                vec![Table {
                    name: "glue_residuals".into(),
                    invariant: "overlap condition on cover intersections".into(),
                    headers: ["pair", "residual"].map(String::from).to_vec(),
                    rows,
                    plot: None,
                }],
            ))
        }
        Err(PresheafError::OverlapViolation { i, j, residual }) => {
            rows.push(vec![format!("{i}-{j}"), Table::cell(residual)]);
            Ok((
                expect_violation,
                format!("overlap violation between {i} and {j}: residual {residual:.6e}"),
                vec![Table {
                    name: "glue_residuals".into(),
                    invariant: "overlap condition on cover intersections".into(),
                    headers: ["pair", "residual"].map(String::from).to_vec(),
                    rows,
                    plot: None,
                }],
            ))
        }
        Err(e) => Err(e.into()),
    }
}

fn sweep_record(
    bound: &dyn VectorField,
    patch: &Patch,
    t_final: f64,
    space: &[Interval],
    counts: &[usize],
    t_count: usize,
) -> Result<LocalFlowRecord, PresheafError> {
    let cube = Cube::new(
        Interval::new(0.0, t_final),
        Interval::new(0.0, 0.0),
        space.to_vec(),
    )?;
    LocalFlowRecord::from_field(
        bound,
        patch,
        cube,
        &RecordGridSpec::new(t_count, 1, counts.to_vec()),
        &FlowOptions::default(),
        "sweep",
    )
}

fn record_sup(rec: &LocalFlowRecord) -> f64 {
    let mut sup: f64 = 0.0;
    for &t1 in rec.t1_nodes() {
        for &t0 in rec.t0_nodes() {
            for x in cartesian_axes(rec.x_axes()) {
                if let Ok(v) = rec.value(t1, t0, &x) {
                    for c in v {
                        sup = sup.max(c.abs());
                    }
                }
            }
        }
    }
    sup
}

fn cartesian_axes(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
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

fn run_param_sweep(
    compiled: &Compiled,
    name: &str,
    function: &str,
    param_index: usize,
    points: usize,
    t_final: f64,
) -> Outcome {
    let f = field(compiled, name);
    let patch = &compiled.patch;
    let kb = &compiled.scenario.grids.k;
    let space: Vec<Interval> = kb.bounds.iter().map(|b| Interval::new(b[0], b[1])).collect();
    let coord_names: Vec<String> = (1..=patch.dim()).map(|i| format!("x{i}")).collect();
    let refs: Vec<&str> = coord_names.iter().map(|s| s.as_str()).collect();
    let test_fn = FieldExpr::parse(function, &refs)?;
    let t_count = compiled.scenario.grids.final_time_count;

    let base_params = compiled.base_params.clone();
    let base_bound = f.bound(&base_params);
    let rec0 = sweep_record(&base_bound, patch, t_final, &space, &kb.counts, t_count)?;
    let q_spec = FlowSeminormSpec {
        function: &test_fn,
        order: 0,
        space: &space,
        space_counts: &kb.counts,
        initial_times: Interval::new(0.0, 0.0),
        final_times: Interval::new(0.0, t_final),
    };
    let mut rows = Vec::new();
    let mut distances = Vec::new();
    let mut worst_ratio: f64 = 0.0;
    for k in 1..=points {
        let mut params = base_params.clone();
        params[param_index] += 0.5_f64.powi(k as i32);
        let bound = f.bound(&params);
        let rec = sweep_record(&bound, patch, t_final, &space, &kb.counts, t_count)?;
        let q = flow_seminorm(&rec, &rec0, patch, &q_spec)?;
        let delta = (params[param_index] - base_params[param_index]).abs();
        // Gronwall yardstick over the enlarged compact (measured flow image)
        let sup_image = record_sup(&rec).max(record_sup(&rec0));
        let p_abs = params[param_index].abs().max(base_params[param_index].abs());
        let bound_value = ((p_abs * t_final).exp() - 1.0) * delta * sup_image;
        let ratio = if bound_value > 0.0 { q / bound_value } else { 0.0 };
        worst_ratio = worst_ratio.max(ratio);
        distances.push(q);
        rows.push(vec![
            Table::cell(params[param_index]),
            Table::cell(delta),
            Table::cell(q),
            Table::cell(bound_value),
            Table::cell(ratio),
        ]);
    }
    let monotone = distances.windows(2).all(|w| w[1] < w[0]);
    let slack = compiled.scenario.tolerances.gronwall_slack;
    let pass = monotone && worst_ratio <= slack;
    Ok((
        pass,
        format!(
            "{points}-point dyadic sweep; monotone = {monotone}; worst q/bound ratio {worst_ratio:.3} (slack {slack})"
        ),
        vec![Table {
            name: format!("param_sweep_{name}"),
            invariant: "parameter-to-flow continuity with Gronwall bound".into(),
            headers: ["p", "param_distance", "q_distance", "gronwall_bound", "ratio"]
                .map(String::from)
                .to_vec(),
            rows,
            plot: Some((1, 2)),
        }],
    ))
}

fn run_exp_check(
    compiled: &Compiled,
    name: &str,
    perturbation: &str,
    points: usize,
    epsilon0: f64,
    t_final: f64,
) -> Outcome {
    let f = field(compiled, name);
    let patch = &compiled.patch;
    let kb = &compiled.scenario.grids.k;
    let space: Vec<Interval> = kb.bounds.iter().map(|b| Interval::new(b[0], b[1])).collect();
    let dim = patch.dim();
    if dim != 1 {
        anyhow::bail!("exp-check currently runs on 1-dimensional patches");
    }
    let t_count = compiled.scenario.grids.final_time_count;
    let coord = FieldExpr::parse("x1", &["x1"])?;
    let base_bound = f.bound(&compiled.base_params);
    let rec0 = sweep_record(&base_bound, patch, t_final, &space, &kb.counts, t_count)?;
    let q_spec = FlowSeminormSpec {
        function: &coord,
        order: 0,
        space: &space,
        space_counts: &kb.counts,
        initial_times: Interval::new(0.0, 0.0),
        final_times: Interval::new(0.0, t_final),
    };
    // measured Lipschitz constant and perturbation sup on the flow image
    let image_hi = record_sup(&rec0);
    let probe = CompactGrid::uniform(
        patch,
        &[Interval::new(
            (-image_hi).max(patch.bounds()[0].lo),
            image_hi.min(patch.bounds()[0].hi),
        )],
        &[65],
    )?;
    let mut lip: f64 = 0.0;
    let mut pert_sup: f64 = 0.0;
    let pert_field = TimeVaryingField::vector_field(&[perturbation], 1, f.n_params())?;
    let pert_bound = pert_field.bound(&compiled.base_params);
    for p in probe.points() {
        let g = base_bound.component_gradient(0.0, p, 0)?;
        lip = lip.max(g[0].abs());
        pert_sup = pert_sup.max(pert_bound.eval_vec(0.0, p)?[0].abs());
    }
    let gronwall = (lip * t_final).exp();
    let mut rows = Vec::new();
    let mut worst_ratio: f64 = 0.0;
    for j in 0..points {
        let eps = epsilon0 * 0.5_f64.powi(j as i32);
        let sources: Vec<String> = f
            .components()
            .iter()
            .map(|c| format!("({c}) + ({eps:?})*({perturbation})"))
            .collect();
        let refs: Vec<&str> = sources.iter().map(|s| s.as_str()).collect();
        let perturbed = TimeVaryingField::vector_field(&refs, dim, f.n_params())?;
        let bound = perturbed.bound(&compiled.base_params);
        let rec = sweep_record(&bound, patch, t_final, &space, &kb.counts, t_count)?;
        let q = flow_seminorm(&rec, &rec0, patch, &q_spec)?;
        let p_pert = eps * pert_sup * t_final;
        let ratio = q / p_pert;
        worst_ratio = worst_ratio.max(ratio);
        rows.push(vec![
            Table::cell(eps),
            Table::cell(q),
            Table::cell(p_pert),
            Table::cell(ratio),
        ]);
    }
    let slack = compiled.scenario.tolerances.gronwall_slack;
    let pass = worst_ratio <= slack * gronwall;
    Ok((
        pass,
        format!(
            "measured L = {lip:.4}, gronwall constant {gronwall:.4}; worst q/perturbation ratio {worst_ratio:.4}"
        ),
        vec![Table {
            name: format!("exp_check_{name}"),
            invariant: "forward continuity of exp against the Gronwall constant".into(),
            headers: ["epsilon", "q_distance", "perturbation_seminorm", "ratio"]
                .map(String::from)
                .to_vec(),
            rows,
            plot: Some((0, 3)),
        }],
    ))
}

fn run_inverse_check(
    compiled: &Compiled,
    name: &str,
    cube_spec: &crate::scenario::CubeSpec,
    h: f64,
) -> Outcome {
    let f = field(compiled, name);
    let patch = &compiled.patch;
    let cube = cube_spec.to_cube()?;
    let bound = f.bound(&compiled.base_params);
    let opts = FlowOptions::default();
    let grid = RecordGridSpec::new(
        compiled.scenario.grids.final_time_count,
        compiled.scenario.grids.initial_time_count.max(3),
        compiled.scenario.grids.k.counts.clone(),
    );
    let rec = LocalFlowRecord::from_field(&bound, patch, cube.clone(), &grid, &opts, "inverse")?;
    let reconstructed = exp_inverse(&rec, patch, h, 1e-6)?;

    // field-side round trip on the K grid at a few times
    let k = k_grid(compiled)?;
    let mut field_err: f64 = 0.0;
    let mut out = vec![0.0; patch.dim()];
    let t_probe = [
        cube.final_times.lo,
        cube.final_times.midpoint(),
        0.5 * (cube.final_times.midpoint() + cube.final_times.hi),
    ];
    for p in k.points() {
        for &t in &t_probe {
            reconstructed.eval_into(t, p, &mut out)?;
            let truth = bound.eval_vec(t, p)?;
            for (a, b) in out.iter().zip(&truth) {
                field_err = field_err.max((a - b).abs());
            }
        }
    }

    // flow-side round trip
    let rec_back =
        LocalFlowRecord::from_field(&reconstructed, patch, cube.clone(), &grid, &opts, "re-exp")?;
    let coord_names: Vec<String> = (1..=patch.dim()).map(|i| format!("x{i}")).collect();
    let refs: Vec<&str> = coord_names.iter().map(|s| s.as_str()).collect();
    let k_bounds: Vec<Interval> = compiled
        .scenario
        .grids
        .k
        .bounds
        .iter()
        .map(|b| Interval::new(b[0], b[1]))
        .collect();
    let mut flow_err: f64 = 0.0;
    for s in &refs {
        let coord = FieldExpr::parse(s, &refs)?;
        let spec = FlowSeminormSpec {
            function: &coord,
            order: 0,
            space: &k_bounds,
            space_counts: &compiled.scenario.grids.k.counts,
            initial_times: cube.initial_times,
            final_times: cube.final_times,
        };
        flow_err = flow_err.max(flow_seminorm(&rec, &rec_back, patch, &spec)?);
    }
    let t_field = compiled.scenario.tolerances.field_round_trip;
    let t_flow = compiled.scenario.tolerances.flow_round_trip;
    let pass = field_err <= t_field && flow_err <= t_flow;
    Ok((
        pass,
        format!("field round trip {field_err:.3e} (tol {t_field:.1e}); flow round trip {flow_err:.3e} (tol {t_flow:.1e})"),
        vec![Table {
            name: format!("inverse_check_{name}"),
            invariant: "exp and its inverse compose to the identity".into(),
            headers: ["quantity", "value", "tolerance"].map(String::from).to_vec(),
            rows: vec![
                vec!["field_round_trip".into(), Table::cell(field_err), Table::cell(t_field)],
                vec!["flow_round_trip".into(), Table::cell(flow_err), Table::cell(t_flow)],
            ],
            plot: None,
        }],
    ))
}

fn run_metric_equiv(compiled: &Compiled, g2_sources: &[String], pairs: usize) -> Outcome {
    let patch = &compiled.patch;
    let dim = patch.dim();
    let coord_names: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
    let refs: Vec<&str> = coord_names.iter().map(|s| s.as_str()).collect();
    let exprs = g2_sources
        .iter()
        .map(|s| FieldExpr::parse(s, &refs))
        .collect::<Result<Vec<_>, _>>()?;
    let g2 = MetricField::from_exprs(dim, exprs)?;
    let grid = k_grid(compiled)?;
    let r = metric_equivalence_constant(
        patch,
        patch.metric(),
        &g2,
        &grid,
        pairs,
        &DistanceOptions::default(),
    )?;
    let pass = r.worst_ratio <= r.constant * (1.0 + 1e-6) && r.constant >= 1.0;
    Ok((
        pass,
        format!(
            "c = {:.6}, worst sampled ratio {:.6} over {} pairs",
            r.constant, r.worst_ratio, r.pairs_tested
        ),
        vec![Table {
            name: "metric_equiv".into(),
            invariant: "two-sided distance comparison bound".into(),
            headers: ["constant", "worst_ratio", "pairs"].map(String::from).to_vec(),
            rows: vec![vec![
                Table::cell(r.constant),
                Table::cell(r.worst_ratio),
                r.pairs_tested.to_string(),
            ]],
            plot: None,
        }],
    ))
}
