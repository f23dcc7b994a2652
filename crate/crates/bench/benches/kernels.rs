use criterion::{criterion_group, criterion_main, Criterion};
use flowpresheaf_core::field::TimeVaryingField;
use flowpresheaf_core::flow::{flow_map, rk_oracle, FlowOptions};
use flowpresheaf_core::jet::covariant_jet_tower;
use flowpresheaf_core::patch::{CompactGrid, Interval, Patch};
use flowpresheaf_core::seminorm::{seminorm, RegularityClass, SeminormOptions};
use std::hint::black_box;

fn bench_flows(c: &mut Criterion) {
    let patch = Patch::euclidean(vec![Interval::new(-4.0, 4.0)]);
    let field = TimeVaryingField::vector_field(&["sin(x1) + t"], 1, 0).unwrap();
    let bound = field.bound(&[]);
    let opts = FlowOptions::default();
    c.bench_function("picard_flow_sine_drift", |b| {
        b.iter(|| {
            flow_map(
                &bound,
                &patch,
                black_box(0.5),
                0.0,
                black_box(&[0.3]),
                &opts,
            )
            .unwrap()
        })
    });
    c.bench_function("rk_oracle_sine_drift_2000", |b| {
        b.iter(|| rk_oracle(&bound, &patch, black_box(0.5), 0.0, black_box(&[0.3]), 2000).unwrap())
    });
}

fn bench_jets(c: &mut Criterion) {
    let patch = Patch::euclidean(vec![Interval::new(-2.0, 2.0), Interval::new(-2.0, 2.0)]);
    let field =
        TimeVaryingField::vector_field(&["sin(x1)*x2 + 0.3*x1^2", "exp(0.2*x1) - x2^3"], 2, 0)
            .unwrap();
    let snap = field.snapshot(0.0, &[]);
    c.bench_function("covariant_jet_tower_2d_m4", |b| {
        b.iter(|| covariant_jet_tower(&snap, &patch, black_box(&[0.4, -0.7]), 4).unwrap())
    });
}

fn bench_seminorms(c: &mut Criterion) {
    let patch = Patch::euclidean(vec![Interval::new(-2.0, 2.0)]);
    let grid = CompactGrid::uniform(&patch, &[Interval::new(0.0, 1.0)], &[21]).unwrap();
    let field = TimeVaryingField::vector_field(&["exp(x1)"], 1, 0).unwrap();
    let snap = field.snapshot(0.0, &[]);
    let opts = SeminormOptions::default();
    let class = RegularityClass::RealAnalytic {
        weights: (0..13).map(|j| 0.5_f64.powi(j + 1)).collect(),
        m_max: 12,
    };
    c.bench_function("real_analytic_seminorm_m12", |b| {
        b.iter(|| seminorm(&snap, &patch, &class, &grid, &opts).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = bench_flows, bench_jets, bench_seminorms
}
criterion_main!(benches);
