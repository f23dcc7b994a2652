//! Property tests: seminorm axioms, jet invariants, distance axioms,
//! parser round trips, and the sampled Lipschitz lemmas.

use flowpresheaf_core::expr::FieldExpr;
use flowpresheaf_core::field::TimeVaryingField;
use flowpresheaf_core::geometry::{geodesic_distance, DistanceOptions};
use flowpresheaf_core::jet::{covariant_jet_tower, jet_fibre_norm};
use flowpresheaf_core::patch::{CompactGrid, Interval, Patch};
use flowpresheaf_core::seminorm::{
    dilatation_sup, seminorm, time_seminorm, RegularityClass, SeminormOptions,
};
use proptest::prelude::*;

fn patch_1d() -> Patch {
    Patch::euclidean(vec![Interval::new(-2.0, 2.0)])
}

fn grid(patch: &Patch, lo: f64, hi: f64, n: usize) -> CompactGrid {
    CompactGrid::uniform(patch, &[Interval::new(lo, hi)], &[n]).unwrap()
}

/// Small random expression trees over x1 with bounded coefficients; smooth
/// everywhere on the patch.
fn arb_expr_source() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        Just("x1".to_string()),
        (-2.0..2.0_f64).prop_map(|c| format!("{c:.3}")),
    ];
    leaf.prop_recursive(3, 16, 4, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} + {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} * {b})")),
            inner.clone().prop_map(|a| format!("sin({a})")),
            inner.clone().prop_map(|a| format!("cos({a})")),
            inner.clone().prop_map(|a| format!("tanh({a})")),
            inner.prop_map(|a| format!("(0.3 * {a})")),
        ]
    })
}

fn field_from(src: &str) -> TimeVaryingField {
    TimeVaryingField::vector_field(&[src], 1, 0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn seminorm_homogeneity_and_triangle(src_a in arb_expr_source(), src_b in arb_expr_source(), c in -3.0..3.0_f64, m in 0usize..3) {
        let patch = patch_1d();
        let k = grid(&patch, -1.0, 1.0, 9);
        let opts = SeminormOptions::default();
        let class = RegularityClass::Finite { m };
        let fa = field_from(&src_a);
        let fb = field_from(&src_b);
        let scaled = field_from(&format!("({c:?}) * ({src_a})"));
        let sum = field_from(&format!("({src_a}) + ({src_b})"));
        let pa = seminorm(&fa.snapshot(0.0, &[]), &patch, &class, &k, &opts).unwrap().value;
        let pb = seminorm(&fb.snapshot(0.0, &[]), &patch, &class, &k, &opts).unwrap().value;
        let pc = seminorm(&scaled.snapshot(0.0, &[]), &patch, &class, &k, &opts).unwrap().value;
        let ps = seminorm(&sum.snapshot(0.0, &[]), &patch, &class, &k, &opts).unwrap().value;
        let tol = 1e-9 * (1.0 + pa + pb);
        prop_assert!((pc - c.abs() * pa).abs() <= tol, "homogeneity: {} vs {}", pc, c.abs() * pa);
        prop_assert!(ps <= pa + pb + tol, "triangle: {} vs {}", ps, pa + pb);
    }

    #[test]
    fn seminorm_grid_and_order_monotone(src in arb_expr_source(), m in 0usize..3) {
        let patch = patch_1d();
        let small = grid(&patch, -0.5, 0.5, 5);
        let large = {
            // a strict superset of the small grid's points
            let mut pts = small.points().to_vec();
            for p in grid(&patch, -1.0, 1.0, 7).points() {
                pts.push(p.clone());
            }
            CompactGrid::new(&patch, pts, small.spacing()).unwrap()
        };
        let opts = SeminormOptions::default();
        let f = field_from(&src);
        let snap = f.snapshot(0.0, &[]);
        let class_m = RegularityClass::Finite { m };
        let class_m1 = RegularityClass::Finite { m: m + 1 };
        let p_small = seminorm(&snap, &patch, &class_m, &small, &opts).unwrap().value;
        let p_large = seminorm(&snap, &patch, &class_m, &large, &opts).unwrap().value;
        let p_higher = seminorm(&snap, &patch, &class_m1, &small, &opts).unwrap().value;
        prop_assert!(p_small <= p_large + 1e-12, "grid monotonicity");
        prop_assert!(p_small <= p_higher + 1e-12, "order monotonicity");
    }

    #[test]
    fn jet_norm_monotone_in_order(src in arb_expr_source(), x in -1.0..1.0_f64) {
        let patch = patch_1d();
        let f = field_from(&src);
        let snap = f.snapshot(0.0, &[]);
        let g = patch.metric().at(&[x]).unwrap();
        let mut prev = 0.0;
        for m in 0..5 {
            let tower = covariant_jet_tower(&snap, &patch, &[x], m).unwrap();
            let norm = jet_fibre_norm(&tower, &g).unwrap();
            prop_assert!(norm + 1e-12 >= prev, "order {m}: {norm} < {prev}");
            prev = norm;
        }
    }

    #[test]
    fn distance_symmetry_and_triangle(a in -1.5..1.5_f64, b in -1.5..1.5_f64, c in -1.5..1.5_f64) {
        // conformal metric keeps geodesics nontrivial but 1-D exact
        let metric = flowpresheaf_core::patch::MetricField::from_exprs(
            1,
            vec![FieldExpr::parse("exp(x1)", &["x1"]).unwrap()],
        )
        .unwrap();
        let patch = Patch::new(
            vec![Interval::new(-2.0, 2.0)],
            metric,
            flowpresheaf_core::patch::ChristoffelField::LeviCivita,
        )
        .unwrap();
        let opts = DistanceOptions::default();
        let d = |p: f64, q: f64| geodesic_distance(&patch, None, &[p], &[q], &opts).unwrap().length;
        if (a - b).abs() > 1e-3 {
            let dab = d(a, b);
            let dba = d(b, a);
            prop_assert!((dab - dba).abs() <= 2.0 * opts.tolerance + 1e-9, "symmetry {dab} vs {dba}");
            if (b - c).abs() > 1e-3 && (a - c).abs() > 1e-3 {
                let dac = d(a, c);
                let dbc = d(b, c);
                prop_assert!(dac <= dab + dbc + 3.0 * opts.tolerance, "triangle");
            }
        }
    }

    #[test]
    fn parser_round_trip(src in arb_expr_source()) {
        let e = FieldExpr::parse(&src, &["x1"]).unwrap();
        let printed = e.to_string();
        let again = FieldExpr::parse(&printed, &["x1"]).unwrap();
        prop_assert_eq!(e, again);
    }
}

/// Sampled form of the time-varying Lipschitz property: a single integrable
/// modulus from the dilatation dominates all difference quotients over K.
#[test]
fn lipschitz_modulus_dominates_difference_quotients() {
    let patch = patch_1d();
    let k = grid(&patch, -1.0, 1.0, 9);
    let f = TimeVaryingField::scalar_function("sin(3*x1)*(1 + 0.5*cos(t))", 1, 0).unwrap();
    let opts = SeminormOptions::default();
    let times: Vec<f64> = (0..7).map(|i| i as f64 / 6.0).collect();
    for &t in &times {
        let snap = f.snapshot(t, &[]);
        // modulus from the dilatation route
        let l_t = dilatation_sup(&snap, &patch, &k, 0, &opts.dilatation).unwrap();
        // difference quotients, flat metric: d(x, y) = |x - y|
        for (i, p) in k.points().iter().enumerate() {
            for q in k.points().iter().skip(i + 1) {
                let fp = snap.eval(p).unwrap()[0];
                let fq = snap.eval(q).unwrap()[0];
                let quotient = (fp - fq).abs() / (p[0] - q[0]).abs();
                assert!(
                    quotient <= l_t * (1.0 + 1e-6) + 1e-9,
                    "t = {t}: quotient {quotient} exceeds modulus {l_t}"
                );
            }
        }
    }
}

/// Sampled form of the parameter-dependent Lipschitz property: one constant
/// C works across a parameter neighborhood after time integration.
#[test]
fn parameter_uniform_integrated_lipschitz_bound() {
    let patch = patch_1d();
    let k = grid(&patch, -1.0, 1.0, 7);
    // f(t, x, p) = p sin(2 x) (1 + t): the dilatation scales with |p|
    let f = TimeVaryingField::scalar_function("p1*sin(2*x1)*(1 + t)", 1, 1).unwrap();
    let opts = SeminormOptions::default();
    let time = Interval::new(0.0, 1.0);
    let params: Vec<f64> = (0..5).map(|i| 0.8 + 0.1 * i as f64).collect();

    // C from the dilatation route over the whole parameter neighborhood
    let mut c_bound: f64 = 0.0;
    for &p in &params {
        let quad = |t: f64| {
            let snap = f.snapshot(t, &[p]);
            dilatation_sup(&snap, &patch, &k, 0, &opts.dilatation).unwrap()
        };
        // trapezoid over a fine time grid is enough for an upper estimate
        let n = 17;
        let h = time.length() / (n as f64 - 1.0);
        let mut integral = 0.0;
        for i in 0..n {
            let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            integral += w * h * quad(time.lo + i as f64 * h);
        }
        c_bound = c_bound.max(integral);
    }

    // direct integrated difference quotients stay below C
    let n = 33;
    let h = time.length() / (n as f64 - 1.0);
    for &p in &params {
        for (i, a) in k.points().iter().enumerate() {
            for b in k.points().iter().skip(i + 1) {
                let mut integral = 0.0;
                for j in 0..n {
                    let t = time.lo + j as f64 * h;
                    let w = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
                    let fa = f.eval(t, a, &[p]).unwrap()[0];
                    let fb = f.eval(t, b, &[p]).unwrap()[0];
                    integral += w * h * (fa - fb).abs();
                }
                let bound = c_bound * (a[0] - b[0]).abs();
                assert!(
                    integral <= bound * (1.0 + 1e-2) + 1e-9,
                    "p = {p}: integrated difference {integral} exceeds {bound}"
                );
            }
        }
    }
}

/// Dilatation continuity surrogate: adjacent-sample dilatation jumps shrink
/// linearly as the grid is refined.
#[test]
fn dilatation_jumps_shrink_with_grid() {
    let patch = patch_1d();
    let f = TimeVaryingField::vector_field(&["sin(x1)"], 1, 0).unwrap();
    let snap = f.snapshot(0.0, &[]);
    let opts = flowpresheaf_core::seminorm::DilatationOptions::default();
    let mut max_jumps = Vec::new();
    for halving in 0..4 {
        let n = 8 * (1 << halving) + 1;
        let k = grid(&patch, -1.0, 1.0, n);
        let values: Vec<f64> = k
            .points()
            .iter()
            .map(|p| {
                flowpresheaf_core::seminorm::dilatation(&snap, &patch, p, 0, &opts)
                    .unwrap()
                    .value
            })
            .collect();
        let max_jump = values
            .windows(2)
            .map(|w| (w[1] - w[0]).abs())
            .fold(0.0, f64::max);
        max_jumps.push(max_jump);
    }
    for w in max_jumps.windows(2) {
        assert!(
            w[1] <= 0.7 * w[0],
            "jumps did not shrink: {:?}",
            max_jumps
        );
    }
}

/// Smooth-class reports carry the whole truncated vector and it is stable
/// under raising the truncation.
#[test]
fn smooth_class_vector_and_analytic_truncation_stability() {
    let patch = patch_1d();
    let k = grid(&patch, 0.0, 1.0, 11);
    let f = TimeVaryingField::vector_field(&["exp(x1)"], 1, 0).unwrap();
    let snap = f.snapshot(0.0, &[]);
    let opts = SeminormOptions::default();
    let smooth = seminorm(
        &snap,
        &patch,
        &RegularityClass::Smooth { m_max: 6 },
        &k,
        &opts,
    )
    .unwrap();
    let per = smooth.per_order.unwrap();
    assert_eq!(per.len(), 7);
    for w in per.windows(2) {
        assert!(w[0] <= w[1] + 1e-12, "smooth family must be monotone");
    }

    let weights = |m: usize| -> Vec<f64> { (0..=m as i32).map(|j| 0.5_f64.powi(j + 1)).collect() };
    let v20 = seminorm(
        &snap,
        &patch,
        &RegularityClass::RealAnalytic {
            weights: weights(20),
            m_max: 20,
        },
        &k,
        &opts,
    )
    .unwrap()
    .value;
    let v30 = seminorm(
        &snap,
        &patch,
        &RegularityClass::RealAnalytic {
            weights: weights(30),
            m_max: 30,
        },
        &k,
        &opts,
    )
    .unwrap()
    .value;
    assert!((v20 - v30).abs() <= 1e-6, "truncation moved: {v20} vs {v30}");
}

/// The integrated seminorm is additive over time subintervals.
#[test]
fn time_seminorm_additivity() {
    let patch = patch_1d();
    let k = grid(&patch, 0.0, 1.0, 7);
    let f = TimeVaryingField::vector_field(&["(1 + t^2)*x1"], 1, 0).unwrap();
    let opts = SeminormOptions::default();
    let class = RegularityClass::Finite { m: 0 };
    let whole = time_seminorm(&f, &patch, &class, &k, Interval::new(0.0, 1.0), &[], 1e-10, &opts)
        .unwrap();
    let left = time_seminorm(&f, &patch, &class, &k, Interval::new(0.0, 0.4), &[], 1e-10, &opts)
        .unwrap();
    let right = time_seminorm(&f, &patch, &class, &k, Interval::new(0.4, 1.0), &[], 1e-10, &opts)
        .unwrap();
    assert!((whole - left - right).abs() <= 1e-8);
}
