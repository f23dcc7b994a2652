//! Presheaf elements serialize to JSON and reload without altering a single
//! bit of any query result; restriction to a cover cube is the stored
//! record itself.

use flowpresheaf_core::field::TimeVaryingField;
use flowpresheaf_core::flow::FlowOptions;
use flowpresheaf_core::patch::{Interval, Patch};
use flowpresheaf_core::presheaf::{glue, Cube, LocalFlowRecord, PresheafElement, RecordGridSpec};

fn element() -> (Patch, PresheafElement) {
    let patch = Patch::euclidean(vec![Interval::new(-4.0, 4.0)]);
    let field = TimeVaryingField::vector_field(&["sin(x1) + t"], 1, 0).unwrap();
    let bound = field.bound(&[]);
    let opts = FlowOptions::default();
    let times = (Interval::new(0.0, 0.2), Interval::new(0.0, 0.1));
    let spec = RecordGridSpec::new(13, 3, vec![9]);
    // spatially aligned lattices (spacing 0.15) so overlaps compare at
    // shared nodes
    let cube_a = Cube::new(times.0, times.1, vec![Interval::new(-1.0, 0.2)]).unwrap();
    let cube_b = Cube::new(times.0, times.1, vec![Interval::new(-0.25, 0.95)]).unwrap();
    let rec_a = LocalFlowRecord::from_field(&bound, &patch, cube_a, &spec, &opts, "a").unwrap();
    let rec_b = LocalFlowRecord::from_field(&bound, &patch, cube_b, &spec, &opts, "b").unwrap();
    let element = glue(vec![rec_a, rec_b], &patch, 1e-6).unwrap();
    (patch, element)
}

#[test]
fn json_round_trip_reproduces_queries_bit_for_bit() {
    let (_patch, element) = element();
    let payload = serde_json::to_string(&element).unwrap();
    let reloaded: PresheafElement = serde_json::from_str(&payload).unwrap();
    // probe on- and off-node queries across the union
    let mut checked = 0;
    for &t1 in [0.0, 0.05, 0.123456789, 0.2].iter() {
        for &t0 in [0.0, 0.037, 0.1].iter() {
            for &x in [-0.9, -0.1, 0.0, 0.64, 1.0].iter() {
                let a = element.query(t1, t0, &[x]);
                let b = reloaded.query(t1, t0, &[x]);
                match (a, b) {
                    (Ok(va), Ok(vb)) => {
                        assert!(
                            va.iter().zip(&vb).all(|(p, q)| p.to_bits() == q.to_bits()),
                            "bit mismatch at ({t1}, {t0}, {x}): {va:?} vs {vb:?}"
                        );
                        checked += 1;
                    }
                    (Err(_), Err(_)) => {}
                    other => panic!("containment disagreement at ({t1}, {t0}, {x}): {other:?}"),
                }
            }
        }
    }
    assert!(checked > 30, "too few comparable queries: {checked}");
    // residual table survives too
    assert_eq!(element.residuals().len(), reloaded.residuals().len());
}

#[test]
fn restriction_returns_the_stored_record_exactly() {
    let (_patch, element) = element();
    for (k, rec) in element.records().iter().enumerate() {
        let restricted = element.restrict(k);
        assert_eq!(restricted.t1_nodes(), rec.t1_nodes());
        assert_eq!(restricted.t0_nodes(), rec.t0_nodes());
        // every stored sample is identical
        for (it1, &t1) in rec.t1_nodes().iter().enumerate() {
            let _ = it1;
            for &t0 in rec.t0_nodes() {
                for &x in rec.x_axes()[0].iter() {
                    let a = restricted.value(t1, t0, &[x]).unwrap();
                    let b = rec.value(t1, t0, &[x]).unwrap();
                    assert_eq!(a[0].to_bits(), b[0].to_bits());
                }
            }
        }
    }
}
