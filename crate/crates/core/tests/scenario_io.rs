use std::path::PathBuf;

use proptest::prelude::*;

use sensorfield::scenario::{emit_grid_csv, read_grid_csv, write_grid_csv, ResultRecord};
use sensorfield::{load_scenario, Error, InterpolationMethod, Scenario, TargetSpec};

fn fixture(name: &str) -> PathBuf {
    [env!("CARGO_MANIFEST_DIR"), "..", "..", "scenarios", name]
        .iter()
        .collect()
}

const VALID: [&str; 6] = [
    "grid3.json",
    "grid5.json",
    "magnetic.json",
    "gravitic.json",
    "stencil1d.json",
    "single.json",
];

#[test]
fn fixtures_round_trip_through_json() {
    for name in VALID {
        let s = load_scenario(fixture(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
        let text = s.to_json_string().unwrap();
        assert_eq!(Scenario::from_json_str(&text).unwrap(), s, "{name}");
    }
}

#[test]
fn duplicate_sensor_is_reported_with_its_path() {
    match load_scenario(fixture("duplicate.json")) {
        Err(Error::Scenario { path, .. }) => assert!(path.starts_with("sensors["), "{path}"),
        other => panic!("expected a scenario error, got {other:?}"),
    }
}

fn edited(name: &str, edit: impl FnOnce(&mut serde_json::Value)) -> Result<Scenario, Error> {
    let text = std::fs::read_to_string(fixture(name)).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    edit(&mut v);
    Scenario::from_json_str(&v.to_string())
}

fn error_path(r: Result<Scenario, Error>) -> String {
    match r {
        Err(Error::Scenario { path, .. }) => path,
        other => panic!("expected a scenario error, got {other:?}"),
    }
}

#[test]
fn diagnostics_point_at_the_offending_field() {
    let p = error_path(edited("grid3.json", |v| v["surplus"] = 1.into()));
    assert_eq!(p, "surplus");
    let p = error_path(edited("grid3.json", |v| v["version"] = 7.into()));
    assert_eq!(p, "version");
    let p = error_path(edited("grid3.json", |v| {
        v["sensors"][2] = serde_json::json!([0.0])
    }));
    assert!(p.starts_with("sensors"), "{p}");
    let p = error_path(edited("grid3.json", |v| {
        v["field_values"].as_array_mut().unwrap().pop();
    }));
    assert_eq!(p, "field_values");
    let p = error_path(edited("grid3.json", |v| {
        v["targets"][0] = serde_json::json!({"kind": "interpolate", "point": [1.0]})
    }));
    assert_eq!(p, "targets[0]");
    let p = error_path(edited("magnetic.json", |v| {
        v["resources"]["N"] = (-1.0).into()
    }));
    assert_eq!(p, "resources.N");
}

#[test]
fn automatic_lower_set_is_resolved() {
    let s = load_scenario(fixture("grid3.json")).unwrap();
    let resolved = s.resolve_model().unwrap();
    assert_eq!(resolved.basis.len(), 9);
    assert!(resolved.relabeling.is_some());
}

#[test]
fn result_records_round_trip() {
    let s = load_scenario(fixture("magnetic.json")).unwrap();
    let ctx = s.context(InterpolationMethod::Direct).unwrap();
    let e = ctx.estimate(&TargetSpec::Isolate { index: 2 }).unwrap();
    let strategies = [sensorfield::allocation::Strategy::NonlocalQuantum];
    let r = ResultRecord::new(
        0,
        &e,
        s.field_values.as_deref(),
        s.resources.as_ref(),
        &strategies,
    )
    .unwrap();
    assert!(r.variances.contains_key(&strategies[0].name()));
    let text = serde_json::to_string(&r).unwrap();
    assert_eq!(serde_json::from_str::<ResultRecord>(&text).unwrap(), r);
}

fn rows() -> impl Strategy<Value = (usize, Vec<(Vec<f64>, f64)>)> {
    (1usize..=3).prop_flat_map(|dim| {
        let value = prop_oneof![
            -1e300f64..1e300,
            -1.0f64..1.0,
            Just(0.0),
            Just(-0.0),
            Just(f64::MIN_POSITIVE),
            Just(5e-324),
        ];
        (
            Just(dim),
            prop::collection::vec((prop::collection::vec(value.clone(), dim), value), 0..20),
        )
    })
}

proptest! {
    #[test]
    fn grid_csv_round_trips_bit_exactly((dim, rows) in rows()) {
        let mut buf = Vec::new();
        write_grid_csv(&mut buf, dim, &rows).unwrap();
        let back = read_grid_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back.len(), rows.len());
        for ((p, v), (q, w)) in rows.iter().zip(&back) {
            prop_assert_eq!(v.to_bits(), w.to_bits());
            prop_assert_eq!(p.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), q.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        }
    }
}

#[test]
fn grid_csv_file_has_a_header() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("map.csv");
    emit_grid_csv(&[(vec![0.5, 1.0], 2.0)], 2, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("x1,x2,value\n"), "{text}");
    assert!(write_grid_csv(Vec::new(), 3, &[(vec![0.5], 1.0)]).is_err());
}
