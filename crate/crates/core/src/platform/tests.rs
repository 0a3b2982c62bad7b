use proptest::prelude::*;

use super::*;
use crate::model::{CommandVerb, ConnectionPattern, Origin};

fn m(tenant: &str, device: &str, sensor: &str, ts: u64, value: f64) -> Measurement {
    Measurement::new(tenant, device, sensor, ts, value, "bar", Origin::Native).unwrap()
}

fn device(id: &str, sensors: &[&str]) -> DeviceDescriptor {
    DeviceDescriptor::new(
        id,
        Origin::Via(ConnectionPattern::StandardAgent),
        sensors.iter().map(|s| SensorSpec::new(*s, "bar", 1_000)).collect(),
    )
}

/// operator -> {acme, globex}; acme owns c1 (p, t), globex owns g1 (p).
fn fixture() -> Platform {
    let mut p = Platform::new();
    p.create_tenant("operator", None, true, ["monitor", "rules"]).unwrap();
    p.create_tenant("acme", Some("operator"), false, ["monitor"]).unwrap();
    p.create_tenant("globex", Some("operator"), false, ["monitor"]).unwrap();
    p.register_device("acme", device("c1", &["p", "t"])).unwrap();
    p.register_device("globex", device("g1", &["p"])).unwrap();
    p.activate("c1").unwrap();
    p.activate("g1").unwrap();
    p
}

fn rule(id: &str, tenant: &str, sensor: &str, condition: Condition) -> SmartRule {
    SmartRule {
        rule_id: id.into(),
        tenant_id: tenant.into(),
        predicate: RulePredicate {
            sensor_id: sensor.into(),
            device_id: None,
            condition,
        },
        action: RuleAction::EmitEvent { name: format!("{id}-fired") },
        enabled: true,
    }
}

#[test]
fn accepts_active_declared_sensor() {
    let mut p = fixture();
    let r = p.ingest(m("acme", "c1", "p", 10, 4.0)).unwrap();
    assert_eq!(r.seq, 1);
    assert_eq!(p.hot_len(), 1);
    let r = p.ingest(m("acme", "c1", "t", 11, 20.0)).unwrap();
    assert_eq!(r.seq, 2);
}

#[test]
fn rejection_reasons() {
    let mut p = fixture();
    p.register_device("acme", device("c2", &["p"])).unwrap();
    let cases = [
        (m("acme", "nope", "p", 1, 1.0), "UNKNOWN_DEVICE"),
        (m("acme", "c2", "p", 1, 1.0), "INACTIVE_DEVICE"),
        (m("acme", "c1", "x", 1, 1.0), "UNKNOWN_SENSOR"),
        (m("globex", "c1", "p", 1, 1.0), "TENANT_MISMATCH"),
    ];
    for (meas, code) in cases {
        assert_eq!(p.ingest(meas).unwrap_err().code(), code);
    }
    assert_eq!(p.hot_len(), 0);
    let t = p.totals();
    assert_eq!((t.submitted, t.accepted, t.rejected), (4, 0, 4));
}

#[test]
fn decommissioned_device_rejected() {
    let mut p = fixture();
    p.advance_lifecycle("c1", Lifecycle::Decommissioned).unwrap();
    assert!(matches!(
        p.ingest(m("acme", "c1", "p", 1, 1.0)),
        Err(IngestError::InactiveDevice { state: Lifecycle::Decommissioned, .. })
    ));
    assert!(p.activate("c1").is_err());
}

#[test]
fn conservation_over_ten_thousand() {
    let mut p = fixture();
    let mut expected_accept = 0u64;
    for i in 0..10_000u64 {
        let meas = match i % 5 {
            0 => m("acme", "c1", "p", i, 1.0),
            1 => m("globex", "g1", "p", i, 2.0),
            2 => m("acme", "c1", "zz", i, 1.0),
            3 => m("acme", "g1", "p", i, 1.0),
            _ => m("acme", "ghost", "p", i, 1.0),
        };
        if i % 5 < 2 {
            expected_accept += 1;
        }
        let _ = p.ingest(meas);
    }
    let t = p.totals();
    assert_eq!(t.submitted, 10_000);
    assert_eq!(t.accepted + t.rejected, t.submitted);
    assert_eq!(t.accepted, expected_accept);
    assert_eq!(p.hot_len() as u64, t.accepted);
}

#[test]
fn sibling_isolation_and_grants() {
    let mut p = fixture();
    p.ingest(m("acme", "c1", "p", 1, 1.0)).unwrap();
    p.ingest(m("acme", "c1", "t", 2, 2.0)).unwrap();
    p.ingest(m("globex", "g1", "p", 3, 3.0)).unwrap();

    let seen = p.query("globex", &QueryFilter::all()).unwrap();
    assert!(seen.iter().all(|x| x.tenant_id == "globex"));
    assert_eq!(seen.len(), 1);

    p.grant("acme", "globex", DataScope::Sensor { device_id: "c1".into(), sensor_id: "t".into() })
        .unwrap();
    let seen = p.query("globex", &QueryFilter::all()).unwrap();
    assert_eq!(seen.len(), 2);
    assert!(seen.iter().any(|x| x.device_id == "c1" && x.sensor_id == "t"));
    assert!(!seen.iter().any(|x| x.device_id == "c1" && x.sensor_id == "p"));
    assert!(p.grant("acme", "acme", DataScope::All).is_err());
}

#[test]
fn query_filters_time_half_open() {
    let mut p = fixture();
    for ts in 0..10 {
        p.ingest(m("acme", "c1", "p", ts * 100, ts as f64)).unwrap();
    }
    let f = QueryFilter { from_us: Some(200), to_us: Some(500), ..QueryFilter::all() };
    let got: Vec<u64> = p.query("acme", &f).unwrap().iter().map(|x| x.timestamp_us).collect();
    assert_eq!(got, vec![200, 300, 400]);
}

#[test]
fn threshold_strict_and_rule_order() {
    let mut p = fixture();
    let below = |b| Condition::Threshold { cmp: Comparison::Below, bound: b };
    p.add_rule(rule("r2", "acme", "p", below(3.0))).unwrap();
    p.add_rule(rule("r1", "acme", "p", below(3.5))).unwrap();
    assert!(p.ingest(m("acme", "c1", "p", 1, 3.0)).unwrap().fired.iter().map(|f| f.rule_id()).eq(["r1"]));
    let r = p.ingest(m("acme", "c1", "p", 2, 1.0)).unwrap();
    let ids: Vec<&str> = r.fired.iter().map(|f| f.rule_id()).collect();
    assert_eq!(ids, ["r1", "r2"]);
    p.set_rule_enabled("r1", false).unwrap();
    assert_eq!(p.ingest(m("acme", "c1", "p", 3, 1.0)).unwrap().fired.len(), 1);
}

#[test]
fn rule_visibility_checked() {
    let mut p = fixture();
    let c = Condition::Threshold { cmp: Comparison::Above, bound: 0.0 };
    assert!(matches!(
        p.add_rule(rule("x", "globex", "t", c.clone())),
        Err(PlatformError::RuleNotVisible { .. })
    ));
    p.grant("acme", "globex", DataScope::Device("c1".into())).unwrap();
    p.add_rule(rule("x", "globex", "t", c.clone())).unwrap();
    assert!(matches!(p.add_rule(rule("x", "globex", "t", c)), Err(PlatformError::DuplicateRule(_))));
    let r = p.ingest(m("acme", "c1", "t", 1, 1.0)).unwrap();
    assert_eq!(r.fired.len(), 1);
    assert_eq!(
        p.add_rule(rule("w", "acme", "p", Condition::WindowAverage { len: 0, cmp: Comparison::Above, bound: 0.0 })),
        Err(PlatformError::EmptyWindow("w".into()))
    );
}

#[test]
fn command_action_carries_device() {
    let mut p = fixture();
    let mut r = rule("stop", "acme", "p", Condition::Threshold { cmp: Comparison::Below, bound: 2.0 });
    r.action = RuleAction::EmitCommand { verb: CommandVerb::Stop, params: Default::default() };
    p.add_rule(r).unwrap();
    let fired = p.ingest(m("acme", "c1", "p", 5, 1.0)).unwrap().fired;
    match &fired[..] {
        [FiredAction::Command { command, .. }] => {
            assert_eq!(command.device_id, "c1");
            assert_eq!(command.verb, CommandVerb::Stop);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn window_average_matches_brute_force() {
    let mut p = fixture();
    let len = 5;
    p.add_rule(rule("avg", "acme", "p", Condition::WindowAverage { len, cmp: Comparison::Above, bound: 10.0 }))
        .unwrap();
    let values: Vec<f64> = (0..40).map(|i| ((i * 37) % 23) as f64).collect();
    for (i, v) in values.iter().enumerate() {
        let fired = !p.ingest(m("acme", "c1", "p", i as u64, *v)).unwrap().fired.is_empty();
        let expect = i + 1 >= len && values[i + 1 - len..=i].iter().sum::<f64>() / len as f64 > 10.0;
        assert_eq!(fired, expect, "at {i}");
    }
}

#[test]
fn window_trend_fires_on_rising_slope() {
    let mut p = fixture();
    p.add_rule(rule("tr", "acme", "t", Condition::WindowTrend { len: 3, cmp: Comparison::Above, bound_per_s: 1.0 }))
        .unwrap();
    let r1 = p.ingest(m("acme", "c1", "t", 0, 0.0)).unwrap();
    let r2 = p.ingest(m("acme", "c1", "t", 1_000_000, 2.0)).unwrap();
    let r3 = p.ingest(m("acme", "c1", "t", 2_000_000, 4.0)).unwrap();
    assert!(r1.fired.is_empty() && r2.fired.is_empty());
    assert_eq!(r3.fired.len(), 1);
}

#[test]
fn retention_partitions_by_age() {
    let mut p = fixture();
    assert_eq!(p.retention_sweep(0), Err(PlatformError::NoRetentionPolicy));
    let sink = SharedMemorySink::new("lake");
    p.set_retention(RetentionPolicy { hot_window_us: 1_000, offload_sink: "lake".into() }, Box::new(sink.clone()))
        .unwrap();
    for ts in (0..5_000).step_by(250) {
        p.ingest(m("acme", "c1", "p", ts, 1.0)).unwrap();
        p.ingest(m("globex", "g1", "p", ts, 2.0)).unwrap();
    }
    let before = p.hot_len();
    let moved = p.retention_sweep(5_000).unwrap();
    assert_eq!(moved + p.hot_len(), before);
    assert!(p.query("acme", &QueryFilter::all()).unwrap().iter().all(|x| x.timestamp_us >= 4_000));
    let lake = sink.0.lock();
    assert_eq!(lake.line_count(), moved);
    let acme_file = lake.file("acme").unwrap();
    assert!(acme_file.lines().all(|l| l.contains("|acme|")));
    assert_eq!(p.counters()["acme"].offloaded + p.counters()["globex"].offloaded, moved as u64);
}

struct BrokenSink;

impl LakeSink for BrokenSink {
    fn name(&self) -> &str {
        "broken"
    }

    fn append(&mut self, _: &str, _: &[Measurement]) -> Result<(), PlatformError> {
        Err(PlatformError::SinkUnavailable("broken".into()))
    }
}

#[test]
fn sink_failure_keeps_data_hot() {
    let mut p = fixture();
    p.set_retention(RetentionPolicy { hot_window_us: 10, offload_sink: "broken".into() }, Box::new(BrokenSink))
        .unwrap();
    p.ingest(m("acme", "c1", "p", 0, 1.0)).unwrap();
    assert!(matches!(p.retention_sweep(1_000), Err(PlatformError::SinkUnavailable(_))));
    assert_eq!(p.hot_len(), 1);
}

#[test]
fn dir_sink_writes_tenant_files() {
    let dir = std::env::temp_dir().join(format!("iiot-lake-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let mut p = fixture();
    p.set_retention(RetentionPolicy { hot_window_us: 10, offload_sink: "dir".into() }, Box::new(DirSink::new("dir", &dir)))
        .unwrap();
    p.ingest(m("acme", "c1", "p", 0, 1.0)).unwrap();
    p.retention_sweep(100).unwrap();
    let text = std::fs::read_to_string(dir.join("acme.lake")).unwrap();
    assert_eq!(text.lines().count(), 1);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn accepted_data_reaches_lambda() {
    let mut p = fixture();
    p.attach_lambda(LambdaPipeline::new(1_000_000));
    p.ingest(m("acme", "c1", "p", 0, 1.0)).unwrap();
    let _ = p.ingest(m("acme", "c1", "zz", 0, 1.0));
    let l = p.lambda().unwrap();
    assert_eq!(l.counters().ingested, 1);
}

proptest! {
    /// A query returns exactly own data plus the granted slice of others.
    #[test]
    fn query_is_own_plus_grants(
        grants in proptest::collection::vec((0usize..3, 0usize..3, 0usize..4), 0..6),
        viewer in 0usize..3,
    ) {
        let tenants = ["acme", "globex", "initech"];
        let mut p = Platform::new();
        p.create_tenant("op", None, true, ["m"]).unwrap();
        for t in tenants {
            p.create_tenant(t, Some("op"), false, ["m"]).unwrap();
            for d in 0..2 {
                let id = format!("{t}-d{d}");
                p.register_device(t, device(&id, &["a", "b"])).unwrap();
                p.activate(&id).unwrap();
            }
        }
        let mut granted = Vec::new();
        for (o, g, s) in grants {
            if o == g { continue; }
            let scope = match s {
                0 => DataScope::All,
                1 => DataScope::Device(format!("{}-d0", tenants[o])),
                2 => DataScope::Sensor { device_id: format!("{}-d1", tenants[o]), sensor_id: "b".into() },
                _ => DataScope::Sensor { device_id: format!("{}-d0", tenants[o]), sensor_id: "a".into() },
            };
            p.grant(tenants[o], tenants[g], scope.clone()).unwrap();
            granted.push((tenants[o], tenants[g], scope));
        }
        let mut all = Vec::new();
        for t in tenants {
            for d in 0..2 {
                for s in ["a", "b"] {
                    let x = m(t, &format!("{t}-d{d}"), s, 1, 1.0);
                    p.ingest(x.clone()).unwrap();
                    all.push(x);
                }
            }
        }
        let v = tenants[viewer];
        let mut expect: Vec<_> = all.iter().filter(|x| {
            x.tenant_id == v || granted.iter().any(|(o, g, sc)| *o == x.tenant_id && *g == v && sc.covers(&x.device_id, &x.sensor_id))
        }).cloned().collect();
        let mut got = p.query(v, &QueryFilter::all()).unwrap();
        let key = |x: &Measurement| (x.tenant_id.clone(), x.device_id.clone(), x.sensor_id.clone());
        expect.sort_by_key(key);
        got.sort_by_key(key);
        prop_assert_eq!(got, expect);
    }
}
