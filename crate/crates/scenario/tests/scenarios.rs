use iiot_scenario::{load_scenario, parse_scenario, run_scenario, validate, ScenarioError};

const MINIMAL: &str = r#"
name = "t"
kind = "lpwan_fleet"
"#;

fn paths(text: &str) -> Vec<String> {
    let s = parse_scenario(text, &[]).expect("parses");
    validate(&s).into_iter().map(|v| v.path).collect()
}

#[test]
fn cyclic_tenants_are_reported_with_a_path() {
    let text = format!(
        "{MINIMAL}
[[tenants]]
id = \"a\"
parent = \"c\"
capable = true

[[tenants]]
id = \"b\"
parent = \"a\"
capable = true

[[tenants]]
id = \"c\"
parent = \"b\"
capable = true
"
    );
    let s = parse_scenario(&text, &[]).unwrap();
    let v = validate(&s);
    assert!(v.iter().any(|v| v.path.starts_with("tenants.") && v.message.contains("cycle")), "{v:?}");
}

#[test]
fn small_plant_with_fifty_thousand_sensors_violates_its_band() {
    let s = load_scenario("plant_scale", &["plant.sensor_count=50000".into()]).unwrap();
    let v = validate(&s);
    assert_eq!(v.len(), 1, "{v:?}");
    assert_eq!(v[0].path, "plant.sensor_count");
    assert!(matches!(run_scenario(&s), Err(ScenarioError::Invalid(_))));
}

#[test]
fn small_plant_just_under_the_band_is_fine() {
    let s = load_scenario("plant_scale", &["plant.sensor_count=49999".into()]).unwrap();
    assert!(validate(&s).is_empty());
}

#[test]
fn unknown_fields_are_parse_errors() {
    let err = parse_scenario(&format!("{MINIMAL}\nfoo = 1\n"), &[]).unwrap_err();
    assert!(matches!(err, ScenarioError::Parse(_)));
    let err = parse_scenario("name = \"x\"\nkind = \"nope\"\n", &[]).unwrap_err();
    assert!(matches!(err, ScenarioError::Parse(_)));
}

#[test]
fn overrides_reach_nested_arrays_and_keep_types() {
    let s = load_scenario(
        "e2e_full",
        &["devices.2.unit_id=9".into(), "traffic.requests=10".into(), "seed=99".into()],
    )
    .unwrap();
    assert_eq!(s.devices[2].unit_id, 9);
    assert_eq!(s.traffic.as_ref().unwrap().requests, 10);
    assert_eq!(s.seed, 99);
}

#[test]
fn placement_alias_sets_the_analytics_tier() {
    let s = load_scenario("paint_station", &["placement=REGIONAL_EDGE".into()]).unwrap();
    assert_eq!(s.placements.analytics.map(|t| t.as_str()), Some("REGIONAL_EDGE"));
}

#[test]
fn bad_overrides_are_rejected() {
    for o in ["devices.9.unit_id=1", "seed.x=1", "a..b=1", "justtext"] {
        let err = load_scenario("e2e_full", &[o.into()]).unwrap_err();
        assert!(matches!(err, ScenarioError::Override(_) | ScenarioError::Parse(_)), "{o}: {err:?}");
    }
}

#[test]
fn assertion_on_a_metric_the_kind_never_emits() {
    let text = format!("{MINIMAL}\n[[assertions]]\nname = \"x\"\nmetric = \"api_ok\"\nop = \">\"\nvalue = 0\n");
    assert_eq!(paths(&text), vec!["assertions.0.metric"]);
}

#[test]
fn missing_metric_fails_the_check() {
    let text = format!("{MINIMAL}\n[[assertions]]\nname = \"x\"\nmetric = \"sends[ghost]\"\nop = \">\"\nvalue = 0\n");
    let out = run_scenario(&parse_scenario(&text, &[]).unwrap()).unwrap();
    assert!(!out.passed);
    assert!(out.csv.contains("check,x,sends[ghost],>,0,missing,FAIL"));
}

#[test]
fn ruleset_targeting_a_non_gateway_is_invalid() {
    let s = load_scenario("compressor_fleet", &["rulesets.1.gateway=cloud".into()]).unwrap();
    assert!(validate(&s).iter().any(|v| v.path == "rulesets.1.gateway"));
}

#[test]
fn gateway_patterns_need_a_gateway_link() {
    let mut s = load_scenario("compressor_fleet", &[]).unwrap();
    s.topology.links.retain(|l| l.from != "cmp1");
    assert!(validate(&s).iter().any(|v| v.path == "devices.0.node"));
}

#[test]
fn rulesets_are_pushed_from_the_cloud() {
    let s = load_scenario("compressor_fleet", &["rulesets.0.from=cmp1".into()]).unwrap();
    assert!(validate(&s).iter().any(|v| v.path == "rulesets.0.from"));
}

#[test]
fn ruleset_versions_must_increase() {
    let s = load_scenario("compressor_fleet", &["rulesets.1.version=1".into()]).unwrap();
    assert!(validate(&s).iter().any(|v| v.path == "rulesets.1"));
}

#[test]
fn external_node_wired_past_the_dmz_is_invalid() {
    let mut s = load_scenario("e2e_full", &[]).unwrap();
    s.topology.links[9].to = "cloud".into();
    assert!(validate(&s).iter().any(|v| v.path == "placements.api_gateway"));
}

#[test]
fn cyclic_api_dependencies_are_invalid() {
    let text = r#"
name = "apis"
kind = "lpwan_fleet"

[[apis]]
id = "a"
layer = "PROCESS"
backend = "platform:t"
depends_on = ["b"]

[[apis]]
id = "b"
layer = "SYSTEM"
backend = "platform:t"
depends_on = ["a"]
"#;
    assert!(paths(text).iter().any(|p| p == "apis"));
}

#[test]
fn tap_without_a_bus_address_is_invalid() {
    let s = load_scenario("e2e_full", &["devices.3.unit_id=0".into()]).unwrap();
    assert!(validate(&s).iter().any(|v| v.path == "devices.3.unit_id"));
}

#[test]
fn runs_are_deterministic_and_seed_sensitive() {
    for name in ["compressor_fleet", "paint_station", "e2e_full"] {
        let a = run_scenario(&load_scenario(name, &[]).unwrap()).unwrap();
        let b = run_scenario(&load_scenario(name, &[]).unwrap()).unwrap();
        assert_eq!(a.csv, b.csv, "{name}");
        let c = run_scenario(&load_scenario(name, &["seed=12345".into()]).unwrap()).unwrap();
        assert_ne!(a.csv, c.csv, "{name}");
    }
}

#[test]
fn fork_before_the_platform_sees_the_same_data() {
    let s = load_scenario("e2e_full", &["placements.lambda_fork=BEFORE_PLATFORM_EDGE".into()]).unwrap();
    let out = run_scenario(&s).unwrap();
    assert!(out.passed, "{}", out.report);
    assert!(out.csv.contains("metric,lambda_matches_platform,1"));
}

#[test]
fn ruleset_swap_changes_translation_mid_run() {
    let out = run_scenario(&load_scenario("compressor_fleet", &[]).unwrap()).unwrap();
    assert!(out.csv.contains("ruleset,gw1,1,"));
    assert!(out.csv.contains("ruleset,gw1,2,"));
}

#[test]
fn lossy_uplink_drops_frames_but_nothing_is_rejected() {
    let s = load_scenario("compressor_fleet", &["topology.links.0.loss=0.2".into()]).unwrap();
    let out = run_scenario(&s).unwrap();
    let metric = |name: &str| -> u64 {
        let prefix = format!("metric,{name},");
        out.csv.lines().find_map(|l| l.strip_prefix(&prefix)).unwrap().parse().unwrap()
    };
    assert!(metric("frames_lost") > 0);
    assert_eq!(metric("ingest_rejected"), 0);
    assert_eq!(metric("frames_sent"), metric("frames_lost") + metric("ingest_accepted"));
}
