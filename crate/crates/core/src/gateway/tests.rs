use proptest::prelude::*;

use super::*;
use crate::model::encode_fieldbus_frame;
use crate::netsim::{Event, EventKind, LinkSpec, Topology};

fn rules(version: u64, scale: f64) -> TranslationRuleSet {
    TranslationRuleSet::new(version)
        .with_rule(1, 40001, TranslationRule::new("pressure", scale, 0.0, "bar"))
        .unwrap()
        .with_rule(2, 40001, TranslationRule::new("pressure", scale, 1.0, "bar"))
        .unwrap()
}

fn ctx() -> DeviceContext {
    DeviceContext::new("acme", "comp1")
}

#[test]
fn install_versions() {
    let mut g = Gateway::new("gw", ConnectionPattern::StandardAgent);
    assert_eq!(g.install_ruleset(rules(1, 1.0)), Ok(1));
    assert_eq!(g.install_ruleset(rules(2, 1.0)), Ok(2));
    assert_eq!(
        g.install_ruleset(rules(1, 1.0)),
        Err(GatewayError::StaleVersion { current: 2, offered: 1 })
    );
    assert_eq!(
        g.install_ruleset(rules(2, 5.0)),
        Err(GatewayError::StaleVersion { current: 2, offered: 2 })
    );
    assert_eq!(g.version(), 2);
    assert_eq!(g.ruleset().unwrap().get(1, 40001).unwrap().scale, 1.0);
}

#[test]
fn unmapped_frame_counted_not_forwarded() {
    let mut g = Gateway::new("gw", ConnectionPattern::StandardAgent);
    g.install_ruleset(rules(1, 1.0)).unwrap();
    let out = g.handle_payload(&encode_fieldbus_frame(9, 1, 5), 0, &ctx());
    assert!(matches!(out, GatewayOutput::Dropped(GatewayError::UnmappedRegister { unit_id: 9, .. })));
    let mut bad = encode_fieldbus_frame(1, 40001, 5);
    bad[4] ^= 1;
    assert!(matches!(g.handle_payload(&bad, 0, &ctx()), GatewayOutput::Dropped(GatewayError::Model(_))));
    let a = g.audit();
    assert_eq!((a.frames_processed, a.unmapped, a.bad_frames, a.translated()), (2, 1, 1, 0));
}

/// Cloud pushes v2 while a device streams frames every millisecond; each
/// frame must be translated by exactly one version, switching at the
/// delivery instant.
#[test]
fn ruleset_swap_is_atomic_on_the_timeline() {
    let mut topo = Topology::new();
    let cloud = topo.add_node("cloud", EdgeTier::Cloud).unwrap();
    let gw = topo.add_node("gw", EdgeTier::Gateway).unwrap();
    let dev = topo.add_node("plc", EdgeTier::Device).unwrap();
    topo.add_link(cloud, gw, LinkSpec::latency_only(50_000)).unwrap();
    topo.add_link(dev, gw, LinkSpec::latency_only(1_000)).unwrap();
    let mut sim = Simulator::new(topo, 7);

    let mut g = Gateway::new("gw", ConnectionPattern::StandardAgent);
    g.install_ruleset(rules(1, 1.0)).unwrap();
    for k in 0..200u64 {
        sim.schedule_timer(dev, k * 1_000, Vec::new());
    }
    let outcome = push_ruleset(&mut sim, cloud, gw, &rules(2, 10.0)).unwrap();
    let SendOutcome::Scheduled { deliver_at_us: swap_at, .. } = outcome else {
        panic!("lossless link dropped the push");
    };

    let mut seen: Vec<(u64, f64)> = Vec::new();
    let mut applied_at = None;
    let device = ctx();
    sim.run_to_completion(&mut |sim: &mut Simulator, ev: Event| match ev.kind {
        EventKind::Timer => {
            sim.send(dev, gw, encode_fieldbus_frame(1, 40001, 3).to_vec()).unwrap();
        }
        EventKind::Delivery => match g.handle_payload(&ev.payload, ev.fire_at_us, &device) {
            GatewayOutput::Forward(m) => seen.push((ev.fire_at_us, m.value)),
            GatewayOutput::RulesetApplied { version } => {
                assert_eq!(version, 2);
                applied_at = Some(ev.fire_at_us);
            }
            other => panic!("{other:?}"),
        },
    });

    assert_eq!(applied_at, Some(swap_at));
    let a = g.audit();
    assert_eq!(a.translated(), a.frames_processed);
    assert_eq!(a.frames_processed, 200);
    let v1 = a.translated_by_version[&1];
    let v2 = a.translated_by_version[&2];
    assert_eq!(v1 + v2, 200);
    assert_eq!(seen.iter().filter(|(_, v)| *v == 3.0).count() as u64, v1);
    let last_old = seen.iter().filter(|(_, v)| *v == 3.0).map(|(t, _)| *t).max().unwrap();
    let first_new = seen.iter().filter(|(_, v)| *v == 30.0).map(|(t, _)| *t).min().unwrap();
    assert!(last_old <= swap_at && swap_at <= first_new);
}

#[test]
fn push_requires_cloud_to_gateway() {
    let mut topo = Topology::new();
    let a = topo.add_node("a", EdgeTier::FactoryEdge).unwrap();
    let b = topo.add_node("b", EdgeTier::Gateway).unwrap();
    topo.add_link(a, b, LinkSpec::latency_only(1)).unwrap();
    let mut sim = Simulator::new(topo, 1);
    assert!(push_ruleset(&mut sim, a, b, &rules(1, 1.0)).is_err());
}

fn all_tiers() -> TranslationRuleSet {
    rules(1, 0.01)
}

fn route_all(reading: RawReading, set: &TranslationRuleSet) -> Vec<Routed> {
    let dev = ctx();
    let c = RouteContext {
        device: &dev,
        device_rules: Some(set),
        gateway_rules: Some(set),
        cloud_rules: Some(set),
        profile: RouteProfile::default(),
    };
    ConnectionPattern::ALL
        .into_iter()
        .map(|p| route_via_pattern(p, reading, &c).unwrap())
        .collect()
}

#[test]
fn device_agent_and_standard_agent_agree() {
    let set = all_tiers();
    let r = RawReading { unit_id: 1, register: 40001, raw_value: 4200, at_us: 10 };
    let routed = route_all(r, &set);
    let dev = routed.iter().find(|x| x.measurement.origin == Origin::Via(ConnectionPattern::DeviceAgent)).unwrap();
    let std = routed.iter().find(|x| x.measurement.origin == Origin::Via(ConnectionPattern::StandardAgent)).unwrap();
    assert_eq!(dev.measurement.payload_key(), std.measurement.payload_key());
    assert_eq!(dev.measurement.value, 42.0);
    assert_eq!(dev.translated_at, EdgeTier::Device);
    assert_eq!(std.translated_at, EdgeTier::Gateway);
}

#[test]
fn platform_side_without_cloud_rules() {
    let set = all_tiers();
    let dev = ctx();
    let c = RouteContext {
        device: &dev,
        device_rules: Some(&set),
        gateway_rules: Some(&set),
        cloud_rules: None,
        profile: RouteProfile::default(),
    };
    let r = RawReading { unit_id: 1, register: 40001, raw_value: 1, at_us: 0 };
    assert_eq!(
        route_via_pattern(ConnectionPattern::PlatformSideAgent, r, &c),
        Err(GatewayError::MissingAgent { pattern: ConnectionPattern::PlatformSideAgent, tier: EdgeTier::Cloud })
    );
    assert!(route_via_pattern(ConnectionPattern::OpcUaAgent, r, &c).is_ok());
}

#[test]
fn gateway_translation_never_later_than_cloud() {
    let set = all_tiers();
    let r = RawReading { unit_id: 1, register: 40001, raw_value: 1, at_us: 1_000 };
    let routed = route_all(r, &set);
    let cloud = routed.iter().find(|x| x.translated_at == EdgeTier::Cloud).unwrap().arrival_us;
    for x in routed.iter().filter(|x| x.translated_at == EdgeTier::Gateway) {
        assert!(x.arrival_us < cloud);
    }
}

#[test]
fn hw_intercept_is_passive_and_sees_both_devices() {
    let frames: Vec<[u8; 10]> = (0..20)
        .map(|i| encode_fieldbus_frame(1 + (i % 2) as u8, 40001, i * 10))
        .collect();
    let mut untapped = TwoWireBus::new();
    let mut bus = TwoWireBus::new();
    let tap = bus.attach_tap();
    let mut agent = HwInterceptTap::new(rules(1, 1.0));
    agent.bind(1, DeviceContext::new("acme", "m1"));
    agent.bind(2, DeviceContext::new("acme", "m2"));

    let mut got = Vec::new();
    for (i, f) in frames.iter().enumerate() {
        untapped.transmit(f);
        bus.transmit(f);
        if i % 3 == 0 {
            let bytes = bus.drain_tap(tap);
            got.extend(agent.feed(&bytes, i as u64));
        }
    }
    got.extend(agent.feed(&bus.drain_tap(tap), 99));

    assert_eq!(bus.master_stream(), untapped.master_stream());
    assert_eq!(bus.master_stream().len(), 20 * 10);
    assert_eq!(got.len(), 20);
    assert_eq!(got.iter().filter(|m| m.device_id == "m1").count(), 10);
    assert_eq!(got.iter().filter(|m| m.device_id == "m2").count(), 10);
}

#[test]
fn tap_resynchronises_after_noise() {
    let mut agent = HwInterceptTap::new(rules(1, 1.0));
    agent.bind(1, ctx());
    let mut stream = vec![0x00, 0xA5, 0x13];
    stream.extend_from_slice(&encode_fieldbus_frame(1, 40001, 7));
    let got = agent.feed(&stream, 0);
    assert_eq!(got.len(), 1);
    assert_eq!(got[0].value, 7.0);
    assert_eq!(agent.skipped_bytes, 3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]
    #[test]
    fn all_patterns_same_payload(
        unit in 1u8..3,
        raw in any::<i32>(),
        at in 0u64..1u64 << 40,
        scale in -100.0f64..100.0,
    ) {
        let set = rules(1, scale);
        let routed = route_all(RawReading { unit_id: unit, register: 40001, raw_value: raw, at_us: at }, &set);
        let first = routed[0].measurement.encode().unwrap();
        let strip = |line: &str| line.rsplit_once('|').unwrap().0.to_string();
        for r in &routed {
            prop_assert_eq!(r.measurement.payload_key(), routed[0].measurement.payload_key());
            prop_assert_eq!(strip(&r.measurement.encode().unwrap()), strip(&first));
        }
    }
}
