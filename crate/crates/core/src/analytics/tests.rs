use super::*;
use crate::netsim::EdgeTier;

fn run(placement: EdgeTier, seed: u64) -> (PaintConfig, PaintOutcome) {
    let mut cfg = PaintConfig::new(seed);
    cfg.placement = placement;
    let out = simulate_paint_station(&cfg).unwrap();
    (cfg, out)
}

#[test]
fn edge_meets_every_deadline() {
    let (cfg, out) = run(EdgeTier::FactoryEdge, 1);
    assert!(out.reactions.len() >= 50);
    assert_eq!(out.deadline_met_count(), out.reactions.len());
    let bound = cfg.uplink_interval_us + cfg.path.reaction_path_us(EdgeTier::FactoryEdge).unwrap();
    assert!(out.max_latency_us().unwrap() <= bound);
    assert_eq!(out.spurious_commands, 0);
}

#[test]
fn every_reaction_matches_closed_form() {
    for placement in [EdgeTier::FactoryEdge, EdgeTier::RegionalEdge, EdgeTier::Cloud] {
        let (cfg, out) = run(placement, 4);
        let path = cfg.path.reaction_path_us(placement).unwrap();
        for r in &out.reactions {
            let expect = reaction_latency_oracle(r.injected_us, cfg.uplink_interval_us, path);
            assert_eq!(r.latency_us, Some(expect), "{placement} fault {}", r.fault_id);
        }
    }
}

#[test]
fn boundary_fault_waits_a_full_interval() {
    let (cfg, out) = run(EdgeTier::FactoryEdge, 2);
    let first = &out.reactions[0];
    assert_eq!(first.injected_us % cfg.uplink_interval_us, 1);
    let path = cfg.path.reaction_path_us(EdgeTier::FactoryEdge).unwrap();
    assert_eq!(first.latency_us, Some(cfg.uplink_interval_us - 1 + path));
}

#[test]
fn cloud_worst_case_reaches_six_hundred_ms() {
    let (cfg, out) = run(EdgeTier::Cloud, 3);
    let worst = cfg.uplink_interval_us - 1 + cfg.path.reaction_path_us(EdgeTier::Cloud).unwrap();
    assert!(worst >= 600_000);
    assert_eq!(out.reactions[0].latency_us, Some(worst));
    assert!(!out.reactions[0].deadline_met);
}

#[test]
fn one_record_per_fault() {
    let (cfg, out) = run(EdgeTier::Cloud, 5);
    assert_eq!(out.reactions.len(), cfg.faults.len());
    let ids: std::collections::BTreeSet<u32> = out.reactions.iter().map(|r| r.fault_id).collect();
    assert_eq!(ids.len(), cfg.faults.len());
}

#[test]
fn undetected_fault_has_no_latency() {
    let mut cfg = PaintConfig::new(1);
    cfg.rules = vec![WindowRule::new("never", NOZZLE_PRESSURE, 1, Detector::Threshold, crate::platform::Comparison::Below, -1e9).unwrap()];
    let out = simulate_paint_station(&cfg).unwrap();
    assert!(out.reactions.iter().all(|r| r.latency_us.is_none() && !r.deadline_met));
    assert_eq!(out.commands_sent, 0);
}

#[test]
fn tick_count_and_aggregates() {
    let mut cfg = PaintConfig::new(1);
    cfg.faults.truncate(25);
    cfg.end_us = Some(120_000_000);
    let out = simulate_paint_station(&cfg).unwrap();
    assert_eq!(out.ticks, 600);
    // two flushes, 8 robots x 2 sensors each
    assert_eq!(out.aggregates.len(), 2 * 16);
    assert!(out.aggregates.iter().all(|a| a.count == 300));
    assert!(out.aggregate_bytes < out.raw_bytes);
}

#[test]
fn same_seed_same_trace() {
    let (_, a) = run(EdgeTier::Cloud, 11);
    let (_, b) = run(EdgeTier::Cloud, 11);
    assert_eq!(a, b);
    let (_, c) = run(EdgeTier::Cloud, 12);
    assert_ne!(a.trace_digest, c.trace_digest);
}

#[test]
fn rejects_unsupported_placement() {
    let mut cfg = PaintConfig::new(1);
    cfg.placement = EdgeTier::Device;
    assert_eq!(simulate_paint_station(&cfg), Err(AnalyticsError::UnsupportedPlacement(EdgeTier::Device)));
}
