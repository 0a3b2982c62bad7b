use iiot_core::analytics::{simulate_paint_station, PaintConfig};
use iiot_core::netsim::EdgeTier;

#[test]
fn edge_meets_every_deadline_and_cloud_does_not() {
    let edge = simulate_paint_station(&PaintConfig::new(1)).unwrap();
    assert!(edge.reactions.len() >= 50);
    assert_eq!(edge.deadline_met_count(), edge.reactions.len());
    let mut cfg = PaintConfig::new(1);
    cfg.placement = EdgeTier::Cloud;
    let cloud = simulate_paint_station(&cfg).unwrap();
    assert!(cloud.deadline_met_count() < cloud.reactions.len());
    assert!(cloud.min_latency_us().unwrap() > edge.max_latency_us().unwrap());
}

#[test]
fn same_seed_same_trace() {
    let a = simulate_paint_station(&PaintConfig::new(5)).unwrap();
    let b = simulate_paint_station(&PaintConfig::new(5)).unwrap();
    assert_eq!(a.trace_digest, b.trace_digest);
    assert_eq!(a.reactions, b.reactions);
    let c = simulate_paint_station(&PaintConfig::new(6)).unwrap();
    assert_ne!(a.trace_digest, c.trace_digest);
}

#[test]
fn regional_edge_sits_between() {
    let latency = |tier| {
        let mut cfg = PaintConfig::new(2);
        cfg.placement = tier;
        simulate_paint_station(&cfg).unwrap().max_latency_us().unwrap()
    };
    let (f, r, c) = (latency(EdgeTier::FactoryEdge), latency(EdgeTier::RegionalEdge), latency(EdgeTier::Cloud));
    assert!(f < r && r < c, "{f} {r} {c}");
}
