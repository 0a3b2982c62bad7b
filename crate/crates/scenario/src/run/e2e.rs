//! The full chain: the device fleet, then seeded API traffic through the
//! DMZ against what the fleet left in the platform.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use iiot_core::apimgmt::{check_dmz, generate_catalog, replay_max_in_window, ApiRequest, ApiResponse, ApiTraffic};
use iiot_core::lambda::{ExactSum, LambdaPipeline, ServeQuery, ViewKind};
use iiot_core::model::Origin;
use iiot_core::netsim::Simulator;
use iiot_core::platform::{Platform, QueryFilter};

use super::fleet::run_fleet;
use super::run_err;
use crate::build::{build_apis, us};
use crate::metrics::Metrics;
use crate::schema::{GrantSpec, Scenario};
use crate::ScenarioError;

const TRAFFIC_STREAM: u64 = 0x00A9_1000;

/// Rows a tenant can read that neither it owns nor a declared grant covers.
pub fn tenant_leaks(s: &Scenario, platform: &Platform) -> Result<u64, ScenarioError> {
    let granted = |g: &GrantSpec, viewer: &str, owner: &str, device: &str, sensor: &str| {
        g.grantee == viewer
            && g.owner == owner
            && g.device.as_deref().is_none_or(|d| d == device)
            && g.sensor.as_deref().is_none_or(|x| x == sensor)
    };
    let mut leaks = 0;
    for t in &s.tenants {
        for row in platform.query(&t.id, &QueryFilter::all()).map_err(run_err)? {
            let own = row.tenant_id == t.id;
            if !own && !s.grants.iter().any(|g| granted(g, &t.id, &row.tenant_id, &row.device_id, &row.sensor_id)) {
                leaks += 1;
            }
        }
    }
    Ok(leaks)
}

/// Whether every stream's COUNT and SUM served by the lambda equal a fold
/// over the platform's hot store. Returns the number of folded rows too.
pub fn lambda_matches(lambda: &LambdaPipeline, platform: &Platform) -> Result<(bool, u64), ScenarioError> {
    let mut folded: BTreeMap<(String, String, String), (u64, ExactSum)> = BTreeMap::new();
    for owner in platform.device_owners() {
        let filter = QueryFilter {
            owner: Some(owner.to_string()),
            ..QueryFilter::all()
        };
        for m in platform.query(owner, &filter).map_err(run_err)? {
            let slot = folded.entry((m.tenant_id, m.device_id, m.sensor_id)).or_default();
            slot.0 += 1;
            slot.1.add(m.value);
        }
    }
    let served: BTreeSet<(String, String, String)> = lambda
        .streams()
        .map(|id| (id.tenant_id.clone(), id.device_id.clone(), id.sensor_id.clone()))
        .collect();
    let mut ok = served == folded.keys().cloned().collect();
    let mut total = 0;
    for ((tenant, device, sensor), (count, sum)) in &folded {
        total += count;
        let q = |kind| ServeQuery::new(kind, tenant.clone()).stream(device.clone(), sensor.clone());
        ok &= lambda.serve(&q(ViewKind::Count)) == Some(*count as f64);
        ok &= lambda.serve(&q(ViewKind::Sum)) == Some(sum.value());
    }
    Ok((ok, total))
}

pub fn run(s: &Scenario, m: &mut Metrics) -> Result<(), ScenarioError> {
    let fleet = run_fleet(s, m)?;
    let mut platform = fleet.platform;
    if let Some(edge) = fleet.edge_lambda {
        platform.attach_lambda(edge);
    }

    let mut patterns = BTreeSet::new();
    for owner in platform.device_owners() {
        let filter = QueryFilter {
            owner: Some(owner.to_string()),
            ..QueryFilter::all()
        };
        for row in platform.query(owner, &filter).map_err(run_err)? {
            if let Origin::Via(p) = row.origin {
                patterns.insert(p);
            }
        }
    }
    m.metric("patterns_seen", patterns.len());

    if platform.lambda().is_some() {
        let (live, total) = lambda_matches(platform.lambda().expect("attached"), &platform)?;
        platform.lambda_mut().expect("attached").batch_recompute();
        let (recomputed, _) = lambda_matches(platform.lambda().expect("attached"), &platform)?;
        m.metric("lambda_count", total);
        m.metric("lambda_matches_platform", u8::from(live && recomputed));
    }
    m.metric("tenant_leaks", tenant_leaks(s, &platform)?);

    let topology = fleet.topology;
    let mut api = build_apis(s)?;
    let gateway_name = s.placements.api_gateway.as_deref().ok_or_else(|| run_err("no api gateway placement"))?;
    let gateway = topology.require(gateway_name).map_err(run_err)?;
    m.metric("dmz_ok", u8::from(check_dmz(&topology, gateway).is_ok()));
    let mediation = match &s.placements.api_mediation {
        Some(name) => topology.require(name).map_err(run_err)?,
        None => gateway,
    };
    let descriptors: Vec<_> = api.descriptors().cloned().collect();
    let catalog = generate_catalog(&descriptors).map_err(run_err)?;
    m.metric("catalog_bytes", catalog.document.len());
    m.metric("catalog_apis", catalog.order.len());

    let traffic = s.traffic.as_ref().ok_or_else(|| run_err("no traffic section"))?;
    let client = topology.require(&traffic.client).map_err(run_err)?;
    let requests = traffic_mix(s, &descriptors.iter().map(|d| d.api_id.clone()).collect::<Vec<_>>());
    let mut sim = Simulator::new(topology.clone(), s.seed);
    let exchanges = ApiTraffic { client, gateway, mediation }
        .run(&mut sim, &mut api, &mut platform, &requests)
        .map_err(run_err)?;

    let mut codes: BTreeMap<String, u64> = BTreeMap::new();
    let mut rtt = 0u64;
    for x in &exchanges {
        let code = match &x.response {
            ApiResponse::Ok { .. } => "OK",
            ApiResponse::Denied(c) => c.as_str(),
        };
        *codes.entry(code.to_string()).or_default() += 1;
        rtt += x.answered_us - x.sent_us;
    }
    for (code, n) in &codes {
        m.row("api", &[code.clone(), n.to_string()]);
    }
    let ok = codes.get("OK").copied().unwrap_or(0);
    m.metric("api_requests", requests.len());
    m.metric("api_answered", exchanges.len());
    m.metric("api_ok", ok);
    m.metric("api_denied", exchanges.len() as u64 - ok);
    m.metric("api_mean_rtt_us", if exchanges.is_empty() { 0 } else { rtt / exchanges.len() as u64 });

    let mut worst = 0usize;
    let mut sound = true;
    for k in &s.keys {
        let admitted = api.admitted_log().get(&k.id).map(Vec::as_slice).unwrap_or_default();
        let peak = replay_max_in_window(admitted, k.rate_window_ms * 1_000);
        worst = worst.max(peak);
        sound &= peak <= k.rate_n as usize;
    }
    m.metric("api_max_admitted_in_window", worst);
    m.metric("api_limit_sound", u8::from(sound));
    Ok(())
}

/// Seeded request schedule: exponential gaps, mostly in-scope calls with a
/// share of unknown keys and of random catalog entries.
pub fn traffic_mix(s: &Scenario, apis: &[String]) -> Vec<(u64, String)> {
    let Some(t) = &s.traffic else { return Vec::new() };
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    rng.set_stream(TRAFFIC_STREAM);
    let devices: Vec<&str> = s
        .devices
        .iter()
        .filter(|d| s.builtin_apis.as_ref().is_none_or(|t| *t == d.tenant))
        .map(|d| d.id.as_str())
        .collect();
    let mut at = us(t.start_s);
    let mut out = Vec::with_capacity(t.requests as usize);
    for _ in 0..t.requests {
        let u: f64 = rng.gen();
        at += (-(1.0 - u).ln() * t.mean_gap_us as f64).round() as u64;
        let key = if s.keys.is_empty() || rng.gen_bool(t.bad_key_share.clamp(0.0, 1.0)) {
            None
        } else {
            Some(&s.keys[rng.gen_range(0..s.keys.len())])
        };
        let random_api = rng.gen_bool(t.random_api_share.clamp(0.0, 1.0));
        let api = match key {
            Some(k) if !random_api && !k.scopes.is_empty() => k.scopes[rng.gen_range(0..k.scopes.len())].clone(),
            _ if !apis.is_empty() => apis[rng.gen_range(0..apis.len())].clone(),
            _ => "none".to_string(),
        };
        let secret = key.map_or("unissued-secret", |k| k.secret.as_str());
        let mut req = ApiRequest::new(secret, &api);
        if !devices.is_empty() {
            req = req.with("device", devices[rng.gen_range(0..devices.len())]);
        }
        out.push((at, req.encode()));
    }
    out
}
