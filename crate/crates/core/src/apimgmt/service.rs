use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use crate::lambda::{ServeQuery, ViewKind};
use crate::netsim::{EventKind, NodeId, Simulator, Topology};
use crate::platform::{Platform, QueryFilter};

use super::{
    dependency_order, hash_secret, mediate, ApiDescriptor, ApiError, ApiKey, ApiLayer, ApiPolicy, ApiRequest,
    ApiResponse, DenialCode, FieldMap, MediationMap, Payload, SlidingWindow,
};

pub const COMPRESSED_AIR_API: &str = "compressed-air";

/// Where the mediation gateway sends an admitted request.
///
/// Text form: `platform:TENANT` or `lambda:TENANT:KIND`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendTarget {
    /// Latest value of every sensor of the `device` parameter.
    PlatformLatest { tenant_id: String },
    /// One serving-layer view of the `device`/`sensor` parameters, as field
    /// `value`.
    LambdaServe { tenant_id: String, kind: ViewKind },
}

impl fmt::Display for BackendTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendTarget::PlatformLatest { tenant_id } => write!(f, "platform:{tenant_id}"),
            BackendTarget::LambdaServe { tenant_id, kind } => write!(f, "lambda:{tenant_id}:{kind}"),
        }
    }
}

impl FromStr for BackendTarget {
    type Err = ApiError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        match parts[..] {
            ["platform", tenant] if !tenant.is_empty() => Ok(BackendTarget::PlatformLatest {
                tenant_id: tenant.to_string(),
            }),
            ["lambda", tenant, kind] if !tenant.is_empty() => Ok(BackendTarget::LambdaServe {
                tenant_id: tenant.to_string(),
                kind: kind.parse().map_err(|_| ApiError::Malformed(format!("view kind {kind}")))?,
            }),
            _ => Err(ApiError::Malformed(format!("backend target {s}"))),
        }
    }
}

/// Anything the mediation gateway can call. An `Err` means the backend is
/// unavailable.
pub trait ApiBackend {
    fn invoke(&mut self, target: &BackendTarget, params: &BTreeMap<String, String>) -> Result<Payload, String>;
}

impl ApiBackend for Platform {
    fn invoke(&mut self, target: &BackendTarget, params: &BTreeMap<String, String>) -> Result<Payload, String> {
        match target {
            BackendTarget::PlatformLatest { tenant_id } => {
                let filter = QueryFilter {
                    device_id: params.get("device").cloned(),
                    ..QueryFilter::all()
                };
                let rows = self.query(tenant_id, &filter).map_err(|e| e.to_string())?;
                let mut latest: BTreeMap<String, (u64, f64)> = BTreeMap::new();
                for m in rows {
                    let slot = latest.entry(m.sensor_id).or_insert((m.timestamp_us, m.value));
                    if m.timestamp_us >= slot.0 {
                        *slot = (m.timestamp_us, m.value);
                    }
                }
                Ok(latest.into_iter().map(|(k, (_, v))| (k, v)).collect())
            }
            BackendTarget::LambdaServe { tenant_id, kind } => {
                let lambda = self.lambda().ok_or("no lambda pipeline attached")?;
                let mut q = ServeQuery::new(*kind, tenant_id.clone());
                if let (Some(d), Some(s)) = (params.get("device"), params.get("sensor")) {
                    q = q.stream(d.clone(), s.clone());
                }
                Ok(lambda.serve(&q).map(|v| ("value".to_string(), v)).into_iter().collect())
            }
        }
    }
}

/// Fixed answers keyed by the target's text form; `down` makes every call
/// fail.
#[derive(Debug, Clone, Default)]
pub struct StaticBackend {
    pub responses: BTreeMap<String, Payload>,
    pub down: bool,
    pub calls: u64,
}

impl ApiBackend for StaticBackend {
    fn invoke(&mut self, target: &BackendTarget, _params: &BTreeMap<String, String>) -> Result<Payload, String> {
        self.calls += 1;
        if self.down {
            return Err("backend down".into());
        }
        self.responses
            .get(&target.to_string())
            .cloned()
            .ok_or_else(|| format!("no response configured for {target}"))
    }
}

/// The DMZ gateway plus the mediation gateway behind it.
#[derive(Debug, Clone, Default)]
pub struct ApiGateway {
    keys: BTreeMap<String, ApiKey>,
    limiters: BTreeMap<String, SlidingWindow>,
    routes: BTreeMap<String, ApiDescriptor>,
    admitted: BTreeMap<String, Vec<u64>>,
    pub denials: BTreeMap<DenialCode, u64>,
    pub served: u64,
}

impl ApiGateway {
    pub fn new(descriptors: Vec<ApiDescriptor>) -> Result<Self, ApiError> {
        dependency_order(&descriptors)?;
        Ok(ApiGateway {
            routes: descriptors.into_iter().map(|d| (d.api_id.clone(), d)).collect(),
            ..Self::default()
        })
    }

    pub fn issue_key(&mut self, key: ApiKey) -> Result<(), ApiError> {
        if self.keys.values().any(|k| k.key_id == key.key_id) || self.keys.contains_key(&key.secret_hash) {
            return Err(ApiError::DuplicateKey(key.key_id));
        }
        self.limiters.insert(key.key_id.clone(), SlidingWindow::new(key.rate_limit));
        self.keys.insert(key.secret_hash.clone(), key);
        Ok(())
    }

    pub fn descriptors(&self) -> impl Iterator<Item = &ApiDescriptor> {
        self.routes.values()
    }

    /// Admission instants per key id.
    pub fn admitted_log(&self) -> &BTreeMap<String, Vec<u64>> {
        &self.admitted
    }

    fn deny(&mut self, code: DenialCode) -> ApiResponse {
        *self.denials.entry(code).or_default() += 1;
        ApiResponse::Denied(code)
    }

    /// DMZ stage: authenticate, authorize, rate-limit.
    pub fn admit(&mut self, req: &ApiRequest, now_us: u64) -> Result<(), ApiResponse> {
        let Some(key) = self.keys.get(&hash_secret(&req.key)) else {
            return Err(self.deny(DenialCode::AuthFailed));
        };
        if !key.scopes.contains(&req.api_id) {
            return Err(self.deny(DenialCode::Forbidden));
        }
        let key_id = key.key_id.clone();
        let limiter = self.limiters.get_mut(&key_id).expect("limiter per issued key");
        if !limiter.try_admit(now_us) {
            return Err(self.deny(DenialCode::RateLimited));
        }
        self.admitted.entry(key_id).or_default().push(now_us);
        Ok(())
    }

    /// Mediation stage: route, check policies, call the backend, mediate.
    pub fn dispatch(&mut self, req: &ApiRequest, backend: &mut dyn ApiBackend) -> ApiResponse {
        let Some(desc) = self.routes.get(&req.api_id) else {
            return self.deny(DenialCode::NoRoute);
        };
        let missing_param = desc
            .policies
            .iter()
            .any(|ApiPolicy::RequireParam(p)| !req.params.contains_key(p));
        if missing_param {
            return self.deny(DenialCode::BadRequest);
        }
        let Ok(raw) = backend.invoke(&desc.backend, &req.params) else {
            return self.deny(DenialCode::BackendUnavailable);
        };
        match mediate(desc, &raw) {
            Ok(payload) => {
                self.served += 1;
                ApiResponse::Ok {
                    api_id: req.api_id.clone(),
                    payload,
                }
            }
            Err(_) => self.deny(DenialCode::MediationFailed),
        }
    }

    pub fn handle_request(&mut self, req: &ApiRequest, now_us: u64, backend: &mut dyn ApiBackend) -> ApiResponse {
        match self.admit(req, now_us) {
            Ok(()) => self.dispatch(req, backend),
            Err(denied) => denied,
        }
    }

    /// A malformed line is a `BAD_REQUEST`.
    pub fn handle_line(&mut self, line: &str, now_us: u64, backend: &mut dyn ApiBackend) -> String {
        match ApiRequest::decode(line) {
            Ok(req) => self.handle_request(&req, now_us, backend).encode(),
            Err(_) => self.deny(DenialCode::BadRequest).encode(),
        }
    }
}

/// External nodes may link only to the gateway, and nothing internal may be
/// reachable from them except through it.
pub fn check_dmz(topology: &Topology, gateway: NodeId) -> Result<(), ApiError> {
    if topology.node(gateway).external {
        return Err(ApiError::DmzViolation(format!(
            "gateway {} is itself external",
            topology.node(gateway).name
        )));
    }
    let blocked = BTreeSet::from([gateway]);
    for (id, node) in topology.nodes().filter(|(_, n)| n.external) {
        for link in topology.links().filter(|l| l.from == id) {
            if link.to != gateway {
                return Err(ApiError::DmzViolation(format!(
                    "{} links directly to {}",
                    node.name,
                    topology.node(link.to).name
                )));
            }
        }
        if let Some(inside) = topology
            .reachable_from(id, &blocked)
            .into_iter()
            .find(|n| !topology.node(*n).external)
        {
            return Err(ApiError::DmzViolation(format!(
                "{} reaches {} without the gateway",
                node.name,
                topology.node(inside).name
            )));
        }
    }
    Ok(())
}

/// One request/response pair carried over the simulated network.
#[derive(Debug, Clone, PartialEq)]
pub struct ApiExchange {
    pub sent_us: u64,
    pub admitted_at_us: Option<u64>,
    pub answered_us: u64,
    pub request: String,
    pub response: ApiResponse,
}

/// Client, DMZ gateway and mediation nodes of an API deployment.
#[derive(Debug, Clone, Copy)]
pub struct ApiTraffic {
    pub client: NodeId,
    pub gateway: NodeId,
    pub mediation: NodeId,
}

fn tag(id: usize, body: &str) -> Vec<u8> {
    format!("{id}#{body}").into_bytes()
}

fn untag(payload: &[u8]) -> Option<(usize, String)> {
    let s = std::str::from_utf8(payload).ok()?;
    let (id, body) = s.split_once('#')?;
    Some((id.parse().ok()?, body.to_string()))
}

impl ApiTraffic {
    /// Replays `requests` (send time, request line) from the client. The
    /// gateway admits on delivery, the mediation node calls `backend`.
    /// Returns one exchange per answered request, in request order.
    pub fn run(
        self,
        sim: &mut Simulator,
        api: &mut ApiGateway,
        backend: &mut dyn ApiBackend,
        requests: &[(u64, String)],
    ) -> Result<Vec<ApiExchange>, ApiError> {
        check_dmz(sim.topology(), self.gateway)?;
        let mut slots: Vec<Option<ApiExchange>> = vec![None; requests.len()];
        let mut admitted_at: Vec<Option<u64>> = vec![None; requests.len()];
        for (i, (at, line)) in requests.iter().enumerate() {
            sim.schedule_timer(self.client, *at, tag(i, line));
        }
        let me = self;
        let mut handler = |sim: &mut Simulator, ev: crate::netsim::Event| {
            let Some((id, body)) = untag(&ev.payload) else {
                return;
            };
            let now = sim.now();
            match (ev.kind, ev.target) {
                (EventKind::Timer, t) if t == me.client => {
                    let _ = sim.send(me.client, me.gateway, tag(id, &body));
                }
                (EventKind::Delivery, t) if t == me.gateway && ev.source == me.client => {
                    let reply = match ApiRequest::decode(&body) {
                        Ok(req) => match api.admit(&req, now) {
                            Ok(()) => {
                                admitted_at[id] = Some(now);
                                let _ = sim.send(me.gateway, me.mediation, tag(id, &body));
                                return;
                            }
                            Err(denied) => denied,
                        },
                        Err(_) => api.deny(DenialCode::BadRequest),
                    };
                    let _ = sim.send(me.gateway, me.client, tag(id, &reply.encode()));
                }
                (EventKind::Delivery, t) if t == me.mediation => {
                    let resp = match ApiRequest::decode(&body) {
                        Ok(req) => api.dispatch(&req, backend),
                        Err(_) => api.deny(DenialCode::BadRequest),
                    };
                    let _ = sim.send(me.mediation, me.gateway, tag(id, &resp.encode()));
                }
                (EventKind::Delivery, t) if t == me.gateway => {
                    let _ = sim.send(me.gateway, me.client, tag(id, &body));
                }
                (EventKind::Delivery, t) if t == me.client => {
                    if let (Some(slot), Ok(response)) = (slots.get_mut(id), ApiResponse::decode(&body)) {
                        *slot = Some(ApiExchange {
                            sent_us: requests[id].0,
                            admitted_at_us: admitted_at[id],
                            answered_us: now,
                            request: requests[id].1.clone(),
                            response,
                        });
                    }
                }
                _ => {}
            }
        };
        sim.run_to_completion(&mut handler);
        Ok(slots.into_iter().flatten().collect())
    }
}

/// System, process and experience APIs over one tenant's compressor data.
/// Compressors report `pressure` (bar), `temperature` (degC) and `power`
/// (kW).
pub fn builtin_descriptors(tenant_id: &str) -> Vec<ApiDescriptor> {
    let platform = BackendTarget::PlatformLatest {
        tenant_id: tenant_id.to_string(),
    };
    vec![
        ApiDescriptor::new("platform-data", ApiLayer::System, platform.clone()).require("device"),
        ApiDescriptor::new("compressor-status", ApiLayer::Process, platform.clone())
            .require("device")
            .depends_on("platform-data")
            .mediation(MediationMap::new(vec![
                FieldMap::rename("pressure", "pressure"),
                FieldMap::rename("temperature", "temperature"),
                FieldMap::rename("power", "power"),
            ])),
        ApiDescriptor::new(COMPRESSED_AIR_API, ApiLayer::Experience, platform)
            .require("device")
            .depends_on("compressor-status")
            .mediation(MediationMap::new(vec![
                FieldMap::linear("pressure", "pressure_kpa", 100.0, 0.0),
                FieldMap::rename("temperature", "temperature_c"),
                FieldMap::rename("power", "power_draw_kw"),
            ])),
    ]
}
