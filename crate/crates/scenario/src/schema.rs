//! Scenario file schema. Every section except `name` and `kind` is optional;
//! each runner reads only the sections it needs.

use serde::Deserialize;

use iiot_core::apimgmt::FieldMap;
use iiot_core::lowpower::{EnergyModel, MessagingPolicy, MotionState, ProtocolProfile};
use iiot_core::model::PlantProfile;
use iiot_core::netsim::EdgeTier;
use iiot_core::platform::Comparison;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    CompressorFleet,
    PaintStation,
    PlantScale,
    LpwanFleet,
    E2eFull,
}

impl ScenarioKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::CompressorFleet => "compressor_fleet",
            ScenarioKind::PaintStation => "paint_station",
            ScenarioKind::PlantScale => "plant_scale",
            ScenarioKind::LpwanFleet => "lpwan_fleet",
            ScenarioKind::E2eFull => "e2e_full",
        }
    }
}

fn default_seed() -> u64 {
    1
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub kind: ScenarioKind,
    #[serde(default)]
    pub description: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub duration_s: Option<f64>,
    #[serde(default)]
    pub topology: TopologySpec,
    #[serde(default)]
    pub tenants: Vec<TenantSpec>,
    #[serde(default)]
    pub grants: Vec<GrantSpec>,
    #[serde(default)]
    pub devices: Vec<DeviceSpec>,
    #[serde(default)]
    pub rules: Vec<RuleSpec>,
    #[serde(default)]
    pub rulesets: Vec<RulesetSpec>,
    #[serde(default)]
    pub placements: Placements,
    /// Tenant whose compressor data backs the built-in API set.
    pub builtin_apis: Option<String>,
    #[serde(default)]
    pub apis: Vec<ApiSpec>,
    #[serde(default)]
    pub keys: Vec<KeySpec>,
    pub traffic: Option<TrafficSpec>,
    pub paint: Option<PaintSpec>,
    pub faults: Option<FaultSchedule>,
    pub plant: Option<PlantProfile>,
    pub scale: Option<ScaleSpec>,
    pub energy: Option<EnergyModel>,
    #[serde(default)]
    pub protocols: Vec<ProtocolProfile>,
    #[serde(default)]
    pub assertions: Vec<AssertionSpec>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySpec {
    #[serde(default)]
    pub nodes: Vec<NodeSpec>,
    #[serde(default)]
    pub links: Vec<LinkSpecToml>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub name: String,
    pub tier: EdgeTier,
    #[serde(default)]
    pub external: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpecToml {
    pub from: String,
    pub to: String,
    pub latency_us: u64,
    /// Unlimited when absent.
    pub bandwidth_bytes_per_s: Option<u64>,
    #[serde(default)]
    pub loss: f64,
    #[serde(default)]
    pub jitter_us: u64,
    #[serde(default = "yes")]
    pub duplex: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TenantSpec {
    pub id: String,
    pub parent: Option<String>,
    #[serde(default)]
    pub capable: bool,
    #[serde(default)]
    pub apps: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrantSpec {
    pub owner: String,
    pub grantee: String,
    pub device: Option<String>,
    pub sensor: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceSpec {
    pub id: String,
    pub tenant: String,
    /// Connection pattern name, e.g. `STANDARD_AGENT`.
    #[serde(default = "standard_agent")]
    pub pattern: String,
    /// Topology node the device sits on; defaults to the device id.
    pub node: Option<String>,
    /// Fieldbus unit address.
    #[serde(default)]
    pub unit_id: u8,
    #[serde(default)]
    pub sensors: Vec<SensorToml>,
    pub policy: Option<MessagingPolicy>,
    #[serde(default)]
    pub payload_bytes: u32,
    #[serde(default)]
    pub motion: Vec<MotionEntry>,
}

fn standard_agent() -> String {
    "STANDARD_AGENT".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorToml {
    pub id: String,
    pub unit: String,
    #[serde(default = "second")]
    pub period_ms: u64,
    #[serde(default)]
    pub register: u16,
    /// Raw register value around which readings vary.
    #[serde(default)]
    pub raw_base: i32,
    #[serde(default)]
    pub raw_noise: i32,
}

fn second() -> u64 {
    1_000
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionEntry {
    pub at_s: u64,
    pub state: MotionState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ConditionKind {
    Threshold,
    WindowAverage,
    WindowTrend,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleSpec {
    pub id: String,
    pub tenant: String,
    pub sensor: String,
    pub device: Option<String>,
    pub condition: ConditionKind,
    pub cmp: Comparison,
    pub bound: f64,
    #[serde(default)]
    pub window: usize,
    /// Event name; a command verb when `command` is set.
    pub event: Option<String>,
    pub command: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RulesetSpec {
    pub version: u64,
    #[serde(default)]
    pub push_at_s: f64,
    /// Gateway node receiving the push; agents elsewhere pick the set up at
    /// `push_at_s`.
    pub gateway: String,
    #[serde(default)]
    pub from: Option<String>,
    pub rules: Vec<TranslationToml>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranslationToml {
    pub unit_id: u8,
    pub register: u16,
    pub sensor: String,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default)]
    pub offset: f64,
    pub unit: String,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Placements {
    pub analytics: Option<EdgeTier>,
    /// `AFTER_PLATFORM` or `BEFORE_PLATFORM_EDGE`.
    pub lambda_fork: Option<String>,
    /// Node hosting the DMZ API gateway.
    pub api_gateway: Option<String>,
    pub api_mediation: Option<String>,
    pub platform: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApiSpec {
    pub id: String,
    pub layer: String,
    pub backend: String,
    #[serde(default)]
    pub depends_on: Vec<String>,
    #[serde(default)]
    pub params: Vec<String>,
    #[serde(default)]
    pub require: Vec<String>,
    #[serde(default)]
    pub mediation: Vec<FieldMap>,
    #[serde(default = "five")]
    pub rate_n: u32,
    #[serde(default = "thousand")]
    pub rate_window_ms: u64,
}

fn five() -> u32 {
    5
}

fn thousand() -> u64 {
    1_000
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeySpec {
    pub id: String,
    pub secret: String,
    pub scopes: Vec<String>,
    #[serde(default = "five")]
    pub rate_n: u32,
    #[serde(default = "thousand")]
    pub rate_window_ms: u64,
}

/// Seeded random request mix from the client node.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficSpec {
    pub client: String,
    pub requests: u32,
    pub mean_gap_us: u64,
    #[serde(default)]
    pub start_s: f64,
    /// Share of requests using a key nobody issued.
    #[serde(default)]
    pub bad_key_share: f64,
    /// Share of requests naming a random API from the catalog, in scope or
    /// not.
    #[serde(default)]
    pub random_api_share: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PaintSpec {
    #[serde(default = "eight")]
    pub robots: usize,
    #[serde(default = "two_hundred")]
    pub uplink_interval_ms: u64,
    #[serde(default = "five_hundred")]
    pub deadline_ms: u64,
    #[serde(default = "thousand")]
    pub repair_ms: u64,
    #[serde(default = "sixty")]
    pub aggregate_period_s: u64,
    pub path: Option<PathToml>,
    #[serde(default)]
    pub rules: Vec<WindowRuleToml>,
}

fn eight() -> usize {
    8
}
fn two_hundred() -> u64 {
    200
}
fn five_hundred() -> u64 {
    500
}
fn sixty() -> u64 {
    60
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathToml {
    pub controller_to_edge_us: Option<u64>,
    pub edge_to_robot_us: Option<u64>,
    pub eval_us: Option<u64>,
    pub regional_us: Option<u64>,
    pub wan_us: Option<u64>,
    pub cloud_queue_us: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowRuleToml {
    pub id: String,
    pub sensor: String,
    pub window: usize,
    pub detector: iiot_core::analytics::Detector,
    pub cmp: Comparison,
    pub bound: f64,
    pub action: iiot_core::model::CommandVerb,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultSchedule {
    pub count: u32,
    #[serde(default = "one")]
    pub start_s: f64,
    #[serde(default = "three")]
    pub spacing_s: f64,
    #[serde(default = "yes")]
    pub boundary_probe: bool,
}

fn three() -> f64 {
    3.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleSpec {
    /// Overrides the rate implied by the plant profile.
    pub rate_bytes_per_s: Option<f64>,
    #[serde(default = "ten")]
    pub tick_ms: u64,
    #[serde(default = "thousand_u32")]
    pub streams: u32,
    pub per_batch_us: f64,
    pub per_kib_us: f64,
    #[serde(default)]
    pub fleet_target_low_bytes_per_s: f64,
    #[serde(default)]
    pub fleet_target_high_bytes_per_s: f64,
}

fn ten() -> u64 {
    10
}

fn thousand_u32() -> u32 {
    1_000
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum AssertOp {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "==")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
}

impl AssertOp {
    pub fn as_str(self) -> &'static str {
        match self {
            AssertOp::Lt => "<",
            AssertOp::Le => "<=",
            AssertOp::Gt => ">",
            AssertOp::Ge => ">=",
            AssertOp::Eq => "==",
            AssertOp::Ne => "!=",
        }
    }

    pub fn holds(self, actual: f64, threshold: f64) -> bool {
        match self {
            AssertOp::Lt => actual < threshold,
            AssertOp::Le => actual <= threshold,
            AssertOp::Gt => actual > threshold,
            AssertOp::Ge => actual >= threshold,
            AssertOp::Eq => actual == threshold,
            AssertOp::Ne => actual != threshold,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssertionSpec {
    pub name: String,
    pub metric: String,
    pub op: AssertOp,
    pub value: f64,
}
