//! API management in front of the platform: a DMZ gateway that
//! authenticates, authorizes and rate-limits, an internal mediation gateway
//! that routes and reshapes payloads, and a machine-readable catalog.
//!
//! Wire formats are single text lines:
//!
//! ```text
//! REQ|key|api_id|k=v,...
//! RESP|OK|api_id|k=v,...
//! RESP|DENY|CODE
//! ```

mod catalog;
mod limiter;
mod mediation;
mod service;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::format_value;

pub use catalog::{dependency_order, generate_catalog, Catalog};
pub use limiter::{replay_max_in_window, SlidingWindow};
pub use mediation::{mediate, FieldMap, MediationMap};
pub use service::{
    builtin_descriptors, check_dmz, ApiBackend, ApiGateway, ApiTraffic, BackendTarget, StaticBackend,
    COMPRESSED_AIR_API,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ApiError {
    #[error("dependency cycle: {}", .0.join(" -> "))]
    CyclicDependency(Vec<String>),
    #[error("{api} depends on unknown api {missing}")]
    UnknownDependency { api: String, missing: String },
    #[error("duplicate api {0}")]
    DuplicateApi(String),
    #[error("duplicate key {0}")]
    DuplicateKey(String),
    #[error("mapped field {0} missing from backend payload")]
    MissingField(String),
    #[error("malformed line: {0}")]
    Malformed(String),
    #[error("invalid key: {0}")]
    InvalidKey(String),
    #[error("unknown api layer {0}")]
    UnknownLayer(String),
    #[error("DMZ violation: {0}")]
    DmzViolation(String),
}

/// Reasons a request is turned away, in pipeline order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DenialCode {
    AuthFailed,
    Forbidden,
    RateLimited,
    NoRoute,
    BadRequest,
    BackendUnavailable,
    MediationFailed,
}

impl DenialCode {
    pub const ALL: [DenialCode; 7] = [
        DenialCode::AuthFailed,
        DenialCode::Forbidden,
        DenialCode::RateLimited,
        DenialCode::NoRoute,
        DenialCode::BadRequest,
        DenialCode::BackendUnavailable,
        DenialCode::MediationFailed,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DenialCode::AuthFailed => "AUTH_FAILED",
            DenialCode::Forbidden => "FORBIDDEN",
            DenialCode::RateLimited => "RATE_LIMITED",
            DenialCode::NoRoute => "NO_ROUTE",
            DenialCode::BadRequest => "BAD_REQUEST",
            DenialCode::BackendUnavailable => "BACKEND_UNAVAILABLE",
            DenialCode::MediationFailed => "MEDIATION_FAILED",
        }
    }
}

impl fmt::Display for DenialCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DenialCode {
    type Err = ApiError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DenialCode::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| ApiError::Malformed(format!("unknown denial code {s}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ApiLayer {
    Experience,
    Process,
    System,
}

impl ApiLayer {
    pub fn as_str(self) -> &'static str {
        match self {
            ApiLayer::Experience => "EXPERIENCE",
            ApiLayer::Process => "PROCESS",
            ApiLayer::System => "SYSTEM",
        }
    }
}

impl fmt::Display for ApiLayer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ApiLayer {
    type Err = ApiError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "EXPERIENCE" => Ok(ApiLayer::Experience),
            "PROCESS" => Ok(ApiLayer::Process),
            "SYSTEM" => Ok(ApiLayer::System),
            other => Err(ApiError::UnknownLayer(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RateLimit {
    pub max_requests: u32,
    pub window_us: u64,
}

impl RateLimit {
    pub fn new(max_requests: u32, window_us: u64) -> Self {
        RateLimit {
            max_requests,
            window_us,
        }
    }
}

impl fmt::Display for RateLimit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.max_requests, self.window_us)
    }
}

pub fn hash_secret(secret: &str) -> String {
    hex::encode(Sha256::digest(secret.as_bytes()))
}

/// A client credential. Only the hash of the secret is kept.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiKey {
    pub key_id: String,
    pub secret_hash: String,
    pub scopes: BTreeSet<String>,
    pub rate_limit: RateLimit,
}

impl ApiKey {
    pub fn new<I, S>(key_id: &str, secret: &str, scopes: I, rate_limit: RateLimit) -> Result<Self, ApiError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let scopes: BTreeSet<String> = scopes.into_iter().map(Into::into).collect();
        if scopes.is_empty() {
            return Err(ApiError::InvalidKey(format!("{key_id}: scopes must not be empty")));
        }
        if rate_limit.max_requests < 1 || rate_limit.window_us == 0 {
            return Err(ApiError::InvalidKey(format!("{key_id}: rate limit must allow at least one request")));
        }
        Ok(ApiKey {
            key_id: key_id.to_string(),
            secret_hash: hash_secret(secret),
            scopes,
            rate_limit,
        })
    }
}

/// Conditions checked by the mediation gateway before the backend call.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "param", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ApiPolicy {
    RequireParam(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApiDescriptor {
    pub api_id: String,
    pub layer: ApiLayer,
    pub backend: BackendTarget,
    pub params: Vec<String>,
    pub mediation: Option<MediationMap>,
    pub policies: Vec<ApiPolicy>,
    /// Advertised plan for keys issued against this API.
    pub rate_limit: RateLimit,
    pub depends_on: BTreeSet<String>,
}

impl ApiDescriptor {
    pub fn new(api_id: &str, layer: ApiLayer, backend: BackendTarget) -> Self {
        ApiDescriptor {
            api_id: api_id.to_string(),
            layer,
            backend,
            params: Vec::new(),
            mediation: None,
            policies: Vec::new(),
            rate_limit: RateLimit::new(5, 1_000_000),
            depends_on: BTreeSet::new(),
        }
    }

    pub fn depends_on(mut self, api_id: &str) -> Self {
        self.depends_on.insert(api_id.to_string());
        self
    }

    pub fn param(mut self, name: &str) -> Self {
        self.params.push(name.to_string());
        self
    }

    pub fn require(mut self, name: &str) -> Self {
        self.policies.push(ApiPolicy::RequireParam(name.to_string()));
        self.param(name)
    }

    pub fn mediation(mut self, map: MediationMap) -> Self {
        self.mediation = Some(map);
        self
    }

    pub fn rate_limit(mut self, limit: RateLimit) -> Self {
        self.rate_limit = limit;
        self
    }
}

pub type Payload = BTreeMap<String, f64>;

fn split_params(s: &str) -> Result<BTreeMap<String, String>, ApiError> {
    s.split(',')
        .filter(|kv| !kv.is_empty())
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| ApiError::Malformed(format!("parameter without '=': {kv}")))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiRequest {
    pub key: String,
    pub api_id: String,
    pub params: BTreeMap<String, String>,
}

impl ApiRequest {
    pub fn new(key: &str, api_id: &str) -> Self {
        ApiRequest {
            key: key.to_string(),
            api_id: api_id.to_string(),
            params: BTreeMap::new(),
        }
    }

    pub fn with(mut self, k: &str, v: &str) -> Self {
        self.params.insert(k.to_string(), v.to_string());
        self
    }

    pub fn encode(&self) -> String {
        let params: Vec<String> = self.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("REQ|{}|{}|{}", self.key, self.api_id, params.join(","))
    }

    pub fn decode(line: &str) -> Result<Self, ApiError> {
        let f: Vec<&str> = line.trim_end_matches('\n').split('|').collect();
        let ["REQ", key, api_id, params] = f[..] else {
            return Err(ApiError::Malformed(line.to_string()));
        };
        Ok(ApiRequest {
            key: key.to_string(),
            api_id: api_id.to_string(),
            params: split_params(params)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ApiResponse {
    Ok { api_id: String, payload: Payload },
    Denied(DenialCode),
}

impl ApiResponse {
    pub fn denial(&self) -> Option<DenialCode> {
        match self {
            ApiResponse::Denied(c) => Some(*c),
            ApiResponse::Ok { .. } => None,
        }
    }

    pub fn encode(&self) -> String {
        match self {
            ApiResponse::Ok { api_id, payload } => {
                let fields: Vec<String> = payload.iter().map(|(k, v)| format!("{k}={}", format_value(*v))).collect();
                format!("RESP|OK|{api_id}|{}", fields.join(","))
            }
            ApiResponse::Denied(code) => format!("RESP|DENY|{code}"),
        }
    }

    pub fn decode(line: &str) -> Result<Self, ApiError> {
        let f: Vec<&str> = line.trim_end_matches('\n').split('|').collect();
        match f[..] {
            ["RESP", "DENY", code] => Ok(ApiResponse::Denied(code.parse()?)),
            ["RESP", "OK", api_id, fields] => {
                let payload = split_params(fields)?
                    .into_iter()
                    .map(|(k, v)| {
                        v.parse::<f64>()
                            .map(|x| (k, x))
                            .map_err(|_| ApiError::Malformed(format!("non-numeric field {v}")))
                    })
                    .collect::<Result<_, _>>()?;
                Ok(ApiResponse::Ok {
                    api_id: api_id.to_string(),
                    payload,
                })
            }
            _ => Err(ApiError::Malformed(line.to_string())),
        }
    }
}
