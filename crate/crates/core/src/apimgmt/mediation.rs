use serde::{Deserialize, Serialize};

use super::{ApiDescriptor, ApiError, Payload};

/// `target = source * scale + offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldMap {
    pub source: String,
    pub target: String,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default)]
    pub offset: f64,
}

fn one() -> f64 {
    1.0
}

impl FieldMap {
    pub fn rename(source: &str, target: &str) -> Self {
        FieldMap::linear(source, target, 1.0, 0.0)
    }

    pub fn linear(source: &str, target: &str, scale: f64, offset: f64) -> Self {
        FieldMap {
            source: source.to_string(),
            target: target.to_string(),
            scale,
            offset,
        }
    }
}

/// Allow-list: fields not named in the map are dropped.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MediationMap {
    pub fields: Vec<FieldMap>,
}

impl MediationMap {
    pub fn new(fields: Vec<FieldMap>) -> Self {
        MediationMap { fields }
    }

    pub fn apply(&self, backend: &Payload) -> Result<Payload, ApiError> {
        self.fields
            .iter()
            .map(|f| {
                backend
                    .get(&f.source)
                    .map(|x| (f.target.clone(), x * f.scale + f.offset))
                    .ok_or_else(|| ApiError::MissingField(f.source.clone()))
            })
            .collect()
    }
}

/// Without a map the backend payload passes through unchanged.
pub fn mediate(descriptor: &ApiDescriptor, backend: &Payload) -> Result<Payload, ApiError> {
    match &descriptor.mediation {
        Some(map) => map.apply(backend),
        None => Ok(backend.clone()),
    }
}
