//! Developer catalog. Line types, in order:
//!
//! ```text
//! API|id|layer|backend|rate N/window
//! PARAM|id|name
//! CODES|id|CODE,CODE,...
//! DEP|from|to
//! ORDER|id,id,...
//! ```

use std::collections::{BTreeMap, BTreeSet};

use super::{ApiDescriptor, ApiError, ApiPolicy, DenialCode};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Catalog {
    pub document: String,
    /// Dependencies before dependents.
    pub order: Vec<String>,
}

/// Kahn's algorithm with lexicographic tie-breaking.
pub fn dependency_order(descriptors: &[ApiDescriptor]) -> Result<Vec<String>, ApiError> {
    let mut deps: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for d in descriptors {
        if deps.insert(&d.api_id, d.depends_on.iter().map(String::as_str).collect()).is_some() {
            return Err(ApiError::DuplicateApi(d.api_id.clone()));
        }
    }
    for (api, ds) in &deps {
        if let Some(missing) = ds.iter().find(|x| !deps.contains_key(*x)) {
            return Err(ApiError::UnknownDependency {
                api: api.to_string(),
                missing: missing.to_string(),
            });
        }
    }
    let mut order = Vec::with_capacity(deps.len());
    let mut remaining = deps.clone();
    loop {
        let ready: Option<&str> = remaining
            .iter()
            .find(|(_, ds)| ds.iter().all(|x| !remaining.contains_key(x)))
            .map(|(api, _)| *api);
        match ready {
            Some(api) => {
                remaining.remove(api);
                order.push(api.to_string());
            }
            None if remaining.is_empty() => return Ok(order),
            None => return Err(ApiError::CyclicDependency(find_cycle(&remaining))),
        }
    }
}

/// Every node in `remaining` has a dependency inside it, so walking first
/// dependencies must revisit a node.
fn find_cycle(remaining: &BTreeMap<&str, BTreeSet<&str>>) -> Vec<String> {
    let mut path: Vec<&str> = vec![remaining.keys().next().copied().unwrap_or_default()];
    loop {
        let last = path[path.len() - 1];
        let next = remaining[last]
            .iter()
            .copied()
            .find(|x| remaining.contains_key(x))
            .expect("blocked node has a blocked dependency");
        if let Some(pos) = path.iter().position(|p| *p == next) {
            let mut cycle: Vec<String> = path[pos..].iter().map(|s| s.to_string()).collect();
            cycle.push(next.to_string());
            return cycle;
        }
        path.push(next);
    }
}

fn codes_for(d: &ApiDescriptor) -> Vec<DenialCode> {
    DenialCode::ALL
        .into_iter()
        .filter(|c| match c {
            DenialCode::BadRequest => d.policies.iter().any(|p| matches!(p, ApiPolicy::RequireParam(_))),
            DenialCode::MediationFailed => d.mediation.is_some(),
            DenialCode::NoRoute => false,
            _ => true,
        })
        .collect()
}

pub fn generate_catalog(descriptors: &[ApiDescriptor]) -> Result<Catalog, ApiError> {
    let order = dependency_order(descriptors)?;
    let mut sorted: Vec<&ApiDescriptor> = descriptors.iter().collect();
    sorted.sort_by(|a, b| a.api_id.cmp(&b.api_id));
    let mut doc = String::new();
    for d in &sorted {
        doc.push_str(&format!("API|{}|{}|{}|rate {}\n", d.api_id, d.layer, d.backend, d.rate_limit));
        for p in &d.params {
            doc.push_str(&format!("PARAM|{}|{p}\n", d.api_id));
        }
        let codes: Vec<&str> = codes_for(d).into_iter().map(DenialCode::as_str).collect();
        doc.push_str(&format!("CODES|{}|{}\n", d.api_id, codes.join(",")));
    }
    let by_id: BTreeMap<&str, &ApiDescriptor> = sorted.iter().map(|d| (d.api_id.as_str(), *d)).collect();
    for api in &order {
        for dep in &by_id[api.as_str()].depends_on {
            doc.push_str(&format!("DEP|{api}|{dep}\n"));
        }
    }
    if !order.is_empty() {
        doc.push_str(&format!("ORDER|{}\n", order.join(",")));
    }
    Ok(Catalog { document: doc, order })
}
