//! Hierarchical tenants with explicit, deny-by-default data sharing.

use std::collections::{BTreeMap, BTreeSet};

use super::PlatformError;

/// Portion of an owner's data made visible to another tenant.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DataScope {
    All,
    Device(String),
    Sensor { device_id: String, sensor_id: String },
}

impl DataScope {
    pub fn covers(&self, device_id: &str, sensor_id: &str) -> bool {
        match self {
            DataScope::All => true,
            DataScope::Device(d) => d == device_id,
            DataScope::Sensor {
                device_id: d,
                sensor_id: s,
            } => d == device_id && s == sensor_id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Grant {
    pub grantee: String,
    pub scope: DataScope,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tenant {
    pub tenant_id: String,
    pub parent: Option<String>,
    pub multi_tenant_capable: bool,
    pub enabled_apps: BTreeSet<String>,
    pub shared_with: BTreeSet<Grant>,
}

#[derive(Debug, Clone, Default)]
pub struct TenantForest {
    tenants: BTreeMap<String, Tenant>,
}

impl TenantForest {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a tenant. A child may only hang below a multi-tenant-capable
    /// parent and may only enable apps its parent has enabled.
    pub fn create_tenant<I, S>(
        &mut self,
        tenant_id: &str,
        parent: Option<&str>,
        multi_tenant_capable: bool,
        apps: I,
    ) -> Result<String, PlatformError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        if tenant_id.is_empty() || tenant_id.contains(['|', '\n', '/']) {
            return Err(PlatformError::InvalidId(tenant_id.to_string()));
        }
        if self.tenants.contains_key(tenant_id) {
            return Err(PlatformError::DuplicateTenant(tenant_id.to_string()));
        }
        let enabled_apps: BTreeSet<String> = apps.into_iter().map(Into::into).collect();
        if let Some(p) = parent {
            let parent_tenant = self
                .tenants
                .get(p)
                .ok_or_else(|| PlatformError::ParentNotFound(p.to_string()))?;
            if !parent_tenant.multi_tenant_capable {
                return Err(PlatformError::ParentNotCapable(p.to_string()));
            }
            if let Some(app) = enabled_apps.difference(&parent_tenant.enabled_apps).next() {
                return Err(PlatformError::AppNotOffered {
                    app: app.clone(),
                    parent: p.to_string(),
                });
            }
        }
        self.tenants.insert(
            tenant_id.to_string(),
            Tenant {
                tenant_id: tenant_id.to_string(),
                parent: parent.map(str::to_string),
                multi_tenant_capable,
                enabled_apps,
                shared_with: BTreeSet::new(),
            },
        );
        debug_assert!(self.is_forest());
        Ok(tenant_id.to_string())
    }

    pub fn get(&self, tenant_id: &str) -> Option<&Tenant> {
        self.tenants.get(tenant_id)
    }

    pub fn contains(&self, tenant_id: &str) -> bool {
        self.tenants.contains_key(tenant_id)
    }

    pub fn require(&self, tenant_id: &str) -> Result<&Tenant, PlatformError> {
        self.get(tenant_id)
            .ok_or_else(|| PlatformError::UnknownTenant(tenant_id.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Tenant> {
        self.tenants.values()
    }

    pub fn len(&self) -> usize {
        self.tenants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tenants.is_empty()
    }

    pub fn children(&self, tenant_id: &str) -> Vec<&Tenant> {
        self.tenants
            .values()
            .filter(|t| t.parent.as_deref() == Some(tenant_id))
            .collect()
    }

    /// Tenants `viewer` administers: itself and all its descendants. This is
    /// management visibility only; data visibility goes through [`Self::can_see`].
    pub fn visible_tenants(&self, viewer: &str) -> BTreeSet<&str> {
        self.tenants
            .keys()
            .filter(|id| self.is_ancestor_or_self(viewer, id))
            .map(String::as_str)
            .collect()
    }

    fn is_ancestor_or_self(&self, ancestor: &str, tenant_id: &str) -> bool {
        let mut cur = Some(tenant_id);
        let mut steps = 0;
        while let Some(id) = cur {
            if id == ancestor {
                return true;
            }
            cur = self.tenants.get(id).and_then(|t| t.parent.as_deref());
            steps += 1;
            if steps > self.tenants.len() {
                return false;
            }
        }
        false
    }

    /// Number of edges from the tenant up to its root.
    pub fn depth(&self, tenant_id: &str) -> Option<usize> {
        let mut depth = 0;
        let mut cur = self.tenants.get(tenant_id)?;
        while let Some(p) = &cur.parent {
            cur = self.tenants.get(p)?;
            depth += 1;
            if depth > self.tenants.len() {
                return None;
            }
        }
        Some(depth)
    }

    /// Every parent exists and every ancestor chain terminates at a root.
    pub fn is_forest(&self) -> bool {
        self.tenants.keys().all(|id| self.depth(id).is_some())
    }

    /// Makes `scope` of `owner`'s data visible to `grantee`.
    pub fn grant(&mut self, owner: &str, grantee: &str, scope: DataScope) -> Result<(), PlatformError> {
        self.require(grantee)?;
        if owner == grantee {
            return Err(PlatformError::SelfGrant(owner.to_string()));
        }
        let owner_tenant = self
            .tenants
            .get_mut(owner)
            .ok_or_else(|| PlatformError::UnknownTenant(owner.to_string()))?;
        owner_tenant.shared_with.insert(Grant {
            grantee: grantee.to_string(),
            scope,
        });
        Ok(())
    }

    pub fn revoke(&mut self, owner: &str, grantee: &str, scope: &DataScope) -> Result<bool, PlatformError> {
        let owner_tenant = self
            .tenants
            .get_mut(owner)
            .ok_or_else(|| PlatformError::UnknownTenant(owner.to_string()))?;
        Ok(owner_tenant.shared_with.remove(&Grant {
            grantee: grantee.to_string(),
            scope: scope.clone(),
        }))
    }

    /// Whether `viewer` may read `owner`'s stream `(device_id, sensor_id)`.
    /// Ancestry confers nothing: only ownership or an explicit grant does.
    pub fn can_see(&self, viewer: &str, owner: &str, device_id: &str, sensor_id: &str) -> bool {
        if viewer == owner {
            return self.contains(viewer);
        }
        self.tenants.get(owner).is_some_and(|t| {
            t.shared_with
                .iter()
                .any(|g| g.grantee == viewer && g.scope.covers(device_id, sensor_id))
        })
    }

    /// Tenants other than the owner holding a grant that covers the stream.
    pub fn grantees_of(&self, owner: &str, device_id: &str, sensor_id: &str) -> BTreeSet<&str> {
        self.tenants
            .get(owner)
            .map(|t| {
                t.shared_with
                    .iter()
                    .filter(|g| g.scope.covers(device_id, sensor_id))
                    .map(|g| g.grantee.as_str())
                    .collect()
            })
            .unwrap_or_default()
    }
}
