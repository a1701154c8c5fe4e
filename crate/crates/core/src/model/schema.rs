use std::collections::BTreeMap;

use serde::Serialize;

use super::error::ModelError;

/// Name of the implicit id domain whose cardinality is
/// [`DomainBounds::replica_count`]. Schemas may reference it like any declared
/// domain (e.g. a per-replica token map) without declaring it themselves.
pub const REPLICAS_DOMAIN: &str = "replicas";

/// A named, finite id domain. Element display names are `prefix` + 1-based
/// index (`b1`, `b2`, ...); the cardinality comes from [`DomainBounds`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IdDomainDecl {
    pub name: String,
    pub elem_prefix: String,
}

/// One component of a state schema. All kinds are finite once bounds are
/// supplied, so the full state space is a finite product.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum ComponentSchema {
    /// Totally ordered levels, listed from bottom to top.
    OrderedEnum { levels: Vec<String> },
    /// A boolean with a declared polarity: `top` names the lattice top.
    Flag { top: bool },
    /// An integer in `min..=max` (inclusive).
    BoundedInt { min: i64, max: i64 },
    /// Either none (⊥) or an element of the named id domain.
    OptionalRef { domain: String },
    /// A total map from the named id domain to a sub-component.
    FixedMap {
        domain: String,
        value: Box<ComponentSchema>,
    },
    /// A product of named sub-components.
    Record {
        fields: Vec<(String, ComponentSchema)>,
    },
}

/// The shape of a replicated object's state: declared id domains plus an
/// ordered list of named components. Declaration order is the significance
/// order for canonical state enumeration (first component varies slowest).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StateSchema {
    pub id_domains: Vec<IdDomainDecl>,
    pub components: Vec<(String, ComponentSchema)>,
}

/// Finite bounds that make a schema enumerable: a replica count, a
/// cardinality for every declared id domain, effective ranges for named
/// integers (consumed by spec constructors), and a cap on how many states
/// enumeration may produce before giving up.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DomainBounds {
    pub replica_count: usize,
    pub id_domains: BTreeMap<String, usize>,
    pub int_ranges: BTreeMap<String, (i64, i64)>,
    pub enumeration_cap: u64,
}

pub const DEFAULT_ENUMERATION_CAP: u64 = 4_000_000;

impl Default for DomainBounds {
    fn default() -> Self {
        DomainBounds {
            replica_count: 2,
            id_domains: BTreeMap::new(),
            int_ranges: BTreeMap::new(),
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
        }
    }
}

impl DomainBounds {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.replica_count == 0 {
            return Err(ModelError::BadBounds("replica count must be at least 1".into()));
        }
        if self.enumeration_cap == 0 {
            return Err(ModelError::BadBounds("enumeration cap must be positive".into()));
        }
        for (name, card) in &self.id_domains {
            if *card == 0 {
                return Err(ModelError::BadBounds(format!(
                    "id domain `{name}` must have at least one element"
                )));
            }
        }
        for (name, (lo, hi)) in &self.int_ranges {
            if lo > hi {
                return Err(ModelError::BadBounds(format!(
                    "integer range `{name}` is empty ({lo}..={hi})"
                )));
            }
        }
        Ok(())
    }

    /// Cardinality of a named id domain (`replicas` is implicit).
    pub fn domain_size(&self, name: &str) -> Result<usize, ModelError> {
        if name == REPLICAS_DOMAIN {
            return Ok(self.replica_count);
        }
        self.id_domains
            .get(name)
            .copied()
            .ok_or_else(|| ModelError::UnboundedComponent(format!("id domain `{name}` has no declared cardinality")))
    }

    /// The effective range for a named integer, or the given default.
    pub fn int_range_or(&self, name: &str, default: (i64, i64)) -> (i64, i64) {
        self.int_ranges.get(name).copied().unwrap_or(default)
    }
}

impl StateSchema {
    pub fn component(&self, name: &str) -> Option<&ComponentSchema> {
        self.components
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, c)| c)
    }

    pub fn domain_decl(&self, name: &str) -> Option<&IdDomainDecl> {
        self.id_domains.iter().find(|d| d.name == name)
    }

    /// Display name of element `i` of a domain (`b1`, `r2`, ...).
    pub fn elem_name(&self, domain: &str, i: usize) -> String {
        let prefix = self
            .domain_decl(domain)
            .map(|d| d.elem_prefix.as_str())
            .unwrap_or_else(|| if domain == REPLICAS_DOMAIN { "r" } else { "#" });
        format!("{prefix}{}", i + 1)
    }

    /// Inverse of [`StateSchema::elem_name`].
    pub fn elem_index(
        &self,
        bounds: &DomainBounds,
        domain: &str,
        name: &str,
    ) -> Result<usize, ModelError> {
        let size = bounds.domain_size(domain)?;
        for i in 0..size {
            if self.elem_name(domain, i) == name {
                return Ok(i);
            }
        }
        Err(ModelError::UnknownIdentifier {
            name: name.into(),
            context: format!("no such element in id domain `{domain}`"),
        })
    }

    /// Structural validity: sane components, no duplicate names, and every
    /// referenced id domain covered by the bounds.
    pub fn validate(&self, bounds: &DomainBounds) -> Result<(), ModelError> {
        let mut seen = Vec::new();
        for decl in &self.id_domains {
            if seen.contains(&&decl.name) {
                return Err(ModelError::SchemaMismatch(format!(
                    "id domain `{}` declared twice",
                    decl.name
                )));
            }
            seen.push(&decl.name);
            if decl.name != REPLICAS_DOMAIN {
                bounds.domain_size(&decl.name)?;
            }
        }
        let mut comp_names = Vec::new();
        for (name, comp) in &self.components {
            if comp_names.contains(&name) {
                return Err(ModelError::SchemaMismatch(format!(
                    "component `{name}` declared twice"
                )));
            }
            comp_names.push(name);
            self.validate_component(bounds, name, comp)?;
        }
        Ok(())
    }

    fn validate_component(
        &self,
        bounds: &DomainBounds,
        at: &str,
        comp: &ComponentSchema,
    ) -> Result<(), ModelError> {
        match comp {
            ComponentSchema::OrderedEnum { levels } => {
                if levels.is_empty() {
                    return Err(ModelError::SchemaMismatch(format!(
                        "enum `{at}` has no levels"
                    )));
                }
                Ok(())
            }
            ComponentSchema::Flag { .. } => Ok(()),
            ComponentSchema::BoundedInt { min, max } => {
                if min > max {
                    return Err(ModelError::SchemaMismatch(format!(
                        "integer `{at}` has empty range {min}..={max}"
                    )));
                }
                Ok(())
            }
            ComponentSchema::OptionalRef { domain } | ComponentSchema::FixedMap { domain, .. } => {
                if self.domain_decl(domain).is_none() && domain != REPLICAS_DOMAIN {
                    return Err(ModelError::UnknownIdentifier {
                        name: domain.clone(),
                        context: format!("id domain referenced by `{at}` is not declared"),
                    });
                }
                bounds.domain_size(domain)?;
                if let ComponentSchema::FixedMap { value, .. } = comp {
                    self.validate_component(bounds, at, value)?;
                }
                Ok(())
            }
            ComponentSchema::Record { fields } => {
                let mut names = Vec::new();
                for (fname, fcomp) in fields {
                    if names.contains(&fname) {
                        return Err(ModelError::SchemaMismatch(format!(
                            "field `{fname}` of `{at}` declared twice"
                        )));
                    }
                    names.push(fname);
                    self.validate_component(bounds, at, fcomp)?;
                }
                Ok(())
            }
        }
    }
}
