//! The catalog of built-in specs: lookup by name, per-spec default bounds,
//! and the shared `key=value` bounds vocabulary used by the CLI and by
//! scenario files.

use crate::model::{DomainBounds, ModelError, ObjectSpec};

pub struct BuiltinSpec {
    pub name: &'static str,
    pub summary: &'static str,
    defaults: fn(&mut DomainBounds),
    build: fn(&DomainBounds) -> Result<ObjectSpec, ModelError>,
}

impl BuiltinSpec {
    /// The bounds this spec is checked at when none are given.
    pub fn default_bounds(&self) -> DomainBounds {
        let mut bounds = DomainBounds::default();
        (self.defaults)(&mut bounds);
        bounds
    }

    pub fn build(&self, bounds: &DomainBounds) -> Result<ObjectSpec, ModelError> {
        bounds.validate()?;
        (self.build)(bounds)
    }
}

static BUILTINS: &[BuiltinSpec] = &[
    BuiltinSpec {
        name: "pair_counter",
        summary: "two grow-only counter halves sharing a budget; safe alone, \
                  concurrent increments overshoot",
        defaults: |bounds| {
            bounds.int_ranges.insert("n".into(), (0, 12));
            bounds.int_ranges.insert("m".into(), (0, 12));
        },
        build: super::make_pair_counter,
    },
    BuiltinSpec {
        name: "auction_unsafe",
        summary: "replicated auction with local guards only; concurrent bids \
                  and closes can crown a losing winner",
        defaults: auction_defaults,
        build: super::make_auction_unsafe,
    },
    BuiltinSpec {
        name: "auction_safe",
        summary: "replicated auction guarded by per-replica bid tokens; \
                  closing waits until every token is revoked",
        defaults: auction_defaults,
        build: super::make_auction_safe,
    },
    BuiltinSpec {
        name: "gset",
        summary: "grow-only set; no invariant, trivially convergent",
        defaults: |bounds| {
            bounds.id_domains.insert("elems".into(), 3);
        },
        build: super::make_gset,
    },
];

fn auction_defaults(bounds: &mut DomainBounds) {
    bounds.id_domains.insert("bids".into(), 2);
    bounds.int_ranges.insert("amount".into(), (0, 2));
}

pub fn all_builtins() -> &'static [BuiltinSpec] {
    BUILTINS
}

pub fn find_builtin(name: &str) -> Option<&'static BuiltinSpec> {
    BUILTINS.iter().find(|b| b.name == name)
}

/// Applies one `key=value` bounds override. Keys accept both the short CLI
/// spelling and the field-name spelling used in scenario files.
pub fn apply_bound(bounds: &mut DomainBounds, key: &str, value: i64) -> Result<(), ModelError> {
    let positive = |what: &str| -> Result<usize, ModelError> {
        usize::try_from(value)
            .ok()
            .filter(|v| *v > 0)
            .ok_or_else(|| ModelError::BadBounds(format!("{what} must be a positive integer, got {value}")))
    };
    match key {
        "replicas" | "replica_count" => bounds.replica_count = positive("replica count")?,
        "bids" | "bid_slots" => {
            let n = positive("bid slot count")?;
            bounds.id_domains.insert("bids".into(), n);
        }
        "elems" | "elements" => {
            let n = positive("element count")?;
            bounds.id_domains.insert("elems".into(), n);
        }
        "amount_max" => {
            bounds.int_ranges.insert("amount".into(), (0, value));
        }
        "n_max" => {
            bounds.int_ranges.insert("n".into(), (0, value));
        }
        "m_max" => {
            bounds.int_ranges.insert("m".into(), (0, value));
        }
        "cap" | "enumeration_cap" => {
            bounds.enumeration_cap = u64::try_from(value)
                .ok()
                .filter(|v| *v > 0)
                .ok_or_else(|| {
                    ModelError::BadBounds(format!("enumeration cap must be positive, got {value}"))
                })?;
        }
        _ => {
            return Err(ModelError::BadBounds(format!("unknown bounds key `{key}`")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_builtin_builds_at_its_default_bounds() {
        for builtin in all_builtins() {
            let bounds = builtin.default_bounds();
            let spec = builtin.build(&bounds).unwrap();
            assert_eq!(spec.name, builtin.name);
            spec.require_complete().unwrap();
        }
    }

    #[test]
    fn bounds_keys_accept_both_spellings() {
        let mut a = DomainBounds::default();
        apply_bound(&mut a, "replicas", 3).unwrap();
        apply_bound(&mut a, "bids", 4).unwrap();
        let mut b = DomainBounds::default();
        apply_bound(&mut b, "replica_count", 3).unwrap();
        apply_bound(&mut b, "bid_slots", 4).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.replica_count, 3);
        assert_eq!(a.id_domains["bids"], 4);
    }

    #[test]
    fn unknown_bounds_keys_are_rejected() {
        let mut bounds = DomainBounds::default();
        match apply_bound(&mut bounds, "bidz", 2) {
            Err(ModelError::BadBounds(msg)) => assert!(msg.contains("bidz")),
            other => panic!("expected a bounds rejection, got {other:?}"),
        }
    }
}
