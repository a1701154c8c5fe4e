//! Canonical enumeration of all states a schema admits.
//!
//! States are ordered lexicographically over components in schema declaration
//! order: the first component is the most significant digit. Within one
//! component the order is: enum levels bottom-up, flags `[false, true]`,
//! integers ascending, optional refs `⊥` first then elements in domain
//! order, maps and records again first-slot-most-significant.
//!
//! `rank` and `unrank` convert between a state and its position in this
//! order, which gives counterexample minimality and cheap deduplication.

use super::error::ModelError;
use super::schema::{ComponentSchema, DomainBounds, StateSchema};
use super::value::StateValue;

/// The fully enumerated state space of a schema within bounds.
pub struct StateSpace {
    pub states: Vec<StateValue>,
    pub cardinality: u128,
}

/// Number of states the schema admits (before applying the cap).
pub fn cardinality(schema: &StateSchema, bounds: &DomainBounds) -> Result<u128, ModelError> {
    let mut total: u128 = 1;
    for (name, comp) in &schema.components {
        let card = component_cardinality(comp, bounds, name)?;
        total = total
            .checked_mul(card)
            .ok_or_else(|| ModelError::UnboundedComponent(format!("`{name}` overflows the state count")))?;
    }
    Ok(total)
}

fn component_cardinality(
    comp: &ComponentSchema,
    bounds: &DomainBounds,
    at: &str,
) -> Result<u128, ModelError> {
    let overflow = || ModelError::UnboundedComponent(format!("`{at}` overflows the state count"));
    match comp {
        ComponentSchema::OrderedEnum { levels } => Ok(levels.len() as u128),
        ComponentSchema::Flag { .. } => Ok(2),
        ComponentSchema::BoundedInt { min, max } => Ok((max - min) as u128 + 1),
        ComponentSchema::OptionalRef { domain } => Ok(bounds.domain_size(domain)? as u128 + 1),
        ComponentSchema::FixedMap { domain, value } => {
            let size = bounds.domain_size(domain)?;
            let sub = component_cardinality(value, bounds, at)?;
            let mut total: u128 = 1;
            for _ in 0..size {
                total = total.checked_mul(sub).ok_or_else(overflow)?;
            }
            Ok(total)
        }
        ComponentSchema::Record { fields } => {
            let mut total: u128 = 1;
            for (fname, fcomp) in fields {
                total = total
                    .checked_mul(component_cardinality(fcomp, bounds, fname)?)
                    .ok_or_else(overflow)?;
            }
            Ok(total)
        }
    }
}

/// Materializes every state in canonical order, failing with
/// [`ModelError::DomainTooLarge`] if the count exceeds the bounds' cap.
pub fn enumerate_states(
    schema: &StateSchema,
    bounds: &DomainBounds,
) -> Result<StateSpace, ModelError> {
    bounds.validate()?;
    schema.validate(bounds)?;
    let card = cardinality(schema, bounds)?;
    if card > bounds.enumeration_cap as u128 {
        return Err(ModelError::DomainTooLarge {
            states: card,
            cap: bounds.enumeration_cap,
        });
    }
    let mut states = Vec::with_capacity(card as usize);
    for i in 0..card {
        states.push(unrank_state(schema, bounds, i)?);
    }
    Ok(StateSpace {
        states,
        cardinality: card,
    })
}

/// The state at position `index` in canonical order.
pub fn unrank_state(
    schema: &StateSchema,
    bounds: &DomainBounds,
    index: u128,
) -> Result<StateValue, ModelError> {
    let root = ComponentSchema::Record {
        fields: schema.components.clone(),
    };
    let card = cardinality(schema, bounds)?;
    if index >= card {
        return Err(ModelError::SchemaMismatch(format!(
            "state index {index} out of range (cardinality {card})"
        )));
    }
    let mut idx = index;
    unrank_component(&root, bounds, &mut idx)
}

fn unrank_component(
    comp: &ComponentSchema,
    bounds: &DomainBounds,
    index: &mut u128,
) -> Result<StateValue, ModelError> {
    // Sub-components are visited least-significant first (reverse declaration
    // order), each peeling its digit off the low end of `index`.
    match comp {
        ComponentSchema::OrderedEnum { .. }
        | ComponentSchema::Flag { .. }
        | ComponentSchema::BoundedInt { .. }
        | ComponentSchema::OptionalRef { .. } => {
            let size = component_cardinality(comp, bounds, "leaf")?;
            let digit = *index % size;
            *index /= size;
            Ok(leaf_value(comp, digit))
        }
        ComponentSchema::FixedMap { domain, value } => {
            let size = bounds.domain_size(domain)?;
            let mut entries = vec![StateValue::Flag(false); size];
            for slot in (0..size).rev() {
                entries[slot] = unrank_component(value, bounds, index)?;
            }
            Ok(StateValue::Map(entries))
        }
        ComponentSchema::Record { fields } => {
            let mut vals = vec![StateValue::Flag(false); fields.len()];
            for (slot, (_, fcomp)) in fields.iter().enumerate().rev() {
                vals[slot] = unrank_component(fcomp, bounds, index)?;
            }
            Ok(StateValue::Record(vals))
        }
    }
}

fn leaf_value(comp: &ComponentSchema, digit: u128) -> StateValue {
    match comp {
        ComponentSchema::OrderedEnum { .. } => StateValue::Enum(digit as usize),
        ComponentSchema::Flag { .. } => StateValue::Flag(digit == 1),
        ComponentSchema::BoundedInt { min, .. } => StateValue::Int(min + digit as i64),
        ComponentSchema::OptionalRef { .. } => {
            if digit == 0 {
                StateValue::Ref(None)
            } else {
                StateValue::Ref(Some(digit as usize - 1))
            }
        }
        _ => unreachable!("leaf_value on composite component"),
    }
}

/// Position of `value` in canonical order (inverse of [`unrank_state`]).
pub fn rank_state(
    schema: &StateSchema,
    bounds: &DomainBounds,
    value: &StateValue,
) -> Result<u128, ModelError> {
    let root = ComponentSchema::Record {
        fields: schema.components.clone(),
    };
    rank_component(&root, bounds, value)
}

fn rank_component(
    comp: &ComponentSchema,
    bounds: &DomainBounds,
    value: &StateValue,
) -> Result<u128, ModelError> {
    let mismatch = || ModelError::SchemaMismatch(format!("cannot rank {value:?} against schema"));
    match comp {
        ComponentSchema::OrderedEnum { .. }
        | ComponentSchema::Flag { .. }
        | ComponentSchema::BoundedInt { .. }
        | ComponentSchema::OptionalRef { .. } => {
            let digit = match (comp, value) {
                (ComponentSchema::OrderedEnum { .. }, StateValue::Enum(i)) => *i as u128,
                (ComponentSchema::Flag { .. }, StateValue::Flag(b)) => u128::from(*b),
                (ComponentSchema::BoundedInt { min, .. }, StateValue::Int(v)) => {
                    (v - min) as u128
                }
                (ComponentSchema::OptionalRef { .. }, StateValue::Ref(None)) => 0,
                (ComponentSchema::OptionalRef { .. }, StateValue::Ref(Some(i))) => *i as u128 + 1,
                _ => return Err(mismatch()),
            };
            Ok(digit)
        }
        ComponentSchema::FixedMap { value: sub, .. } => {
            let entries = match value {
                StateValue::Map(e) => e,
                _ => return Err(mismatch()),
            };
            let radix = component_cardinality(sub, bounds, "map value")?;
            let mut acc: u128 = 0;
            for entry in entries {
                acc = acc * radix + rank_component(sub, bounds, entry)?;
            }
            Ok(acc)
        }
        ComponentSchema::Record { fields } => {
            let vals = match value {
                StateValue::Record(v) => v,
                _ => return Err(mismatch()),
            };
            let mut acc: u128 = 0;
            for ((fname, fcomp), val) in fields.iter().zip(vals) {
                let radix = component_cardinality(fcomp, bounds, fname)?;
                acc = acc * radix + rank_component(fcomp, bounds, val)?;
            }
            Ok(acc)
        }
    }
}
