use serde_json::{json, Value as Json};

use super::error::ModelError;
use super::schema::{ComponentSchema, DomainBounds, StateSchema};

/// A concrete state (or state component). The shape mirrors
/// [`ComponentSchema`]: maps and records are stored positionally, with map
/// slots in id-domain element order.
///
/// The derived `Ord` agrees with canonical enumeration order componentwise
/// (`false < true`, `⊥` before any id, lower level before higher).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StateValue {
    Enum(usize),
    Flag(bool),
    Int(i64),
    Ref(Option<usize>),
    Map(Vec<StateValue>),
    Record(Vec<StateValue>),
}

impl StateValue {
    /// Checks that the value fits the schema under the given bounds.
    pub fn conforms(&self, schema: &StateSchema, bounds: &DomainBounds) -> Result<(), ModelError> {
        let root = ComponentSchema::Record {
            fields: schema.components.clone(),
        };
        conforms_component(self, schema, bounds, &root, "state")
    }

    /// Renders the value as reader-facing JSON: enum level names, id element
    /// names as map keys, `null` for ⊥.
    pub fn render(&self, schema: &StateSchema) -> Json {
        let root = ComponentSchema::Record {
            fields: schema.components.clone(),
        };
        render_component(self, schema, &root)
    }

    /// Parses the output of [`StateValue::render`] back into a value.
    pub fn parse(
        schema: &StateSchema,
        bounds: &DomainBounds,
        json: &Json,
    ) -> Result<StateValue, ModelError> {
        let root = ComponentSchema::Record {
            fields: schema.components.clone(),
        };
        parse_component(json, schema, bounds, &root, "state")
    }
}

fn conforms_component(
    value: &StateValue,
    schema: &StateSchema,
    bounds: &DomainBounds,
    comp: &ComponentSchema,
    at: &str,
) -> Result<(), ModelError> {
    let fail = |what: &str| {
        Err(ModelError::SchemaMismatch(format!(
            "{at}: expected {what}, got {value:?}"
        )))
    };
    match comp {
        ComponentSchema::OrderedEnum { levels } => match value {
            StateValue::Enum(i) if *i < levels.len() => Ok(()),
            _ => fail(&format!("enum level below {}", levels.len())),
        },
        ComponentSchema::Flag { .. } => match value {
            StateValue::Flag(_) => Ok(()),
            _ => fail("flag"),
        },
        ComponentSchema::BoundedInt { min, max } => match value {
            StateValue::Int(v) if v >= min && v <= max => Ok(()),
            _ => fail(&format!("integer in {min}..={max}")),
        },
        ComponentSchema::OptionalRef { domain } => {
            let size = bounds.domain_size(domain)?;
            match value {
                StateValue::Ref(None) => Ok(()),
                StateValue::Ref(Some(i)) if *i < size => Ok(()),
                _ => fail(&format!("reference into `{domain}` (size {size})")),
            }
        }
        ComponentSchema::FixedMap { domain, value: sub } => {
            let size = bounds.domain_size(domain)?;
            match value {
                StateValue::Map(entries) if entries.len() == size => {
                    for (i, entry) in entries.iter().enumerate() {
                        let at = format!("{at}[{}]", schema.elem_name(domain, i));
                        conforms_component(entry, schema, bounds, sub, &at)?;
                    }
                    Ok(())
                }
                _ => fail(&format!("map over `{domain}` with {size} entries")),
            }
        }
        ComponentSchema::Record { fields } => match value {
            StateValue::Record(vals) if vals.len() == fields.len() => {
                for ((fname, fcomp), val) in fields.iter().zip(vals) {
                    let at = format!("{at}.{fname}");
                    conforms_component(val, schema, bounds, fcomp, &at)?;
                }
                Ok(())
            }
            _ => fail(&format!("record with {} fields", fields.len())),
        },
    }
}

fn render_component(value: &StateValue, schema: &StateSchema, comp: &ComponentSchema) -> Json {
    match (comp, value) {
        (ComponentSchema::OrderedEnum { levels }, StateValue::Enum(i)) => {
            json!(levels.get(*i).cloned().unwrap_or_else(|| format!("#{i}")))
        }
        (ComponentSchema::Flag { .. }, StateValue::Flag(b)) => json!(b),
        (ComponentSchema::BoundedInt { .. }, StateValue::Int(v)) => json!(v),
        (ComponentSchema::OptionalRef { domain }, StateValue::Ref(r)) => match r {
            None => Json::Null,
            Some(i) => json!(schema.elem_name(domain, *i)),
        },
        (ComponentSchema::FixedMap { domain, value: sub }, StateValue::Map(entries)) => {
            let mut obj = serde_json::Map::new();
            for (i, entry) in entries.iter().enumerate() {
                obj.insert(
                    schema.elem_name(domain, i),
                    render_component(entry, schema, sub),
                );
            }
            Json::Object(obj)
        }
        (ComponentSchema::Record { fields }, StateValue::Record(vals)) => {
            let mut obj = serde_json::Map::new();
            for ((fname, fcomp), val) in fields.iter().zip(vals) {
                obj.insert(fname.clone(), render_component(val, schema, fcomp));
            }
            Json::Object(obj)
        }
        _ => json!(format!("{value:?}")),
    }
}

fn parse_component(
    json: &Json,
    schema: &StateSchema,
    bounds: &DomainBounds,
    comp: &ComponentSchema,
    at: &str,
) -> Result<StateValue, ModelError> {
    let fail = |what: &str| {
        Err(ModelError::SchemaMismatch(format!(
            "{at}: expected {what}, got {json}"
        )))
    };
    match comp {
        ComponentSchema::OrderedEnum { levels } => match json.as_str() {
            Some(name) => match levels.iter().position(|l| l == name) {
                Some(i) => Ok(StateValue::Enum(i)),
                None => fail(&format!("one of {levels:?}")),
            },
            None => fail("enum level name"),
        },
        ComponentSchema::Flag { .. } => match json.as_bool() {
            Some(b) => Ok(StateValue::Flag(b)),
            None => fail("boolean"),
        },
        ComponentSchema::BoundedInt { min, max } => match json.as_i64() {
            Some(v) if v >= *min && v <= *max => Ok(StateValue::Int(v)),
            _ => fail(&format!("integer in {min}..={max}")),
        },
        ComponentSchema::OptionalRef { domain } => {
            if json.is_null() {
                return Ok(StateValue::Ref(None));
            }
            match json.as_str() {
                Some(name) => Ok(StateValue::Ref(Some(schema.elem_index(bounds, domain, name)?))),
                None => fail("null or element name"),
            }
        }
        ComponentSchema::FixedMap { domain, value: sub } => {
            let size = bounds.domain_size(domain)?;
            let obj = match json.as_object() {
                Some(o) => o,
                None => return fail("object"),
            };
            let mut entries = Vec::with_capacity(size);
            for i in 0..size {
                let key = schema.elem_name(domain, i);
                let sub_json = obj.get(&key).ok_or_else(|| {
                    ModelError::SchemaMismatch(format!("{at}: missing map key `{key}`"))
                })?;
                entries.push(parse_component(
                    sub_json,
                    schema,
                    bounds,
                    sub,
                    &format!("{at}[{key}]"),
                )?);
            }
            Ok(StateValue::Map(entries))
        }
        ComponentSchema::Record { fields } => {
            let obj = match json.as_object() {
                Some(o) => o,
                None => return fail("object"),
            };
            let mut vals = Vec::with_capacity(fields.len());
            for (fname, fcomp) in fields {
                let sub_json = obj.get(fname).ok_or_else(|| {
                    ModelError::SchemaMismatch(format!("{at}: missing field `{fname}`"))
                })?;
                vals.push(parse_component(
                    sub_json,
                    schema,
                    bounds,
                    fcomp,
                    &format!("{at}.{fname}"),
                )?);
            }
            Ok(StateValue::Record(vals))
        }
    }
}
