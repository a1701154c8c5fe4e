use thiserror::Error;

/// Everything that can go wrong while building, enumerating, or evaluating a
/// spec. Variants are deliberately coarse; the payload strings carry the
/// specifics a user needs to fix their spec or bounds.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    /// The bounded domain exceeds the configured enumeration cap.
    #[error("domain too large: {states} states exceed the enumeration cap of {cap}")]
    DomainTooLarge { states: u128, cap: u64 },

    /// A schema component references a domain the bounds do not cover.
    #[error("unbounded component: {0}")]
    UnboundedComponent(String),

    /// A predicate or effect references something the schema does not declare.
    #[error("unknown identifier `{name}`{}", context_suffix(.context))]
    UnknownIdentifier { name: String, context: String },

    /// A value or expression does not fit the schema at the referenced spot.
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    /// Bounds are internally inconsistent or unusable for the requested spec.
    #[error("bad bounds: {0}")]
    BadBounds(String),

    #[error("unknown operation `{0}`")]
    UnknownOperation(String),

    #[error("bad parameters for `{op}`: {reason}")]
    BadParams { op: String, reason: String },

    /// `apply_op` was asked to run an operation whose guard is false.
    #[error("precondition of `{op}` violated (failing clause: {clause})")]
    PreconditionViolated { op: String, clause: String },

    /// The spec lacks a required part (checked by the compliance stage).
    #[error("spec is missing its {0}")]
    MissingPart(&'static str),
}

fn context_suffix(context: &str) -> String {
    if context.is_empty() {
        String::new()
    } else {
        format!(" ({context})")
    }
}
