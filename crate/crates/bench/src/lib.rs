//! Shared fixtures for the benchmark targets.

use replicheck_core::model::DomainBounds;
use replicheck_core::specs::find_builtin;
use replicheck_core::ObjectSpec;

/// A built-in object at its default bounds.
pub fn builtin(name: &str) -> (ObjectSpec, DomainBounds) {
    let builtin = find_builtin(name).expect("known built-in");
    let bounds = builtin.default_bounds();
    (builtin.build(&bounds).expect("buildable"), bounds)
}
