//! Object specs: schema + initial state + order + operations + merge +
//! invariant + merge precondition.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use super::error::ModelError;
use super::eval::EvalCtx;
use super::expr::Expr;
use super::schema::{DomainBounds, StateSchema};
use super::value::StateValue;

/// How many states a predicate talks about.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arity {
    Unary,
    Binary,
}

/// A named conjunct of a predicate. Reports identify failures by clause name.
#[derive(Debug, Clone)]
pub struct Clause {
    pub name: String,
    pub expr: Expr,
}

/// A conjunction of named clauses. An empty clause list is the constant
/// `true` (used for trivial invariants and merge preconditions).
#[derive(Debug, Clone)]
pub struct Predicate {
    pub arity: Arity,
    pub clauses: Vec<Clause>,
}

impl Predicate {
    pub fn truth(arity: Arity) -> Predicate {
        Predicate {
            arity,
            clauses: Vec::new(),
        }
    }

    pub fn unary(clauses: Vec<(&str, Expr)>) -> Predicate {
        Predicate {
            arity: Arity::Unary,
            clauses: clauses
                .into_iter()
                .map(|(name, expr)| Clause {
                    name: name.into(),
                    expr,
                })
                .collect(),
        }
    }

    pub fn binary(clauses: Vec<(&str, Expr)>) -> Predicate {
        Predicate {
            arity: Arity::Binary,
            clauses: clauses
                .into_iter()
                .map(|(name, expr)| Clause {
                    name: name.into(),
                    expr,
                })
                .collect(),
        }
    }

    pub fn is_trivially_true(&self) -> bool {
        self.clauses.is_empty()
    }
}

/// The domain an operation parameter ranges over. Instances are formed by
/// taking the cartesian product of all parameter domains in declaration
/// order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParamDomain {
    /// An element of a named id domain.
    Id(String),
    /// An integer in `min..=max`.
    Int { min: i64, max: i64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub domain: ParamDomain,
}

/// A bound parameter value: an id (as a domain index) or an integer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Binding {
    Id(usize),
    Int(i64),
}

/// Resolved operation arguments in declaration order.
pub type OpArgs = Vec<(String, Binding)>;

/// The call context an effect closure sees: the acting replica plus the
/// resolved parameter bindings.
pub struct OpCall<'a> {
    pub me: usize,
    pub args: &'a [(String, Binding)],
}

impl<'a> OpCall<'a> {
    pub fn id(&self, name: &str) -> usize {
        match self.lookup(name) {
            Some(Binding::Id(i)) => i,
            _ => panic!("operation effect read missing id parameter `{name}`"),
        }
    }

    pub fn int(&self, name: &str) -> i64 {
        match self.lookup(name) {
            Some(Binding::Int(v)) => v,
            _ => panic!("operation effect read missing int parameter `{name}`"),
        }
    }

    fn lookup(&self, name: &str) -> Option<Binding> {
        self.args
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, b)| *b)
    }
}

/// Deterministic, total state transformer of an operation.
pub type EffectFn = Arc<dyn Fn(&StateValue, &OpCall<'_>) -> StateValue + Send + Sync>;

/// Deterministic binary merge on states.
pub type MergeFn = Arc<dyn Fn(&StateValue, &StateValue) -> StateValue + Send + Sync>;

pub struct OperationSpec {
    pub name: String,
    pub params: Vec<ParamSpec>,
    /// Unary guard; may reference parameters and `me`.
    pub precondition: Predicate,
    pub effect: EffectFn,
}

impl fmt::Debug for OperationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OperationSpec")
            .field("name", &self.name)
            .field("params", &self.params)
            .finish_non_exhaustive()
    }
}

/// A spec-level static id table, e.g. the bid → origin-replica assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StaticIdMap {
    pub from_domain: String,
    pub to_domain: String,
    pub table: Vec<usize>,
}

/// A complete description of a replicated object. `initial`, `leq` and
/// `merge` are optional only so that incomplete specs can be *represented*
/// and rejected by the compliance stage; the built-in specs always supply
/// them.
pub struct ObjectSpec {
    pub name: String,
    pub schema: StateSchema,
    pub initial: Option<StateValue>,
    /// Binary comparison: local operand ≤ remote operand.
    pub leq: Option<Predicate>,
    pub merge: Option<MergeFn>,
    pub operations: Vec<OperationSpec>,
    /// Binary merge precondition (constant `true` allowed).
    pub pre_merge: Predicate,
    /// Unary application invariant (constant `true` allowed).
    pub invariant: Predicate,
    pub static_maps: BTreeMap<String, StaticIdMap>,
}

impl fmt::Debug for ObjectSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ObjectSpec")
            .field("name", &self.name)
            .field("operations", &self.operations)
            .finish_non_exhaustive()
    }
}

impl ObjectSpec {
    /// Fails with the first missing required part, in a fixed order.
    pub fn require_complete(&self) -> Result<(), ModelError> {
        if self.initial.is_none() {
            return Err(ModelError::MissingPart("initial state"));
        }
        if self.leq.is_none() {
            return Err(ModelError::MissingPart("comparison predicate"));
        }
        if self.merge.is_none() {
            return Err(ModelError::MissingPart("merge function"));
        }
        if self.operations.is_empty() {
            return Err(ModelError::MissingPart("operations (need at least one)"));
        }
        Ok(())
    }

    pub fn initial_state(&self) -> Result<&StateValue, ModelError> {
        self.initial
            .as_ref()
            .ok_or(ModelError::MissingPart("initial state"))
    }

    pub fn leq_predicate(&self) -> Result<&Predicate, ModelError> {
        self.leq
            .as_ref()
            .ok_or(ModelError::MissingPart("comparison predicate"))
    }

    pub fn operation(&self, name: &str) -> Result<&OperationSpec, ModelError> {
        self.operations
            .iter()
            .find(|op| op.name == name)
            .ok_or_else(|| ModelError::UnknownOperation(name.into()))
    }

    /// `a ≤ b` under the spec's comparison predicate.
    pub fn leq_states(
        &self,
        bounds: &DomainBounds,
        a: &StateValue,
        b: &StateValue,
        me: usize,
    ) -> Result<bool, ModelError> {
        let pred = self.leq_predicate()?;
        EvalCtx::binary(self, bounds, a, b, me, &[]).holds(pred)
    }

    /// Least upper bound candidate: `merge(a, b)`. Validates that both
    /// inputs and the output conform to the schema.
    pub fn merge_states(
        &self,
        bounds: &DomainBounds,
        a: &StateValue,
        b: &StateValue,
    ) -> Result<StateValue, ModelError> {
        let merge = self
            .merge
            .as_ref()
            .ok_or(ModelError::MissingPart("merge function"))?;
        a.conforms(&self.schema, bounds)?;
        b.conforms(&self.schema, bounds)?;
        let merged = merge(a, b);
        merged.conforms(&self.schema, bounds)?;
        Ok(merged)
    }

    /// Runs one operation: validates the arguments against the declared
    /// parameter domains, checks the precondition (failing with the first
    /// false clause), applies the effect, and validates the result.
    pub fn apply_op(
        &self,
        bounds: &DomainBounds,
        op_name: &str,
        args: &[(String, Binding)],
        me: usize,
        state: &StateValue,
    ) -> Result<StateValue, ModelError> {
        let op = self.operation(op_name)?;
        self.check_args(bounds, op, args)?;
        state.conforms(&self.schema, bounds)?;
        let ctx = EvalCtx::unary(self, bounds, state, me, args);
        let verdict = ctx.verdict(&op.precondition)?;
        if !verdict.holds {
            let clause = verdict
                .clauses
                .iter()
                .find(|c| !c.holds)
                .map(|c| c.name.clone())
                .unwrap_or_else(|| "precondition".into());
            return Err(ModelError::PreconditionViolated {
                op: op_name.into(),
                clause,
            });
        }
        let call = OpCall { me, args };
        let next = (op.effect)(state, &call);
        next.conforms(&self.schema, bounds)?;
        Ok(next)
    }

    fn check_args(
        &self,
        bounds: &DomainBounds,
        op: &OperationSpec,
        args: &[(String, Binding)],
    ) -> Result<(), ModelError> {
        if args.len() != op.params.len() {
            return Err(ModelError::BadParams {
                op: op.name.clone(),
                reason: format!("expected {} argument(s), got {}", op.params.len(), args.len()),
            });
        }
        for param in &op.params {
            let arg = args.iter().find(|(n, _)| *n == param.name).map(|(_, b)| b);
            match (arg, &param.domain) {
                (Some(Binding::Id(i)), ParamDomain::Id(domain)) => {
                    let size = bounds.domain_size(domain)?;
                    if *i >= size {
                        return Err(ModelError::BadParams {
                            op: op.name.clone(),
                            reason: format!(
                                "id parameter `{}` out of range for `{domain}` (size {size})",
                                param.name
                            ),
                        });
                    }
                }
                (Some(Binding::Int(v)), ParamDomain::Int { min, max }) => {
                    if v < min || v > max {
                        return Err(ModelError::BadParams {
                            op: op.name.clone(),
                            reason: format!(
                                "int parameter `{}` = {v} outside {min}..={max}",
                                param.name
                            ),
                        });
                    }
                }
                (Some(_), _) => {
                    return Err(ModelError::BadParams {
                        op: op.name.clone(),
                        reason: format!("parameter `{}` has the wrong kind", param.name),
                    });
                }
                (None, _) => {
                    return Err(ModelError::BadParams {
                        op: op.name.clone(),
                        reason: format!("missing parameter `{}`", param.name),
                    });
                }
            }
        }
        Ok(())
    }

    /// All (operation, argument list) instances within bounds, in canonical
    /// order: operations in declaration order, parameters as a cartesian
    /// product with the first parameter varying slowest.
    pub fn op_instances(
        &self,
        bounds: &DomainBounds,
    ) -> Result<Vec<(usize, OpArgs)>, ModelError> {
        let mut out = Vec::new();
        for (op_idx, op) in self.operations.iter().enumerate() {
            let mut domains: Vec<Vec<Binding>> = Vec::with_capacity(op.params.len());
            for param in &op.params {
                match &param.domain {
                    ParamDomain::Id(name) => {
                        let size = bounds.domain_size(name)?;
                        domains.push((0..size).map(Binding::Id).collect());
                    }
                    ParamDomain::Int { min, max } => {
                        domains.push((*min..=*max).map(Binding::Int).collect());
                    }
                }
            }
            if domains.iter().any(|d| d.is_empty()) {
                // An empty parameter domain leaves the operation with no
                // instances at these bounds.
                continue;
            }
            let mut cursor = vec![0usize; domains.len()];
            loop {
                let args: Vec<(String, Binding)> = op
                    .params
                    .iter()
                    .enumerate()
                    .map(|(k, p)| (p.name.clone(), domains[k][cursor[k]]))
                    .collect();
                out.push((op_idx, args));
                // Advance like an odometer, last parameter fastest.
                let mut done = true;
                for pos in (0..domains.len()).rev() {
                    cursor[pos] += 1;
                    if cursor[pos] < domains[pos].len() {
                        done = false;
                        break;
                    }
                    cursor[pos] = 0;
                }
                if done {
                    break;
                }
            }
        }
        Ok(out)
    }

    /// Parses reader-facing argument values — id element names as strings,
    /// integers as numbers — into bindings, in declaration order.
    pub fn parse_args(
        &self,
        bounds: &DomainBounds,
        op_name: &str,
        args: &serde_json::Map<String, serde_json::Value>,
    ) -> Result<Vec<(String, Binding)>, ModelError> {
        let op = self.operation(op_name)?;
        for key in args.keys() {
            if !op.params.iter().any(|p| p.name == *key) {
                return Err(ModelError::BadParams {
                    op: op_name.into(),
                    reason: format!("unknown argument `{key}`"),
                });
            }
        }
        let mut out = Vec::with_capacity(op.params.len());
        for p in &op.params {
            let raw = args.get(&p.name).ok_or_else(|| ModelError::BadParams {
                op: op_name.into(),
                reason: format!("missing argument `{}`", p.name),
            })?;
            let bound = match (&p.domain, raw) {
                (ParamDomain::Id(domain), serde_json::Value::String(name)) => {
                    Binding::Id(self.schema.elem_index(bounds, domain, name)?)
                }
                (ParamDomain::Int { .. }, serde_json::Value::Number(n)) => {
                    Binding::Int(n.as_i64().ok_or_else(|| ModelError::BadParams {
                        op: op_name.into(),
                        reason: format!("argument `{}` is not an integer", p.name),
                    })?)
                }
                _ => {
                    return Err(ModelError::BadParams {
                        op: op_name.into(),
                        reason: format!("argument `{}` has the wrong shape", p.name),
                    })
                }
            };
            out.push((p.name.clone(), bound));
        }
        Ok(out)
    }

    /// Renders an instance like `place_bid(b=b1, value=2)`.
    pub fn render_instance(&self, op_idx: usize, args: &[(String, Binding)]) -> String {
        let op = &self.operations[op_idx];
        if args.is_empty() {
            return format!("{}()", op.name);
        }
        let parts: Vec<String> = args
            .iter()
            .map(|(name, binding)| {
                let value = match binding {
                    Binding::Int(v) => v.to_string(),
                    Binding::Id(i) => {
                        let domain = op
                            .params
                            .iter()
                            .find(|p| p.name == *name)
                            .and_then(|p| match &p.domain {
                                ParamDomain::Id(d) => Some(d.clone()),
                                _ => None,
                            })
                            .unwrap_or_default();
                        self.schema.elem_name(&domain, *i)
                    }
                };
                format!("{name}={value}")
            })
            .collect();
        format!("{}({})", op.name, parts.join(", "))
    }
}
