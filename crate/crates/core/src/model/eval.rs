//! Predicate evaluation over concrete states, with two entry points: a fast
//! boolean check and an explaining variant that reports per-clause verdicts
//! (including the first quantifier binding at which a failed clause breaks).
//!
//! A separate static walk ([`validate_predicate`]) type-checks expressions
//! against the schema before any state is enumerated, so evaluation proper
//! can assume well-formed input and treat shape errors as internal bugs.

use super::error::ModelError;
use super::expr::{CmpOp, Expr, IdExpr, IntExpr, Path, PathStep, RefRhs, Side};
use super::schema::{ComponentSchema, DomainBounds, REPLICAS_DOMAIN};
use super::spec::{Arity, Binding, ObjectSpec, ParamDomain, ParamSpec, Predicate};
use super::value::StateValue;

/// Outcome of one clause under [`EvalCtx::verdict`].
#[derive(Debug, Clone, serde::Serialize)]
pub struct ClauseVerdict {
    pub name: String,
    /// Rendered clause expression.
    pub text: String,
    pub holds: bool,
    /// For a failed clause: the outermost quantifier bindings at which the
    /// body first evaluates to false, e.g. `fails at b = b2`.
    pub note: Option<String>,
}

/// Outcome of a whole predicate: the conjunction plus per-clause detail.
#[derive(Debug, Clone)]
pub struct PredicateVerdict {
    pub holds: bool,
    pub clauses: Vec<ClauseVerdict>,
}

/// Binder bindings introduced by quantifiers and reference destructuring.
type Scope = Vec<(String, usize)>;

/// Everything an expression can read: the spec (for static id maps and the
/// schema), the bounds, one or two states, the evaluating replica, and the
/// operation arguments (empty outside precondition checks).
pub struct EvalCtx<'a> {
    pub spec: &'a ObjectSpec,
    pub bounds: &'a DomainBounds,
    pub local: &'a StateValue,
    pub remote: Option<&'a StateValue>,
    pub me: usize,
    pub params: &'a [(String, Binding)],
}

impl<'a> EvalCtx<'a> {
    pub fn unary(
        spec: &'a ObjectSpec,
        bounds: &'a DomainBounds,
        state: &'a StateValue,
        me: usize,
        params: &'a [(String, Binding)],
    ) -> EvalCtx<'a> {
        EvalCtx {
            spec,
            bounds,
            local: state,
            remote: None,
            me,
            params,
        }
    }

    pub fn binary(
        spec: &'a ObjectSpec,
        bounds: &'a DomainBounds,
        local: &'a StateValue,
        remote: &'a StateValue,
        me: usize,
        params: &'a [(String, Binding)],
    ) -> EvalCtx<'a> {
        EvalCtx {
            spec,
            bounds,
            local,
            remote: Some(remote),
            me,
            params,
        }
    }

    /// Does the full conjunction hold? Stops at the first false clause.
    pub fn holds(&self, pred: &Predicate) -> Result<bool, ModelError> {
        let mut scope = Scope::new();
        for clause in &pred.clauses {
            if !self.eval(&clause.expr, &mut scope)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Evaluates every clause and explains failures.
    pub fn verdict(&self, pred: &Predicate) -> Result<PredicateVerdict, ModelError> {
        let mut clauses = Vec::with_capacity(pred.clauses.len());
        let mut all = true;
        for clause in &pred.clauses {
            let mut scope = Scope::new();
            let holds = self.eval(&clause.expr, &mut scope)?;
            let note = if holds {
                None
            } else {
                self.failure_note(&clause.expr, &mut scope)?
            };
            all &= holds;
            clauses.push(ClauseVerdict {
                name: clause.name.clone(),
                text: clause.expr.to_string(),
                holds,
                note,
            });
        }
        Ok(PredicateVerdict { holds: all, clauses })
    }

    fn eval(&self, expr: &Expr, scope: &mut Scope) -> Result<bool, ModelError> {
        match expr {
            Expr::Const(b) => Ok(*b),
            Expr::Flag(side, path) => match self.resolve(*side, path, scope)? {
                StateValue::Flag(b) => Ok(*b),
                other => Err(internal(path, "flag", other)),
            },
            Expr::Not(e) => Ok(!self.eval(e, scope)?),
            Expr::And(parts) => {
                for p in parts {
                    if !self.eval(p, scope)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            Expr::Or(parts) => {
                for p in parts {
                    if self.eval(p, scope)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
            Expr::Implies(a, b) => Ok(!self.eval(a, scope)? || self.eval(b, scope)?),
            Expr::IntCmp(op, a, b) => {
                let a = self.eval_int(a, scope)?;
                let b = self.eval_int(b, scope)?;
                Ok(match op {
                    CmpOp::Eq => a == b,
                    CmpOp::Ne => a != b,
                    CmpOp::Le => a <= b,
                    CmpOp::Lt => a < b,
                    CmpOp::Ge => a >= b,
                    CmpOp::Gt => a > b,
                })
            }
            Expr::Forall(binder, domain, body) => {
                let size = self.bounds.domain_size(domain)?;
                for i in 0..size {
                    scope.push((binder.clone(), i));
                    let ok = self.eval(body, scope)?;
                    scope.pop();
                    if !ok {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            Expr::Exists(binder, domain, body) => {
                let size = self.bounds.domain_size(domain)?;
                for i in 0..size {
                    scope.push((binder.clone(), i));
                    let ok = self.eval(body, scope)?;
                    scope.pop();
                    if ok {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
            Expr::RefIsNone(side, path) => match self.resolve(*side, path, scope)? {
                StateValue::Ref(r) => Ok(r.is_none()),
                other => Err(internal(path, "reference", other)),
            },
            Expr::RefEq(side, path, rhs) => {
                let lhs = match self.resolve(*side, path, scope)? {
                    StateValue::Ref(r) => *r,
                    other => return Err(internal(path, "reference", other)),
                };
                let rhs = match rhs {
                    RefRhs::None => None,
                    RefRhs::Id(id) => Some(self.eval_id(id, scope)?),
                    RefRhs::Ref(s, p) => match self.resolve(*s, p, scope)? {
                        StateValue::Ref(r) => *r,
                        other => return Err(internal(p, "reference", other)),
                    },
                };
                Ok(lhs == rhs)
            }
            Expr::RefSome {
                side,
                path,
                bind,
                body,
            } => match self.resolve(*side, path, scope)? {
                StateValue::Ref(None) => Ok(false),
                StateValue::Ref(Some(i)) => {
                    scope.push((bind.clone(), *i));
                    let ok = self.eval(body, scope)?;
                    scope.pop();
                    Ok(ok)
                }
                other => Err(internal(path, "reference", other)),
            },
            Expr::IdEq(a, b) => Ok(self.eval_id(a, scope)? == self.eval_id(b, scope)?),
            Expr::IdLe(a, b) => Ok(self.eval_id(a, scope)? <= self.eval_id(b, scope)?),
        }
    }

    fn eval_int(&self, expr: &IntExpr, scope: &mut Scope) -> Result<i64, ModelError> {
        match expr {
            IntExpr::Const(v) | IntExpr::Named(_, v) => Ok(*v),
            IntExpr::Param(name) => match self.params.iter().find(|(n, _)| n == name) {
                Some((_, Binding::Int(v))) => Ok(*v),
                _ => Err(ModelError::UnknownIdentifier {
                    name: name.clone(),
                    context: "no such integer parameter in scope".into(),
                }),
            },
            IntExpr::Comp(side, path) => match self.resolve(*side, path, scope)? {
                StateValue::Int(v) => Ok(*v),
                StateValue::Enum(i) => Ok(*i as i64),
                other => Err(internal(path, "integer or enum", other)),
            },
            IntExpr::Add(a, b) => Ok(self.eval_int(a, scope)? + self.eval_int(b, scope)?),
            IntExpr::Max(a, b) => Ok(self.eval_int(a, scope)?.max(self.eval_int(b, scope)?)),
        }
    }

    fn eval_id(&self, expr: &IdExpr, scope: &mut Scope) -> Result<usize, ModelError> {
        match expr {
            IdExpr::Me => Ok(self.me),
            IdExpr::Var(name) => {
                if let Some((_, i)) = scope.iter().rev().find(|(n, _)| n == name) {
                    return Ok(*i);
                }
                match self.params.iter().find(|(n, _)| n == name) {
                    Some((_, Binding::Id(i))) => Ok(*i),
                    _ => Err(ModelError::UnknownIdentifier {
                        name: name.clone(),
                        context: "no such binder or id parameter in scope".into(),
                    }),
                }
            }
            IdExpr::StaticMap(map, arg) => {
                let table = self.spec.static_maps.get(map).ok_or_else(|| {
                    ModelError::UnknownIdentifier {
                        name: map.clone(),
                        context: "no such static id map".into(),
                    }
                })?;
                let i = self.eval_id(arg, scope)?;
                table.table.get(i).copied().ok_or_else(|| {
                    ModelError::SchemaMismatch(format!(
                        "static id map `{map}` has no entry for index {i}"
                    ))
                })
            }
        }
    }

    /// Walks a component path down one of the two states.
    fn resolve(&self, side: Side, path: &Path, scope: &mut Scope) -> Result<&'a StateValue, ModelError> {
        let mut value: &'a StateValue = match side {
            Side::Local => self.local,
            Side::Remote => self.remote.ok_or_else(|| {
                ModelError::SchemaMismatch(
                    "remote-state access in a single-state predicate".into(),
                )
            })?,
        };
        // The root is a record over the schema's component list.
        let mut fields: Option<&'a [(String, ComponentSchema)]> =
            Some(&self.spec.schema.components);
        let mut map_elem: Option<&'a ComponentSchema> = None;
        for step in path {
            match step {
                PathStep::Field(name) => {
                    let fs = fields.ok_or_else(|| {
                        ModelError::SchemaMismatch(format!(
                            "field `{name}` selected on a non-record component"
                        ))
                    })?;
                    let idx = fs.iter().position(|(n, _)| n == name).ok_or_else(|| {
                        ModelError::UnknownIdentifier {
                            name: name.clone(),
                            context: "no such component or field".into(),
                        }
                    })?;
                    let StateValue::Record(vals) = value else {
                        return Err(internal(path, "record", value));
                    };
                    value = &vals[idx];
                    (fields, map_elem) = sub_shape(&fs[idx].1);
                }
                PathStep::Index(id) => {
                    let elem = map_elem.ok_or_else(|| {
                        ModelError::SchemaMismatch(
                            "indexing applied to a non-map component".into(),
                        )
                    })?;
                    let i = self.eval_id(id, scope)?;
                    let StateValue::Map(vals) = value else {
                        return Err(internal(path, "map", value));
                    };
                    let entry = vals.get(i).ok_or_else(|| {
                        ModelError::SchemaMismatch(format!(
                            "map index {i} out of range (size {})",
                            vals.len()
                        ))
                    })?;
                    value = entry;
                    (fields, map_elem) = sub_shape(elem);
                }
            }
        }
        Ok(value)
    }

    /// For a failed expression, describes the first quantifier bindings on
    /// the path to a false leaf. Returns `None` when there is nothing more
    /// specific to say than "the clause is false".
    fn failure_note(&self, expr: &Expr, scope: &mut Scope) -> Result<Option<String>, ModelError> {
        match expr {
            Expr::Forall(binder, domain, body) => {
                let size = self.bounds.domain_size(domain)?;
                for i in 0..size {
                    scope.push((binder.clone(), i));
                    let ok = self.eval(body, scope)?;
                    if !ok {
                        let inner = self.failure_note(body, scope)?;
                        scope.pop();
                        let here = format!(
                            "{binder} = {}",
                            self.spec.schema.elem_name(domain, i)
                        );
                        return Ok(Some(match inner {
                            Some(rest) if rest.starts_with("fails at ") => {
                                format!("fails at {here}, {}", &rest["fails at ".len()..])
                            }
                            _ => format!("fails at {here}"),
                        }));
                    }
                    scope.pop();
                }
                Ok(None)
            }
            Expr::And(parts) => {
                for p in parts {
                    if !self.eval(p, scope)? {
                        return self.failure_note(p, scope);
                    }
                }
                Ok(None)
            }
            Expr::Implies(a, b) => {
                if self.eval(a, scope)? && !self.eval(b, scope)? {
                    self.failure_note(b, scope)
                } else {
                    Ok(None)
                }
            }
            _ => Ok(None),
        }
    }
}

/// Shape of a component one level down: record fields and/or map element.
type SubShape<'a> = (
    Option<&'a [(String, ComponentSchema)]>,
    Option<&'a ComponentSchema>,
);

fn sub_shape(comp: &ComponentSchema) -> SubShape<'_> {
    match comp {
        ComponentSchema::Record { fields } => (Some(fields), None),
        ComponentSchema::FixedMap { value, .. } => (None, Some(value)),
        _ => (None, None),
    }
}

fn internal(path: &Path, wanted: &str, got: &StateValue) -> ModelError {
    let shown: Vec<String> = path
        .iter()
        .map(|s| match s {
            PathStep::Field(n) => n.clone(),
            PathStep::Index(_) => "[..]".into(),
        })
        .collect();
    ModelError::SchemaMismatch(format!(
        "component `{}` is not a {wanted} (found {got:?})",
        shown.join(".")
    ))
}

// ---------------------------------------------------------------------------
// static validation

/// What a path is allowed to end at.
#[derive(Clone, Copy, PartialEq)]
enum Want {
    Flag,
    Numeric,
    Ref,
}

/// True when the expression reads `me` anywhere. Replica-independent
/// predicates (the invariant and the comparison) must not.
pub fn expr_references_me(expr: &Expr) -> bool {
    fn id_uses_me(id: &IdExpr) -> bool {
        match id {
            IdExpr::Me => true,
            IdExpr::Var(_) => false,
            IdExpr::StaticMap(_, arg) => id_uses_me(arg),
        }
    }
    fn path_uses_me(path: &Path) -> bool {
        path.iter().any(|s| match s {
            PathStep::Field(_) => false,
            PathStep::Index(id) => id_uses_me(id),
        })
    }
    fn int_uses_me(e: &IntExpr) -> bool {
        match e {
            IntExpr::Const(_) | IntExpr::Named(..) | IntExpr::Param(_) => false,
            IntExpr::Comp(_, path) => path_uses_me(path),
            IntExpr::Add(a, b) | IntExpr::Max(a, b) => int_uses_me(a) || int_uses_me(b),
        }
    }
    match expr {
        Expr::Const(_) => false,
        Expr::Flag(_, path) | Expr::RefIsNone(_, path) => path_uses_me(path),
        Expr::Not(e) => expr_references_me(e),
        Expr::And(parts) | Expr::Or(parts) => parts.iter().any(expr_references_me),
        Expr::Implies(a, b) => expr_references_me(a) || expr_references_me(b),
        Expr::IntCmp(_, a, b) => int_uses_me(a) || int_uses_me(b),
        Expr::Forall(_, _, body) | Expr::Exists(_, _, body) => expr_references_me(body),
        Expr::RefEq(_, path, rhs) => {
            path_uses_me(path)
                || match rhs {
                    RefRhs::None => false,
                    RefRhs::Id(id) => id_uses_me(id),
                    RefRhs::Ref(_, p) => path_uses_me(p),
                }
        }
        Expr::RefSome { path, body, .. } => path_uses_me(path) || expr_references_me(body),
        Expr::IdEq(a, b) | Expr::IdLe(a, b) => id_uses_me(a) || id_uses_me(b),
    }
}

/// Type-checks every clause of a predicate against the schema: identifiers
/// resolve, paths fit component shapes, id domains line up, and remote-state
/// access only appears in two-state predicates. `context` names the
/// predicate in error messages (for example "invariant").
pub fn validate_predicate(
    spec: &ObjectSpec,
    bounds: &DomainBounds,
    pred: &Predicate,
    params: &[ParamSpec],
    context: &str,
) -> Result<(), ModelError> {
    let v = Validator {
        spec,
        bounds,
        arity: pred.arity,
        params,
    };
    for clause in &pred.clauses {
        let mut binders = Vec::new();
        v.check_expr(&clause.expr, &mut binders).map_err(|e| {
            ModelError::SchemaMismatch(format!("{context}, clause `{}`: {e}", clause.name))
        })?;
    }
    Ok(())
}

struct Validator<'a> {
    spec: &'a ObjectSpec,
    bounds: &'a DomainBounds,
    arity: Arity,
    params: &'a [ParamSpec],
}

impl Validator<'_> {
    fn check_expr(
        &self,
        expr: &Expr,
        binders: &mut Vec<(String, String)>,
    ) -> Result<(), ModelError> {
        match expr {
            Expr::Const(_) => Ok(()),
            Expr::Flag(side, path) => {
                self.check_path(*side, path, Want::Flag, binders)?;
                Ok(())
            }
            Expr::Not(e) => self.check_expr(e, binders),
            Expr::And(parts) | Expr::Or(parts) => {
                for p in parts {
                    self.check_expr(p, binders)?;
                }
                Ok(())
            }
            Expr::Implies(a, b) => {
                self.check_expr(a, binders)?;
                self.check_expr(b, binders)
            }
            Expr::IntCmp(_, a, b) => {
                self.check_int(a, binders)?;
                self.check_int(b, binders)
            }
            Expr::Forall(binder, domain, body) | Expr::Exists(binder, domain, body) => {
                self.bounds.domain_size(domain)?;
                binders.push((binder.clone(), domain.clone()));
                let r = self.check_expr(body, binders);
                binders.pop();
                r
            }
            Expr::RefIsNone(side, path) => {
                self.check_path(*side, path, Want::Ref, binders)?;
                Ok(())
            }
            Expr::RefEq(side, path, rhs) => {
                let lhs_domain = self.check_path(*side, path, Want::Ref, binders)?;
                match rhs {
                    RefRhs::None => Ok(()),
                    RefRhs::Id(id) => {
                        let d = self.id_domain(id, binders)?;
                        self.same_domain(&lhs_domain, &d)
                    }
                    RefRhs::Ref(s, p) => {
                        let d = self.check_path(*s, p, Want::Ref, binders)?;
                        self.same_domain(&lhs_domain, &d)
                    }
                }
            }
            Expr::RefSome {
                side,
                path,
                bind,
                body,
            } => {
                let domain = self.check_path(*side, path, Want::Ref, binders)?;
                binders.push((bind.clone(), domain));
                let r = self.check_expr(body, binders);
                binders.pop();
                r
            }
            Expr::IdEq(a, b) | Expr::IdLe(a, b) => {
                let da = self.id_domain(a, binders)?;
                let db = self.id_domain(b, binders)?;
                self.same_domain(&da, &db)
            }
        }
    }

    fn check_int(
        &self,
        expr: &IntExpr,
        binders: &mut Vec<(String, String)>,
    ) -> Result<(), ModelError> {
        match expr {
            IntExpr::Const(_) | IntExpr::Named(..) => Ok(()),
            IntExpr::Param(name) => match self.params.iter().find(|p| p.name == *name) {
                Some(p) => match p.domain {
                    ParamDomain::Int { .. } => Ok(()),
                    ParamDomain::Id(_) => Err(ModelError::UnknownIdentifier {
                        name: name.clone(),
                        context: "id parameter used as an integer".into(),
                    }),
                },
                None => Err(ModelError::UnknownIdentifier {
                    name: name.clone(),
                    context: "no such integer parameter".into(),
                }),
            },
            IntExpr::Comp(side, path) => {
                self.check_path(*side, path, Want::Numeric, binders)?;
                Ok(())
            }
            IntExpr::Add(a, b) | IntExpr::Max(a, b) => {
                self.check_int(a, binders)?;
                self.check_int(b, binders)
            }
        }
    }

    /// Resolves the id domain an id expression ranges over.
    fn id_domain(
        &self,
        id: &IdExpr,
        binders: &[(String, String)],
    ) -> Result<String, ModelError> {
        match id {
            IdExpr::Me => Ok(REPLICAS_DOMAIN.into()),
            IdExpr::Var(name) => {
                if let Some((_, d)) = binders.iter().rev().find(|(n, _)| n == name) {
                    return Ok(d.clone());
                }
                match self.params.iter().find(|p| p.name == *name) {
                    Some(p) => match &p.domain {
                        ParamDomain::Id(d) => Ok(d.clone()),
                        ParamDomain::Int { .. } => Err(ModelError::UnknownIdentifier {
                            name: name.clone(),
                            context: "integer parameter used as an id".into(),
                        }),
                    },
                    None => Err(ModelError::UnknownIdentifier {
                        name: name.clone(),
                        context: "no such binder or id parameter".into(),
                    }),
                }
            }
            IdExpr::StaticMap(map, arg) => {
                let table = self.spec.static_maps.get(map).ok_or_else(|| {
                    ModelError::UnknownIdentifier {
                        name: map.clone(),
                        context: "no such static id map".into(),
                    }
                })?;
                let arg_domain = self.id_domain(arg, binders)?;
                self.same_domain(&table.from_domain, &arg_domain)?;
                Ok(table.to_domain.clone())
            }
        }
    }

    fn same_domain(&self, a: &str, b: &str) -> Result<(), ModelError> {
        if a == b {
            Ok(())
        } else {
            Err(ModelError::SchemaMismatch(format!(
                "id domains differ: `{a}` vs `{b}`"
            )))
        }
    }

    /// Walks a path through the schema, checking each step, and — when the
    /// terminal component is an optional reference — returns its id domain.
    fn check_path(
        &self,
        side: Side,
        path: &Path,
        want: Want,
        binders: &[(String, String)],
    ) -> Result<String, ModelError> {
        if side == Side::Remote && self.arity == Arity::Unary {
            return Err(ModelError::SchemaMismatch(
                "remote-state access in a single-state predicate".into(),
            ));
        }
        if path.is_empty() {
            return Err(ModelError::SchemaMismatch("empty component path".into()));
        }
        let mut fields: Option<&[(String, ComponentSchema)]> =
            Some(&self.spec.schema.components);
        let mut map_domain_elem: Option<(&str, &ComponentSchema)> = None;
        let mut current: Option<&ComponentSchema> = None;
        for step in path {
            match step {
                PathStep::Field(name) => {
                    let fs = fields.ok_or_else(|| {
                        ModelError::SchemaMismatch(format!(
                            "field `{name}` selected on a non-record component"
                        ))
                    })?;
                    let comp = fs
                        .iter()
                        .find(|(n, _)| n == name)
                        .map(|(_, c)| c)
                        .ok_or_else(|| ModelError::UnknownIdentifier {
                            name: name.clone(),
                            context: "no such component or field".into(),
                        })?;
                    current = Some(comp);
                    fields = None;
                    map_domain_elem = None;
                    match comp {
                        ComponentSchema::Record { fields: fs } => fields = Some(fs),
                        ComponentSchema::FixedMap { domain, value } => {
                            map_domain_elem = Some((domain, value))
                        }
                        _ => {}
                    }
                }
                PathStep::Index(id) => {
                    let (domain, elem) = map_domain_elem.ok_or_else(|| {
                        ModelError::SchemaMismatch(
                            "indexing applied to a non-map component".into(),
                        )
                    })?;
                    let idx_domain = self.id_domain(id, binders)?;
                    self.same_domain(domain, &idx_domain)?;
                    current = Some(elem);
                    fields = None;
                    map_domain_elem = None;
                    match elem {
                        ComponentSchema::Record { fields: fs } => fields = Some(fs),
                        ComponentSchema::FixedMap { domain, value } => {
                            map_domain_elem = Some((domain, value))
                        }
                        _ => {}
                    }
                }
            }
        }
        let terminal = current.ok_or_else(|| {
            ModelError::SchemaMismatch("empty component path".into())
        })?;
        match (want, terminal) {
            (Want::Flag, ComponentSchema::Flag { .. }) => Ok(String::new()),
            (Want::Numeric, ComponentSchema::BoundedInt { .. })
            | (Want::Numeric, ComponentSchema::OrderedEnum { .. }) => Ok(String::new()),
            (Want::Ref, ComponentSchema::OptionalRef { domain }) => Ok(domain.clone()),
            (want, got) => {
                let wanted = match want {
                    Want::Flag => "flag",
                    Want::Numeric => "integer or enum",
                    Want::Ref => "optional reference",
                };
                Err(ModelError::SchemaMismatch(format!(
                    "path ends at the wrong component kind: wanted {wanted}, found {got:?}"
                )))
            }
        }
    }
}
