//! A small closed expression language for invariants, preconditions,
//! comparison predicates, and merge preconditions.
//!
//! Expressions are built programmatically by spec constructors, never parsed
//! from text. Binary predicates see two states: the *local* one and the
//! *remote* (incoming) one; remote component accesses render with a prime,
//! mirroring the usual σ / σ′ convention. `me` names the replica evaluating
//! the predicate.

use std::fmt;

use serde::Serialize;

/// Which of the two states a component access reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    Local,
    Remote,
}

/// One step of a component path: a named field or a map index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PathStep {
    Field(String),
    Index(IdExpr),
}

/// A path from the state root to a component, e.g. `bids[b].amount`.
pub type Path = Vec<PathStep>;

/// An expression denoting a concrete id (never ⊥).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IdExpr {
    /// An operation parameter or quantifier binder.
    Var(String),
    /// The evaluating replica.
    Me,
    /// Lookup in a spec-level static id table (e.g. the bid-origin map).
    StaticMap(String, Box<IdExpr>),
}

/// An integer-valued expression. Ordered-enum components evaluate to their
/// level index so they can be compared against named levels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IntExpr {
    Const(i64),
    /// A constant displayed under a name (enum levels: `ACTIVE`, ...).
    Named(String, i64),
    /// An integer-valued operation parameter.
    Param(String),
    /// A `BoundedInt` or `OrderedEnum` component.
    Comp(Side, Path),
    Add(Box<IntExpr>, Box<IntExpr>),
    Max(Box<IntExpr>, Box<IntExpr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CmpOp {
    Eq,
    Ne,
    Le,
    Lt,
    Ge,
    Gt,
}

/// The right-hand side of an optional-reference comparison.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RefRhs {
    None,
    Id(IdExpr),
    Ref(Side, Path),
}

/// A boolean expression.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Const(bool),
    /// A `Flag` component.
    Flag(Side, Path),
    Not(Box<Expr>),
    And(Vec<Expr>),
    Or(Vec<Expr>),
    Implies(Box<Expr>, Box<Expr>),
    IntCmp(CmpOp, IntExpr, IntExpr),
    /// Bounded quantification over an id domain: (binder, domain, body).
    Forall(String, String, Box<Expr>),
    Exists(String, String, Box<Expr>),
    /// An `OptionalRef` component is ⊥.
    RefIsNone(Side, Path),
    /// An `OptionalRef` component equals the right-hand side (⊥ included).
    RefEq(Side, Path, RefRhs),
    /// Dereference an `OptionalRef`: false when ⊥, otherwise the body with
    /// `bind` bound to the referenced id.
    RefSome {
        side: Side,
        path: Path,
        bind: String,
        body: Box<Expr>,
    },
    IdEq(IdExpr, IdExpr),
    /// Id-domain index order (used for deterministic tie-breaking).
    IdLe(IdExpr, IdExpr),
}

// ---------------------------------------------------------------------------
// construction helpers

pub fn fld(name: &str) -> PathStep {
    PathStep::Field(name.into())
}

pub fn at(id: IdExpr) -> PathStep {
    PathStep::Index(id)
}

pub fn var(name: &str) -> IdExpr {
    IdExpr::Var(name.into())
}

impl Expr {
    pub fn and(parts: Vec<Expr>) -> Expr {
        Expr::And(parts)
    }

    pub fn or(parts: Vec<Expr>) -> Expr {
        Expr::Or(parts)
    }

    // Fluent builder, not an operator impl: specs read `x.not()`.
    #[allow(clippy::should_implement_trait)]
    pub fn not(self) -> Expr {
        Expr::Not(Box::new(self))
    }

    pub fn implies(self, then: Expr) -> Expr {
        Expr::Implies(Box::new(self), Box::new(then))
    }

    pub fn forall(binder: &str, domain: &str, body: Expr) -> Expr {
        Expr::Forall(binder.into(), domain.into(), Box::new(body))
    }

    pub fn exists(binder: &str, domain: &str, body: Expr) -> Expr {
        Expr::Exists(binder.into(), domain.into(), Box::new(body))
    }
}

impl IntExpr {
    // Fluent builder, not an operator impl: specs read `a.add(b)`.
    #[allow(clippy::should_implement_trait)]
    pub fn add(self, rhs: IntExpr) -> IntExpr {
        IntExpr::Add(Box::new(self), Box::new(rhs))
    }

    pub fn max(self, rhs: IntExpr) -> IntExpr {
        IntExpr::Max(Box::new(self), Box::new(rhs))
    }

    pub fn cmp(self, op: CmpOp, rhs: IntExpr) -> Expr {
        Expr::IntCmp(op, self, rhs)
    }
}

// ---------------------------------------------------------------------------
// display

fn write_path(f: &mut fmt::Formatter<'_>, side: Side, path: &Path) -> fmt::Result {
    for (i, step) in path.iter().enumerate() {
        match step {
            PathStep::Field(name) => {
                if i > 0 {
                    write!(f, ".")?;
                }
                write!(f, "{name}")?;
                if i == 0 && side == Side::Remote {
                    write!(f, "'")?;
                }
            }
            PathStep::Index(id) => write!(f, "[{id}]")?,
        }
    }
    Ok(())
}

impl fmt::Display for IdExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IdExpr::Var(name) => write!(f, "{name}"),
            IdExpr::Me => write!(f, "me"),
            IdExpr::StaticMap(map, arg) => write!(f, "{map}({arg})"),
        }
    }
}

impl fmt::Display for IntExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IntExpr::Const(v) => write!(f, "{v}"),
            IntExpr::Named(name, _) => write!(f, "{name}"),
            IntExpr::Param(name) => write!(f, "{name}"),
            IntExpr::Comp(side, path) => write_path(f, *side, path),
            IntExpr::Add(a, b) => write!(f, "{a} + {b}"),
            IntExpr::Max(a, b) => write!(f, "max({a}, {b})"),
        }
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Le => "<=",
            CmpOp::Lt => "<",
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
        };
        write!(f, "{s}")
    }
}

/// Precedence-aware child rendering: parenthesize composite children.
fn write_child(f: &mut fmt::Formatter<'_>, e: &Expr) -> fmt::Result {
    match e {
        Expr::And(_) | Expr::Or(_) | Expr::Implies(..) | Expr::Forall(..) | Expr::Exists(..) => {
            write!(f, "({e})")
        }
        _ => write!(f, "{e}"),
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(b) => write!(f, "{b}"),
            Expr::Flag(side, path) => write_path(f, *side, path),
            Expr::Not(e) => {
                write!(f, "!")?;
                write_child(f, e)
            }
            Expr::And(parts) => {
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        write!(f, " && ")?;
                    }
                    write_child(f, p)?;
                }
                Ok(())
            }
            Expr::Or(parts) => {
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        write!(f, " || ")?;
                    }
                    write_child(f, p)?;
                }
                Ok(())
            }
            Expr::Implies(a, b) => {
                write_child(f, a)?;
                write!(f, " => ")?;
                write_child(f, b)
            }
            Expr::IntCmp(op, a, b) => write!(f, "{a} {op} {b}"),
            Expr::Forall(binder, domain, body) => {
                write!(f, "forall {binder} in {domain}: {body}")
            }
            Expr::Exists(binder, domain, body) => {
                write!(f, "exists {binder} in {domain}: {body}")
            }
            Expr::RefIsNone(side, path) => {
                write_path(f, *side, path)?;
                write!(f, " == none")
            }
            Expr::RefEq(side, path, rhs) => {
                write_path(f, *side, path)?;
                write!(f, " == ")?;
                match rhs {
                    RefRhs::None => write!(f, "none"),
                    RefRhs::Id(id) => write!(f, "{id}"),
                    RefRhs::Ref(s, p) => write_path(f, *s, p),
                }
            }
            Expr::RefSome {
                side,
                path,
                bind,
                body,
            } => {
                write_path(f, *side, path)?;
                write!(f, " is some {bind}: {body}")
            }
            Expr::IdEq(a, b) => write!(f, "{a} == {b}"),
            Expr::IdLe(a, b) => write!(f, "{a} <= {b}"),
        }
    }
}
