//! A replicated auction. Replicas start the auction, place bids, and close
//! it by naming a winner; merge unions the bid sets, keeps the furthest
//! status, and adopts a remote winner. The safety property is that a closed
//! auction's winner is the highest placed bid — which concurrent bidding
//! and closing can silently break.
//!
//! Two variants share this module:
//!
//! * **unguarded** (`auction_unsafe`): operations are guarded only by local
//!   state. Sequential runs are safe; concurrent `place_bid`/`close_auction`
//!   against a replica that already closed (or bid higher) violate the merge
//!   precondition, and the checker's concurrent stage finds that.
//! * **token-guarded** (`auction_safe`): every replica holds a bid token.
//!   Placing a bid requires your own token, bids only originate at their
//!   assigned replica, and closing requires *every* token to be revoked (a
//!   `release_token` operation revokes your own, and revocations propagate
//!   through merge as conjunction). Once all tokens are gone no new bids can
//!   appear anywhere, so the closer's pick is final.
//!
//! Bid ownership is a static assignment `origin: bids → replicas` (round
//! robin), so "my bids" is meaningful in predicates via `origin(b) == me`.

use std::sync::Arc;

use crate::model::{
    at, fld, var, CmpOp, ComponentSchema, DomainBounds, Expr, IdDomainDecl, IdExpr, IntExpr,
    ModelError, ObjectSpec, OperationSpec, ParamDomain, ParamSpec, Predicate, RefRhs, Side,
    StateSchema, StateValue, StaticIdMap, REPLICAS_DOMAIN,
};

pub const INVALID: i64 = 0;
pub const ACTIVE: i64 = 1;
pub const CLOSED: i64 = 2;

const STATUS: usize = 0;
const WINNER: usize = 1;
const BIDS: usize = 2;
const TOKENS: usize = 3;

/// How the merge precondition constrains bid amounts across two states.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmountAgreement {
    /// Amounts must agree on bids placed in *both* states (default). A bid
    /// one side hasn't seen yet still reads amount 0 there, which must not
    /// count as disagreement.
    CommonlyPlaced,
    /// Amounts must agree on every bid slot, placed or not.
    AllBids,
}

/// How the token-guarded variant states "a revoked token blocks new bids".
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlacementClauses {
    /// One clause keyed on the bid's origin replica: if the origin's token
    /// is revoked here and the bid isn't placed here, it is placed nowhere
    /// we may merge with (default).
    OriginScoped,
    /// Two clauses quantifying over all replicas (and the `r != me`
    /// restriction of the second), ignoring bid ownership.
    LiteralPerReplica,
}

/// How the token-guarded variant relates winners across two states.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WinnerClauses {
    /// Direction-neutral (default): once all tokens are revoked, two states
    /// that *both* have winners must agree, and a winner can only exist once
    /// no token is jointly held. A closed state meeting a lagging peer that
    /// hasn't closed yet is fine in either merge direction.
    Neutral,
    /// Keyed on the local state only: after local revocation the remote
    /// winner must equal ours or be ⊥, and any locally held token forbids
    /// both winners. Rejects benign "close reaches a lagging peer" merges.
    Directional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AuctionOptions {
    /// Include the per-replica token machinery (the guarded variant).
    pub tokens: bool,
    pub amount_agreement: AmountAgreement,
    pub placement_clauses: PlacementClauses,
    pub winner_clauses: WinnerClauses,
    /// Merge-precondition clause "my own unplaced bids are placed nowhere
    /// else". True in any run (only the origin places its bids), and needed:
    /// without it the checker admits impossible pairs where a peer already
    /// has my bid at a different amount, and `place_bid` appears unsafe.
    pub own_bid_clause: bool,
    /// Keep the `is_highest` conjunct in `close_auction`'s precondition.
    /// Disabling it makes even sequential runs unsafe (a deliberately broken
    /// variant used in tests).
    pub close_requires_highest: bool,
}

impl AuctionOptions {
    /// The token-free variant: locally-checked guards only.
    pub fn unguarded() -> AuctionOptions {
        AuctionOptions {
            tokens: false,
            amount_agreement: AmountAgreement::CommonlyPlaced,
            placement_clauses: PlacementClauses::OriginScoped,
            winner_clauses: WinnerClauses::Neutral,
            own_bid_clause: false,
            close_requires_highest: true,
        }
    }

    /// The token-guarded variant with the default clause readings.
    pub fn token_guarded() -> AuctionOptions {
        AuctionOptions {
            tokens: true,
            own_bid_clause: true,
            ..AuctionOptions::unguarded()
        }
    }
}

pub fn make_auction_unsafe(bounds: &DomainBounds) -> Result<ObjectSpec, ModelError> {
    let mut spec = make_auction_with(bounds, AuctionOptions::unguarded())?;
    spec.name = "auction_unsafe".into();
    Ok(spec)
}

pub fn make_auction_safe(bounds: &DomainBounds) -> Result<ObjectSpec, ModelError> {
    let mut spec = make_auction_with(bounds, AuctionOptions::token_guarded())?;
    spec.name = "auction_safe".into();
    Ok(spec)
}

// ---------------------------------------------------------------------------
// expression shorthands

fn status(side: Side) -> IntExpr {
    IntExpr::Comp(side, vec![fld("status")])
}

fn level(name: &str, value: i64) -> IntExpr {
    IntExpr::Named(name.into(), value)
}

fn placed(side: Side, bid: IdExpr) -> Expr {
    Expr::Flag(side, vec![fld("bids"), at(bid), fld("placed")])
}

fn amount(side: Side, bid: IdExpr) -> IntExpr {
    IntExpr::Comp(side, vec![fld("bids"), at(bid), fld("amount")])
}

fn token(side: Side, replica: IdExpr) -> Expr {
    Expr::Flag(side, vec![fld("tokens"), at(replica)])
}

fn winner_is_none(side: Side) -> Expr {
    Expr::RefIsNone(side, vec![fld("winner")])
}

fn origin(bid: IdExpr) -> IdExpr {
    IdExpr::StaticMap("origin".into(), Box::new(bid))
}

/// "`w` is the highest bid placed in `bids_side`'s bid set", with ties
/// broken toward the lower bid id. The *candidate's* amount is read from
/// `amount_side` — the side whose winner/precondition supplied `w` — since
/// the other side may not have seen that bid yet (its slot would read 0).
fn is_highest(bids_side: Side, w: IdExpr, amount_side: Side) -> Expr {
    let w_amount = amount(amount_side, w.clone());
    Expr::forall(
        "b",
        "bids",
        placed(bids_side, var("b")).implies(Expr::or(vec![
            amount(bids_side, var("b")).cmp(CmpOp::Lt, w_amount.clone()),
            Expr::and(vec![
                amount(bids_side, var("b")).cmp(CmpOp::Eq, w_amount),
                Expr::IdLe(w, var("b")),
            ]),
        ])),
    )
}

fn all_tokens(side: Side, held: bool) -> Expr {
    let tok = token(side, var("r"));
    Expr::forall("r", REPLICAS_DOMAIN, if held { tok } else { tok.not() })
}

// ---------------------------------------------------------------------------
// state plumbing for effects and merge

fn fields(state: &StateValue) -> Vec<StateValue> {
    match state {
        StateValue::Record(fields) => fields.clone(),
        _ => panic!("auction state must be a record"),
    }
}

fn bid_slots(field: &StateValue) -> Vec<(bool, i64)> {
    match field {
        StateValue::Map(entries) => entries
            .iter()
            .map(|e| match e {
                StateValue::Record(f) => match (&f[0], &f[1]) {
                    (StateValue::Flag(p), StateValue::Int(v)) => (*p, *v),
                    _ => panic!("bid slots must be (placed, amount)"),
                },
                _ => panic!("bid slots must be records"),
            })
            .collect(),
        _ => panic!("bids must be a map"),
    }
}

fn bids_value(slots: &[(bool, i64)]) -> StateValue {
    StateValue::Map(
        slots
            .iter()
            .map(|(p, v)| StateValue::Record(vec![StateValue::Flag(*p), StateValue::Int(*v)]))
            .collect(),
    )
}

fn token_slots(field: &StateValue) -> Vec<bool> {
    match field {
        StateValue::Map(entries) => entries
            .iter()
            .map(|e| match e {
                StateValue::Flag(t) => *t,
                _ => panic!("token slots must be flags"),
            })
            .collect(),
        _ => panic!("tokens must be a map"),
    }
}

fn tokens_value(slots: &[bool]) -> StateValue {
    StateValue::Map(slots.iter().map(|t| StateValue::Flag(*t)).collect())
}

// ---------------------------------------------------------------------------
// the spec

/// Builds an auction spec with explicit clause options. Bounds supply the
/// bid-slot count and the amount range `amount` (default `0..=2`; must start
/// at 0, the resting value of an unplaced slot).
pub fn make_auction_with(
    bounds: &DomainBounds,
    options: AuctionOptions,
) -> Result<ObjectSpec, ModelError> {
    let bid_count = bounds.domain_size("bids")?;
    let replica_count = bounds.replica_count;
    let (amount_min, amount_max) = bounds.int_range_or("amount", (0, 2));
    if amount_min != 0 || amount_max < 1 {
        return Err(ModelError::BadBounds(format!(
            "auction needs the `amount` range to start at 0 and reach at least 1, got {amount_min}..={amount_max}"
        )));
    }

    let mut components = vec![
        (
            "status".into(),
            ComponentSchema::OrderedEnum {
                levels: vec!["INVALID".into(), "ACTIVE".into(), "CLOSED".into()],
            },
        ),
        (
            "winner".into(),
            ComponentSchema::OptionalRef {
                domain: "bids".into(),
            },
        ),
        (
            "bids".into(),
            ComponentSchema::FixedMap {
                domain: "bids".into(),
                value: Box::new(ComponentSchema::Record {
                    fields: vec![
                        ("placed".into(), ComponentSchema::Flag { top: true }),
                        (
                            "amount".into(),
                            ComponentSchema::BoundedInt {
                                min: 0,
                                max: amount_max,
                            },
                        ),
                    ],
                }),
            },
        ),
    ];
    if options.tokens {
        components.push((
            "tokens".into(),
            ComponentSchema::FixedMap {
                domain: REPLICAS_DOMAIN.into(),
                value: Box::new(ComponentSchema::Flag { top: false }),
            },
        ));
    }
    let schema = StateSchema {
        id_domains: vec![IdDomainDecl {
            name: "bids".into(),
            elem_prefix: "b".into(),
        }],
        components,
    };

    let mut static_maps = std::collections::BTreeMap::new();
    static_maps.insert(
        "origin".into(),
        StaticIdMap {
            from_domain: "bids".into(),
            to_domain: REPLICAS_DOMAIN.into(),
            table: (0..bid_count).map(|i| i % replica_count).collect(),
        },
    );

    let mut initial = vec![
        StateValue::Enum(INVALID as usize),
        StateValue::Ref(None),
        bids_value(&vec![(false, 0); bid_count]),
    ];
    if options.tokens {
        initial.push(tokens_value(&vec![true; replica_count]));
    }

    // -- order ---------------------------------------------------------

    let mut leq = vec![
        (
            "status_grows",
            status(Side::Local).cmp(CmpOp::Le, status(Side::Remote)),
        ),
        (
            "winner_persists",
            Expr::or(vec![winner_is_none(Side::Remote).not(), winner_is_none(Side::Local)]),
        ),
        (
            "bids_persist",
            Expr::forall(
                "b",
                "bids",
                placed(Side::Local, var("b")).implies(placed(Side::Remote, var("b"))),
            ),
        ),
    ];
    if options.tokens {
        // Tokens start held and are revoked, so "further along" means fewer.
        leq.push((
            "revocations_persist",
            Expr::forall(
                "r",
                REPLICAS_DOMAIN,
                token(Side::Remote, var("r")).implies(token(Side::Local, var("r"))),
            ),
        ));
    }

    // -- invariant -----------------------------------------------------

    let mut invariant = vec![
        (
            "placed_implies_started",
            Expr::forall(
                "b",
                "bids",
                placed(Side::Local, var("b"))
                    .implies(status(Side::Local).cmp(CmpOp::Ge, level("ACTIVE", ACTIVE))),
            ),
        ),
        (
            "placed_amount_positive",
            Expr::forall(
                "b",
                "bids",
                placed(Side::Local, var("b"))
                    .implies(amount(Side::Local, var("b")).cmp(CmpOp::Ge, IntExpr::Const(1))),
            ),
        ),
        (
            "unplaced_amount_zero",
            Expr::forall(
                "b",
                "bids",
                placed(Side::Local, var("b"))
                    .not()
                    .implies(amount(Side::Local, var("b")).cmp(CmpOp::Eq, IntExpr::Const(0))),
            ),
        ),
        (
            "no_winner_before_close",
            status(Side::Local)
                .cmp(CmpOp::Le, level("ACTIVE", ACTIVE))
                .implies(winner_is_none(Side::Local)),
        ),
        (
            "closed_winner_highest",
            status(Side::Local)
                .cmp(CmpOp::Eq, level("CLOSED", CLOSED))
                .implies(Expr::RefSome {
                    side: Side::Local,
                    path: vec![fld("winner")],
                    bind: "w".into(),
                    body: Box::new(Expr::and(vec![
                        placed(Side::Local, var("w")),
                        is_highest(Side::Local, var("w"), Side::Local),
                    ])),
                }),
        ),
    ];
    if options.tokens {
        invariant.push((
            "closed_tokens_revoked",
            status(Side::Local)
                .cmp(CmpOp::Eq, level("CLOSED", CLOSED))
                .implies(all_tokens(Side::Local, false)),
        ));
    }

    // -- merge precondition --------------------------------------------

    let closed_winner_highest = |side: Side| {
        status(side)
            .cmp(CmpOp::Eq, level("CLOSED", CLOSED))
            .implies(Expr::RefSome {
                side,
                path: vec![fld("winner")],
                bind: "w".into(),
                body: Box::new(Expr::and(vec![
                    is_highest(Side::Local, var("w"), side),
                    is_highest(Side::Remote, var("w"), side),
                ])),
            })
    };

    let amounts_agree = match options.amount_agreement {
        AmountAgreement::CommonlyPlaced => Expr::forall(
            "b",
            "bids",
            Expr::and(vec![placed(Side::Local, var("b")), placed(Side::Remote, var("b"))]).implies(
                amount(Side::Local, var("b")).cmp(CmpOp::Eq, amount(Side::Remote, var("b"))),
            ),
        ),
        AmountAgreement::AllBids => Expr::forall(
            "b",
            "bids",
            amount(Side::Local, var("b")).cmp(CmpOp::Eq, amount(Side::Remote, var("b"))),
        ),
    };

    let mut pre_merge = vec![
        ("closed_winner_highest_here", closed_winner_highest(Side::Local)),
        ("closed_winner_highest_there", closed_winner_highest(Side::Remote)),
        ("placed_amounts_agree", amounts_agree),
    ];
    if options.tokens {
        pre_merge.push((
            "own_token_kept",
            token(Side::Local, IdExpr::Me).implies(token(Side::Remote, IdExpr::Me)),
        ));
        let no_new_bid = |revoked_at: IdExpr| {
            Expr::forall(
                "b",
                "bids",
                Expr::and(vec![
                    token(Side::Local, revoked_at).not(),
                    placed(Side::Local, var("b")).not(),
                ])
                .implies(placed(Side::Remote, var("b")).not()),
            )
        };
        match options.placement_clauses {
            PlacementClauses::OriginScoped => {
                pre_merge.push(("revoked_origin_no_new_bids", no_new_bid(origin(var("b")))));
            }
            PlacementClauses::LiteralPerReplica => {
                pre_merge.push((
                    "revoked_any_no_new_bids",
                    Expr::forall("r", REPLICAS_DOMAIN, no_new_bid(var("r"))),
                ));
                pre_merge.push((
                    "revoked_other_no_new_bids",
                    Expr::forall(
                        "r",
                        REPLICAS_DOMAIN,
                        Expr::IdEq(var("r"), IdExpr::Me)
                            .not()
                            .implies(no_new_bid(var("r"))),
                    ),
                ));
            }
        }
        if options.own_bid_clause {
            pre_merge.push((
                "own_bids_placed_here_first",
                Expr::forall(
                    "b",
                    "bids",
                    Expr::and(vec![
                        Expr::IdEq(origin(var("b")), IdExpr::Me),
                        placed(Side::Local, var("b")).not(),
                    ])
                    .implies(placed(Side::Remote, var("b")).not()),
                ),
            ));
        }
        let winners_equal = Expr::RefEq(
            Side::Local,
            vec![fld("winner")],
            RefRhs::Ref(Side::Remote, vec![fld("winner")]),
        );
        match options.winner_clauses {
            WinnerClauses::Neutral => {
                pre_merge.push((
                    "winners_agree_after_revocation",
                    all_tokens(Side::Local, false).implies(Expr::or(vec![
                        winners_equal,
                        winner_is_none(Side::Local),
                        winner_is_none(Side::Remote),
                    ])),
                ));
                pre_merge.push((
                    "no_winner_while_token_held",
                    Expr::exists(
                        "r",
                        REPLICAS_DOMAIN,
                        Expr::and(vec![token(Side::Local, var("r")), token(Side::Remote, var("r"))]),
                    )
                    .implies(Expr::and(vec![
                        winner_is_none(Side::Local),
                        winner_is_none(Side::Remote),
                    ])),
                ));
            }
            WinnerClauses::Directional => {
                pre_merge.push((
                    "winners_agree_after_revocation",
                    all_tokens(Side::Local, false)
                        .implies(Expr::or(vec![winners_equal, winner_is_none(Side::Remote)])),
                ));
                pre_merge.push((
                    "no_winner_while_token_held",
                    Expr::exists("r", REPLICAS_DOMAIN, token(Side::Local, var("r"))).implies(
                        Expr::and(vec![
                            winner_is_none(Side::Local),
                            winner_is_none(Side::Remote),
                        ]),
                    ),
                ));
            }
        }
    }

    // -- operations ----------------------------------------------------

    let mut start_pre = vec![
        (
            "not_yet_started",
            status(Side::Local).cmp(CmpOp::Eq, level("INVALID", INVALID)),
        ),
        ("no_winner", winner_is_none(Side::Local)),
    ];
    if options.tokens {
        start_pre.push(("all_tokens_present", all_tokens(Side::Local, true)));
    }
    let start_auction = OperationSpec {
        name: "start_auction".into(),
        params: Vec::new(),
        precondition: Predicate::unary(start_pre),
        effect: Arc::new(|state, _call| {
            let mut f = fields(state);
            f[STATUS] = StateValue::Enum(ACTIVE as usize);
            f[WINNER] = StateValue::Ref(None);
            StateValue::Record(f)
        }),
    };

    let mut place_pre = vec![
        ("not_yet_placed", placed(Side::Local, var("b")).not()),
        (
            "auction_active",
            status(Side::Local).cmp(CmpOp::Eq, level("ACTIVE", ACTIVE)),
        ),
        ("no_winner", winner_is_none(Side::Local)),
        (
            "positive_amount",
            IntExpr::Param("value".into()).cmp(CmpOp::Ge, IntExpr::Const(1)),
        ),
        (
            "bid_originates_here",
            Expr::IdEq(origin(var("b")), IdExpr::Me),
        ),
    ];
    if options.tokens {
        place_pre.push(("holds_token", token(Side::Local, IdExpr::Me)));
    }
    let place_bid = OperationSpec {
        name: "place_bid".into(),
        params: vec![
            ParamSpec {
                name: "b".into(),
                domain: ParamDomain::Id("bids".into()),
            },
            ParamSpec {
                name: "value".into(),
                domain: ParamDomain::Int {
                    min: 1,
                    max: amount_max,
                },
            },
        ],
        precondition: Predicate::unary(place_pre),
        effect: Arc::new(|state, call| {
            let mut f = fields(state);
            let mut slots = bid_slots(&f[BIDS]);
            slots[call.id("b")] = (true, call.int("value"));
            f[BIDS] = bids_value(&slots);
            StateValue::Record(f)
        }),
    };

    let mut close_pre = vec![
        (
            "auction_active",
            status(Side::Local).cmp(CmpOp::Eq, level("ACTIVE", ACTIVE)),
        ),
        ("no_winner", winner_is_none(Side::Local)),
        ("winner_placed", placed(Side::Local, var("w"))),
    ];
    if options.close_requires_highest {
        close_pre.push((
            "winner_is_highest",
            is_highest(Side::Local, var("w"), Side::Local),
        ));
    }
    if options.tokens {
        close_pre.push(("all_tokens_revoked", all_tokens(Side::Local, false)));
    }
    let close_auction = OperationSpec {
        name: "close_auction".into(),
        params: vec![ParamSpec {
            name: "w".into(),
            domain: ParamDomain::Id("bids".into()),
        }],
        precondition: Predicate::unary(close_pre),
        effect: Arc::new(|state, call| {
            let mut f = fields(state);
            f[STATUS] = StateValue::Enum(CLOSED as usize);
            f[WINNER] = StateValue::Ref(Some(call.id("w")));
            StateValue::Record(f)
        }),
    };

    let mut operations = vec![start_auction, place_bid, close_auction];
    if options.tokens {
        operations.push(OperationSpec {
            name: "release_token".into(),
            params: Vec::new(),
            precondition: Predicate::unary(vec![
                (
                    "auction_started",
                    status(Side::Local).cmp(CmpOp::Ge, level("ACTIVE", ACTIVE)),
                ),
                ("holds_token", token(Side::Local, IdExpr::Me)),
            ]),
            effect: Arc::new(|state, call| {
                let mut f = fields(state);
                let mut slots = token_slots(&f[TOKENS]);
                slots[call.me] = false;
                f[TOKENS] = tokens_value(&slots);
                StateValue::Record(f)
            }),
        });
    }

    // -- merge ---------------------------------------------------------

    let has_tokens = options.tokens;
    let merge = Arc::new(move |a: &StateValue, b: &StateValue| {
        let (fa, fb) = (fields(a), fields(b));
        let status = match (&fa[STATUS], &fb[STATUS]) {
            (StateValue::Enum(x), StateValue::Enum(y)) => StateValue::Enum(*x.max(y)),
            _ => panic!("auction status must be an enum"),
        };
        // A remote winner wins; otherwise keep the local one (⊥ or not).
        let winner = match (&fa[WINNER], &fb[WINNER]) {
            (_, StateValue::Ref(Some(w))) => StateValue::Ref(Some(*w)),
            (local, StateValue::Ref(None)) => local.clone(),
            _ => panic!("auction winner must be a reference"),
        };
        let bids: Vec<(bool, i64)> = bid_slots(&fa[BIDS])
            .iter()
            .zip(bid_slots(&fb[BIDS]).iter())
            .map(|(&(pa, va), &(pb, vb))| {
                // Keep the local amount when the bid is placed locally;
                // otherwise take the remote slot (0 if unplaced there too).
                (pa || pb, if pa { va } else { vb })
            })
            .collect();
        let mut f = vec![status, winner, bids_value(&bids)];
        if has_tokens {
            let tokens: Vec<bool> = token_slots(&fa[TOKENS])
                .iter()
                .zip(token_slots(&fb[TOKENS]).iter())
                .map(|(&ta, &tb)| ta && tb)
                .collect();
            f.push(tokens_value(&tokens));
        }
        StateValue::Record(f)
    });

    Ok(ObjectSpec {
        name: if options.tokens {
            "auction_safe".into()
        } else {
            "auction_unsafe".into()
        },
        schema,
        initial: Some(StateValue::Record(initial)),
        leq: Some(Predicate::binary(leq)),
        merge: Some(merge),
        operations,
        pre_merge: Predicate::binary(pre_merge),
        invariant: Predicate::unary(invariant),
        static_maps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{enumerate_states, Binding, EvalCtx};

    fn defaults() -> DomainBounds {
        let mut bounds = DomainBounds::default();
        bounds.id_domains.insert("bids".into(), 2);
        bounds.int_ranges.insert("amount".into(), (0, 2));
        bounds
    }

    fn guarded() -> (ObjectSpec, DomainBounds) {
        let bounds = defaults();
        let spec = make_auction_safe(&bounds).unwrap();
        (spec, bounds)
    }

    fn unguarded() -> (ObjectSpec, DomainBounds) {
        let bounds = defaults();
        let spec = make_auction_unsafe(&bounds).unwrap();
        (spec, bounds)
    }

    /// Guarded-variant state at the default bounds (2 bids, 2 replicas).
    fn st(
        status: i64,
        winner: Option<usize>,
        bids: [(bool, i64); 2],
        tokens: [bool; 2],
    ) -> StateValue {
        StateValue::Record(vec![
            StateValue::Enum(status as usize),
            StateValue::Ref(winner),
            bids_value(&bids),
            tokens_value(&tokens),
        ])
    }

    /// Unguarded-variant state (no token component).
    fn st_plain(status: i64, winner: Option<usize>, bids: [(bool, i64); 2]) -> StateValue {
        StateValue::Record(vec![
            StateValue::Enum(status as usize),
            StateValue::Ref(winner),
            bids_value(&bids),
        ])
    }

    fn invariant_holds(spec: &ObjectSpec, bounds: &DomainBounds, state: &StateValue) -> bool {
        EvalCtx::unary(spec, bounds, state, 0, &[])
            .holds(&spec.invariant)
            .unwrap()
    }

    fn pre_merge_holds(
        spec: &ObjectSpec,
        bounds: &DomainBounds,
        a: &StateValue,
        b: &StateValue,
        me: usize,
    ) -> bool {
        EvalCtx::binary(spec, bounds, a, b, me, &[])
            .holds(&spec.pre_merge)
            .unwrap()
    }

    fn place_args(b: usize, value: i64) -> Vec<(String, Binding)> {
        vec![("b".into(), Binding::Id(b)), ("value".into(), Binding::Int(value))]
    }

    #[test]
    fn cardinality_is_the_component_product() {
        // status × winner × (placed × amount)^bids × tokens^replicas:
        // 3 · 3 · (2·3)² · 2² = 1296 guarded, 3 · 3 · 36 = 324 unguarded.
        let (safe, bounds) = guarded();
        assert_eq!(enumerate_states(&safe.schema, &bounds).unwrap().cardinality, 1296);
        let (unsafe_spec, bounds) = unguarded();
        assert_eq!(
            enumerate_states(&unsafe_spec.schema, &bounds).unwrap().cardinality,
            324
        );
    }

    #[test]
    fn invariant_carves_out_the_expected_region() {
        // Hand count, guarded: 4 INVALID (tokens free) + 9·4 ACTIVE
        // (each bid unplaced or placed at 1..2) + 8 CLOSED (nonempty bid
        // configurations, forced winner, tokens revoked) = 48.
        let (safe, bounds) = guarded();
        let space = enumerate_states(&safe.schema, &bounds).unwrap();
        let valid = space
            .states
            .iter()
            .filter(|s| invariant_holds(&safe, &bounds, s))
            .count();
        assert_eq!(valid, 48);

        // Unguarded drops the token factor: 1 + 9 + 8 = 18.
        let (unsafe_spec, bounds) = unguarded();
        let space = enumerate_states(&unsafe_spec.schema, &bounds).unwrap();
        let valid = space
            .states
            .iter()
            .filter(|s| invariant_holds(&unsafe_spec, &bounds, s))
            .count();
        assert_eq!(valid, 18);
    }

    #[test]
    fn initial_state_is_sound() {
        let (spec, bounds) = guarded();
        let init = spec.initial_state().unwrap().clone();
        assert_eq!(init, st(INVALID, None, [(false, 0), (false, 0)], [true, true]));
        assert!(invariant_holds(&spec, &bounds, &init));
        for me in 0..bounds.replica_count {
            assert!(pre_merge_holds(&spec, &bounds, &init, &init, me));
        }
    }

    #[test]
    fn order_follows_status_bids_and_revocations() {
        let (spec, bounds) = guarded();
        let idle = st(INVALID, None, [(false, 0), (false, 0)], [true, true]);
        let active = st(ACTIVE, None, [(false, 0), (false, 0)], [true, true]);
        let bid_in = st(ACTIVE, None, [(true, 1), (false, 0)], [true, true]);
        let revoked = st(ACTIVE, None, [(true, 1), (false, 0)], [false, true]);
        let closed = st(CLOSED, Some(0), [(true, 1), (false, 0)], [false, false]);
        for (lo, hi) in [
            (&idle, &active),
            (&active, &bid_in),
            (&bid_in, &revoked),
            (&revoked, &closed),
        ] {
            assert!(spec.leq_states(&bounds, lo, hi, 0).unwrap());
            assert!(!spec.leq_states(&bounds, hi, lo, 0).unwrap());
        }
        // Unplaced bids and held tokens do not travel backwards.
        assert!(!spec.leq_states(&bounds, &bid_in, &active, 0).unwrap());
        assert!(!spec.leq_states(&bounds, &revoked, &bid_in, 0).unwrap());
    }

    #[test]
    fn merge_combines_all_components() {
        let (spec, bounds) = guarded();
        let a = st(ACTIVE, None, [(true, 1), (false, 0)], [true, false]);
        let b = st(CLOSED, Some(1), [(false, 0), (true, 2)], [false, true]);
        let merged = spec.merge_states(&bounds, &a, &b).unwrap();
        // Status max, remote winner adopted, bids unioned with each side
        // keeping the amounts it placed, tokens intersected.
        assert_eq!(merged, st(CLOSED, Some(1), [(true, 1), (true, 2)], [false, false]));
        // Without a remote winner the local one survives.
        let merged = spec.merge_states(&bounds, &b, &a).unwrap();
        assert_eq!(merged, st(CLOSED, Some(1), [(true, 1), (true, 2)], [false, false]));
    }

    #[test]
    fn lifecycle_operations_chain_together() {
        let (spec, bounds) = unguarded();
        let s0 = spec.initial_state().unwrap().clone();
        let s1 = spec.apply_op(&bounds, "start_auction", &[], 0, &s0).unwrap();
        assert_eq!(s1, st_plain(ACTIVE, None, [(false, 0), (false, 0)]));
        let s2 = spec.apply_op(&bounds, "place_bid", &place_args(0, 1), 0, &s1).unwrap();
        let s3 = spec.apply_op(&bounds, "place_bid", &place_args(1, 2), 1, &s2).unwrap();
        assert_eq!(s3, st_plain(ACTIVE, None, [(true, 1), (true, 2)]));
        let s4 = spec.apply_op(&bounds, "close_auction", &[("w".into(), Binding::Id(1))], 0, &s3).unwrap();
        assert_eq!(s4, st_plain(CLOSED, Some(1), [(true, 1), (true, 2)]));
        assert!(invariant_holds(&spec, &bounds, &s4));
    }

    #[test]
    fn closing_on_a_lower_bid_is_rejected() {
        let (spec, bounds) = unguarded();
        let both = st_plain(ACTIVE, None, [(true, 1), (true, 2)]);
        let err = spec
            .apply_op(&bounds, "close_auction", &[("w".into(), Binding::Id(0))], 0, &both)
            .unwrap_err();
        match err {
            ModelError::PreconditionViolated { op, clause } => {
                assert_eq!(op, "close_auction");
                assert_eq!(clause, "winner_is_highest");
            }
            other => panic!("expected a precondition rejection, got {other:?}"),
        }
    }

    #[test]
    fn equal_amounts_break_ties_toward_the_lower_id() {
        let (spec, bounds) = unguarded();
        let tied = st_plain(ACTIVE, None, [(true, 2), (true, 2)]);
        assert!(spec
            .apply_op(&bounds, "close_auction", &[("w".into(), Binding::Id(0))], 0, &tied)
            .is_ok());
        let err = spec
            .apply_op(&bounds, "close_auction", &[("w".into(), Binding::Id(1))], 0, &tied)
            .unwrap_err();
        match err {
            ModelError::PreconditionViolated { clause, .. } => {
                assert_eq!(clause, "winner_is_highest")
            }
            other => panic!("expected a precondition rejection, got {other:?}"),
        }
    }

    #[test]
    fn bids_may_only_originate_at_their_replica() {
        let (spec, bounds) = unguarded();
        let active = st_plain(ACTIVE, None, [(false, 0), (false, 0)]);
        // Bid b2 belongs to r2 (round-robin origin), so r1 cannot place it.
        let err = spec
            .apply_op(&bounds, "place_bid", &place_args(1, 1), 0, &active)
            .unwrap_err();
        match err {
            ModelError::PreconditionViolated { clause, .. } => {
                assert_eq!(clause, "bid_originates_here")
            }
            other => panic!("expected a precondition rejection, got {other:?}"),
        }
        assert!(spec.apply_op(&bounds, "place_bid", &place_args(1, 1), 1, &active).is_ok());
    }

    #[test]
    fn guarded_close_waits_for_every_token() {
        let (spec, bounds) = guarded();
        let some_left = st(ACTIVE, None, [(true, 1), (false, 0)], [false, true]);
        let err = spec
            .apply_op(&bounds, "close_auction", &[("w".into(), Binding::Id(0))], 0, &some_left)
            .unwrap_err();
        match err {
            ModelError::PreconditionViolated { op, clause } => {
                assert_eq!(op, "close_auction");
                assert_eq!(clause, "all_tokens_revoked");
            }
            other => panic!("expected a precondition rejection, got {other:?}"),
        }
        let all_gone = st(ACTIVE, None, [(true, 1), (false, 0)], [false, false]);
        assert!(spec
            .apply_op(&bounds, "close_auction", &[("w".into(), Binding::Id(0))], 0, &all_gone)
            .is_ok());
    }

    #[test]
    fn guarded_bidding_needs_your_token() {
        let (spec, bounds) = guarded();
        let released = st(ACTIVE, None, [(false, 0), (false, 0)], [false, true]);
        let err = spec
            .apply_op(&bounds, "place_bid", &place_args(0, 1), 0, &released)
            .unwrap_err();
        match err {
            ModelError::PreconditionViolated { clause, .. } => assert_eq!(clause, "holds_token"),
            other => panic!("expected a precondition rejection, got {other:?}"),
        }
    }

    #[test]
    fn release_token_revokes_only_your_own() {
        let (spec, bounds) = guarded();
        let active = st(ACTIVE, None, [(false, 0), (false, 0)], [true, true]);
        let after = spec.apply_op(&bounds, "release_token", &[], 1, &active).unwrap();
        assert_eq!(after, st(ACTIVE, None, [(false, 0), (false, 0)], [true, false]));
        let err = spec.apply_op(&bounds, "release_token", &[], 1, &after).unwrap_err();
        match err {
            ModelError::PreconditionViolated { clause, .. } => assert_eq!(clause, "holds_token"),
            other => panic!("expected a precondition rejection, got {other:?}"),
        }
    }

    #[test]
    fn merge_precondition_reads_the_winner_amount_from_its_own_side() {
        let (spec, bounds) = unguarded();
        // The closed side's winner b1 was placed at 2 locally; the other
        // side never saw b1 (its slot reads 0) but placed b2 at 1. The
        // winner stays highest against *both* bid sets only because its
        // amount is read from the closed side.
        let closed = st_plain(CLOSED, Some(0), [(true, 2), (false, 0)]);
        let behind = st_plain(ACTIVE, None, [(false, 0), (true, 1)]);
        assert!(pre_merge_holds(&spec, &bounds, &closed, &behind, 0));
        assert!(pre_merge_holds(&spec, &bounds, &behind, &closed, 0));
        // A higher remote bid genuinely defeats the winner.
        let outbid = st_plain(ACTIVE, None, [(false, 0), (true, 2)]);
        // b2 ties b1's amount but b1 has the lower id, so b1 is still
        // highest; bump the remote bid over it instead.
        assert!(pre_merge_holds(&spec, &bounds, &closed, &outbid, 0));
        let closed_low = st_plain(CLOSED, Some(0), [(true, 1), (false, 0)]);
        assert!(!pre_merge_holds(&spec, &bounds, &closed_low, &outbid, 0));
    }

    #[test]
    fn merge_precondition_spots_amount_disagreement() {
        let (spec, bounds) = unguarded();
        let a = st_plain(ACTIVE, None, [(true, 1), (false, 0)]);
        let b = st_plain(ACTIVE, None, [(true, 2), (false, 0)]);
        assert!(!pre_merge_holds(&spec, &bounds, &a, &b, 0));
        // A bid the other side hasn't seen is not a disagreement.
        let empty = st_plain(ACTIVE, None, [(false, 0), (false, 0)]);
        assert!(pre_merge_holds(&spec, &bounds, &a, &empty, 0));
    }

    #[test]
    fn guarded_merge_precondition_tracks_tokens() {
        let (spec, bounds) = guarded();
        // r1 (me = 0) still holds its token locally, but the remote state
        // says it was revoked: only the owner revokes, so these two states
        // cannot belong to a real run.
        let holding = st(ACTIVE, None, [(false, 0), (false, 0)], [true, true]);
        let says_revoked = st(ACTIVE, None, [(false, 0), (false, 0)], [false, true]);
        assert!(!pre_merge_holds(&spec, &bounds, &holding, &says_revoked, 0));
        // For r2 (me = 1) the same pair is fine: its own token agrees.
        assert!(pre_merge_holds(&spec, &bounds, &holding, &says_revoked, 1));
    }

    #[test]
    fn guarded_merge_precondition_blocks_unknown_own_bids() {
        let (spec, bounds) = guarded();
        // b1 originates at r1 but r1 hasn't placed it — no other replica
        // can know it, whatever amount it claims.
        let local = st(ACTIVE, None, [(false, 0), (false, 0)], [true, true]);
        let remote = st(ACTIVE, None, [(true, 2), (false, 0)], [true, true]);
        assert!(!pre_merge_holds(&spec, &bounds, &local, &remote, 0));
        // From r2's point of view the same pair is coherent: b1 is not its
        // bid, and r1's token is still live so new bids may appear.
        assert!(pre_merge_holds(&spec, &bounds, &local, &remote, 1));
    }

    #[test]
    fn origin_assignment_is_round_robin() {
        let mut bounds = defaults();
        bounds.id_domains.insert("bids".into(), 3);
        let spec = make_auction_safe(&bounds).unwrap();
        assert_eq!(spec.static_maps["origin"].table, vec![0, 1, 0]);
    }
}
