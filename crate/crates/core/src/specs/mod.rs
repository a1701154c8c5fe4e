//! Built-in replicated-object specs: the pair counter, a grow-only set,
//! and the replicated auction in its unguarded and token-guarded variants.

pub mod auction;
pub mod gset;
pub mod pair_counter;
mod registry;

pub use auction::{
    make_auction_safe, make_auction_unsafe, make_auction_with, AmountAgreement, AuctionOptions,
    PlacementClauses, WinnerClauses,
};
pub use gset::make_gset;
pub use pair_counter::make_pair_counter;
pub use registry::{all_builtins, apply_bound, find_builtin, BuiltinSpec};
