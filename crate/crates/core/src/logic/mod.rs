//! Local first-order formulas, their pairings with structures, and the weak algebra.

mod algebra;
mod ast;
mod decompose;
mod eval;
mod locality;
mod parse;

pub use algebra::{free_product, rename, weak_add, weak_sub, TestFamily};
pub use ast::{Formula, Var};
pub use decompose::{strongly_local_decomposition, PairingPolynomial, MAX_ARITY, MAX_RADIUS};
pub use eval::{local_stone_pairing, local_stone_pairings, satisfaction_set, stone_pairing, Checker};
pub use locality::{free_bounds, is_strongly_local, locality_radius, radius, span};
pub use parse::{parse_bindings, parse_formula};

#[allow(unused_imports)]
pub(crate) use eval::BallIndex;
