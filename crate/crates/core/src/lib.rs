//! Cluster analysis for sequences of finite measured relational structures, seen
//! through their local first-order statistics.

pub mod config;
pub mod error;
pub mod generators;
pub mod globular;
pub mod logic;
pub mod sequences;
pub mod spectrum;
pub mod structure;

pub use error::{Error, Result};
pub use logic::{parse_formula, stone_pairing, Formula};
pub use structure::{Signature, Structure, VertexSet};
