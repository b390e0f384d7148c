//! Constructive Lovász Local Lemma solving, tile-graph reductions and a
//! LOCAL-model simulator for pattern-avoiding colorings of Cayley graphs.

pub mod csp;
pub mod error;
pub mod graph;
pub mod group;
pub mod io;
pub mod local;
pub mod patterns;
pub mod solver;
pub mod subshift;
pub mod tiles;

pub use error::{Error, Result};
