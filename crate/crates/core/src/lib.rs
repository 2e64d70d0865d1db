//! Hierarchical conjunctive queries over tuple streams.
//!
//! Queries are compiled into parallelized complex event automata ([`pcea`]),
//! which [`engine`] evaluates under a sliding window using the persistent
//! enumeration structure in [`store`]. Brute-force reference semantics live
//! next to each model ([`pcea::oracle`], [`cq::semantics`]) and back the tests.

pub mod compiler;
pub mod cq;
pub mod engine;
pub mod error;
pub mod model;
pub mod pcea;
pub mod pfa;
pub mod samples;
pub mod store;
pub mod workload;

pub use error::{Error, Result};
