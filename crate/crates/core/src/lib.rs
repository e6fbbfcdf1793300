//! Matching toolkit for k-partite k-uniform hypergraphs.
//!
//! The crate builds and analyzes dense k-partite k-graphs: parity-based
//! extremal templates and the closeness measure to them, exact perfect- and
//! maximum-matching search, GF(2) detection of parity obstructions, a staged
//! constructive matcher for graphs close to the extremal template, and an
//! absorbing-family matcher for graphs far from it. A CLI (`kpmatch`) fronts
//! the generators, solvers, and experiment sweeps.

pub mod absorbing;
pub mod bits;
pub mod extremal;
pub mod generate;
pub mod gf2;
pub mod harness;
pub mod hypergraph;
pub mod io;
pub mod matcher;
pub mod parity;
pub mod pipeline;

pub use hypergraph::{Edge, HypergraphError, LegalSet, Matching, PartiteHypergraph, Vertex};
