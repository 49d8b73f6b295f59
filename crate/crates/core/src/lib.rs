//! Grammar induction for small molecular datasets.
//!
//! A molecule is viewed as a hypergraph whose nodes are its bonds. The crate
//! builds the bond-level clique graph, drives a clique-tree (junction-tree)
//! decomposition in which every judgment call is delegated to a pluggable
//! [`oracle::Oracle`], turns each rooted tree into hyperedge-replacement
//! production rules, pools those rules into a counted [`hrg::Grammar`], and
//! samples new molecules from it.
//!
//! Alternative decompositions of the same molecule are compared through
//! their reasoning logs ("design stories") in a Swiss tournament whose soft
//! outcomes are consolidated with a Bradley-Terry fit ([`rank`]).
//!
//! The crate is `no_std` and only needs `alloc`; file formats, network
//! transports and the command line live in the `molgrammar` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod canon;
pub mod chordal;
pub mod decompose;
pub mod eval;
pub mod generate;
pub mod hrg;
pub mod hypergraph;
pub mod molecule;
pub mod oracle;
pub mod rank;

mod bitset;
mod seed;

pub use bitset::NodeSet;
pub use seed::{derive_seed, fnv1a};
