//! Hypothesis explanation over knowledge graphs.
//!
//! The pipeline scores nodes by information content ([`info`]), trains a
//! policy-gradient agent to walk from a hypothesis subject to its object
//! along informative edges ([`pathfinder`]), and merges the discovered
//! paths into an ontology-enriched explanation graph ([`explanation`]).
//! [`eval`] holds ranking metrics, ablations and metapath matching.

pub mod eval;
pub mod explanation;
pub mod info;
pub mod kg;
pub mod pathfinder;
pub mod seed;
