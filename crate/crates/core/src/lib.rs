//! Causal effect identification from a mix of observational and
//! experimental distributions, with optional conditioning.

pub mod cgid;
pub mod cli;
pub mod components;
pub mod dsl;
pub mod estimand;
pub mod gid;
pub mod graph;
pub mod identify;
pub mod nodeset;
pub mod sem;
pub mod separation;
pub mod stats;

pub use cgid::{cgid_decide, max_bi, ConditionalQuery};
pub use components::{c_components, find_hedge, HedgeWitness};
pub use estimand::Estimand;
pub use gid::{gid_decide, QSpec, Verdict};
pub use graph::{CausalGraph, GraphError, NodeId};
pub use nodeset::NodeSet;
pub use separation::d_separated;
