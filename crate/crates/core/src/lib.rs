//! Control-plane configuration verification by explicit-state model checking.
//!
//! The pipeline partitions the address space into packet equivalence classes
//! ([`pec`]), orders them by their cross-class dependencies ([`depgraph`]),
//! explores every converged state of an abstract path-vector protocol
//! ([`rpvp`], [`checker`]) and checks forwarding policies ([`policy`]) on the
//! composed data plane ([`fib`]).

pub mod checker;
pub mod cli;
pub mod depgraph;
pub mod fib;
pub mod gadgets;
pub mod netmodel;
pub mod pec;
pub mod policy;
pub mod rpvp;
pub mod spvp_oracle;
