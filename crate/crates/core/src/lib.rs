//! Parallel-server queueing with cost-weighted scheduling: the slot model,
//! a coupled simulation engine, schedulers (including the empirical
//! learner), stationary-analysis stability tools and experiment harnesses.
//!
//! The crate is `no_std` with `alloc`.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod engine;
pub mod experiments;
pub mod lp;
pub mod model;
pub mod rng;
pub mod schedulers;
pub mod stability;

pub use model::{Assignment, CapacityResult, QueueState, SystemParams, ValidationReport};
