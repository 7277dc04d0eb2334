//! Automatic heuristic design environment.
//!
//! An agent writes candidate heuristics as small scripts. The environment
//! plugs them into a constructive or ant-colony solver backbone, scores them
//! on a design split under an evaluator-call budget, offers free diagnostic
//! tools, and turns the final answer into a scalar reward.

pub mod agent;
pub mod diagnostics;
pub mod domain;
pub mod instancegen;
pub mod programhost;
pub mod scoring;
pub mod session;
pub mod solvers;

pub use domain::{Backbone, Direction, Domain};
