//! Planning for multi-round, budget-constrained allocation when each unit given
//! to a frontier member can turn into a new member, and arrivals are random.
//!
//! The pieces, bottom-up:
//!
//! - [`dist`]: referral-count distributions, survival tables, population mixtures.
//! - [`single_round`]: greedy allocation of one round's budget over a frontier.
//! - [`pgf`]: truncated generating functions giving exact next-frontier-size laws.
//! - [`surrogate`]: the population-level value table and the round-budget selector.
//! - [`policy`]: constant, greedy, greedy-remainder and surrogate policies.
//! - [`sim`]: distribution-sampled and network-realized environments, batch runner.
//! - [`population`]: edge/covariate ingestion and regression-tree population fitting.
//! - [`diagnostics`]: single-round and multi-round robustness bounds.
//! - [`oracle`]: exhaustive Bellman evaluation for tiny instances.

pub mod diagnostics;
pub mod dist;
pub mod error;
pub mod oracle;
pub mod pgf;
pub mod policy;
pub mod population;
pub mod rng;
pub mod sim;
pub mod single_round;
pub mod surrogate;

pub use dist::{tv_distance, Component, Pmf, PopulationModel};
pub use error::{Error, Result};
pub use pgf::TruncatedPoly;
pub use policy::{Action, Policy, PolicySpec};
pub use single_round::{greedy_allocate, Allocation, EvenParams};
pub use surrogate::{compute_table, select_round_budget, ValueTable};
