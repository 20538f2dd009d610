//! Bayesian model-based reinforcement learning by planning in belief space.
//!
//! The central piece is [`agents::Bfs3Agent`]: it runs forward search sparse
//! sampling ([`fsss`]) on a belief-MDP ([`belief::BeliefMdp`]) whose
//! transitions are drawn from the posterior of a pluggable [`priors::ModelPrior`].
//! Around it sit exact solvers and a sparse-sampling oracle for testing,
//! baseline agents (RMAX, BEB, random), the benchmark [`domains`], and a
//! seeded experiment [`harness`].

pub mod agents;
pub mod belief;
pub mod domains;
pub mod error;
pub mod fsss;
pub mod harness;
pub mod mdp;
pub mod priors;

mod util;

pub use error::{Error, Result};
pub use util::seeded_rng;
pub use mdp::{ActionId, GenerativeMdp, StateId, TabularMdp, Transition, ValueTable};
