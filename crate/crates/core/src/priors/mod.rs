//! Model priors and their sufficient statistics.
//!
//! A [`ModelPrior`] knows how to draw a whole MDP from its posterior given a
//! statistic (`sample_mdp`), how to draw a single transition from the
//! posterior predictive (`predictive_sample`), and how a statistic absorbs an
//! observed transition (`update`).

mod dp;
mod factored;
mod fdm;
mod point_mass;
mod stats;

use std::fmt::Debug;
use std::hash::Hash;

use rand::RngCore;

use crate::error::{Error, Result};
use crate::mdp::{value_bounds, ActionId, GenerativeMdp, StateId, TabularMdp, Transition};

pub use dp::DpRewardPrior;
pub use factored::{FactoredModel, FactoredObjectPrior, ObjectDomain};
pub use fdm::{FdmPrior, RewardModel};
pub use point_mass::PointMassPrior;
pub use stats::{PairStats, SuffStats, DEFAULT_CAP};

pub trait ModelPrior {
    /// The real (fully observed) environment state.
    type State: Clone + Eq + Hash + Debug;
    /// Sufficient statistic of the history.
    type Stats: Clone + Eq + Hash + Debug;
    /// What `sample_mdp` returns.
    type Model: GenerativeMdp<State = Self::State>;

    fn num_actions(&self) -> usize;

    /// Size of a finite state space, when the prior has one.
    fn num_states(&self) -> Option<usize> {
        None
    }

    fn discount(&self) -> f64;

    fn reward_bounds(&self) -> (f64, f64);

    fn value_bounds(&self) -> (f64, f64) {
        value_bounds(self.reward_bounds(), self.discount())
    }

    fn is_terminal(&self, state: &Self::State) -> bool;

    /// Statistic of the empty history.
    fn empty_stats(&self) -> Self::Stats;

    /// Statistic at the start of an episode that begins in `state`; priors
    /// whose states carry observations fold them in here.
    fn initial_stats(&self, _state: &Self::State) -> Self::Stats {
        self.empty_stats()
    }

    fn update(
        &self,
        stats: &Self::Stats,
        state: &Self::State,
        action: ActionId,
        next: &Self::State,
        reward: f64,
    ) -> Self::Stats;

    /// `M ~ prior | stats`.
    fn sample_mdp(&self, stats: &Self::Stats, rng: &mut dyn RngCore) -> Self::Model;

    /// One draw of `(s', r)` from the posterior predictive. The default
    /// samples a whole model and steps it once.
    fn predictive_sample(
        &self,
        state: &Self::State,
        action: ActionId,
        stats: &Self::Stats,
        rng: &mut dyn RngCore,
    ) -> Transition<Self::State> {
        self.sample_mdp(stats, rng).sample(state, action, rng)
    }

    /// Discovery events recorded in `stats`.
    fn discoveries(&self, _stats: &Self::Stats) -> u64 {
        0
    }
}

/// What a learner is told about a tabular domain up front: sizes, discount,
/// reward range and which states are terminal.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    pub num_states: usize,
    pub num_actions: usize,
    pub discount: f64,
    pub reward_bounds: (f64, f64),
    /// Most total reward any trajectory can collect, if known.
    pub return_cap: Option<f64>,
    pub terminal: Vec<StateId>,
}

impl DomainSpec {
    pub fn of(mdp: &TabularMdp) -> Self {
        Self {
            num_states: mdp.num_states(),
            num_actions: mdp.num_actions(),
            discount: mdp.discount(),
            reward_bounds: mdp.reward_bounds(),
            return_cap: mdp.return_cap(),
            terminal: mdp.terminal_states(),
        }
    }

    pub(crate) fn terminal_mask(&self) -> Result<Vec<bool>> {
        let mut mask = vec![false; self.num_states];
        for &t in &self.terminal {
            if t >= self.num_states {
                return Err(Error::InvalidParameter(format!("terminal state {t} out of range")));
            }
            mask[t] = true;
        }
        Ok(mask)
    }
}
