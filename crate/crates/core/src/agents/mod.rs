//! Acting agents: BFS3 plus the baselines it is compared against.
//!
//! Every agent sees the real state, picks an action, and is then told the
//! transition that actually happened. Per-decision instrumentation is read
//! back through [`Agent::last_decision`].

mod beb;
mod bfs3;
mod random;
mod rmax;

use rand::RngCore;

use crate::mdp::ActionId;

pub use beb::{beb_bonus_reward, BebAgent, DEFAULT_BETA};
pub use bfs3::{lookahead_q, Bfs3Agent, Bfs3Counters, FsssAgent, Lookahead};
pub use random::RandomAgent;
pub use rmax::{RmaxAgent, DEFAULT_KNOWN_THRESHOLD};

/// What the last call to [`Agent::act`] cost.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Decision {
    /// Generative-model queries issued while deciding.
    pub queries: u64,
    /// The action came from a memo without planning.
    pub cache_hit: bool,
}

pub trait Agent<S> {
    fn name(&self) -> &str;

    /// Called with the first state of every episode.
    fn begin_episode(&mut self, _state: &S) {}

    fn act(&mut self, state: &S, rng: &mut dyn RngCore) -> ActionId;

    /// The transition the environment actually produced.
    fn observe(&mut self, state: &S, action: ActionId, next: &S, reward: f64);

    fn last_decision(&self) -> Decision {
        Decision::default()
    }

    /// Cumulative discovery events, for agents that track them.
    fn discoveries(&self) -> u64 {
        0
    }
}

impl<S, A: Agent<S> + ?Sized> Agent<S> for Box<A> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn begin_episode(&mut self, state: &S) {
        (**self).begin_episode(state)
    }

    fn act(&mut self, state: &S, rng: &mut dyn RngCore) -> ActionId {
        (**self).act(state, rng)
    }

    fn observe(&mut self, state: &S, action: ActionId, next: &S, reward: f64) {
        (**self).observe(state, action, next, reward)
    }

    fn last_decision(&self) -> Decision {
        (**self).last_decision()
    }

    fn discoveries(&self) -> u64 {
        (**self).discoveries()
    }
}
