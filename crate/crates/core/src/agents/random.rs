use rand::RngCore;

use crate::mdp::ActionId;
use crate::util::uniform_index;

use super::Agent;

/// Uniformly random actions.
#[derive(Debug, Clone)]
pub struct RandomAgent {
    num_actions: usize,
}

impl RandomAgent {
    pub fn new(num_actions: usize) -> Self {
        assert!(num_actions > 0, "need at least one action");
        Self { num_actions }
    }
}

impl<S> Agent<S> for RandomAgent {
    fn name(&self) -> &str {
        "random"
    }

    fn act(&mut self, _state: &S, rng: &mut dyn RngCore) -> ActionId {
        uniform_index(rng, self.num_actions)
    }

    fn observe(&mut self, _: &S, _: ActionId, _: &S, _: f64) {}
}
