use rand::RngCore;

use crate::mdp::{ActionId, GenerativeMdp, StateId, TabularMdp, Transition};

use super::{ModelPrior, SuffStats};

/// A prior that puts all its mass on one known MDP.
///
/// Posterior draws always return the wrapped MDP. The statistic still has a
/// knownness cap: with the default cap of zero every update is a no-op, so a
/// belief-MDP built on this prior is isomorphic to the wrapped MDP itself.
#[derive(Debug, Clone)]
pub struct PointMassPrior {
    mdp: TabularMdp,
    cap: u32,
}

impl PointMassPrior {
    pub fn new(mdp: TabularMdp) -> Self {
        Self { mdp, cap: 0 }
    }

    /// Accumulate up to `cap` samples per pair in the statistic.
    pub fn with_cap(mut self, cap: u32) -> Self {
        self.cap = cap;
        self
    }

    pub fn mdp(&self) -> &TabularMdp {
        &self.mdp
    }
}

impl ModelPrior for PointMassPrior {
    type State = StateId;
    type Stats = SuffStats;
    type Model = TabularMdp;

    fn num_actions(&self) -> usize {
        self.mdp.num_actions()
    }

    fn num_states(&self) -> Option<usize> {
        Some(self.mdp.num_states())
    }

    fn discount(&self) -> f64 {
        self.mdp.discount()
    }

    fn reward_bounds(&self) -> (f64, f64) {
        self.mdp.reward_bounds()
    }

    fn value_bounds(&self) -> (f64, f64) {
        self.mdp.value_bounds()
    }

    fn is_terminal(&self, state: &StateId) -> bool {
        self.mdp.is_terminal(state)
    }

    fn empty_stats(&self) -> SuffStats {
        SuffStats::new(self.mdp.num_states(), self.mdp.num_actions(), self.cap)
    }

    fn update(&self, stats: &SuffStats, &s: &StateId, a: ActionId, &next: &StateId, r: f64) -> SuffStats {
        stats.update(s, a, next, r)
    }

    fn sample_mdp(&self, _stats: &SuffStats, _rng: &mut dyn RngCore) -> TabularMdp {
        self.mdp.clone()
    }

    fn predictive_sample(&self, s: &StateId, a: ActionId, _stats: &SuffStats, rng: &mut dyn RngCore) -> Transition<StateId> {
        self.mdp.sample(s, a, rng)
    }

    fn discoveries(&self, stats: &SuffStats) -> u64 {
        stats.discoveries()
    }
}
