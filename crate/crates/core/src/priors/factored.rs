use rand::RngCore;

use crate::error::{Error, Result};
use crate::mdp::{capped_value_bounds, ActionId, GenerativeMdp, StateId, Transition};
use crate::util::uniform01;

use super::{DomainSpec, FdmPrior, ModelPrior, RewardModel, SuffStats};

/// A domain whose state is a tuple of identical objects and whose actions
/// are `(object, object_action)` pairs encoded as
/// `object * object_actions + object_action`.
///
/// Actions only change the targeted object's local state.
pub trait ObjectDomain {
    fn num_objects(&self) -> usize;
    fn local_states(&self) -> usize;
    fn object_actions(&self) -> usize;
    fn num_states(&self) -> usize;
    fn local_state(&self, state: StateId, object: usize) -> usize;
    fn with_local_state(&self, state: StateId, object: usize, local: usize) -> StateId;
    /// Known reward `R(s, a)`.
    fn reward(&self, state: StateId, action: ActionId) -> f64;
    fn reward_bounds(&self) -> (f64, f64);
    fn discount(&self) -> f64;
    /// Most total reward any trajectory can collect, if known.
    fn return_cap(&self) -> Option<f64> {
        None
    }
    fn is_terminal(&self, state: StateId) -> bool;

    fn num_actions(&self) -> usize {
        self.num_objects() * self.object_actions()
    }

    fn decode_action(&self, action: ActionId) -> Result<(usize, usize)> {
        if action >= self.num_actions() {
            return Err(Error::InvalidParameter(format!(
                "action {action} does not encode an (object, action) pair; {} objects x {} actions",
                self.num_objects(),
                self.object_actions()
            )));
        }
        Ok((action / self.object_actions(), action % self.object_actions()))
    }
}

/// One FDM posterior over object-local dynamics, shared by every object.
#[derive(Debug, Clone)]
pub struct FactoredObjectPrior<D> {
    domain: D,
    local: FdmPrior,
}

impl<D: ObjectDomain> FactoredObjectPrior<D> {
    pub fn new(domain: D, alpha: f64, cap: u32) -> Result<Self> {
        let spec = DomainSpec {
            num_states: domain.local_states(),
            num_actions: domain.object_actions(),
            discount: domain.discount(),
            reward_bounds: domain.reward_bounds(),
            return_cap: None,
            terminal: vec![],
        };
        let zeros = vec![0.0; spec.num_states * spec.num_actions];
        let local = FdmPrior::symmetric(spec, alpha, cap, RewardModel::Known(zeros))?;
        Ok(Self { domain, local })
    }

    pub fn domain(&self) -> &D {
        &self.domain
    }

    /// The shared object-level FDM.
    pub fn local_prior(&self) -> &FdmPrior {
        &self.local
    }

    fn check_state(&self, state: StateId) -> Result<()> {
        if state >= self.domain.num_states() {
            return Err(Error::InvalidParameter(format!("state {state} out of range")));
        }
        Ok(())
    }

    /// Projects the targeted object's local transition into the shared statistic.
    pub fn factored_update(&self, stats: &SuffStats, s: StateId, a: ActionId, next: StateId, r: f64) -> Result<SuffStats> {
        self.check_state(s)?;
        self.check_state(next)?;
        let (object, object_action) = self.domain.decode_action(a)?;
        let local = self.domain.local_state(s, object);
        let local_next = self.domain.local_state(next, object);
        Ok(stats.update(local, object_action, local_next, r))
    }

    /// Draws the targeted object's next local state from the shared
    /// predictive; every other object stays put.
    pub fn factored_sample(&self, s: StateId, a: ActionId, stats: &SuffStats, rng: &mut dyn RngCore) -> Result<Transition<StateId>> {
        self.check_state(s)?;
        let (object, object_action) = self.domain.decode_action(a)?;
        if self.domain.is_terminal(s) {
            return Ok(Transition { next_state: s, reward: 0.0 });
        }
        let local = self.domain.local_state(s, object);
        let local_next = self.local.sample_next_state(local, object_action, stats, rng);
        Ok(Transition {
            next_state: self.domain.with_local_state(s, object, local_next),
            reward: self.domain.reward(s, a),
        })
    }

    /// Predictive probability that `object` moves to local state `local_next`.
    pub fn local_predictive_prob(&self, local: usize, object_action: usize, local_next: usize, stats: &SuffStats) -> f64 {
        self.local.predictive_prob(local, object_action, local_next, stats)
    }
}

impl<D: ObjectDomain + Clone> ModelPrior for FactoredObjectPrior<D> {
    type State = StateId;
    type Stats = SuffStats;
    type Model = FactoredModel<D>;

    fn num_actions(&self) -> usize {
        self.domain.num_actions()
    }

    fn num_states(&self) -> Option<usize> {
        Some(self.domain.num_states())
    }

    fn discount(&self) -> f64 {
        self.domain.discount()
    }

    fn reward_bounds(&self) -> (f64, f64) {
        self.domain.reward_bounds()
    }

    fn value_bounds(&self) -> (f64, f64) {
        capped_value_bounds(self.domain.reward_bounds(), self.domain.discount(), self.domain.return_cap())
    }

    fn is_terminal(&self, state: &StateId) -> bool {
        self.domain.is_terminal(*state)
    }

    fn empty_stats(&self) -> SuffStats {
        self.local.empty_stats()
    }

    fn update(&self, stats: &SuffStats, &s: &StateId, a: ActionId, &next: &StateId, r: f64) -> SuffStats {
        self.factored_update(stats, s, a, next, r).expect("valid factored transition")
    }

    fn sample_mdp(&self, stats: &SuffStats, rng: &mut dyn RngCore) -> FactoredModel<D> {
        let (locals, actions) = (self.domain.local_states(), self.domain.object_actions());
        let mut table = Vec::with_capacity(locals * actions);
        for l in 0..locals {
            for oa in 0..actions {
                table.push(self.local.sample_row(l, oa, stats, rng));
            }
        }
        FactoredModel { domain: self.domain.clone(), table }
    }

    fn predictive_sample(&self, s: &StateId, a: ActionId, stats: &SuffStats, rng: &mut dyn RngCore) -> Transition<StateId> {
        self.factored_sample(*s, a, stats, rng).expect("valid factored action")
    }

    fn discoveries(&self, stats: &SuffStats) -> u64 {
        stats.discoveries()
    }
}

/// A posterior draw of the shared object dynamics, applied to whichever
/// object an action targets.
#[derive(Debug, Clone)]
pub struct FactoredModel<D> {
    domain: D,
    /// Dense local rows indexed `local * object_actions + object_action`.
    table: Vec<Vec<f64>>,
}

impl<D> FactoredModel<D> {
    pub fn local_row(&self, local: usize, object_action: usize, object_actions: usize) -> &[f64] {
        &self.table[local * object_actions + object_action]
    }
}

impl<D: ObjectDomain> GenerativeMdp for FactoredModel<D> {
    type State = StateId;

    fn num_actions(&self) -> usize {
        self.domain.num_actions()
    }

    fn discount(&self) -> f64 {
        self.domain.discount()
    }

    fn reward_bounds(&self) -> (f64, f64) {
        self.domain.reward_bounds()
    }

    fn value_bounds(&self) -> (f64, f64) {
        capped_value_bounds(self.domain.reward_bounds(), self.domain.discount(), self.domain.return_cap())
    }

    fn is_terminal(&self, state: &StateId) -> bool {
        self.domain.is_terminal(*state)
    }

    fn sample(&self, &s: &StateId, a: ActionId, rng: &mut dyn RngCore) -> Transition<StateId> {
        if self.domain.is_terminal(s) {
            return Transition { next_state: s, reward: 0.0 };
        }
        let (object, object_action) = self.domain.decode_action(a).expect("valid factored action");
        let local = self.domain.local_state(s, object);
        let row = self.local_row(local, object_action, self.domain.object_actions());
        let mut u = uniform01(rng);
        let mut local_next = row.iter().rposition(|&p| p > 0.0).unwrap_or(local);
        for (i, &p) in row.iter().enumerate() {
            if u < p {
                local_next = i;
                break;
            }
            u -= p;
        }
        Transition {
            next_state: self.domain.with_local_state(s, object, local_next),
            reward: self.domain.reward(s, a),
        }
    }
}
