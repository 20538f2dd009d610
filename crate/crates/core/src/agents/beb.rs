use rand::RngCore;

use crate::error::{Error, Result};
use crate::mdp::{greedy_action, value_iteration, ActionId, StateId, TabularMdp};
use crate::priors::{DomainSpec, RewardModel};

use super::Agent;

pub const DEFAULT_BETA: f64 = 2.5;

const PLANNING_EPSILON: f64 = 1e-6;

/// `R(s, a) + beta / (1 + n(s, a))`.
pub fn beb_bonus_reward(reward: f64, visits: u32, beta: f64) -> f64 {
    reward + beta / (1.0 + visits as f64)
}

/// Bayesian exploration bonus: greedy in the maximum-likelihood model with
/// the bonus added to the known rewards. Pairs never tried are modelled as
/// self-loops.
#[derive(Debug, Clone)]
pub struct BebAgent {
    spec: DomainSpec,
    rewards: Vec<f64>,
    beta: f64,
    visits: Vec<u32>,
    next_counts: Vec<Vec<(StateId, u32)>>,
}

impl BebAgent {
    pub fn new(spec: DomainSpec, rewards: Vec<f64>, beta: f64) -> Result<Self> {
        spec.terminal_mask()?;
        let pairs = spec.num_states * spec.num_actions;
        if rewards.len() != pairs {
            return Err(Error::InvalidParameter("BEB reward table has the wrong size".into()));
        }
        if !(beta >= 0.0) {
            return Err(Error::InvalidParameter(format!("beta must be non-negative, got {beta}")));
        }
        if !(spec.discount < 1.0) {
            return Err(Error::InvalidParameter("BEB plans with value iteration and needs gamma < 1".into()));
        }
        Ok(Self { spec, rewards, beta, visits: vec![0; pairs], next_counts: vec![Vec::new(); pairs] })
    }

    /// BEB needs the true rewards; a DP reward prior is rejected.
    pub fn from_reward_model(spec: DomainSpec, rewards: &RewardModel, beta: f64) -> Result<Self> {
        match rewards {
            RewardModel::Known(r) => Self::new(spec, r.clone(), beta),
            RewardModel::Dp(_) => Err(Error::InvalidParameter("BEB requires a known reward function".into())),
        }
    }

    pub fn visits(&self, s: StateId, a: ActionId) -> u32 {
        self.visits[s * self.spec.num_actions + a]
    }

    /// The bonus-augmented maximum-likelihood model.
    pub fn model(&self) -> TabularMdp {
        let (n_s, n_a) = (self.spec.num_states, self.spec.num_actions);
        let mut rows = Vec::with_capacity(n_s * n_a);
        let mut rewards = Vec::with_capacity(n_s * n_a);
        for s in 0..n_s {
            for a in 0..n_a {
                let i = s * n_a + a;
                let n = self.visits[i];
                if n == 0 {
                    rows.push(vec![(s, 1.0)]);
                } else {
                    rows.push(self.next_counts[i].iter().map(|&(t, c)| (t, c as f64 / n as f64)).collect());
                }
                rewards.push(beb_bonus_reward(self.rewards[i], n, self.beta));
            }
        }
        let (r_min, r_max) = self.spec.reward_bounds;
        TabularMdp::new(n_s, n_a, rows, rewards, self.spec.discount, &self.spec.terminal, (r_min, r_max + self.beta))
            .expect("maximum-likelihood model is well formed")
    }
}

impl Agent<StateId> for BebAgent {
    fn name(&self) -> &str {
        "beb"
    }

    fn act(&mut self, &s: &StateId, _rng: &mut dyn RngCore) -> ActionId {
        let mdp = self.model();
        let table = value_iteration(&mdp, PLANNING_EPSILON).expect("gamma < 1 checked at construction");
        greedy_action(&mdp, &table, s)
    }

    fn observe(&mut self, &s: &StateId, a: ActionId, &next: &StateId, _reward: f64) {
        let i = s * self.spec.num_actions + a;
        self.visits[i] += 1;
        match self.next_counts[i].iter_mut().find(|(t, _)| *t == next) {
            Some((_, c)) => *c += 1,
            None => self.next_counts[i].push((next, 1)),
        }
    }
}
