use rand::RngCore;

use crate::error::Result;
use crate::mdp::{greedy_action, value_iteration, ActionId, StateId, TabularMdp, ValueTable};
use crate::priors::DomainSpec;

use super::Agent;

pub const DEFAULT_KNOWN_THRESHOLD: u32 = 5;

const PLANNING_EPSILON: f64 = 1e-6;

/// RMAX: pairs tried fewer than `M` times lead to an absorbing state worth
/// `V_max`; the agent acts greedily in that optimistic model.
#[derive(Debug, Clone)]
pub struct RmaxAgent {
    spec: DomainSpec,
    known_threshold: u32,
    counts: Vec<u32>,
    next_counts: Vec<Vec<(StateId, u32)>>,
    reward_sums: Vec<f64>,
    values: Option<(TabularMdp, ValueTable)>,
}

impl RmaxAgent {
    pub fn new(spec: DomainSpec, known_threshold: u32) -> Result<Self> {
        spec.terminal_mask()?;
        if !(spec.discount < 1.0) {
            return Err(crate::Error::InvalidParameter("RMAX plans with value iteration and needs gamma < 1".into()));
        }
        let pairs = spec.num_states * spec.num_actions;
        Ok(Self {
            spec,
            known_threshold: known_threshold.max(1),
            counts: vec![0; pairs],
            next_counts: vec![Vec::new(); pairs],
            reward_sums: vec![0.0; pairs],
            values: None,
        })
    }

    pub fn count(&self, s: StateId, a: ActionId) -> u32 {
        self.counts[s * self.spec.num_actions + a]
    }

    pub fn is_known(&self, s: StateId, a: ActionId) -> bool {
        self.count(s, a) >= self.known_threshold
    }

    /// The optimistic model: the absorbing state is index `S`.
    pub fn optimistic_model(&self) -> TabularMdp {
        let (n_s, n_a) = (self.spec.num_states, self.spec.num_actions);
        let gamma = self.spec.discount;
        let (r_min, r_max) = self.spec.reward_bounds;
        let v_max = crate::mdp::value_bounds(self.spec.reward_bounds, gamma).1;
        // Reward that makes the absorbing state worth exactly V_max.
        let r_abs = v_max * (1.0 - gamma);
        let absorbing = n_s;
        let mut rows = Vec::with_capacity((n_s + 1) * n_a);
        let mut rewards = Vec::with_capacity((n_s + 1) * n_a);
        for i in 0..n_s * n_a {
            let n = self.counts[i];
            if n >= self.known_threshold {
                rows.push(self.next_counts[i].iter().map(|&(t, c)| (t, c as f64 / n as f64)).collect());
                rewards.push(self.reward_sums[i] / n as f64);
            } else {
                rows.push(vec![(absorbing, 1.0)]);
                rewards.push(r_abs);
            }
        }
        for _ in 0..n_a {
            rows.push(vec![(absorbing, 1.0)]);
            rewards.push(r_abs);
        }
        TabularMdp::new(
            n_s + 1,
            n_a,
            rows,
            rewards,
            gamma,
            &self.spec.terminal,
            (r_min.min(r_abs), r_max.max(r_abs)),
        )
        .expect("optimistic model is well formed")
    }

    /// Optimistic action values at `s`.
    pub fn q_values(&mut self, s: StateId) -> Vec<f64> {
        let num_actions = self.spec.num_actions;
        let (_, table) = self.plan();
        (0..num_actions).map(|a| table.q(s, a)).collect()
    }

    fn plan(&mut self) -> &(TabularMdp, ValueTable) {
        if self.values.is_none() {
            let mdp = self.optimistic_model();
            let table = value_iteration(&mdp, PLANNING_EPSILON).expect("gamma < 1 checked at construction");
            self.values = Some((mdp, table));
        }
        self.values.as_ref().unwrap()
    }
}

impl Agent<StateId> for RmaxAgent {
    fn name(&self) -> &str {
        "rmax"
    }

    fn act(&mut self, &s: &StateId, _rng: &mut dyn RngCore) -> ActionId {
        let (mdp, table) = self.plan();
        greedy_action(mdp, table, s)
    }

    fn observe(&mut self, &s: &StateId, a: ActionId, &next: &StateId, reward: f64) {
        let i = s * self.spec.num_actions + a;
        // Known pairs are frozen, so knownness never flips back.
        if self.counts[i] >= self.known_threshold {
            return;
        }
        self.counts[i] += 1;
        self.reward_sums[i] += reward;
        match self.next_counts[i].iter_mut().find(|(t, _)| *t == next) {
            Some((_, c)) => *c += 1,
            None => self.next_counts[i].push((next, 1)),
        }
        if self.counts[i] == self.known_threshold {
            self.values = None;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{greedy_policy, random_tabular_mdp};
    use crate::util::seeded_rng;
    use crate::GenerativeMdp;

    #[test]
    fn all_unknown_pairs_are_worth_v_max() {
        let mdp = random_tabular_mdp(3, 3, 0, 2).unwrap();
        let mut agent = RmaxAgent::new(DomainSpec::of(&mdp), 5).unwrap();
        let v_max = mdp.value_bounds().1;
        for q in agent.q_values(1) {
            assert!((q - v_max).abs() < 1e-4);
        }
        assert_eq!(agent.act(&1, &mut seeded_rng(0, 0)), 0);
    }

    #[test]
    fn learns_the_optimal_policy_of_a_deterministic_mdp() {
        let mdp = random_tabular_mdp(4, 2, 3, 1).unwrap();
        let mut agent = RmaxAgent::new(DomainSpec::of(&mdp), 2).unwrap();
        let mut rng = seeded_rng(0, 0);
        for s in 0..4 {
            for a in 0..2 {
                for _ in 0..2 {
                    let t = mdp.sample(&s, a, &mut rng);
                    agent.observe(&s, a, &t.next_state, t.reward);
                }
            }
        }
        let vi = value_iteration(&mdp, 1e-9).unwrap();
        let optimal = greedy_policy(&mdp, &vi);
        for s in 0..4 {
            assert_eq!(agent.act(&s, &mut rng), optimal[s]);
        }
    }

    #[test]
    fn counts_increment_once_and_freeze() {
        let mdp = random_tabular_mdp(2, 1, 1, 1).unwrap();
        let mut agent = RmaxAgent::new(DomainSpec::of(&mdp), 3).unwrap();
        for n in 1..=5u32 {
            agent.observe(&0, 0, &1, 0.5);
            assert_eq!(agent.count(0, 0), n.min(3));
        }
        assert!(agent.is_known(0, 0));
    }
}
