use rand::RngCore;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::mdp::{capped_value_bounds, ActionId, StateId, TabularMdp, Transition};
use crate::util::{sample_weighted, uniform01, uniform_index};

use super::{DomainSpec, DpRewardPrior, ModelPrior, SuffStats};

/// Where rewards come from.
#[derive(Debug, Clone, PartialEq)]
pub enum RewardModel {
    /// The true `R(s, a)` table, indexed `s * A + a`.
    Known(Vec<f64>),
    /// Unknown deterministic rewards under a Dirichlet-process prior.
    Dp(DpRewardPrior),
}

/// Flat-Dirichlet-Multinomial: every `T(s, a)` is an independent draw from
/// `Dir(alpha)`. The posterior predictive is
/// `P(s' | s, a, h) = (C(s') + alpha_s') / sum_x (C(x) + alpha_x)`.
#[derive(Debug, Clone)]
pub struct FdmPrior {
    spec: DomainSpec,
    terminal: Vec<bool>,
    alpha: Vec<f64>,
    alpha_total: f64,
    symmetric: bool,
    cap: u32,
    rewards: RewardModel,
}

impl FdmPrior {
    pub fn new(spec: DomainSpec, alpha: Vec<f64>, cap: u32, rewards: RewardModel) -> Result<Self> {
        if alpha.len() != spec.num_states {
            return Err(Error::InvalidParameter(format!(
                "alpha has {} entries for {} states",
                alpha.len(),
                spec.num_states
            )));
        }
        if alpha.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::InvalidParameter("every alpha entry must be positive".into()));
        }
        if let RewardModel::Known(r) = &rewards {
            if r.len() != spec.num_states * spec.num_actions {
                return Err(Error::InvalidParameter("known reward table has the wrong size".into()));
            }
        }
        let terminal = spec.terminal_mask()?;
        let alpha_total = alpha.iter().sum();
        let symmetric = alpha.windows(2).all(|w| w[0] == w[1]);
        Ok(Self { spec, terminal, alpha, alpha_total, symmetric, cap, rewards })
    }

    /// `alpha_s' = alpha` for every state.
    pub fn symmetric(spec: DomainSpec, alpha: f64, cap: u32, rewards: RewardModel) -> Result<Self> {
        let alpha = vec![alpha; spec.num_states];
        Self::new(spec, alpha, cap, rewards)
    }

    /// FDM over a known MDP's state space, with its rewards either given or
    /// learned under `dp`.
    pub fn for_mdp(mdp: &TabularMdp, alpha: f64, cap: u32, dp: Option<DpRewardPrior>) -> Result<Self> {
        let rewards = match dp {
            Some(dp) => RewardModel::Dp(dp),
            None => RewardModel::Known(mdp.rewards().to_vec()),
        };
        Self::symmetric(DomainSpec::of(mdp), alpha, cap, rewards)
    }

    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn cap(&self) -> u32 {
        self.cap
    }

    pub fn reward_model(&self) -> &RewardModel {
        &self.rewards
    }

    /// Closed-form posterior predictive probability of `next`.
    pub fn predictive_prob(&self, s: StateId, a: ActionId, next: StateId, stats: &SuffStats) -> f64 {
        let total = stats.total(s, a) as f64;
        (stats.count(s, a, next) as f64 + self.alpha[next]) / (total + self.alpha_total)
    }

    /// Draws `s'` from the predictive without materialising a dense row:
    /// with probability `sum alpha / (n + sum alpha)` from the prior
    /// pseudo-counts, otherwise from the observed histogram.
    pub fn sample_next_state(&self, s: StateId, a: ActionId, stats: &SuffStats, rng: &mut dyn RngCore) -> StateId {
        let pair = stats.pair(s, a);
        let observed = pair.map_or(0, |p| p.total()) as f64;
        let u = uniform01(rng) * (observed + self.alpha_total);
        if let Some(pair) = pair {
            if u < observed {
                let mut rest = u;
                for &(next, n) in pair.histogram() {
                    if rest < n as f64 {
                        return next;
                    }
                    rest -= n as f64;
                }
                return pair.histogram()[pair.histogram().len() - 1].0;
            }
        }
        if self.symmetric {
            uniform_index(rng, self.spec.num_states)
        } else {
            sample_weighted(&self.alpha, self.alpha_total, rng)
        }
    }

    pub fn sample_reward(&self, s: StateId, a: ActionId, stats: &SuffStats, rng: &mut dyn RngCore) -> f64 {
        match &self.rewards {
            RewardModel::Known(r) => r[s * self.spec.num_actions + a],
            RewardModel::Dp(dp) => dp.sample(s, a, stats, rng),
        }
    }

    /// One `theta ~ Dir(alpha + counts(s, a))` row, dense.
    pub fn sample_row(&self, s: StateId, a: ActionId, stats: &SuffStats, rng: &mut dyn RngCore) -> Vec<f64> {
        let mut row: Vec<f64> = (0..self.spec.num_states)
            .map(|next| {
                let shape = self.alpha[next] + stats.count(s, a, next) as f64;
                Gamma::new(shape, 1.0).expect("positive shape").sample(rng)
            })
            .collect();
        let total: f64 = row.iter().sum();
        if total > 0.0 && total.is_finite() {
            row.iter_mut().for_each(|x| *x /= total);
        } else {
            // Every gamma draw underflowed; fall back to the posterior mode.
            let best = (0..row.len())
                .max_by(|&i, &j| {
                    let wi = self.alpha[i] + stats.count(s, a, i) as f64;
                    let wj = self.alpha[j] + stats.count(s, a, j) as f64;
                    wi.total_cmp(&wj).then(j.cmp(&i))
                })
                .unwrap_or(0);
            row.iter_mut().for_each(|x| *x = 0.0);
            row[best] = 1.0;
        }
        row
    }
}

impl ModelPrior for FdmPrior {
    type State = StateId;
    type Stats = SuffStats;
    type Model = TabularMdp;

    fn num_actions(&self) -> usize {
        self.spec.num_actions
    }

    fn num_states(&self) -> Option<usize> {
        Some(self.spec.num_states)
    }

    fn discount(&self) -> f64 {
        self.spec.discount
    }

    fn reward_bounds(&self) -> (f64, f64) {
        self.spec.reward_bounds
    }

    fn value_bounds(&self) -> (f64, f64) {
        capped_value_bounds(self.spec.reward_bounds, self.spec.discount, self.spec.return_cap)
    }

    fn is_terminal(&self, state: &StateId) -> bool {
        self.terminal[*state]
    }

    fn empty_stats(&self) -> SuffStats {
        SuffStats::new(self.spec.num_states, self.spec.num_actions, self.cap)
    }

    fn update(&self, stats: &SuffStats, &s: &StateId, a: ActionId, &next: &StateId, r: f64) -> SuffStats {
        stats.update(s, a, next, r)
    }

    fn sample_mdp(&self, stats: &SuffStats, rng: &mut dyn RngCore) -> TabularMdp {
        let (num_states, num_actions) = (self.spec.num_states, self.spec.num_actions);
        let mut rows = Vec::with_capacity(num_states * num_actions);
        let mut rewards = Vec::with_capacity(num_states * num_actions);
        let mut tables = stats.reward_tables().to_vec();
        for s in 0..num_states {
            for a in 0..num_actions {
                if self.terminal[s] {
                    rows.push(vec![(s, 1.0)]);
                    rewards.push(0.0);
                    continue;
                }
                let dense = self.sample_row(s, a, stats, rng);
                rows.push(dense.into_iter().enumerate().filter(|&(_, p)| p > 0.0).collect());
                let r = match &self.rewards {
                    RewardModel::Known(r) => r[s * num_actions + a],
                    RewardModel::Dp(dp) => match stats.reward(s, a) {
                        Some(r) => r,
                        None => {
                            // Sequential CRP: later pairs see earlier draws.
                            let r = dp.draw(&tables, rng);
                            match tables.binary_search_by(|(v, _)| v.total_cmp(&r)) {
                                Ok(i) => tables[i].1 += 1,
                                Err(i) => tables.insert(i, (r, 1)),
                            }
                            r
                        }
                    },
                };
                rewards.push(r);
            }
        }
        TabularMdp::new(
            num_states,
            num_actions,
            rows,
            rewards,
            self.spec.discount,
            &self.spec.terminal,
            self.spec.reward_bounds,
        )
        .expect("posterior sample is a valid MDP")
    }

    fn predictive_sample(&self, &s: &StateId, a: ActionId, stats: &SuffStats, rng: &mut dyn RngCore) -> Transition<StateId> {
        if self.terminal[s] {
            return Transition { next_state: s, reward: 0.0 };
        }
        let next_state = self.sample_next_state(s, a, stats, rng);
        let reward = self.sample_reward(s, a, stats, rng);
        Transition { next_state, reward }
    }

    fn discoveries(&self, stats: &SuffStats) -> u64 {
        stats.discoveries()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::seeded_rng;

    fn spec(num_states: usize, num_actions: usize) -> DomainSpec {
        DomainSpec { num_states, num_actions, discount: 0.9, reward_bounds: (0.0, 1.0), return_cap: None, terminal: vec![] }
    }

    fn known(n: usize) -> RewardModel {
        RewardModel::Known(vec![0.5; n])
    }

    #[test]
    fn uniform_predictive_with_no_data() {
        let prior = FdmPrior::symmetric(spec(4, 2), 1.0, 10, known(8)).unwrap();
        let stats = prior.empty_stats();
        for next in 0..4 {
            assert_eq!(prior.predictive_prob(1, 1, next, &stats), 0.25);
        }
    }

    #[test]
    fn predictive_direct_evaluation() {
        let prior = FdmPrior::symmetric(spec(2, 1), 1.0, 10, known(2)).unwrap();
        let stats = prior.empty_stats().update(0, 0, 1, 0.5).update(0, 0, 1, 0.5).update(0, 0, 1, 0.5).update(0, 0, 0, 0.5);
        assert!((prior.predictive_prob(0, 0, 1, &stats) - 2.0 / 3.0).abs() < 1e-15);
        assert!((prior.predictive_prob(0, 0, 0, &stats) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn concentrated_prior_pins_sampled_rows() {
        let p = [0.2, 0.5, 0.3];
        let alpha: Vec<f64> = p.iter().map(|x| x * 1e6).collect();
        let prior = FdmPrior::new(spec(3, 1), alpha, 10, known(3)).unwrap();
        let mut rng = seeded_rng(4, 0);
        let mdp = prior.sample_mdp(&prior.empty_stats(), &mut rng);
        for s in 0..3 {
            let row = mdp.dense_row(s, 0);
            for (x, y) in row.iter().zip(p) {
                assert!((x - y).abs() < 0.01);
            }
        }
    }

    #[test]
    fn sample_mdp_is_seed_deterministic() {
        let prior = FdmPrior::symmetric(spec(3, 2), 0.5, 10, known(6)).unwrap();
        let stats = prior.empty_stats().update(0, 1, 2, 0.5);
        let a = prior.sample_mdp(&stats, &mut seeded_rng(9, 0));
        let b = prior.sample_mdp(&stats, &mut seeded_rng(9, 0));
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_hyperparameters() {
        assert!(FdmPrior::new(spec(2, 1), vec![1.0], 5, known(2)).is_err());
        assert!(FdmPrior::new(spec(2, 1), vec![1.0, 0.0], 5, known(2)).is_err());
        assert!(FdmPrior::new(spec(2, 1), vec![1.0, 1.0], 5, known(3)).is_err());
    }
}
