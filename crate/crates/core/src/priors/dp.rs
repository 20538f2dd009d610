use rand::RngCore;

use crate::error::{Error, Result};
use crate::mdp::{ActionId, StateId};
use crate::util::uniform01;

use super::SuffStats;

/// `R(s,a) ~ DP(alpha, Unif(r_min, r_max))`, one draw per state-action pair.
///
/// Rewards are deterministic once seen. Unseen pairs follow the Chinese
/// restaurant predictive over the pairs pinned so far: each pinned pair is
/// one customer at the table of its value.
#[derive(Debug, Clone, PartialEq)]
pub struct DpRewardPrior {
    alpha: f64,
    r_min: f64,
    r_max: f64,
}

impl DpRewardPrior {
    pub fn new(alpha: f64, r_min: f64, r_max: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::InvalidParameter(format!("DP concentration must be positive, got {alpha}")));
        }
        if !(r_min <= r_max) {
            return Err(Error::InvalidParameter(format!("empty reward range [{r_min}, {r_max}]")));
        }
        Ok(Self { alpha, r_min, r_max })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.r_min, self.r_max)
    }

    /// Reward for `(s, a)` given the statistic.
    pub fn sample(&self, s: StateId, a: ActionId, stats: &SuffStats, rng: &mut dyn RngCore) -> f64 {
        match stats.reward(s, a) {
            Some(r) => r,
            None => self.draw(stats.reward_tables(), rng),
        }
    }

    /// Draw for a fresh pair given the tables `(value, pairs)`.
    pub fn draw(&self, tables: &[(f64, u32)], rng: &mut dyn RngCore) -> f64 {
        let seated: u32 = tables.iter().map(|&(_, n)| n).sum();
        let mut u = uniform01(rng) * (seated as f64 + self.alpha);
        for &(value, n) in tables {
            if u < n as f64 {
                return value;
            }
            u -= n as f64;
        }
        self.r_min + (self.r_max - self.r_min) * uniform01(rng)
    }

    /// Predictive probability that a fresh pair joins the table of `value`.
    pub fn table_probability(&self, tables: &[(f64, u32)], value: f64) -> f64 {
        let seated: u32 = tables.iter().map(|&(_, n)| n).sum();
        let n = tables.iter().find(|&&(v, _)| v == value).map_or(0, |&(_, n)| n);
        n as f64 / (seated as f64 + self.alpha)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::seeded_rng;

    #[test]
    fn observed_pairs_return_their_reward() {
        let prior = DpRewardPrior::new(1.0, -1.0, 0.0).unwrap();
        let stats = SuffStats::new(2, 1, 5).update(0, 0, 1, -1.0);
        let mut rng = seeded_rng(0, 0);
        for _ in 0..100 {
            assert_eq!(prior.sample(0, 0, &stats, &mut rng), -1.0);
        }
    }

    #[test]
    fn empty_restaurant_draws_from_the_base_measure() {
        let prior = DpRewardPrior::new(1.0, 2.0, 3.0).unwrap();
        let stats = SuffStats::new(2, 1, 5);
        let mut rng = seeded_rng(1, 0);
        let draws: Vec<f64> = (0..2000).map(|_| prior.sample(1, 0, &stats, &mut rng)).collect();
        assert!(draws.iter().all(|&r| (2.0..=3.0).contains(&r)));
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        assert!((mean - 2.5).abs() < 0.03);
    }

    #[test]
    fn table_probabilities_are_order_invariant() {
        let prior = DpRewardPrior::new(0.5, 0.0, 1.0).unwrap();
        let a = SuffStats::new(4, 1, 3).update(0, 0, 1, 0.2).update(1, 0, 1, 0.7).update(2, 0, 1, 0.2);
        let b = SuffStats::new(4, 1, 3).update(2, 0, 1, 0.2).update(0, 0, 1, 0.2).update(1, 0, 1, 0.7);
        for v in [0.2, 0.7, 0.5] {
            assert_eq!(
                prior.table_probability(a.reward_tables(), v),
                prior.table_probability(b.reward_tables(), v)
            );
        }
        assert!((prior.table_probability(a.reward_tables(), 0.2) - 2.0 / 3.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(DpRewardPrior::new(0.0, 0.0, 1.0).is_err());
        assert!(DpRewardPrior::new(1.0, 1.0, 0.0).is_err());
    }
}
