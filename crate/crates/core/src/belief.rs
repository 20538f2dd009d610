//! The belief-MDP a prior induces.
//!
//! A belief-state pairs the real state with the sufficient statistic of the
//! history. Stepping it draws `(s', r)` from the posterior (either the closed
//! form predictive or by sampling a whole model and discarding it after one
//! step) and folds the transition into the statistic.

use rand::RngCore;

use crate::error::{Error, Result};
use crate::mdp::{ActionId, GenerativeMdp, Transition};
use crate::priors::{DomainSpec, ModelPrior};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BeliefState<S, T> {
    pub real: S,
    pub stats: T,
}

impl<S, T> BeliefState<S, T> {
    pub fn new(real: S, stats: T) -> Self {
        Self { real, stats }
    }
}

/// How a belief transition draws its sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplingMode {
    /// The prior's posterior predictive.
    #[default]
    Predictive,
    /// `M ~ prior | h`, then `s', r ~ M`, then forget `M`.
    ModelDraw,
}

/// A [`ModelPrior`] viewed as a generative MDP over belief-states.
#[derive(Debug, Clone)]
pub struct BeliefMdp<P> {
    prior: P,
    mode: SamplingMode,
}

pub type BeliefOf<P> = BeliefState<<P as ModelPrior>::State, <P as ModelPrior>::Stats>;

impl<P: ModelPrior> BeliefMdp<P> {
    pub fn new(prior: P) -> Self {
        Self { prior, mode: SamplingMode::Predictive }
    }

    pub fn with_mode(mut self, mode: SamplingMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn prior(&self) -> &P {
        &self.prior
    }

    pub fn mode(&self) -> SamplingMode {
        self.mode
    }

    /// Belief-state at the start of an episode in `real`.
    pub fn initial(&self, real: P::State) -> BeliefOf<P> {
        let stats = self.prior.initial_stats(&real);
        BeliefState::new(real, stats)
    }

    /// One belief transition. Terminal beliefs self-loop with reward 0.
    pub fn belief_step(&self, belief: &BeliefOf<P>, action: ActionId, rng: &mut dyn RngCore) -> (BeliefOf<P>, f64) {
        if self.prior.is_terminal(&belief.real) {
            return (belief.clone(), 0.0);
        }
        let t = match self.mode {
            SamplingMode::Predictive => self.prior.predictive_sample(&belief.real, action, &belief.stats, rng),
            SamplingMode::ModelDraw => {
                let model = self.prior.sample_mdp(&belief.stats, rng);
                model.sample(&belief.real, action, rng)
            }
        };
        let stats = self.prior.update(&belief.stats, &belief.real, action, &t.next_state, t.reward);
        (BeliefState::new(t.next_state, stats), t.reward)
    }
}

/// Builds the belief-MDP after checking that `spec` describes the same
/// domain as the prior.
pub fn make_belief_mdp<P: ModelPrior>(prior: P, spec: &DomainSpec) -> Result<BeliefMdp<P>> {
    if prior.num_actions() != spec.num_actions {
        return Err(Error::InvalidParameter(format!(
            "prior has {} actions, domain has {}",
            prior.num_actions(),
            spec.num_actions
        )));
    }
    if let Some(n) = prior.num_states() {
        if n != spec.num_states {
            return Err(Error::InvalidParameter(format!(
                "prior has {n} states, domain has {}",
                spec.num_states
            )));
        }
    }
    if prior.discount() != spec.discount {
        return Err(Error::InvalidParameter(format!(
            "prior discount {} differs from domain discount {}",
            prior.discount(),
            spec.discount
        )));
    }
    Ok(BeliefMdp::new(prior))
}

impl<P: ModelPrior> GenerativeMdp for BeliefMdp<P> {
    type State = BeliefOf<P>;

    fn num_actions(&self) -> usize {
        self.prior.num_actions()
    }

    fn discount(&self) -> f64 {
        self.prior.discount()
    }

    fn reward_bounds(&self) -> (f64, f64) {
        self.prior.reward_bounds()
    }

    fn value_bounds(&self) -> (f64, f64) {
        self.prior.value_bounds()
    }

    fn is_terminal(&self, state: &Self::State) -> bool {
        self.prior.is_terminal(&state.real)
    }

    fn sample(&self, state: &Self::State, action: ActionId, rng: &mut dyn RngCore) -> Transition<Self::State> {
        let (next_state, reward) = self.belief_step(state, action, rng);
        Transition { next_state, reward }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{random_tabular_mdp, StateId, TabularMdp};
    use crate::priors::{FdmPrior, PointMassPrior};
    use crate::util::seeded_rng;

    fn deterministic_cycle() -> TabularMdp {
        // s -> s+1 mod 3 under action 0, stay under action 1.
        let rows = vec![
            vec![(1, 1.0)],
            vec![(0, 1.0)],
            vec![(2, 1.0)],
            vec![(1, 1.0)],
            vec![(0, 1.0)],
            vec![(2, 1.0)],
        ];
        TabularMdp::new(3, 2, rows, vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5], 0.9, &[], (0.0, 1.0)).unwrap()
    }

    #[test]
    fn point_mass_follows_the_true_model_and_accumulates() {
        let mdp = deterministic_cycle();
        let bmdp = BeliefMdp::new(PointMassPrior::new(mdp.clone()).with_cap(5));
        let mut rng = seeded_rng(0, 0);
        let mut b = bmdp.initial(0);
        for step in 0..6 {
            let s: StateId = b.real;
            let (next, r) = bmdp.belief_step(&b, 0, &mut rng);
            assert_eq!(next.real, (s + 1) % 3);
            assert_eq!(r, mdp.reward(s, 0));
            assert_eq!(next.stats.discoveries(), step + 1);
            b = next;
        }
    }

    #[test]
    fn next_stats_equal_the_update_rule() {
        let mdp = random_tabular_mdp(4, 2, 3, 2).unwrap();
        let prior = FdmPrior::for_mdp(&mdp, 1.0, 3, None).unwrap();
        let bmdp = BeliefMdp::new(prior.clone());
        let mut rng = seeded_rng(1, 0);
        let mut b = bmdp.initial(0);
        for i in 0..30 {
            let a = i % 2;
            let (next, r) = bmdp.belief_step(&b, a, &mut rng);
            assert_eq!(next.stats, prior.update(&b.stats, &b.real, a, &next.real, r));
            b = next;
        }
    }

    #[test]
    fn terminal_beliefs_self_loop() {
        let mdp = TabularMdp::new(2, 1, vec![vec![(1, 1.0)], vec![(1, 1.0)]], vec![1.0, 0.0], 0.9, &[1], (0.0, 1.0))
            .unwrap();
        let bmdp = BeliefMdp::new(FdmPrior::for_mdp(&mdp, 1.0, 5, None).unwrap());
        let b = bmdp.initial(1);
        assert!(bmdp.is_terminal(&b));
        let mut rng = seeded_rng(2, 0);
        assert_eq!(bmdp.belief_step(&b, 0, &mut rng), (b.clone(), 0.0));
        // Terminality depends only on the real state.
        let richer = BeliefState::new(1, b.stats.update(0, 0, 1, 1.0));
        assert!(bmdp.is_terminal(&richer));
        assert!(!bmdp.is_terminal(&BeliefState::new(0, richer.stats.clone())));
    }

    #[test]
    fn make_belief_mdp_checks_sizes() {
        let mdp = random_tabular_mdp(4, 2, 3, 2).unwrap();
        let prior = FdmPrior::for_mdp(&mdp, 1.0, 3, None).unwrap();
        let mut spec = DomainSpec::of(&mdp);
        assert!(make_belief_mdp(prior.clone(), &spec).is_ok());
        spec.num_states = 5;
        assert!(make_belief_mdp(prior.clone(), &spec).is_err());
        spec.num_states = 4;
        spec.num_actions = 3;
        assert!(make_belief_mdp(prior, &spec).is_err());
    }
}
