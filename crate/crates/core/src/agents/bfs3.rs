use std::hash::Hash;

use rand::RngCore;
use rustc_hash::FxHashMap;

use crate::belief::{BeliefMdp, BeliefOf, BeliefState};
use crate::fsss::{fsss_estimate, FsssParams};
use crate::mdp::{ActionId, GenerativeMdp};
use crate::priors::ModelPrior;
use crate::util::argmax;

use super::{Agent, Decision};

/// Action values of one lookahead decision.
#[derive(Debug, Clone, PartialEq)]
pub struct Lookahead {
    pub q: Vec<f64>,
    pub action: ActionId,
    pub queries: u64,
}

/// `q(a) = (1/C) sum_i [r_i + gamma * FSSS(s'_i)]` over `C` sampled
/// successors per action, each valued by its own fresh search.
pub fn lookahead_q<M>(mdp: &M, state: &M::State, params: FsssParams, rng: &mut dyn RngCore) -> Lookahead
where
    M: GenerativeMdp + ?Sized,
    M::State: Clone + Eq + Hash,
{
    let width = params.width as f64;
    let gamma = mdp.discount();
    let mut queries = 0;
    let mut q = vec![0.0; mdp.num_actions()];
    for (a, qa) in q.iter_mut().enumerate() {
        for _ in 0..params.width {
            let t = mdp.sample(state, a, rng);
            queries += 1;
            let estimate = fsss_estimate(mdp, t.next_state, params, rng);
            queries += estimate.tree.query_count();
            *qa += (t.reward + gamma * estimate.value) / width;
        }
    }
    let action = argmax(q.iter().copied()).unwrap_or(0);
    Lookahead { q, action, queries }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Bfs3Counters {
    pub oracle_queries: u64,
    pub decisions: u64,
    pub cache_hits: u64,
}

/// Bayesian forward search sparse sampling.
///
/// Plans with [`lookahead_q`] in the belief-MDP of `prior` and memoises the
/// chosen action per belief-state, so a belief seen again is answered
/// without any queries. The live statistic advances only on real
/// transitions.
pub struct Bfs3Agent<P: ModelPrior> {
    belief: BeliefMdp<P>,
    params: FsssParams,
    stats: P::Stats,
    episodic: bool,
    solved: FxHashMap<BeliefOf<P>, ActionId>,
    q_scratch: Vec<f64>,
    counters: Bfs3Counters,
    last: Decision,
    name: String,
}

impl<P: ModelPrior> Bfs3Agent<P> {
    pub fn new(prior: P, params: FsssParams) -> Self {
        let stats = prior.empty_stats();
        Self {
            belief: BeliefMdp::new(prior),
            params,
            stats,
            episodic: false,
            solved: FxHashMap::default(),
            q_scratch: Vec::new(),
            counters: Bfs3Counters::default(),
            last: Decision::default(),
            name: "bfs3".into(),
        }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Restart the live statistic from `initial_stats` at every episode
    /// (for domains where each episode is a fresh draw from the prior).
    /// The solved memo is kept: it is keyed by belief-state.
    pub fn episodic(mut self, episodic: bool) -> Self {
        self.episodic = episodic;
        self
    }

    pub fn params(&self) -> FsssParams {
        self.params
    }

    pub fn prior(&self) -> &P {
        self.belief.prior()
    }

    pub fn belief_mdp(&self) -> &BeliefMdp<P> {
        &self.belief
    }

    pub fn stats(&self) -> &P::Stats {
        &self.stats
    }

    pub fn counters(&self) -> Bfs3Counters {
        self.counters
    }

    pub fn solved_len(&self) -> usize {
        self.solved.len()
    }

    /// `q(a)` of the last fresh decision.
    pub fn last_q(&self) -> &[f64] {
        &self.q_scratch
    }

    /// `t * d * A^2 * C^2`.
    pub fn decision_budget(&self) -> u64 {
        let ac = (self.belief.num_actions() * self.params.width) as u64;
        (self.params.trajectories * self.params.depth) as u64 * ac * ac
    }

    /// Decision for an explicit belief-state.
    pub fn decide(&mut self, belief: &BeliefOf<P>, rng: &mut dyn RngCore) -> ActionId {
        self.counters.decisions += 1;
        if let Some(&a) = self.solved.get(belief) {
            self.counters.cache_hits += 1;
            self.last = Decision { queries: 0, cache_hit: true };
            return a;
        }
        let look = lookahead_q(&self.belief, belief, self.params, rng);
        self.counters.oracle_queries += look.queries;
        self.last = Decision { queries: look.queries, cache_hit: false };
        self.q_scratch = look.q;
        self.solved.insert(belief.clone(), look.action);
        look.action
    }
}

impl<P: ModelPrior> Agent<P::State> for Bfs3Agent<P> {
    fn name(&self) -> &str {
        &self.name
    }

    fn begin_episode(&mut self, state: &P::State) {
        if self.episodic {
            self.stats = self.belief.prior().initial_stats(state);
        }
    }

    fn act(&mut self, state: &P::State, rng: &mut dyn RngCore) -> ActionId {
        let belief = BeliefState::new(state.clone(), self.stats.clone());
        self.decide(&belief, rng)
    }

    fn observe(&mut self, state: &P::State, action: ActionId, next: &P::State, reward: f64) {
        self.stats = self.belief.prior().update(&self.stats, state, action, next, reward);
    }

    fn last_decision(&self) -> Decision {
        self.last
    }

    fn discoveries(&self) -> u64 {
        self.belief.prior().discoveries(&self.stats)
    }
}

/// The same lookahead run directly on a known model, memoised per state.
pub struct FsssAgent<M: GenerativeMdp> {
    mdp: M,
    params: FsssParams,
    solved: FxHashMap<M::State, ActionId>,
    last: Decision,
}

impl<M> FsssAgent<M>
where
    M: GenerativeMdp,
    M::State: Clone + Eq + Hash,
{
    pub fn new(mdp: M, params: FsssParams) -> Self {
        Self { mdp, params, solved: FxHashMap::default(), last: Decision::default() }
    }
}

impl<M> Agent<M::State> for FsssAgent<M>
where
    M: GenerativeMdp,
    M::State: Clone + Eq + Hash,
{
    fn name(&self) -> &str {
        "fsss"
    }

    fn act(&mut self, state: &M::State, rng: &mut dyn RngCore) -> ActionId {
        if let Some(&a) = self.solved.get(state) {
            self.last = Decision { queries: 0, cache_hit: true };
            return a;
        }
        let look = lookahead_q(&self.mdp, state, self.params, rng);
        self.last = Decision { queries: look.queries, cache_hit: false };
        self.solved.insert(state.clone(), look.action);
        look.action
    }

    fn observe(&mut self, _: &M::State, _: ActionId, _: &M::State, _: f64) {}

    fn last_decision(&self) -> Decision {
        self.last
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{random_tabular_mdp, value_iteration, TabularMdp};
    use crate::priors::{FdmPrior, PointMassPrior};
    use crate::util::seeded_rng;

    #[test]
    fn second_call_on_the_same_belief_is_free() {
        let mdp = random_tabular_mdp(4, 2, 7, 2).unwrap();
        let prior = FdmPrior::for_mdp(&mdp, 0.25, 5, None).unwrap();
        let mut agent = Bfs3Agent::new(prior, FsssParams::new(2, 5, 2).unwrap());
        let mut rng = seeded_rng(0, 0);
        let a = agent.act(&1, &mut rng);
        assert!(!agent.last_decision().cache_hit);
        assert!(agent.last_decision().queries > 0);
        let before = agent.counters().oracle_queries;
        assert_eq!(agent.act(&1, &mut rng), a);
        assert_eq!(agent.last_decision(), Decision { queries: 0, cache_hit: true });
        assert_eq!(agent.counters().oracle_queries, before);
    }

    #[test]
    fn fresh_decisions_stay_within_budget() {
        let mdp = random_tabular_mdp(5, 3, 2, 3).unwrap();
        let prior = FdmPrior::for_mdp(&mdp, 0.2, 3, None).unwrap();
        let mut agent = Bfs3Agent::new(prior, FsssParams::new(3, 4, 2).unwrap());
        let mut rng = seeded_rng(1, 0);
        let mut env_rng = seeded_rng(1, 1);
        let mut s = 0;
        for _ in 0..20 {
            let a = agent.act(&s, &mut rng);
            assert!(agent.last_decision().queries <= agent.decision_budget());
            let t = mdp.sample(&s, a, &mut env_rng);
            agent.observe(&s, a, &t.next_state, t.reward);
            s = t.next_state;
        }
    }

    #[test]
    fn point_mass_bfs3_matches_fsss_on_the_true_model() {
        let mdp = random_tabular_mdp(5, 2, 11, 3).unwrap();
        let params = FsssParams::new(3, 20, 2).unwrap();
        let mut bfs3 = Bfs3Agent::new(PointMassPrior::new(mdp.clone()), params);
        let mut fsss = FsssAgent::new(mdp.clone(), params);
        for s in 0..5 {
            let a = bfs3.act(&s, &mut seeded_rng(5, s as u64));
            let b = fsss.act(&s, &mut seeded_rng(5, s as u64));
            assert_eq!(a, b);
            assert_eq!(bfs3.last_q().len(), 2);
        }
    }

    #[test]
    fn deterministic_corridor_heads_for_the_goal() {
        // 0 - 1 - 2(goal); action 0 left, action 1 right.
        let rows = vec![
            vec![(0, 1.0)],
            vec![(1, 1.0)],
            vec![(0, 1.0)],
            vec![(2, 1.0)],
            vec![(2, 1.0)],
            vec![(2, 1.0)],
        ];
        let rewards = vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0];
        let mdp = TabularMdp::new(3, 2, rows, rewards, 0.9, &[2], (0.0, 1.0)).unwrap();
        let vi = value_iteration(&mdp, 1e-9).unwrap();
        assert!(vi.v(0) > 0.0);
        let mut agent = Bfs3Agent::new(PointMassPrior::new(mdp), FsssParams::new(3, 50, 1).unwrap());
        let mut rng = seeded_rng(2, 0);
        assert_eq!(agent.act(&0, &mut rng), 1);
        assert_eq!(agent.act(&1, &mut rng), 1);
    }
}
