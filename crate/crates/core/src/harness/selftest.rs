//! Oracle-equivalence and invariant checks behind `bfs3 selftest`.

use std::time::Instant;

use crate::agents::{Agent, Bfs3Agent};
use crate::error::Result;
use crate::fsss::{fsss_estimate_with, sparse_sampling_shared, ActionRule, FsssOptions, FsssParams, SearchTree};
use crate::mdp::{greedy_policy, random_tabular_mdp, value_iteration, GenerativeMdp, TabularMdp};
use crate::priors::{FdmPrior, ModelPrior, PointMassPrior, SuffStats};
use crate::util::{seeded_rng, uniform_index};

use super::{run_experiment, strip_wall_ms, to_csv_string, ExperimentConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default)]
pub struct SelftestReport {
    pub checks: Vec<Check>,
}

impl SelftestReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// One `PASS`/`FAIL` line per check.
    pub fn lines(&self) -> Vec<String> {
        self.checks
            .iter()
            .map(|c| {
                let verdict = if c.passed { "PASS" } else { "FAIL" };
                format!("{verdict} {} ({:.2}s): {}", c.name, c.seconds, c.detail)
            })
            .collect()
    }
}

/// Small random MDP number `i` of a family: `S <= max_states`, `A <= 3`.
fn family_mdp(i: u64, max_states: usize) -> Result<TabularMdp> {
    let s = 2 + (i as usize) % (max_states - 1);
    let a = 1 + (i as usize / 2) % 3;
    random_tabular_mdp(s, a, 1000 + i, s.min(3))
}

fn no_early_stop() -> FsssOptions {
    FsssOptions { early_stop: false, ..FsssOptions::default() }
}

/// Converged FSSS equals sparse sampling on the same sampled tree.
pub fn fsss_matches_sparse_sampling(instances: u64, queries_over_budget: &mut u64) -> Result<(bool, String)> {
    let mut agree = 0;
    for i in 0..instances {
        let mdp = family_mdp(i, 6)?;
        let ac = mdp.num_actions() * 2;
        let params = FsssParams::new(3, ac.pow(3), 2)?;
        let mut rng = seeded_rng(i, 7);
        let est = fsss_estimate_with(&mdp, 0, params, no_early_stop(), &mut rng);
        if est.tree.query_count() > params.query_budget(mdp.num_actions()) {
            *queries_over_budget += 1;
        }
        let root = est.tree.root();
        let ss = sparse_sampling_shared(&mdp, &est.tree, &mut rng)?;
        let action = est.tree.best_action(ActionRule::LowerBound)?;
        if root.upper == root.lower && ss.value == root.upper && ss.best_action == Some(action) {
            agree += 1;
        }
    }
    Ok((agree == instances, format!("{agree}/{instances} instances converged and agreed")))
}

fn snapshot<K: Clone + Eq + std::hash::Hash>(tree: &SearchTree<K>) -> Vec<(f64, f64)> {
    tree.nodes().iter().map(|n| (n.upper, n.lower)).collect()
}

/// `L <= U` everywhere, `U` never rises and `L` never falls between rollouts.
pub fn bound_invariants(instances: u64, rollouts: usize, queries_over_budget: &mut u64) -> Result<(bool, String)> {
    let mut violations = 0u64;
    let mut checked = 0u64;
    for i in 0..instances {
        let mdp = family_mdp(i + 500, 6)?;
        let params = FsssParams::new(3, rollouts, 2)?;
        let mut rng = seeded_rng(i, 11);
        let mut tree = SearchTree::new(&mdp, 0, params.depth, params.width);
        let mut before = snapshot(&tree);
        for _ in 0..rollouts {
            tree.rollout(&mdp, &mut rng);
            let after = snapshot(&tree);
            for (id, node) in tree.nodes().iter().enumerate() {
                checked += 1;
                if node.lower > node.upper || node.actions.iter().any(|a| a.lower > a.upper) {
                    violations += 1;
                }
                if let Some(&(u0, l0)) = before.get(id) {
                    if after[id].0 > u0 || after[id].1 < l0 {
                        violations += 1;
                    }
                }
            }
            before = after;
        }
        if tree.query_count() > params.query_budget(mdp.num_actions()) {
            *queries_over_budget += 1;
        }
    }
    Ok((violations == 0, format!("{violations} violations in {checked} node checks")))
}

/// Fresh BFS3 decisions stay within `t d A^2 C^2` queries.
pub fn bfs3_decision_budget(runs: u64, queries_over_budget: &mut u64) -> Result<(bool, String)> {
    let mut decisions = 0;
    let mut over = 0;
    for i in 0..runs {
        let mdp = family_mdp(i + 900, 6)?;
        let prior = FdmPrior::for_mdp(&mdp, 1.0 / mdp.num_states() as f64, 3, None)?;
        let mut agent = Bfs3Agent::new(prior, FsssParams::new(3, 2 + i as usize % 4, 2)?);
        let mut rng = seeded_rng(i, 13);
        let mut env_rng = seeded_rng(i, 14);
        let mut s = 0;
        for _ in 0..15 {
            let a = agent.act(&s, &mut rng);
            let d = agent.last_decision();
            if !d.cache_hit {
                decisions += 1;
                if d.queries > agent.decision_budget() {
                    over += 1;
                }
            }
            let t = mdp.sample(&s, a, &mut env_rng);
            agent.observe(&s, a, &t.next_state, t.reward);
            s = t.next_state;
        }
    }
    *queries_over_budget += over;
    Ok((over == 0, format!("{over} of {decisions} fresh decisions over budget")))
}

/// Empirical FDM predictive frequencies against the closed form.
pub fn fdm_predictive(statistics: u64, draws: usize) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    let mut worst_mean: f64 = 0.0;
    for i in 0..statistics {
        let mdp = family_mdp(i + 300, 6)?;
        let n = mdp.num_states();
        let prior = FdmPrior::for_mdp(&mdp, 0.5, 10, None)?;
        let mut rng = seeded_rng(i, 17);
        let mut stats = prior.empty_stats();
        for _ in 0..(i as usize * 3) {
            stats = stats.update(0, 0, uniform_index(&mut rng, n), mdp.reward(0, 0));
        }
        let mut freq = vec![0.0; n];
        for _ in 0..draws {
            freq[prior.predictive_sample(&0, 0, &stats, &mut rng).next_state] += 1.0 / draws as f64;
        }
        let tv: f64 = (0..n).map(|s| (freq[s] - prior.predictive_prob(0, 0, s, &stats)).abs()).sum::<f64>() / 2.0;
        worst = worst.max(tv);
        let mut means = vec![0.0; n];
        for _ in 0..draws / 10 {
            let model = prior.sample_mdp(&stats, &mut rng);
            for (m, p) in means.iter_mut().zip(model.dense_row(0, 0)) {
                *m += p / (draws / 10) as f64;
            }
        }
        let gap = (0..n).map(|s| (means[s] - prior.predictive_prob(0, 0, s, &stats)).abs()).fold(0.0, f64::max);
        worst_mean = worst_mean.max(gap);
    }
    let ok = worst <= 0.01 && worst_mean <= 0.01;
    Ok((ok, format!("worst total variation {worst:.4}, worst sampled-row mean error {worst_mean:.4}")))
}

/// Driving every pair to saturation yields exactly `N S A` discoveries.
pub fn discovery_bound(cap: u32, num_states: usize, num_actions: usize) -> (bool, String) {
    let mut stats = SuffStats::new(num_states, num_actions, cap);
    for round in 0..cap as usize + 2 {
        for s in 0..num_states {
            for a in 0..num_actions {
                stats = stats.update(s, a, (s + a + round) % num_states, 0.0);
            }
        }
    }
    let expected = cap as u64 * (num_states * num_actions) as u64;
    let frozen = stats.update(0, 0, 0, 0.0) == stats;
    let ok = stats.discoveries() == expected && frozen;
    (ok, format!("{} discoveries (expected {expected}), saturated update is a no-op: {frozen}", stats.discoveries()))
}

/// BFS3 with a point-mass prior picks the optimal action.
pub fn point_mass_reduction(instances: u64, params: FsssParams) -> Result<(bool, String)> {
    let mut agree = 0;
    let mut total = 0;
    for i in 0..instances {
        let mdp = family_mdp(i + 700, 8)?;
        let optimal = greedy_policy(&mdp, &value_iteration(&mdp, 1e-10)?);
        let mut agent = Bfs3Agent::new(PointMassPrior::new(mdp.clone()), params);
        let mut rng = seeded_rng(i, 19);
        for (s, &best) in optimal.iter().enumerate() {
            total += 1;
            if agent.act(&s, &mut rng) == best {
                agree += 1;
            }
        }
        debug_assert_eq!(agent.prior().num_states(), Some(mdp.num_states()));
    }
    let rate = agree as f64 / total as f64;
    Ok((rate >= 0.9, format!("{agree}/{total} decisions optimal ({:.1}%)", rate * 100.0)))
}

/// Same config, same bytes (timings aside).
pub fn reproducibility(config: &ExperimentConfig) -> Result<(bool, String)> {
    let a = strip_wall_ms(&to_csv_string(&run_experiment(config)?));
    let b = strip_wall_ms(&to_csv_string(&run_experiment(config)?));
    Ok((a == b, format!("{} bytes compared", a.len())))
}

fn timed(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> Check {
    let started = Instant::now();
    let (passed, detail) = match f() {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    Check { name, passed, detail, seconds: started.elapsed().as_secs_f64() }
}

/// The full suite. Slow sweeps are not part of it.
pub fn run_selftest() -> SelftestReport {
    let mut over = 0;
    let mut checks = vec![
        timed("fsss-sparse-sampling-agreement", || fsss_matches_sparse_sampling(50, &mut over)),
        timed("bound-invariants", || bound_invariants(100, 50, &mut over)),
        timed("bfs3-decision-budget", || bfs3_decision_budget(10, &mut over)),
    ];
    checks.push(Check {
        name: "query-budgets",
        passed: over == 0,
        detail: format!("{over} searches or decisions over their query bound"),
        seconds: 0.0,
    });
    checks.push(timed("fdm-predictive", || fdm_predictive(20, 100_000)));
    checks.push(timed("discovery-bound", || Ok(discovery_bound(3, 5, 4))));
    checks.push(timed("point-mass-reduction", || point_mass_reduction(200, FsssParams::new(4, 200, 3)?)));
    checks.push(timed("reproducibility", || {
        reproducibility(&ExperimentConfig {
            domain: "grid5".into(),
            agent: "bfs3-fdm-dp".into(),
            depth: 3,
            trajectories: 5,
            width: 2,
            runs: 3,
            episodes: 2,
            steps: 30,
            seed: 42,
            ..Default::default()
        })
    }));
    SelftestReport { checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suite_passes() {
        let mut over = 0;
        assert!(fsss_matches_sparse_sampling(5, &mut over).unwrap().0);
        assert!(bound_invariants(5, 20, &mut over).unwrap().0);
        assert!(bfs3_decision_budget(2, &mut over).unwrap().0);
        assert_eq!(over, 0);
        assert!(discovery_bound(2, 3, 2).0);
    }
}
