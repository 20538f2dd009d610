//! Forward search sparse sampling.
//!
//! A [`SearchTree`] holds one node per `(state, depth)`. Each rollout walks
//! from the root to the depth limit: unvisited nodes are expanded by drawing
//! `C` successors per action, the action with the highest upper bound is
//! followed, and among its successors the one with the largest
//! `(U - L) * count` is descended into. Bounds are backed up on the way out.
//! Nodes at the depth limit are leaves worth exactly zero, the same leaf value
//! exhaustive sparse sampling uses, so a fully searched tree reproduces the
//! sparse-sampling value bit for bit.

use std::collections::hash_map::Entry;
use std::fmt::{Debug, Write as _};
use std::hash::Hash;

use rand::RngCore;
use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::mdp::{ActionId, GenerativeMdp};
use crate::util::argmax;

/// Largest tree [`sparse_sampling_exact`] agrees to enumerate.
pub const SPARSE_SAMPLING_NODE_LIMIT: u128 = 1_000_000;

/// Root gap under which a search is considered converged.
pub const CONVERGENCE_GAP: f64 = 1e-9;

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FsssParams {
    /// Maximum depth `d`.
    pub depth: usize,
    /// Rollout budget `t`.
    pub trajectories: usize,
    /// Successor samples per action, `C`.
    pub width: usize,
}

impl FsssParams {
    pub fn new(depth: usize, trajectories: usize, width: usize) -> Result<Self> {
        let params = Self { depth, trajectories, width };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 || self.trajectories == 0 || self.width == 0 {
            return Err(Error::InvalidParameter(format!(
                "depth, trajectories and width must all be >= 1 (got d={}, t={}, C={})",
                self.depth, self.trajectories, self.width
            )));
        }
        Ok(())
    }

    /// `t * d * A * C`, the most oracle queries one estimate may issue.
    pub fn query_budget(&self, num_actions: usize) -> u64 {
        (self.trajectories * self.depth * num_actions * self.width) as u64
    }
}

/// Which root bound picks the recommended action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ActionRule {
    #[default]
    LowerBound,
    UpperBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FsssOptions {
    /// Stop once the root gap falls below [`CONVERGENCE_GAP`].
    pub early_stop: bool,
    pub action_rule: ActionRule,
}

impl Default for FsssOptions {
    fn default() -> Self {
        Self { early_stop: true, action_rule: ActionRule::LowerBound }
    }
}

/// Per-action statistics of an expanded node.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionNode {
    /// `R_d(s, a)`, the mean of the `C` sampled rewards.
    pub mean_reward: f64,
    /// `Children_d(s, a)` with `Count_d(s, a, s')`, in insertion order.
    pub children: Vec<(NodeId, u32)>,
    pub upper: f64,
    pub lower: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchNode<K> {
    pub state: K,
    pub depth: usize,
    pub visited: bool,
    pub actions: Vec<ActionNode>,
    pub upper: f64,
    pub lower: f64,
}

impl<K> SearchNode<K> {
    pub fn is_closed(&self) -> bool {
        self.upper - self.lower < CONVERGENCE_GAP
    }
}

/// Bookkeeping for one search; nodes are shared by `(state, depth)`.
#[derive(Debug, Clone)]
pub struct SearchTree<K> {
    nodes: Vec<SearchNode<K>>,
    index: FxHashMap<(K, usize), NodeId>,
    max_depth: usize,
    width: usize,
    num_actions: usize,
    gamma: f64,
    v_min: f64,
    v_max: f64,
    queries: u64,
    rollouts: usize,
}

impl<K: Clone + Eq + Hash> SearchTree<K> {
    pub fn new<M>(mdp: &M, root: K, depth: usize, width: usize) -> Self
    where
        M: GenerativeMdp<State = K> + ?Sized,
    {
        let (v_min, v_max) = mdp.value_bounds();
        let mut tree = Self {
            nodes: Vec::new(),
            index: FxHashMap::default(),
            max_depth: depth,
            width,
            num_actions: mdp.num_actions(),
            gamma: mdp.discount(),
            v_min,
            v_max,
            queries: 0,
            rollouts: 0,
        };
        tree.node_for(root, 0);
        tree
    }

    pub fn root(&self) -> &SearchNode<K> {
        &self.nodes[0]
    }

    pub fn node(&self, id: NodeId) -> &SearchNode<K> {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[SearchNode<K>] {
        &self.nodes
    }

    pub fn find(&self, state: &K, depth: usize) -> Option<NodeId>
    where
        K: Clone,
    {
        self.index.get(&(state.clone(), depth)).copied()
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Oracle queries issued so far; one per `GenerativeMdp::sample` call.
    pub fn query_count(&self) -> u64 {
        self.queries
    }

    pub fn rollouts(&self) -> usize {
        self.rollouts
    }

    /// `max_a U(root, a)`; zero for a terminal or unexpanded leaf root.
    pub fn root_value(&self) -> f64 {
        self.root().upper
    }

    fn node_for(&mut self, state: K, depth: usize) -> NodeId {
        match self.index.entry((state, depth)) {
            Entry::Occupied(e) => *e.get(),
            Entry::Vacant(e) => {
                let id = self.nodes.len();
                let (upper, lower) = if depth == self.max_depth { (0.0, 0.0) } else { (self.v_max, self.v_min) };
                self.nodes.push(SearchNode {
                    state: e.key().0.clone(),
                    depth,
                    visited: false,
                    actions: Vec::new(),
                    upper,
                    lower,
                });
                e.insert(id);
                id
            }
        }
    }

    /// One rollout from the root.
    pub fn rollout<M>(&mut self, mdp: &M, rng: &mut dyn RngCore)
    where
        M: GenerativeMdp<State = K> + ?Sized,
    {
        self.rollouts += 1;
        self.rollout_from(mdp, 0, rng);
    }

    /// Rollout starting at an existing node, following the node's own depth.
    pub fn rollout_from<M>(&mut self, mdp: &M, id: NodeId, rng: &mut dyn RngCore)
    where
        M: GenerativeMdp<State = K> + ?Sized,
    {
        if mdp.is_terminal(&self.nodes[id].state) {
            let node = &mut self.nodes[id];
            node.upper = 0.0;
            node.lower = 0.0;
            return;
        }
        if self.nodes[id].depth == self.max_depth {
            return;
        }
        if !self.nodes[id].visited {
            self.expand(mdp, id, rng);
            self.backup(id);
        }
        let action = self.select_action(id);
        let child = self.select_child(id, action);
        self.rollout_from(mdp, child, rng);
        self.backup(id);
    }

    fn expand<M>(&mut self, mdp: &M, id: NodeId, rng: &mut dyn RngCore)
    where
        M: GenerativeMdp<State = K> + ?Sized,
    {
        let state = self.nodes[id].state.clone();
        let depth = self.nodes[id].depth;
        let width = self.width as f64;
        let mut actions = Vec::with_capacity(self.num_actions);
        for a in 0..self.num_actions {
            let mut action = ActionNode {
                mean_reward: 0.0,
                children: Vec::with_capacity(self.width),
                upper: self.v_max,
                lower: self.v_min,
            };
            for _ in 0..self.width {
                let t = mdp.sample(&state, a, rng);
                self.queries += 1;
                let child = self.node_for(t.next_state, depth + 1);
                match action.children.iter_mut().find(|(c, _)| *c == child) {
                    Some((_, count)) => *count += 1,
                    None => action.children.push((child, 1)),
                }
                action.mean_reward += t.reward / width;
            }
            actions.push(action);
        }
        let node = &mut self.nodes[id];
        node.visited = true;
        node.actions = actions;
    }

    /// Count-weighted Bellman backup of an expanded node's bounds.
    pub fn backup(&mut self, id: NodeId) {
        let node = &self.nodes[id];
        if !node.visited {
            return;
        }
        let mut bounds = Vec::with_capacity(node.actions.len());
        for action in &node.actions {
            let upper = backed_up_value(
                action.mean_reward,
                self.gamma,
                self.width,
                action.children.iter().map(|&(c, n)| (n, self.nodes[c].upper)),
            );
            let lower = backed_up_value(
                action.mean_reward,
                self.gamma,
                self.width,
                action.children.iter().map(|&(c, n)| (n, self.nodes[c].lower)),
            );
            bounds.push((upper, lower));
        }
        let node = &mut self.nodes[id];
        let mut upper = f64::NEG_INFINITY;
        let mut lower = f64::NEG_INFINITY;
        // Clamping is a no-op when the value bounds are sound; it keeps a
        // capped V_max from being exceeded by an improbable sampled model.
        let (v_min, v_max) = (self.v_min, self.v_max);
        for (action, (u, l)) in node.actions.iter_mut().zip(bounds) {
            let u = u.min(v_max);
            action.upper = u;
            action.lower = l.max(v_min).min(u);
            upper = upper.max(u);
            lower = lower.max(l);
        }
        node.upper = upper;
        node.lower = lower;
    }

    fn select_action(&self, id: NodeId) -> ActionId {
        argmax(self.nodes[id].actions.iter().map(|a| a.upper)).unwrap_or(0)
    }

    fn select_child(&self, id: NodeId, action: ActionId) -> NodeId {
        let children = &self.nodes[id].actions[action].children;
        let scores = children.iter().map(|&(c, n)| {
            let child = &self.nodes[c];
            (child.upper - child.lower) * n as f64
        });
        children[argmax(scores).unwrap_or(0)].0
    }

    /// Recommended root action under `rule`; ties go to the lowest index.
    pub fn best_action(&self, rule: ActionRule) -> Result<ActionId> {
        let root = self.root();
        if !root.visited {
            return Err(Error::RootNotExpanded);
        }
        let scores = root.actions.iter().map(|a| match rule {
            ActionRule::LowerBound => a.lower,
            ActionRule::UpperBound => a.upper,
        });
        Ok(argmax(scores).unwrap_or(0))
    }

    /// One line per node, `depth state U L visited`, in creation order.
    pub fn dump(&self) -> String
    where
        K: Debug,
    {
        let mut out = String::new();
        for node in &self.nodes {
            let _ = writeln!(
                out,
                "{} {:?} {} {} {}",
                node.depth, node.state, node.upper, node.lower, node.visited as u8
            );
        }
        out
    }
}

/// `R + gamma * sum (count / C) * value`; the one formula shared by the
/// FSSS backup and sparse sampling so both round identically.
fn backed_up_value<I>(mean_reward: f64, gamma: f64, width: usize, children: I) -> f64
where
    I: IntoIterator<Item = (u32, f64)>,
{
    let width = width as f64;
    let mut expected = 0.0;
    for (count, value) in children {
        expected += (count as f64 / width) * value;
    }
    mean_reward + gamma * expected
}

/// Result of an FSSS value estimate.
#[derive(Debug, Clone)]
pub struct FsssEstimate<K> {
    pub value: f64,
    pub tree: SearchTree<K>,
}

/// Estimates the value of `root` with up to `params.trajectories` rollouts,
/// stopping early once the root bounds meet.
pub fn fsss_estimate<M>(mdp: &M, root: M::State, params: FsssParams, rng: &mut dyn RngCore) -> FsssEstimate<M::State>
where
    M: GenerativeMdp + ?Sized,
{
    fsss_estimate_with(mdp, root, params, FsssOptions::default(), rng)
}

pub fn fsss_estimate_with<M>(
    mdp: &M,
    root: M::State,
    params: FsssParams,
    options: FsssOptions,
    rng: &mut dyn RngCore,
) -> FsssEstimate<M::State>
where
    M: GenerativeMdp + ?Sized,
{
    let mut tree = SearchTree::new(mdp, root, params.depth, params.width);
    if mdp.is_terminal(&tree.root().state) {
        tree.rollout(mdp, rng);
        return FsssEstimate { value: 0.0, tree };
    }
    for _ in 0..params.trajectories {
        tree.rollout(mdp, rng);
        if options.early_stop && tree.root().is_closed() {
            break;
        }
    }
    FsssEstimate { value: tree.root_value(), tree }
}

/// Value and action of exhaustive sparse sampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparseSamplingResult {
    pub value: f64,
    /// `None` at a terminal root or when `d = 0`.
    pub best_action: Option<ActionId>,
}

fn check_node_limit(num_actions: usize, width: usize, depth: usize) -> Result<()> {
    let branching = (num_actions as u128) * (width as u128);
    let mut total: u128 = 1;
    for _ in 0..depth {
        total = total.saturating_mul(branching);
        if total > SPARSE_SAMPLING_NODE_LIMIT {
            return Err(Error::TreeTooLarge(total));
        }
    }
    Ok(())
}

/// Full sparse-sampling tree of depth `d` with `C` samples per action.
/// Leaves are worth zero; every sample gets its own subtree.
pub fn sparse_sampling_exact<M>(
    mdp: &M,
    root: &M::State,
    depth: usize,
    width: usize,
    rng: &mut dyn RngCore,
) -> Result<SparseSamplingResult>
where
    M: GenerativeMdp + ?Sized,
{
    if width == 0 {
        return Err(Error::InvalidParameter("width must be >= 1".into()));
    }
    check_node_limit(mdp.num_actions(), width, depth)?;
    Ok(sparse_sampling_fresh(mdp, root, depth, width, rng))
}

fn sparse_sampling_fresh<M>(
    mdp: &M,
    state: &M::State,
    depth_left: usize,
    width: usize,
    rng: &mut dyn RngCore,
) -> SparseSamplingResult
where
    M: GenerativeMdp + ?Sized,
{
    if depth_left == 0 || mdp.is_terminal(state) {
        return SparseSamplingResult { value: 0.0, best_action: None };
    }
    let w = width as f64;
    let mut q = Vec::with_capacity(mdp.num_actions());
    for a in 0..mdp.num_actions() {
        let mut mean_reward = 0.0;
        let mut children = Vec::with_capacity(width);
        for _ in 0..width {
            let t = mdp.sample(state, a, rng);
            mean_reward += t.reward / w;
            children.push((1, sparse_sampling_fresh(mdp, &t.next_state, depth_left - 1, width, rng).value));
        }
        q.push(backed_up_value(mean_reward, mdp.discount(), width, children));
    }
    best_of(&q)
}

fn best_of(q: &[f64]) -> SparseSamplingResult {
    let best = argmax(q.iter().copied());
    SparseSamplingResult {
        value: best.map(|a| q[a]).unwrap_or(0.0),
        best_action: best,
    }
}

/// Sparse sampling over the successors an FSSS tree already drew.
///
/// Expanded nodes reuse the tree's recorded children, counts and mean
/// rewards; nodes the search never expanded get fresh exhaustive subtrees
/// from `mdp`. When the tree has converged the root value equals the tree's
/// `U = L` exactly.
pub fn sparse_sampling_shared<M>(
    mdp: &M,
    tree: &SearchTree<M::State>,
    rng: &mut dyn RngCore,
) -> Result<SparseSamplingResult>
where
    M: GenerativeMdp + ?Sized,
{
    check_node_limit(tree.num_actions, tree.width, tree.max_depth)?;
    let mut memo: Vec<Option<f64>> = vec![None; tree.nodes.len()];
    let root = &tree.nodes[0];
    if mdp.is_terminal(&root.state) || root.depth == tree.max_depth {
        return Ok(SparseSamplingResult { value: 0.0, best_action: None });
    }
    if !root.visited {
        return sparse_sampling_exact(mdp, &root.state, tree.max_depth, tree.width, rng);
    }
    let q = shared_action_values(mdp, tree, 0, &mut memo, rng);
    Ok(best_of(&q))
}

fn shared_action_values<M>(
    mdp: &M,
    tree: &SearchTree<M::State>,
    id: NodeId,
    memo: &mut Vec<Option<f64>>,
    rng: &mut dyn RngCore,
) -> Vec<f64>
where
    M: GenerativeMdp + ?Sized,
{
    let node = &tree.nodes[id];
    node.actions
        .iter()
        .map(|action| {
            let children: Vec<(u32, f64)> = action
                .children
                .iter()
                .map(|&(c, n)| (n, shared_value(mdp, tree, c, memo, rng)))
                .collect();
            backed_up_value(action.mean_reward, tree.gamma, tree.width, children)
        })
        .collect()
}

fn shared_value<M>(
    mdp: &M,
    tree: &SearchTree<M::State>,
    id: NodeId,
    memo: &mut Vec<Option<f64>>,
    rng: &mut dyn RngCore,
) -> f64
where
    M: GenerativeMdp + ?Sized,
{
    if let Some(v) = memo[id] {
        return v;
    }
    let node = &tree.nodes[id];
    let value = if mdp.is_terminal(&node.state) || node.depth == tree.max_depth {
        0.0
    } else if node.visited {
        best_of(&shared_action_values(mdp, tree, id, memo, rng)).value
    } else {
        sparse_sampling_fresh(mdp, &node.state, tree.max_depth - node.depth, tree.width, rng).value
    };
    memo[id] = Some(value);
    value
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{random_tabular_mdp, TabularMdp};
    use crate::util::seeded_rng;

    /// Two-armed bandit: state 0 pulls an arm, every outcome is terminal.
    fn bandit(rewards: &[f64]) -> TabularMdp {
        let a = rewards.len();
        let mut rows = vec![vec![(1, 1.0)]; a];
        rows.extend(vec![vec![(1, 1.0)]; a]);
        let mut r = rewards.to_vec();
        r.extend(vec![0.0; a]);
        TabularMdp::new(2, a, rows, r, 0.9, &[1], (0.0, 1.0)).unwrap()
    }

    #[test]
    fn terminal_root_is_worth_zero_without_queries() {
        let mdp = bandit(&[0.1, 0.9]);
        let mut rng = seeded_rng(1, 0);
        let est = fsss_estimate(&mdp, 1, FsssParams::new(3, 10, 2).unwrap(), &mut rng);
        assert_eq!(est.value, 0.0);
        assert_eq!(est.tree.query_count(), 0);
    }

    #[test]
    fn depth_one_bandit_value_is_best_reward() {
        let mdp = bandit(&[0.1, 0.9]);
        let mut rng = seeded_rng(2, 0);
        let opts = FsssOptions { early_stop: false, ..Default::default() };
        let est = fsss_estimate_with(&mdp, 0, FsssParams::new(1, 2, 2).unwrap(), opts, &mut rng);
        assert_eq!(est.value, 0.9);
        assert_eq!(est.tree.root().upper, est.tree.root().lower);
        assert_eq!(est.tree.best_action(ActionRule::LowerBound).unwrap(), 1);
        assert_eq!(est.tree.best_action(ActionRule::UpperBound).unwrap(), 1);
    }

    #[test]
    fn first_rollout_issues_a_times_c_queries_at_the_root() {
        let mdp = random_tabular_mdp(5, 3, 4, 2).unwrap();
        let mut rng = seeded_rng(3, 0);
        let mut tree = SearchTree::new(&mdp, 0, 1, 4);
        tree.rollout(&mdp, &mut rng);
        assert_eq!(tree.query_count(), 12);
    }

    #[test]
    fn backup_direct_evaluation() {
        // Root with one action: reward 1, two children with U = 2 and U = 4.
        let mdp = random_tabular_mdp(3, 1, 0, 3).unwrap();
        let mut tree = SearchTree::new(&mdp, 0, 3, 2);
        let c1 = tree.node_for(1, 1);
        let c2 = tree.node_for(2, 1);
        tree.nodes[c1].upper = 2.0;
        tree.nodes[c1].lower = 2.0;
        tree.nodes[c2].upper = 4.0;
        tree.nodes[c2].lower = 0.0;
        tree.nodes[0].visited = true;
        tree.nodes[0].actions = vec![ActionNode { mean_reward: 1.0, children: vec![(c1, 1), (c2, 1)], upper: 0.0, lower: 0.0 }];
        tree.backup(0);
        assert!((tree.root().upper - 3.7).abs() < 1e-12);
        assert!((tree.root().lower - 1.9).abs() < 1e-12);
        let before = tree.root().clone();
        tree.backup(0);
        assert_eq!(tree.root(), &before);
    }

    #[test]
    fn backup_with_terminal_children_is_the_mean_reward() {
        let mdp = bandit(&[0.3, 0.6]);
        let mut rng = seeded_rng(5, 0);
        let mut tree = SearchTree::new(&mdp, 0, 4, 2);
        tree.rollout(&mdp, &mut rng);
        tree.rollout(&mdp, &mut rng);
        tree.rollout(&mdp, &mut rng);
        let root = tree.root();
        assert_eq!(root.actions[0].upper, 0.3);
        assert_eq!(root.actions[0].lower, 0.3);
        assert_eq!(root.actions[1].upper, 0.6);
    }

    #[test]
    fn rollout_on_a_closed_tree_changes_nothing() {
        let mdp = random_tabular_mdp(4, 2, 8, 2).unwrap();
        let mut rng = seeded_rng(6, 0);
        let opts = FsssOptions::default();
        let est = fsss_estimate_with(&mdp, 0, FsssParams::new(2, 1000, 2).unwrap(), opts, &mut rng);
        assert!(est.tree.root().is_closed());
        let mut tree = est.tree;
        let before: Vec<(f64, f64)> = tree.nodes().iter().map(|n| (n.upper, n.lower)).collect();
        let queries = tree.query_count();
        tree.rollout(&mdp, &mut rng);
        let after: Vec<(f64, f64)> = tree.nodes().iter().map(|n| (n.upper, n.lower)).collect();
        assert_eq!(before, after);
        assert_eq!(tree.query_count(), queries);
    }

    #[test]
    fn best_action_requires_an_expanded_root() {
        let mdp = random_tabular_mdp(2, 2, 1, 1).unwrap();
        let tree = SearchTree::new(&mdp, 0, 2, 1);
        assert!(matches!(tree.best_action(ActionRule::LowerBound), Err(Error::RootNotExpanded)));
    }

    #[test]
    fn single_action_recommends_action_zero() {
        let mdp = random_tabular_mdp(3, 1, 2, 2).unwrap();
        let mut rng = seeded_rng(7, 0);
        let est = fsss_estimate(&mdp, 0, FsssParams::new(2, 4, 2).unwrap(), &mut rng);
        assert_eq!(est.tree.best_action(ActionRule::LowerBound).unwrap(), 0);
    }

    #[test]
    fn sparse_sampling_depth_zero_is_a_leaf() {
        let mdp = random_tabular_mdp(3, 2, 2, 2).unwrap();
        let mut rng = seeded_rng(8, 0);
        let r = sparse_sampling_exact(&mdp, &0, 0, 3, &mut rng).unwrap();
        assert_eq!(r, SparseSamplingResult { value: 0.0, best_action: None });
    }

    #[test]
    fn sparse_sampling_rejects_huge_trees() {
        let mdp = random_tabular_mdp(3, 4, 2, 2).unwrap();
        let mut rng = seeded_rng(8, 0);
        assert!(matches!(sparse_sampling_exact(&mdp, &0, 10, 4, &mut rng), Err(Error::TreeTooLarge(_))));
    }

    #[test]
    fn dump_lists_every_node() {
        let mdp = bandit(&[0.2, 0.4]);
        let mut rng = seeded_rng(9, 0);
        let est = fsss_estimate(&mdp, 0, FsssParams::new(2, 5, 1).unwrap(), &mut rng);
        let dump = est.tree.dump();
        assert_eq!(dump.lines().count(), est.tree.nodes().len());
        assert!(dump.starts_with("0 0 0.4 0.4 1\n"));
    }

    #[test]
    fn params_validate() {
        assert!(FsssParams::new(0, 1, 1).is_err());
        assert!(FsssParams::new(1, 0, 1).is_err());
        assert!(FsssParams::new(1, 1, 0).is_err());
        assert_eq!(FsssParams::new(3, 10, 2).unwrap().query_budget(4), 240);
    }
}
