//! MDP abstractions, an explicit tabular MDP, and exact solvers.

use std::fmt::{self, Debug, Write as _};
use std::hash::Hash;
use std::str::FromStr;

use rand::RngCore;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::util::{argmax, seeded_rng, uniform01};

pub type StateId = usize;
pub type ActionId = usize;

const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// One draw from a generative model.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<S> {
    pub next_state: S,
    pub reward: f64,
}

/// The oracle interface every planner queries.
///
/// Implementations must be deterministic given the random stream: two calls
/// with identically seeded streams return identical samples.
pub trait GenerativeMdp {
    type State: Clone + Eq + Hash + Debug;

    fn num_actions(&self) -> usize;

    fn discount(&self) -> f64;

    /// Smallest and largest one-step reward.
    fn reward_bounds(&self) -> (f64, f64);

    fn is_terminal(&self, state: &Self::State) -> bool;

    fn sample(
        &self,
        state: &Self::State,
        action: ActionId,
        rng: &mut dyn RngCore,
    ) -> Transition<Self::State>;

    /// `(V_min, V_max)`, bounds on any discounted return.
    fn value_bounds(&self) -> (f64, f64) {
        value_bounds(self.reward_bounds(), self.discount())
    }
}

impl<M: GenerativeMdp + ?Sized> GenerativeMdp for &M {
    type State = M::State;

    fn num_actions(&self) -> usize {
        (**self).num_actions()
    }
    fn discount(&self) -> f64 {
        (**self).discount()
    }
    fn reward_bounds(&self) -> (f64, f64) {
        (**self).reward_bounds()
    }
    fn is_terminal(&self, state: &Self::State) -> bool {
        (**self).is_terminal(state)
    }
    fn sample(&self, state: &M::State, action: ActionId, rng: &mut dyn RngCore) -> Transition<M::State> {
        (**self).sample(state, action, rng)
    }
    fn value_bounds(&self) -> (f64, f64) {
        (**self).value_bounds()
    }
}

/// Geometric-sum value bounds. Zero is always inside the interval because
/// terminal states and depth-limited leaves are worth exactly zero.
pub fn value_bounds((r_min, r_max): (f64, f64), gamma: f64) -> (f64, f64) {
    let horizon = 1.0 / (1.0 - gamma);
    (r_min.min(0.0) * horizon, r_max.max(0.0) * horizon)
}

/// [`value_bounds`] with the upper end replaced by `return_cap`, the most
/// reward any trajectory can collect, when the domain knows one.
pub fn capped_value_bounds(reward_bounds: (f64, f64), gamma: f64, return_cap: Option<f64>) -> (f64, f64) {
    let (v_min, v_max) = value_bounds(reward_bounds, gamma);
    (v_min, return_cap.map_or(v_max, |cap| cap.max(0.0)))
}

/// `M = <S, A, T, R, gamma>` with deterministic per-pair rewards and sparse
/// transition rows.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    num_states: usize,
    num_actions: usize,
    rows: Vec<Vec<(StateId, f64)>>,
    rewards: Vec<f64>,
    gamma: f64,
    terminal: Vec<bool>,
    r_min: f64,
    r_max: f64,
    return_cap: Option<f64>,
}

impl TabularMdp {
    /// Builds and validates an MDP. `rows[s * A + a]` lists `(next, prob)`
    /// pairs. Terminal rows are replaced by a zero-reward self-loop.
    pub fn new(
        num_states: usize,
        num_actions: usize,
        mut rows: Vec<Vec<(StateId, f64)>>,
        mut rewards: Vec<f64>,
        gamma: f64,
        terminal: &[StateId],
        (r_min, r_max): (f64, f64),
    ) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(Error::InvalidMdp("need at least one state and one action".into()));
        }
        let pairs = num_states * num_actions;
        if rows.len() != pairs || rewards.len() != pairs {
            return Err(Error::InvalidMdp(format!(
                "expected {pairs} transition rows and rewards, got {} and {}",
                rows.len(),
                rewards.len()
            )));
        }
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidMdp(format!("discount {gamma} outside [0, 1]")));
        }
        if !(r_min <= r_max) {
            return Err(Error::InvalidMdp(format!("reward bounds [{r_min}, {r_max}] are empty")));
        }
        let mut is_terminal = vec![false; num_states];
        for &t in terminal {
            if t >= num_states {
                return Err(Error::InvalidMdp(format!("terminal state {t} out of range")));
            }
            is_terminal[t] = true;
        }
        for s in 0..num_states {
            for a in 0..num_actions {
                let i = s * num_actions + a;
                if is_terminal[s] {
                    rows[i] = vec![(s, 1.0)];
                    rewards[i] = 0.0;
                    continue;
                }
                let row = &rows[i];
                if row.is_empty() {
                    return Err(Error::InvalidMdp(format!("row ({s}, {a}) is empty")));
                }
                let mut total = 0.0;
                for &(next, p) in row {
                    if next >= num_states {
                        return Err(Error::InvalidMdp(format!("row ({s}, {a}) targets state {next}")));
                    }
                    if !(p >= 0.0) {
                        return Err(Error::InvalidMdp(format!("row ({s}, {a}) has probability {p}")));
                    }
                    total += p;
                }
                if (total - 1.0).abs() > ROW_SUM_TOLERANCE {
                    return Err(Error::InvalidMdp(format!("row ({s}, {a}) sums to {total}")));
                }
                let r = rewards[i];
                if !(r >= r_min && r <= r_max) {
                    return Err(Error::InvalidMdp(format!(
                        "reward {r} at ({s}, {a}) outside [{r_min}, {r_max}]"
                    )));
                }
            }
        }
        Ok(Self {
            num_states,
            num_actions,
            rows,
            rewards,
            gamma,
            terminal: is_terminal,
            r_min,
            r_max,
            return_cap: None,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn row(&self, s: StateId, a: ActionId) -> &[(StateId, f64)] {
        &self.rows[s * self.num_actions + a]
    }

    pub fn reward(&self, s: StateId, a: ActionId) -> f64 {
        self.rewards[s * self.num_actions + a]
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    /// Probability of `next` under `T(s, a)`.
    pub fn prob(&self, s: StateId, a: ActionId, next: StateId) -> f64 {
        self.row(s, a)
            .iter()
            .filter(|&&(t, _)| t == next)
            .map(|&(_, p)| p)
            .sum()
    }

    /// Dense copy of `T(s, a)`.
    pub fn dense_row(&self, s: StateId, a: ActionId) -> Vec<f64> {
        let mut out = vec![0.0; self.num_states];
        for &(t, p) in self.row(s, a) {
            out[t] += p;
        }
        out
    }

    pub fn terminal_states(&self) -> Vec<StateId> {
        (0..self.num_states).filter(|&s| self.terminal[s]).collect()
    }

    /// Caps `V_max` at `cap` for domains whose total reward is bounded
    /// independently of the horizon (a one-off bonus, say).
    pub fn with_return_cap(mut self, cap: f64) -> Result<Self> {
        if !cap.is_finite() {
            return Err(Error::InvalidMdp(format!("return cap {cap} is not finite")));
        }
        self.return_cap = Some(cap);
        Ok(self)
    }

    pub fn return_cap(&self) -> Option<f64> {
        self.return_cap
    }

    pub fn with_discount(mut self, gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidMdp(format!("discount {gamma} outside [0, 1]")));
        }
        self.gamma = gamma;
        Ok(self)
    }

    /// Serialises to the plain-text fixture format.
    ///
    /// ```text
    /// S A gamma r_min r_max
    /// s a r t0 p0 t1 p1 ...      (one line per state-action pair)
    /// terminal t0 t1 ...         (only when terminal states exist)
    /// return_cap c               (only when set)
    /// ```
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} {} {} {} {}",
            self.num_states, self.num_actions, self.gamma, self.r_min, self.r_max
        );
        for s in 0..self.num_states {
            for a in 0..self.num_actions {
                let _ = write!(out, "{s} {a} {}", self.reward(s, a));
                for &(t, p) in self.row(s, a) {
                    let _ = write!(out, " {t} {p}");
                }
                out.push('\n');
            }
        }
        let terminal = self.terminal_states();
        if !terminal.is_empty() {
            out.push_str("terminal");
            for t in terminal {
                let _ = write!(out, " {t}");
            }
            out.push('\n');
        }
        if let Some(cap) = self.return_cap {
            let _ = writeln!(out, "return_cap {cap}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (line_no, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "missing header".into(),
        })?;
        let header: Vec<&str> = header.split_whitespace().collect();
        if header.len() != 5 {
            return Err(Error::Parse {
                line: line_no,
                msg: "header must be `S A gamma r_min r_max`".into(),
            });
        }
        let num_states: usize = parse_field(header[0], line_no)?;
        let num_actions: usize = parse_field(header[1], line_no)?;
        let gamma: f64 = parse_field(header[2], line_no)?;
        let r_min: f64 = parse_field(header[3], line_no)?;
        let r_max: f64 = parse_field(header[4], line_no)?;
        let pairs = num_states
            .checked_mul(num_actions)
            .ok_or(Error::Parse { line: line_no, msg: "size overflow".into() })?;
        let mut rows: Vec<Option<Vec<(StateId, f64)>>> = vec![None; pairs];
        let mut rewards = vec![0.0; pairs];
        let mut terminal = Vec::new();
        let mut return_cap = None;
        for (line_no, line) in lines {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields[0] == "return_cap" {
                if fields.len() != 2 {
                    return Err(Error::Parse { line: line_no, msg: "expected `return_cap c`".into() });
                }
                return_cap = Some(parse_field(fields[1], line_no)?);
                continue;
            }
            if fields[0] == "terminal" {
                for f in &fields[1..] {
                    terminal.push(parse_field(f, line_no)?);
                }
                continue;
            }
            if fields.len() < 5 || fields.len() % 2 == 0 {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "expected `s a r t0 p0 ...`".into(),
                });
            }
            let s: usize = parse_field(fields[0], line_no)?;
            let a: usize = parse_field(fields[1], line_no)?;
            if s >= num_states || a >= num_actions {
                return Err(Error::Parse { line: line_no, msg: format!("pair ({s}, {a}) out of range") });
            }
            let idx = s * num_actions + a;
            if rows[idx].is_some() {
                return Err(Error::Parse { line: line_no, msg: format!("duplicate pair ({s}, {a})") });
            }
            rewards[idx] = parse_field(fields[2], line_no)?;
            let mut row = Vec::with_capacity((fields.len() - 3) / 2);
            for chunk in fields[3..].chunks(2) {
                row.push((parse_field(chunk[0], line_no)?, parse_field(chunk[1], line_no)?));
            }
            rows[idx] = Some(row);
        }
        let rows = rows
            .into_iter()
            .enumerate()
            .map(|(i, r)| {
                r.ok_or_else(|| Error::Parse {
                    line: 0,
                    msg: format!("missing pair ({}, {})", i / num_actions, i % num_actions),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mdp = Self::new(num_states, num_actions, rows, rewards, gamma, &terminal, (r_min, r_max))?;
        match return_cap {
            Some(cap) => mdp.with_return_cap(cap),
            None => Ok(mdp),
        }
    }
}

fn parse_field<T: FromStr>(s: &str, line: usize) -> Result<T> {
    s.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("cannot parse `{s}`"),
    })
}

impl fmt::Display for TabularMdp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl GenerativeMdp for TabularMdp {
    type State = StateId;

    fn num_actions(&self) -> usize {
        self.num_actions
    }

    fn discount(&self) -> f64 {
        self.gamma
    }

    fn reward_bounds(&self) -> (f64, f64) {
        (self.r_min, self.r_max)
    }

    fn value_bounds(&self) -> (f64, f64) {
        capped_value_bounds(self.reward_bounds(), self.gamma, self.return_cap)
    }

    fn is_terminal(&self, state: &StateId) -> bool {
        self.terminal[*state]
    }

    fn sample(&self, &s: &StateId, a: ActionId, rng: &mut dyn RngCore) -> Transition<StateId> {
        if self.terminal[s] {
            return Transition { next_state: s, reward: 0.0 };
        }
        let row = self.row(s, a);
        let mut u = uniform01(rng);
        let mut next = row[row.len() - 1].0;
        for &(t, p) in row {
            if u < p {
                next = t;
                break;
            }
            u -= p;
        }
        Transition {
            next_state: next,
            reward: self.reward(s, a),
        }
    }
}

/// State values and action values; `v[s] = max_a q[s][a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    v: Vec<f64>,
    q: Vec<f64>,
    num_actions: usize,
}

impl ValueTable {
    pub fn zeros(num_states: usize, num_actions: usize) -> Self {
        Self {
            v: vec![0.0; num_states],
            q: vec![0.0; num_states * num_actions],
            num_actions,
        }
    }

    /// Table holding `v`, with `q` filled in by one Bellman backup.
    pub fn from_values(mdp: &TabularMdp, v: Vec<f64>) -> Self {
        let mut table = Self { v, q: vec![0.0; mdp.num_states * mdp.num_actions], num_actions: mdp.num_actions };
        for s in 0..mdp.num_states {
            for a in 0..mdp.num_actions {
                table.q[s * mdp.num_actions + a] = bellman_q(mdp, &table, s, a);
            }
        }
        table
    }

    pub fn v(&self, s: StateId) -> f64 {
        self.v[s]
    }

    pub fn q(&self, s: StateId, a: ActionId) -> f64 {
        self.q[s * self.num_actions + a]
    }

    pub fn values(&self) -> &[f64] {
        &self.v
    }
}

/// `R(s,a) + gamma * sum_s' T(s,a)(s') V(s')`.
pub fn bellman_q(mdp: &TabularMdp, values: &ValueTable, s: StateId, a: ActionId) -> f64 {
    let expected: f64 = mdp.row(s, a).iter().map(|&(t, p)| p * values.v[t]).sum();
    mdp.reward(s, a) + mdp.gamma * expected
}

/// Value iteration to within `epsilon` of the optimal value function.
pub fn value_iteration(mdp: &TabularMdp, epsilon: f64) -> Result<ValueTable> {
    value_iteration_trace(mdp, epsilon).map(|(table, _)| table)
}

/// Value iteration that also returns the max-norm change of every sweep.
///
/// Sweeps stop once the change drops below `epsilon (1 - gamma) / gamma`,
/// which puts the result within `epsilon` of the fixed point.
pub fn value_iteration_trace(mdp: &TabularMdp, epsilon: f64) -> Result<(ValueTable, Vec<f64>)> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
    }
    let gamma = mdp.gamma;
    if gamma >= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "value iteration needs gamma < 1, got {gamma}"
        )));
    }
    let threshold = if gamma > 0.0 { epsilon * (1.0 - gamma) / gamma } else { f64::INFINITY };
    let (s_count, a_count) = (mdp.num_states, mdp.num_actions);
    let mut table = ValueTable::zeros(s_count, a_count);
    let mut next_v = vec![0.0; s_count];
    let mut deltas = Vec::new();
    loop {
        for s in 0..s_count {
            let mut best = f64::NEG_INFINITY;
            for a in 0..a_count {
                let q = bellman_q(mdp, &table, s, a);
                table.q[s * a_count + a] = q;
                best = best.max(q);
            }
            next_v[s] = best;
        }
        let delta = table
            .v
            .iter()
            .zip(&next_v)
            .map(|(old, new)| (old - new).abs())
            .fold(0.0, f64::max);
        std::mem::swap(&mut table.v, &mut next_v);
        deltas.push(delta);
        if delta < threshold {
            break;
        }
    }
    // Bring q in line with the final v so that v = max_a q holds exactly.
    for s in 0..s_count {
        for a in 0..a_count {
            table.q[s * a_count + a] = bellman_q(mdp, &table, s, a);
        }
        table.v[s] = (0..a_count).map(|a| table.q[s * a_count + a]).fold(f64::NEG_INFINITY, f64::max);
    }
    Ok((table, deltas))
}

/// Greedy policy; ties go to the lowest action index.
pub fn greedy_policy(mdp: &TabularMdp, values: &ValueTable) -> Vec<ActionId> {
    (0..mdp.num_states)
        .map(|s| greedy_action(mdp, values, s))
        .collect()
}

pub fn greedy_action(mdp: &TabularMdp, values: &ValueTable, s: StateId) -> ActionId {
    argmax((0..mdp.num_actions).map(|a| bellman_q(mdp, values, s, a))).unwrap_or(0)
}

/// Iterative policy evaluation, run until the sweep change is below `tol`.
pub fn evaluate_policy(mdp: &TabularMdp, policy: &[ActionId], tol: f64) -> Result<Vec<f64>> {
    if mdp.gamma >= 1.0 {
        return Err(Error::InvalidParameter("policy evaluation needs gamma < 1".into()));
    }
    if policy.len() != mdp.num_states {
        return Err(Error::InvalidParameter("policy must cover every state".into()));
    }
    let mut v = vec![0.0; mdp.num_states];
    loop {
        let mut delta: f64 = 0.0;
        for s in 0..mdp.num_states {
            let a = policy[s];
            let new = mdp.reward(s, a)
                + mdp.gamma * mdp.row(s, a).iter().map(|&(t, p)| p * v[t]).sum::<f64>();
            delta = delta.max((new - v[s]).abs());
            v[s] = new;
        }
        if delta < tol {
            return Ok(v);
        }
    }
}

/// Random MDP: each row has `sparsity` successors with Dirichlet(1) weights,
/// rewards are uniform in `[0, 1]`, discount 0.9, no terminal states.
pub fn random_tabular_mdp(
    num_states: usize,
    num_actions: usize,
    seed: u64,
    sparsity: usize,
) -> Result<TabularMdp> {
    if num_states == 0 || num_actions == 0 {
        return Err(Error::InvalidParameter("random MDP needs S >= 1 and A >= 1".into()));
    }
    if sparsity == 0 || sparsity > num_states {
        return Err(Error::InvalidParameter(format!(
            "sparsity must be in 1..={num_states}, got {sparsity}"
        )));
    }
    let mut rng = seeded_rng(seed, 0);
    let pairs = num_states * num_actions;
    let mut rows = Vec::with_capacity(pairs);
    let mut rewards = Vec::with_capacity(pairs);
    for _ in 0..pairs {
        let mut targets = rand::seq::index::sample(&mut rng, num_states, sparsity).into_vec();
        targets.sort_unstable();
        let weights: Vec<f64> = targets.iter().map(|_| Exp1.sample(&mut rng)).collect();
        let total: f64 = weights.iter().sum();
        rows.push(targets.into_iter().zip(weights.into_iter().map(|w| w / total)).collect());
        rewards.push(uniform01(&mut rng));
    }
    TabularMdp::new(num_states, num_actions, rows, rewards, 0.9, &[], (0.0, 1.0))
}
