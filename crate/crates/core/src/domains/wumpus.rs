//! Wumpus World on a 4x4 board as an MDP over information states.
//!
//! The board layout (pits, Wumpus, gold) is drawn once per episode from a
//! known prior and never shown to the agent. The agent sees its cell, the
//! breeze/stench percepts there, whether it still holds the arrow and whether
//! the Wumpus lives. Everything learned so far lives in [`WumpusStats`];
//! [`WumpusPrior`] turns that into exact posterior samples of the layout.

use rand::RngCore;

use crate::error::{Error, Result};
use crate::mdp::{ActionId, GenerativeMdp, Transition};
use crate::priors::ModelPrior;
use crate::util::{uniform01, uniform_index};

use super::{Environment, Step};

const SIDE: usize = 4;
const CELLS: usize = SIDE * SIDE;
const START: usize = 0;
const ALL: u16 = u16::MAX;
/// Rejection attempts before switching to exact enumeration of pit sets.
const PIT_REJECTION_TRIES: usize = 2_000;

fn bit(cell: usize) -> u16 {
    1 << cell
}

/// Cell one step from `cell` in `dir` (N, E, S, W), if on the board.
fn neighbor(cell: usize, dir: usize) -> Option<usize> {
    let (x, y) = (cell % SIDE, cell / SIDE);
    match dir {
        0 if y + 1 < SIDE => Some(cell + SIDE),
        1 if x + 1 < SIDE => Some(cell + 1),
        2 if y > 0 => Some(cell - SIDE),
        3 if x > 0 => Some(cell - 1),
        _ => None,
    }
}

fn neighbors(cell: usize) -> u16 {
    (0..4).filter_map(|d| neighbor(cell, d)).fold(0, |m, c| m | bit(c))
}

/// Cells an arrow shot from `cell` in `dir` passes through.
fn arrow_line(cell: usize, dir: usize) -> u16 {
    let mut mask = 0;
    let mut at = cell;
    while let Some(next) = neighbor(at, dir) {
        mask |= bit(next);
        at = next;
    }
    mask
}

fn cells(mask: u16) -> impl Iterator<Item = usize> {
    (0..CELLS).filter(move |&c| mask & bit(c) != 0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Alive,
    /// Fell into a pit or was eaten.
    Dead,
    /// Reached the gold.
    Won,
    /// Missed with the arrow.
    Quit,
}

/// What the agent observes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct WumpusObs {
    pub pos: u8,
    pub breeze: bool,
    pub stench: bool,
    pub has_arrow: bool,
    pub wumpus_alive: bool,
    pub status: Status,
}

impl WumpusObs {
    pub fn is_terminal(&self) -> bool {
        self.status != Status::Alive
    }

    /// Compact integer label.
    pub fn code(&self) -> u64 {
        self.pos as u64
            | (self.breeze as u64) << 4
            | (self.stench as u64) << 5
            | (self.has_arrow as u64) << 6
            | (self.wumpus_alive as u64) << 7
            | (self.status as u64) << 8
    }
}

/// A hidden board.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Layout {
    pub pits: u16,
    pub wumpus: u8,
    pub gold: u8,
}

impl Layout {
    fn percepts(&self, cell: usize, wumpus_alive: bool) -> (bool, bool) {
        let around = neighbors(cell);
        (self.pits & around != 0, wumpus_alive && around & bit(self.wumpus as usize) != 0)
    }
}

/// Board prior and rewards.
///
/// Pits appear independently with probability `pit_prob` in every cell but
/// the start; the Wumpus and the gold sit on distinct non-start cells chosen
/// uniformly. Entering the gold cell pays `gold_reward` and ends the episode;
/// entering a pit or the live Wumpus's cell pays `death_reward` and ends it.
/// Shooting along the Wumpus's line kills it for `kill_reward`; a miss ends
/// the episode with nothing.
#[derive(Debug, Clone, PartialEq)]
pub struct WumpusWorld {
    pub pit_prob: f64,
    pub gold_reward: f64,
    pub kill_reward: f64,
    pub death_reward: f64,
    pub gamma: f64,
}

impl Default for WumpusWorld {
    fn default() -> Self {
        Self { pit_prob: 0.2, gold_reward: 0.9, kill_reward: 0.1, death_reward: -1.0, gamma: 0.95 }
    }
}

impl WumpusWorld {
    pub const NUM_ACTIONS: usize = 8;

    /// Moves are actions 0..4 (N, E, S, W); shots are 4..8 in the same order.
    pub fn move_action(dir: usize) -> ActionId {
        dir
    }

    pub fn shoot_action(dir: usize) -> ActionId {
        4 + dir
    }

    pub fn sample_layout(&self, rng: &mut dyn RngCore) -> Layout {
        let mut pits = 0;
        for c in 1..CELLS {
            if uniform01(rng) < self.pit_prob {
                pits |= bit(c);
            }
        }
        let wumpus = 1 + uniform_index(rng, CELLS - 1);
        let mut gold = 1 + uniform_index(rng, CELLS - 2);
        if gold >= wumpus {
            gold += 1;
        }
        Layout { pits, wumpus: wumpus as u8, gold: gold as u8 }
    }

    /// Starting observation on `layout`.
    pub fn start(&self, layout: &Layout) -> WumpusObs {
        let (breeze, stench) = layout.percepts(START, true);
        WumpusObs { pos: START as u8, breeze, stench, has_arrow: true, wumpus_alive: true, status: Status::Alive }
    }

    /// Deterministic dynamics given the board.
    pub fn step(&self, layout: &Layout, s: &WumpusObs, action: ActionId) -> (WumpusObs, f64) {
        if s.is_terminal() {
            return (*s, 0.0);
        }
        let mut next = *s;
        let dir = action % 4;
        if action < 4 {
            let Some(cell) = neighbor(s.pos as usize, dir) else {
                return (next, 0.0);
            };
            next.pos = cell as u8;
            if layout.pits & bit(cell) != 0 || (s.wumpus_alive && layout.wumpus as usize == cell) {
                next.status = Status::Dead;
                return (next, self.death_reward);
            }
            if layout.gold as usize == cell {
                next.status = Status::Won;
                return (next, self.gold_reward);
            }
            (next.breeze, next.stench) = layout.percepts(cell, s.wumpus_alive);
            (next, 0.0)
        } else {
            if !s.has_arrow {
                return (next, 0.0);
            }
            next.has_arrow = false;
            if s.wumpus_alive && arrow_line(s.pos as usize, dir) & bit(layout.wumpus as usize) != 0 {
                next.wumpus_alive = false;
                next.stench = false;
                (next, self.kill_reward)
            } else {
                next.status = Status::Quit;
                (next, 0.0)
            }
        }
    }

    fn reward_bounds(&self) -> (f64, f64) {
        let rewards = [self.gold_reward, self.kill_reward, self.death_reward, 0.0];
        let lo = rewards.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = rewards.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    /// Each reward can be collected at most once per episode, which gives
    /// much tighter bounds than the geometric sum.
    fn value_bounds(&self) -> (f64, f64) {
        let lo = self.death_reward.min(0.0) + self.kill_reward.min(0.0) + self.gold_reward.min(0.0);
        let hi = self.kill_reward.max(0.0) + self.gold_reward.max(0.0).max(self.death_reward);
        (lo, hi)
    }
}

/// Everything the agent has learned about the board this episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct WumpusStats {
    /// Cells entered and survived.
    pub visited: u16,
    /// Cells entered while the Wumpus was alive (so it is not there).
    pub visited_alive: u16,
    /// Visited cells with a breeze.
    pub breeze: u16,
    /// Cells in `visited_alive` with a stench.
    pub stench: u16,
    /// Where the Wumpus can be: the arrow's line once it was hit.
    pub wumpus_line: u16,
}

impl Default for WumpusStats {
    fn default() -> Self {
        Self { visited: 0, visited_alive: 0, breeze: 0, stench: 0, wumpus_line: ALL }
    }
}

impl WumpusStats {
    /// Folds in the percepts of an observation.
    pub fn observe(mut self, obs: &WumpusObs) -> Self {
        if obs.status != Status::Alive {
            return self;
        }
        let b = bit(obs.pos as usize);
        self.visited |= b;
        if obs.breeze {
            self.breeze |= b;
        }
        if obs.wumpus_alive {
            self.visited_alive |= b;
            if obs.stench {
                self.stench |= b;
            }
        }
        self
    }

    fn unvisited_non_start(&self) -> u16 {
        !self.visited & !bit(START)
    }

    /// Posterior weight of every Wumpus cell (proportional to the number of
    /// gold cells still compatible with it).
    fn wumpus_weights(&self) -> [u32; CELLS] {
        let free_gold = self.unvisited_non_start().count_ones();
        let mut weights = [0u32; CELLS];
        for w in 1..CELLS {
            let wb = bit(w);
            if self.visited_alive & wb != 0 || self.wumpus_line & wb == 0 {
                continue;
            }
            let consistent = cells(self.visited_alive).all(|v| (neighbors(v) & wb != 0) == (self.stench & bit(v) != 0));
            if consistent {
                weights[w] = free_gold - u32::from(self.visited & wb == 0);
            }
        }
        weights
    }

    fn pits_consistent(&self, pits: u16) -> bool {
        cells(self.visited).all(|v| (neighbors(v) & pits != 0) == (self.breeze & bit(v) != 0))
    }
}

/// The known board prior, conditioned on [`WumpusStats`].
#[derive(Debug, Clone, PartialEq)]
pub struct WumpusPrior {
    world: WumpusWorld,
}

impl WumpusPrior {
    pub fn new(world: WumpusWorld) -> Self {
        Self { world }
    }

    pub fn world(&self) -> &WumpusWorld {
        &self.world
    }

    /// Exact posterior draw of the board.
    pub fn sample_layout(&self, stats: &WumpusStats, rng: &mut dyn RngCore) -> Layout {
        let weights = self.wumpus_weights_checked(stats);
        let total: u32 = weights.iter().sum();
        let mut u = uniform_index(rng, total as usize) as u32;
        let mut wumpus = 0;
        for (c, &w) in weights.iter().enumerate() {
            if u < w {
                wumpus = c;
                break;
            }
            u -= w;
        }
        let gold_cells: Vec<usize> = cells(stats.unvisited_non_start() & !bit(wumpus)).collect();
        let gold = gold_cells[uniform_index(rng, gold_cells.len())];
        let pits = self.sample_pits(stats, rng);
        Layout { pits, wumpus: wumpus as u8, gold: gold as u8 }
    }

    fn wumpus_weights_checked(&self, stats: &WumpusStats) -> [u32; CELLS] {
        let weights = stats.wumpus_weights();
        assert!(weights.iter().any(|&w| w > 0), "observations are inconsistent with every board: {stats:?}");
        weights
    }

    fn sample_pits(&self, stats: &WumpusStats, rng: &mut dyn RngCore) -> u16 {
        let open = stats.unvisited_non_start();
        let frontier = open & cells(stats.visited).fold(0, |m, v| m | neighbors(v));
        let p = self.world.pit_prob;
        let mut free = 0;
        for c in cells(open & !frontier) {
            if uniform01(rng) < p {
                free |= bit(c);
            }
        }
        for _ in 0..PIT_REJECTION_TRIES {
            let mut pits = 0;
            for c in cells(frontier) {
                if uniform01(rng) < p {
                    pits |= bit(c);
                }
            }
            if stats.pits_consistent(pits) {
                return pits | free;
            }
        }
        // Unlikely evidence: enumerate frontier subsets exactly.
        let frontier_cells: Vec<usize> = cells(frontier).collect();
        let mut options = Vec::new();
        let mut total = 0.0;
        for subset in 0u32..(1 << frontier_cells.len()) {
            let pits = frontier_cells
                .iter()
                .enumerate()
                .filter(|&(i, _)| subset & (1 << i) != 0)
                .fold(0u16, |m, (_, &c)| m | bit(c));
            if stats.pits_consistent(pits) {
                let k = pits.count_ones() as i32;
                let w = p.powi(k) * (1.0 - p).powi(frontier_cells.len() as i32 - k);
                total += w;
                options.push((pits, w));
            }
        }
        assert!(!options.is_empty(), "breeze observations are inconsistent with every pit set");
        let mut u = uniform01(rng) * total;
        for &(pits, w) in &options {
            if u < w {
                return pits | free;
            }
            u -= w;
        }
        options[options.len() - 1].0 | free
    }

    /// Posterior probability that the Wumpus sits in `cell`.
    pub fn wumpus_probability(&self, stats: &WumpusStats, cell: usize) -> f64 {
        let weights = stats.wumpus_weights();
        let total: u32 = weights.iter().sum();
        weights[cell] as f64 / total as f64
    }
}

impl ModelPrior for WumpusPrior {
    type State = WumpusObs;
    type Stats = WumpusStats;
    type Model = WumpusLayoutMdp;

    fn num_actions(&self) -> usize {
        WumpusWorld::NUM_ACTIONS
    }

    fn discount(&self) -> f64 {
        self.world.gamma
    }

    fn reward_bounds(&self) -> (f64, f64) {
        self.world.reward_bounds()
    }

    fn value_bounds(&self) -> (f64, f64) {
        self.world.value_bounds()
    }

    fn is_terminal(&self, state: &WumpusObs) -> bool {
        state.is_terminal()
    }

    fn empty_stats(&self) -> WumpusStats {
        WumpusStats::default()
    }

    fn initial_stats(&self, state: &WumpusObs) -> WumpusStats {
        WumpusStats::default().observe(state)
    }

    fn update(&self, stats: &WumpusStats, s: &WumpusObs, a: ActionId, next: &WumpusObs, _r: f64) -> WumpusStats {
        let mut stats = stats.observe(s);
        if a >= 4 && s.wumpus_alive && !next.wumpus_alive {
            stats.wumpus_line &= arrow_line(s.pos as usize, a - 4);
        }
        stats.observe(next)
    }

    fn sample_mdp(&self, stats: &WumpusStats, rng: &mut dyn RngCore) -> WumpusLayoutMdp {
        WumpusLayoutMdp { world: self.world.clone(), layout: self.sample_layout(stats, rng) }
    }

    fn predictive_sample(&self, s: &WumpusObs, a: ActionId, stats: &WumpusStats, rng: &mut dyn RngCore) -> Transition<WumpusObs> {
        if s.is_terminal() {
            return Transition { next_state: *s, reward: 0.0 };
        }
        let stats = stats.observe(s);
        if a < 4 {
            // Bumps and moves into visited cells are already determined.
            let Some(cell) = neighbor(s.pos as usize, a) else {
                return Transition { next_state: *s, reward: 0.0 };
            };
            let b = bit(cell);
            if stats.visited & b != 0 && (!s.wumpus_alive || stats.visited_alive & b != 0) {
                let mut next = *s;
                next.pos = cell as u8;
                next.breeze = stats.breeze & b != 0;
                next.stench = s.wumpus_alive && stats.stench & b != 0;
                return Transition { next_state: next, reward: 0.0 };
            }
        }
        let layout = self.sample_layout(&stats, rng);
        let (next_state, reward) = self.world.step(&layout, s, a);
        Transition { next_state, reward }
    }

    fn discoveries(&self, stats: &WumpusStats) -> u64 {
        stats.visited.count_ones() as u64
    }
}

/// One posterior board, as a generative model.
#[derive(Debug, Clone)]
pub struct WumpusLayoutMdp {
    pub world: WumpusWorld,
    pub layout: Layout,
}

impl GenerativeMdp for WumpusLayoutMdp {
    type State = WumpusObs;

    fn num_actions(&self) -> usize {
        WumpusWorld::NUM_ACTIONS
    }

    fn discount(&self) -> f64 {
        self.world.gamma
    }

    fn reward_bounds(&self) -> (f64, f64) {
        self.world.reward_bounds()
    }

    fn value_bounds(&self) -> (f64, f64) {
        self.world.value_bounds()
    }

    fn is_terminal(&self, state: &WumpusObs) -> bool {
        state.is_terminal()
    }

    fn sample(&self, state: &WumpusObs, action: ActionId, _rng: &mut dyn RngCore) -> Transition<WumpusObs> {
        let (next_state, reward) = self.world.step(&self.layout, state, action);
        Transition { next_state, reward }
    }
}

/// A board drawn from the prior at every reset.
#[derive(Debug, Clone)]
pub struct WumpusEnv {
    world: WumpusWorld,
    layout: Option<Layout>,
    state: Option<WumpusObs>,
}

impl WumpusEnv {
    pub fn new(world: WumpusWorld) -> Self {
        Self { world, layout: None, state: None }
    }

    /// Starts an episode on a given board.
    pub fn reset_to(&mut self, layout: Layout) -> WumpusObs {
        let obs = self.world.start(&layout);
        self.layout = Some(layout);
        self.state = Some(obs);
        obs
    }

    pub fn layout(&self) -> Option<&Layout> {
        self.layout.as_ref()
    }
}

impl Environment for WumpusEnv {
    type State = WumpusObs;

    fn num_actions(&self) -> usize {
        WumpusWorld::NUM_ACTIONS
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> WumpusObs {
        let layout = self.world.sample_layout(rng);
        self.reset_to(layout)
    }

    fn step(&mut self, action: ActionId, _rng: &mut dyn RngCore) -> Result<Step<WumpusObs>> {
        let (Some(layout), Some(state)) = (self.layout, self.state) else {
            return Err(Error::EpisodeOver);
        };
        if state.is_terminal() {
            return Err(Error::EpisodeOver);
        }
        if action >= WumpusWorld::NUM_ACTIONS {
            return Err(Error::InvalidParameter(format!("action {action} out of range")));
        }
        let (next, reward) = self.world.step(&layout, &state, action);
        self.state = Some(next);
        Ok(Step { state: next, reward, done: next.is_terminal() })
    }

    fn encode(&self, state: &WumpusObs) -> u64 {
        state.code()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::seeded_rng;

    fn board(pits: &[usize], wumpus: usize, gold: usize) -> Layout {
        Layout { pits: pits.iter().fold(0, |m, &c| m | bit(c)), wumpus: wumpus as u8, gold: gold as u8 }
    }

    #[test]
    fn shooting_along_the_wumpus_line_slays_it() {
        let world = WumpusWorld::default();
        let layout = board(&[], 12, 15);
        let s = world.start(&layout);
        let (next, r) = world.step(&layout, &s, WumpusWorld::shoot_action(0));
        assert!(!next.wumpus_alive && !next.has_arrow);
        assert_eq!(next.status, Status::Alive);
        assert_eq!(r, world.kill_reward);
        // A miss ends the episode.
        let (next, r) = world.step(&layout, &s, WumpusWorld::shoot_action(1));
        assert_eq!((next.status, r), (Status::Quit, 0.0));
    }

    #[test]
    fn pits_are_absorbing() {
        let world = WumpusWorld::default();
        let layout = board(&[1], 12, 15);
        let s = world.start(&layout);
        assert!(s.breeze);
        let (dead, r) = world.step(&layout, &s, WumpusWorld::move_action(1));
        assert_eq!((dead.status, r), (Status::Dead, world.death_reward));
        for a in 0..8 {
            assert_eq!(world.step(&layout, &dead, a), (dead, 0.0));
        }
    }

    #[test]
    fn fixed_board_and_actions_replay_identically() {
        let world = WumpusWorld::default();
        let layout = board(&[6, 9], 8, 3);
        let actions = [1, 0, 3, 2, 1, 1, 4, 1];
        let run = || {
            let mut s = world.start(&layout);
            let mut seen = vec![s];
            for &a in &actions {
                s = world.step(&layout, &s, a).0;
                seen.push(s);
            }
            seen
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn prior_pit_frequency() {
        let world = WumpusWorld::default();
        let mut rng = seeded_rng(0, 0);
        let n = 10_000;
        let mut counts = [0u32; CELLS];
        for _ in 0..n {
            let l = world.sample_layout(&mut rng);
            assert_ne!(l.wumpus, l.gold);
            assert!(l.wumpus != 0 && l.gold != 0 && l.pits & 1 == 0);
            for c in cells(l.pits) {
                counts[c] += 1;
            }
        }
        for c in 1..CELLS {
            assert!((counts[c] as f64 / n as f64 - 0.2).abs() < 0.02, "cell {c}");
        }
    }

    #[test]
    fn posterior_samples_respect_every_observation() {
        let world = WumpusWorld::default();
        let prior = WumpusPrior::new(world.clone());
        let mut rng = seeded_rng(4, 0);
        for _ in 0..200 {
            let truth = world.sample_layout(&mut rng);
            let mut s = world.start(&truth);
            let mut stats = prior.initial_stats(&s);
            for _ in 0..6 {
                let a = uniform_index(&mut rng, 4);
                let (next, r) = world.step(&truth, &s, a);
                stats = prior.update(&stats, &s, a, &next, r);
                s = next;
                if s.is_terminal() {
                    break;
                }
            }
            if s.is_terminal() {
                continue;
            }
            for _ in 0..5 {
                let l = prior.sample_layout(&stats, &mut rng);
                assert!(stats.pits_consistent(l.pits));
                assert_eq!(l.pits & stats.visited, 0);
                assert_eq!(bit(l.gold as usize) & stats.visited, 0);
                assert_eq!(bit(l.wumpus as usize) & stats.visited_alive, 0);
                let (b, st) = l.percepts(s.pos as usize, s.wumpus_alive);
                assert_eq!((b, st), (s.breeze, s.stench));
            }
        }
    }

    #[test]
    fn stench_pins_down_the_wumpus() {
        let prior = WumpusPrior::new(WumpusWorld::default());
        // Stench at the start: the Wumpus is at cell 1 or cell 4.
        let s = WumpusObs { pos: 0, breeze: false, stench: true, has_arrow: true, wumpus_alive: true, status: Status::Alive };
        let stats = prior.initial_stats(&s);
        assert!((prior.wumpus_probability(&stats, 1) - 0.5).abs() < 1e-12);
        assert!((prior.wumpus_probability(&stats, 4) - 0.5).abs() < 1e-12);
        assert_eq!(prior.wumpus_probability(&stats, 5), 0.0);
    }

    #[test]
    fn env_rejects_steps_after_the_end() {
        let mut env = WumpusEnv::new(WumpusWorld::default());
        let mut rng = seeded_rng(0, 0);
        assert!(matches!(env.step(0, &mut rng), Err(Error::EpisodeOver)));
        env.reset_to(board(&[1], 12, 15));
        assert!(env.step(1, &mut rng).unwrap().done);
        assert!(matches!(env.step(0, &mut rng), Err(Error::EpisodeOver)));
    }
}
