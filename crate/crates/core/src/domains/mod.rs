//! Benchmark environments and small fixtures.
//!
//! Tabular domains compile to a [`TabularMdp`] and run through
//! [`TabularEnv`]; Wumpus World has its own environment because its true
//! layout is hidden from the agent.

mod grid;
mod lock;
mod paint_polish;
mod wumpus;

use std::fmt::Debug;

use rand::RngCore;

use crate::error::{Error, Result};
use crate::mdp::{random_tabular_mdp, ActionId, GenerativeMdp, StateId, TabularMdp};

pub use grid::{GridWorld, EAST, NORTH, SOUTH, WEST};
pub use lock::combination_lock;
pub use paint_polish::{PaintPolish, DONE, PAINTED, POLISHED, SCRATCHED};
pub use wumpus::{Layout, Status, WumpusEnv, WumpusLayoutMdp, WumpusObs, WumpusPrior, WumpusStats, WumpusWorld};

/// Result of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct Step<S> {
    pub state: S,
    pub reward: f64,
    pub done: bool,
}

pub trait Environment {
    type State: Clone + Debug;

    fn num_actions(&self) -> usize;

    /// Starts a new episode and returns its first state.
    fn reset(&mut self, rng: &mut dyn RngCore) -> Self::State;

    /// Fails with [`Error::EpisodeOver`] once a terminal state was reached.
    fn step(&mut self, action: ActionId, rng: &mut dyn RngCore) -> Result<Step<Self::State>>;

    /// Integer label for logs.
    fn encode(&self, state: &Self::State) -> u64;
}

/// A tabular MDP with a fixed start state.
#[derive(Debug, Clone)]
pub struct TabularEnv {
    mdp: TabularMdp,
    start: StateId,
    state: StateId,
}

impl TabularEnv {
    pub fn new(mdp: TabularMdp, start: StateId) -> Result<Self> {
        if start >= mdp.num_states() {
            return Err(Error::InvalidParameter(format!("start state {start} out of range")));
        }
        Ok(Self { mdp, start, state: start })
    }

    pub fn mdp(&self) -> &TabularMdp {
        &self.mdp
    }

    pub fn state(&self) -> StateId {
        self.state
    }
}

impl Environment for TabularEnv {
    type State = StateId;

    fn num_actions(&self) -> usize {
        self.mdp.num_actions()
    }

    fn reset(&mut self, _rng: &mut dyn RngCore) -> StateId {
        self.state = self.start;
        self.state
    }

    fn step(&mut self, action: ActionId, rng: &mut dyn RngCore) -> Result<Step<StateId>> {
        if self.mdp.is_terminal(&self.state) {
            return Err(Error::EpisodeOver);
        }
        if action >= self.mdp.num_actions() {
            return Err(Error::InvalidParameter(format!("action {action} out of range")));
        }
        let t = self.mdp.sample(&self.state, action, rng);
        self.state = t.next_state;
        Ok(Step { state: t.next_state, reward: t.reward, done: self.mdp.is_terminal(&t.next_state) })
    }

    fn encode(&self, state: &StateId) -> u64 {
        *state as u64
    }
}

/// A named tabular domain.
#[derive(Debug, Clone)]
pub struct TabularDomain {
    pub mdp: TabularMdp,
    pub start: StateId,
    /// Object structure, for priors that exploit it.
    pub paint_polish: Option<PaintPolish>,
}

#[derive(Debug, Clone)]
pub enum Domain {
    Tabular(TabularDomain),
    Wumpus(WumpusWorld),
}

pub const DOMAIN_NAMES: &[&str] = &["grid5", "paintpolish:N", "wumpus4", "lock:N", "random:S,A,seed"];

fn parse_args<const K: usize>(name: &str, args: &str) -> Result<[u64; K]> {
    let parts: Vec<&str> = args.split(',').collect();
    let bad = || Error::InvalidParameter(format!("cannot parse domain arguments in {name:?}"));
    if parts.len() != K {
        return Err(bad());
    }
    let mut out = [0u64; K];
    for (slot, part) in out.iter_mut().zip(parts) {
        *slot = part.trim().parse().map_err(|_| bad())?;
    }
    Ok(out)
}

/// Looks a domain up by its registered name.
pub fn parse_domain(name: &str) -> Result<Domain> {
    let (head, args) = match name.split_once(':') {
        Some((h, a)) => (h, Some(a)),
        None => (name, None),
    };
    let tabular = |mdp: TabularMdp| Domain::Tabular(TabularDomain { mdp, start: 0, paint_polish: None });
    match (head, args) {
        ("grid5", None) => Ok(tabular(GridWorld::new(5).to_mdp()?)),
        ("wumpus4", None) => Ok(Domain::Wumpus(WumpusWorld::default())),
        ("paintpolish", Some(a)) => {
            let [cans] = parse_args::<1>(name, a)?;
            let pp = PaintPolish::new(cans as usize)?;
            Ok(Domain::Tabular(TabularDomain { mdp: pp.to_mdp()?, start: 0, paint_polish: Some(pp) }))
        }
        ("lock", Some(a)) => {
            let [n] = parse_args::<1>(name, a)?;
            Ok(tabular(combination_lock(n as usize, 0.95)?))
        }
        ("random", Some(a)) => {
            let [s, a, seed] = parse_args::<3>(name, a)?;
            let (s, a) = (s as usize, a as usize);
            Ok(tabular(random_tabular_mdp(s, a, seed, s.min(3))?))
        }
        _ => Err(Error::Unknown {
            kind: "domain",
            name: name.to_string(),
            available: DOMAIN_NAMES.join(", "),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::seeded_rng;

    #[test]
    fn registered_names_parse() {
        for name in ["grid5", "paintpolish:1", "paintpolish:2", "wumpus4", "lock:4", "random:5,2,7"] {
            assert!(parse_domain(name).is_ok(), "{name}");
        }
        for name in ["grid6", "paintpolish", "paintpolish:x", "random:5,2", "lock:0", "paintpolish:9"] {
            assert!(parse_domain(name).is_err(), "{name}");
        }
        let err = parse_domain("maze").unwrap_err().to_string();
        assert!(err.contains("grid5") && err.contains("wumpus4"));
    }

    #[test]
    fn tabular_env_refuses_to_step_past_the_end() {
        let Domain::Tabular(d) = parse_domain("lock:1").unwrap() else { unreachable!() };
        let mut env = TabularEnv::new(d.mdp, d.start).unwrap();
        let mut rng = seeded_rng(0, 0);
        env.reset(&mut rng);
        let step = env.step(1, &mut rng).unwrap();
        assert!(step.done);
        assert_eq!(step.reward, 1.0);
        assert!(matches!(env.step(0, &mut rng), Err(Error::EpisodeOver)));
    }
}
