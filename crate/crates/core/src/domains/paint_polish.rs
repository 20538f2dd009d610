use crate::error::{Error, Result};
use crate::mdp::{ActionId, StateId, TabularMdp};
use crate::priors::ObjectDomain;

/// Per-can feature bits.
pub const PAINTED: usize = 1;
pub const POLISHED: usize = 2;
pub const SCRATCHED: usize = 4;
pub const DONE: usize = 8;

const PAINT: usize = 0;
const POLISH: usize = 1;
const SHORTCUT: usize = 2;
const FINISH: usize = 3;

const MAX_CANS: usize = 4;

/// Cans to paint and polish; each can is four binary features.
///
/// Object actions, applied to one can:
/// - paint: painted, unpolished, scratched with probability `paint_scratch`;
/// - polish: if painted, polished and any scratch buffed out;
/// - shortcut: painted and polished, scratched with probability `shortcut_scratch`;
/// - finish: marks the can done if it is painted, polished and unscratched.
///
/// A done can ignores every action. Each step costs 1; the step that
/// finishes the last can also pays `bonus`.
#[derive(Debug, Clone, PartialEq)]
pub struct PaintPolish {
    pub cans: usize,
    pub paint_scratch: f64,
    pub shortcut_scratch: f64,
    pub step_reward: f64,
    pub bonus: f64,
    pub gamma: f64,
}

impl PaintPolish {
    pub fn new(cans: usize) -> Result<Self> {
        if cans == 0 || cans > MAX_CANS {
            return Err(Error::InvalidParameter(format!("paintpolish supports 1..={MAX_CANS} cans, got {cans}")));
        }
        Ok(Self { cans, paint_scratch: 0.2, shortcut_scratch: 0.5, step_reward: -1.0, bonus: 10.0, gamma: 0.95 })
    }

    /// Next-local-state distribution of one can.
    pub fn local_row(&self, local: usize, object_action: usize) -> Vec<(usize, f64)> {
        if local & DONE != 0 {
            return vec![(local, 1.0)];
        }
        let split = |base: usize, p: f64| -> Vec<(usize, f64)> {
            if p <= 0.0 || base & SCRATCHED != 0 {
                vec![(base, 1.0)]
            } else if p >= 1.0 {
                vec![(base | SCRATCHED, 1.0)]
            } else {
                vec![(base, 1.0 - p), (base | SCRATCHED, p)]
            }
        };
        match object_action {
            PAINT => split((local | PAINTED) & !POLISHED, self.paint_scratch),
            POLISH if local & PAINTED != 0 => vec![((local | POLISHED) & !SCRATCHED, 1.0)],
            POLISH => vec![(local, 1.0)],
            SHORTCUT => split(PAINTED | POLISHED, self.shortcut_scratch),
            _ if local & (PAINTED | POLISHED | SCRATCHED) == PAINTED | POLISHED => vec![(local | DONE, 1.0)],
            _ => vec![(local, 1.0)],
        }
    }

    fn finishes(&self, s: StateId, a: ActionId) -> bool {
        let (can, oa) = (a / 4, a % 4);
        oa == FINISH
            && self.local_state(s, can) & (PAINTED | POLISHED | SCRATCHED | DONE) == PAINTED | POLISHED
            && (0..self.cans).all(|i| i == can || self.local_state(s, i) & DONE != 0)
    }

    /// Enumerates the joint MDP over `16^cans` states.
    pub fn to_mdp(&self) -> Result<TabularMdp> {
        let n_s = self.num_states();
        let n_a = self.num_actions();
        let mut rows = Vec::with_capacity(n_s * n_a);
        let mut rewards = Vec::with_capacity(n_s * n_a);
        let mut terminal = Vec::new();
        for s in 0..n_s {
            if self.is_terminal(s) {
                terminal.push(s);
            }
            for a in 0..n_a {
                let (can, oa) = (a / 4, a % 4);
                let local = self.local_state(s, can);
                rows.push(
                    self.local_row(local, oa)
                        .into_iter()
                        .map(|(l, p)| (self.with_local_state(s, can, l), p))
                        .collect(),
                );
                rewards.push(self.reward(s, a));
            }
        }
        let mdp = TabularMdp::new(n_s, n_a, rows, rewards, self.gamma, &terminal, self.reward_bounds())?;
        match self.return_cap() {
            Some(cap) => mdp.with_return_cap(cap),
            None => Ok(mdp),
        }
    }
}

impl ObjectDomain for PaintPolish {
    fn num_objects(&self) -> usize {
        self.cans
    }

    fn local_states(&self) -> usize {
        16
    }

    fn object_actions(&self) -> usize {
        4
    }

    fn num_states(&self) -> usize {
        1 << (4 * self.cans)
    }

    fn local_state(&self, state: StateId, object: usize) -> usize {
        (state >> (4 * object)) & 15
    }

    fn with_local_state(&self, state: StateId, object: usize, local: usize) -> StateId {
        (state & !(15 << (4 * object))) | (local << (4 * object))
    }

    fn reward(&self, state: StateId, action: ActionId) -> f64 {
        if self.is_terminal(state) {
            return 0.0;
        }
        if self.finishes(state, action) {
            self.step_reward + self.bonus
        } else {
            self.step_reward
        }
    }

    fn reward_bounds(&self) -> (f64, f64) {
        let lo = self.step_reward.min(self.step_reward + self.bonus);
        let hi = self.step_reward.max(self.step_reward + self.bonus);
        (lo, hi)
    }

    fn discount(&self) -> f64 {
        self.gamma
    }

    /// The bonus is paid once, on the step that ends the episode, and every
    /// other step costs; so no trajectory earns more than one finishing step.
    fn return_cap(&self) -> Option<f64> {
        (self.step_reward <= 0.0).then_some((self.step_reward + self.bonus).max(0.0))
    }

    fn is_terminal(&self, state: StateId) -> bool {
        (0..self.cans).all(|i| self.local_state(state, i) & DONE != 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{value_iteration, GenerativeMdp};

    #[test]
    fn state_space_grows_as_sixteen_to_the_cans() {
        for cans in 1..=3 {
            assert_eq!(PaintPolish::new(cans).unwrap().to_mdp().unwrap().num_states(), 1 << (4 * cans));
        }
    }

    #[test]
    fn actions_leave_other_cans_alone() {
        let pp = PaintPolish::new(2).unwrap();
        let mdp = pp.to_mdp().unwrap();
        for s in 0..mdp.num_states() {
            if mdp.is_terminal(&s) {
                continue;
            }
            for a in 0..mdp.num_actions() {
                let other = 1 - a / 4;
                for &(next, p) in mdp.row(s, a) {
                    assert!(p > 0.0);
                    assert_eq!(pp.local_state(next, other), pp.local_state(s, other));
                }
            }
        }
    }

    #[test]
    fn identical_cans_share_dynamics() {
        let pp = PaintPolish::new(2).unwrap();
        let mdp = pp.to_mdp().unwrap();
        let local = PAINTED;
        let s = pp.with_local_state(pp.with_local_state(0, 0, local), 1, local);
        for oa in 0..4 {
            let r0: Vec<(usize, f64)> = mdp.row(s, oa).iter().map(|&(t, p)| (pp.local_state(t, 0), p)).collect();
            let r1: Vec<(usize, f64)> = mdp.row(s, 4 + oa).iter().map(|&(t, p)| (pp.local_state(t, 1), p)).collect();
            assert_eq!(r0, r1);
        }
    }

    #[test]
    fn all_done_is_terminal_and_reachable() {
        let pp = PaintPolish::new(2).unwrap();
        let mdp = pp.to_mdp().unwrap();
        let done = pp.with_local_state(pp.with_local_state(0, 0, DONE | PAINTED | POLISHED), 1, DONE | PAINTED | POLISHED);
        assert!(mdp.is_terminal(&done));
        assert!(!mdp.is_terminal(&pp.with_local_state(0, 0, DONE | PAINTED | POLISHED)));
        let v = value_iteration(&mdp, 1e-8).unwrap();
        assert!(v.v(0) > 0.0, "the bonus is worth the detour: {}", v.v(0));
    }

    #[test]
    fn finishing_the_last_can_pays_the_bonus() {
        let pp = PaintPolish::new(1).unwrap();
        assert_eq!(pp.reward(PAINTED | POLISHED, FINISH), 9.0);
        assert_eq!(pp.reward(PAINTED | POLISHED | SCRATCHED, FINISH), -1.0);
        assert_eq!(pp.local_row(PAINTED | POLISHED | SCRATCHED, FINISH), vec![(PAINTED | POLISHED | SCRATCHED, 1.0)]);
        assert_eq!(pp.local_row(PAINTED | SCRATCHED, POLISH), vec![(PAINTED | POLISHED, 1.0)]);
        assert_eq!(pp.local_row(0, POLISH), vec![(0, 1.0)]);
    }
}
