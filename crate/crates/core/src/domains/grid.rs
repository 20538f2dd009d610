use crate::error::{Error, Result};
use crate::mdp::{StateId, TabularMdp};

pub const NORTH: usize = 0;
pub const EAST: usize = 1;
pub const SOUTH: usize = 2;
pub const WEST: usize = 3;

/// Square grid from corner `(0, 0)` to the terminal corner `(n-1, n-1)`.
///
/// Moves succeed with probability `1 - slip`; otherwise the agent goes in one
/// of the two perpendicular directions, `slip / 2` each. Bumping into a wall
/// leaves the agent in place. Every step costs `step_reward`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridWorld {
    pub size: usize,
    pub slip: f64,
    pub step_reward: f64,
    pub gamma: f64,
}

impl GridWorld {
    pub fn new(size: usize) -> Self {
        Self { size, slip: 0.2, step_reward: -1.0, gamma: 0.95 }
    }

    /// State index of cell `(x, y)`.
    pub fn state(&self, x: usize, y: usize) -> StateId {
        y * self.size + x
    }

    pub fn cell(&self, s: StateId) -> (usize, usize) {
        (s % self.size, s / self.size)
    }

    pub fn start(&self) -> StateId {
        0
    }

    pub fn goal(&self) -> StateId {
        self.state(self.size - 1, self.size - 1)
    }

    /// Where a move in `dir` ends up, walls included.
    pub fn moved(&self, s: StateId, dir: usize) -> StateId {
        let (x, y) = self.cell(s);
        let last = self.size - 1;
        let (x, y) = match dir {
            NORTH if y < last => (x, y + 1),
            EAST if x < last => (x + 1, y),
            SOUTH if y > 0 => (x, y - 1),
            WEST if x > 0 => (x - 1, y),
            _ => (x, y),
        };
        self.state(x, y)
    }

    pub fn to_mdp(&self) -> Result<TabularMdp> {
        if self.size < 2 {
            return Err(Error::InvalidParameter("grid needs at least 2x2 cells".into()));
        }
        if !(0.0..=1.0).contains(&self.slip) {
            return Err(Error::InvalidParameter(format!("slip {} outside [0, 1]", self.slip)));
        }
        let n = self.size * self.size;
        let mut rows = Vec::with_capacity(n * 4);
        for s in 0..n {
            for dir in 0..4 {
                let mut row: Vec<(StateId, f64)> = Vec::with_capacity(3);
                let outcomes = [(dir, 1.0 - self.slip), ((dir + 1) % 4, self.slip / 2.0), ((dir + 3) % 4, self.slip / 2.0)];
                for (d, p) in outcomes {
                    if p == 0.0 {
                        continue;
                    }
                    let next = self.moved(s, d);
                    match row.iter_mut().find(|(t, _)| *t == next) {
                        Some((_, q)) => *q += p,
                        None => row.push((next, p)),
                    }
                }
                rows.push(row);
            }
        }
        let bounds = (self.step_reward.min(0.0), self.step_reward.max(0.0));
        TabularMdp::new(n, 4, rows, vec![self.step_reward; n * 4], self.gamma, &[self.goal()], bounds)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::GenerativeMdp;
    use crate::util::seeded_rng;

    #[test]
    fn corner_bumps_keep_the_perpendicular_mass() {
        let grid = GridWorld::new(5);
        let mdp = grid.to_mdp().unwrap();
        // North from (0,0): east slip moves, west slip bumps.
        assert!((mdp.prob(0, NORTH, 0) - 0.1).abs() < 1e-12);
        assert!((mdp.prob(0, NORTH, grid.state(0, 1)) - 0.8).abs() < 1e-12);
        assert!((mdp.prob(0, NORTH, grid.state(1, 0)) - 0.1).abs() < 1e-12);
        // South from (0,0): the intended move and the west slip both bump.
        assert!((mdp.prob(0, SOUTH, 0) - 0.9).abs() < 1e-12);
    }

    #[test]
    fn goal_is_a_zero_reward_self_loop() {
        let grid = GridWorld::new(5);
        let mdp = grid.to_mdp().unwrap();
        let g = grid.goal();
        assert!(mdp.is_terminal(&g));
        for a in 0..4 {
            assert_eq!(mdp.row(g, a), &[(g, 1.0)]);
            assert_eq!(mdp.reward(g, a), 0.0);
        }
    }

    #[test]
    fn intended_move_frequency() {
        let grid = GridWorld::new(5);
        let mdp = grid.to_mdp().unwrap();
        let s = grid.state(2, 2);
        let mut rng = seeded_rng(3, 0);
        let n = 100_000;
        let hits = (0..n).filter(|_| mdp.sample(&s, EAST, &mut rng).next_state == grid.state(3, 2)).count();
        assert!((hits as f64 / n as f64 - 0.8).abs() < 0.005);
    }
}
