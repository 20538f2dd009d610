use crate::error::{Error, Result};
use crate::mdp::TabularMdp;

/// Combination lock of length `n` with two buttons.
///
/// State `i` means `i` digits are entered correctly. The right button (always
/// action 1) advances, the wrong one resets to 0. Entering the last digit
/// pays 1 and opens the lock (state `n`, terminal). The only reward is `n`
/// steps deep, so any horizon shorter than `n` values every state at 0.
pub fn combination_lock(n: usize, gamma: f64) -> Result<TabularMdp> {
    if n == 0 {
        return Err(Error::InvalidParameter("lock needs at least one digit".into()));
    }
    let states = n + 1;
    let mut rows = Vec::with_capacity(states * 2);
    let mut rewards = Vec::with_capacity(states * 2);
    for s in 0..states {
        rows.push(vec![(0, 1.0)]);
        rewards.push(0.0);
        rows.push(vec![((s + 1).min(n), 1.0)]);
        rewards.push(if s + 1 == n { 1.0 } else { 0.0 });
    }
    TabularMdp::new(states, 2, rows, rewards, gamma, &[n], (0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fsss::{fsss_estimate_with, FsssOptions, FsssParams};
    use crate::util::seeded_rng;

    #[test]
    fn short_horizons_cannot_see_the_reward() {
        let lock = combination_lock(6, 0.95).unwrap();
        let mut rng = seeded_rng(0, 0);
        let options = FsssOptions::default();
        let short = fsss_estimate_with(&lock, 0, FsssParams::new(5, 64, 1).unwrap(), options, &mut rng);
        assert_eq!((short.tree.root().upper, short.tree.root().lower), (0.0, 0.0));
        let full = fsss_estimate_with(&lock, 0, FsssParams::new(6, 64, 1).unwrap(), options, &mut rng);
        assert!(full.tree.root().is_closed());
        assert!((full.value - 0.95f64.powi(5)).abs() < 1e-12);
        assert_eq!(full.tree.best_action(options.action_rule).unwrap(), 1);
    }
}
