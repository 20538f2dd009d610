//! Capped transition-count histograms plus first-observed rewards.

use std::fmt::Write as _;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::mdp::{ActionId, StateId};
use crate::util::mix64;

/// Default knownness cap `N`.
pub const DEFAULT_CAP: u32 = 20;

/// Observations for one state-action pair.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PairStats {
    /// `(next_state, count)`, sorted by next state, counts > 0.
    histogram: Vec<(StateId, u32)>,
    total: u32,
    reward_bits: u64,
}

impl PairStats {
    pub fn histogram(&self) -> &[(StateId, u32)] {
        &self.histogram
    }

    pub fn total(&self) -> u32 {
        self.total
    }

    pub fn reward(&self) -> f64 {
        f64::from_bits(self.reward_bits)
    }

    pub fn count(&self, next: StateId) -> u32 {
        match self.histogram.binary_search_by_key(&next, |&(s, _)| s) {
            Ok(i) => self.histogram[i].1,
            Err(_) => 0,
        }
    }
}

/// Sufficient statistic of a history: per-pair next-state histograms capped
/// at `N` samples, the first reward seen for each pair, and the multiset of
/// distinct reward values (one entry per pinned pair).
///
/// Values are immutable; [`SuffStats::update`] returns a new statistic that
/// shares all untouched pairs with the old one.
#[derive(Debug, Clone)]
pub struct SuffStats {
    num_states: usize,
    num_actions: usize,
    cap: u32,
    pairs: Pairs,
    /// Distinct pinned reward values with the number of pairs pinned to each,
    /// sorted by value.
    reward_tables: Arc<Vec<(f64, u32)>>,
    discoveries: u64,
    digest: u64,
}

impl SuffStats {
    pub fn new(num_states: usize, num_actions: usize, cap: u32) -> Self {
        Self {
            num_states,
            num_actions,
            cap,
            pairs: Pairs::default(),
            reward_tables: Arc::new(Vec::new()),
            discoveries: 0,
            digest: mix64(((num_states as u64) << 32) ^ ((num_actions as u64) << 8) ^ cap as u64),
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn cap(&self) -> u32 {
        self.cap
    }

    /// Number of updates that changed the statistic, at most `N * S * A`.
    pub fn discoveries(&self) -> u64 {
        self.discoveries
    }

    pub fn pair(&self, s: StateId, a: ActionId) -> Option<&PairStats> {
        self.pairs.get(s * self.num_actions + a)
    }

    pub fn count(&self, s: StateId, a: ActionId, next: StateId) -> u32 {
        self.pair(s, a).map_or(0, |p| p.count(next))
    }

    pub fn total(&self, s: StateId, a: ActionId) -> u32 {
        self.pair(s, a).map_or(0, |p| p.total)
    }

    pub fn is_saturated(&self, s: StateId, a: ActionId) -> bool {
        self.total(s, a) >= self.cap
    }

    /// Reward pinned to `(s, a)` by its first observation.
    pub fn reward(&self, s: StateId, a: ActionId) -> Option<f64> {
        self.pair(s, a).map(|p| p.reward())
    }

    /// Distinct pinned rewards and how many pairs carry each.
    pub fn reward_tables(&self) -> &[(f64, u32)] {
        &self.reward_tables
    }

    /// Observed pairs as `(s, a, stats)` in index order.
    pub fn observed(&self) -> impl Iterator<Item = (StateId, ActionId, &PairStats)> + '_ {
        self.pairs
            .sorted()
            .into_iter()
            .map(move |(i, p)| (i / self.num_actions, i % self.num_actions, p))
    }

    /// Records `s, a -> next` with reward `r`. Pairs that already hold `N`
    /// samples forget the observation and the statistic comes back unchanged.
    pub fn update(&self, s: StateId, a: ActionId, next: StateId, r: f64) -> SuffStats {
        debug_assert!(s < self.num_states && a < self.num_actions && next < self.num_states);
        let key = s * self.num_actions + a;
        let existing = self.pairs.get(key);
        if existing.map_or(0, |p| p.total) >= self.cap {
            return self.clone();
        }
        let mut out = self.clone();
        let pair = match existing {
            Some(p) => {
                let mut p = p.clone();
                let old = p.count(next);
                if old > 0 {
                    out.digest = out.digest.wrapping_sub(count_term(key, next, old));
                }
                match p.histogram.binary_search_by_key(&next, |&(t, _)| t) {
                    Ok(i) => p.histogram[i].1 += 1,
                    Err(i) => p.histogram.insert(i, (next, 1)),
                }
                p.total += 1;
                out.digest = out.digest.wrapping_add(count_term(key, next, old + 1));
                p
            }
            None => {
                let r = if r == 0.0 { 0.0 } else { r }; // fold -0.0
                out.digest = out
                    .digest
                    .wrapping_add(count_term(key, next, 1))
                    .wrapping_add(reward_term(key, r.to_bits()));
                let mut tables = (*out.reward_tables).clone();
                match tables.binary_search_by(|(v, _)| v.total_cmp(&r)) {
                    Ok(i) => tables[i].1 += 1,
                    Err(i) => tables.insert(i, (r, 1)),
                }
                out.reward_tables = Arc::new(tables);
                PairStats { histogram: vec![(next, 1)], total: 1, reward_bits: r.to_bits() }
            }
        };
        out.pairs = out.pairs.with(key, pair);
        out.discoveries += 1;
        out
    }

    /// Text form: header `S A N`, then one line per observed pair,
    /// `s a r_obs n_0 n_1 ... n_{S-1}`.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {} {}\n", self.num_states, self.num_actions, self.cap);
        for (s, a, p) in self.observed() {
            let _ = write!(out, "{s} {a} {}", p.reward());
            let mut dense = vec![0u32; self.num_states];
            for &(t, n) in &p.histogram {
                dense[t] = n;
            }
            for n in dense {
                let _ = write!(out, " {n}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let parse_err = |line: usize, msg: &str| Error::Parse { line, msg: msg.to_string() };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| parse_err(1, "missing header"))?;
        let header: Vec<&str> = header.split_whitespace().collect();
        if header.len() != 3 {
            return Err(parse_err(1, "header must be `S A N`"));
        }
        let num_states: usize = header[0].parse().map_err(|_| parse_err(1, "bad S"))?;
        let num_actions: usize = header[1].parse().map_err(|_| parse_err(1, "bad A"))?;
        let cap: u32 = header[2].parse().map_err(|_| parse_err(1, "bad N"))?;
        let mut stats = SuffStats::new(num_states, num_actions, cap);
        for (i, line) in lines {
            let line_no = i + 1;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 + num_states {
                return Err(parse_err(line_no, "expected `s a r n_0 .. n_{S-1}`"));
            }
            let s: usize = fields[0].parse().map_err(|_| parse_err(line_no, "bad state"))?;
            let a: usize = fields[1].parse().map_err(|_| parse_err(line_no, "bad action"))?;
            let r: f64 = fields[2].parse().map_err(|_| parse_err(line_no, "bad reward"))?;
            if s >= num_states || a >= num_actions || stats.pair(s, a).is_some() {
                return Err(parse_err(line_no, "pair out of range or repeated"));
            }
            let mut total = 0u64;
            for (next, f) in fields[3..].iter().enumerate() {
                let n: u32 = f.parse().map_err(|_| parse_err(line_no, "bad count"))?;
                total += n as u64;
                for _ in 0..n {
                    stats = stats.update(s, a, next, r);
                }
            }
            if total == 0 || total > cap as u64 {
                return Err(parse_err(line_no, "histogram must hold between 1 and N samples"));
            }
        }
        Ok(stats)
    }
}

fn count_term(key: usize, next: StateId, count: u32) -> u64 {
    mix64(mix64(key as u64) ^ (next as u64).rotate_left(24) ^ (count as u64).rotate_left(48))
}

fn reward_term(key: usize, bits: u64) -> u64 {
    mix64(mix64(!(key as u64)) ^ bits)
}

impl PartialEq for SuffStats {
    fn eq(&self, other: &Self) -> bool {
        self.digest == other.digest
            && self.num_states == other.num_states
            && self.num_actions == other.num_actions
            && self.cap == other.cap
            && self.discoveries == other.discoveries
            && self.pairs.same_as(&other.pairs)
    }
}

/// Pair map tuned for search: a shared base plus a short persistent list of
/// recent changes, so an update allocates one list node instead of copying a
/// map. The list is folded into a fresh base once it grows long.
#[derive(Debug, Clone, Default)]
struct Pairs {
    base: Arc<FxHashMap<usize, Arc<PairStats>>>,
    /// Newest first; a key shadows its older entries and the base.
    delta: Option<Arc<Delta>>,
}

#[derive(Debug)]
struct Delta {
    key: usize,
    pair: Arc<PairStats>,
    len: usize,
    next: Option<Arc<Delta>>,
}

const MAX_DELTA: usize = 32;

impl Pairs {
    fn changes(&self) -> impl Iterator<Item = &Delta> {
        std::iter::successors(self.delta.as_deref(), |d| d.next.as_deref())
    }

    fn get(&self, key: usize) -> Option<&PairStats> {
        match self.changes().find(|d| d.key == key) {
            Some(d) => Some(&d.pair),
            None => self.base.get(&key).map(|p| &**p),
        }
    }

    fn with(&self, key: usize, pair: PairStats) -> Pairs {
        let len = self.delta.as_ref().map_or(0, |d| d.len);
        if len >= MAX_DELTA {
            let mut base = (*self.base).clone();
            let mut changes: Vec<&Delta> = self.changes().collect();
            changes.reverse();
            for d in changes {
                base.insert(d.key, Arc::clone(&d.pair));
            }
            base.insert(key, Arc::new(pair));
            return Pairs { base: Arc::new(base), delta: None };
        }
        let node = Delta { key, pair: Arc::new(pair), len: len + 1, next: self.delta.clone() };
        Pairs { base: Arc::clone(&self.base), delta: Some(Arc::new(node)) }
    }

    /// Effective delta entries, one per key.
    fn latest(&self) -> Vec<(usize, &PairStats)> {
        let mut out: Vec<(usize, &PairStats)> = Vec::new();
        for d in self.changes() {
            if !out.iter().any(|&(k, _)| k == d.key) {
                out.push((d.key, &d.pair));
            }
        }
        out
    }

    fn sorted(&self) -> Vec<(usize, &PairStats)> {
        let latest = self.latest();
        let mut all: Vec<(usize, &PairStats)> = self
            .base
            .iter()
            .filter(|(k, _)| !latest.iter().any(|(d, _)| d == *k))
            .map(|(&k, p)| (k, &**p))
            .collect();
        all.extend(latest);
        all.sort_unstable_by_key(|&(k, _)| k);
        all
    }

    fn same_as(&self, other: &Pairs) -> bool {
        if Arc::ptr_eq(&self.base, &other.base) {
            // Every change differs from the shared base, so equal statistics
            // have equal change sets.
            let (mine, theirs) = (self.latest(), other.latest());
            return mine.len() == theirs.len()
                && mine.iter().all(|(k, p)| theirs.iter().any(|(j, q)| j == k && (std::ptr::eq(*p, *q) || p == q)));
        }
        self.sorted() == other.sorted()
    }
}

impl Eq for SuffStats {}

impl Hash for SuffStats {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.digest);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::hash_map::DefaultHasher;

    fn hash_of(s: &SuffStats) -> u64 {
        let mut h = DefaultHasher::new();
        s.hash(&mut h);
        h.finish()
    }

    #[test]
    fn first_observation_pins_reward_and_counts_a_discovery() {
        let stats = SuffStats::new(3, 2, 4);
        let next = stats.update(1, 0, 2, -1.0);
        assert_eq!(next.count(1, 0, 2), 1);
        assert_eq!(next.total(1, 0), 1);
        assert_eq!(next.discoveries(), 1);
        assert_eq!(next.reward(1, 0), Some(-1.0));
        let again = next.update(1, 0, 0, 5.0);
        assert_eq!(again.reward(1, 0), Some(-1.0));
        assert_eq!(again.reward_tables(), &[(-1.0, 1)]);
    }

    #[test]
    fn saturated_pairs_forget() {
        let mut stats = SuffStats::new(2, 1, 2);
        stats = stats.update(0, 0, 1, 0.0).update(0, 0, 1, 0.0);
        let after = stats.update(0, 0, 0, 0.0);
        assert_eq!(after, stats);
        assert_eq!(after.discoveries(), 2);
        assert!(after.is_saturated(0, 0));
    }

    #[test]
    fn equality_and_hash_ignore_observation_order() {
        let base = SuffStats::new(4, 2, 10);
        let x = base.update(0, 1, 2, 0.5).update(3, 0, 1, -1.0).update(0, 1, 3, 0.5);
        let y = base.update(3, 0, 1, -1.0).update(0, 1, 3, 0.5).update(0, 1, 2, 0.5);
        assert_eq!(x, y);
        assert_eq!(hash_of(&x), hash_of(&y));
        let z = base.update(0, 1, 2, 0.5).update(3, 0, 1, -1.0).update(0, 1, 2, 0.5);
        assert_ne!(x, z);
    }

    #[test]
    fn zero_cap_never_changes() {
        let stats = SuffStats::new(2, 2, 0);
        assert_eq!(stats.update(0, 0, 1, 1.0), stats);
        assert_eq!(stats.update(0, 0, 1, 1.0).discoveries(), 0);
    }

    #[test]
    fn text_round_trip() {
        let stats = SuffStats::new(3, 2, 5).update(0, 1, 2, 0.25).update(0, 1, 2, 0.25).update(2, 0, 0, -1.0);
        let text = stats.to_text();
        assert_eq!(text, "3 2 5\n0 1 0.25 0 0 2\n2 0 -1 1 0 0\n");
        assert_eq!(SuffStats::from_text(&text).unwrap(), stats);
        assert!(SuffStats::from_text("3 2 1\n0 1 0.25 0 0 2\n").is_err());
    }

    #[test]
    fn long_histories_compare_equal_however_they_were_built() {
        let base = SuffStats::new(10, 10, 3);
        let mut forward = base.clone();
        let mut backward = base.clone();
        for k in 0..100 {
            forward = forward.update(k / 10, k % 10, k % 7, 0.0);
            backward = backward.update((99 - k) / 10, (99 - k) % 10, (99 - k) % 7, 0.0);
        }
        assert_eq!(forward, backward);
        assert_eq!(hash_of(&forward), hash_of(&backward));
        assert_eq!(forward.observed().count(), 100);
        assert_eq!(forward.to_text(), backward.to_text());
        assert_ne!(forward.update(3, 3, 0, 0.0), backward);
    }
}
