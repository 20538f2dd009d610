use std::collections::BTreeMap;

use crate::error::Result;

use super::{run_experiment, ExperimentConfig, TrialRecord};

/// Undiscounted return of one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeReturn {
    pub run: usize,
    pub episode: usize,
    pub steps: usize,
    pub total: f64,
}

/// Mean with its standard error (sample standard deviation over `sqrt(n)`;
/// zero for fewer than two values).
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

pub fn episode_returns(records: &[TrialRecord]) -> Vec<EpisodeReturn> {
    let mut out: Vec<EpisodeReturn> = Vec::new();
    for r in records {
        match out.last_mut() {
            Some(last) if last.run == r.run && last.episode == r.episode => {
                last.steps += 1;
                last.total += r.reward;
            }
            _ => out.push(EpisodeReturn { run: r.run, episode: r.episode, steps: 1, total: r.reward }),
        }
    }
    out
}

/// One row of the per-episode learning curve.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub episode: usize,
    pub runs: usize,
    pub mean_return: f64,
    pub stderr: f64,
    pub mean_steps: f64,
}

pub const SUMMARY_HEADER: &str = "episode,runs,mean_return,stderr,mean_steps";

/// Mean episode return across runs, per episode index, in episode order.
pub fn aggregate(records: &[TrialRecord]) -> Vec<SummaryRow> {
    let mut by_episode: BTreeMap<usize, Vec<&EpisodeReturn>> = BTreeMap::new();
    let returns = episode_returns(records);
    for r in &returns {
        by_episode.entry(r.episode).or_default().push(r);
    }
    by_episode
        .into_iter()
        .map(|(episode, rs)| {
            let totals: Vec<f64> = rs.iter().map(|r| r.total).collect();
            let (mean_return, stderr) = mean_stderr(&totals);
            let mean_steps = rs.iter().map(|r| r.steps as f64).sum::<f64>() / rs.len() as f64;
            SummaryRow { episode, runs: rs.len(), mean_return, stderr, mean_steps }
        })
        .collect()
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{},{}\n", r.episode, r.runs, r.mean_return, r.stderr, r.mean_steps));
    }
    out
}

/// Mean return over every episode of every run at one parameter value.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub param: String,
    pub value: f64,
    pub episodes: usize,
    pub mean_return: f64,
    pub stderr: f64,
}

pub const SWEEP_HEADER: &str = "param,value,episodes,mean_return,stderr";

/// Reruns `base` at every value of `param`; rows come back in ascending
/// value order.
pub fn sweep(base: &ExperimentConfig, param: &str, values: &[f64]) -> Result<Vec<SweepRow>> {
    let mut values = values.to_vec();
    values.sort_by(f64::total_cmp);
    let mut rows = Vec::with_capacity(values.len());
    for value in values {
        let mut config = base.clone();
        config.set_param(param, value)?;
        let returns = episode_returns(&run_experiment(&config)?);
        let totals: Vec<f64> = returns.iter().map(|r| r.total).collect();
        let (mean_return, stderr) = mean_stderr(&totals);
        rows.push(SweepRow { param: param.to_string(), value, episodes: totals.len(), mean_return, stderr });
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = format!("{SWEEP_HEADER}\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{},{}\n", r.param, r.value, r.episodes, r.mean_return, r.stderr));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(run: usize, episode: usize, step: usize, reward: f64) -> TrialRecord {
        TrialRecord {
            run,
            episode,
            step,
            state: 0,
            action: 0,
            reward,
            cum_reward: 0.0,
            queries: 0,
            cache_hit: false,
            discoveries: 0,
            wall_ms: 0.0,
        }
    }

    #[test]
    fn single_record() {
        let rows = aggregate(&[record(0, 0, 0, 3.0)]);
        assert_eq!(rows.len(), 1);
        assert_eq!((rows[0].mean_return, rows[0].stderr), (3.0, 0.0));
    }

    #[test]
    fn two_runs_zero_and_one() {
        let rows = aggregate(&[record(0, 0, 0, 0.0), record(1, 0, 0, 1.0)]);
        assert_eq!(rows[0].runs, 2);
        assert!((rows[0].mean_return - 0.5).abs() < 1e-15);
        assert!((rows[0].stderr - 0.5).abs() < 1e-15);
    }

    #[test]
    fn episodes_split_on_episode_index() {
        let records = [record(0, 0, 0, -1.0), record(0, 0, 1, -1.0), record(0, 1, 0, 2.0), record(1, 0, 0, -3.0)];
        let returns = episode_returns(&records);
        let totals: Vec<(usize, usize, f64)> = returns.iter().map(|r| (r.run, r.episode, r.total)).collect();
        assert_eq!(totals, vec![(0, 0, -2.0), (0, 1, 2.0), (1, 0, -3.0)]);
        let rows = aggregate(&records);
        assert_eq!(rows.iter().map(|r| r.episode).collect::<Vec<_>>(), vec![0, 1]);
    }

    #[test]
    fn sweep_rows_are_sorted() {
        let base = ExperimentConfig {
            domain: "random:3,2,0".into(),
            agent: "bfs3".into(),
            depth: 2,
            width: 1,
            steps: 5,
            runs: 2,
            ..Default::default()
        };
        let rows = sweep(&base, "t", &[4.0, 1.0, 2.0]).unwrap();
        assert_eq!(rows.iter().map(|r| r.value).collect::<Vec<_>>(), vec![1.0, 2.0, 4.0]);
        assert!(rows.iter().all(|r| r.episodes == 2));
        assert!(sweep(&base, "lr", &[1.0]).is_err());
    }
}
