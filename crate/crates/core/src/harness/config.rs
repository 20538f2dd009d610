use serde::{Deserialize, Serialize};

use crate::agents::{DEFAULT_BETA, DEFAULT_KNOWN_THRESHOLD};
use crate::error::{Error, Result};
use crate::fsss::FsssParams;
use crate::priors::DEFAULT_CAP;

/// Everything that determines an experiment; equal configs give equal CSVs
/// (apart from timings).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub domain: String,
    pub agent: String,
    /// Search depth `d`.
    pub depth: usize,
    /// Trajectories per search `t`.
    pub trajectories: usize,
    /// Samples per action `C`.
    pub width: usize,
    /// Knownness cap `N`.
    pub cap: u32,
    /// Overrides the domain's discount.
    pub gamma: Option<f64>,
    /// Per-state Dirichlet hyperparameter; defaults to `1 / S` (total mass 1).
    pub alpha: Option<f64>,
    /// DP reward-prior concentration.
    pub dp_alpha: f64,
    /// BEB bonus coefficient.
    pub beta: f64,
    /// RMAX knownness threshold `M`.
    pub known_threshold: u32,
    pub runs: usize,
    pub episodes: usize,
    /// Step cap per episode.
    pub steps: usize,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            domain: "grid5".into(),
            agent: "bfs3".into(),
            depth: 5,
            trajectories: 20,
            width: 2,
            cap: DEFAULT_CAP,
            gamma: None,
            alpha: None,
            dp_alpha: 1.0,
            beta: DEFAULT_BETA,
            known_threshold: DEFAULT_KNOWN_THRESHOLD,
            runs: 1,
            episodes: 1,
            steps: 200,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn fsss_params(&self) -> Result<FsssParams> {
        FsssParams::new(self.depth, self.trajectories, self.width)
    }

    /// Sets a sweepable parameter by its CLI name.
    pub fn set_param(&mut self, param: &str, value: f64) -> Result<()> {
        let count = |v: f64| -> Result<usize> {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::InvalidParameter(format!("{param} must be a whole number, got {v}")))
            }
        };
        match param {
            "t" => self.trajectories = count(value)?,
            "d" => self.depth = count(value)?,
            "C" => self.width = count(value)?,
            "N" => self.cap = count(value)? as u32,
            "M" => self.known_threshold = count(value)? as u32,
            "gamma" => self.gamma = Some(value),
            "alpha" => self.alpha = Some(value),
            "beta" => self.beta = value,
            _ => {
                return Err(Error::Unknown {
                    kind: "sweep parameter",
                    name: param.to_string(),
                    available: "t, d, C, N, M, gamma, alpha, beta".into(),
                })
            }
        }
        Ok(())
    }
}
