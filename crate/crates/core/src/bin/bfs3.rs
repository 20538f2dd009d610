use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bfs3_core::domains::Domain;
use bfs3_core::fsss::{fsss_estimate, FsssParams};
use bfs3_core::harness::{
    aggregate, resolve_domain, run_experiment, selftest::run_selftest, summary_csv, sweep, sweep_csv, write_csv,
    ExperimentConfig,
};
use bfs3_core::seeded_rng;

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

#[derive(Parser)]
#[command(name = "bfs3", version, about = "Bayesian forward search sparse sampling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run trials and write one CSV row per step.
    Run {
        #[command(flatten)]
        exp: ExpArgs,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write per-episode means to this file.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Vary one parameter and report mean return per value.
    Sweep {
        #[command(flatten)]
        exp: ExpArgs,
        /// One of t, d, C, N, M, gamma, alpha, beta.
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dump the FSSS tree built from the start state of a tabular domain.
    Tree {
        #[command(flatten)]
        exp: ExpArgs,
    },
    /// Oracle-equivalence and invariant checks; exits nonzero on failure.
    Selftest,
}

#[derive(Args)]
struct ExpArgs {
    #[arg(long, default_value = "grid5")]
    domain: String,
    #[arg(long, default_value = "bfs3")]
    agent: String,
    /// Search depth.
    #[arg(long = "d", default_value_t = 5)]
    depth: usize,
    /// Trajectories per search.
    #[arg(long = "t", default_value_t = 20)]
    trajectories: usize,
    /// Samples per action.
    #[arg(long = "C", default_value_t = 2)]
    width: usize,
    /// Knownness cap.
    #[arg(long = "N", default_value_t = 20)]
    cap: u32,
    #[arg(long)]
    gamma: Option<f64>,
    /// Per-state Dirichlet hyperparameter (default 1/S).
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    dp_alpha: f64,
    /// BEB bonus coefficient.
    #[arg(long, default_value_t = 2.5)]
    beta: f64,
    /// RMAX knownness threshold.
    #[arg(long = "M", default_value_t = 5)]
    known_threshold: u32,
    #[arg(long, default_value_t = 1)]
    runs: usize,
    #[arg(long, default_value_t = 1)]
    episodes: usize,
    /// Step cap per episode.
    #[arg(long, default_value_t = 200)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl From<ExpArgs> for ExperimentConfig {
    fn from(a: ExpArgs) -> Self {
        ExperimentConfig {
            domain: a.domain,
            agent: a.agent,
            depth: a.depth,
            trajectories: a.trajectories,
            width: a.width,
            cap: a.cap,
            gamma: a.gamma,
            alpha: a.alpha,
            dp_alpha: a.dp_alpha,
            beta: a.beta,
            known_threshold: a.known_threshold,
            runs: a.runs,
            episodes: a.episodes,
            steps: a.steps,
            seed: a.seed,
        }
    }
}

fn output(path: &Option<PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_metadata(out: &Option<PathBuf>, config: &ExperimentConfig) -> Result<(), Box<dyn std::error::Error>> {
    if let Some(path) = out {
        let meta = path.with_extension("json");
        std::fs::write(meta, serde_json::to_string_pretty(config)?)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    match try_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn try_main() -> Result<ExitCode, Box<dyn std::error::Error>> {
    match Cli::parse().command {
        Command::Run { exp, out, summary } => {
            let config = ExperimentConfig::from(exp);
            let records = run_experiment(&config)?;
            write_csv(&records, output(&out)?)?;
            write_metadata(&out, &config)?;
            let rows = aggregate(&records);
            if let Some(path) = summary {
                std::fs::write(path, summary_csv(&rows))?;
            }
            if out.is_some() {
                for r in &rows {
                    eprintln!(
                        "episode {:>3}: mean return {:.4} ± {:.4} over {} runs",
                        r.episode, r.mean_return, r.stderr, r.runs
                    );
                }
            }
        }
        Command::Sweep { exp, param, values, out } => {
            let config = ExperimentConfig::from(exp);
            let rows = sweep(&config, &param, &values)?;
            output(&out)?.write_all(sweep_csv(&rows).as_bytes())?;
            write_metadata(&out, &config)?;
        }
        Command::Tree { exp } => {
            let config = ExperimentConfig::from(exp);
            let Domain::Tabular(domain) = resolve_domain(&config)? else {
                return Err("tree dumps need a tabular domain".into());
            };
            let params = FsssParams::new(config.depth, config.trajectories, config.width)?;
            let mut rng = seeded_rng(config.seed, 0);
            let estimate = fsss_estimate(&domain.mdp, domain.start, params, &mut rng);
            print!("{}", estimate.tree.dump());
            eprintln!("value {} after {} queries", estimate.value, estimate.tree.query_count());
        }
        Command::Selftest => {
            let report = run_selftest();
            for line in report.lines() {
                println!("{line}");
            }
            if !report.all_passed() {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
