use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;

use crate::agents::{Agent, BebAgent, Bfs3Agent, FsssAgent, RandomAgent, RmaxAgent};
use crate::domains::{parse_domain, Domain, Environment, TabularDomain, TabularEnv, WumpusEnv, WumpusObs, WumpusPrior, WumpusWorld};
use crate::error::{Error, Result};
use crate::mdp::{GenerativeMdp, StateId};
use crate::priors::{DomainSpec, DpRewardPrior, FactoredObjectPrior, FdmPrior, PointMassPrior};
use crate::util::seeded_rng;

use super::ExperimentConfig;

/// Bit-exact CSV header.
pub const CSV_HEADER: &str = "run,step,state,action,reward,cum_reward,queries,cache_hit,discoveries,wall_ms";

pub const TABULAR_AGENTS: &[&str] =
    &["bfs3", "bfs3-fdm", "bfs3-fdm-dp", "bfs3-factored", "bfs3-pointmass", "fsss", "rmax", "beb", "random"];
pub const WUMPUS_AGENTS: &[&str] = &["bfs3", "random"];

/// One executed step.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub run: usize,
    /// Episode within the run; not part of the CSV, where it shows as
    /// `step` restarting at 0.
    pub episode: usize,
    /// Step within the episode.
    pub step: usize,
    pub state: u64,
    pub action: usize,
    pub reward: f64,
    /// Prefix sum of `reward` over the whole run.
    pub cum_reward: f64,
    pub queries: u64,
    pub cache_hit: bool,
    pub discoveries: u64,
    pub wall_ms: f64,
}

/// Runs every episode of one run with one agent.
pub fn run_trial<E, A>(env: &mut E, agent: &mut A, run: usize, episodes: usize, steps: usize, seed: u64) -> Result<Vec<TrialRecord>>
where
    E: Environment,
    A: Agent<E::State> + ?Sized,
{
    let mut env_rng = seeded_rng(seed, 0);
    let mut agent_rng = seeded_rng(seed, 1);
    let mut records = Vec::new();
    let mut cum_reward = 0.0;
    for episode in 0..episodes {
        let mut state = env.reset(&mut env_rng);
        agent.begin_episode(&state);
        for step in 0..steps {
            let started = Instant::now();
            let action = agent.act(&state, &mut agent_rng);
            let wall_ms = started.elapsed().as_secs_f64() * 1e3;
            let decision = agent.last_decision();
            let out = env.step(action, &mut env_rng)?;
            agent.observe(&state, action, &out.state, out.reward);
            cum_reward += out.reward;
            records.push(TrialRecord {
                run,
                episode,
                step,
                state: env.encode(&state),
                action,
                reward: out.reward,
                cum_reward,
                queries: decision.queries,
                cache_hit: decision.cache_hit,
                discoveries: agent.discoveries(),
                wall_ms,
            });
            state = out.state;
            if out.done {
                break;
            }
        }
    }
    Ok(records)
}

fn unknown_agent(config: &ExperimentConfig, available: &[&str]) -> Error {
    Error::Unknown { kind: "agent", name: config.agent.clone(), available: available.join(", ") }
}

/// Builds the agent named in `config` for a tabular domain.
pub fn tabular_agent(config: &ExperimentConfig, domain: &TabularDomain) -> Result<Box<dyn Agent<StateId>>> {
    let mdp = &domain.mdp;
    let spec = DomainSpec::of(mdp);
    let alpha = config.alpha.unwrap_or(1.0 / mdp.num_states() as f64);
    let agent: Box<dyn Agent<StateId>> = match config.agent.as_str() {
        "bfs3" | "bfs3-fdm" => {
            let prior = FdmPrior::for_mdp(mdp, alpha, config.cap, None)?;
            Box::new(Bfs3Agent::new(prior, config.fsss_params()?).named(config.agent.clone()))
        }
        "bfs3-fdm-dp" => {
            let (r_min, r_max) = spec.reward_bounds;
            let dp = DpRewardPrior::new(config.dp_alpha, r_min, r_max)?;
            let prior = FdmPrior::for_mdp(mdp, alpha, config.cap, Some(dp))?;
            Box::new(Bfs3Agent::new(prior, config.fsss_params()?).named("bfs3-fdm-dp"))
        }
        "bfs3-factored" => {
            let pp = domain.paint_polish.clone().ok_or_else(|| {
                Error::InvalidParameter("bfs3-factored needs an object-structured domain (paintpolish:N)".into())
            })?;
            let mut pp = pp;
            if let Some(g) = config.gamma {
                pp.gamma = g;
            }
            let local_alpha = config.alpha.unwrap_or(1.0 / 16.0);
            let prior = FactoredObjectPrior::new(pp, local_alpha, config.cap)?;
            Box::new(Bfs3Agent::new(prior, config.fsss_params()?).named("bfs3-factored"))
        }
        "bfs3-pointmass" => {
            Box::new(Bfs3Agent::new(PointMassPrior::new(mdp.clone()), config.fsss_params()?).named("bfs3-pointmass"))
        }
        "fsss" => Box::new(FsssAgent::new(mdp.clone(), config.fsss_params()?)),
        "rmax" => Box::new(RmaxAgent::new(spec, config.known_threshold)?),
        "beb" => Box::new(BebAgent::new(spec, mdp.rewards().to_vec(), config.beta)?),
        "random" => Box::new(RandomAgent::new(mdp.num_actions())),
        _ => return Err(unknown_agent(config, TABULAR_AGENTS)),
    };
    Ok(agent)
}

/// Builds the agent named in `config` for Wumpus World.
pub fn wumpus_agent(config: &ExperimentConfig, world: &WumpusWorld) -> Result<Box<dyn Agent<WumpusObs>>> {
    let agent: Box<dyn Agent<WumpusObs>> = match config.agent.as_str() {
        "bfs3" => {
            let prior = WumpusPrior::new(world.clone());
            Box::new(Bfs3Agent::new(prior, config.fsss_params()?).episodic(true))
        }
        "random" => Box::new(RandomAgent::new(WumpusWorld::NUM_ACTIONS)),
        _ => return Err(unknown_agent(config, WUMPUS_AGENTS)),
    };
    Ok(agent)
}

/// Resolves the domain in `config`, applying the discount override.
pub fn resolve_domain(config: &ExperimentConfig) -> Result<Domain> {
    let mut domain = parse_domain(&config.domain)?;
    if let Some(gamma) = config.gamma {
        match &mut domain {
            Domain::Tabular(d) => {
                d.mdp = d.mdp.clone().with_discount(gamma)?;
                if let Some(pp) = &mut d.paint_polish {
                    pp.gamma = gamma;
                }
            }
            Domain::Wumpus(w) => w.gamma = gamma,
        }
    }
    Ok(domain)
}

/// Runs `config.runs` independent runs (in parallel) and returns their
/// records in run order. Run `i` is seeded with `seed + i`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    let domain = resolve_domain(config)?;
    // Fail on bad names before spawning work.
    match &domain {
        Domain::Tabular(d) => drop(tabular_agent(config, d)?),
        Domain::Wumpus(w) => drop(wumpus_agent(config, w)?),
    }
    let per_run: Vec<Result<Vec<TrialRecord>>> = (0..config.runs)
        .into_par_iter()
        .map(|run| {
            let seed = config.seed.wrapping_add(run as u64);
            match &domain {
                Domain::Tabular(d) => {
                    let mut env = TabularEnv::new(d.mdp.clone(), d.start)?;
                    let mut agent = tabular_agent(config, d)?;
                    run_trial(&mut env, &mut agent, run, config.episodes, config.steps, seed)
                }
                Domain::Wumpus(w) => {
                    let mut env = WumpusEnv::new(w.clone());
                    let mut agent = wumpus_agent(config, w)?;
                    run_trial(&mut env, &mut agent, run, config.episodes, config.steps, seed)
                }
            }
        })
        .collect();
    let mut records = Vec::new();
    for run in per_run {
        records.extend(run?);
    }
    Ok(records)
}

fn row(r: &TrialRecord) -> [String; 10] {
    [
        r.run.to_string(),
        r.step.to_string(),
        r.state.to_string(),
        r.action.to_string(),
        r.reward.to_string(),
        r.cum_reward.to_string(),
        r.queries.to_string(),
        u8::from(r.cache_hit).to_string(),
        r.discoveries.to_string(),
        format!("{:.3}", r.wall_ms),
    ]
}

pub fn write_csv<W: Write>(records: &[TrialRecord], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(CSV_HEADER.split(','))?;
    for r in records {
        writer.write_record(row(r))?;
    }
    writer.flush()?;
    Ok(())
}

pub fn to_csv_string(records: &[TrialRecord]) -> String {
    let mut buf = Vec::new();
    write_csv(records, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("CSV is ASCII")
}

/// The CSV with the `wall_ms` column dropped, for byte comparisons.
pub fn strip_wall_ms(csv: &str) -> String {
    csv.lines()
        .map(|line| line.rsplit_once(',').map_or(line, |(head, _)| head))
        .collect::<Vec<_>>()
        .join("\n")
}
