//! Runs scenario episodes, producing a record and a scored row for each.
//!
//! Live rows are computed by [`score_record`] from the record just written,
//! so online and offline scoring cannot drift apart.

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::config::ScenarioConfig;
use crate::envs::socialnav::SocialNavEvent;
use crate::envs::{ExplorationAction, ExplorationEnv, MacsAction, MacsEnv, RobotCommand, SocialNavEnv};
use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::metrics::{SeatingPlan, SeatingProblem};
use crate::planners::policies::{nearest_paper_action, random_macs_actions, GreedyCoop};
use crate::planners::{Mppi, NavAgent, NavController};
use crate::record::{score_record, EpisodeRecord, RecordFooter, Recorder, Task};
use crate::report::{BenchmarkReport, EpisodeRow};
use crate::rng::{stream_rng, EnvSeed, SimRng};

/// Policy randomness uses streams above this offset so it never shares a
/// stream with an environment.
pub const POLICY_STREAM_BASE: u64 = 1 << 40;

pub fn env_seed(seed: u64, episode: u32) -> EnvSeed {
    EnvSeed::with_stream(seed, episode as u64)
}

pub fn policy_rng(seed: u64, episode: u32) -> SimRng {
    stream_rng(seed, POLICY_STREAM_BASE + episode as u64)
}

/// Builds the navigation agent named by the scenario.
pub fn nav_agent(cfg: &ScenarioConfig) -> Result<Option<NavAgent>> {
    let controller = match cfg.policy.name.as_str() {
        "dwa" => NavController::Dwa(cfg.policy_params()?),
        "mppi" => NavController::Mppi(Box::new(Mppi::new(cfg.policy_params()?)?)),
        "oracle" => NavController::Oracle(cfg.policy_params()?),
        "random" => NavController::Random,
        "noop" => return Ok(None),
        other => return Err(Error::Config(format!("unknown socialnav policy {other:?}"))),
    };
    Ok(Some(NavAgent::new(controller)))
}

/// Footer for a finished social-navigation episode.
pub fn socialnav_footer(env: &SocialNavEnv) -> Result<RecordFooter> {
    let ep = env.episode()?;
    let mut f = RecordFooter::new(env.steps(), env.clock());
    f.success = Some(ep.success);
    f.t_min = Some(ep.t_min);
    f.proxemics_samples = Some(env.proxemics_samples());
    Ok(f)
}

/// Steps `env` with `cmd`, logging the command and its events.
pub fn record_socialnav_step(env: &mut SocialNavEnv, rec: &mut Recorder, cmd: RobotCommand) -> Result<Vec<SocialNavEvent>> {
    let tick = env.steps() + 1;
    let applied = cmd.clamped(env.scenario().v_max, env.scenario().omega_max);
    rec.action(tick, &applied)?;
    let (_, events) = env.step_command(applied)?;
    for e in &events {
        rec.event(tick, e)?;
    }
    rec.frame(env, env.is_done());
    Ok(events)
}

fn run_socialnav(cfg: &ScenarioConfig, seed: u64, episode: u32) -> Result<EpisodeRecord> {
    let sc = cfg.socialnav_scenario();
    let mut env = SocialNavEnv::new(sc.clone())?;
    let mut obs = env.reset_with(Some(env_seed(seed, episode)))?;
    let mut rec = Recorder::new(Task::Socialnav, seed, episode, &cfg.policy.name, &sc, cfg.frame_every)?;
    rec.frame(&env, true);
    let mut agent = nav_agent(cfg)?;
    if let Some(a) = &mut agent {
        a.reset(&env)?;
    }
    let mut rng = policy_rng(seed, episode);
    while !env.is_done() {
        let cmd = match &mut agent {
            Some(a) => a.act(&env, &obs, &mut rng)?,
            None => RobotCommand::default(),
        };
        record_socialnav_step(&mut env, &mut rec, cmd)?;
        obs = env.observe();
    }
    let footer = socialnav_footer(&env)?;
    Ok(rec.finish(footer))
}

fn run_macs(cfg: &ScenarioConfig, seed: u64, episode: u32) -> Result<EpisodeRecord> {
    let mc = cfg.macs_config();
    let mut env = MacsEnv::new(mc.clone())?;
    let mut obs = env.reset_with(Some(env_seed(seed, episode)))?;
    let mut rec = Recorder::new(Task::Macs, seed, episode, &cfg.policy.name, &mc, cfg.frame_every)?;
    rec.frame(&env, true);
    let mut rng = policy_rng(seed, episode);
    let mut greedy = match cfg.policy.name.as_str() {
        "greedy" => Some(GreedyCoop::new(cfg.policy_params()?)),
        _ => None,
    };
    let mut returns = vec![0.0; mc.n_agents];
    while !env.is_done() {
        let actions: Vec<MacsAction> = match (&mut greedy, cfg.policy.name.as_str()) {
            (Some(g), _) => g.act(&env, &obs, &mut rng),
            (None, "noop") => vec![MacsAction::new(0.0, 0.0); mc.n_agents],
            _ => random_macs_actions(mc.n_agents, &mut rng),
        };
        let tick = env.steps() as u64 + 1;
        rec.action(tick, &actions)?;
        let (o, rewards, _) = env.step_agents(&actions)?;
        for e in &rewards.events {
            rec.event(tick, e)?;
        }
        for (r, a) in returns.iter_mut().zip(rewards.totals()) {
            *r += a;
        }
        rec.frame(&env, env.is_done());
        obs = o;
    }
    let mut footer = RecordFooter::new(env.steps() as u64, env.world().clock());
    footer.returns = Some(returns);
    Ok(rec.finish(footer))
}

fn random_exploration_action(env: &ExplorationEnv, rng: &mut SimRng) -> ExplorationAction {
    use rand::Rng;
    let b = env.occupancy().bounds();
    ExplorationAction::MoveTo {
        target: Vec2::new(rng.random_range(b.min.x..b.max.x), rng.random_range(b.min.y..b.max.y)),
    }
}

fn run_exploration(cfg: &ScenarioConfig, seed: u64, episode: u32) -> Result<EpisodeRecord> {
    let ec = cfg.exploration_config();
    let mut env = ExplorationEnv::new(ec.clone())?;
    env.reset_with(Some(env_seed(seed, episode)))?;
    let mut rec = Recorder::new(Task::Exploration, seed, episode, &cfg.policy.name, &ec, cfg.frame_every)?;
    rec.frame(&env, true);
    let mut rng = policy_rng(seed, episode);
    while !env.is_done() {
        let action = match cfg.policy.name.as_str() {
            "random" => random_exploration_action(&env, &mut rng),
            _ => nearest_paper_action(&env),
        };
        let tick = env.steps_used() as u64 + 1;
        rec.action(tick, &action)?;
        let (_, events) = env.step_action(action)?;
        for e in &events {
            rec.event(tick, e)?;
        }
        rec.frame(&env, env.is_done());
    }
    let outcome = env.episode_outcome()?;
    let mut footer = RecordFooter::new(outcome.steps as u64, outcome.steps as f64 * ec.dt);
    footer.success = Some(outcome.success);
    Ok(rec.finish(footer))
}

pub fn load_seating(cfg: &ScenarioConfig) -> Result<(SeatingProblem, Option<SeatingPlan>)> {
    let s = cfg
        .seating
        .as_ref()
        .ok_or_else(|| Error::Config("task seating needs a [seating] section".into()))?;
    let problem: SeatingProblem = serde_json::from_str(&std::fs::read_to_string(&s.problem)?)?;
    problem.validate()?;
    let plan = match &s.plan {
        Some(p) => Some(serde_json::from_str(&std::fs::read_to_string(p)?)?),
        None => None,
    };
    Ok((problem, plan))
}

/// Uniformly random assignment of guests to distinct seats.
pub fn random_plan(problem: &SeatingProblem, rng: &mut SimRng) -> Result<SeatingPlan> {
    if problem.guests.len() > problem.seats.len() {
        return Err(Error::InvalidPlan(format!(
            "{} guests but only {} seats",
            problem.guests.len(),
            problem.seats.len()
        )));
    }
    let mut seats: Vec<&str> = problem.seats.iter().map(|s| s.id.as_str()).collect();
    seats.shuffle(rng);
    Ok(SeatingPlan {
        assignment: problem.guests.iter().cloned().zip(seats.into_iter().map(String::from)).collect(),
    })
}

fn run_seating(cfg: &ScenarioConfig, problem: &SeatingProblem, file_plan: Option<&SeatingPlan>, seed: u64, episode: u32) -> Result<EpisodeRecord> {
    let plan = match file_plan {
        Some(p) if cfg.policy.name == "file" => p.clone(),
        _ => random_plan(problem, &mut policy_rng(seed, episode))?,
    };
    let mut rec = Recorder::new(Task::Seating, seed, episode, &cfg.policy.name, problem, 0)?;
    rec.action(1, &plan)?;
    Ok(rec.finish(RecordFooter::new(1, 0.0)))
}

/// Runs one `(seed, episode)` of the scenario.
pub fn run_episode(cfg: &ScenarioConfig, seed: u64, episode: u32) -> Result<EpisodeRecord> {
    match cfg.task {
        Task::Socialnav => run_socialnav(cfg, seed, episode),
        Task::Macs => run_macs(cfg, seed, episode),
        Task::Exploration => run_exploration(cfg, seed, episode),
        Task::Seating => {
            let (problem, plan) = load_seating(cfg)?;
            run_seating(cfg, &problem, plan.as_ref(), seed, episode)
        }
    }
}

/// Every episode of the scenario, in seed-then-episode order. Episodes run
/// concurrently; each is deterministic on its own, so the order and content
/// of the output do not depend on scheduling.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<(BenchmarkReport, Vec<EpisodeRecord>)> {
    cfg.validate()?;
    let keys = cfg.episode_keys();
    let records: Vec<EpisodeRecord> = if cfg.task == Task::Seating {
        let (problem, plan) = load_seating(cfg)?;
        keys.iter()
            .map(|&(s, e)| run_seating(cfg, &problem, plan.as_ref(), s, e))
            .collect::<Result<_>>()?
    } else {
        keys.par_iter()
            .map(|&(s, e)| run_episode(cfg, s, e))
            .collect::<Result<_>>()?
    };
    let rows = score_records(&records)?;
    let scenario = serde_json::to_value(cfg.resolved())?;
    Ok((BenchmarkReport::new(cfg.task, scenario, rows)?, records))
}

pub fn score_records(records: &[EpisodeRecord]) -> Result<Vec<EpisodeRow>> {
    records.iter().map(score_record).collect()
}

/// Re-simulates a record from its header seed and logged actions and
/// returns the regenerated record, frames excluded.
pub fn replay(rec: &EpisodeRecord) -> Result<EpisodeRecord> {
    let h = &rec.header;
    let seed = env_seed(h.seed, h.episode);
    let mut out = match h.task {
        Task::Socialnav => {
            let sc = rec.config()?;
            let mut env = SocialNavEnv::new(sc)?;
            env.reset_with(Some(seed))?;
            let mut r = Recorder::new(Task::Socialnav, h.seed, h.episode, &h.policy, env.scenario(), 0)?;
            for (_, cmd) in rec.actions::<RobotCommand>()? {
                if env.is_done() {
                    return Err(Error::RecordCheck("actions continue after the episode ended".into()));
                }
                record_socialnav_step(&mut env, &mut r, cmd)?;
            }
            if !env.is_done() {
                // Sessions may end early; a live abort is the only other ending.
                for e in env.abort() {
                    r.event(env.steps(), &e)?;
                }
            }
            r.finish(socialnav_footer(&env)?)
        }
        Task::Macs => {
            let mc: crate::envs::MacsConfig = rec.config()?;
            let mut env = MacsEnv::new(mc.clone())?;
            env.reset_with(Some(seed))?;
            let mut r = Recorder::new(Task::Macs, h.seed, h.episode, &h.policy, &mc, 0)?;
            let mut returns = vec![0.0; mc.n_agents];
            for (tick, acts) in rec.actions::<Vec<MacsAction>>()? {
                r.action(tick, &acts)?;
                let (_, rewards, _) = env.step_agents(&acts)?;
                for e in &rewards.events {
                    r.event(tick, e)?;
                }
                for (x, a) in returns.iter_mut().zip(rewards.totals()) {
                    *x += a;
                }
            }
            let mut footer = RecordFooter::new(env.steps() as u64, env.world().clock());
            footer.returns = Some(returns);
            r.finish(footer)
        }
        Task::Exploration => {
            let ec: crate::envs::ExplorationConfig = rec.config()?;
            let mut env = ExplorationEnv::new(ec.clone())?;
            env.reset_with(Some(seed))?;
            let mut r = Recorder::new(Task::Exploration, h.seed, h.episode, &h.policy, &ec, 0)?;
            for (tick, a) in rec.actions::<ExplorationAction>()? {
                r.action(tick, &a)?;
                let (_, events) = env.step_action(a)?;
                for e in &events {
                    r.event(tick, e)?;
                }
            }
            let outcome = env.episode_outcome()?;
            let mut footer = RecordFooter::new(outcome.steps as u64, outcome.steps as f64 * ec.dt);
            footer.success = Some(outcome.success);
            r.finish(footer)
        }
        Task::Seating => rec.clone(),
    };
    out.header = rec.header.clone();
    Ok(out)
}

/// Replays `rec` and checks that actions, events and footer reproduce.
pub fn verify_replay(rec: &EpisodeRecord) -> Result<()> {
    let again = replay(rec)?;
    let strip = |r: &EpisodeRecord| {
        r.body
            .iter()
            .filter(|l| !matches!(l, crate::record::RecordLine::Frame(_)))
            .cloned()
            .collect::<Vec<_>>()
    };
    let (a, b) = (strip(rec), strip(&again));
    if let Some(i) = (0..a.len().max(b.len())).find(|&i| a.get(i) != b.get(i)) {
        return Err(Error::RecordCheck(format!(
            "replay diverges at line {} of the record body: recorded {:?}, replayed {:?}",
            i + 1,
            a.get(i),
            b.get(i)
        )));
    }
    if rec.footer != again.footer {
        return Err(Error::RecordCheck(format!(
            "replayed footer {:?} differs from recorded {:?}",
            again.footer, rec.footer
        )));
    }
    Ok(())
}
