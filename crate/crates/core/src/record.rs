//! Episode records: the JSON-lines trajectory and event log every metric
//! can be recomputed from.
//!
//! A record is a `header` line, then `action`, `event` and `frame` lines in
//! tick order, then a `footer`. Files may hold many records back to back.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::envs::macs::{RewardEvent, RewardKind};
use crate::envs::socialnav::{IntrusionType, SocialNavEvent};
use crate::envs::{
    ExplorationAction, ExplorationConfig, ExplorationEnv, MacsAction, MacsConfig, MacsEnv, RobotCommand, SocialNavEnv,
    SocialNavScenario,
};
use crate::envs::exploration::ExplorationEvent;
use crate::error::{Error, Result};
use crate::metrics::{score_seating, SeatingPlan, SeatingProblem};
use crate::report::EpisodeRow;
use crate::sim::{Body, EntityClass};

pub const SCHEMA_VERSION: u32 = 1;

/// Credits of one event must sum to its value within this.
pub const CONSERVATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Exploration,
    Macs,
    Socialnav,
    Seating,
}

impl Task {
    pub const ALL: [Task; 4] = [Task::Exploration, Task::Macs, Task::Socialnav, Task::Seating];

    pub fn name(self) -> &'static str {
        match self {
            Task::Exploration => "exploration",
            Task::Macs => "macs",
            Task::Socialnav => "socialnav",
            Task::Seating => "seating",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Task::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown task {s:?} (expected exploration, macs, socialnav or seating)")))
    }
}

/// A body as seen by viewers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub id: u32,
    pub class: EntityClass,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub radius: f64,
    pub vx: f64,
    pub vy: f64,
}

impl Entity {
    pub fn from_body(id: u32, b: &Body) -> Self {
        Self {
            id,
            class: b.class,
            x: b.pose.position.x,
            y: b.pose.position.y,
            heading: b.pose.heading,
            radius: b.radius,
            vx: b.velocity.x,
            vy: b.velocity.y,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub tick: u64,
    pub sim_time: f64,
    pub entities: Vec<Entity>,
}

/// Anything that can be drawn as a list of entities.
pub trait Scene {
    fn tick(&self) -> u64;
    fn sim_time(&self) -> f64;
    fn entities(&self) -> Vec<Entity>;

    fn frame(&self) -> Frame {
        Frame {
            tick: self.tick(),
            sim_time: self.sim_time(),
            entities: self.entities(),
        }
    }
}

impl Scene for SocialNavEnv {
    fn tick(&self) -> u64 {
        self.steps()
    }

    fn sim_time(&self) -> f64 {
        self.clock()
    }

    /// Robot is id 0, pedestrian `i` is id `i + 1`.
    fn entities(&self) -> Vec<Entity> {
        std::iter::once(Entity::from_body(0, self.robot()))
            .chain(self.pedestrians().iter().enumerate().map(|(i, p)| Entity::from_body(i as u32 + 1, &p.body)))
            .collect()
    }
}

impl Scene for MacsEnv {
    fn tick(&self) -> u64 {
        self.steps() as u64
    }

    fn sim_time(&self) -> f64 {
        self.world().clock()
    }

    /// World body indices; captured supplies are left out.
    fn entities(&self) -> Vec<Entity> {
        let n = self.config().n_agents;
        self.world()
            .bodies
            .iter()
            .enumerate()
            .filter(|(i, b)| b.class != EntityClass::Supply || self.supply_active(i - n))
            .map(|(i, b)| Entity::from_body(i as u32, b))
            .collect()
    }
}

impl Scene for ExplorationEnv {
    fn tick(&self) -> u64 {
        self.steps_used() as u64
    }

    fn sim_time(&self) -> f64 {
        self.steps_used() as f64 * self.config().dt
    }

    /// Agent is id 0; paper `k` is id `k + 1` until collected.
    fn entities(&self) -> Vec<Entity> {
        let pose = self.pose();
        let mut out = vec![Entity {
            id: 0,
            class: EntityClass::Agent,
            x: pose.position.x,
            y: pose.position.y,
            heading: pose.heading,
            radius: self.config().agent_radius,
            vx: 0.0,
            vy: 0.0,
        }];
        out.extend(self.remaining_papers().into_iter().map(|(k, p)| Entity {
            id: k as u32 + 1,
            class: EntityClass::Target,
            x: p.x,
            y: p.y,
            heading: 0.0,
            radius: self.config().pickup_radius,
            vx: 0.0,
            vy: 0.0,
        }));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordHeader {
    pub schema_version: u32,
    pub task: Task,
    pub seed: u64,
    pub episode: u32,
    pub policy: String,
    /// Task configuration the episode ran under.
    pub config: Value,
}

/// Quantities the environment measured itself, cross-checked on scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordFooter {
    pub steps: u64,
    pub sim_time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub success: Option<bool>,
    /// Per-agent returns accumulated by the environment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub returns: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proxemics_samples: Option<u32>,
}

impl RecordFooter {
    pub fn new(steps: u64, sim_time: f64) -> Self {
        Self {
            steps,
            sim_time,
            success: None,
            returns: None,
            t_min: None,
            proxemics_samples: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RecordLine {
    Header(RecordHeader),
    Action { tick: u64, action: Value },
    Event { tick: u64, event: Value },
    Frame(Frame),
    Footer(RecordFooter),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub header: RecordHeader,
    /// Action, event and frame lines in order.
    pub body: Vec<RecordLine>,
    pub footer: RecordFooter,
}

impl EpisodeRecord {
    pub fn actions<A: DeserializeOwned>(&self) -> Result<Vec<(u64, A)>> {
        self.body
            .iter()
            .filter_map(|l| match l {
                RecordLine::Action { tick, action } => Some((*tick, action)),
                _ => None,
            })
            .map(|(t, a)| Ok((t, serde_json::from_value(a.clone()).map_err(|e| schema(t, e))?)))
            .collect()
    }

    pub fn events<E: DeserializeOwned>(&self) -> Result<Vec<(u64, E)>> {
        self.body
            .iter()
            .filter_map(|l| match l {
                RecordLine::Event { tick, event } => Some((*tick, event)),
                _ => None,
            })
            .map(|(t, e)| Ok((t, serde_json::from_value(e.clone()).map_err(|err| schema(t, err))?)))
            .collect()
    }

    pub fn frames(&self) -> impl Iterator<Item = &Frame> {
        self.body.iter().filter_map(|l| match l {
            RecordLine::Frame(f) => Some(f),
            _ => None,
        })
    }

    pub fn config<C: DeserializeOwned>(&self) -> Result<C> {
        serde_json::from_value(self.header.config.clone())
            .map_err(|e| Error::Schema(format!("{} config in record header: {e}", self.header.task)))
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        let header = RecordLine::Header(self.header.clone());
        let footer = RecordLine::Footer(self.footer.clone());
        for line in std::iter::once(&header).chain(&self.body).chain(std::iter::once(&footer)) {
            out.push_str(&serde_json::to_string(line)?);
            out.push('\n');
        }
        Ok(out)
    }
}

fn schema(tick: u64, e: serde_json::Error) -> Error {
    Error::Schema(format!("line at tick {tick}: {e}"))
}

/// Concatenated JSONL for many records.
pub fn write_jsonl(records: &[EpisodeRecord]) -> Result<String> {
    records.iter().map(EpisodeRecord::to_jsonl).collect()
}

/// Parses a JSONL file holding one or more records.
pub fn read_jsonl(text: &str) -> Result<Vec<EpisodeRecord>> {
    let mut out = Vec::new();
    let mut open: Option<(RecordHeader, Vec<RecordLine>)> = None;
    for (no, raw) in text.lines().enumerate() {
        let no = no + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let line: RecordLine =
            serde_json::from_str(raw).map_err(|e| Error::Schema(format!("line {no}: {e}")))?;
        match line {
            RecordLine::Header(h) => {
                if open.is_some() {
                    return Err(Error::Schema(format!("line {no}: header before the previous footer")));
                }
                if h.schema_version != SCHEMA_VERSION {
                    return Err(Error::Schema(format!(
                        "line {no}: schema_version {} (expected {SCHEMA_VERSION})",
                        h.schema_version
                    )));
                }
                open = Some((h, Vec::new()));
            }
            RecordLine::Footer(footer) => {
                let (header, body) = open
                    .take()
                    .ok_or_else(|| Error::Schema(format!("line {no}: footer without header")))?;
                out.push(EpisodeRecord { header, body, footer });
            }
            other => match &mut open {
                Some((_, body)) => body.push(other),
                None => return Err(Error::Schema(format!("line {no}: record line outside a record"))),
            },
        }
    }
    if open.is_some() {
        return Err(Error::Schema("record is missing its footer".into()));
    }
    Ok(out)
}

/// Builds a record while an episode runs.
#[derive(Debug, Clone)]
pub struct Recorder {
    header: RecordHeader,
    body: Vec<RecordLine>,
    frame_every: u64,
}

impl Recorder {
    /// `frame_every` of 0 records no frames.
    pub fn new<C: Serialize>(task: Task, seed: u64, episode: u32, policy: &str, config: &C, frame_every: u64) -> Result<Self> {
        Ok(Self {
            header: RecordHeader {
                schema_version: SCHEMA_VERSION,
                task,
                seed,
                episode,
                policy: policy.to_string(),
                config: serde_json::to_value(config)?,
            },
            body: Vec::new(),
            frame_every,
        })
    }

    pub fn action<A: Serialize>(&mut self, tick: u64, action: &A) -> Result<()> {
        self.body.push(RecordLine::Action {
            tick,
            action: serde_json::to_value(action)?,
        });
        Ok(())
    }

    pub fn event<E: Serialize>(&mut self, tick: u64, event: &E) -> Result<()> {
        self.body.push(RecordLine::Event {
            tick,
            event: serde_json::to_value(event)?,
        });
        Ok(())
    }

    /// Records a frame when `force` is set or the tick is on the frame cadence.
    pub fn frame<S: Scene>(&mut self, scene: &S, force: bool) {
        let due = self.frame_every > 0 && scene.tick().is_multiple_of(self.frame_every);
        if due || (force && self.frame_every > 0) {
            self.body.push(RecordLine::Frame(scene.frame()));
        }
    }

    pub fn finish(self, footer: RecordFooter) -> EpisodeRecord {
        EpisodeRecord {
            header: self.header,
            body: self.body,
            footer,
        }
    }
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::RecordCheck(msg()))
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

/// Reward conservation and single-capture checks over MACS events.
pub fn check_macs_events(events: &[(u64, RewardEvent)], n_agents: usize) -> Result<()> {
    let mut captured = BTreeSet::new();
    for (tick, ev) in events {
        check(ev.credits.len() == n_agents, || {
            format!("tick {tick}: event credits {} agents, expected {n_agents}", ev.credits.len())
        })?;
        let sum: f64 = ev.credits.iter().sum();
        check((sum - ev.value).abs() <= CONSERVATION_TOLERANCE, || {
            format!("tick {tick}: credits sum to {sum}, event value is {}", ev.value)
        })?;
        check(ev.involved.iter().all(|&a| a < n_agents), || format!("tick {tick}: involved agent out of range"))?;
        if let RewardKind::Capture { supply } = ev.kind {
            check(captured.insert(supply), || format!("tick {tick}: supply {supply} captured twice"))?;
        }
    }
    Ok(())
}

/// Scores one record from its lines alone and cross-checks the result
/// against what the environment reported in the footer.
pub fn score_record(rec: &EpisodeRecord) -> Result<EpisodeRow> {
    let h = &rec.header;
    let mut row = EpisodeRow::new(h.task, h.seed, h.episode, &h.policy, rec.footer.steps);
    match h.task {
        Task::Macs => {
            let cfg: MacsConfig = rec.config()?;
            let events: Vec<(u64, RewardEvent)> = rec.events()?;
            check_macs_events(&events, cfg.n_agents)?;
            let mut returns = vec![0.0; cfg.n_agents];
            for (_, ev) in &events {
                for (r, c) in returns.iter_mut().zip(&ev.credits) {
                    *r += c;
                }
            }
            let actions: Vec<(u64, Vec<MacsAction>)> = rec.actions()?;
            for (tick, acts) in &actions {
                check(acts.len() == cfg.n_agents, || format!("tick {tick}: {} actions for {} agents", acts.len(), cfg.n_agents))?;
                for (r, a) in returns.iter_mut().zip(acts) {
                    let u = a.clamped();
                    *r += cfg.thrust_penalty * u.norm_sq();
                }
            }
            if let Some(claimed) = &rec.footer.returns {
                check(
                    claimed.len() == returns.len() && claimed.iter().zip(&returns).all(|(a, b)| close(*a, *b)),
                    || format!("recomputed returns {returns:?} differ from recorded {claimed:?}"),
                )?;
            }
            row.return_per_agent = Some(returns.iter().sum::<f64>() / cfg.n_agents as f64);
        }
        Task::Socialnav => {
            let sc: SocialNavScenario = rec.config()?;
            let events: Vec<(u64, SocialNavEvent)> = rec.events()?;
            let mut collisions = 0u32;
            let mut success = false;
            // Worst intrusion per proxemics sample, keyed by tick.
            let mut samples: BTreeMap<u64, IntrusionType> = BTreeMap::new();
            for (tick, ev) in &events {
                match ev {
                    SocialNavEvent::Collision { .. } => collisions += 1,
                    SocialNavEvent::GoalReached { .. } => success = true,
                    SocialNavEvent::Intrusion(i) => {
                        let worst = samples.entry(*tick).or_insert(i.kind);
                        *worst = (*worst).min(i.kind);
                    }
                    _ => {}
                }
            }
            let n = rec
                .footer
                .proxemics_samples
                .ok_or_else(|| Error::Schema("socialnav footer lacks proxemics_samples".into()))?;
            check(samples.len() as u32 <= n, || format!("{} intrusion samples but only {n} taken", samples.len()))?;
            let denom = n.max(1) as f64;
            let t1 = samples.values().filter(|&&k| k == IntrusionType::Type1).count();
            let t2 = samples.len() - t1;
            if let Some(claimed) = rec.footer.success {
                check(claimed == success, || format!("footer success {claimed} but events say {success}"))?;
            }
            row.success = Some(success);
            row.t_actual = Some(rec.footer.sim_time);
            row.t_min = Some(rec.footer.t_min.ok_or_else(|| Error::Schema("socialnav footer lacks t_min".into()))?);
            row.t_max = Some(sc.t_max_wall);
            row.collisions = Some(collisions);
            row.f1 = Some(t1 as f64 / denom);
            row.f2 = Some(t2 as f64 / denom);
        }
        Task::Exploration => {
            let cfg: ExplorationConfig = rec.config()?;
            let events: Vec<(u64, ExplorationEvent)> = rec.events()?;
            let mut collected = BTreeSet::new();
            let mut outcome = None;
            for (tick, ev) in &events {
                match ev {
                    ExplorationEvent::Collected { paper, .. } => {
                        check(collected.insert(*paper), || format!("tick {tick}: paper {paper} collected twice"))?
                    }
                    ExplorationEvent::Terminated { success, steps } => outcome = Some((*success, *steps)),
                    ExplorationEvent::Collision { .. } => {}
                }
            }
            let (success, steps) = outcome.ok_or_else(|| Error::RecordCheck("exploration record never terminated".into()))?;
            check(success == (collected.len() == cfg.n_papers), || {
                format!("terminated with success={success} after collecting {} of {}", collected.len(), cfg.n_papers)
            })?;
            check(steps as u64 == rec.footer.steps, || format!("terminated at {steps}, footer says {}", rec.footer.steps))?;
            let _: Vec<(u64, ExplorationAction)> = rec.actions()?;
            row.success = Some(success);
            row.t_max = Some(cfg.t_max as f64);
        }
        Task::Seating => {
            let problem: SeatingProblem = rec.config()?;
            let plans: Vec<(u64, SeatingPlan)> = rec.actions()?;
            let [(_, plan)] = plans.as_slice() else {
                return Err(Error::Schema(format!("seating record holds {} plans, expected 1", plans.len())));
            };
            let s = score_seating(&problem, plan)?;
            row.s_high = s.s_high;
            row.s_low = s.s_low;
            row.pg = s.pg;
        }
    }
    Ok(row)
}

/// The robot commands of a socialnav record, in order.
pub fn robot_commands(rec: &EpisodeRecord) -> Result<Vec<RobotCommand>> {
    Ok(rec.actions::<RobotCommand>()?.into_iter().map(|(_, c)| c).collect())
}
