//! The simulation side of a live session, free of any networking.
//!
//! Every input arrives through [`Session::handle`] and every output is a
//! returned value, so the whole protocol can be driven synchronously.

use std::collections::BTreeSet;

use deskbench::envs::socialnav::{IntrusionType, SocialNavEvent};
use deskbench::envs::{RobotCommand, SocialNavEnv, SocialNavScenario};
use deskbench::record::{EpisodeRecord, Recorder, Scene, Task};
use deskbench::runner::{env_seed, record_socialnav_step, socialnav_footer};
use deskbench::Result;

use crate::protocol::{
    ControlMsg, EpisodeStatus, LiveMetrics, Snapshot, WelcomePayload, PROTOCOL_VERSION, SNAPSHOT_CHANNEL,
};
use crate::protocol::ServerMsg;

pub type ClientId = u64;

/// Policy name written into records of teleoperated episodes.
pub const HUMAN_POLICY: &str = "human";

pub const DEFAULT_SNAPSHOT_HZ: f64 = 20.0;
pub const MAX_SNAPSHOT_HZ: f64 = 1000.0;

pub struct Session {
    id: String,
    scenario: SocialNavScenario,
    env: SocialNavEnv,
    recorder: Option<Recorder>,
    seed: u64,
    episode: u32,
    status: EpisodeStatus,
    paused: bool,
    rate_hz: f64,
    /// Latest teleop received since the last step.
    pending: Option<RobotCommand>,
    /// Command held between teleop messages.
    command: RobotCommand,
    authority: Option<ClientId>,
    clients: BTreeSet<ClientId>,
    subscribers: BTreeSet<ClientId>,
    next_client: ClientId,
    snapshot_tick: u64,
    events: Vec<SocialNavEvent>,
    metrics: LiveMetrics,
    finished: Vec<EpisodeRecord>,
    frame_every: u64,
}

impl Session {
    pub fn new(id: impl Into<String>, scenario: SocialNavScenario, seed: u64) -> Result<Self> {
        let env = SocialNavEnv::new(scenario.clone())?;
        let mut s = Self {
            id: id.into(),
            scenario,
            env,
            recorder: None,
            seed,
            episode: 0,
            status: EpisodeStatus::Running,
            paused: false,
            rate_hz: DEFAULT_SNAPSHOT_HZ,
            pending: None,
            command: RobotCommand::default(),
            authority: None,
            clients: BTreeSet::new(),
            subscribers: BTreeSet::new(),
            next_client: 1,
            snapshot_tick: 0,
            events: Vec::new(),
            metrics: LiveMetrics::default(),
            finished: Vec::new(),
            frame_every: 1,
        };
        s.start_episode()?;
        Ok(s)
    }

    /// Frames are written to records every `n` steps (0 for none).
    pub fn with_frame_every(mut self, n: u64) -> Result<Self> {
        self.frame_every = n;
        self.start_episode()?;
        Ok(self)
    }

    fn start_episode(&mut self) -> Result<()> {
        self.env.reset_with(Some(env_seed(self.seed, self.episode)))?;
        let mut rec = Recorder::new(Task::Socialnav, self.seed, self.episode, HUMAN_POLICY, &self.scenario, self.frame_every)?;
        rec.frame(&self.env, true);
        self.recorder = Some(rec);
        self.status = EpisodeStatus::Running;
        self.pending = None;
        self.command = RobotCommand::default();
        self.metrics = LiveMetrics::default();
        Ok(())
    }

    fn finish_episode(&mut self) -> Result<()> {
        if let Some(rec) = self.recorder.take() {
            let footer = socialnav_footer(&self.env)?;
            self.status = if footer.success == Some(true) {
                EpisodeStatus::Succeeded
            } else {
                EpisodeStatus::Failed
            };
            self.finished.push(rec.finish(footer));
        }
        Ok(())
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn env(&self) -> &SocialNavEnv {
        &self.env
    }

    pub fn status(&self) -> EpisodeStatus {
        self.status
    }

    pub fn paused(&self) -> bool {
        self.paused
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    /// Sets the snapshot rate, ignoring values outside `(0, MAX_SNAPSHOT_HZ]`.
    pub fn set_rate_hz(&mut self, hz: f64) -> bool {
        let ok = hz > 0.0 && hz <= MAX_SNAPSHOT_HZ;
        if ok {
            self.rate_hz = hz;
        }
        ok
    }

    /// Sequence number of the last snapshot taken.
    pub fn snapshot_tick(&self) -> u64 {
        self.snapshot_tick
    }

    pub fn command(&self) -> RobotCommand {
        self.command
    }

    pub fn authority(&self) -> Option<ClientId> {
        self.authority
    }

    pub fn subscribers(&self) -> impl Iterator<Item = ClientId> + '_ {
        self.subscribers.iter().copied()
    }

    pub fn connect(&mut self) -> (ClientId, ServerMsg) {
        let id = self.next_client;
        self.next_client += 1;
        self.clients.insert(id);
        let welcome = ServerMsg::Welcome(WelcomePayload {
            session_id: self.id.clone(),
            client_id: id,
            protocol_version: PROTOCOL_VERSION,
            channels: vec![SNAPSHOT_CHANNEL.to_string()],
        });
        (id, welcome)
    }

    pub fn disconnect(&mut self, client: ClientId) {
        self.clients.remove(&client);
        self.subscribers.remove(&client);
        if self.authority == Some(client) {
            self.authority = None;
        }
    }

    fn error(message: impl Into<String>) -> Vec<ServerMsg> {
        vec![ServerMsg::Error { message: message.into() }]
    }

    /// Parses and applies one text message from `client`.
    pub fn handle_text(&mut self, client: ClientId, text: &str) -> Vec<ServerMsg> {
        match ControlMsg::parse(text) {
            Ok(msg) => self.handle(client, msg),
            Err(e) => Self::error(e.to_string()),
        }
    }

    /// Applies a control message and returns the replies for `client`.
    pub fn handle(&mut self, client: ClientId, msg: ControlMsg) -> Vec<ServerMsg> {
        let mut replies = Vec::new();
        let mutating = !matches!(msg, ControlMsg::Subscribe { .. });
        if mutating {
            match self.authority {
                Some(holder) if holder != client => {
                    return Self::error("observer: another client holds control authority");
                }
                None if matches!(msg, ControlMsg::Teleop { .. }) => {
                    self.authority = Some(client);
                    replies.push(ServerMsg::Authority { granted: true });
                }
                _ => {}
            }
        }
        match msg {
            ControlMsg::Teleop { v, omega } => {
                // Later messages in the same step overwrite earlier ones.
                self.pending = Some(RobotCommand::new(v, omega).clamped(self.scenario.v_max, self.scenario.omega_max));
            }
            ControlMsg::Reset { seed } => {
                if let Err(e) = self.reset(seed) {
                    return Self::error(format!("reset failed: {e}"));
                }
            }
            ControlMsg::Pause => self.paused = true,
            ControlMsg::Resume => self.paused = false,
            ControlMsg::SetRate { hz } => {
                if !self.set_rate_hz(hz) {
                    return Self::error(format!("set_rate: hz must be in (0, {MAX_SNAPSHOT_HZ}]"));
                }
            }
            ControlMsg::Subscribe { channel } => {
                if channel != SNAPSHOT_CHANNEL {
                    return Self::error(format!("unknown channel {channel:?}"));
                }
                self.subscribers.insert(client);
            }
        }
        replies
    }

    /// Ends the current episode (as a failure if still running) and starts
    /// the next one, on `seed` if given.
    pub fn reset(&mut self, seed: Option<u64>) -> Result<()> {
        if self.recorder.is_some() {
            if let Some(rec) = &mut self.recorder {
                for e in self.env.abort() {
                    rec.event(self.env.steps(), &e)?;
                    self.events.push(e);
                }
            }
            self.finish_episode()?;
        }
        match seed {
            Some(s) => {
                self.seed = s;
                self.episode = 0;
            }
            None => self.episode += 1,
        }
        self.start_episode()
    }

    /// Advances one simulation step unless paused or the episode is over.
    /// Returns whether a step was taken.
    pub fn advance(&mut self) -> Result<bool> {
        if self.paused || self.status != EpisodeStatus::Running {
            return Ok(false);
        }
        if let Some(cmd) = self.pending.take() {
            self.command = cmd;
        }
        let rec = self.recorder.as_mut().expect("running episodes have a recorder");
        let events = record_socialnav_step(&mut self.env, rec, self.command)?;
        let mut worst: Option<IntrusionType> = None;
        for e in &events {
            match e {
                SocialNavEvent::Collision { .. } => self.metrics.collisions += 1,
                SocialNavEvent::Intrusion(i) => worst = Some(worst.map_or(i.kind, |w| w.min(i.kind))),
                _ => {}
            }
        }
        match worst {
            Some(IntrusionType::Type1) => self.metrics.type1_samples += 1,
            Some(IntrusionType::Type2) => self.metrics.type2_samples += 1,
            None => {}
        }
        self.metrics.proxemics_samples = self.env.proxemics_samples();
        self.events.extend(events);
        if self.env.is_done() {
            self.finish_episode()?;
        }
        Ok(true)
    }

    /// The next snapshot; drains the events gathered since the last one.
    pub fn snapshot(&mut self) -> Snapshot {
        self.snapshot_tick += 1;
        let goal = self.env.goal();
        Snapshot {
            session_id: self.id.clone(),
            tick: self.snapshot_tick,
            sim_step: self.env.steps(),
            sim_time: self.env.clock(),
            episode: self.episode,
            seed: self.seed,
            entities: self.env.entities(),
            events_since_last: std::mem::take(&mut self.events),
            episode_status: self.status,
            paused: self.paused,
            command: self.command,
            goal: [goal.x, goal.y],
            metrics: self.metrics,
        }
    }

    /// Records of every episode that has ended, oldest first.
    pub fn finished_records(&self) -> &[EpisodeRecord] {
        &self.finished
    }

    pub fn take_finished(&mut self) -> Vec<EpisodeRecord> {
        std::mem::take(&mut self.finished)
    }

    /// The most recent finished episode, in the headless record format.
    pub fn record_session(&self) -> Option<&EpisodeRecord> {
        self.finished.last()
    }

    /// Ends the running episode, if any, so its record is kept.
    pub fn close(&mut self) -> Result<()> {
        if self.recorder.is_some() {
            if let Some(rec) = &mut self.recorder {
                for e in self.env.abort() {
                    rec.event(self.env.steps(), &e)?;
                }
            }
            self.finish_episode()?;
        }
        Ok(())
    }
}
