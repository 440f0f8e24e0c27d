//! Scenario files: which task, under which parameters, with which policy,
//! over which seeds.
//!
//! ```toml
//! task = "macs"
//! seeds = [0, 1, 2]
//! episodes = 10
//! output = "runs/macs-random"
//!
//! [policy]
//! name = "random"
//!
//! [macs]
//! n_coop = 2
//! sensor_range = 500.0   # centimeters
//! ```
//!
//! Unknown keys anywhere are errors, and every error names its line.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::envs::{ExplorationConfig, MacsConfig, SocialNavScenario};
use crate::error::{Error, Result};
use crate::planners::{DwaParams, GreedyParams, MppiParams, OracleParams};
use crate::record::Task;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "toml::Table::is_empty")]
    pub params: toml::Table,
}

impl PolicySpec {
    pub fn named(name: &str) -> Self {
        Self {
            name: name.to_string(),
            params: toml::Table::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeatingSection {
    /// Problem file (JSON), relative to the scenario file.
    pub problem: PathBuf,
    /// Plan file (JSON) scored by the `file` policy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<PathBuf>,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_episodes() -> u32 {
    1
}

fn default_output() -> PathBuf {
    PathBuf::from("runs/latest")
}

fn is_zero(v: &u64) -> bool {
    *v == 0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub task: Task,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Episodes per seed.
    #[serde(default = "default_episodes")]
    pub episodes: u32,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Record a frame every this many ticks; 0 records none.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub frame_every: u64,
    pub policy: PolicySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exploration: Option<ExplorationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub macs: Option<MacsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub socialnav: Option<SocialNavScenario>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seating: Option<SeatingSection>,
}

/// Policies accepted for each task.
pub fn policies_for(task: Task) -> &'static [&'static str] {
    match task {
        Task::Exploration => &["nearest_paper", "random"],
        Task::Macs => &["random", "greedy", "noop"],
        Task::Socialnav => &["dwa", "mppi", "oracle", "random", "noop"],
        Task::Seating => &["random", "file"],
    }
}

/// 1-based line of the first line that starts with `key` (after trimming).
fn line_of(text: &str, key: &str) -> Option<usize> {
    text.lines().position(|l| {
        let l = l.trim_start();
        l.starts_with(key) && l[key.len()..].trim_start().starts_with(['=', ']', '.'])
    })
    .map(|i| i + 1)
}

fn at(text: &str, key: &str, msg: String) -> Error {
    match line_of(text, key) {
        Some(n) => Error::Config(format!("line {n}: {msg}")),
        None => Error::Config(msg),
    }
}

impl ScenarioConfig {
    pub fn new(task: Task, policy: &str) -> Self {
        Self {
            task,
            seeds: default_seeds(),
            episodes: default_episodes(),
            output: default_output(),
            frame_every: 0,
            policy: PolicySpec::named(policy),
            exploration: None,
            macs: None,
            socialnav: None,
            seating: None,
        }
    }

    /// Parses and validates; messages carry the offending line number.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
            let msg = e.message().to_string();
            Error::Config(match line {
                Some(n) => format!("line {n}: {msg}"),
                None => msg,
            })
        })?;
        cfg.validate_with(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        if let Some(s) = &mut cfg.seating {
            let base = path.parent().unwrap_or(Path::new("."));
            s.problem = base.join(&s.problem);
            if let Some(p) = &mut s.plan {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_with("")
    }

    fn validate_with(&self, text: &str) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(at(text, "seeds", "seeds must not be empty".into()));
        }
        if self.episodes == 0 {
            return Err(at(text, "episodes", "episodes must be at least 1".into()));
        }
        let sections = [
            (Task::Exploration, self.exploration.is_some()),
            (Task::Macs, self.macs.is_some()),
            (Task::Socialnav, self.socialnav.is_some()),
            (Task::Seating, self.seating.is_some()),
        ];
        for (t, present) in sections {
            if present && t != self.task {
                return Err(at(text, &format!("[{t}"), format!("[{t}] section given for task {:?}", self.task.name())));
            }
        }
        let allowed = policies_for(self.task);
        if !allowed.contains(&self.policy.name.as_str()) {
            return Err(at(
                text,
                "name",
                format!("policy {:?} not available for {} (choose from {})", self.policy.name, self.task, allowed.join(", ")),
            ));
        }
        self.check_policy_params().map_err(|e| at(text, "[policy.params", e.to_string()))?;
        let section = |e: Error| at(text, &format!("[{}", self.task), e.to_string());
        match self.task {
            Task::Exploration => self.exploration_config().validate().map_err(section)?,
            Task::Macs => self.macs_config().validate().map(|_| ()).map_err(section)?,
            Task::Socialnav => self.socialnav_scenario().validate().map_err(section)?,
            Task::Seating => {
                let s = self.seating.as_ref().ok_or_else(|| Error::Config("task seating needs a [seating] section".into()))?;
                if self.policy.name == "file" && s.plan.is_none() {
                    return Err(at(text, "[seating", "policy \"file\" needs seating.plan".into()));
                }
            }
        }
        Ok(())
    }

    fn check_policy_params(&self) -> Result<()> {
        match self.policy.name.as_str() {
            "greedy" => self.policy_params::<GreedyParams>().map(|_| ()),
            "dwa" => self.policy_params::<DwaParams>()?.validate(),
            "mppi" => self.policy_params::<MppiParams>()?.validate(),
            "oracle" => self.policy_params::<OracleParams>().map(|_| ()),
            _ if self.policy.params.is_empty() => Ok(()),
            name => Err(Error::Config(format!("policy {name:?} takes no params"))),
        }
    }

    /// Policy parameters over their defaults.
    pub fn policy_params<P: serde::de::DeserializeOwned>(&self) -> Result<P> {
        toml::Value::Table(self.policy.params.clone())
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("policy.params: {}", e.message())))
    }

    pub fn exploration_config(&self) -> ExplorationConfig {
        self.exploration.clone().unwrap_or_default()
    }

    pub fn macs_config(&self) -> MacsConfig {
        self.macs.clone().unwrap_or_default()
    }

    pub fn socialnav_scenario(&self) -> SocialNavScenario {
        self.socialnav.clone().unwrap_or_default()
    }

    /// The scenario with every default filled in, for report headers.
    pub fn resolved(&self) -> Self {
        let mut out = self.clone();
        match self.task {
            Task::Exploration => out.exploration = Some(self.exploration_config()),
            Task::Macs => out.macs = Some(self.macs_config()),
            Task::Socialnav => out.socialnav = Some(self.socialnav_scenario()),
            Task::Seating => {}
        }
        out
    }

    /// `(seed, episode)` pairs in run order.
    pub fn episode_keys(&self) -> Vec<(u64, u32)> {
        self.seeds
            .iter()
            .flat_map(|&s| (0..self.episodes).map(move |e| (s, e)))
            .collect()
    }
}
