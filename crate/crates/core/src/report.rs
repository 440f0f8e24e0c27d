//! Per-episode rows, task aggregates and the benchmark report file.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{
    exploration_score, mean_episodic_return, social_nav_score, EpisodeOutcome, EpisodeReturns, ExplorationScore,
    SocialNavEpisode, SocialNavScore,
};
use crate::record::{Task, SCHEMA_VERSION};

/// One scored episode. Columns that do not apply to the task stay empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub task: Task,
    pub seed: u64,
    pub episode: u32,
    pub policy: String,
    pub steps: u64,
    pub success: Option<bool>,
    pub return_per_agent: Option<f64>,
    pub t_actual: Option<f64>,
    pub t_min: Option<f64>,
    pub t_max: Option<f64>,
    pub collisions: Option<u32>,
    pub f1: Option<f64>,
    pub f2: Option<f64>,
    pub s_high: Option<f64>,
    pub s_low: Option<f64>,
    pub pg: Option<f64>,
}

impl EpisodeRow {
    pub fn new(task: Task, seed: u64, episode: u32, policy: &str, steps: u64) -> Self {
        Self {
            task,
            seed,
            episode,
            policy: policy.to_string(),
            steps,
            success: None,
            return_per_agent: None,
            t_actual: None,
            t_min: None,
            t_max: None,
            collisions: None,
            f1: None,
            f2: None,
            s_high: None,
            s_low: None,
            pg: None,
        }
    }

    fn need<T: Copy>(&self, v: Option<T>, name: &str) -> Result<T> {
        v.ok_or_else(|| Error::Schema(format!("{:?} row (seed {}, episode {}) lacks {name}", self.task, self.seed, self.episode)))
    }

    pub fn social_nav(&self) -> Result<SocialNavEpisode> {
        Ok(SocialNavEpisode {
            success: self.need(self.success, "success")?,
            t_actual: self.need(self.t_actual, "t_actual")?,
            t_min: self.need(self.t_min, "t_min")?,
            t_max: self.need(self.t_max, "t_max")?,
            collisions: self.need(self.collisions, "collisions")?,
            f1: self.need(self.f1, "f1")?,
            f2: self.need(self.f2, "f2")?,
        })
    }
}

/// Task-level summary of a set of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case")]
pub enum Aggregates {
    Exploration(ExplorationScore),
    Macs {
        episodes: usize,
        mean_episodic_return_per_agent: f64,
        mean_step_reward: f64,
    },
    Socialnav(SocialNavScore),
    Seating {
        plans: usize,
        mean_s_high: Option<f64>,
        mean_s_low: Option<f64>,
        mean_pg: Option<f64>,
    },
}

fn mean_present(vals: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = vals.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Aggregates for `task`, computed from rows alone.
pub fn aggregate(task: Task, rows: &[EpisodeRow]) -> Result<Aggregates> {
    if rows.is_empty() {
        return Err(Error::Empty);
    }
    if let Some(r) = rows.iter().find(|r| r.task != task) {
        return Err(Error::Schema(format!("{:?} row in a {:?} report", r.task, task)));
    }
    Ok(match task {
        Task::Exploration => {
            let t_max = rows[0].need(rows[0].t_max, "t_max")?;
            let outcomes = rows
                .iter()
                .map(|r| {
                    Ok(EpisodeOutcome {
                        success: r.need(r.success, "success")?,
                        steps: r.steps as u32,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Aggregates::Exploration(exploration_score(&outcomes, t_max as u32)?)
        }
        Task::Macs => {
            // Rows hold the per-agent mean already, so one pseudo-agent per episode.
            let eps = rows
                .iter()
                .map(|r| {
                    Ok(EpisodeReturns {
                        per_agent: vec![r.need(r.return_per_agent, "return_per_agent")?],
                        steps: r.steps as u32,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let m = mean_episodic_return(&eps)?;
            Aggregates::Macs {
                episodes: rows.len(),
                mean_episodic_return_per_agent: m.per_agent,
                mean_step_reward: m.per_step,
            }
        }
        Task::Socialnav => {
            let eps = rows.iter().map(EpisodeRow::social_nav).collect::<Result<Vec<_>>>()?;
            Aggregates::Socialnav(social_nav_score(&eps)?)
        }
        Task::Seating => Aggregates::Seating {
            plans: rows.len(),
            mean_s_high: mean_present(rows.iter().map(|r| r.s_high)),
            mean_s_low: mean_present(rows.iter().map(|r| r.s_low)),
            mean_pg: mean_present(rows.iter().map(|r| r.pg)),
        },
    })
}

/// Where and with what a report was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub package: String,
    pub version: String,
    pub commit: Option<String>,
    pub os: String,
    pub arch: String,
    pub cpus: usize,
}

impl Fingerprint {
    pub fn current() -> Self {
        let commit = std::process::Command::new("git")
            .args(["rev-parse", "--short=12", "HEAD"])
            .output()
            .ok()
            .filter(|o| o.status.success())
            .map(|o| String::from_utf8_lossy(&o.stdout).trim().to_string())
            .filter(|s| !s.is_empty());
        Self {
            package: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            commit,
            os: std::env::consts::OS.into(),
            arch: std::env::consts::ARCH.into(),
            cpus: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub schema_version: u32,
    /// The fully resolved scenario, so the report describes itself.
    pub scenario: serde_json::Value,
    pub episodes: Vec<EpisodeRow>,
    pub aggregates: Aggregates,
    pub fingerprint: Fingerprint,
}

impl BenchmarkReport {
    pub fn new(task: Task, scenario: serde_json::Value, episodes: Vec<EpisodeRow>) -> Result<Self> {
        let aggregates = aggregate(task, &episodes)?;
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            scenario,
            episodes,
            aggregates,
            fingerprint: Fingerprint::current(),
        })
    }

    pub fn task(&self) -> Task {
        match self.aggregates {
            Aggregates::Exploration(_) => Task::Exploration,
            Aggregates::Macs { .. } => Task::Macs,
            Aggregates::Socialnav(_) => Task::Socialnav,
            Aggregates::Seating { .. } => Task::Seating,
        }
    }

    /// Recomputes the aggregates from the rows and compares.
    pub fn verify(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Schema(format!("report schema_version {} (expected {SCHEMA_VERSION})", self.schema_version)));
        }
        let again = aggregate(self.task(), &self.episodes)?;
        if again != self.aggregates {
            return Err(Error::RecordCheck("aggregates do not match the per-episode rows".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn rows_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.episodes {
            w.serialize(row).map_err(|e| Error::Schema(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    /// Writes `report.json` and `summary.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.json"), self.to_json()?)?;
        fs::write(dir.join("summary.csv"), self.rows_csv()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let report: Self = serde_json::from_str(&text)?;
        report.verify()?;
        Ok(report)
    }
}
