//! Scoring formulas for every benchmark task.
//!
//! Exploration: success rate and step efficiency. Cooperative search: mean
//! episodic return per agent. Social navigation: EFF, SRT, SAF, SNC and the
//! weighted total. Seating: preference satisfaction and the prioritization
//! gap (see [`seating`]).

pub mod seating;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use seating::{score_seating, SeatingPlan, SeatingProblem, SeatingScore};

/// Result of one exploration episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    pub success: bool,
    pub steps: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplorationScore {
    pub n_total: usize,
    pub n_success: usize,
    /// Success rate in percent.
    pub sr: f64,
    /// Mean normalized step savings over successful episodes; absent when none succeeded.
    pub efficiency: Option<f64>,
}

/// `100 · N_success / N_total`.
pub fn success_rate(outcomes: &[EpisodeOutcome]) -> Result<f64> {
    if outcomes.is_empty() {
        return Err(Error::Empty);
    }
    let n_success = outcomes.iter().filter(|o| o.success).count();
    Ok(100.0 * n_success as f64 / outcomes.len() as f64)
}

/// Mean of `(T_max − S_i) / T_max` over successful episodes.
pub fn efficiency(outcomes: &[EpisodeOutcome], t_max: u32) -> Option<f64> {
    let t = t_max as f64;
    let (sum, n) = outcomes
        .iter()
        .filter(|o| o.success)
        .fold((0.0, 0usize), |(s, n), o| (s + (t - o.steps as f64) / t, n + 1));
    (n > 0 && t_max > 0).then(|| sum / n as f64)
}

pub fn exploration_score(outcomes: &[EpisodeOutcome], t_max: u32) -> Result<ExplorationScore> {
    Ok(ExplorationScore {
        n_total: outcomes.len(),
        n_success: outcomes.iter().filter(|o| o.success).count(),
        sr: success_rate(outcomes)?,
        efficiency: efficiency(outcomes, t_max),
    })
}

/// Mean episodic return per agent and the matching mean step reward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanReturn {
    pub per_agent: f64,
    pub per_step: f64,
}

/// One episode's summed rewards per agent and its horizon in steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeReturns {
    pub per_agent: Vec<f64>,
    pub steps: u32,
}

/// `R̄ = (1/N) Σ_i Σ_t r_t^(i)`, averaged over episodes, plus `R̄ / T`.
pub fn mean_episodic_return(episodes: &[EpisodeReturns]) -> Result<MeanReturn> {
    if episodes.is_empty() {
        return Err(Error::Empty);
    }
    let mut per_agent = 0.0;
    let mut per_step = 0.0;
    for ep in episodes {
        if ep.per_agent.is_empty() {
            return Err(Error::InvalidArgument("episode with zero agents".into()));
        }
        let r = ep.per_agent.iter().sum::<f64>() / ep.per_agent.len() as f64;
        per_agent += r;
        per_step += if ep.steps > 0 { r / ep.steps as f64 } else { 0.0 };
    }
    let n = episodes.len() as f64;
    Ok(MeanReturn {
        per_agent: per_agent / n,
        per_step: per_step / n,
    })
}

/// `EFF = 1 − (T_actual − T_min) / (T_max − T_min)`, clamped to `[0, 1]`.
pub fn eff(t_actual: f64, t_min: f64, t_max: f64) -> Result<f64> {
    if !(t_max > t_min) {
        return Err(Error::InvalidArgument(format!(
            "EFF needs T_max > T_min (got {t_max} ≤ {t_min})"
        )));
    }
    Ok((1.0 - (t_actual - t_min) / (t_max - t_min)).clamp(0.0, 1.0))
}

/// Collision banding: 1.0 for none, 0.5 for one to three, 0.0 beyond.
pub fn saf(collisions: u32) -> f64 {
    match collisions {
        0 => 1.0,
        1..=3 => 0.5,
        _ => 0.0,
    }
}

/// Weight of Type-1 intrusion time inside SNC.
pub const SNC_TYPE1_WEIGHT: f64 = 1.0;
/// Weight of Type-2 intrusion time inside SNC.
pub const SNC_TYPE2_WEIGHT: f64 = 0.5;

/// Social norm compliance from the fractions of samples spent in Type-1 and
/// Type-2 intrusion; higher is better.
pub fn snc(f1: f64, f2: f64) -> f64 {
    (1.0 - (SNC_TYPE1_WEIGHT * f1 + SNC_TYPE2_WEIGHT * f2)).clamp(0.0, 1.0)
}

/// `100 · (0.2·EFF + 0.2·SRT + 0.3·SAF + 0.3·SNC)`.
pub fn total(eff: f64, srt: f64, saf: f64, snc: f64) -> Result<f64> {
    for (name, v) in [("EFF", eff), ("SRT", srt), ("SAF", saf), ("SNC", snc)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidArgument(format!("{name} = {v} outside [0, 1]")));
        }
    }
    Ok(100.0 * (0.2 * eff + 0.2 * srt + 0.3 * saf + 0.3 * snc))
}

/// Per-episode social-navigation measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocialNavEpisode {
    pub success: bool,
    pub t_actual: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub collisions: u32,
    /// Fraction of proxemics samples with a Type-1 intrusion.
    pub f1: f64,
    /// Fraction of samples whose worst intrusion was Type-2.
    pub f2: f64,
}

impl SocialNavEpisode {
    /// EFF for this trial; failed trials score 0.
    pub fn eff(&self) -> Result<f64> {
        if self.success {
            eff(self.t_actual, self.t_min, self.t_max)
        } else {
            Ok(0.0)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocialNavScore {
    pub eff: f64,
    pub srt: f64,
    pub saf: f64,
    pub snc: f64,
    pub total: f64,
    pub episodes: usize,
    pub mean_collisions: f64,
    pub mean_f1: f64,
    pub mean_f2: f64,
}

/// Averages each component over trials, then applies [`total`].
pub fn social_nav_score(episodes: &[SocialNavEpisode]) -> Result<SocialNavScore> {
    if episodes.is_empty() {
        return Err(Error::Empty);
    }
    let n = episodes.len() as f64;
    let mut acc = [0.0; 7];
    for ep in episodes {
        acc[0] += ep.eff()?;
        acc[1] += if ep.success { 1.0 } else { 0.0 };
        acc[2] += saf(ep.collisions);
        acc[3] += snc(ep.f1, ep.f2);
        acc[4] += ep.collisions as f64;
        acc[5] += ep.f1;
        acc[6] += ep.f2;
    }
    let [e, s, a, c, col, f1, f2] = acc.map(|v| v / n);
    Ok(SocialNavScore {
        eff: e,
        srt: s,
        saf: a,
        snc: c,
        total: total(e, s, a, c)?,
        episodes: episodes.len(),
        mean_collisions: col,
        mean_f1: f1,
        mean_f2: f2,
    })
}
