//! Model Predictive Path Integral controller for a unicycle.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::local::{carrot, unicycle_step, LidarCostmap};
use super::Path;
use crate::envs::RobotCommand;
use crate::error::{Error, Result};
use crate::geom::{Pose, Vec2};
use crate::rng::{gaussian, SimRng};
use crate::sim::SensorFrame;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MppiParams {
    /// Number of sampled control sequences `K`.
    pub samples: usize,
    /// Horizon length `H` in steps.
    pub horizon: usize,
    /// Temperature `λ`.
    pub lambda: f64,
    /// Noise standard deviation on `v`, m/s.
    pub sigma_v: f64,
    /// Noise standard deviation on `ω`, rad/s.
    pub sigma_omega: f64,
    pub dt: f64,
    pub w_goal: f64,
    pub w_collision: f64,
    pub w_effort: f64,
    /// Weight of the personal-space term `Σ max(0, comfort − d)·dt`.
    pub w_proximity: f64,
    /// Obstacle distance below which the proximity term applies, m.
    pub comfort_distance: f64,
    /// Obstacle hits are extrapolated along their rays for at most this many
    /// seconds of the horizon; 0 treats the scan as static.
    pub prediction_horizon: f64,
    /// Extra clearance beyond the robot radius that still counts as a collision.
    pub safety_margin: f64,
    pub robot_radius: f64,
    pub v_max: f64,
    pub omega_max: f64,
}

impl Default for MppiParams {
    fn default() -> Self {
        Self {
            samples: 512,
            horizon: 30,
            lambda: 0.3,
            sigma_v: 0.5,
            sigma_omega: 1.0,
            dt: 0.1,
            w_goal: 1.0,
            w_collision: 10.0,
            w_effort: 0.1,
            w_proximity: 0.0,
            comfort_distance: 1.5,
            prediction_horizon: 2.0,
            safety_margin: 0.5,
            robot_radius: 0.3,
            v_max: 2.0,
            omega_max: 2.0,
        }
    }
}

impl MppiParams {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::Config("mppi: samples (K) must be at least 1".into()));
        }
        if self.horizon == 0 {
            return Err(Error::Config("mppi: horizon (H) must be at least 1".into()));
        }
        if !(self.lambda > 0.0) {
            return Err(Error::Config("mppi: lambda must be positive".into()));
        }
        for (name, v) in [
            ("sigma_v", self.sigma_v),
            ("sigma_omega", self.sigma_omega),
            ("w_goal", self.w_goal),
            ("w_collision", self.w_collision),
            ("w_effort", self.w_effort),
            ("w_proximity", self.w_proximity),
            ("comfort_distance", self.comfort_distance),
            ("prediction_horizon", self.prediction_horizon),
            ("safety_margin", self.safety_margin),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("mppi: {name} must be non-negative")));
            }
        }
        for (name, v) in [("dt", self.dt), ("v_max", self.v_max), ("omega_max", self.omega_max), ("robot_radius", self.robot_radius)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("mppi: {name} must be positive")));
            }
        }
        Ok(())
    }

    /// Distance covered by the horizon at full speed; used as path lookahead.
    pub fn reach(&self) -> f64 {
        self.v_max * self.dt * self.horizon as f64
    }
}

/// Softmin importance weights `exp(−(c − min c)/λ)`, normalized.
pub fn softmin_weights(costs: &[f64], lambda: f64) -> Vec<f64> {
    let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let raw: Vec<f64> = costs.iter().map(|c| (-(c - min) / lambda).exp()).collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / sum).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MppiStep {
    pub command: RobotCommand,
    pub weight_sum: f64,
    pub min_cost: f64,
    /// Cost of the weighted-mean sequence (the plan being executed).
    pub plan_cost: f64,
}

/// Stateful controller: keeps the nominal control sequence between calls.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mppi {
    pub params: MppiParams,
    nominal: Vec<RobotCommand>,
}

impl Mppi {
    pub fn new(params: MppiParams) -> Result<Self> {
        params.validate()?;
        let nominal = vec![RobotCommand::default(); params.horizon];
        Ok(Self { params, nominal })
    }

    pub fn nominal(&self) -> &[RobotCommand] {
        &self.nominal
    }

    pub fn reset(&mut self) {
        self.nominal = vec![RobotCommand::default(); self.params.horizon];
    }

    fn clamp(&self, c: RobotCommand) -> RobotCommand {
        c.clamped(self.params.v_max, self.params.omega_max)
    }

    /// Cost of a control sequence from `pose`: goal distance at the end,
    /// collision count along the way and `Σ ω² dt` effort. Step `t` is
    /// checked against `costmaps[t]`, or the last map past the end.
    pub fn rollout_cost(&self, pose: Pose, seq: &[RobotCommand], goal: Vec2, costmaps: &[LidarCostmap]) -> f64 {
        let p = &self.params;
        let mut q = pose;
        let mut hits = 0usize;
        let mut effort = 0.0;
        let mut crowding = 0.0;
        for (t, c) in seq.iter().enumerate() {
            let costmap = &costmaps[t.min(costmaps.len() - 1)];
            q = unicycle_step(q, c.v, c.omega, p.dt);
            if costmap.collides(q.position) {
                hits += 1;
            }
            effort += c.omega * c.omega * p.dt;
            if p.w_proximity > 0.0 {
                crowding += (p.comfort_distance - costmap.approx_distance(q.position)).max(0.0) * p.dt;
            }
        }
        p.w_goal * q.position.distance(goal)
            + p.w_collision * hits as f64
            + p.w_effort * effort
            + p.w_proximity * crowding
    }

    /// One MPPI iteration toward the lookahead point of `path`. `velocity`
    /// is the command currently being executed.
    pub fn control(&mut self, pose: Pose, velocity: RobotCommand, path: &Path, lidar: &SensorFrame, rng: &mut SimRng) -> MppiStep {
        let goal = carrot(path, pose.position, self.params.reach());
        self.control_toward(pose, velocity, goal, lidar, rng)
    }

    /// Obstacle maps for each horizon step.
    fn costmaps(&self, pose: Pose, velocity: RobotCommand, lidar: &SensorFrame) -> Vec<LidarCostmap> {
        let p = &self.params;
        let inflation = p.robot_radius + p.safety_margin;
        let finish = |m: LidarCostmap| if p.w_proximity > 0.0 { m.with_distance_field(p.comfort_distance) } else { m };
        if p.prediction_horizon <= 0.0 {
            return vec![finish(LidarCostmap::new(&pose, lidar, inflation))];
        }
        let own = Vec2::from_angle(pose.heading) * velocity.v;
        let steps = ((p.prediction_horizon / p.dt).round() as usize).clamp(1, p.horizon);
        (1..=steps)
            .map(|t| finish(LidarCostmap::predicted(&pose, lidar, own, inflation, t as f64 * p.dt)))
            .collect()
    }

    pub fn control_toward(&mut self, pose: Pose, velocity: RobotCommand, goal: Vec2, lidar: &SensorFrame, rng: &mut SimRng) -> MppiStep {
        let p = self.params.clone();
        let costmaps = self.costmaps(pose, velocity, lidar);
        let (k, h) = (p.samples, p.horizon);

        // Noise is drawn sequentially so the result does not depend on thread scheduling.
        let noise: Vec<(f64, f64)> = (0..k * h)
            .map(|_| (gaussian(rng) * p.sigma_v, gaussian(rng) * p.sigma_omega))
            .collect();
        let sequences: Vec<Vec<RobotCommand>> = (0..k)
            .into_par_iter()
            .map(|i| {
                (0..h)
                    .map(|t| {
                        let (dv, dw) = noise[i * h + t];
                        let n = self.nominal[t];
                        self.clamp(RobotCommand::new(n.v + dv, n.omega + dw))
                    })
                    .collect()
            })
            .collect();
        let costs: Vec<f64> = sequences
            .par_iter()
            .map(|s| self.rollout_cost(pose, s, goal, &costmaps))
            .collect();
        let weights = softmin_weights(&costs, p.lambda);

        let mut mean = vec![RobotCommand::default(); h];
        for (w, seq) in weights.iter().zip(&sequences) {
            for (m, c) in mean.iter_mut().zip(seq) {
                m.v += w * c.v;
                m.omega += w * c.omega;
            }
        }
        let mean: Vec<RobotCommand> = mean.into_iter().map(|c| self.clamp(c)).collect();
        let plan_cost = self.rollout_cost(pose, &mean, goal, &costmaps);
        let command = mean[0];

        self.nominal = mean[1..].to_vec();
        self.nominal.push(*mean.last().expect("horizon ≥ 1"));

        MppiStep {
            command,
            weight_sum: weights.iter().sum(),
            min_cost: costs.iter().copied().fold(f64::INFINITY, f64::min),
            plan_cost,
        }
    }
}
