//! Dynamic Window Approach local controller.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::local::{bearing, carrot, unicycle_step, LidarCostmap};
use super::Path;
use crate::envs::RobotCommand;
use crate::error::{Error, Result};
use crate::geom::Pose;
use crate::sim::SensorFrame;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DwaParams {
    pub v_samples: usize,
    pub omega_samples: usize,
    /// Linear acceleration limit, m/s².
    pub accel_v: f64,
    /// Angular acceleration limit, rad/s².
    pub accel_omega: f64,
    /// Deceleration assumed for the admissibility check, m/s².
    pub brake_decel: f64,
    pub horizon: f64,
    pub sim_dt: f64,
    /// Control period: the window is what is reachable within it.
    pub control_dt: f64,
    pub w_heading: f64,
    pub w_clearance: f64,
    pub w_velocity: f64,
    /// Clearance beyond this many meters scores the same.
    pub clearance_cap: f64,
    pub lookahead: f64,
    pub robot_radius: f64,
    pub v_max: f64,
    pub omega_max: f64,
}

impl Default for DwaParams {
    fn default() -> Self {
        Self {
            v_samples: 11,
            omega_samples: 21,
            accel_v: 2.0,
            accel_omega: 4.0,
            brake_decel: 2.0,
            horizon: 2.0,
            sim_dt: 0.1,
            control_dt: 0.1,
            w_heading: 0.8,
            w_clearance: 0.2,
            w_velocity: 0.2,
            clearance_cap: 2.0,
            lookahead: 3.0,
            robot_radius: 0.3,
            v_max: 2.0,
            omega_max: 2.0,
        }
    }
}

impl DwaParams {
    pub fn validate(&self) -> Result<()> {
        let w = [self.w_heading, self.w_clearance, self.w_velocity];
        if w.iter().any(|&x| !(x >= 0.0)) || w.iter().all(|&x| x == 0.0) {
            return Err(Error::Config("dwa: weights must be non-negative and not all zero".into()));
        }
        if self.v_samples < 2 || self.omega_samples < 2 {
            return Err(Error::Config("dwa: need at least 2 samples per axis".into()));
        }
        for (name, v) in [
            ("accel_v", self.accel_v),
            ("accel_omega", self.accel_omega),
            ("brake_decel", self.brake_decel),
            ("horizon", self.horizon),
            ("sim_dt", self.sim_dt),
            ("control_dt", self.control_dt),
            ("v_max", self.v_max),
            ("omega_max", self.omega_max),
            ("robot_radius", self.robot_radius),
            ("clearance_cap", self.clearance_cap),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("dwa: {name} must be positive")));
            }
        }
        Ok(())
    }

    /// Angular spacing of the sampled window.
    pub fn omega_resolution(&self) -> f64 {
        2.0 * self.accel_omega * self.control_dt / (self.omega_samples - 1) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DwaDecision {
    pub command: RobotCommand,
    /// True when no candidate was admissible and the robot spins in place.
    pub recovery: bool,
    pub score: f64,
}

/// Poses visited when `cmd` is held for one control period and the robot
/// then brakes at `brake_decel` along the same curvature until it stops.
pub fn braking_rollout(pose: Pose, cmd: RobotCommand, p: &DwaParams) -> Vec<Pose> {
    let mut out = vec![pose];
    let mut cur = pose;
    let mut t = 0.0;
    while t < p.control_dt - 1e-12 {
        let h = p.sim_dt.min(p.control_dt - t);
        cur = unicycle_step(cur, cmd.v, cmd.omega, h);
        out.push(cur);
        t += h;
    }
    let curvature = if cmd.v > 0.0 { cmd.omega / cmd.v } else { 0.0 };
    let mut v = cmd.v;
    while v > 1e-9 {
        let h = p.sim_dt.min(v / p.brake_decel);
        let v_next = (v - p.brake_decel * h).max(0.0);
        let v_avg = 0.5 * (v + v_next);
        cur = unicycle_step(cur, v_avg, v_avg * curvature, h);
        out.push(cur);
        v = v_next;
    }
    out
}

fn window(current: RobotCommand, p: &DwaParams) -> (Vec<f64>, Vec<f64>) {
    let lin = |lo: f64, hi: f64, n: usize| -> Vec<f64> {
        if hi - lo < 1e-12 {
            return vec![lo];
        }
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    };
    let v_lo = (current.v - p.accel_v * p.control_dt).max(0.0);
    let v_hi = (current.v + p.accel_v * p.control_dt).min(p.v_max);
    let w_lo = (current.omega - p.accel_omega * p.control_dt).max(-p.omega_max);
    let w_hi = (current.omega + p.accel_omega * p.control_dt).min(p.omega_max);
    let mut ws = lin(w_lo, w_hi, p.omega_samples);
    // Make sure "straight" is a candidate whenever the window contains it.
    if w_lo <= 0.0 && 0.0 <= w_hi && !ws.contains(&0.0) {
        ws.push(0.0);
    }
    (lin(v_lo.min(v_hi), v_hi, p.v_samples), ws)
}

/// Picks the best admissible command in the dynamic window around `current`.
pub fn dwa_control(pose: Pose, current: RobotCommand, path: &Path, lidar: &SensorFrame, p: &DwaParams) -> DwaDecision {
    let costmap = LidarCostmap::new(&pose, lidar, p.robot_radius);
    let (vs, ws) = window(current, p);
    let steps = (p.horizon / p.sim_dt).round().max(1.0) as usize;

    let mut best: Option<DwaDecision> = None;
    // Standing still is the recovery behaviour, not a candidate.
    for &v in vs.iter().filter(|&&v| v > 1e-9) {
        for &w in &ws {
            let cmd = RobotCommand::new(v, w);
            if braking_rollout(pose, cmd, p).iter().any(|q| costmap.collides(q.position)) {
                continue;
            }
            let mut q = pose;
            let mut clearance = f64::INFINITY;
            for _ in 0..steps {
                q = unicycle_step(q, v, w, p.sim_dt);
                clearance = clearance.min(costmap.distance(q.position) - p.robot_radius);
            }
            let heading = 1.0 - bearing(&q, carrot(path, q.position, p.lookahead)).abs() / PI;
            let clear = clearance.clamp(0.0, p.clearance_cap) / p.clearance_cap;
            let speed = v / p.v_max;
            let score = p.w_heading * heading + p.w_clearance * clear + p.w_velocity * speed;
            if best.is_none_or(|b| score > b.score) {
                best = Some(DwaDecision {
                    command: cmd,
                    recovery: false,
                    score,
                });
            }
        }
    }
    best.unwrap_or_else(|| {
        let target = carrot(path, pose.position, p.lookahead);
        let turn = if bearing(&pose, target) >= 0.0 { p.omega_max } else { -p.omega_max };
        DwaDecision {
            command: RobotCommand::new(0.0, turn),
            recovery: true,
            score: f64::NEG_INFINITY,
        }
    })
}
