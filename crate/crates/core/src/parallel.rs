//! Vectorized execution of independent environment instances.
//!
//! Each environment owns its state; a step hands every instance to the
//! rayon pool and gathers results back in index order. Environment `i` is
//! seeded with stream `i` of the base seed, so trajectories do not depend on
//! how the pool schedules work.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envs::Environment;
use crate::error::{Error, Result};
use crate::rng::EnvSeed;

#[derive(Debug, Clone, PartialEq)]
pub struct VectorBatch<O> {
    pub n_envs: usize,
    pub observations: Vec<O>,
    /// Rewards of the step just taken (empty after a reset).
    pub rewards: Vec<Vec<f64>>,
    pub dones: Vec<bool>,
    /// Set where the environment finished and `observations[i]` is the
    /// first observation of its next episode.
    pub reset: Vec<bool>,
    pub global_step: u64,
}

pub struct VecEnv<E: Environment> {
    envs: Vec<E>,
    base_seed: u64,
    global_step: u64,
}

fn wrap(index: usize, e: Error) -> Error {
    Error::Env {
        index,
        source: Box::new(e),
    }
}

impl<E: Environment> VecEnv<E> {
    /// Builds `n_envs` instances with `factory(i)`.
    pub fn new(n_envs: usize, base_seed: u64, factory: impl Fn(usize) -> Result<E>) -> Result<Self> {
        if n_envs == 0 {
            return Err(Error::InvalidArgument("n_envs must be at least 1".into()));
        }
        let envs = (0..n_envs).map(|i| factory(i).map_err(|e| wrap(i, e))).collect::<Result<_>>()?;
        Ok(Self {
            envs,
            base_seed,
            global_step: 0,
        })
    }

    pub fn n_envs(&self) -> usize {
        self.envs.len()
    }

    pub fn envs(&self) -> &[E] {
        &self.envs
    }

    pub fn seed_of(&self, i: usize) -> EnvSeed {
        EnvSeed::with_stream(self.base_seed, i as u64)
    }

    /// Resets every instance from its `(base_seed, i)` seed.
    pub fn reset(&mut self) -> Result<VectorBatch<E::Observation>> {
        let base = self.base_seed;
        let observations = self
            .envs
            .par_iter_mut()
            .enumerate()
            .map(|(i, env)| env.reset(Some(EnvSeed::with_stream(base, i as u64))).map_err(|e| wrap(i, e)))
            .collect::<Result<Vec<_>>>()?;
        self.global_step = 0;
        let n = self.envs.len();
        Ok(VectorBatch {
            n_envs: n,
            observations,
            rewards: vec![Vec::new(); n],
            dones: vec![false; n],
            reset: vec![true; n],
            global_step: 0,
        })
    }

    /// Steps instance `i` with `actions[i]`. Finished instances are reset
    /// in place, continuing their own random stream.
    pub fn step(&mut self, actions: Vec<E::Action>) -> Result<VectorBatch<E::Observation>> {
        if actions.len() != self.envs.len() {
            return Err(Error::ActionCount {
                expected: self.envs.len(),
                got: actions.len(),
            });
        }
        let results = self
            .envs
            .par_iter_mut()
            .zip(actions.into_par_iter())
            .enumerate()
            .map(|(i, (env, a))| {
                let t = env.step(a).map_err(|e| wrap(i, e))?;
                if t.done {
                    let obs = env.reset(None).map_err(|e| wrap(i, e))?;
                    Ok((obs, t.rewards, true))
                } else {
                    Ok((t.observation, t.rewards, false))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        self.global_step += 1;
        let n = results.len();
        let mut batch = VectorBatch {
            n_envs: n,
            observations: Vec::with_capacity(n),
            rewards: Vec::with_capacity(n),
            dones: Vec::with_capacity(n),
            reset: Vec::with_capacity(n),
            global_step: self.global_step,
        };
        for (obs, rewards, done) in results {
            batch.observations.push(obs);
            batch.rewards.push(rewards);
            batch.dones.push(done);
            batch.reset.push(done);
        }
        Ok(batch)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThroughputSample {
    pub n_envs: usize,
    pub steps_per_second: f64,
    pub wall_time_s: f64,
    pub total_steps: u64,
}

/// Steps/sec of the vector executor for each count in `env_counts`, running
/// `steps_per_run` vector steps with `policy(env_index, observation)`.
pub fn measure_throughput<E: Environment>(
    factory: impl Fn(usize) -> Result<E>,
    env_counts: &[usize],
    steps_per_run: u64,
    base_seed: u64,
    mut policy: impl FnMut(usize, &E::Observation) -> E::Action,
) -> Result<Vec<ThroughputSample>> {
    if steps_per_run < 100 {
        return Err(Error::InvalidArgument("steps_per_run must be at least 100".into()));
    }
    let mut out = Vec::with_capacity(env_counts.len());
    for &n in env_counts {
        let mut vec = VecEnv::new(n, base_seed, &factory)?;
        let mut obs = vec.reset()?.observations;
        let start = Instant::now();
        for _ in 0..steps_per_run {
            let actions = obs.iter().enumerate().map(|(i, o)| policy(i, o)).collect();
            obs = vec.step(actions)?.observations;
        }
        let wall = start.elapsed().as_secs_f64().max(1e-12);
        let total = steps_per_run * n as u64;
        log::info!("throughput n={n}: {:.0} steps/s", total as f64 / wall);
        out.push(ThroughputSample {
            n_envs: n,
            steps_per_second: total as f64 / wall,
            wall_time_s: wall,
            total_steps: total,
        });
    }
    Ok(out)
}

/// CSV with columns `n_envs, steps_per_second, wall_time_s, total_steps`.
pub fn throughput_csv(samples: &[ThroughputSample]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for s in samples {
        w.serialize(s).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// Two whitespace-separated columns (`n_envs steps_per_second`) for gnuplot.
pub fn throughput_plot_data(samples: &[ThroughputSample]) -> String {
    let mut out = String::from("# n_envs steps_per_second\n");
    for s in samples {
        out.push_str(&format!("{} {:.3}\n", s.n_envs, s.steps_per_second));
    }
    out
}
