//! Train-many, keep-the-fittest policy search.
//!
//! Candidates are drawn from a diagonal Gaussian over the parameter vector
//! (cross-entropy method): evaluate each candidate on a fixed set of
//! randomized start/goal episodes, refit the Gaussian to the elite
//! fraction, repeat. The returned policy is the argmax of fitness over every
//! candidate evaluated.

use std::cmp::Ordering;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::rollout::{summarize, Episodes, PolicyEpisodes};
use super::{Policy, RewardConfig};
use crate::error::{Error, Result};
use crate::seed;
use crate::sim::Simulator;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub population: usize,
    pub iterations: usize,
    pub elite_fraction: f64,
    pub episodes: usize,
    pub max_steps: u64,
    /// Goal tolerance, metres.
    pub goal_tolerance: f64,
    pub max_goal_distance: f64,
    /// Initial standard deviation relative to each parameter's magnitude.
    pub init_std: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            population: 24,
            iterations: 20,
            elite_fraction: 0.25,
            episodes: 64,
            max_steps: 150,
            goal_tolerance: 0.5,
            max_goal_distance: 8.0,
            init_std: 0.25,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Defaults with an episode cap of twice the time needed to cover
    /// `max_goal_distance` at top speed.
    pub fn for_simulator<S: Simulator>(sim: &S) -> Self {
        let d = Self::default();
        Self {
            max_steps: episode_horizon(sim, d.max_goal_distance),
            ..d
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.population == 0 {
            return Err(Error::InvalidParameter("population must be positive".into()));
        }
        if !(self.elite_fraction > 0.0 && self.elite_fraction < 1.0) {
            return Err(Error::InvalidParameter("elite fraction must lie in (0, 1)".into()));
        }
        if self.episodes == 0 || self.max_steps == 0 {
            return Err(Error::InvalidParameter("episodes and max_steps must be positive".into()));
        }
        if !(self.goal_tolerance > 0.0) || !(self.max_goal_distance > self.goal_tolerance) {
            return Err(Error::InvalidParameter("invalid goal tolerance / distance".into()));
        }
        if !(self.init_std >= 0.0) {
            return Err(Error::InvalidParameter("init_std must be non-negative".into()));
        }
        Ok(())
    }
}

/// `ceil(2 * distance / (speed * dt))` steps.
pub fn episode_horizon<S: Simulator>(sim: &S, max_goal_distance: f64) -> u64 {
    (2.0 * max_goal_distance / (sim.nominal_speed() * sim.dt())).ceil().max(1.0) as u64
}

/// Success rate first, mean discounted return second.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fitness {
    pub success_rate: f64,
    pub mean_return: f64,
}

impl Fitness {
    pub fn cmp(&self, other: &Fitness) -> Ordering {
        self.success_rate
            .total_cmp(&other.success_rate)
            .then(self.mean_return.total_cmp(&other.mean_return))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateRecord {
    pub iteration: usize,
    /// Position in evaluation order across the whole search.
    pub index: usize,
    pub params: Vec<f64>,
    pub fitness: Fitness,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub policy: Policy,
    pub best: CandidateRecord,
    pub log: Vec<CandidateRecord>,
}

impl TrainOutcome {
    /// Best fitness seen in each iteration.
    pub fn iteration_best(&self) -> Vec<(usize, Fitness)> {
        let mut out: Vec<(usize, Fitness)> = Vec::new();
        for r in &self.log {
            match out.last_mut() {
                Some((it, f)) if *it == r.iteration => {
                    if r.fitness.cmp(f) == Ordering::Greater {
                        *f = r.fitness;
                    }
                }
                _ => out.push((r.iteration, r.fitness)),
            }
        }
        out
    }
}

/// Searches around `initial` and returns the fittest candidate.
///
/// `on_iteration` is called after each iteration with its index and best
/// fitness.
pub fn train_policy_search<S: Simulator>(
    sim: &S,
    initial: &Policy,
    cfg: &TrainConfig,
    reward: &RewardConfig,
    mut on_iteration: impl FnMut(usize, &Fitness),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    reward.validate()?;
    if initial.task() != sim.task() {
        return Err(Error::DimensionMismatch(format!(
            "{} policy cannot train in a {} simulator",
            initial.task(),
            sim.task()
        )));
    }
    sim.sample_free(&mut seed::rng(cfg.seed))?;

    let episode_seeds: Vec<u64> = (0..cfg.episodes)
        .map(|j| seed::derive_path(cfg.seed, &[seed::STREAM_TRAIN, 0, j as u64]))
        .collect();
    let mut sampler = seed::rng(seed::derive_path(cfg.seed, &[seed::STREAM_TRAIN, 1]));

    let dim = initial.params().len();
    let mut mean = initial.params().to_vec();
    let mut std: Vec<f64> = mean.iter().map(|m| cfg.init_std * m.abs().max(0.1)).collect();
    let min_std: Vec<f64> = std.iter().map(|s| s * 0.05).collect();
    let n_elite = ((cfg.population as f64 * cfg.elite_fraction).ceil() as usize).clamp(1, cfg.population);

    let mut log: Vec<CandidateRecord> = Vec::new();
    for iteration in 0..=cfg.iterations {
        let candidates: Vec<Vec<f64>> = (0..cfg.population)
            .map(|c| {
                if c == 0 {
                    mean.clone()
                } else {
                    (0..dim)
                        .map(|d| {
                            let z: f64 = StandardNormal.sample(&mut sampler);
                            mean[d] + std[d] * z
                        })
                        .collect()
                }
            })
            .collect();

        let fitness: Vec<Fitness> = candidates
            .par_iter()
            .map(|params| {
                let policy = initial.with_params(params.clone())?;
                let source = PolicyEpisodes {
                    sim,
                    controller: &policy,
                    max_steps: cfg.max_steps,
                    tolerance: cfg.goal_tolerance,
                    max_goal_distance: cfg.max_goal_distance,
                    reward: *reward,
                };
                let outcomes = episode_seeds
                    .iter()
                    .map(|&s| source.run(&mut seed::rng(s)))
                    .collect::<Result<Vec<_>>>()?;
                let stats = summarize(&outcomes);
                Ok(Fitness {
                    success_rate: stats.success_rate,
                    mean_return: stats.mean_return,
                })
            })
            .collect::<Result<_>>()?;

        let base = log.len();
        for (c, (params, fit)) in candidates.into_iter().zip(fitness).enumerate() {
            log.push(CandidateRecord {
                iteration,
                index: base + c,
                params,
                fitness: fit,
            });
        }
        let this_iter = &log[base..];
        let mut order: Vec<usize> = (0..this_iter.len()).collect();
        // Descending fitness, lower index first on ties.
        order.sort_by(|&a, &b| this_iter[b].fitness.cmp(&this_iter[a].fitness).then(a.cmp(&b)));
        on_iteration(iteration, &this_iter[order[0]].fitness);

        if iteration < cfg.iterations {
            let elites: Vec<&[f64]> = order[..n_elite].iter().map(|&i| this_iter[i].params.as_slice()).collect();
            for d in 0..dim {
                let m = elites.iter().map(|e| e[d]).sum::<f64>() / n_elite as f64;
                let var = elites.iter().map(|e| (e[d] - m).powi(2)).sum::<f64>() / n_elite as f64;
                mean[d] = m;
                std[d] = (0.5 * std[d] + 0.5 * var.sqrt()).max(min_std[d]);
            }
        }
    }

    let best = log
        .iter()
        .reduce(|best, r| if r.fitness.cmp(&best.fitness) == Ordering::Greater { r } else { best })
        .expect("population is non-empty")
        .clone();
    let mut policy = initial.with_params(best.params.clone())?;
    policy.training_seed = Some(cfg.seed);
    policy.fitness = Some(best.fitness);
    Ok(TrainOutcome { policy, best, log })
}
