//! Sampling-based trajectory optimization: samples from the GP prior are
//! scored by an exponential cost-likelihood and averaged into the mean,
//! while σ_f stays wide until the mean is collision-free and then decays.

mod cost;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use cost::{
    boundary_cost, cost_likelihood, evaluate_costs, length_cost, obstacle_cost, BoundaryCostSpec, CostSpec,
    CostTerms, DistanceChecker, FnChecker, LengthCostSpec, ObstacleCostSpec,
};

use crate::error::{Error, Result};
use crate::gp::{GpHyper, GpPrior};
use crate::robot::RobotModel;
use crate::trajectory::Trajectory;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    /// Trajectory segments H (H + 1 waypoints).
    pub segments: usize,
    pub samples: usize,
    pub iters: usize,
    pub gamma: f64,
    pub sigma_f_init: f64,
    pub sigma_min: f64,
    pub eta: f64,
    pub h: f64,
    pub seed: u64,
    /// Kernel updating: decay σ_f once the mean is collision-free. When off,
    /// σ_f stays at `sigma_f_init`.
    pub kus: bool,
    pub early_stop: bool,
    /// Keep every n-th mean in the result (0 keeps none).
    pub record_means_every: usize,
    /// Keep the sampled trajectories of the first and last iteration.
    pub record_samples: bool,
    /// Optional per-dimension multipliers on σ_f.
    pub dim_scale: Option<Vec<f64>>,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            segments: 20,
            samples: 200,
            iters: 200,
            gamma: 0.5,
            sigma_f_init: 0.02,
            sigma_min: 0.0005,
            eta: 0.9,
            h: 0.01,
            seed: 0,
            kus: true,
            early_stop: true,
            record_means_every: 0,
            record_samples: false,
            dim_scale: None,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.segments < 2 || self.samples == 0 {
            return fail("need at least 2 segments and 1 sample");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return fail("gamma must lie in (0, 1]");
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return fail("eta must lie in (0, 1)");
        }
        if !(self.sigma_f_init > 0.0 && self.sigma_min > 0.0 && self.h > 0.0) {
            return fail("sigma_f_init, sigma_min and h must be positive");
        }
        Ok(())
    }
}

/// Metrics of the mean at the start of one iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iter: usize,
    pub obstacle_cost: f64,
    pub total_cost: f64,
    pub length: f64,
    /// σ_f used for this iteration's samples.
    pub sigma_f: f64,
    pub weight_entropy: f64,
    pub fallback: bool,
}

#[derive(Clone, Debug)]
pub struct PlanResult {
    pub trajectory: Trajectory,
    pub log: Vec<IterationLog>,
    pub means: Vec<(usize, Trajectory)>,
    pub first_samples: Vec<Trajectory>,
    pub last_samples: Vec<Trajectory>,
    pub final_costs: CostTerms,
    /// The final mean has no obstacle violations.
    pub success: bool,
    /// Iteration whose update produced a non-finite mean; the run stops
    /// there and keeps the last finite mean and the log so far.
    pub diverged_at: Option<usize>,
}

/// Normalized weights `ω_i = p_i / Σ p_j`. When every likelihood is zero,
/// the lowest-cost tenth of the samples share the weight uniformly; the
/// flag reports that case.
pub fn sample_weights(likelihoods: &[f64], totals: &[f64]) -> (Vec<f64>, bool) {
    let sum: f64 = likelihoods.iter().sum();
    if sum > 0.0 && sum.is_finite() {
        return (likelihoods.iter().map(|l| l / sum).collect(), false);
    }
    let n = likelihoods.len();
    let keep = n.div_ceil(10).max(1);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| totals[a].total_cmp(&totals[b]));
    let mut w = vec![0.0; n];
    for &i in &order[..keep] {
        w[i] = 1.0 / keep as f64;
    }
    (w, true)
}

pub fn weight_entropy(weights: &[f64]) -> f64 {
    -weights
        .iter()
        .filter(|&&w| w > 0.0)
        .map(|w| w * w.ln())
        .sum::<f64>()
}

/// `μ + γ Σ ω_i (τ_i − μ)`, with endpoints copied from the mean.
pub fn mppi_update(mean: &Trajectory, samples: &[Trajectory], weights: &[f64], gamma: f64) -> Trajectory {
    let mut states = mean.states.clone();
    let last = states.len() - 1;
    for i in 1..last {
        let mut step = DVector::zeros(mean.dim());
        for (s, &w) in samples.iter().zip(weights) {
            if w != 0.0 {
                step += (&s.states[i] - &mean.states[i]) * w;
            }
        }
        states[i] += step * gamma;
    }
    Trajectory { states }
}

/// Kernel updating rule: hold σ_f while the mean collides, otherwise shrink
/// it by η, never below σ_min.
pub fn update_sigma_f(sigma_f: f64, obstacle_cost_of_mean: f64, eta: f64, sigma_min: f64) -> f64 {
    if obstacle_cost_of_mean > 0.0 {
        sigma_f
    } else if sigma_f > sigma_min {
        (eta * sigma_f).max(sigma_min)
    } else {
        sigma_min
    }
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

pub fn iteration_seed(seed: u64, iter: usize) -> u64 {
    splitmix(splitmix(seed) ^ iter as u64)
}

const STALL_ITERATIONS: usize = 20;
const STALL_TOLERANCE: f64 = 1e-4;

pub fn plan(
    start: &DVector<f64>,
    goal: &DVector<f64>,
    checker: &dyn DistanceChecker,
    robot: Option<&RobotModel>,
    cfg: &PlannerConfig,
    spec: &CostSpec,
) -> Result<PlanResult> {
    cfg.validate()?;
    spec.validate()?;
    let evaluate = |t: &Trajectory| evaluate_costs(t, checker, robot, spec);
    if start == goal {
        let trajectory = Trajectory::straight_line(start, goal, cfg.segments);
        let final_costs = evaluate(&trajectory)?;
        return Ok(PlanResult {
            success: final_costs.obstacle == 0.0,
            trajectory,
            log: Vec::new(),
            means: Vec::new(),
            first_samples: Vec::new(),
            last_samples: Vec::new(),
            final_costs,
            diverged_at: None,
        });
    }
    let mut prior = GpPrior::condition_on_endpoints(start, goal, cfg.segments, GpHyper::new(cfg.sigma_f_init, cfg.h)?)?;
    if let Some(scale) = &cfg.dim_scale {
        prior = prior.with_dim_scale(scale.clone())?;
    }
    let mut sigma = cfg.sigma_f_init;
    let mut mean_costs = evaluate(prior.mean())?;
    let mut result = PlanResult {
        trajectory: prior.mean().clone(),
        log: Vec::with_capacity(cfg.iters),
        means: Vec::new(),
        first_samples: Vec::new(),
        last_samples: Vec::new(),
        final_costs: mean_costs,
        success: false,
        diverged_at: None,
    };
    let mut stalled = 0;
    for t in 0..cfg.iters {
        if cfg.record_means_every > 0 && t % cfg.record_means_every == 0 {
            result.means.push((t, prior.mean().clone()));
        }
        prior.set_sigma_f(sigma)?;
        let seed = iteration_seed(cfg.seed, t);
        let samples = prior.sample_trajectories(cfg.samples, seed);
        let scored: Vec<(f64, f64)> = samples
            .par_iter()
            .map(|s| evaluate(s).map(|c| cost_likelihood(&c, spec)))
            .collect::<Result<_>>()?;
        let (totals, likelihoods): (Vec<f64>, Vec<f64>) = scored.into_iter().unzip();
        let (weights, fallback) = sample_weights(&likelihoods, &totals);
        if fallback {
            log::warn!("iteration {t}: all likelihoods vanished, using lowest-cost samples");
        }
        let next = mppi_update(prior.mean(), &samples, &weights, cfg.gamma);
        result.log.push(IterationLog {
            iter: t,
            obstacle_cost: mean_costs.obstacle,
            total_cost: cost_likelihood(&mean_costs, spec).0,
            length: mean_costs.length,
            sigma_f: sigma,
            weight_entropy: weight_entropy(&weights),
            fallback,
        });
        if cfg.record_samples {
            if t == 0 {
                result.first_samples = samples.clone();
            }
            result.last_samples = samples;
        }
        if !next.is_finite() {
            log::error!("iteration {t}: non-finite mean, stopping");
            result.diverged_at = Some(t);
            break;
        }
        if cfg.kus {
            sigma = update_sigma_f(sigma, mean_costs.obstacle, cfg.eta, cfg.sigma_min);
        }
        let previous_length = mean_costs.length;
        prior.set_mean(next);
        mean_costs = evaluate(prior.mean())?;

        let improvement = (previous_length - mean_costs.length) / previous_length.max(f64::MIN_POSITIVE);
        let settled = mean_costs.obstacle == 0.0 && (!cfg.kus || sigma <= cfg.sigma_min);
        stalled = if settled && improvement < STALL_TOLERANCE { stalled + 1 } else { 0 };
        if cfg.early_stop && stalled >= STALL_ITERATIONS {
            log::info!("early stop after {} iterations", t + 1);
            break;
        }
    }
    result.trajectory = prior.mean().clone();
    if cfg.record_means_every > 0 {
        result.means.push((result.log.len(), result.trajectory.clone()));
    }
    result.final_costs = mean_costs;
    result.success = mean_costs.obstacle == 0.0 && result.diverged_at.is_none();
    Ok(result)
}
