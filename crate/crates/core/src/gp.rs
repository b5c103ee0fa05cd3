//! Squared-exponential Gaussian-process prior over normalized time,
//! conditioned on exact start and goal observations.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GpHyper {
    pub sigma_f: f64,
    pub h: f64,
}

impl GpHyper {
    pub fn new(sigma_f: f64, h: f64) -> Result<Self> {
        if !(sigma_f > 0.0 && h > 0.0 && sigma_f.is_finite() && h.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "GP hyperparameters must be positive (sigma_f = {sigma_f}, h = {h})"
            )));
        }
        Ok(Self { sigma_f, h })
    }
}

pub fn se_kernel(ti: f64, tj: f64, hyper: &GpHyper) -> f64 {
    let r = ti - tj;
    hyper.sigma_f * hyper.sigma_f * (-(r * r) / (2.0 * hyper.h * hyper.h)).exp()
}

/// Noise added to the endpoint kernel before inversion.
const OBSERVATION_NOISE: f64 = 1e-12;
const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-6;

pub fn uniform_times(segments: usize) -> Vec<f64> {
    (0..=segments).map(|i| i as f64 / segments as f64).collect()
}

/// Interior-block covariance `K** − K*ᵀ K_obs⁻¹ K*` for unit σ_f.
pub fn conditioned_unit_kernel(times: &[f64], h: f64) -> DMatrix<f64> {
    let unit = GpHyper { sigma_f: 1.0, h };
    let last = times.len() - 1;
    let interior = &times[1..last];
    let obs = [times[0], times[last]];
    let m = interior.len();
    let k_ss = DMatrix::from_fn(m, m, |i, j| se_kernel(interior[i], interior[j], &unit));
    let k_s = DMatrix::from_fn(2, m, |i, j| se_kernel(obs[i], interior[j], &unit));
    let mut k_obs = DMatrix::from_fn(2, 2, |i, j| se_kernel(obs[i], obs[j], &unit));
    k_obs[(0, 0)] += OBSERVATION_NOISE;
    k_obs[(1, 1)] += OBSERVATION_NOISE;
    let inv = k_obs.try_inverse().expect("2x2 endpoint kernel with noise is invertible");
    let cond = k_ss - k_s.transpose() * inv * &k_s;
    // symmetrize away rounding
    (&cond + cond.transpose()) * 0.5
}

/// Time-normalized prior: a mean trajectory plus a cached factor of the
/// conditioned interior covariance shared by all state dimensions.
#[derive(Clone, Debug)]
pub struct GpPrior {
    times: Vec<f64>,
    mean: Trajectory,
    hyper: GpHyper,
    dim_scale: Option<Vec<f64>>,
    /// Lower Cholesky factor of the unit-σ_f conditioned kernel.
    unit_chol: DMatrix<f64>,
    jitter: f64,
}

impl GpPrior {
    pub fn new(times: Vec<f64>, mean: Trajectory, hyper: GpHyper) -> Result<Self> {
        if times.len() != mean.states.len() {
            return Err(Error::DimensionMismatch {
                expected: mean.states.len(),
                got: times.len(),
            });
        }
        if times.len() < 3 {
            return Err(Error::InvalidConfig("GP prior needs H >= 2".into()));
        }
        let ordered = times.windows(2).all(|w| w[1] > w[0]);
        if times[0] != 0.0 || *times.last().unwrap() != 1.0 || !ordered {
            return Err(Error::InvalidConfig(
                "timestamps must increase strictly from 0 to 1".into(),
            ));
        }
        let hyper = GpHyper::new(hyper.sigma_f, hyper.h)?;
        let (unit_chol, jitter) = factor(&conditioned_unit_kernel(&times, hyper.h))?;
        Ok(Self {
            times,
            mean,
            hyper,
            dim_scale: None,
            unit_chol,
            jitter,
        })
    }

    /// Prior over `segments + 1` uniform timestamps with a straight-line mean.
    pub fn condition_on_endpoints(
        start: &DVector<f64>,
        goal: &DVector<f64>,
        segments: usize,
        hyper: GpHyper,
    ) -> Result<Self> {
        if start.len() != goal.len() {
            return Err(Error::DimensionMismatch {
                expected: start.len(),
                got: goal.len(),
            });
        }
        Self::new(
            uniform_times(segments),
            Trajectory::straight_line(start, goal, segments),
            hyper,
        )
    }

    /// Per-dimension multipliers on σ_f.
    pub fn with_dim_scale(mut self, scale: Vec<f64>) -> Result<Self> {
        if scale.len() != self.mean.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.dim(),
                got: scale.len(),
            });
        }
        if scale.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::InvalidConfig("dimension scales must be positive".into()));
        }
        self.dim_scale = Some(scale);
        Ok(self)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn mean(&self) -> &Trajectory {
        &self.mean
    }

    pub fn hyper(&self) -> GpHyper {
        self.hyper
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Replaces the mean; endpoints must stay where they were.
    pub fn set_mean(&mut self, mean: Trajectory) {
        debug_assert_eq!(mean.states.len(), self.times.len());
        self.mean = mean;
    }

    /// σ_f only scales the factor, so no refactorization is needed.
    pub fn set_sigma_f(&mut self, sigma_f: f64) -> Result<()> {
        self.hyper = GpHyper::new(sigma_f, self.hyper.h)?;
        Ok(())
    }

    /// Conditioned covariance over all `H + 1` timestamps (zero rows and
    /// columns at the endpoints).
    pub fn covariance(&self) -> DMatrix<f64> {
        let n = self.times.len();
        let m = n - 2;
        let s2 = self.hyper.sigma_f * self.hyper.sigma_f;
        let inner = &self.unit_chol * self.unit_chol.transpose() * s2;
        let mut full = DMatrix::zeros(n, n);
        full.view_mut((1, 1), (m, m)).copy_from(&inner);
        full
    }

    pub fn marginal_std(&self) -> Vec<f64> {
        let c = self.covariance();
        (0..self.times.len()).map(|i| c[(i, i)].max(0.0).sqrt()).collect()
    }

    /// Sample `index` of the stream identified by `seed`; independent of
    /// how samples are distributed over threads.
    pub fn sample(&self, seed: u64, index: u64) -> Trajectory {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        let d = self.mean.dim();
        let m = self.times.len() - 2;
        let mut states = self.mean.states.clone();
        for dim in 0..d {
            let z = DVector::<f64>::from_fn(m, |_, _| StandardNormal.sample(&mut rng));
            let scale = self.hyper.sigma_f * self.dim_scale.as_ref().map_or(1.0, |s| s[dim]);
            let offset = &self.unit_chol * z;
            for i in 0..m {
                states[i + 1][dim] += scale * offset[i];
            }
        }
        Trajectory { states }
    }

    pub fn sample_trajectories(&self, n: usize, seed: u64) -> Vec<Trajectory> {
        (0..n as u64).into_par_iter().map(|i| self.sample(seed, i)).collect()
    }
}

/// Smallest eigenvalue of the unit conditioned kernel, before jitter.
pub fn min_eigenvalue(times: &[f64], h: f64) -> f64 {
    SymmetricEigen::new(conditioned_unit_kernel(times, h))
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

fn factor(k: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    if let Some(c) = k.clone().cholesky() {
        return Ok((c.l(), 0.0));
    }
    let mut jitter = JITTER_START;
    while jitter <= JITTER_MAX * (1.0 + 1e-9) {
        let mut kj = k.clone();
        for i in 0..kj.nrows() {
            kj[(i, i)] += jitter;
        }
        if let Some(c) = kj.cholesky() {
            log::debug!("conditioned kernel factored with jitter {jitter:e}");
            return Ok((c.l(), jitter));
        }
        jitter *= 10.0;
    }
    Err(Error::Factorization { jitter: JITTER_MAX })
}
