//! Mini-batch training of a link network on distance and normal-alignment
//! targets.
//!
//! The alignment term depends on the input gradient of the network, so its
//! parameter gradient is obtained by pushing three forward-mode tangents
//! (one per input axis) through the layers and back-propagating through
//! both the primal and the tangent chains.

use nalgebra::{DMatrix, DVector, Vector3};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mlp::{MlpSdf, Provenance, DEFAULT_TRUST_RADIUS, LINK_ARCHITECTURE};
use crate::error::{Error, Result};
use crate::mesh::{LinkDataset, SdfSample};

/// How the parameter gradient of the alignment term is computed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlignmentGradient {
    /// Forward tangents plus reverse sweep; exact.
    #[default]
    Analytic,
    /// Central differences of the network output for the input gradient.
    FiniteDifference,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Learning rate is multiplied by this every `lr_step_epochs`.
    pub lr_decay: f64,
    pub lr_step_epochs: usize,
    pub lambda_d: f64,
    pub lambda_n: f64,
    pub seed: u64,
    pub validation_fraction: f64,
    pub alignment_gradient: AlignmentGradient,
    pub layer_sizes: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            batch_size: 1024,
            learning_rate: 1e-3,
            lr_decay: 0.5,
            lr_step_epochs: 100,
            lambda_d: 1.0,
            lambda_n: 0.1,
            seed: 0,
            validation_fraction: 0.1,
            alignment_gradient: AlignmentGradient::Analytic,
            layer_sizes: LINK_ARCHITECTURE.to_vec(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.epochs == 0 || self.batch_size == 0 || self.lr_step_epochs == 0 {
            return bad("epochs, batch_size and lr_step_epochs must be positive");
        }
        if !(self.learning_rate > 0.0 && self.lr_decay > 0.0) {
            return bad("learning rate and decay must be positive");
        }
        if !(self.lambda_d >= 0.0 && self.lambda_n >= 0.0) {
            return bad("loss weights must be nonnegative");
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad("validation_fraction must lie in (0, 1)");
        }
        if self.layer_sizes.len() < 2 || self.layer_sizes[0] != 3 || self.layer_sizes.last() != Some(&1) {
            return bad("layer sizes must start at 3 and end at 1");
        }
        Ok(())
    }

    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        self.learning_rate * self.lr_decay.powi((epoch / self.lr_step_epochs) as i32)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub learning_rate: f64,
    /// Mean of λ_d·r² + λ_n·A over the training split.
    pub loss: f64,
    pub distance_rmsd: f64,
    pub alignment_rmsd: f64,
    pub validation_distance_rmsd: Option<f64>,
    pub validation_alignment_rmsd: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochLog>,
    pub train_samples: usize,
    pub validation_samples: usize,
}

impl TrainReport {
    pub fn last(&self) -> &EpochLog {
        self.epochs.last().expect("at least one epoch")
    }
}

/// Network parameters as dense matrices for training.
#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    pub weights: Vec<DMatrix<f64>>,
    pub biases: Vec<DVector<f64>>,
}

impl Params {
    pub fn from_net(net: &MlpSdf) -> Self {
        Self {
            weights: net
                .layers
                .iter()
                .map(|l| DMatrix::from_row_slice(l.n_out, l.n_in, &l.weights))
                .collect(),
            biases: net.layers.iter().map(|l| DVector::from_vec(l.bias.clone())).collect(),
        }
    }

    pub fn write_into(&self, net: &mut MlpSdf) {
        for ((layer, w), b) in net.layers.iter_mut().zip(&self.weights).zip(&self.biases) {
            for i in 0..layer.n_out {
                for k in 0..layer.n_in {
                    layer.weights[i * layer.n_in + k] = w[(i, k)];
                }
            }
            layer.bias.copy_from_slice(b.as_slice());
        }
    }

    fn zeros_like(&self) -> Self {
        Self {
            weights: self.weights.iter().map(|w| DMatrix::zeros(w.nrows(), w.ncols())).collect(),
            biases: self.biases.iter().map(|b| DVector::zeros(b.len())).collect(),
        }
    }

    fn add_assign(&mut self, other: &Params) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            *a += b;
        }
    }

    fn scale(&mut self, s: f64) {
        self.weights.iter_mut().for_each(|w| *w *= s);
        self.biases.iter_mut().for_each(|b| *b *= s);
    }

    fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    /// Flattened view, weights then biases, layer by layer.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }
}

/// Loss sums over a chunk and the matching parameter gradient.
#[derive(Clone, Debug)]
pub struct ChunkGradient {
    pub distance_sq: f64,
    pub alignment: f64,
    pub loss: f64,
    pub grad: Params,
}

fn relu_mask(z: &DMatrix<f64>) -> DMatrix<f64> {
    z.map(|v| if v > 0.0 { 1.0 } else { 0.0 })
}

struct Forward {
    /// Layer inputs: `acts[0]` is the point batch, `acts[l]` the rectified
    /// output of layer `l`.
    acts: Vec<DMatrix<f64>>,
    masks: Vec<DMatrix<f64>>,
    output: DMatrix<f64>,
}

fn forward(params: &Params, x: DMatrix<f64>) -> Forward {
    let last = params.weights.len() - 1;
    let mut acts = vec![x];
    let mut masks = Vec::with_capacity(last);
    for l in 0..last {
        let mut z = &params.weights[l] * &acts[l];
        for mut col in z.column_iter_mut() {
            col += &params.biases[l];
        }
        masks.push(relu_mask(&z));
        acts.push(z.map(|v| v.max(0.0)));
    }
    let mut output = &params.weights[last] * &acts[last];
    for v in output.iter_mut() {
        *v += params.biases[last][0];
    }
    Forward { acts, masks, output }
}

/// Accumulates the parameter gradient of `Σ seed · f` back through the primal chain.
fn backprop_primal(params: &Params, fwd: &Forward, seed: DMatrix<f64>, grad: &mut Params) {
    let mut delta = seed;
    for l in (0..params.weights.len()).rev() {
        grad.weights[l] += &delta * fwd.acts[l].transpose();
        grad.biases[l] += delta.column_sum();
        if l > 0 {
            delta = (params.weights[l].transpose() * &delta).component_mul(&fwd.masks[l - 1]);
        }
    }
}

fn points_matrix(samples: &[&SdfSample], shift: Option<(usize, f64)>) -> DMatrix<f64> {
    DMatrix::from_fn(3, samples.len(), |r, c| {
        let mut v = samples[c].p[r];
        if let Some((axis, h)) = shift {
            if axis == r {
                v += h;
            }
        }
        v
    })
}

/// Alignment penalty `1 − (g·n)²/‖g‖²` (squared cross product of the unit
/// gradient with the unit normal) and its derivative with respect to `g`.
pub fn alignment_penalty(g: &Vector3<f64>, n: &Vector3<f64>) -> (f64, Vector3<f64>) {
    let gg = g.norm_squared();
    if gg < 1e-24 {
        return (1.0, Vector3::zeros());
    }
    let gn = g.dot(n);
    let a = 1.0 - gn * gn / gg;
    let da = n * (-2.0 * gn / gg) + g * (2.0 * gn * gn / (gg * gg));
    (a, da)
}

/// Loss sums and gradient for one chunk of samples.
pub fn chunk_gradient(
    params: &Params,
    samples: &[&SdfSample],
    lambda_d: f64,
    lambda_n: f64,
    mode: AlignmentGradient,
) -> ChunkGradient {
    let b = samples.len();
    let last = params.weights.len() - 1;
    let fwd = forward(params, points_matrix(samples, None));
    let mut grad = params.zeros_like();
    let mut out = ChunkGradient {
        distance_sq: 0.0,
        alignment: 0.0,
        loss: 0.0,
        grad: params.zeros_like(),
    };

    let mut d_f = DMatrix::zeros(1, b);
    for (i, s) in samples.iter().enumerate() {
        let r = fwd.output[(0, i)] - s.d;
        out.distance_sq += r * r;
        d_f[(0, i)] = 2.0 * lambda_d * r;
    }
    out.loss = lambda_d * out.distance_sq;

    match mode {
        AlignmentGradient::Analytic => {
            // tangents T_l stacked as [axis x | axis y | axis z], each B wide
            let mut t = DMatrix::zeros(3, 3 * b);
            for j in 0..3 {
                for i in 0..b {
                    t[(j, j * b + i)] = 1.0;
                }
            }
            let mut tangents = vec![t];
            let tiled: Vec<DMatrix<f64>> = fwd
                .masks
                .iter()
                .map(|m| DMatrix::from_fn(m.nrows(), 3 * b, |r, c| m[(r, c % b)]))
                .collect();
            for l in 0..last {
                let z = &params.weights[l] * &tangents[l];
                tangents.push(z.component_mul(&tiled[l]));
            }
            let g_all = &params.weights[last] * &tangents[last];
            let mut d_g = DMatrix::zeros(1, 3 * b);
            for (i, s) in samples.iter().enumerate() {
                let g = Vector3::new(g_all[(0, i)], g_all[(0, b + i)], g_all[(0, 2 * b + i)]);
                let (a, da) = alignment_penalty(&g, &s.n);
                out.alignment += a;
                for j in 0..3 {
                    d_g[(0, j * b + i)] = lambda_n * da[j];
                }
            }
            if lambda_n > 0.0 {
                let mut eps = d_g;
                for l in (0..=last).rev() {
                    grad.weights[l] += &eps * tangents[l].transpose();
                    if l > 0 {
                        eps = (params.weights[l].transpose() * &eps).component_mul(&tiled[l - 1]);
                    }
                }
            }
        }
        AlignmentGradient::FiniteDifference => {
            let h = 1e-5;
            let probes: Vec<[Forward; 2]> = (0..3)
                .map(|j| {
                    [
                        forward(params, points_matrix(samples, Some((j, h)))),
                        forward(params, points_matrix(samples, Some((j, -h)))),
                    ]
                })
                .collect();
            let mut seeds = vec![DMatrix::zeros(1, b); 3];
            for (i, s) in samples.iter().enumerate() {
                let g = Vector3::from_fn(|j, _| {
                    (probes[j][0].output[(0, i)] - probes[j][1].output[(0, i)]) / (2.0 * h)
                });
                let (a, da) = alignment_penalty(&g, &s.n);
                out.alignment += a;
                for j in 0..3 {
                    seeds[j][(0, i)] = lambda_n * da[j] / (2.0 * h);
                }
            }
            if lambda_n > 0.0 {
                for (j, [plus, minus]) in probes.iter().enumerate() {
                    backprop_primal(params, plus, seeds[j].clone(), &mut grad);
                    backprop_primal(params, minus, -&seeds[j], &mut grad);
                }
            }
        }
    }
    out.loss += lambda_n * out.alignment;
    backprop_primal(params, &fwd, d_f, &mut grad);
    out.grad = grad;
    out
}

/// Fixed chunk width for the data-parallel gradient; the reduction order
/// depends only on this, never on the thread count.
const CHUNK: usize = 128;

/// Mean loss and gradient over a batch, reduced in chunk order.
pub fn batch_gradient(
    params: &Params,
    samples: &[&SdfSample],
    cfg: &TrainConfig,
) -> (ChunkGradient, usize) {
    let parts: Vec<ChunkGradient> = samples
        .par_chunks(CHUNK)
        .map(|c| chunk_gradient(params, c, cfg.lambda_d, cfg.lambda_n, cfg.alignment_gradient))
        .collect();
    let mut total = ChunkGradient {
        distance_sq: 0.0,
        alignment: 0.0,
        loss: 0.0,
        grad: params.zeros_like(),
    };
    for p in &parts {
        total.distance_sq += p.distance_sq;
        total.alignment += p.alignment;
        total.loss += p.loss;
        total.grad.add_assign(&p.grad);
    }
    total.grad.scale(1.0 / samples.len() as f64);
    (total, samples.len())
}

struct Adam {
    m: Params,
    v: Params,
    step: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(params: &Params) -> Self {
        Self {
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
        }
    }

    fn update(&mut self, params: &mut Params, grad: &Params, lr: f64) {
        self.step += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.step);
        let c2 = 1.0 - Self::BETA2.powi(self.step);
        let apply = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
            for i in 0..p.len() {
                m[i] = Self::BETA1 * m[i] + (1.0 - Self::BETA1) * g[i];
                v[i] = Self::BETA2 * v[i] + (1.0 - Self::BETA2) * g[i] * g[i];
                p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + Self::EPS);
            }
        };
        for l in 0..params.weights.len() {
            apply(
                params.weights[l].as_mut_slice(),
                grad.weights[l].as_slice(),
                self.m.weights[l].as_mut_slice(),
                self.v.weights[l].as_mut_slice(),
            );
            apply(
                params.biases[l].as_mut_slice(),
                grad.biases[l].as_slice(),
                self.m.biases[l].as_mut_slice(),
                self.v.biases[l].as_mut_slice(),
            );
        }
    }
}

/// Distance RMSD and alignment RMSD (root mean squared cross-product
/// magnitude) of a network against samples.
pub fn evaluate(net: &MlpSdf, samples: &[SdfSample]) -> (f64, f64) {
    if samples.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let pts: Vec<_> = samples.iter().map(|s| s.p).collect();
    let out = net.forward(&pts, true);
    let mut dsq = 0.0;
    let mut asq = 0.0;
    for (i, s) in samples.iter().enumerate() {
        dsq += (out.distance[i] - s.d).powi(2);
        asq += alignment_penalty(&out.gradient[i], &s.n).0;
    }
    let n = samples.len() as f64;
    ((dsq / n).sqrt(), (asq / n).sqrt())
}

/// Deterministic train/validation split.
pub fn split(dataset: &LinkDataset, cfg: &TrainConfig) -> (Vec<SdfSample>, Vec<SdfSample>) {
    let mut idx: Vec<usize> = (0..dataset.samples.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_5e1d);
    idx.shuffle(&mut rng);
    let n_val = ((dataset.samples.len() as f64) * cfg.validation_fraction).floor() as usize;
    let n_val = n_val.min(dataset.samples.len().saturating_sub(1));
    let val = idx[..n_val].iter().map(|&i| dataset.samples[i]).collect();
    let train = idx[n_val..].iter().map(|&i| dataset.samples[i]).collect();
    (train, val)
}

/// Trains a network on `dataset`. The result carries the dataset's bound
/// radius and a provenance block referencing the dataset hash and config.
pub fn train_link_sdf(dataset: &LinkDataset, cfg: &TrainConfig) -> Result<(MlpSdf, TrainReport)> {
    cfg.validate()?;
    if dataset.samples.is_empty() {
        return Err(Error::InvalidConfig("training dataset is empty".into()));
    }
    let (train, val) = split(dataset, cfg);
    let mut net = MlpSdf::init(&cfg.layer_sizes, cfg.seed);
    net.bound_radius = dataset.provenance.mesh_bound_radius;
    net.trust_radius = DEFAULT_TRUST_RADIUS + net.bound_radius;
    net.provenance = Provenance {
        link: Some(dataset.provenance.link),
        dataset_hash: Some(dataset.content_hash()),
        seed: Some(cfg.seed),
        config: Some(serde_json::to_value(cfg).expect("config serializes")),
    };
    let mut params = Params::from_net(&net);
    let mut adam = Adam::new(&params);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut report = TrainReport {
        epochs: Vec::with_capacity(cfg.epochs),
        train_samples: train.len(),
        validation_samples: val.len(),
    };
    for epoch in 0..cfg.epochs {
        let lr = cfg.learning_rate_at(epoch);
        order.shuffle(&mut rng);
        let (mut loss, mut dsq, mut align) = (0.0, 0.0, 0.0);
        for (batch_id, batch) in order.chunks(cfg.batch_size).enumerate() {
            let refs: Vec<&SdfSample> = batch.iter().map(|&i| &train[i]).collect();
            let (g, _) = batch_gradient(&params, &refs, cfg);
            if !g.loss.is_finite() || !g.grad.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    batch: batch_id,
                });
            }
            loss += g.loss;
            dsq += g.distance_sq;
            align += g.alignment;
            adam.update(&mut params, &g.grad, lr);
            if !params.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    batch: batch_id,
                });
            }
        }
        let n = train.len() as f64;
        params.write_into(&mut net);
        let (vd, va) = if val.is_empty() {
            (None, None)
        } else {
            let (d, a) = evaluate(&net, &val);
            (Some(d), Some(a))
        };
        let log = EpochLog {
            epoch,
            learning_rate: lr,
            loss: loss / n,
            distance_rmsd: (dsq / n).sqrt(),
            alignment_rmsd: (align / n).sqrt(),
            validation_distance_rmsd: vd,
            validation_alignment_rmsd: va,
        };
        log::debug!(
            "epoch {epoch}: loss {:.3e} train rmsd {:.3e} val rmsd {:?}",
            log.loss,
            log.distance_rmsd,
            log.validation_distance_rmsd
        );
        report.epochs.push(log);
    }
    Ok((net, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{primitives, synthesize_dataset, DatasetProvenance, SamplingParams, SynthesisStats};
    use rand::Rng;

    fn random_samples(n: usize, seed: u64) -> Vec<SdfSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| SdfSample {
                p: Vector3::from_fn(|_, _| rng.random_range(-0.5..0.5)),
                d: rng.random_range(-0.1..0.5),
                n: Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)).normalize(),
            })
            .collect()
    }

    fn toy_dataset(samples: Vec<SdfSample>) -> LinkDataset {
        LinkDataset {
            provenance: DatasetProvenance {
                link: 0,
                params: SamplingParams::new(vec![0.0], samples.len(), 0),
                mesh_bound_radius: 0.1,
                stats: SynthesisStats::default(),
            },
            samples,
        }
    }

    fn total_loss(params: &Params, samples: &[&SdfSample], lambda_n: f64) -> f64 {
        let mut net = MlpSdf::zeros(&[3, 8, 8, 1]);
        params.write_into(&mut net);
        let pts: Vec<_> = samples.iter().map(|s| s.p).collect();
        let out = net.forward(&pts, true);
        samples
            .iter()
            .enumerate()
            .map(|(i, s)| (out.distance[i] - s.d).powi(2) + lambda_n * alignment_penalty(&out.gradient[i], &s.n).0)
            .sum()
    }

    #[test]
    fn alignment_penalty_zero_set_and_gradient() {
        let n = Vector3::new(0.0, 0.0, 1.0);
        assert_eq!(alignment_penalty(&Vector3::new(0.0, 0.0, -3.0), &n).0, 0.0);
        assert!((alignment_penalty(&Vector3::new(2.0, 0.0, 0.0), &n).0 - 1.0).abs() < 1e-15);
        let g = Vector3::new(0.3, -0.2, 0.7);
        let (_, da) = alignment_penalty(&g, &n);
        for j in 0..3 {
            let e = Vector3::ith(j, 1e-6);
            let fd = (alignment_penalty(&(g + e), &n).0 - alignment_penalty(&(g - e), &n).0) / 2e-6;
            assert!((fd - da[j]).abs() < 1e-8);
        }
    }

    #[test]
    fn analytic_parameter_gradient_matches_finite_differences() {
        let net = MlpSdf::init(&[3, 8, 8, 1], 21);
        let params = Params::from_net(&net);
        let samples = random_samples(7, 3);
        let refs: Vec<&SdfSample> = samples.iter().collect();
        let g = chunk_gradient(&params, &refs, 1.0, 0.7, AlignmentGradient::Analytic);
        let flat = g.grad.flatten();
        let h = 1e-6;
        let mut idx = 0;
        for l in 0..params.weights.len() {
            for c in 0..params.weights[l].ncols() {
                for r in 0..params.weights[l].nrows() {
                    let mut plus = params.clone();
                    plus.weights[l][(r, c)] += h;
                    let mut minus = params.clone();
                    minus.weights[l][(r, c)] -= h;
                    let fd = (total_loss(&plus, &refs, 0.7) - total_loss(&minus, &refs, 0.7)) / (2.0 * h);
                    assert!((fd - flat[idx]).abs() < 1e-5 * (1.0 + fd.abs()), "layer {l} ({r},{c}): {fd} vs {}", flat[idx]);
                    idx += 1;
                }
            }
            idx += params.biases[l].len();
        }
    }

    #[test]
    fn finite_difference_mode_agrees_with_analytic() {
        let params = Params::from_net(&MlpSdf::init(&[3, 16, 16, 1], 5));
        let samples = random_samples(32, 8);
        let refs: Vec<&SdfSample> = samples.iter().collect();
        let a = chunk_gradient(&params, &refs, 1.0, 0.1, AlignmentGradient::Analytic);
        let f = chunk_gradient(&params, &refs, 1.0, 0.1, AlignmentGradient::FiniteDifference);
        assert!((a.alignment - f.alignment).abs() < 1e-6);
        let (ga, gf) = (a.grad.flatten(), f.grad.flatten());
        let scale = ga.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let worst = ga.iter().zip(&gf).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-4 * scale, "{worst} vs scale {scale}");
    }

    #[test]
    fn chunked_reduction_is_partition_independent() {
        let params = Params::from_net(&MlpSdf::init(&LINK_ARCHITECTURE, 2));
        let samples = random_samples(300, 4);
        let refs: Vec<&SdfSample> = samples.iter().collect();
        let cfg = TrainConfig::default();
        let (a, _) = batch_gradient(&params, &refs, &cfg);
        let (b, _) = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap()
            .install(|| batch_gradient(&params, &refs, &cfg));
        assert_eq!(a.grad.flatten(), b.grad.flatten());
    }

    #[test]
    fn memorizes_a_repeated_sample() {
        let s = SdfSample {
            p: Vector3::new(0.1, -0.2, 0.05),
            d: 0.13,
            n: Vector3::new(1.0, 2.0, -0.5).normalize(),
        };
        let data = toy_dataset(vec![s; 64]);
        let cfg = TrainConfig {
            epochs: 400,
            batch_size: 64,
            learning_rate: 1e-3,
            lr_step_epochs: 150,
            ..TrainConfig::default()
        };
        let (net, report) = train_link_sdf(&data, &cfg).unwrap();
        assert!(report.last().loss < 1e-6, "{}", report.last().loss);
        assert!((net.eval(&s.p) - s.d).abs() < 1e-3);
    }

    #[test]
    fn sphere_net_learns_distance_and_alignment_term_helps() {
        let mesh = primitives::icosphere(0.1, 3);
        let params = SamplingParams::new(vec![-0.01, -0.005, 0.0, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.4], 10_000, 1);
        let data = synthesize_dataset(&mesh, 0, &params).unwrap();
        let base = TrainConfig {
            epochs: 60,
            lr_step_epochs: 25,
            batch_size: 256,
            seed: 7,
            ..TrainConfig::default()
        };
        let (net, report) = train_link_sdf(&data, &base).unwrap();
        let d = net.eval(&Vector3::new(0.0, 0.25, 0.0));
        assert!((d - 0.15).abs() < 5e-3, "{d}");
        let vr = report.last().validation_distance_rmsd.unwrap();
        assert!(vr < 5e-3, "{vr}");

        let plain = TrainConfig {
            lambda_n: 0.0,
            ..base.clone()
        };
        let (_, plain_report) = train_link_sdf(&data, &plain).unwrap();
        assert!(
            report.last().validation_alignment_rmsd.unwrap()
                < plain_report.last().validation_alignment_rmsd.unwrap()
        );
    }

    #[test]
    fn diverging_run_reports_batch() {
        let data = toy_dataset(random_samples(64, 1));
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 16,
            learning_rate: f64::MAX,
            ..TrainConfig::default()
        };
        match train_link_sdf(&data, &cfg) {
            Err(Error::Diverged { epoch, batch }) => assert_eq!((epoch, batch), (0, 1)),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn split_is_deterministic() {
        let data = toy_dataset(random_samples(100, 2));
        let cfg = TrainConfig::default();
        let (a, va) = split(&data, &cfg);
        let (b, vb) = split(&data, &cfg);
        assert_eq!(a, b);
        assert_eq!(va, vb);
        assert_eq!(va.len(), 10);
    }
}
