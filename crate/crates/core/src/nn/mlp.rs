use std::io::{Read, Write};
use std::path::Path;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Layer widths of the per-link network: 3 → 64 → 64 → 64 → 64 → 1.
pub const LINK_ARCHITECTURE: [usize; 6] = [3, 64, 64, 64, 64, 1];

/// Queries farther than this from the link frame origin are not sent
/// through the network (m).
pub const DEFAULT_TRUST_RADIUS: f64 = 1.2;

const MAGIC: &[u8; 8] = b"LSDFNET\0";
pub const WEIGHTS_VERSION: u32 = 1;

/// One affine layer, weights row-major `n_out × n_in`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub n_in: usize,
    pub n_out: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        Self {
            n_in,
            n_out,
            weights: vec![0.0; n_in * n_out],
            bias: vec![0.0; n_out],
        }
    }

    #[inline]
    pub fn weight(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.n_in + col]
    }
}

/// Free-form metadata stored alongside the weights.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub link: Option<usize>,
    pub dataset_hash: Option<String>,
    pub seed: Option<u64>,
    pub config: Option<serde_json::Value>,
}

/// Multilayer perceptron mapping a link-frame point to signed distance.
/// Hidden layers use rectifiers, the output layer is affine.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpSdf {
    pub layers: Vec<Layer>,
    /// Radius of an origin-centred ball containing the link surface (m).
    pub bound_radius: f64,
    pub trust_radius: f64,
    pub provenance: Provenance,
}

/// Network output for a batch: distances and (optionally) input gradients.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MlpOutput {
    pub distance: Vec<f64>,
    pub gradient: Vec<Vector3<f64>>,
}

impl MlpSdf {
    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2 && sizes[0] == 3 && *sizes.last().unwrap() == 1);
        Self {
            layers: sizes.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect(),
            bound_radius: 0.0,
            trust_radius: DEFAULT_TRUST_RADIUS,
            provenance: Provenance::default(),
        }
    }

    /// Uniform fan-in scaled initialization: hidden weights in ±√(6/fan_in),
    /// output weights and all biases in ±√(1/fan_in).
    ///
    /// Nonzero biases matter: with zero biases the network is positively
    /// homogeneous in `p` and cannot represent an offset surface until the
    /// biases drift away from zero.
    pub fn init(sizes: &[usize], seed: u64) -> Self {
        let mut net = Self::zeros(sizes);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let last = net.layers.len() - 1;
        for (l, layer) in net.layers.iter_mut().enumerate() {
            let gain = if l == last { 1.0 } else { 6.0 };
            let bound = (gain / layer.n_in as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.random_range(-bound..bound);
            }
            let bias_bound = (1.0 / layer.n_in as f64).sqrt();
            for b in &mut layer.bias {
                *b = rng.random_range(-bias_bound..bias_bound);
            }
        }
        net
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.layers.iter().map(|l| l.n_in).collect();
        s.push(1);
        s
    }

    pub fn is_link_architecture(&self) -> bool {
        self.sizes() == LINK_ARCHITECTURE
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Evaluates the network on a batch of points. With `with_gradient` the
    /// exact input gradient (piecewise constant through the rectifier
    /// gates) is returned as well.
    ///
    /// Every point follows the same arithmetic sequence regardless of batch
    /// size or position, so batched and single-point results are identical.
    pub fn forward(&self, points: &[Vector3<f64>], with_gradient: bool) -> MlpOutput {
        let count = points.len();
        if count == 0 {
            return MlpOutput::default();
        }
        // pad to whole kernel blocks; padded lanes are computed and dropped
        let n = count.div_ceil(kernel::BLOCK) * kernel::BLOCK;
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len() + 1);
        let mut input = vec![0.0; 3 * n];
        for (j, p) in points.iter().enumerate() {
            input[j] = p.x;
            input[n + j] = p.y;
            input[2 * n + j] = p.z;
        }
        acts.push(input);
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut out = vec![0.0; layer.n_out * n];
            kernel::affine(layer, &acts[l], n, &mut out, l != last);
            acts.push(out);
        }
        let mut distance = acts.pop().unwrap();
        distance.truncate(count);
        if !with_gradient {
            return MlpOutput {
                distance,
                gradient: Vec::new(),
            };
        }
        // reverse sweep: seed with the output row of weights, then mask by
        // the gate feeding each layer
        let out_layer = &self.layers[last];
        let mut delta = vec![0.0; out_layer.n_in * n];
        for i in 0..out_layer.n_in {
            delta[i * n..(i + 1) * n].fill(out_layer.weights[i]);
        }
        for l in (0..last).rev() {
            for (d, &a) in delta.iter_mut().zip(&acts[l + 1]) {
                if a <= 0.0 {
                    *d = 0.0;
                }
            }
            let layer = &self.layers[l];
            let mut prev = vec![0.0; layer.n_in * n];
            kernel::affine_transposed(layer, &delta, n, &mut prev);
            delta = prev;
        }
        let gradient = (0..count)
            .map(|j| Vector3::new(delta[j], delta[n + j], delta[2 * n + j]))
            .collect();
        MlpOutput { distance, gradient }
    }

    pub fn eval(&self, p: &Vector3<f64>) -> f64 {
        self.forward(std::slice::from_ref(p), false).distance[0]
    }

    /// Per-hidden-unit activation signs at `p`; equal patterns mean `p` lies
    /// in the same linear region.
    pub fn gate_pattern(&self, p: &Vector3<f64>) -> Vec<bool> {
        let n = kernel::BLOCK;
        let mut x = vec![0.0; 3 * n];
        for k in 0..3 {
            x[k * n] = p[k];
        }
        let mut pattern = Vec::new();
        for layer in &self.layers[..self.layers.len() - 1] {
            let mut out = vec![0.0; layer.n_out * n];
            kernel::affine(layer, &x, n, &mut out, false);
            pattern.extend((0..layer.n_out).map(|i| out[i * n] > 0.0));
            x = out.into_iter().map(|z| z.max(0.0)).collect();
        }
        pattern
    }

    /// Lower bound on the distance to any surface inside the bounding ball.
    #[inline]
    pub fn lower_bound(&self, p: &Vector3<f64>) -> f64 {
        p.norm() - self.bound_radius
    }

    /// Distance and gradient with the far-field rule: beyond `trust_radius`
    /// from the origin the network is bypassed for the lower bound
    /// `‖p‖ − bound_radius`, and inside it the network output is never
    /// allowed below that bound.
    pub fn query(&self, points: &[Vector3<f64>], with_gradient: bool) -> MlpOutput {
        let near: Vec<usize> = (0..points.len())
            .filter(|&i| points[i].norm() <= self.trust_radius)
            .collect();
        let near_pts: Vec<_> = near.iter().map(|&i| points[i]).collect();
        let inner = self.forward(&near_pts, with_gradient);
        let mut out = MlpOutput {
            distance: points.iter().map(|p| self.lower_bound(p)).collect(),
            gradient: if with_gradient {
                points.iter().map(|p| p.normalize()).collect()
            } else {
                Vec::new()
            },
        };
        for (k, &i) in near.iter().enumerate() {
            if inner.distance[k] >= out.distance[i] {
                out.distance[i] = inner.distance[k];
                if with_gradient {
                    out.gradient[i] = inner.gradient[k];
                }
            }
        }
        out
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let io = |e| Error::io("<weights>", e);
        w.write_all(MAGIC).map_err(io)?;
        w.write_all(&WEIGHTS_VERSION.to_le_bytes()).map_err(io)?;
        let sizes = self.sizes();
        w.write_all(&(sizes.len() as u32).to_le_bytes()).map_err(io)?;
        for s in &sizes {
            w.write_all(&(*s as u32).to_le_bytes()).map_err(io)?;
        }
        w.write_all(&self.bound_radius.to_le_bytes()).map_err(io)?;
        w.write_all(&self.trust_radius.to_le_bytes()).map_err(io)?;
        let prov = serde_json::to_vec(&self.provenance).expect("provenance serializes");
        w.write_all(&(prov.len() as u32).to_le_bytes()).map_err(io)?;
        w.write_all(&prov).map_err(io)?;
        for layer in &self.layers {
            for v in layer.weights.iter().chain(&layer.bias) {
                w.write_all(&v.to_le_bytes()).map_err(io)?;
            }
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let io = |e| Error::io("<weights>", e);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a linksdf weight file".into()));
        }
        let mut u32_buf = [0u8; 4];
        let mut read_u32 = |r: &mut dyn Read| -> Result<u32> {
            r.read_exact(&mut u32_buf).map_err(io)?;
            Ok(u32::from_le_bytes(u32_buf))
        };
        let version = read_u32(&mut r)?;
        if version != WEIGHTS_VERSION {
            return Err(Error::Format(format!("weight file version {version}")));
        }
        let n_sizes = read_u32(&mut r)? as usize;
        if !(2..=64).contains(&n_sizes) {
            return Err(Error::Format(format!("implausible layer count {n_sizes}")));
        }
        let sizes = (0..n_sizes)
            .map(|_| read_u32(&mut r).map(|v| v as usize))
            .collect::<Result<Vec<_>>>()?;
        if sizes[0] != 3 || sizes[n_sizes - 1] != 1 || sizes.iter().any(|&s| s == 0 || s > 4096) {
            return Err(Error::Format(format!("unsupported architecture {sizes:?}")));
        }
        let mut f64_buf = [0u8; 8];
        let mut read_f64 = |r: &mut dyn Read| -> Result<f64> {
            r.read_exact(&mut f64_buf).map_err(io)?;
            Ok(f64::from_le_bytes(f64_buf))
        };
        let bound_radius = read_f64(&mut r)?;
        let trust_radius = read_f64(&mut r)?;
        let prov_len = read_u32(&mut r)? as usize;
        let mut prov = vec![0u8; prov_len];
        r.read_exact(&mut prov).map_err(io)?;
        let provenance: Provenance =
            serde_json::from_slice(&prov).map_err(|e| Error::parse("weight provenance", e))?;
        let mut net = Self::zeros(&sizes);
        net.bound_radius = bound_radius;
        net.trust_radius = trust_radius;
        net.provenance = provenance;
        for layer in &mut net.layers {
            for v in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
                *v = read_f64(&mut r)?;
            }
        }
        if !net.is_finite() {
            return Err(Error::Format("weight file contains non-finite parameters".into()));
        }
        Ok(net)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::with_capacity(8 * self.parameter_count() + 256);
        self.write_to(&mut buf)?;
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(bytes.as_slice())
    }
}

/// Dense kernels with a fixed per-point summation order: bias first, then
/// inputs in index order. Blocking only groups independent points, so any
/// batch partition yields bit-identical results. Batches are padded to a
/// multiple of `BLOCK` by the caller.
mod kernel {
    use super::Layer;

    pub const BLOCK: usize = 16;

    #[inline(always)]
    fn affine_body(layer: &Layer, x: &[f64], n: usize, out: &mut [f64], relu: bool) {
        let (n_in, n_out) = (layer.n_in, layer.n_out);
        let mut jb = 0;
        while jb + BLOCK <= n {
            for i in 0..n_out {
                let row = &layer.weights[i * n_in..(i + 1) * n_in];
                let mut acc = [layer.bias[i]; BLOCK];
                for (k, &w) in row.iter().enumerate() {
                    let xs = &x[k * n + jb..k * n + jb + BLOCK];
                    for l in 0..BLOCK {
                        acc[l] += w * xs[l];
                    }
                }
                let dst = &mut out[i * n + jb..i * n + jb + BLOCK];
                for l in 0..BLOCK {
                    dst[l] = if relu { acc[l].max(0.0) } else { acc[l] };
                }
            }
            jb += BLOCK;
        }
        debug_assert_eq!(jb, n, "batch must be padded to whole blocks");
    }

    #[inline(always)]
    fn affine_t_body(layer: &Layer, delta: &[f64], n: usize, out: &mut [f64]) {
        let (n_in, n_out) = (layer.n_in, layer.n_out);
        let mut jb = 0;
        while jb + BLOCK <= n {
            for k in 0..n_in {
                let mut acc = [0.0; BLOCK];
                for i in 0..n_out {
                    let w = layer.weights[i * n_in + k];
                    let ds = &delta[i * n + jb..i * n + jb + BLOCK];
                    for l in 0..BLOCK {
                        acc[l] += w * ds[l];
                    }
                }
                out[k * n + jb..k * n + jb + BLOCK].copy_from_slice(&acc);
            }
            jb += BLOCK;
        }
        debug_assert_eq!(jb, n, "batch must be padded to whole blocks");
    }

    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx2")]
    unsafe fn affine_avx2(layer: &Layer, x: &[f64], n: usize, out: &mut [f64], relu: bool) {
        affine_body(layer, x, n, out, relu)
    }

    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx2")]
    unsafe fn affine_t_avx2(layer: &Layer, delta: &[f64], n: usize, out: &mut [f64]) {
        affine_t_body(layer, delta, n, out)
    }

    // Wider vectors only change how many independent points are processed
    // at once; no fused multiply-add is enabled, so results match the
    // portable path bit for bit.
    pub fn affine(layer: &Layer, x: &[f64], n: usize, out: &mut [f64], relu: bool) {
        #[cfg(target_arch = "x86_64")]
        if std::arch::is_x86_feature_detected!("avx2") {
            // SAFETY: the CPU supports AVX2, checked above.
            return unsafe { affine_avx2(layer, x, n, out, relu) };
        }
        affine_body(layer, x, n, out, relu)
    }

    pub fn affine_transposed(layer: &Layer, delta: &[f64], n: usize, out: &mut [f64]) {
        #[cfg(target_arch = "x86_64")]
        if std::arch::is_x86_feature_detected!("avx2") {
            // SAFETY: the CPU supports AVX2, checked above.
            return unsafe { affine_t_avx2(layer, delta, n, out) };
        }
        affine_t_body(layer, delta, n, out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_points(n: usize, seed: u64) -> Vec<Vector3<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Vector3::from_fn(|_, _| rng.random_range(-0.5..0.5)))
            .collect()
    }

    #[test]
    fn zero_weights_return_output_bias() {
        let mut net = MlpSdf::zeros(&LINK_ARCHITECTURE);
        net.layers.last_mut().unwrap().bias[0] = 0.37;
        let out = net.forward(&random_points(5, 1), true);
        assert!(out.distance.iter().all(|&d| d == 0.37));
        assert!(out.gradient.iter().all(|g| *g == Vector3::zeros()));
    }

    #[test]
    fn linear_surrogate_gradient_is_weight() {
        let mut net = MlpSdf::zeros(&[3, 1]);
        net.layers[0].weights = vec![0.25, -1.5, 2.0];
        net.layers[0].bias = vec![0.1];
        let p = Vector3::new(0.2, 0.3, -0.4);
        let out = net.forward(&[p], true);
        assert_eq!(out.gradient[0], Vector3::new(0.25, -1.5, 2.0));
        assert!((out.distance[0] - (0.05 - 0.45 - 0.8 + 0.1)).abs() < 1e-15);
    }

    #[test]
    fn batch_equals_single_point_loop_exactly() {
        let net = MlpSdf::init(&LINK_ARCHITECTURE, 4);
        let pts = random_points(53, 2);
        let batch = net.forward(&pts, true);
        for (j, p) in pts.iter().enumerate() {
            let single = net.forward(std::slice::from_ref(p), true);
            assert_eq!(single.distance[0].to_bits(), batch.distance[j].to_bits());
            assert_eq!(single.gradient[0], batch.gradient[j]);
        }
        // arbitrary partition
        let (a, b) = pts.split_at(21);
        let mut parts = net.forward(a, false).distance;
        parts.extend(net.forward(b, false).distance);
        assert_eq!(parts, batch.distance);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let net = MlpSdf::init(&LINK_ARCHITECTURE, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let h = 1e-5;
        let mut checked = 0;
        while checked < 1000 {
            let p = Vector3::from_fn(|_, _| rng.random_range(-0.8..0.8));
            let pattern = net.gate_pattern(&p);
            let probes: Vec<_> = (0..3)
                .flat_map(|j| {
                    let e = Vector3::ith(j, h);
                    [p + e, p - e]
                })
                .collect();
            // resample points whose stencil crosses a gate boundary
            if probes.iter().any(|q| net.gate_pattern(q) != pattern) {
                continue;
            }
            let g = net.forward(&[p], true).gradient[0];
            for j in 0..3 {
                let fd = (net.eval(&probes[2 * j]) - net.eval(&probes[2 * j + 1])) / (2.0 * h);
                let scale = g[j].abs().max(1e-3);
                assert!((fd - g[j]).abs() / scale < 1e-4, "{fd} vs {}", g[j]);
            }
            checked += 1;
        }
    }

    #[test]
    fn far_field_is_clamped_lower_bound() {
        let mut net = MlpSdf::init(&LINK_ARCHITECTURE, 1);
        net.bound_radius = 0.3;
        let far = Vector3::new(0.0, 1.5, 0.0);
        let near = Vector3::new(0.0, 0.5, 0.0);
        let out = net.query(&[near, far], true);
        assert!((out.distance[1] - 1.2).abs() < 1e-15);
        assert_eq!(out.gradient[1], Vector3::y());
        assert_eq!(out.distance[0], net.eval(&near).max(net.lower_bound(&near)));
    }

    #[test]
    fn weights_round_trip_bit_exact() {
        let mut net = MlpSdf::init(&LINK_ARCHITECTURE, 3);
        net.bound_radius = 0.21;
        net.provenance.seed = Some(3);
        net.provenance.dataset_hash = Some("abc".into());
        let mut buf = Vec::new();
        net.write_to(&mut buf).unwrap();
        let back = MlpSdf::read_from(buf.as_slice()).unwrap();
        assert_eq!(back, net);
        assert!(back.is_link_architecture());
        buf[0] = b'X';
        assert!(MlpSdf::read_from(buf.as_slice()).is_err());
    }
}
