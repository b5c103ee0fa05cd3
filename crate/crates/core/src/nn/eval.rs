use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{alignment_penalty, MlpSdf};
use crate::error::{Error, Result};
use crate::mesh::MeshSdf;

/// Distance band `[lo, hi)` in metres.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
}

impl Band {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, d: f64) -> bool {
        d >= self.lo && d < self.hi
    }
}

pub const DEFAULT_BANDS: [Band; 3] = [
    Band { lo: 0.0, hi: 0.4 },
    Band { lo: 0.4, hi: 0.8 },
    Band { lo: 0.8, hi: 1.2 },
];

/// Parses `"[0,0.1],[0.1,1.2]"` (brackets optional, whitespace ignored).
pub fn parse_bands(text: &str) -> Result<Vec<Band>> {
    let cleaned: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let nums: Vec<&str> = cleaned
        .split(['[', ']', ',', ';'])
        .filter(|s| !s.is_empty())
        .collect();
    let bad = |m: String| Error::Parse {
        context: "bands".into(),
        message: m,
    };
    if nums.is_empty() || !nums.len().is_multiple_of(2) {
        return Err(bad(format!("expected pairs of numbers, got `{text}`")));
    }
    let mut bands = Vec::new();
    for pair in nums.chunks(2) {
        let lo: f64 = pair[0].parse().map_err(|_| bad(format!("bad number `{}`", pair[0])))?;
        let hi: f64 = pair[1].parse().map_err(|_| bad(format!("bad number `{}`", pair[1])))?;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(bad(format!("empty band [{lo}, {hi}]")));
        }
        bands.push(Band::new(lo, hi));
    }
    Ok(bands)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandReport {
    pub band: Band,
    pub samples: usize,
    /// `None` when the band received no samples.
    pub distance_rmsd: Option<f64>,
    pub alignment_rmsd: Option<f64>,
    pub max_abs_error: Option<f64>,
}

/// Draws points uniformly from the mesh bounding box grown by each band's
/// upper edge and keeps those whose exact distance falls in the band, until
/// `n_points` per band or `max_draws` attempts per band.
pub fn sample_band_points(
    oracle: &MeshSdf,
    band: Band,
    n_points: usize,
    max_draws: usize,
    seed: u64,
) -> Vec<(Vector3<f64>, f64, Vector3<f64>)> {
    let mesh = oracle.mesh();
    let mut lo = Vector3::repeat(f64::INFINITY);
    let mut hi = Vector3::repeat(f64::NEG_INFINITY);
    for v in &mesh.vertices {
        lo = lo.inf(v);
        hi = hi.sup(v);
    }
    let grow = band.hi.max(0.0);
    lo -= Vector3::repeat(grow);
    hi += Vector3::repeat(grow);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_points);
    let mut draws = 0;
    let chunk = 4096;
    while out.len() < n_points && draws < max_draws {
        let m = chunk.min(max_draws - draws);
        let pts: Vec<Vector3<f64>> = (0..m)
            .map(|_| Vector3::from_fn(|i, _| rng.random_range(lo[i]..hi[i])))
            .collect();
        draws += m;
        for q in pts.iter().zip(oracle.query_batch(&pts)) {
            if band.contains(q.1.distance) && out.len() < n_points {
                out.push((*q.0, q.1.distance, q.1.normal));
            }
        }
    }
    out
}

/// Per-band distance and alignment RMSD of `net` against the exact oracle.
pub fn evaluate_bands(net: &MlpSdf, oracle: &MeshSdf, bands: &[Band], n_points: usize, seed: u64) -> Vec<BandReport> {
    bands
        .iter()
        .enumerate()
        .map(|(k, &band)| {
            let pts = sample_band_points(oracle, band, n_points, n_points.saturating_mul(200).max(10_000), seed ^ (k as u64) << 32);
            if pts.is_empty() {
                return BandReport {
                    band,
                    samples: 0,
                    distance_rmsd: None,
                    alignment_rmsd: None,
                    max_abs_error: None,
                };
            }
            let ps: Vec<_> = pts.iter().map(|s| s.0).collect();
            let out = net.query(&ps, true);
            let (mut dsq, mut asq, mut worst) = (0.0, 0.0, 0.0f64);
            for (i, (_, d, n)) in pts.iter().enumerate() {
                let e = out.distance[i] - d;
                dsq += e * e;
                worst = worst.max(e.abs());
                asq += alignment_penalty(&out.gradient[i], n).0;
            }
            let n = pts.len() as f64;
            BandReport {
                band,
                samples: pts.len(),
                distance_rmsd: Some((dsq / n).sqrt()),
                alignment_rmsd: Some((asq / n).sqrt()),
                max_abs_error: Some(worst),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::primitives;

    #[test]
    fn bands_parse() {
        let b = parse_bands("[0,0.1],[0.1,1.2]").unwrap();
        assert_eq!(b, vec![Band::new(0.0, 0.1), Band::new(0.1, 1.2)]);
        assert_eq!(parse_bands(" 0, 0.4 ; 0.4,0.8").unwrap().len(), 2);
        assert!(parse_bands("[0.4,0.1]").is_err());
        assert!(parse_bands("[0,0.1,0.2]").is_err());
        assert!(parse_bands("[a,b]").is_err());
    }

    #[test]
    fn band_points_are_in_band() {
        let oracle = MeshSdf::new(primitives::icosphere(0.1, 2));
        let band = Band::new(0.2, 0.3);
        let pts = sample_band_points(&oracle, band, 300, 100_000, 3);
        assert_eq!(pts.len(), 300);
        for (p, d, _) in pts {
            assert!(band.contains(d));
            // icosphere is inscribed in the sphere
            assert!(p.norm() - 0.1 <= d + 1e-12);
        }
    }

    #[test]
    fn far_field_only_net_on_sphere() {
        // a zero network falls back to ‖p‖ − R, exact outside a sphere up to
        // the facet error of the icosphere
        let mesh = primitives::icosphere(0.1, 4);
        let mut net = MlpSdf::zeros(&[3, 4, 1]);
        net.bound_radius = 0.1;
        net.trust_radius = 1.3;
        let oracle = MeshSdf::new(mesh);
        let reports = evaluate_bands(&net, &oracle, &DEFAULT_BANDS, 200, 0);
        for r in &reports {
            assert_eq!(r.samples, 200);
            assert!(r.distance_rmsd.unwrap() < 1e-3, "{r:?}");
            assert!(r.alignment_rmsd.unwrap() < 0.05, "{r:?}");
        }
    }

    #[test]
    fn unreachable_band_is_empty() {
        let oracle = MeshSdf::new(primitives::icosphere(0.1, 1));
        let net = MlpSdf::zeros(&[3, 4, 1]);
        let r = evaluate_bands(&net, &oracle, &[Band::new(-5.0, -4.0)], 10, 0);
        assert_eq!(r[0].samples, 0);
        assert!(r[0].distance_rmsd.is_none());
    }
}
