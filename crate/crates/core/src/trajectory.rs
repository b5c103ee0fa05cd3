use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DVector;

use crate::error::{Error, Result};

pub const TRAJECTORY_FORMAT: &str = "linksdf-trajectory";

/// Ordered waypoints `x_0..x_H` in configuration space (or the plane).
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub states: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn new(states: Vec<DVector<f64>>) -> Result<Self> {
        if states.len() < 3 {
            return Err(Error::InvalidConfig(format!(
                "trajectory needs at least 3 waypoints, got {}",
                states.len()
            )));
        }
        let d = states[0].len();
        if let Some(bad) = states.iter().find(|s| s.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: bad.len(),
            });
        }
        if states.iter().any(|s| s.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidConfig("trajectory contains non-finite states".into()));
        }
        Ok(Self { states })
    }

    /// `segments + 1` evenly spaced states from `start` to `goal`.
    pub fn straight_line(start: &DVector<f64>, goal: &DVector<f64>, segments: usize) -> Self {
        let states = (0..=segments)
            .map(|i| {
                if i == segments {
                    return goal.clone();
                }
                let t = i as f64 / segments as f64;
                start + (goal - start) * t
            })
            .collect();
        Self { states }
    }

    pub fn segments(&self) -> usize {
        self.states.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn start(&self) -> &DVector<f64> {
        &self.states[0]
    }

    pub fn goal(&self) -> &DVector<f64> {
        self.states.last().unwrap()
    }

    /// Sum of Euclidean segment lengths.
    pub fn length(&self) -> f64 {
        self.states.windows(2).map(|w| (&w[1] - &w[0]).norm()).sum()
    }

    /// Waypoints with `interp` evenly spaced linear interpolants inserted in
    /// every segment.
    pub fn densified(&self, interp: usize) -> Vec<DVector<f64>> {
        let mut out = Vec::with_capacity(self.segments() * (interp + 1) + 1);
        for w in self.states.windows(2) {
            out.push(w[0].clone());
            for k in 1..=interp {
                let t = k as f64 / (interp + 1) as f64;
                out.push(&w[0] + (&w[1] - &w[0]) * t);
            }
        }
        out.push(self.goal().clone());
        out
    }

    pub fn is_finite(&self) -> bool {
        self.states.iter().all(|s| s.iter().all(|v| v.is_finite()))
    }

    /// Whitespace-separated text, one waypoint per line, after a
    /// `linksdf-trajectory 1 <dim>` header. Values use shortest round-trip
    /// formatting.
    pub fn to_text(&self) -> String {
        let mut s = format!("{TRAJECTORY_FORMAT} 1 {}\n", self.dim());
        for x in &self.states {
            let row: Vec<String> = x.iter().map(|v| format!("{v:?}")).collect();
            writeln!(s, "{}", row.join(" ")).unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let ctx = "trajectory";
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
        let (_, header) = lines.next().ok_or_else(|| Error::parse(ctx, "empty file"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 3 || fields[0] != TRAJECTORY_FORMAT || fields[1] != "1" {
            return Err(Error::parse(ctx, format!("line 1: bad header {header:?}")));
        }
        let dim: usize = fields[2]
            .parse()
            .map_err(|e| Error::parse(ctx, format!("line 1: dimension: {e}")))?;
        let mut states = Vec::new();
        for (i, line) in lines {
            let row = line
                .split_whitespace()
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::parse(ctx, format!("line {}: {e}", i + 1)))?;
            if row.len() != dim {
                return Err(Error::parse(
                    ctx,
                    format!("line {}: expected {dim} values, got {}", i + 1, row.len()),
                ));
            }
            states.push(DVector::from_vec(row));
        }
        Self::new(states)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn lengths() {
        let line = Trajectory::straight_line(&v(&[0.0, 0.0]), &v(&[1.0, 0.0]), 7);
        assert!((line.length() - 1.0).abs() < 1e-15);
        let still = Trajectory::new(vec![v(&[0.3, 0.3]); 4]).unwrap();
        assert_eq!(still.length(), 0.0);
        let corner = Trajectory::new(vec![v(&[0.0, 0.0]), v(&[1.0, 0.0]), v(&[1.0, 1.0])]).unwrap();
        assert_eq!(corner.length(), 2.0);
    }

    #[test]
    fn densify_inserts_interpolants() {
        let t = Trajectory::straight_line(&v(&[0.0]), &v(&[3.0]), 3);
        let d = t.densified(2);
        assert_eq!(d.len(), 10);
        assert!((d[1][0] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(t.densified(0), t.states);
    }

    #[test]
    fn text_round_trip_is_exact() {
        let t = Trajectory::new(vec![v(&[0.1, -1e-17]), v(&[std::f64::consts::PI, 2.0]), v(&[1.0 / 3.0, 7.5])]).unwrap();
        assert_eq!(Trajectory::from_text(&t.to_text()).unwrap(), t);
        assert!(Trajectory::from_text("linksdf-trajectory 1 2\n0 0\n1\n").is_err());
    }
}
