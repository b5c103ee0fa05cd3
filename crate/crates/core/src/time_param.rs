//! Time parameterization of a waypoint path: a natural cubic spline over
//! normalized chord length, then the maximum squared path speed `u = ṡ²`
//! under box limits on joint velocity and acceleration.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

pub const DEFAULT_GRID: usize = 512;
pub const TIMED_FORMAT: &str = "linksdf-timed";

/// Consecutive waypoints closer than this collapse into one knot.
const KNOT_MERGE: f64 = 1e-12;

/// Per-dimension natural cubic spline over `s ∈ [0, 1]`.
#[derive(Clone, Debug)]
pub struct SplinePath {
    knots: Vec<f64>,
    points: Vec<DVector<f64>>,
    /// Second derivatives at the knots.
    moments: Vec<DVector<f64>>,
    length: f64,
    dim: usize,
}

impl SplinePath {
    pub fn fit(traj: &Trajectory) -> Result<Self> {
        let dim = traj.dim();
        let mut points: Vec<DVector<f64>> = vec![traj.states[0].clone()];
        let mut chord = vec![0.0];
        let mut merged = 0;
        for x in &traj.states[1..] {
            let d = (x - points.last().unwrap()).norm();
            if d <= KNOT_MERGE {
                merged += 1;
                continue;
            }
            chord.push(chord.last().unwrap() + d);
            points.push(x.clone());
        }
        if merged > 0 {
            log::warn!("collapsed {merged} repeated waypoint(s) into neighbouring knots");
        }
        let length = *chord.last().unwrap();
        if points.len() == 1 {
            return Ok(Self {
                knots: vec![0.0],
                moments: vec![DVector::zeros(dim)],
                points,
                length: 0.0,
                dim,
            });
        }
        let knots: Vec<f64> = chord.iter().map(|c| c / length).collect();
        let moments = natural_moments(&knots, &points, dim);
        Ok(Self {
            knots,
            points,
            moments,
            length,
            dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Chord length of the fitted waypoints.
    pub fn chord_length(&self) -> f64 {
        self.length
    }

    pub fn is_degenerate(&self) -> bool {
        self.knots.len() < 2
    }

    fn segment(&self, s: f64) -> usize {
        let n = self.knots.len();
        match self.knots.partition_point(|&k| k <= s) {
            0 => 0,
            i if i >= n => n - 2,
            i => i - 1,
        }
    }

    /// Position, first and second derivative with respect to `s`.
    pub fn eval(&self, s: f64) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        if self.is_degenerate() {
            let z = DVector::zeros(self.dim);
            return (self.points[0].clone(), z.clone(), z);
        }
        self.eval_segment(self.segment(s), s)
    }

    fn eval_segment(&self, i: usize, s: f64) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        let (a, b) = (self.knots[i], self.knots[i + 1]);
        let h = b - a;
        let (y0, y1) = (&self.points[i], &self.points[i + 1]);
        let (m0, m1) = (&self.moments[i], &self.moments[i + 1]);
        let l = (b - s) / h;
        let r = (s - a) / h;
        let pos = m0 * (l.powi(3) * h * h / 6.0) + m1 * (r.powi(3) * h * h / 6.0)
            + (y0 - m0 * (h * h / 6.0)) * l
            + (y1 - m1 * (h * h / 6.0)) * r;
        let vel = m0 * (-l * l * h / 2.0) + m1 * (r * r * h / 2.0) + (y1 - y0) / h - (m1 - m0) * (h / 6.0);
        let acc = m0 * l + m1 * r;
        (pos, vel, acc)
    }
}

/// Second derivatives of the natural spline (zero at both ends) from the
/// tridiagonal system, solved once for all dimensions.
fn natural_moments(knots: &[f64], points: &[DVector<f64>], dim: usize) -> Vec<DVector<f64>> {
    let n = knots.len();
    let mut m = vec![DVector::zeros(dim); n];
    if n < 3 {
        return m;
    }
    let h: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
    // Thomas algorithm over interior knots 1..n-1
    let k = n - 2;
    let mut diag = vec![0.0; k];
    let mut rhs = vec![DVector::zeros(dim); k];
    let mut upper = vec![0.0; k];
    for j in 0..k {
        let i = j + 1;
        diag[j] = 2.0 * (h[i - 1] + h[i]);
        upper[j] = h[i];
        rhs[j] = ((&points[i + 1] - &points[i]) / h[i] - (&points[i] - &points[i - 1]) / h[i - 1]) * 6.0;
    }
    for j in 1..k {
        let w = h[j] / diag[j - 1];
        diag[j] -= w * upper[j - 1];
        let prev = rhs[j - 1].clone();
        rhs[j] -= prev * w;
    }
    m[k] = &rhs[k - 1] / diag[k - 1];
    for j in (0..k - 1).rev() {
        m[j + 1] = (&rhs[j] - &m[j + 2] * upper[j]) / diag[j];
    }
    m
}

pub fn fit_spline(traj: &Trajectory) -> Result<SplinePath> {
    SplinePath::fit(traj)
}

/// Samples `(t, s, x, ẋ, ẍ)` of a timed path.
#[derive(Clone, Debug, PartialEq)]
pub struct TimedTrajectory {
    pub t: Vec<f64>,
    pub s: Vec<f64>,
    pub q: Vec<DVector<f64>>,
    pub qd: Vec<DVector<f64>>,
    pub qdd: Vec<DVector<f64>>,
}

impl TimedTrajectory {
    pub fn duration(&self) -> f64 {
        *self.t.last().unwrap_or(&0.0)
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Peak `|ẋ_d| / v_d` and `|ẍ_d| / a_d` over all samples and dimensions.
    pub fn utilization(&self, vel_limits: &[f64], acc_limits: &[f64]) -> (f64, f64) {
        let peak = |xs: &[DVector<f64>], lim: &[f64]| {
            xs.iter()
                .flat_map(|x| x.iter().zip(lim).map(|(v, l)| v.abs() / l))
                .fold(0.0, f64::max)
        };
        (peak(&self.qd, vel_limits), peak(&self.qdd, acc_limits))
    }

    /// Columns `t q.. qd.. qdd..` after a `linksdf-timed 1 <dim>` header.
    pub fn to_text(&self) -> String {
        let dim = self.q.first().map_or(0, |x| x.len());
        let mut s = format!("{TIMED_FORMAT} 1 {dim}\n");
        for j in 0..self.len() {
            let mut row = vec![format!("{:?}", self.t[j])];
            for x in [&self.q[j], &self.qd[j], &self.qdd[j]] {
                row.extend(x.iter().map(|v| format!("{v:?}")));
            }
            writeln!(s, "{}", row.join(" ")).unwrap();
        }
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// Feasible path accelerations `s̈` at one grid point for squared speed `u`,
/// or `None` when the box constraints cannot all hold.
fn accel_interval(dq: &DVector<f64>, ddq: &DVector<f64>, u: f64, acc: &[f64]) -> Option<(f64, f64)> {
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for d in 0..dq.len() {
        let (a, b, lim) = (dq[d], ddq[d] * u, acc[d]);
        if a.abs() < 1e-12 {
            if b.abs() > lim {
                return None;
            }
            continue;
        }
        let (x, y) = ((-lim - b) / a, (lim - b) / a);
        lo = lo.max(x.min(y));
        hi = hi.min(x.max(y));
    }
    (lo <= hi).then_some((lo, hi))
}

/// Largest `u ∈ [0, cap]` satisfying `ok`, assuming the feasible set is an
/// interval containing 0.
fn bisect_max(cap: f64, ok: impl Fn(f64) -> bool) -> f64 {
    if ok(cap) {
        return cap;
    }
    let (mut lo, mut hi) = (0.0, cap);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

fn check_limits(name: &str, lim: &[f64], dim: usize) -> Result<()> {
    if lim.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: lim.len(),
        });
    }
    if lim.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
        return Err(Error::InvalidConfig(format!("{name} limits must be positive and finite")));
    }
    Ok(())
}

/// Fastest timing on a uniform `grid`-point discretization of `s`. The path
/// acceleration is held constant across each grid interval and checked at
/// the interval's start, so `t` follows from `dt = 2Δs / (√u_j + √u_{j+1})`.
pub fn time_parameterize(path: &SplinePath, vel_limits: &[f64], acc_limits: &[f64], grid: usize) -> Result<TimedTrajectory> {
    check_limits("velocity", vel_limits, path.dim())?;
    check_limits("acceleration", acc_limits, path.dim())?;
    if grid < 2 {
        return Err(Error::InvalidConfig("time grid needs at least 2 points".into()));
    }
    let zero = DVector::zeros(path.dim());
    if path.is_degenerate() {
        return Ok(TimedTrajectory {
            t: vec![0.0],
            s: vec![0.0],
            q: vec![path.points[0].clone()],
            qd: vec![zero.clone()],
            qdd: vec![zero],
        });
    }
    let ds = 1.0 / (grid - 1) as f64;
    let s: Vec<f64> = (0..grid).map(|j| j as f64 * ds).collect();
    let evals: Vec<_> = s.iter().map(|&x| path.eval(x)).collect();

    // speed ceiling from velocity limits and from acceleration feasibility
    let ceiling: Vec<f64> = evals
        .iter()
        .map(|(_, dq, ddq)| {
            let vcap = dq
                .iter()
                .zip(vel_limits)
                .filter(|(v, _)| v.abs() > 1e-12)
                .map(|(v, l)| (l / v).powi(2))
                .fold(f64::INFINITY, f64::min);
            let cap = if vcap.is_finite() { vcap } else { 1e12 };
            bisect_max(cap, |u| accel_interval(dq, ddq, u, acc_limits).is_some())
        })
        .collect();

    // backward pass: largest u_j that can still brake to rest at s = 1
    // the last interval ends at rest, so its acceleration is also checked
    // at s = 1, where it is reported
    let (_, dq_end, ddq_end) = &evals[grid - 1];
    let end = accel_interval(dq_end, ddq_end, 0.0, acc_limits).unwrap_or((0.0, 0.0));
    let interval = |j: usize, u: f64| {
        let (_, dq, ddq) = &evals[j];
        accel_interval(dq, ddq, u, acc_limits).map(|(lo, hi)| {
            if j == grid - 2 {
                (lo.max(end.0), hi.min(end.1))
            } else {
                (lo, hi)
            }
        })
    };
    let mut reach = vec![0.0; grid];
    for j in (0..grid - 1).rev() {
        let next = reach[j + 1];
        reach[j] = bisect_max(ceiling[j], |u| {
            interval(j, u).is_some_and(|(lo, hi)| {
                let lo = lo.max(-u / (2.0 * ds));
                let hi = hi.min((next - u) / (2.0 * ds));
                lo <= hi
            })
        });
    }

    // forward pass from rest, greedy in acceleration
    let mut u = vec![0.0; grid];
    let mut accel = vec![0.0; grid];
    for j in 0..grid - 1 {
        let (lo, hi) = interval(j, u[j]).unwrap_or((0.0, 0.0));
        let a = hi.min((reach[j + 1] - u[j]) / (2.0 * ds)).max(lo);
        accel[j] = a;
        u[j + 1] = (u[j] + 2.0 * ds * a).clamp(0.0, reach[j + 1]);
    }
    accel[grid - 1] = accel[grid - 2];

    let mut t = vec![0.0; grid];
    for j in 0..grid - 1 {
        let denom = u[j].sqrt() + u[j + 1].sqrt();
        let dt = if denom > 0.0 { 2.0 * ds / denom } else { 0.0 };
        t[j + 1] = t[j] + dt;
    }
    if t.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig("time parameterization stalled on the path".into()));
    }
    let mut out = TimedTrajectory {
        t,
        s,
        q: Vec::with_capacity(grid),
        qd: Vec::with_capacity(grid),
        qdd: Vec::with_capacity(grid),
    };
    for (j, (q, dq, ddq)) in evals.into_iter().enumerate() {
        out.qd.push(&dq * u[j].sqrt());
        out.qdd.push(&dq * accel[j] + &ddq * u[j]);
        out.q.push(q);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    fn line_1d(len: f64) -> SplinePath {
        let t = Trajectory::straight_line(&v(&[0.0]), &v(&[len]), 10);
        fit_spline(&t).unwrap()
    }

    #[test]
    fn collinear_waypoints_give_linear_spline() {
        let t = Trajectory::straight_line(&v(&[0.0, 1.0]), &v(&[2.0, -1.0]), 8);
        let sp = fit_spline(&t).unwrap();
        for k in 0..=100 {
            let (_, d1, d2) = sp.eval(k as f64 / 100.0);
            assert!(d2.norm() < 1e-9);
            assert!((d1 - v(&[2.0, -2.0])).norm() < 1e-9);
        }
    }

    #[test]
    fn interpolates_knots_and_is_c2() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let states: Vec<_> = (0..9)
            .map(|_| DVector::from_fn(7, |_, _| rng.random_range(-1.0..1.0)))
            .collect();
        let t = Trajectory::new(states.clone()).unwrap();
        let sp = fit_spline(&t).unwrap();
        for (k, x) in sp.knots().iter().zip(&states) {
            assert!((sp.eval(*k).0 - x).norm() < 1e-12);
        }
        for i in 1..sp.knots().len() - 1 {
            let k = sp.knots()[i];
            let (_, a1, a2) = sp.eval_segment(i - 1, k);
            let (_, b1, b2) = sp.eval_segment(i, k);
            assert!((&a1 - &b1).norm() < 1e-9 * (1.0 + b1.norm()));
            assert!((&a2 - &b2).norm() < 1e-9 * (1.0 + b2.norm()));
        }
        let (_, _, start) = sp.eval(0.0);
        assert!(start.norm() < 1e-9);
    }

    #[test]
    fn repeated_waypoints_collapse() {
        let t = Trajectory::new(vec![v(&[0.0]), v(&[0.0]), v(&[1.0]), v(&[1.0]), v(&[2.0])]).unwrap();
        let sp = fit_spline(&t).unwrap();
        assert_eq!(sp.knots().len(), 3);
        assert_eq!(sp.chord_length(), 2.0);
    }

    #[test]
    fn triangular_and_trapezoidal_profiles() {
        let tri = time_parameterize(&line_1d(1.0), &[1.0], &[1.0], DEFAULT_GRID).unwrap();
        assert!((tri.duration() - 2.0).abs() < 0.02 * 2.0, "{}", tri.duration());
        let trap = time_parameterize(&line_1d(4.0), &[1.0], &[1.0], DEFAULT_GRID).unwrap();
        assert!((trap.duration() - 5.0).abs() < 0.02 * 5.0, "{}", trap.duration());
        for timed in [&tri, &trap] {
            let (vu, au) = timed.utilization(&[1.0], &[1.0]);
            assert!(vu <= 1.01 && au <= 1.01, "{vu} {au}");
            assert!(timed.qd[0].norm() < 1e-6 && timed.qd.last().unwrap().norm() < 1e-6);
        }
    }

    #[test]
    fn zero_length_path_has_zero_duration() {
        let t = Trajectory::new(vec![v(&[0.3, 0.1]); 5]).unwrap();
        let timed = time_parameterize(&fit_spline(&t).unwrap(), &[1.0, 1.0], &[1.0, 1.0], 64).unwrap();
        assert_eq!(timed.duration(), 0.0);
        assert_eq!(timed.len(), 1);
    }

    #[test]
    fn curved_path_respects_limits_and_refines() {
        let t = Trajectory::new(vec![
            v(&[0.0, 0.0, 0.0]),
            v(&[0.4, 0.3, -0.2]),
            v(&[0.5, 0.9, 0.1]),
            v(&[1.0, 1.0, 0.6]),
            v(&[1.2, 0.4, 0.5]),
        ])
        .unwrap();
        let sp = fit_spline(&t).unwrap();
        let (vl, al) = ([0.5, 0.4, 0.3], [1.0, 0.8, 0.5]);
        let a = time_parameterize(&sp, &vl, &al, 512).unwrap();
        let b = time_parameterize(&sp, &vl, &al, 1024).unwrap();
        let (vu, au) = a.utilization(&vl, &al);
        assert!(vu <= 1.01 && au <= 1.01, "{vu} {au}");
        assert!(((a.duration() - b.duration()) / b.duration()).abs() < 0.01);
        assert!(a.t.windows(2).all(|w| w[1] > w[0]));
        for j in (0..a.len()).step_by(37) {
            assert!((sp.eval(a.s[j]).0 - &a.q[j]).norm() < 1e-9);
        }
    }

    #[test]
    fn halving_limits_never_speeds_up() {
        let sp = line_1d(2.0);
        let fast = time_parameterize(&sp, &[1.0], &[1.0], 256).unwrap();
        let slow = time_parameterize(&sp, &[0.5], &[0.5], 256).unwrap();
        assert!(slow.duration() >= fast.duration());
    }

    #[test]
    fn rejects_bad_limits() {
        let sp = line_1d(1.0);
        assert!(time_parameterize(&sp, &[0.0], &[1.0], 64).is_err());
        assert!(time_parameterize(&sp, &[1.0, 1.0], &[1.0], 64).is_err());
    }
}
