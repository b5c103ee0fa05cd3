//! Whitespace-separated column files with a `#` header line.

use std::fmt::Write as _;
use std::path::Path;

use linksdf::planner::IterationLog;
use linksdf::Trajectory;

use crate::CliError;

pub fn write(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::input(format!("cannot create {}: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
}

pub fn iteration_log(log: &[IterationLog]) -> String {
    let mut s = String::from("# iter obstacle_cost total_cost length sigma_f weight_entropy fallback\n");
    for r in log {
        writeln!(
            s,
            "{} {:?} {:?} {:?} {:?} {:?} {}",
            r.iter,
            r.obstacle_cost,
            r.total_cost,
            r.length,
            r.sigma_f,
            r.weight_entropy,
            u8::from(r.fallback)
        )
        .unwrap();
    }
    s
}

/// One row per waypoint of every trajectory: `index waypoint x_0 … x_{d-1}`.
pub fn trajectories(trajs: &[Trajectory], index_name: &str) -> String {
    let dim = trajs.first().map_or(0, |t| t.dim());
    let cols: Vec<String> = (0..dim).map(|d| format!("x{d}")).collect();
    let mut s = format!("# {index_name} waypoint {}\n", cols.join(" "));
    for (i, t) in trajs.iter().enumerate() {
        for (w, x) in t.states.iter().enumerate() {
            let vals: Vec<String> = x.iter().map(|v| format!("{v:?}")).collect();
            writeln!(s, "{i} {w} {}", vals.join(" ")).unwrap();
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    #[test]
    fn log_columns() {
        let log = vec![IterationLog {
            iter: 0,
            obstacle_cost: 3.0,
            total_cost: 3.5,
            length: 10.0,
            sigma_f: 0.1,
            weight_entropy: 1.0,
            fallback: false,
        }];
        let text = iteration_log(&log);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0].split_whitespace().count() - 1, lines[1].split_whitespace().count());
    }

    #[test]
    fn trajectory_rows() {
        let a = DVector::from_vec(vec![0.0, 0.0]);
        let b = DVector::from_vec(vec![1.0, 1.0]);
        let t = Trajectory::straight_line(&a, &b, 4);
        let text = trajectories(&[t.clone(), t], "sample");
        assert_eq!(text.lines().count(), 1 + 2 * 5);
        assert!(text.lines().last().unwrap().starts_with("1 4 1.0 1.0"));
    }
}
