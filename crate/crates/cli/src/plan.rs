use std::path::{Path, PathBuf};

use clap::Args;
use linksdf::nn::{CompositeSdf, ExactCompositeSdf, MlpSdf, RobotSdf};
use linksdf::planner::{plan, CostSpec, DistanceChecker, ObstacleCostSpec, PlanResult, PlannerConfig};
use linksdf::robot::RobotModel;
use linksdf::scenes::{ArmChecker, Scene2D, Scene3D};
use linksdf::time_param::{fit_spline, time_parameterize, DEFAULT_GRID};
use linksdf::Trajectory;
use serde::{Deserialize, Serialize};

use crate::config::{config_hash, overlay, stage_seed, FileConfig};
use crate::manifest::{manifest_path_for, RunManifest};
use crate::sdf::net_file;
use crate::{plotdata, Cli, CliError, Outcome};

/// Interpolants per segment for the post-hoc dense collision recheck.
pub const DENSE_RECHECK: usize = 50;

#[derive(Serialize)]
struct PlanSummary<'a> {
    success: bool,
    iterations: usize,
    diverged_at: Option<usize>,
    obstacle_cost: f64,
    length: f64,
    boundary_cost: f64,
    dense_violations: usize,
    planner: &'a PlannerConfig,
    cost: &'a CostSpec,
}

fn dense_violations(traj: &Trajectory, checker: &dyn DistanceChecker, eps: f64) -> Result<usize, CliError> {
    let states = traj.densified(DENSE_RECHECK);
    Ok(checker.within(&states, eps)?.into_iter().filter(|&h| h).count())
}

/// Writes the trajectory, iteration log, snapshots and summary to `dir`.
fn write_outputs(
    dir: &Path,
    result: &PlanResult,
    cfg: &PlannerConfig,
    spec: &CostSpec,
    dense: usize,
    manifest: &mut RunManifest,
) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::input(format!("cannot create {}: {e}", dir.display())))?;
    let mut emit = |name: &str, text: &str| -> Result<(), CliError> {
        let p = dir.join(name);
        plotdata::write(&p, text)?;
        manifest.output(&p)
    };
    emit("trajectory.txt", &result.trajectory.to_text())?;
    emit("iterations.dat", &plotdata::iteration_log(&result.log))?;
    if !result.means.is_empty() {
        let (iters, trajs): (Vec<usize>, Vec<Trajectory>) = result.means.iter().cloned().unzip();
        let text = plotdata::trajectories(&trajs, "mean");
        let header = format!("# mean index -> iteration: {iters:?}\n");
        emit("means.dat", &(header + &text))?;
    }
    if !result.first_samples.is_empty() {
        emit("samples_first.dat", &plotdata::trajectories(&result.first_samples, "sample"))?;
        emit("samples_last.dat", &plotdata::trajectories(&result.last_samples, "sample"))?;
    }
    let summary = PlanSummary {
        success: result.success,
        iterations: result.log.len(),
        diverged_at: result.diverged_at,
        obstacle_cost: result.final_costs.obstacle,
        length: result.final_costs.length,
        boundary_cost: result.final_costs.boundary,
        dense_violations: dense,
        planner: cfg,
        cost: spec,
    };
    emit("result.json", &(serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n"))?;
    Ok(())
}

fn finish(dir: &Path, result: &PlanResult, manifest: RunManifest) -> Result<Outcome, CliError> {
    manifest.save(&dir.join("manifest.json"))?;
    println!(
        "{} after {} iterations: obstacle cost {}, length {:.4}",
        if result.success { "success" } else { "failure" },
        result.log.len(),
        result.final_costs.obstacle,
        result.final_costs.length
    );
    if let Some(t) = result.diverged_at {
        return Err(CliError::runtime(format!(
            "{}; log kept in {}",
            linksdf::Error::NonFiniteMean(t),
            dir.display()
        )));
    }
    Ok(if result.success { Outcome::Done } else { Outcome::PlannerFailed })
}

#[derive(Debug, Args)]
pub struct Plan2dArgs {
    #[arg(long)]
    pub scene: PathBuf,
    /// Disable kernel updating and keep σ_f at this value.
    #[arg(long)]
    pub fixed_sigma: Option<f64>,
    /// Interpolants per segment in the obstacle cost.
    #[arg(long)]
    pub interp_points: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct EffectiveConfig<'a> {
    planner: &'a PlannerConfig,
    cost: &'a CostSpec,
}

pub fn plan2d(cli: &Cli, file_cfg: &FileConfig, a: &Plan2dArgs) -> Result<Outcome, CliError> {
    let defaults = PlannerConfig {
        record_samples: true,
        record_means_every: 10,
        ..Default::default()
    };
    let mut cfg = overlay(defaults, file_cfg.planner.as_ref(), "planner")?;
    let mut spec = overlay(CostSpec::default(), file_cfg.cost.as_ref(), "cost")?;
    if let Some(s) = a.fixed_sigma {
        cfg.kus = false;
        cfg.sigma_f_init = s;
    }
    if let Some(n) = a.interp_points {
        spec.obstacle.interp_points = n;
    }
    cfg.seed = stage_seed(cli.seed, "plan");
    let mut manifest = RunManifest::new(
        "plan2d",
        config_hash(&EffectiveConfig {
            planner: &cfg,
            cost: &spec,
        }),
        cli.seed,
    );
    manifest.input(&a.scene)?;
    let scene = Scene2D::load(&a.scene)?;
    let result = manifest.time("plan", || plan(&scene.start_state(), &scene.goal_state(), &scene, None, &cfg, &spec))?;
    let dense = dense_violations(&result.trajectory, &scene, spec.obstacle.epsilon)?;
    write_outputs(&a.out, &result, &cfg, &spec, dense, &mut manifest)?;
    finish(&a.out, &result, manifest)
}

/// Arm defaults: 20 segments, 50 samples, σ_f 0.1 → 0.012, h = 0.5, and a
/// cost with ε = 0.08 m, 2 interpolants and the floor constraint on.
pub fn arm_defaults() -> (PlannerConfig, CostSpec) {
    let cfg = PlannerConfig {
        segments: 20,
        samples: 50,
        iters: 100,
        sigma_f_init: 0.1,
        sigma_min: 0.012,
        h: 0.5,
        record_means_every: 1,
        ..Default::default()
    };
    let mut spec = CostSpec {
        obstacle: ObstacleCostSpec {
            epsilon: 0.08,
            interp_points: 2,
            weight: 1.0,
        },
        ..Default::default()
    };
    spec.boundary.enabled = true;
    (cfg, spec)
}

/// Loads one network per link from `dir`.
pub fn load_nets(model: &RobotModel, dir: &Path, manifest: &mut RunManifest) -> Result<Vec<MlpSdf>, CliError> {
    model
        .links()
        .iter()
        .map(|l| {
            let p = net_file(dir, &l.name);
            if !p.exists() {
                return Err(CliError::input(format!("network not found: {}", p.display())));
            }
            manifest.input(&p)?;
            Ok(MlpSdf::load(&p)?)
        })
        .collect()
}

#[derive(Debug, Args)]
pub struct PlanArmArgs {
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long)]
    pub robot: PathBuf,
    /// Directory holding `<link>.net` for every link.
    #[arg(long, required_unless_present = "exact")]
    pub nets: Option<PathBuf>,
    /// Use exact mesh distances instead of the networks.
    #[arg(long, conflicts_with = "nets")]
    pub exact: bool,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn plan_arm(cli: &Cli, file_cfg: &FileConfig, a: &PlanArmArgs) -> Result<Outcome, CliError> {
    let (cfg0, spec0) = arm_defaults();
    let mut cfg = overlay(cfg0, file_cfg.planner.as_ref(), "planner")?;
    let mut spec = overlay(spec0, file_cfg.cost.as_ref(), "cost")?;
    cfg.seed = stage_seed(cli.seed, "plan");
    manifest_inputs_exist(&[&a.scene, &a.robot])?;
    let scene = Scene3D::load(&a.scene)?;
    spec.boundary.z_floor = scene.z_floor;
    let mut manifest = RunManifest::new(
        "plan-arm",
        config_hash(&EffectiveConfig {
            planner: &cfg,
            cost: &spec,
        }),
        cli.seed,
    );
    manifest.input(&a.scene)?;
    manifest.input(&a.robot)?;
    let model = RobotModel::load(&a.robot)?;
    scene.validate_for(&model)?;
    let sdf: Box<dyn RobotSdf> = match &a.nets {
        Some(dir) => {
            let nets = load_nets(&model, dir, &mut manifest)?;
            Box::new(CompositeSdf::new(model.clone(), nets)?)
        }
        None => Box::new(ExactCompositeSdf::from_model(model.clone())?),
    };
    let checker = ArmChecker::for_scene(sdf.as_ref(), &scene);
    let result = manifest.time("plan", || {
        plan(&scene.start_state(), &scene.goal_state(), &checker, Some(&model), &cfg, &spec)
    })?;
    let dense = dense_violations(&result.trajectory, &checker, 0.0)?;
    write_outputs(&a.out, &result, &cfg, &spec, dense, &mut manifest)?;
    finish(&a.out, &result, manifest)
}

fn manifest_inputs_exist(paths: &[&Path]) -> Result<(), CliError> {
    for p in paths {
        if !p.exists() {
            return Err(CliError::input(format!("file not found: {}", p.display())));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimingConfig {
    pub grid: usize,
    /// Extra factor on the robot's timing limits.
    pub limit_scale: f64,
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self {
            grid: DEFAULT_GRID,
            limit_scale: 1.0,
        }
    }
}

#[derive(Debug, Args)]
pub struct TimeparamArgs {
    /// Trajectory file (as written by the planners).
    #[arg(long)]
    pub traj: PathBuf,
    #[arg(long)]
    pub robot: PathBuf,
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn timeparam(cli: &Cli, file_cfg: &FileConfig, a: &TimeparamArgs) -> Result<Outcome, CliError> {
    let mut tc = overlay(TimingConfig::default(), file_cfg.timing.as_ref(), "timing")?;
    if let Some(g) = a.grid {
        tc.grid = g;
    }
    if !(tc.limit_scale > 0.0) {
        return Err(CliError::input("timing limit_scale must be positive"));
    }
    let mut manifest = RunManifest::new("timeparam", config_hash(&tc), cli.seed);
    manifest_inputs_exist(&[&a.traj, &a.robot])?;
    manifest.input(&a.traj)?;
    manifest.input(&a.robot)?;
    let traj = Trajectory::load(&a.traj)?;
    let model = RobotModel::load(&a.robot)?;
    let vel: Vec<f64> = model.velocity_limits().iter().map(|v| v * tc.limit_scale).collect();
    let acc: Vec<f64> = model.acceleration_limits().iter().map(|v| v * tc.limit_scale).collect();
    let timed = manifest.time("timeparam", || -> Result<_, CliError> {
        let path = fit_spline(&traj)?;
        Ok(time_parameterize(&path, &vel, &acc, tc.grid)?)
    })?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::input(format!("cannot create {}: {e}", dir.display())))?;
    }
    timed.save(&a.out)?;
    manifest.output(&a.out)?;
    manifest.save(&manifest_path_for(&a.out))?;
    let (uv, ua) = timed.utilization(&vel, &acc);
    println!(
        "duration {:.4} s, peak velocity utilization {:.3}, peak acceleration utilization {:.3}",
        timed.duration(),
        uv,
        ua
    );
    Ok(Outcome::Done)
}
