use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use linksdf::mesh::{synthesize_dataset, LinkDataset, MeshSdf, SamplingParams, TriMesh};
use linksdf::nn::{evaluate_bands, parse_bands, train_link_sdf, BandReport, MlpSdf, TrainConfig};
use linksdf::robot::RobotModel;

use crate::config::{config_hash, overlay, stage_seed, FileConfig};
use crate::manifest::{manifest_path_for, RunManifest};
use crate::{plotdata, Cli, CliError, Outcome};

/// File name of a link network inside a nets directory.
pub fn net_file(dir: &Path, link_name: &str) -> PathBuf {
    dir.join(format!("{link_name}.net"))
}

fn resolve_link(model: &RobotModel, link: &str) -> Result<usize, CliError> {
    if let Some(k) = model.link_index(link) {
        return Ok(k);
    }
    match link.parse::<usize>() {
        Ok(k) if k < model.n_links() => Ok(k),
        _ => Err(CliError::input(format!("robot has no link `{link}`"))),
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Robot description; use with --link.
    #[arg(long, requires = "link", conflicts_with = "mesh")]
    pub robot: Option<PathBuf>,
    /// Link name or index.
    #[arg(long)]
    pub link: Option<String>,
    /// A mesh file used directly instead of a robot link.
    #[arg(long)]
    pub mesh: Option<PathBuf>,
    /// Comma-separated offsets in metres.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub offsets: Option<Vec<f64>>,
    #[arg(long)]
    pub max_samples: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn synth(cli: &Cli, file_cfg: &FileConfig, a: &SynthArgs) -> Result<Outcome, CliError> {
    let defaults = SamplingParams::new(SamplingParams::default_offsets(), 100_000, 0);
    let mut params = overlay(defaults, file_cfg.sampling.as_ref(), "sampling")?;
    if let Some(o) = &a.offsets {
        params.offsets = o.clone();
    }
    if let Some(m) = a.max_samples {
        params.max_samples = m;
    }
    params.seed = stage_seed(cli.seed, "synth");
    let mut manifest = RunManifest::new("synth-dataset", config_hash(&params), cli.seed);

    let (mesh_path, link) = match (&a.robot, &a.link, &a.mesh) {
        (Some(robot), Some(link), None) => {
            manifest.input(robot)?;
            let model = RobotModel::load(robot)?;
            let k = resolve_link(&model, link)?;
            let path = model
                .mesh_path(k)
                .ok_or_else(|| CliError::input(format!("link `{link}` has no mesh")))?;
            (path, k)
        }
        (None, None, Some(mesh)) => (mesh.clone(), 0),
        _ => return Err(CliError::input("give either --robot with --link, or --mesh")),
    };
    let mesh = TriMesh::load(&mesh_path)?;
    manifest.input(&mesh_path)?;
    let dataset = manifest.time("synthesize", || synthesize_dataset(&mesh, link, &params))?;
    dataset.save(&a.out)?;
    manifest.output(&a.out)?;
    manifest.save(&manifest_path_for(&a.out))?;
    let s = &dataset.provenance.stats;
    println!(
        "{} samples ({} candidates, {} rejected by normal check, {} by re-projection)",
        dataset.len(),
        s.candidates,
        s.rejected_normal,
        s.rejected_reprojection
    );
    Ok(Outcome::Done)
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Output weights; a per-epoch log goes to `<out>.log`.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn train(cli: &Cli, file_cfg: &FileConfig, a: &TrainArgs) -> Result<Outcome, CliError> {
    let mut cfg = overlay(TrainConfig::default(), file_cfg.train.as_ref(), "train")?;
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    cfg.seed = stage_seed(cli.seed, "train");
    let mut manifest = RunManifest::new("train-sdf", config_hash(&cfg), cli.seed);
    manifest.input(&a.dataset)?;
    let dataset = LinkDataset::load(&a.dataset)?;
    let (net, report) = manifest.time("train", || train_link_sdf(&dataset, &cfg))?;
    net.save(&a.out)?;
    manifest.output(&a.out)?;

    let mut log = String::from("# epoch learning_rate loss distance_rmsd alignment_rmsd val_distance_rmsd val_alignment_rmsd\n");
    for e in &report.epochs {
        let opt = |x: Option<f64>| x.map_or("nan".to_string(), |v| format!("{v:?}"));
        writeln!(
            log,
            "{} {:?} {:?} {:?} {:?} {} {}",
            e.epoch,
            e.learning_rate,
            e.loss,
            e.distance_rmsd,
            e.alignment_rmsd,
            opt(e.validation_distance_rmsd),
            opt(e.validation_alignment_rmsd)
        )
        .unwrap();
    }
    let mut log_path = a.out.clone().into_os_string();
    log_path.push(".log");
    let log_path = PathBuf::from(log_path);
    plotdata::write(&log_path, &log)?;
    manifest.output(&log_path)?;
    manifest.save(&manifest_path_for(&a.out))?;
    let last = report.last();
    println!(
        "trained {} epochs on {} samples: distance RMSD {:.3e} m (validation {})",
        report.epochs.len(),
        report.train_samples,
        last.distance_rmsd,
        last.validation_distance_rmsd.map_or("n/a".into(), |v| format!("{v:.3e} m"))
    );
    Ok(Outcome::Done)
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Robot description; networks are read from `<nets>/<link>.net`.
    #[arg(long, requires = "nets", conflicts_with_all = ["mesh", "net"])]
    pub robot: Option<PathBuf>,
    #[arg(long)]
    pub nets: Option<PathBuf>,
    /// Restrict to these links (names or indices).
    #[arg(long, value_delimiter = ',')]
    pub links: Option<Vec<String>>,
    /// A single mesh and network pair.
    #[arg(long, requires = "net")]
    pub mesh: Option<PathBuf>,
    #[arg(long)]
    pub net: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    pub n_points: usize,
    /// Distance bands in metres.
    #[arg(long, default_value = "[0,0.4],[0.4,0.8],[0.8,1.2]")]
    pub bands: String,
    /// JSON report.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(serde::Serialize)]
struct LinkReport {
    name: String,
    bands: Vec<BandReport>,
}

/// Table with one column per band, rows for distance and alignment RMSD.
fn render(name: &str, reports: &[BandReport]) -> String {
    let cm = |x: f64| x * 100.0;
    let mut s = format!("{name:<16}");
    for r in reports {
        s += &format!("{:>14}", format!("[{}, {}]", cm(r.band.lo), cm(r.band.hi)));
    }
    s += "\n";
    let row = |label: &str, f: &dyn Fn(&BandReport) -> String| {
        let mut line = format!("{label:<16}");
        for r in reports {
            line += &format!("{:>14}", f(r));
        }
        line + "\n"
    };
    let or_empty = |x: Option<f64>, scale: f64, prec: usize| x.map_or("empty".to_string(), |v| format!("{:.*}", prec, v * scale));
    s += &row("RMSD, d (cm)", &|r| or_empty(r.distance_rmsd, 100.0, 3));
    s += &row("RMSD, n", &|r| or_empty(r.alignment_rmsd, 1.0, 4));
    s += &row("max |e| (cm)", &|r| or_empty(r.max_abs_error, 100.0, 3));
    s += &row("samples", &|r| r.samples.to_string());
    s
}

pub fn eval(cli: &Cli, a: &EvalArgs) -> Result<Outcome, CliError> {
    let bands = parse_bands(&a.bands)?;
    if a.n_points == 0 {
        return Err(CliError::input("--n-points must be positive"));
    }
    let seed = stage_seed(cli.seed, "eval");
    let mut manifest = RunManifest::new("eval-sdf", config_hash(&(&bands, a.n_points)), cli.seed);
    let mut pairs: Vec<(String, PathBuf, PathBuf)> = Vec::new();
    match (&a.robot, &a.nets, &a.mesh, &a.net) {
        (Some(robot), Some(dir), None, None) => {
            manifest.input(robot)?;
            let model = RobotModel::load(robot)?;
            let links: Vec<usize> = match &a.links {
                Some(names) => names.iter().map(|n| resolve_link(&model, n)).collect::<Result<_, _>>()?,
                None => (0..model.n_links()).collect(),
            };
            for k in links {
                let name = model.links()[k].name.clone();
                let mesh = model
                    .mesh_path(k)
                    .ok_or_else(|| CliError::input(format!("link `{name}` has no mesh")))?;
                let net = net_file(dir, &name);
                pairs.push((name, mesh, net));
            }
        }
        (None, None, Some(mesh), Some(net)) => {
            let name = mesh.file_stem().map_or("mesh".into(), |s| s.to_string_lossy().into_owned());
            pairs.push((name, mesh.clone(), net.clone()));
        }
        _ => return Err(CliError::input("give either --robot with --nets, or --mesh with --net")),
    }
    let mut all = Vec::new();
    for (name, mesh_path, net_path) in pairs {
        let oracle = MeshSdf::new(TriMesh::load(&mesh_path)?);
        let net = MlpSdf::load(&net_path)?;
        manifest.input(&mesh_path)?;
        manifest.input(&net_path)?;
        let reports = manifest.time(&format!("eval {name}"), || evaluate_bands(&net, &oracle, &bands, a.n_points, seed));
        print!("{}", render(&name, &reports));
        println!();
        all.push(LinkReport { name, bands: reports });
    }
    if let Some(out) = &a.out {
        plotdata::write(out, &(serde_json::to_string_pretty(&all).expect("report serializes") + "\n"))?;
        manifest.output(out)?;
        manifest.save(&manifest_path_for(out))?;
    }
    Ok(Outcome::Done)
}
