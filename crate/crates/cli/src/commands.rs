//! Subcommand definitions and their implementations.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use scoredenoise_core::denoise::{denoise_cloud, sample_score_field, upsample_via_denoise};
use scoredenoise_core::mesh::{point_to_mesh_sq, sample_surface, SamplingConfig};
use scoredenoise_core::metrics::{evaluate, format_table, EvalReport};
use scoredenoise_core::network::ScoreNetworkParams;
use scoredenoise_core::noise::{perturb, NoiseModel};
use scoredenoise_core::oracle::PlaneGaussianModel;
use scoredenoise_core::rng::RngSeed;
use scoredenoise_core::training::{patch_dataset, train_with_progress};
use scoredenoise_core::{normalize_unit_sphere, Point3, PointCloud};

use crate::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use crate::config::{loss_name, parse_loss, parse_mode, parse_sampling, parse_widths, Settings};
use crate::error::{CliError, Result};
use crate::io::write_atomic;
use crate::obj::{read_obj, write_obj};
use crate::xyz::{format_g6, format_rows, read_xyz, write_xyz};

#[derive(Debug, Parser)]
#[command(name = "scoredenoise", version, about = "Score-based point cloud denoising")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a mesh into clean and noisy clouds in the unit-sphere frame.
    MakeData(MakeDataArgs),
    /// Write an untrained checkpoint (its score is identically zero).
    Init(InitArgs),
    /// Train a score network on the clean clouds of a directory.
    Train(TrainArgs),
    /// Denoise a point cloud.
    Denoise(DenoiseArgs),
    /// Report Chamfer and point-to-mesh distances.
    Evaluate(EvaluateArgs),
    /// Upsample a cloud by denoising jittered copies of it.
    Upsample(UpsampleArgs),
    /// Dump ensemble score vectors on a regular probe grid.
    ScoreField(ScoreFieldArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Seed for every random choice.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct NetworkArgs {
    /// Neighbours per point in the feature graphs.
    #[arg(long)]
    pub graph_k: Option<usize>,
    /// Comma-separated feature block widths.
    #[arg(long)]
    pub block_widths: Option<String>,
    /// Comma-separated hidden widths of the score MLP.
    #[arg(long)]
    pub score_hidden: Option<String>,
}

#[derive(Debug, Args)]
pub struct DenoiseOverrides {
    /// `ascent` (iterative) or `direct` (single displacement).
    #[arg(long)]
    pub mode: Option<String>,
    /// Anchors averaged in the ensemble score.
    #[arg(long = "K")]
    pub k: Option<usize>,
    /// First step size.
    #[arg(long)]
    pub alpha1: Option<f64>,
    /// Step size decay per iteration.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Number of ascent steps.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Points per patch.
    #[arg(long)]
    pub patch_size: Option<usize>,
    /// Average number of patches covering each point.
    #[arg(long)]
    pub coverage: Option<f64>,
}

#[derive(Debug, Args)]
pub struct MakeDataArgs {
    /// Input mesh (OBJ).
    #[arg(long)]
    pub mesh: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// File name prefix; defaults to the mesh file stem.
    #[arg(long)]
    pub name: Option<String>,
    /// Number of points.
    #[arg(long)]
    pub count: Option<usize>,
    /// Noise model, e.g. `gaussian:0.02` (relative to the unit sphere).
    #[arg(long)]
    pub noise: Option<String>,
    /// `poisson` or `uniform`.
    #[arg(long)]
    pub sampling: Option<String>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct InitArgs {
    /// Output checkpoint.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub network: NetworkArgs,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Directory holding `*_clean.xyz` clouds.
    #[arg(long)]
    pub data_dir: PathBuf,
    /// Output checkpoint.
    #[arg(long)]
    pub out: PathBuf,
    /// Loss history CSV; defaults to `<out>.loss.csv`.
    #[arg(long)]
    pub loss_csv: Option<PathBuf>,
    /// `neighborhood` or `point-only`.
    #[arg(long)]
    pub loss: Option<String>,
    /// Optimizer steps.
    #[arg(long)]
    pub iterations: Option<usize>,
    #[command(flatten)]
    pub network: NetworkArgs,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct DenoiseArgs {
    /// Noisy cloud (XYZ).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Denoised cloud (XYZ).
    #[arg(long)]
    pub output: PathBuf,
    /// Reference mesh for `--error-dump`, in the input's frame.
    #[arg(long)]
    pub mesh: Option<PathBuf>,
    /// Write `x y z err` lines, err being the distance to `--mesh`.
    #[arg(long, requires = "mesh")]
    pub error_dump: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: DenoiseOverrides,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Denoised cloud (XYZ); normalized to the unit sphere before scoring.
    #[arg(long)]
    pub denoised: PathBuf,
    /// Clean reference cloud (XYZ), already in the unit-sphere frame.
    #[arg(long)]
    pub clean: PathBuf,
    /// Reference mesh (OBJ) in the clean cloud's frame.
    #[arg(long)]
    pub mesh: Option<PathBuf>,
    /// Labels copied into the report.
    #[arg(long, default_value = "")]
    pub shape: String,
    #[arg(long, default_value = "")]
    pub noise: String,
    #[arg(long, default_value = "")]
    pub resolution: String,
    /// Print an aligned table instead of CSV.
    #[arg(long)]
    pub table: bool,
    /// Write the report here instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct UpsampleArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Copies of the input to jitter and denoise.
    #[arg(long)]
    pub rate: Option<usize>,
    /// Jitter std, relative to the input's bounding radius.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[command(flatten)]
    pub overrides: DenoiseOverrides,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct ScoreFieldArgs {
    /// Cloud whose learned field is sampled (needs `--checkpoint`).
    #[arg(long, requires = "checkpoint", conflicts_with = "plane_oracle")]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Sample the exact score of the plane z = 0 blurred by this std instead.
    #[arg(long, required_unless_present = "input")]
    pub plane_oracle: Option<f64>,
    /// Probes per axis.
    #[arg(long, default_value_t = 16)]
    pub resolution: usize,
    /// Half-width of the probe cube, in units of the bounding radius.
    #[arg(long, default_value_t = 1.0)]
    pub extent: f64,
    /// Output file of `x y z sx sy sz` lines.
    #[arg(long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub overrides: DenoiseOverrides,
    #[command(flatten)]
    pub common: Common,
}

fn input<T, E: std::fmt::Display>(r: std::result::Result<T, E>) -> Result<T> {
    r.map_err(|e| CliError::Input(e.to_string()))
}

fn settings(common: &Common) -> Result<Settings> {
    let mut s = Settings::load(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        s.seed = seed;
    }
    Ok(s)
}

impl NetworkArgs {
    fn apply(&self, s: &mut Settings) -> Result<()> {
        if let Some(k) = self.graph_k {
            s.network.graph_k = k;
        }
        if let Some(w) = &self.block_widths {
            s.network.block_widths = input(parse_widths(w))?;
        }
        if let Some(w) = &self.score_hidden {
            s.network.score_hidden = input(parse_widths(w))?;
        }
        Ok(())
    }
}

impl DenoiseOverrides {
    fn apply(&self, s: &mut Settings) -> Result<()> {
        if let Some(m) = &self.mode {
            s.mode = input(parse_mode(m))?;
        }
        if let Some(k) = self.k {
            s.ensemble_k = k;
        }
        if let Some(a) = self.alpha1 {
            s.alpha1 = a;
        }
        if let Some(g) = self.gamma {
            s.gamma = g;
        }
        if let Some(t) = self.steps {
            s.steps = t;
        }
        if let Some(p) = self.patch_size {
            s.patch_size = p;
        }
        if let Some(c) = self.coverage {
            s.coverage = c;
        }
        Ok(())
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::MakeData(a) => make_data(a),
        Command::Init(a) => init(a),
        Command::Train(a) => train(a),
        Command::Denoise(a) => denoise(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Upsample(a) => upsample(a),
        Command::ScoreField(a) => score_field(a),
    }
}

fn make_data(a: MakeDataArgs) -> Result<()> {
    let mut s = settings(&a.common)?;
    if let Some(c) = a.count {
        s.count = c;
    }
    if let Some(n) = &a.noise {
        s.noise = input(n.parse::<NoiseModel>())?;
    }
    if let Some(m) = &a.sampling {
        s.sampling = input(parse_sampling(m))?;
    }
    let mesh = read_obj(&a.mesh)?;
    let name = match &a.name {
        Some(n) => n.clone(),
        None => a
            .mesh
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .ok_or_else(|| CliError::Input("cannot derive a name from the mesh path".into()))?,
    };
    let seed = RngSeed(s.seed);
    let cloud = sample_surface(&mesh, &SamplingConfig::new(s.count, s.sampling), seed.derive(0))?;
    let (clean, transform) = normalize_unit_sphere(&cloud);
    let noisy = perturb(&clean, &s.noise, seed.derive(1))?;
    fs::create_dir_all(&a.out_dir).map_err(|e| CliError::io(&a.out_dir, e))?;
    write_xyz(&a.out_dir.join(format!("{name}_clean.xyz")), clean.points())?;
    write_xyz(&a.out_dir.join(format!("{name}_noisy.xyz")), noisy.points())?;
    write_obj(&a.out_dir.join(format!("{name}_mesh.obj")), &mesh.transformed(&transform)?)?;
    let c = transform.center;
    println!("center {} {} {}", format_g6(c.x), format_g6(c.y), format_g6(c.z));
    println!("scale {}", format_g6(transform.scale));
    Ok(())
}

fn init(a: InitArgs) -> Result<()> {
    let mut s = settings(&a.common)?;
    a.network.apply(&mut s)?;
    let params = ScoreNetworkParams::init(&s.network, RngSeed(s.seed))?;
    save_checkpoint(&a.out, &Checkpoint::new(params))
}

fn clean_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.file_name().is_some_and(|n| n.to_string_lossy().ends_with("_clean.xyz")))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::Input(format!("{}: no *_clean.xyz files", dir.display())));
    }
    Ok(files)
}

fn train(a: TrainArgs) -> Result<()> {
    let mut s = settings(&a.common)?;
    a.network.apply(&mut s)?;
    if let Some(l) = &a.loss {
        s.train.loss = input(parse_loss(l))?;
    }
    if let Some(n) = a.iterations {
        s.train.iterations = n;
    }
    let mut dataset = Vec::new();
    for f in clean_files(&a.data_dir)? {
        let cloud = read_xyz(&f)?;
        dataset.extend(patch_dataset(&cloud, s.train_patch_size, s.train_coverage)?);
    }
    let total = s.train.iterations;
    let outcome = train_with_progress(&dataset, &s.train, &s.network, RngSeed(s.seed), |step, loss| {
        if (step + 1) % 100 == 0 || step + 1 == total {
            eprintln!("step {}/{total} loss {loss:.6e}", step + 1);
        }
    })?;
    let mut ckpt = Checkpoint::new(outcome.params);
    ckpt.metadata.insert("loss".into(), loss_name(s.train.loss).into());
    save_checkpoint(&a.out, &ckpt)?;
    let mut csv = String::from("step,loss\n");
    for (i, l) in outcome.losses.iter().enumerate() {
        let _ = writeln!(csv, "{i},{l:e}");
    }
    let csv_path = a.loss_csv.unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".loss.csv");
        PathBuf::from(p)
    });
    write_atomic(&csv_path, csv.as_bytes())
}

fn denoise(a: DenoiseArgs) -> Result<()> {
    let mut s = settings(&a.common)?;
    a.overrides.apply(&mut s)?;
    let cfg = s.denoise_config()?;
    let cloud = read_xyz(&a.input)?;
    let params = load_checkpoint(&a.checkpoint)?.params;
    let mesh = a.mesh.as_deref().map(read_obj).transpose()?;
    let out = denoise_cloud(&cloud, &params, &cfg)?;
    write_xyz(&a.output, out.points())?;
    if let (Some(path), Some(mesh)) = (&a.error_dump, &mesh) {
        let rows: Vec<[f64; 4]> =
            out.points().iter().map(|&p| [p.x, p.y, p.z, point_to_mesh_sq(p, mesh).sqrt()]).collect();
        write_atomic(path, format_rows(rows.iter().map(|r| &r[..])).as_bytes())?;
    }
    Ok(())
}

/// Largest deviation from the unit-sphere frame tolerated in `evaluate`.
const FRAME_TOLERANCE: f64 = 1e-3;

fn evaluate_cmd(a: EvaluateArgs) -> Result<()> {
    let denoised = read_xyz(&a.denoised)?;
    let clean = read_xyz(&a.clean)?;
    let mesh = a.mesh.as_deref().map(read_obj).transpose()?;
    let (_, t) = normalize_unit_sphere(&clean);
    if t.center.norm() > FRAME_TOLERANCE || (t.scale - 1.0).abs() > FRAME_TOLERANCE {
        return Err(CliError::Mismatch(format!(
            "{} is not in the unit-sphere frame (center offset {:.3e}, radius {:.6})",
            a.clean.display(),
            t.center.norm(),
            t.scale
        )));
    }
    if let Some(m) = &mesh {
        let worst = clean.points().iter().map(|&p| point_to_mesh_sq(p, m)).fold(0.0, f64::max);
        if worst.sqrt() > FRAME_TOLERANCE {
            return Err(CliError::Mismatch(format!("clean cloud lies up to {:.3e} away from the mesh", worst.sqrt())));
        }
    }
    let report = evaluate(&denoised, &clean, mesh.as_ref())?.with_labels(&a.shape, &a.noise, &a.resolution);
    let text = if a.table {
        format_table(std::slice::from_ref(&report))
    } else {
        format!("{}\n{}\n", EvalReport::CSV_HEADER, report.csv_row())
    };
    match &a.output {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn upsample(a: UpsampleArgs) -> Result<()> {
    let mut s = settings(&a.common)?;
    a.overrides.apply(&mut s)?;
    if let Some(r) = a.rate {
        s.upsample_rate = r;
    }
    if let Some(sig) = a.sigma {
        s.upsample_sigma = sig;
    }
    let cfg = s.denoise_config()?;
    let cloud = read_xyz(&a.input)?;
    let params = load_checkpoint(&a.checkpoint)?.params;
    let out = upsample_via_denoise(&cloud, s.upsample_rate, s.upsample_sigma, &params, &cfg, RngSeed(s.seed))?;
    write_xyz(&a.output, out.points())
}

/// `n^3` probes on a cube of half-width `extent * scale` around `center`,
/// x varying fastest.
fn probe_grid(center: Point3, half: f64, n: usize) -> Vec<Point3> {
    let coord = |i: usize| {
        if n == 1 {
            0.0
        } else {
            -half + 2.0 * half * i as f64 / (n - 1) as f64
        }
    };
    let mut out = Vec::with_capacity(n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                out.push(center + Point3::new(coord(i), coord(j), coord(k)));
            }
        }
    }
    out
}

fn score_field(a: ScoreFieldArgs) -> Result<()> {
    let mut s = settings(&a.common)?;
    a.overrides.apply(&mut s)?;
    if a.resolution == 0 || !(a.extent > 0.0 && a.extent.is_finite()) {
        return Err(CliError::Input("resolution and extent must be positive".into()));
    }
    let (probes, vectors) = if let Some(sigma) = a.plane_oracle {
        let plane = PlaneGaussianModel::new(sigma)?;
        let probes = probe_grid(Point3::ZERO, a.extent, a.resolution);
        let v = probes.iter().map(|&p| plane.score(p)).collect();
        (probes, v)
    } else {
        let (Some(inp), Some(ck)) = (&a.input, &a.checkpoint) else {
            return Err(CliError::Input("--input and --checkpoint are required without --plane-oracle".into()));
        };
        let cloud: PointCloud = read_xyz(inp)?;
        let params = load_checkpoint(ck)?.params;
        let cfg = s.denoise_config()?;
        let (_, t) = normalize_unit_sphere(&cloud);
        let probes = probe_grid(t.center, a.extent * t.scale, a.resolution);
        let v = sample_score_field(&cloud, &params, &cfg, &probes)?;
        (probes, v)
    };
    let rows: Vec<[f64; 6]> = probes.iter().zip(&vectors).map(|(p, v)| [p.x, p.y, p.z, v.x, v.y, v.z]).collect();
    write_atomic(&a.output, format_rows(rows.iter().map(|r| &r[..])).as_bytes())?;
    Ok(())
}
