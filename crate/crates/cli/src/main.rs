//! `gsr`: generate scanpaths, convert 360-degree images into GSR sequences,
//! score sequence pairs, and run dataset evaluations.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use gsrkit::container;
use gsrkit::eval::{evaluate, DatasetManifest, EvalMetric, PipelineConfig};
use gsrkit::gsr::{convert, exact_sqrt, GsrConfig, Pitch, Sampling};
use gsrkit::scanpath::{
    generate, load_scanpaths, save_scanpaths, GeneratorConfig, LoadOptions, ModelKind, ViewingCondition,
};
use gsrkit::scoring::{score_sequences, FrMetric, ScoreMode};
use gsrkit::{EquirectImage, NormPoint, PlccMapping, PoolingMethod};

#[derive(Parser, Debug)]
#[command(
    name = "gsr",
    version,
    about = "Scanpath-driven quality assessment for 360-degree images"
)]
struct Cli {
    /// Worker threads (default: all cores). Outputs do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate scanpaths under a viewing condition and write them as JSON.
    Scanpath(ScanpathArgs),
    /// Convert an equirectangular image into a GSR sequence.
    Convert(ConvertArgs),
    /// Score a distorted GSR sequence against its reference.
    Score(ScoreArgs),
    /// Evaluate a metric against the opinion scores of a dataset manifest.
    Eval(EvalArgs),
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum ModelArg {
    #[value(alias = "markov_walk")]
    Markov,
    #[value(alias = "uniform_random")]
    Random,
    #[value(alias = "fixed_center")]
    Fixed,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Markov => ModelKind::MarkovWalk,
            ModelArg::Random => ModelKind::UniformRandom,
            ModelArg::Fixed => ModelKind::FixedCenter,
        }
    }
}

#[derive(Args, Debug)]
struct GeneratorArgs {
    #[arg(long, value_enum, default_value = "markov")]
    model: ModelArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Mean gaze shift per second, degrees.
    #[arg(long, default_value_t = 20.0)]
    step_mean: f64,
    #[arg(long, default_value_t = 10.0)]
    step_std: f64,
    #[arg(long, default_value_t = 0.6)]
    momentum: f64,
    #[arg(long, default_value_t = 0.15)]
    equator_pull: f64,
}

impl GeneratorArgs {
    fn config(&self) -> GeneratorConfig {
        GeneratorConfig {
            model: self.model.into(),
            seed: self.seed,
            step_mean_deg_per_s: self.step_mean,
            step_std_deg: self.step_std,
            momentum: self.momentum,
            equator_pull: self.equator_pull,
        }
    }
}

fn parse_start(s: &str) -> std::result::Result<NormPoint, String> {
    let (y, x) = s.split_once(',').ok_or("expected Y,X")?;
    let y: f64 = y.trim().parse().map_err(|_| format!("bad y {y:?}"))?;
    let x: f64 = x.trim().parse().map_err(|_| format!("bad x {x:?}"))?;
    NormPoint::new(y, x).map_err(|e| e.to_string())
}

#[derive(Args, Debug)]
struct ScanpathArgs {
    /// Image the scanpaths are meant for (checked for existence only; the
    /// built-in generators are content-agnostic).
    #[arg(long)]
    image: Option<PathBuf>,
    /// Starting point as normalized Y,X.
    #[arg(long, value_parser = parse_start, default_value = "0.5,0.5")]
    start: NormPoint,
    /// Exploration time in seconds (one gaze point per second).
    #[arg(long, default_value_t = 20)]
    duration: u32,
    #[arg(long, default_value_t = 49)]
    n: usize,
    #[command(flatten)]
    generator: GeneratorArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone, Copy)]
struct PathFlags {
    /// Loaded scanpaths: mirror the vertical axis.
    #[arg(long)]
    flip_y: bool,
    /// Loaded scanpaths: mirror the horizontal axis.
    #[arg(long)]
    flip_x: bool,
    /// Loaded scanpaths hold (latitude°, longitude°) pairs.
    #[arg(long)]
    lonlat: bool,
}

impl From<PathFlags> for LoadOptions {
    fn from(f: PathFlags) -> Self {
        LoadOptions {
            flip_y: f.flip_y,
            flip_x: f.flip_x,
            lonlat: f.lonlat,
        }
    }
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum SamplingArg {
    Tangent,
    #[value(alias = "erp_crop", alias = "erp-crop")]
    Erp,
}

fn parse_patch(s: &str) -> std::result::Result<(usize, usize), String> {
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|_| format!("bad patch size {s:?}"));
    match s.split_once(['x', 'X']) {
        Some((h, w)) => Ok((parse(h)?, parse(w)?)),
        None => parse(s).map(|p| (p, p)),
    }
}

fn parse_pitch(s: &str) -> std::result::Result<Pitch, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(Pitch::SourceMatched);
    }
    s.parse::<f64>()
        .map(Pitch::FixedFov)
        .map_err(|_| format!("pitch must be 'auto' or degrees per patch, got {s:?}"))
}

#[derive(Args, Debug)]
struct GsrArgs {
    /// Mini-patch size, `P` or `HxW`.
    #[arg(long, value_parser = parse_patch, default_value = "32")]
    patch: (usize, usize),
    /// `auto` (source-matched pixel pitch) or the horizontal patch span in degrees.
    #[arg(long, value_parser = parse_pitch, default_value = "auto")]
    pitch: Pitch,
    #[arg(long, value_enum, default_value = "tangent")]
    sampling: SamplingArg,
}

impl GsrArgs {
    fn config(&self, n: usize) -> GsrConfig {
        GsrConfig {
            patch_h: self.patch.0,
            patch_w: self.patch.1,
            n,
            pitch: self.pitch,
            sampling: match self.sampling {
                SamplingArg::Tangent => Sampling::Tangent,
                SamplingArg::Erp => Sampling::ErpCrop,
            },
        }
    }
}

#[derive(Args, Debug)]
struct ConvertArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    paths: PathBuf,
    #[command(flatten)]
    path_flags: PathFlags,
    #[command(flatten)]
    gsr: GsrArgs,
    /// Expected number of scanpaths (defaults to the count in --paths).
    #[arg(long)]
    n: Option<usize>,
    /// Output directory, or a `.gsr` file for the raw single-file form.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum ModeArg {
    PerPatch,
    PerFrame,
}

impl From<ModeArg> for ScoreMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::PerPatch => ScoreMode::PerPatch,
            ModeArg::PerFrame => ScoreMode::PerFrame,
        }
    }
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum FrMetricArg {
    Psnr,
    Ssim,
}

fn parse_pool(s: &str) -> std::result::Result<PoolingMethod, String> {
    s.parse().map_err(|e: gsrkit::Error| e.to_string())
}

#[derive(Args, Debug)]
struct ScoreArgs {
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long)]
    dist: PathBuf,
    #[arg(long, value_enum, default_value = "psnr")]
    metric: FrMetricArg,
    #[arg(long, value_enum, default_value = "per-patch")]
    mode: ModeArg,
    /// `am`, `gw` (sigma = T/2) or `gw:SIGMA`.
    #[arg(long, value_parser = parse_pool, default_value = "am")]
    pool: PoolingMethod,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum EvalMetricArg {
    GPsnr,
    GSsim,
    WsPsnr,
    SPsnr,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum MappingArg {
    None,
    Logistic4,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_enum, default_value = "g-psnr")]
    metric: EvalMetricArg,
    #[arg(long, value_enum, default_value = "per-patch")]
    mode: ModeArg,
    #[arg(long, value_parser = parse_pool, default_value = "am")]
    pool: PoolingMethod,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    /// Seed of the train/validation/test splits.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Scanpath generator seed and kinematics for rows without a scanpath file.
    #[arg(long = "path-seed", default_value_t = 0)]
    path_seed: u64,
    #[arg(long, value_enum, default_value = "markov")]
    model: ModelArg,
    #[arg(long, default_value_t = 49)]
    n: usize,
    #[command(flatten)]
    gsr: GsrArgs,
    #[command(flatten)]
    path_flags: PathFlags,
    #[arg(long, value_enum, default_value = "none")]
    plcc_mapping: MappingArg,
    #[arg(long, default_value_t = gsrkit::metrics::S_PSNR_DEFAULT_POINTS)]
    s_psnr_points: usize,
    /// Directory for content-addressed GSR conversions.
    #[arg(long, env = "GSR_CACHE_DIR")]
    cache: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn run_scanpath(args: ScanpathArgs) -> Result<()> {
    if let Some(img) = &args.image {
        if !img.exists() {
            bail!("image {} does not exist", img.display());
        }
    }
    let cond = ViewingCondition::new(args.start, args.duration)?;
    let set = generate(cond, args.n, &args.generator.config())?;
    save_scanpaths(&set, &args.out)?;
    Ok(())
}

fn run_convert(args: ConvertArgs) -> Result<()> {
    let paths = load_scanpaths(&args.paths, args.path_flags.into())?;
    let n = args.n.unwrap_or(paths.len());
    let grid = exact_sqrt(n).ok_or_else(|| {
        let g = (n as f64).sqrt().round().max(1.0) as usize;
        anyhow!(
            "{n} scanpaths cannot fill a square grid; expected N = {} (sqrt(N) = {g})",
            g * g
        )
    })?;
    if paths.len() != n {
        bail!(
            "expected N = {n} scanpaths (sqrt(N) = {grid}), {} holds {}",
            args.paths.display(),
            paths.len()
        );
    }
    let img = EquirectImage::load(&args.image)?;
    let seq = convert(&img, &paths, &args.gsr.config(n))?;
    container::save(&seq, &args.out)?;
    Ok(())
}

fn run_score(args: ScoreArgs) -> Result<()> {
    let reference = container::load(&args.reference)?;
    let distorted = container::load(&args.dist)?;
    let metric = match args.metric {
        FrMetricArg::Psnr => FrMetric::Psnr,
        FrMetricArg::Ssim => FrMetric::Ssim,
    };
    let report = score_sequences(&reference, &distorted, metric, args.mode.into(), args.pool)?;
    write_text(&args.out, &report.to_json_string()?)?;
    println!("{:.6}", report.pooled);
    Ok(())
}

fn run_eval(args: EvalArgs) -> Result<()> {
    let manifest = DatasetManifest::load(&args.manifest)?;
    let cfg = PipelineConfig {
        metric: match args.metric {
            EvalMetricArg::GPsnr => EvalMetric::GPsnr,
            EvalMetricArg::GSsim => EvalMetric::GSsim,
            EvalMetricArg::WsPsnr => EvalMetric::WsPsnr,
            EvalMetricArg::SPsnr => EvalMetric::SPsnr,
        },
        mode: args.mode.into(),
        pooling: args.pool,
        gsr: args.gsr.config(args.n),
        generator: GeneratorConfig {
            model: args.model.into(),
            seed: args.path_seed,
            ..GeneratorConfig::default()
        },
        scanpath_options: args.path_flags.into(),
        s_psnr_points: args.s_psnr_points,
        repeats: args.repeats,
        split_seed: args.seed,
        plcc_mapping: match args.plcc_mapping {
            MappingArg::None => PlccMapping::None,
            MappingArg::Logistic4 => PlccMapping::Logistic4,
        },
        cache_dir: args.cache,
    };
    let result = evaluate(&manifest, &cfg)?;
    write_text(&args.out, &result.to_json_string()?)?;
    println!(
        "SRCC {:.4} ± {:.4}  PLCC {:.4} ± {:.4}",
        result.srcc_mean, result.srcc_std, result.plcc_mean, result.plcc_std
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.command {
        Command::Scanpath(a) => run_scanpath(a),
        Command::Convert(a) => run_convert(a),
        Command::Score(a) => run_score(a),
        Command::Eval(a) => run_eval(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
