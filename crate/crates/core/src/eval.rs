//! Dataset-level evaluation: manifest ingestion, reference-grouped repeated
//! splits, per-row scoring, and SRCC/PLCC aggregation.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::canonical::to_canonical_string;
use crate::container;
use crate::correlation::{plcc, srcc, PlccMapping};
use crate::error::{Error, Result};
use crate::gsr::{convert_with_image_hash, GsrConfig, GsrSequence, SOFTWARE};
use crate::metrics::{s_psnr, ws_psnr, S_PSNR_DEFAULT_POINTS};
use crate::numeric::{mean, sample_std};
use crate::pooling::PoolingMethod;
use crate::raster::EquirectImage;
use crate::scanpath::{generate, load_scanpaths, GeneratorConfig, LoadOptions, ScanpathSet, ViewingCondition};
use crate::scoring::{score_sequences, FrMetric, ScoreMode};
use crate::sphere::NormPoint;

/// One (distorted image, viewing condition) pair with its opinion score.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub dist_path: PathBuf,
    pub ref_path: PathBuf,
    pub reference_id: String,
    pub mos: f64,
    pub condition: Option<ViewingCondition>,
    pub scanpath_file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetManifest {
    pub rows: Vec<ManifestRow>,
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    dist_path: String,
    ref_path: String,
    reference_id: String,
    mos: f64,
    #[serde(default)]
    start_y: Option<f64>,
    #[serde(default)]
    start_x: Option<f64>,
    #[serde(default)]
    duration_s: Option<u32>,
    #[serde(default)]
    scanpath_file: Option<String>,
}

impl DatasetManifest {
    /// Loads a manifest CSV; relative paths resolve against the manifest's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let resolve = |p: &str| {
            let p = Path::new(p);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base_dir.join(p)
            }
        };
        let mut rows = Vec::new();
        for (i, rec) in reader.deserialize::<CsvRow>().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| Error::Format(format!("manifest line {line}: {e}")))?;
            if rec.reference_id.is_empty() {
                return Err(Error::Format(format!("manifest line {line}: empty reference_id")));
            }
            if !rec.mos.is_finite() {
                return Err(Error::Format(format!("manifest line {line}: non-finite mos")));
            }
            let condition = match (rec.start_y, rec.start_x, rec.duration_s) {
                (None, None, None) => None,
                (Some(y), Some(x), Some(d)) => Some(
                    NormPoint::new(y, x)
                        .and_then(|p| ViewingCondition::new(p, d))
                        .map_err(|e| Error::Format(format!("manifest line {line}: {e}")))?,
                ),
                _ => {
                    return Err(Error::Format(format!(
                        "manifest line {line}: start_y, start_x and duration_s must be given together"
                    )))
                }
            };
            rows.push(ManifestRow {
                dist_path: resolve(&rec.dist_path),
                ref_path: resolve(&rec.ref_path),
                reference_id: rec.reference_id,
                mos: rec.mos,
                condition,
                scanpath_file: rec.scanpath_file.filter(|s| !s.is_empty()).map(|s| resolve(&s)),
            });
        }
        Ok(DatasetManifest { rows })
    }

    /// Distinct reference ids, sorted.
    pub fn reference_ids(&self) -> Vec<String> {
        self.rows
            .iter()
            .map(|r| r.reference_id.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// Every referenced file that does not exist, in manifest order.
    pub fn missing_files(&self, include_scanpaths: bool) -> Vec<PathBuf> {
        let mut seen = BTreeSet::new();
        let mut missing = Vec::new();
        for row in &self.rows {
            let mut paths = vec![&row.dist_path, &row.ref_path];
            if include_scanpaths {
                paths.extend(row.scanpath_file.as_ref());
            }
            for p in paths {
                if !p.exists() && seen.insert(p.clone()) {
                    missing.push(p.clone());
                }
            }
        }
        missing
    }
}

pub const TRAIN_TENTHS: usize = 7;
pub const VAL_TENTHS: usize = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Partition {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SplitPlan {
    pub seed: u64,
    pub repeats: usize,
    pub partitions: Vec<Partition>,
}

/// Sizes of the 70/10/20 split of `r` references: round, round, remainder
/// (half rounds up), with at least one test reference borrowed from train.
pub fn split_sizes(r: usize) -> (usize, usize, usize) {
    let mut train = (TRAIN_TENTHS * r + 5) / 10;
    let val = (VAL_TENTHS * r + 5) / 10;
    if train + val >= r {
        train = r - val - 1;
    }
    (train, val, r - train - val)
}

/// Shuffles the distinct reference ids once per repeat, using stream
/// `repeat` of a ChaCha generator seeded with `seed`.
pub fn make_splits(reference_ids: &[String], seed: u64, repeats: usize) -> Result<SplitPlan> {
    let ids: Vec<String> = reference_ids
        .iter()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if ids.len() < 3 {
        return Err(Error::Config(format!(
            "need at least 3 distinct references to split, got {}",
            ids.len()
        )));
    }
    if repeats == 0 {
        return Err(Error::Config("repeats must be at least 1".into()));
    }
    let (n_train, n_val, _) = split_sizes(ids.len());
    let partitions = (0..repeats)
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            let mut shuffled = ids.clone();
            shuffled.shuffle(&mut rng);
            let test = shuffled.split_off(n_train + n_val);
            let val = shuffled.split_off(n_train);
            Partition {
                train: shuffled,
                val,
                test,
            }
        })
        .collect();
    Ok(SplitPlan {
        seed,
        repeats,
        partitions,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalMetric {
    GPsnr,
    GSsim,
    WsPsnr,
    SPsnr,
}

impl EvalMetric {
    fn uses_gsr(&self) -> Option<FrMetric> {
        match self {
            EvalMetric::GPsnr => Some(FrMetric::Psnr),
            EvalMetric::GSsim => Some(FrMetric::Ssim),
            _ => None,
        }
    }
}

impl FromStr for EvalMetric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "g-psnr" => Ok(EvalMetric::GPsnr),
            "g-ssim" => Ok(EvalMetric::GSsim),
            "ws-psnr" => Ok(EvalMetric::WsPsnr),
            "s-psnr" => Ok(EvalMetric::SPsnr),
            _ => Err(Error::Config(format!(
                "unknown metric {s:?} (expected g-psnr, g-ssim, ws-psnr or s-psnr)"
            ))),
        }
    }
}

impl fmt::Display for EvalMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvalMetric::GPsnr => "g-psnr",
            EvalMetric::GSsim => "g-ssim",
            EvalMetric::WsPsnr => "ws-psnr",
            EvalMetric::SPsnr => "s-psnr",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub metric: EvalMetric,
    pub mode: ScoreMode,
    pub pooling: PoolingMethod,
    pub gsr: GsrConfig,
    pub generator: GeneratorConfig,
    pub scanpath_options: LoadOptions,
    pub s_psnr_points: usize,
    pub repeats: usize,
    pub split_seed: u64,
    pub plcc_mapping: PlccMapping,
    pub cache_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            metric: EvalMetric::GPsnr,
            mode: ScoreMode::PerPatch,
            pooling: PoolingMethod::Am,
            gsr: GsrConfig::default(),
            generator: GeneratorConfig::default(),
            scanpath_options: LoadOptions::default(),
            s_psnr_points: S_PSNR_DEFAULT_POINTS,
            repeats: 5,
            split_seed: 0,
            plcc_mapping: PlccMapping::None,
            cache_dir: None,
        }
    }
}

/// Content-addressed store of converted sequences: in memory for the
/// lifetime of one evaluation, and optionally on disk across runs.
#[derive(Debug, Default)]
pub struct GsrCache {
    dir: Option<PathBuf>,
    memory: Mutex<HashMap<String, Arc<GsrSequence>>>,
}

impl GsrCache {
    pub fn new(dir: Option<PathBuf>) -> Result<Self> {
        if let Some(d) = &dir {
            fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
        }
        Ok(GsrCache {
            dir,
            memory: Mutex::new(HashMap::new()),
        })
    }

    pub fn key(image_sha256: &str, scanpath_sha256: &str, cfg: &GsrConfig) -> Result<String> {
        let mut h = Sha256::new();
        h.update(image_sha256.as_bytes());
        h.update(b"\n");
        h.update(scanpath_sha256.as_bytes());
        h.update(b"\n");
        h.update(to_canonical_string(cfg)?.as_bytes());
        h.update(SOFTWARE.as_bytes());
        Ok(hex::encode(h.finalize()))
    }

    /// Returns the conversion of `img` under `paths`, computing it at most once per key.
    pub fn get_or_convert(
        &self,
        img: &EquirectImage,
        paths: &ScanpathSet,
        cfg: &GsrConfig,
        keep_in_memory: bool,
    ) -> Result<Arc<GsrSequence>> {
        let image_sha = img.rgb().sha256_hex();
        let path_sha = paths.sha256_hex()?;
        let key = Self::key(&image_sha, &path_sha, cfg)?;
        if let Some(hit) = self.memory.lock().unwrap().get(&key) {
            return Ok(Arc::clone(hit));
        }
        let file = self.dir.as_ref().map(|d| d.join(format!("{key}.gsr")));
        let from_disk = file
            .as_ref()
            .filter(|f| f.exists())
            .and_then(|f| container::read_raw(f).ok())
            .filter(|s| s.meta.image_sha256 == image_sha && s.meta.scanpath_sha256 == path_sha);
        let seq = match from_disk {
            Some(s) => s,
            None => {
                let s = convert_with_image_hash(img, image_sha, paths, cfg)?;
                if let Some(f) = &file {
                    store_atomically(&s, f)?;
                }
                s
            }
        };
        let seq = Arc::new(seq);
        if keep_in_memory {
            self.memory.lock().unwrap().insert(key, Arc::clone(&seq));
        }
        Ok(seq)
    }
}

fn store_atomically(seq: &GsrSequence, dest: &Path) -> Result<()> {
    let tmp_name = |p: &Path| {
        let mut s = p.as_os_str().to_owned();
        s.push(format!(".tmp{}-{:?}", std::process::id(), std::thread::current().id()));
        PathBuf::from(s)
    };
    let meta_dest = container::raw_meta_path(dest);
    let tmp = tmp_name(dest);
    container::write_raw(seq, &tmp)?;
    let tmp_meta = container::raw_meta_path(&tmp);
    // sidecar first so a visible data file always has its metadata
    fs::rename(&tmp_meta, &meta_dest).map_err(|e| Error::io(&meta_dest, e))?;
    fs::rename(&tmp, dest).map_err(|e| Error::io(dest, e))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepeatResult {
    pub repeat: usize,
    pub n_test: usize,
    pub srcc: f64,
    pub plcc: f64,
    pub plcc_fit_failed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowScore {
    pub index: usize,
    pub reference_id: String,
    pub mos: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalResult {
    pub metric: EvalMetric,
    pub mode: ScoreMode,
    /// `am`, `gw` (sigma = T/2 per row) or `gw:SIGMA`.
    pub pooling: String,
    pub plcc_mapping: PlccMapping,
    pub seed: u64,
    pub repeats: Vec<RepeatResult>,
    pub splits: Vec<Partition>,
    pub rows: Vec<RowScore>,
    pub srcc_mean: f64,
    pub srcc_std: f64,
    pub plcc_mean: f64,
    pub plcc_std: f64,
}

impl EvalResult {
    pub fn to_json_string(&self) -> Result<String> {
        to_canonical_string(self)
    }
}

/// Scanpaths for one manifest row: its file if given, else generated under its
/// condition (or the image-center, 20 s default).
pub fn row_scanpaths(row: &ManifestRow, cfg: &PipelineConfig) -> Result<ScanpathSet> {
    match &row.scanpath_file {
        Some(file) => {
            let set = load_scanpaths(file, cfg.scanpath_options)?;
            if set.len() != cfg.gsr.n {
                return Err(Error::Config(format!(
                    "{}: {} scanpaths, configuration expects N = {}",
                    file.display(),
                    set.len(),
                    cfg.gsr.n
                )));
            }
            if let Some(c) = row.condition {
                if c.duration_s != set.condition.duration_s {
                    return Err(Error::Config(format!(
                        "{}: duration {} s disagrees with manifest duration {} s",
                        file.display(),
                        set.condition.duration_s,
                        c.duration_s
                    )));
                }
            }
            Ok(set)
        }
        None => generate(row.condition.unwrap_or_default(), cfg.gsr.n, &cfg.generator),
    }
}

fn score_row(row: &ManifestRow, cfg: &PipelineConfig, cache: &GsrCache) -> Result<f64> {
    let reference = EquirectImage::load(&row.ref_path)?;
    let distorted = EquirectImage::load(&row.dist_path)?;
    match cfg.metric.uses_gsr() {
        Some(metric) => {
            let paths = row_scanpaths(row, cfg)?;
            let ref_seq = cache.get_or_convert(&reference, &paths, &cfg.gsr, true)?;
            let dist_seq = cache.get_or_convert(&distorted, &paths, &cfg.gsr, false)?;
            Ok(score_sequences(&ref_seq, &dist_seq, metric, cfg.mode, cfg.pooling)?.pooled)
        }
        None if cfg.metric == EvalMetric::WsPsnr => ws_psnr(reference.rgb(), distorted.rgb()),
        None => s_psnr(reference.rgb(), distorted.rgb(), cfg.s_psnr_points),
    }
}

/// Runs the repeated-split evaluation protocol over `manifest`.
pub fn evaluate(manifest: &DatasetManifest, cfg: &PipelineConfig) -> Result<EvalResult> {
    if manifest.rows.is_empty() {
        return Err(Error::Config("manifest has no rows".into()));
    }
    let missing = manifest.missing_files(cfg.metric.uses_gsr().is_some());
    if !missing.is_empty() {
        let list: Vec<String> = missing.iter().map(|p| p.display().to_string()).collect();
        return Err(Error::Config(format!("missing files: {}", list.join(", "))));
    }
    cfg.gsr.validate()?;

    let plan = make_splits(&manifest.reference_ids(), cfg.split_seed, cfg.repeats)?;
    let tested: BTreeSet<&str> = plan
        .partitions
        .iter()
        .flat_map(|p| p.test.iter().map(String::as_str))
        .collect();
    let cache = GsrCache::new(cfg.cache_dir.clone())?;

    let scores: Vec<Option<f64>> = manifest
        .rows
        .par_iter()
        .map(|row| {
            if tested.contains(row.reference_id.as_str()) {
                score_row(row, cfg, &cache).map(Some)
            } else {
                Ok(None)
            }
        })
        .collect::<Result<_>>()?;

    let mut repeats = Vec::with_capacity(plan.repeats);
    for (r, part) in plan.partitions.iter().enumerate() {
        let test: BTreeSet<&str> = part.test.iter().map(String::as_str).collect();
        let (pred, mos): (Vec<f64>, Vec<f64>) = manifest
            .rows
            .iter()
            .zip(&scores)
            .filter(|(row, _)| test.contains(row.reference_id.as_str()))
            .map(|(row, s)| (s.expect("test rows are scored"), row.mos))
            .unzip();
        let s = srcc(&pred, &mos)?;
        let p = plcc(&pred, &mos, cfg.plcc_mapping)?;
        repeats.push(RepeatResult {
            repeat: r,
            n_test: pred.len(),
            srcc: s,
            plcc: p.value,
            plcc_fit_failed: p.fit_failed,
        });
    }

    let srccs: Vec<f64> = repeats.iter().map(|r| r.srcc).collect();
    let plccs: Vec<f64> = repeats.iter().map(|r| r.plcc).collect();
    Ok(EvalResult {
        metric: cfg.metric,
        mode: cfg.mode,
        pooling: cfg.pooling.to_string(),
        plcc_mapping: cfg.plcc_mapping,
        seed: cfg.split_seed,
        splits: plan.partitions,
        rows: manifest
            .rows
            .iter()
            .zip(&scores)
            .enumerate()
            .filter_map(|(index, (row, s))| {
                s.map(|score| RowScore {
                    index,
                    reference_id: row.reference_id.clone(),
                    mos: row.mos,
                    score,
                })
            })
            .collect(),
        srcc_mean: mean(&srccs),
        srcc_std: sample_std(&srccs),
        plcc_mean: mean(&plccs),
        plcc_std: sample_std(&plccs),
        repeats,
    })
}
