//! Scanpath generation conditioned on a viewing condition, plus the scanpath
//! JSON format used for externally recorded (e.g. human) gaze data.
//!
//! One gaze point is produced per second of exploration, so a path has
//! exactly `duration_s` points and its first point is the starting point.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::canonical::{round_sig9, to_canonical_string};
use crate::error::{Error, Result};
use crate::sphere::{sph_to_norm, vec_to_sph, wrap_lon, NormPoint, UnitVec3};

pub const DEFAULT_DURATION_S: u32 = 20;

/// Starting point and exploration time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewingCondition {
    pub start: NormPoint,
    pub duration_s: u32,
}

impl ViewingCondition {
    pub fn new(start: NormPoint, duration_s: u32) -> Result<Self> {
        start.validate()?;
        if duration_s == 0 {
            return Err(Error::Domain("duration must be at least 1 s".into()));
        }
        Ok(ViewingCondition { start, duration_s })
    }
}

/// Image center, 20 seconds: used whenever a dataset carries no viewing condition.
impl Default for ViewingCondition {
    fn default() -> Self {
        ViewingCondition {
            start: NormPoint::CENTER,
            duration_s: DEFAULT_DURATION_S,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scanpath {
    pub points: Vec<NormPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    MarkovWalk,
    UniformRandom,
    FixedCenter,
    /// Paths recorded or generated outside this crate.
    External,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::MarkovWalk => "markov_walk",
            ModelKind::UniformRandom => "uniform_random",
            ModelKind::FixedCenter => "fixed_center",
            ModelKind::External => "external",
        }
    }
}

/// `N` equally long scanpaths sharing one viewing condition.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanpathSet {
    pub condition: ViewingCondition,
    pub model: ModelKind,
    pub master_seed: u64,
    pub paths: Vec<Scanpath>,
}

impl ScanpathSet {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn duration(&self) -> usize {
        self.condition.duration_s as usize
    }

    pub fn to_json_string(&self) -> Result<String> {
        to_canonical_string(&ScanpathFile::from(self))
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn sha256_hex(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_json_string()?.as_bytes())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorConfig {
    pub model: ModelKind,
    pub seed: u64,
    pub step_mean_deg_per_s: f64,
    pub step_std_deg: f64,
    /// Weight of the previous heading when choosing the next one, in `[0, 1)`.
    pub momentum: f64,
    /// Strength of the heading bias toward the equator, `>= 0`.
    pub equator_pull: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            model: ModelKind::MarkovWalk,
            seed: 0,
            step_mean_deg_per_s: 20.0,
            step_std_deg: 10.0,
            momentum: 0.6,
            equator_pull: 0.15,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !finite_nonneg(self.step_mean_deg_per_s) || !finite_nonneg(self.step_std_deg) {
            return Err(Error::Config(
                "step mean and std must be finite and non-negative".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("momentum {} outside [0, 1)", self.momentum)));
        }
        if !finite_nonneg(self.equator_pull) {
            return Err(Error::Config("equator_pull must be finite and >= 0".into()));
        }
        if self.model == ModelKind::External {
            return Err(Error::Config("external scanpaths are loaded, not generated".into()));
        }
        Ok(())
    }
}

fn canonical_point(p: NormPoint) -> NormPoint {
    NormPoint {
        y: round_sig9(p.y),
        x: round_sig9(p.x),
    }
}

/// Generates `n` scanpaths under `cond`.
///
/// Path `i` draws from its own ChaCha stream keyed by `(cfg.seed, i)`, so the
/// output does not depend on how paths are scheduled across threads.
pub fn generate(cond: ViewingCondition, n: usize, cfg: &GeneratorConfig) -> Result<ScanpathSet> {
    if n == 0 {
        return Err(Error::Domain("n must be ≥ 1".into()));
    }
    cond.start.validate()?;
    if cond.duration_s == 0 {
        return Err(Error::Domain("duration must be at least 1 s".into()));
    }
    cfg.validate()?;

    let condition = ViewingCondition {
        start: canonical_point(cond.start),
        duration_s: cond.duration_s,
    };
    let paths = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(i as u64);
            let points = match cfg.model {
                ModelKind::MarkovWalk => markov_walk(&condition, cfg, &mut rng),
                ModelKind::UniformRandom => uniform_random(&condition, &mut rng),
                _ => vec![condition.start; condition.duration_s as usize],
            };
            Scanpath {
                points: points.into_iter().map(canonical_point).collect(),
            }
        })
        .collect();

    Ok(ScanpathSet {
        condition,
        model: cfg.model,
        master_seed: cfg.seed,
        paths,
    })
}

fn uniform_random(cond: &ViewingCondition, rng: &mut ChaCha8Rng) -> Vec<NormPoint> {
    let mut points = Vec::with_capacity(cond.duration_s as usize);
    points.push(cond.start);
    for _ in 1..cond.duration_s {
        let z: f64 = rng.random_range(-1.0..=1.0);
        let lon: f64 = rng.random_range(-PI..PI);
        points.push(sph_to_norm(crate::sphere::SphericalPoint::new(z.asin(), lon)));
    }
    points
}

type V3 = [f64; 3];

fn add_scaled(a: V3, b: V3, s: f64) -> V3 {
    [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]]
}

fn scale(a: V3, s: f64) -> V3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn dot(a: V3, b: V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn normalized(a: V3) -> Option<V3> {
    let n = dot(a, a).sqrt();
    (n > 1e-12).then(|| scale(a, 1.0 / n))
}

/// East and north unit vectors of the tangent plane at `p`.
fn local_frame(p: V3) -> (V3, V3) {
    let east = normalized([-p[1], p[0], 0.0]).unwrap_or([0.0, 1.0, 0.0]);
    let north = [
        p[1] * east[2] - p[2] * east[1],
        p[2] * east[0] - p[0] * east[2],
        p[0] * east[1] - p[1] * east[0],
    ];
    (east, north)
}

/// Momentum-driven random walk along great circles.
///
/// The heading is a blend of the transported previous heading and a fresh
/// uniformly random direction, nudged north or south toward the equator in
/// proportion to the current latitude. The step length is a folded-normal
/// draw around the configured mean.
fn markov_walk(cond: &ViewingCondition, cfg: &GeneratorConfig, rng: &mut ChaCha8Rng) -> Vec<NormPoint> {
    let steps = Normal::new(cfg.step_mean_deg_per_s, cfg.step_std_deg).expect("validated step parameters");
    let start = crate::sphere::norm_to_sph_unchecked(cond.start.y, cond.start.x);
    let mut p = crate::sphere::sph_to_vec(start).0;
    let mut heading: Option<V3> = None;

    let mut points = Vec::with_capacity(cond.duration_s as usize);
    points.push(cond.start);
    for _ in 1..cond.duration_s {
        let (east, north) = local_frame(p);
        let phi: f64 = rng.random_range(0.0..TAU);
        let fresh = add_scaled(scale(east, phi.cos()), north, phi.sin());

        let mut blend = match heading {
            Some(h) => add_scaled(scale(h, cfg.momentum), fresh, 1.0 - cfg.momentum),
            None => fresh,
        };
        let lat = p[2].clamp(-1.0, 1.0).asin();
        blend = add_scaled(blend, north, -cfg.equator_pull * lat / FRAC_PI_2);
        blend = add_scaled(blend, p, -dot(blend, p));
        let dir = normalized(blend).unwrap_or(fresh);

        let dist = steps.sample(rng).abs().to_radians();
        let (s, c) = dist.sin_cos();
        let next = add_scaled(scale(p, c), dir, s);
        let next_heading = add_scaled(scale(dir, c), p, -s);
        p = normalized(next).unwrap_or(p);
        heading = normalized(next_heading);

        points.push(sph_to_norm(vec_to_sph(UnitVec3(p))));
    }
    points
}

/// On-disk scanpath JSON. Files produced elsewhere may omit `model` and `seed`.
#[derive(Debug, Serialize, Deserialize)]
struct ScanpathFile {
    version: u32,
    duration_s: u32,
    start: [f64; 2],
    #[serde(default = "external_model")]
    model: ModelKind,
    #[serde(default = "zero_seed")]
    seed: String,
    paths: Vec<PathEntry>,
}

fn external_model() -> ModelKind {
    ModelKind::External
}

fn zero_seed() -> String {
    "0".into()
}

#[derive(Debug, Serialize, Deserialize)]
struct PathEntry {
    points: Vec<[f64; 2]>,
}

impl From<&ScanpathSet> for ScanpathFile {
    fn from(set: &ScanpathSet) -> Self {
        ScanpathFile {
            version: 1,
            duration_s: set.condition.duration_s,
            start: [set.condition.start.y, set.condition.start.x],
            model: set.model,
            seed: set.master_seed.to_string(),
            paths: set
                .paths
                .iter()
                .map(|p| PathEntry {
                    points: p.points.iter().map(|q| [q.y, q.x]).collect(),
                })
                .collect(),
        }
    }
}

/// Coordinate conventions accepted by the loader.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadOptions {
    pub flip_y: bool,
    pub flip_x: bool,
    /// Pairs are `(latitude°, longitude°)` instead of normalized `(y, x)`.
    pub lonlat: bool,
}

impl LoadOptions {
    fn convert(&self, pair: [f64; 2]) -> std::result::Result<NormPoint, String> {
        let (mut y, mut x) = if self.lonlat {
            let [lat, lon] = pair;
            if !lat.is_finite() || !lon.is_finite() || !(-90.0..=90.0).contains(&lat) {
                return Err(format!("point out of range (lat {lat}°, lon {lon}°)"));
            }
            let lon = wrap_lon(lon.to_radians()).to_degrees();
            (0.5 - lat / 180.0, (lon / 360.0 + 0.5).clamp(0.0, 1.0))
        } else {
            (pair[0], pair[1])
        };
        if !(0.0..=1.0).contains(&y) || !(0.0..=1.0).contains(&x) {
            return Err(format!("point out of range ({y}, {x})"));
        }
        if self.flip_y {
            y = 1.0 - y;
        }
        if self.flip_x {
            x = 1.0 - x;
        }
        Ok(canonical_point(NormPoint { y, x }))
    }
}

pub fn parse_scanpaths(text: &str, opts: LoadOptions) -> Result<ScanpathSet> {
    let file: ScanpathFile =
        serde_json::from_str(text).map_err(|e| Error::Format(format!("malformed scanpath JSON: {e}")))?;
    if file.version != 1 {
        return Err(Error::Format(format!("unsupported scanpath version {}", file.version)));
    }
    let master_seed: u64 = file
        .seed
        .parse()
        .map_err(|_| Error::Format(format!("seed {:?} is not an unsigned 64-bit integer", file.seed)))?;
    if file.paths.is_empty() {
        return Err(Error::Format("scanpath file contains no paths".into()));
    }
    let t = file.duration_s as usize;
    if t == 0 {
        return Err(Error::Format("duration_s must be at least 1".into()));
    }
    let start = opts
        .convert(file.start)
        .map_err(|e| Error::Format(format!("start: {e}")))?;

    let mut paths = Vec::with_capacity(file.paths.len());
    for (pi, entry) in file.paths.iter().enumerate() {
        if entry.points.len() != t {
            return Err(Error::Format(format!(
                "path {pi}: has {} points, expected duration_s = {t}",
                entry.points.len()
            )));
        }
        let points = entry
            .points
            .iter()
            .enumerate()
            .map(|(qi, &pair)| {
                opts.convert(pair)
                    .map_err(|e| Error::Format(format!("path {pi} point {qi}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        paths.push(Scanpath { points });
    }

    Ok(ScanpathSet {
        condition: ViewingCondition {
            start,
            duration_s: file.duration_s,
        },
        model: file.model,
        master_seed,
        paths,
    })
}

pub fn load_scanpaths(path: &Path, opts: LoadOptions) -> Result<ScanpathSet> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scanpaths(&text, opts).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn save_scanpaths(set: &ScanpathSet, path: &Path) -> Result<()> {
    fs::write(path, set.to_json_string()?).map_err(|e| Error::io(path, e))
}
