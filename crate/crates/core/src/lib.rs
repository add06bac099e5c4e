//! Scanpath-driven quality assessment for 360-degree images.
//!
//! An equirectangular image is explored by `N` simulated (or recorded)
//! scanpaths. Around every gaze point a small patch is resampled on the
//! sphere's tangent plane, and the `N` patches of each second are tiled into
//! one frame, giving a short video (a GSR sequence) whose cells stay aligned
//! over time. Full-reference metrics computed on aligned reference/distorted
//! sequences are pooled over time, and the resulting scores are benchmarked
//! against subjective opinion scores.
//!
//! ```no_run
//! use gsrkit::{convert, generate, GeneratorConfig, GsrConfig, ViewingCondition};
//! use gsrkit::{score_sequences, EquirectImage, FrMetric, PoolingMethod, ScoreMode};
//! # fn main() -> gsrkit::Result<()> {
//! let reference = EquirectImage::load("ref.png".as_ref())?;
//! let distorted = EquirectImage::load("dist.png".as_ref())?;
//! let paths = generate(ViewingCondition::default(), 49, &GeneratorConfig::default())?;
//! let cfg = GsrConfig::default();
//! let report = score_sequences(
//!     &convert(&reference, &paths, &cfg)?,
//!     &convert(&distorted, &paths, &cfg)?,
//!     FrMetric::Psnr,
//!     ScoreMode::PerPatch,
//!     PoolingMethod::Am,
//! )?;
//! println!("G-PSNR-AM = {:.3}", report.pooled);
//! # Ok(())
//! # }
//! ```

pub mod canonical;
pub mod container;
pub mod correlation;
pub mod error;
pub mod eval;
pub mod gsr;
pub mod metrics;
pub mod numeric;
pub mod pooling;
pub mod raster;
pub mod scanpath;
pub mod scoring;
pub mod sphere;

pub use correlation::{pearson, plcc, srcc, PlccMapping, PlccOutcome};
pub use error::{Error, Result};
pub use eval::{evaluate, make_splits, DatasetManifest, EvalMetric, EvalResult, PipelineConfig, SplitPlan};
pub use gsr::{cell_of, convert, extract_patch, GsrConfig, GsrMeta, GsrSequence, Pitch, Sampling};
pub use metrics::{psnr, s_psnr, ssim, ws_psnr};
pub use pooling::{pool, PoolingMethod, ScoreMatrix};
pub use raster::{EquirectImage, LumaPlane, RgbImage};
pub use scanpath::{
    generate, load_scanpaths, save_scanpaths, GeneratorConfig, LoadOptions, ModelKind, Scanpath, ScanpathSet,
    ViewingCondition,
};
pub use scoring::{score_sequences, FrMetric, QualityReport, ScoreMode};
pub use sphere::{
    gnomonic_inverse, norm_to_sph, sph_to_norm, sph_to_vec, NormPoint, SphericalPoint, TangentOffset, UnitVec3,
};
