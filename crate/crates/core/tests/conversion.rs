mod common;

use std::f64::consts::PI;

use gsrkit::container;
use gsrkit::{
    convert, extract_patch, generate, EquirectImage, Error, GeneratorConfig, GsrConfig, ModelKind, NormPoint, Sampling,
    ViewingCondition,
};

use common::*;

#[test]
fn tangent_and_crop_agree_near_the_equator() {
    let img = EquirectImage::new(textured_erp(2048, 1024, 61));
    let tangent = GsrConfig::default();
    let crop = GsrConfig {
        sampling: Sampling::ErpCrop,
        ..tangent
    };
    for x in [0.0, 0.13, 0.5, 0.77, 0.999] {
        let center = NormPoint::new(0.5, x).unwrap();
        let a = extract_patch(&img, center, &tangent).unwrap();
        let b = extract_patch(&img, center, &crop).unwrap();
        let mut diff = [0.0f64; 3];
        for (i, (p, q)) in a.as_bytes().iter().zip(b.as_bytes()).enumerate() {
            diff[i % 3] += (*p as f64 - *q as f64).abs();
        }
        for d in diff {
            let mad = d / (32.0 * 32.0) / 255.0;
            assert!(mad <= 2.0 / 255.0, "x = {x}: mean abs difference {mad}");
        }
    }
}

#[test]
fn fixed_center_frames_are_identical() {
    let img = EquirectImage::new(textured_erp(256, 128, 62));
    let cfg = GeneratorConfig {
        model: ModelKind::FixedCenter,
        ..Default::default()
    };
    let cond = ViewingCondition::new(NormPoint::new(0.3, 0.8).unwrap(), 20).unwrap();
    let seq = convert(&img, &generate(cond, 49, &cfg).unwrap(), &GsrConfig::default()).unwrap();
    assert!(seq.frames.windows(2).all(|f| f[0] == f[1]));
}

#[test]
fn patches_stay_in_their_cell_over_time() {
    let img = EquirectImage::new(textured_erp(256, 128, 63));
    let paths = generate(ViewingCondition::default(), 16, &GeneratorConfig::default()).unwrap();
    let cfg = GsrConfig::square(16, 24);
    let seq = convert(&img, &paths, &cfg).unwrap();
    assert_eq!(seq.meta.grid, [4, 4]);
    for n in 0..16 {
        for t in 0..20 {
            let expected = extract_patch(&img, paths.paths[n].points[t], &cfg).unwrap();
            assert_eq!(seq.patch(n, t).unwrap(), expected, "path {n}, t {t}");
        }
    }
}

#[test]
fn conversion_is_independent_of_worker_count() {
    let img = EquirectImage::new(textured_erp(512, 256, 64));
    let paths = generate(ViewingCondition::default(), 49, &GeneratorConfig::default()).unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| convert(&img, &paths, &GsrConfig::default()).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one, run(16));
}

#[test]
fn metadata_records_provenance() {
    let img = EquirectImage::new(textured_erp(256, 128, 65));
    let paths = generate(ViewingCondition::default(), 49, &GeneratorConfig::default()).unwrap();
    let seq = convert(&img, &paths, &GsrConfig::default()).unwrap();
    assert_eq!(seq.meta.image_sha256, img.rgb().sha256_hex());
    assert_eq!(seq.meta.scanpath_sha256, paths.sha256_hex().unwrap());
    assert_eq!((seq.meta.t, seq.meta.grid, seq.meta.patch), (20, [7, 7], [32, 32]));
    assert_eq!(seq.meta.config(), GsrConfig::default());
}

#[test]
fn wrong_path_count_names_the_grid() {
    let img = EquirectImage::new(textured_erp(128, 64, 66));
    let paths = generate(ViewingCondition::default(), 48, &GeneratorConfig::default()).unwrap();
    let err = convert(&img, &paths, &GsrConfig::default()).unwrap_err();
    assert!(matches!(err, Error::Config(_)));
    assert!(err.to_string().contains("7x7"), "{err}");
}

#[test]
fn fixed_fov_pitch_spans_the_requested_angle() {
    let img = EquirectImage::new(textured_erp(512, 256, 67));
    let cfg = GsrConfig {
        pitch: gsrkit::Pitch::FixedFov(60.0),
        ..GsrConfig::default()
    };
    let center = NormPoint::CENTER;
    let samples = gsrkit::gsr::sample_patch(&img, center, &cfg).unwrap();
    let step = 60f64.to_radians() / 32.0;
    let oracle = patch_sample_points((0.5, 0.5), 32, step);
    let (y, x) = oracle[31];
    let direct = img.bilinear_sample(NormPoint::new(y, x).unwrap());
    for ch in 0..3 {
        assert!((samples[31][ch] - direct[ch]).abs() < 1e-6);
    }
    assert!((oracle[31].1 - 0.5 - (15.5 * step).atan() / (2.0 * PI)).abs() < 1e-12);
}

#[test]
fn containers_round_trip_to_identical_pixels() {
    let dir = tempfile::tempdir().unwrap();
    let img = EquirectImage::new(textured_erp(256, 128, 68));
    let paths = generate(ViewingCondition::default(), 49, &GeneratorConfig::default()).unwrap();
    let seq = convert(&img, &paths, &GsrConfig::default()).unwrap();

    let as_dir = dir.path().join("seq");
    let as_raw = dir.path().join("seq.gsr");
    container::save(&seq, &as_dir).unwrap();
    container::save(&seq, &as_raw).unwrap();
    assert!(as_dir.join("frame_0001.png").is_file() && as_dir.join("meta.json").is_file());
    let from_dir = container::load(&as_dir).unwrap();
    let from_raw = container::load(&as_raw).unwrap();
    assert_eq!(from_dir, seq);
    assert_eq!(from_raw, seq);

    let again = dir.path().join("again.gsr");
    container::save(&from_raw, &again).unwrap();
    assert_eq!(std::fs::read(&as_raw).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn truncated_directory_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let img = EquirectImage::new(textured_erp(128, 64, 69));
    let paths = generate(ViewingCondition::default(), 4, &GeneratorConfig::default()).unwrap();
    let seq = convert(&img, &paths, &GsrConfig::square(4, 16)).unwrap();
    let out = dir.path().join("seq");
    container::save(&seq, &out).unwrap();
    std::fs::remove_file(out.join("frame_0020.png")).unwrap();
    assert!(container::load(&out).is_err());
}
