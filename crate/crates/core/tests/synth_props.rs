mod common;

use proptest::prelude::*;
use shadeprune::features::{black_pixel_rate, GridConfig};
use shadeprune::imgcore::encode_pgm;
use shadeprune::pipeline::{extract_all, ingest, ExtractConfig};
use shadeprune::synth::{generate, generate_dataset, BlobLayout, DatasetConfig, Ellipse, Regime, SynthConfig};
use shadeprune::threshold::{auto_binarize, ThresholdError};
use shadeprune::{Label, PoolConfig};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn binarized_coverage_lands_in_declared_interval(
        cov in 0.05f64..0.8,
        poor in any::<bool>(),
        noise in 0u8..=20,
        seed in any::<u64>(),
    ) {
        let regime = if poor { Regime::PrunedPoor } else { Regime::PrunedGood };
        let mut cfg = SynthConfig::new(regime, cov, seed);
        cfg.width = 150;
        cfg.height = 150;
        cfg.noise = noise;
        let img = generate(&cfg).unwrap();
        let (bin, _) = auto_binarize(&img.image).unwrap();
        // Otsu recovers the painted mask exactly when the modes do not overlap
        prop_assert_eq!(&bin, &img.mask);
        let rate = black_pixel_rate(&bin).unwrap();
        let (lo, hi) = img.black_rate_bounds;
        prop_assert!(rate >= lo && rate <= hi, "{} not in [{}, {}]", rate, lo, hi);
        prop_assert_eq!(img.label, regime.label());
    }

    #[test]
    fn generation_is_deterministic(cov in 0.05f64..0.8, seed in any::<u64>()) {
        let mut cfg = SynthConfig::new(Regime::PrunedGood, cov, seed);
        cfg.width = 64;
        cfg.height = 64;
        prop_assert_eq!(encode_pgm(&generate(&cfg).unwrap().image), encode_pgm(&generate(&cfg).unwrap().image));
    }
}

#[test]
fn empty_noiseless_image_is_degenerate() {
    let mut cfg = SynthConfig::new(Regime::PrunedGood, 0.0, 1);
    cfg.noise = 0;
    let img = generate(&cfg).unwrap();
    assert!(img.image.pixels().iter().all(|&p| p == cfg.background_mean));
    assert_eq!(auto_binarize(&img.image).unwrap_err(), ThresholdError::DegenerateHistogram);
}

#[test]
fn centered_disk_rate_matches_area() {
    for r in [10.0, 25.0, 40.0, 60.0] {
        let mut cfg = SynthConfig::new(Regime::PrunedPoor, 0.0, 3);
        cfg.width = 200;
        cfg.height = 200;
        cfg.layout = BlobLayout::Fixed(vec![Ellipse::disk(100.0, 100.0, r)]);
        let img = generate(&cfg).unwrap();
        let (bin, _) = auto_binarize(&img.image).unwrap();
        let rate = black_pixel_rate(&bin).unwrap();
        let area = std::f64::consts::PI * r * r / 40_000.0;
        assert!((rate - area).abs() <= 0.02, "r={r}: {rate} vs {area}");
        assert_eq!(rate, img.shadow_fraction);
    }
}

#[test]
fn dataset_round_trip_and_regime_separation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = DatasetConfig {
        n_trees: 24,
        points_per_tree: 4,
        width: 150,
        height: 150,
        seed: 5,
        ..DatasetConfig::default()
    };
    let manifest = generate_dataset(&cfg, dir.path()).unwrap();
    let lines = std::fs::read_to_string(&manifest).unwrap().lines().count();
    assert_eq!(lines, 1 + 24 * 4);
    let pgm_count = std::fs::read_dir(dir.path())
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "pgm"))
        .count();
    assert_eq!(pgm_count, 96);

    let trees = ingest(&manifest).unwrap();
    assert_eq!(trees.len(), 24);
    assert_eq!(trees.iter().filter(|t| t.label == Label::Good).count(), 12);

    let ex = ExtractConfig::new(PoolConfig::default(), GridConfig::new(30).unwrap());
    let (ok, failed) = extract_all(&trees, &ex);
    assert!(failed.is_empty(), "{failed:?}");
    let mean_rate = |label| {
        let v: Vec<f64> = ok
            .iter()
            .filter(|t| t.label == label)
            .map(|t| t.features.unwrap().black_pixel_rate)
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    assert!(mean_rate(Label::NotGood) > mean_rate(Label::Good));

    // aggregated features of the two regimes are linearly separable
    let pts: Vec<[f64; 2]> = ok
        .iter()
        .map(|t| t.features.unwrap().to_array())
        .collect();
    let labels: Vec<Label> = ok.iter().map(|t| t.label).collect();
    let (_, half) = common::hard_margin_oracle(&pts, &labels).expect("regimes should be separable");
    assert!(half > 0.0);
}

#[test]
fn dataset_is_byte_identical_per_seed() {
    let cfg = DatasetConfig {
        n_trees: 4,
        points_per_tree: 3,
        width: 90,
        height: 90,
        seed: 7,
        ..DatasetConfig::default()
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    generate_dataset(&cfg, a.path()).unwrap();
    generate_dataset(&cfg, b.path()).unwrap();
    let mut names: Vec<_> = std::fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert_eq!(names.len(), 13);
    for n in names {
        assert_eq!(
            std::fs::read(a.path().join(&n)).unwrap(),
            std::fs::read(b.path().join(&n)).unwrap(),
            "{n:?}"
        );
    }
}
