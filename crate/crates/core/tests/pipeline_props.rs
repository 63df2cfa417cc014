use std::collections::BTreeSet;

use proptest::prelude::*;
use shadeprune::features::{FeatureVector, GridConfig};
use shadeprune::imgcore::{encode_pgm, GrayImage};
use shadeprune::pipeline::{
    extract_tree_features, fit_model, ingest, run_experiment, split, split_indices, write_manifest, ExtractConfig,
    ManifestRow, PipelineError, Sample, SplitSpec,
};
use shadeprune::pooling::PoolConfig;
use shadeprune::synth::{generate, BlobLayout, Ellipse, Regime, SynthConfig};
use shadeprune::{Label, TrainConfig};

fn labels(neg: usize, pos: usize, seed: u64) -> Vec<Label> {
    // interleave deterministically so classes are not contiguous
    let mut v: Vec<Label> = (0..neg + pos)
        .map(|i| if i < neg { Label::NotGood } else { Label::Good })
        .collect();
    let n = v.len();
    for i in 0..n {
        let j = (seed as usize).wrapping_mul(31).wrapping_add(i * 17) % n;
        v.swap(i, j);
    }
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn split_is_a_stratified_partition(neg in 2usize..60, pos in 2usize..60, f in 0.05f64..0.95, seed in any::<u64>()) {
        let l = labels(neg, pos, seed);
        let spec = SplitSpec::new(f, seed).unwrap();
        let s = split_indices(&l, &spec).unwrap();
        let train: BTreeSet<usize> = s.train.iter().copied().collect();
        let test: BTreeSet<usize> = s.test.iter().copied().collect();
        prop_assert!(train.is_disjoint(&test));
        prop_assert_eq!(train.len() + test.len(), l.len());
        let n = l.len();
        let expected = ((f * n as f64 + 0.5).floor() as usize).clamp(2, n - 2);
        prop_assert_eq!(s.train.len(), expected);
        for side in [&s.train, &s.test] {
            prop_assert!(side.iter().any(|&i| l[i] == Label::Good));
            prop_assert!(side.iter().any(|&i| l[i] == Label::NotGood));
        }
        prop_assert_eq!(split_indices(&l, &spec).unwrap(), s);
    }
}

fn sample(id: usize, rate: f64, unif: f64, label: Label) -> Sample {
    Sample {
        id: format!("S{id}"),
        features: FeatureVector::new(rate, unif),
        label,
    }
}

fn separable_samples(n: usize) -> Vec<Sample> {
    (0..n)
        .map(|i| {
            let t = i as f64 / n as f64;
            if i % 2 == 0 {
                sample(i, 0.1 + 0.2 * t, 20.0 + 30.0 * t, Label::Good)
            } else {
                sample(i, 0.6 + 0.2 * t, 150.0 + 50.0 * t, Label::NotGood)
            }
        })
        .collect()
}

#[test]
fn normalizer_ignores_test_rows() {
    let samples = separable_samples(40);
    let spec = SplitSpec::new(0.6, 3).unwrap();
    let (train, _) = split(&samples, &spec).unwrap();
    let ids: BTreeSet<String> = train.iter().map(|s| s.id.clone()).collect();
    let cfg = TrainConfig::linear();
    let ex = ExtractConfig::default();
    let base = run_experiment(&samples, std::slice::from_ref(&cfg), &spec, &ex).unwrap();
    let mut mutated = samples.clone();
    for s in mutated.iter_mut().filter(|s| !ids.contains(&s.id)) {
        s.features = FeatureVector::new(s.features.black_pixel_rate * 10.0 - 3.0, s.features.uniformity + 1e4);
    }
    let other = run_experiment(&mutated, std::slice::from_ref(&cfg), &spec, &ex).unwrap();
    let a = *base.outcomes[0].model.as_ref().unwrap().normalizer();
    let b = *other.outcomes[0].model.as_ref().unwrap().normalizer();
    assert_eq!(a, b);
    assert_eq!(fit_model(&train, &cfg, &ex).unwrap().normalizer(), &a);
}

#[test]
fn experiment_report_is_consistent_and_deterministic() {
    let samples = separable_samples(50);
    let spec = SplitSpec::new(0.6, 9).unwrap();
    let cfgs = [TrainConfig::linear(), TrainConfig::rbf(), TrainConfig::new("missing")];
    let ex = ExtractConfig::default();
    let r = run_experiment(&samples, &cfgs, &spec, &ex).unwrap();
    assert_eq!((r.train_size, r.test_size), (30, 20));
    for o in &r.outcomes[..2] {
        let e = o.result.as_ref().unwrap();
        let c = e.confusion;
        assert_eq!(c.tp + c.tn + c.fp + c.fn_, r.test_size);
        assert_eq!(e.accuracy, (c.tp + c.tn) as f64 / r.test_size as f64);
        assert!((0.0..=1.0).contains(&e.accuracy));
    }
    assert_eq!(r.outcomes[0].result.as_ref().unwrap().accuracy, 1.0);
    // a failing config does not stop the others
    assert!(r.outcomes[2].result.is_err());
    assert_eq!(r.winner(), Some(0));
    let again = run_experiment(&samples, &cfgs, &spec, &ex).unwrap();
    assert_eq!(r.to_text(), again.to_text());
    assert_eq!(r.to_key_values(), again.to_key_values());
    assert!(r.to_text().contains("winner: linear C=1"));
}

#[test]
fn split_needs_two_rows_per_class() {
    let samples: Vec<Sample> = (0..10).map(|i| sample(i, 0.1, 1.0, Label::Good)).collect();
    let spec = SplitSpec::new(0.6, 0).unwrap();
    assert!(matches!(split(&samples, &spec), Err(PipelineError::InsufficientData(_))));
}

fn disk_image(r: f64, seed: u64) -> GrayImage {
    let mut cfg = SynthConfig::new(Regime::PrunedPoor, 0.0, seed);
    cfg.width = 120;
    cfg.height = 120;
    cfg.layout = BlobLayout::Fixed(vec![Ellipse::disk(60.0, 60.0, r)]);
    generate(&cfg).unwrap().image
}

#[test]
fn tree_features_are_point_means() {
    let dir = tempfile::tempdir().unwrap();
    let radii = [20.0, 35.0, 50.0];
    let mut rows = Vec::new();
    for (i, r) in radii.iter().enumerate() {
        let file = format!("p{i}.pgm");
        std::fs::write(dir.path().join(&file), encode_pgm(&disk_image(*r, i as u64))).unwrap();
        rows.push(ManifestRow {
            tree_id: "A".into(),
            photo_id: format!("A-{i}"),
            image_path: file,
            label: Label::Good,
        });
    }
    // identical photos give the single-photo features
    std::fs::write(dir.path().join("same.pgm"), encode_pgm(&disk_image(30.0, 7))).unwrap();
    for k in 0..2 {
        rows.push(ManifestRow {
            tree_id: "B".into(),
            photo_id: format!("B-{k}"),
            image_path: "same.pgm".into(),
            label: Label::NotGood,
        });
    }
    let manifest = dir.path().join("manifest.csv");
    write_manifest(&manifest, &rows).unwrap();
    let trees = ingest(&manifest).unwrap();
    let cfg = ExtractConfig::new(PoolConfig::disabled(), GridConfig::new(20).unwrap());
    let a = extract_tree_features(&trees[0], &cfg).unwrap();
    let pts: Vec<FeatureVector> = a.points.iter().map(|p| p.features.unwrap()).collect();
    let mean_rate = pts.iter().map(|f| f.black_pixel_rate).sum::<f64>() / 3.0;
    let mean_unif = pts.iter().map(|f| f.uniformity).sum::<f64>() / 3.0;
    let agg = a.features.unwrap();
    assert!((agg.black_pixel_rate - mean_rate).abs() < 1e-12);
    assert!((agg.uniformity - mean_unif).abs() < 1e-12);
    // rates follow the rasterized disks
    for (p, r) in a.points.iter().zip(radii) {
        let expected = std::f64::consts::PI * r * r / (120.0 * 120.0);
        assert!((p.features.unwrap().black_pixel_rate - expected).abs() < 0.02);
    }
    let b = extract_tree_features(&trees[1], &cfg).unwrap();
    assert_eq!(b.features, b.points[0].features);
}

#[test]
fn degenerate_photo_is_reported_with_its_id() {
    let dir = tempfile::tempdir().unwrap();
    let flat = GrayImage::new(30, 30, vec![200; 900]).unwrap();
    std::fs::write(dir.path().join("flat.pgm"), encode_pgm(&flat)).unwrap();
    std::fs::write(dir.path().join("ok.pgm"), encode_pgm(&disk_image(30.0, 1))).unwrap();
    let rows = vec![
        ManifestRow {
            tree_id: "A".into(),
            photo_id: "A-flat".into(),
            image_path: "flat.pgm".into(),
            label: Label::Good,
        },
        ManifestRow {
            tree_id: "B".into(),
            photo_id: "B-ok".into(),
            image_path: "ok.pgm".into(),
            label: Label::NotGood,
        },
    ];
    let manifest = dir.path().join("m.csv");
    write_manifest(&manifest, &rows).unwrap();
    let trees = ingest(&manifest).unwrap();
    let cfg = ExtractConfig::default();
    match extract_tree_features(&trees[0], &cfg) {
        Err(PipelineError::DegenerateHistogram { photo_id, .. }) => assert_eq!(photo_id, "A-flat"),
        other => panic!("expected DegenerateHistogram, got {other:?}"),
    }
    let (ok, failed) = shadeprune::pipeline::extract_all(&trees, &cfg);
    assert_eq!(ok.len(), 1);
    assert_eq!(failed.len(), 1);
    assert_eq!(failed[0].tree_id, "A");
    assert!(failed[0].message.contains("A-flat"));
}
