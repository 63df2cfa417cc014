mod common;

use proptest::prelude::*;
use shadeprune::features::{
    black_pixel_rate, extract, fit_normalizer, grid_white_counts, uniformity, white_pixel_rate, FeatureError,
    FeatureVector, GridConfig,
};
use shadeprune::imgcore::BinaryImage;
use shadeprune::pooling::PoolConfig;

#[test]
fn uniformity_examples() {
    assert_eq!(uniformity(&[7, 7, 7, 7]).unwrap(), 0.0);
    assert_eq!(uniformity(&[0, 100, 0, 100]).unwrap(), 50.0);
    assert!(matches!(uniformity(&[]), Err(FeatureError::EmptyList)));
}

#[test]
fn grid_counts_and_edges() {
    // 5x3 image, grid 2: only the 2x1 full grids count
    let img = BinaryImage::from_fn(5, 3, |x, _| x < 2);
    let counts = grid_white_counts(&img, GridConfig::new(2).unwrap()).unwrap();
    assert_eq!(counts, vec![4, 0]);
    assert!(matches!(
        grid_white_counts(&img, GridConfig::new(4).unwrap()),
        Err(FeatureError::ImageTooSmall { .. })
    ));
    assert_eq!(GridConfig::default().scaled_for(&PoolConfig::default()).edge(), 33);
    assert_eq!(GridConfig::default().scaled_for(&PoolConfig::disabled()).edge(), 100);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn uniformity_matches_two_pass(counts in prop::collection::vec(0u64..1_000_000, 1..200)) {
        let got = uniformity(&counts).unwrap();
        let xs: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        let want = common::two_pass_variance(&xs).sqrt();
        prop_assert!((got - want).abs() <= 1e-9 * want.max(1.0), "{} vs {}", got, want);
    }

    #[test]
    fn uniformity_shift_and_scale(counts in prop::collection::vec(0u64..10_000, 1..100), c in 0u64..10_000, k in 0u64..50) {
        let base = uniformity(&counts).unwrap();
        let shifted: Vec<u64> = counts.iter().map(|&x| x + c).collect();
        prop_assert!((uniformity(&shifted).unwrap() - base).abs() <= 1e-9 * base.max(1.0));
        let scaled: Vec<u64> = counts.iter().map(|&x| x * k).collect();
        let want = base * k as f64;
        prop_assert!((uniformity(&scaled).unwrap() - want).abs() <= 1e-9 * want.max(1.0));
    }

    #[test]
    fn rates_are_complementary(w in 1usize..40, h in 1usize..40, seed in any::<u64>()) {
        let img = BinaryImage::from_fn(w, h, |x, y| (seed >> ((x * 7 + y * 13) % 64)) & 1 == 1);
        let b = black_pixel_rate(&img).unwrap();
        let wr = white_pixel_rate(&img).unwrap();
        prop_assert_eq!(b + wr, 1.0);
        prop_assert_eq!(b, img.black_count() as f64 / (w * h) as f64);
    }

    #[test]
    fn extract_uses_grid_counts(w in 4usize..40, h in 4usize..40, edge in 1usize..5, seed in any::<u64>()) {
        let img = BinaryImage::from_fn(w, h, |x, y| (seed >> ((x * 3 + y * 5) % 64)) & 1 == 1);
        let grid = GridConfig::new(edge).unwrap();
        let fv = extract(&img, grid).unwrap();
        let counts = grid_white_counts(&img, grid).unwrap();
        prop_assert_eq!(counts.len(), (w / edge) * (h / edge));
        let xs: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        prop_assert!((fv.uniformity - common::two_pass_variance(&xs).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn normalizer_refit_is_unit_box(rows in prop::collection::vec((0.0f64..1.0, 0.0f64..500.0), 2..40)) {
        let rows: Vec<FeatureVector> = rows.into_iter().map(|(a, b)| FeatureVector::new(a, b)).collect();
        let Ok(nz) = fit_normalizer(&rows) else { return Ok(()) };
        let scaled: Vec<FeatureVector> = rows
            .iter()
            .map(|r| FeatureVector::from_array(nz.apply(r).unwrap().0))
            .collect();
        let again = fit_normalizer(&scaled).unwrap();
        for k in 0..2 {
            prop_assert!(again.mins()[k].abs() < 1e-12);
            prop_assert!((again.maxs()[k] - 1.0).abs() < 1e-12);
        }
        // rank preservation per column
        for (i, a) in rows.iter().enumerate() {
            for (j, b) in rows.iter().enumerate() {
                for k in 0..2 {
                    let (x, y) = (a.to_array()[k], b.to_array()[k]);
                    let (sx, sy) = (scaled[i].to_array()[k], scaled[j].to_array()[k]);
                    if x < y {
                        prop_assert!(sx <= sy);
                    }
                }
            }
        }
    }
}

#[test]
fn normalizer_rejects_constant_columns() {
    let rows = [FeatureVector::new(0.5, 1.0), FeatureVector::new(0.5, 2.0)];
    assert!(matches!(
        fit_normalizer(&rows),
        Err(FeatureError::ConstantFeature("black_pixel_rate"))
    ));
    assert!(matches!(
        fit_normalizer(&rows[..1]),
        Err(FeatureError::InsufficientData(1))
    ));
    // values outside the training range are not clamped
    let nz = fit_normalizer(&[FeatureVector::new(0.0, 0.0), FeatureVector::new(1.0, 10.0)]).unwrap();
    assert_eq!(nz.apply(&FeatureVector::new(2.0, -5.0)).unwrap().0, [2.0, -0.5]);
}
