mod common;

use proptest::prelude::*;
use shadeprune::imgcore::{
    decode_image, encode_binary_pgm, encode_pgm, encode_ppm, gray_value, to_gray, BinaryImage, GrayImage,
    ImageError, RgbImage,
};
use shadeprune::pooling::{pool, PoolConfig, PoolError};

#[test]
fn gray_triples_are_fixed_points() {
    for v in 0..=255u8 {
        assert_eq!(gray_value(v, v, v), v);
    }
}

#[test]
fn half_up_rounding() {
    // 21*1 + 72*0 + 7*1 = 28 -> 0.28 -> 0; 21*0 + 72*1 + 7*0 = 72 -> 0.72 -> 1
    assert_eq!(gray_value(1, 0, 1), 0);
    assert_eq!(gray_value(0, 1, 0), 1);
    // 7 * 50 = 350 -> 3.5 rounds up
    assert_eq!(gray_value(0, 0, 50), 4);
}

fn binary(w: usize, h: usize, bits: &[bool]) -> BinaryImage {
    BinaryImage::from_fn(w, h, |x, y| bits[y * w + x])
}

fn binary_image() -> impl Strategy<Value = (usize, usize, Vec<bool>)> {
    (1usize..24, 1usize..24).prop_flat_map(|(w, h)| {
        (Just(w), Just(h), prop::collection::vec(any::<bool>(), w * h))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn gray_matches_formula(r in any::<u8>(), g in any::<u8>(), b in any::<u8>()) {
        prop_assert_eq!(gray_value(r, g, b), common::gray_formula(r, g, b));
    }

    #[test]
    fn gray_is_monotone(a in any::<[u8; 3]>(), d in any::<[u8; 3]>()) {
        let hi = [a[0].saturating_add(d[0]), a[1].saturating_add(d[1]), a[2].saturating_add(d[2])];
        prop_assert!(gray_value(hi[0], hi[1], hi[2]) >= gray_value(a[0], a[1], a[2]));
    }

    #[test]
    fn ppm_round_trip(w in 1usize..8, h in 1usize..8, seed in any::<u64>()) {
        let px: Vec<[u8; 3]> = (0..w * h)
            .map(|i| {
                let v = seed.wrapping_mul(6364136223846793005).wrapping_add((i as u64).wrapping_mul(1442695040888963407));
                [(v >> 8) as u8, (v >> 24) as u8, (v >> 40) as u8]
            })
            .collect();
        let img = RgbImage::new(w, h, px).unwrap();
        let back = decode_image(&encode_ppm(&img)).unwrap();
        prop_assert_eq!(&back, &img);
        let g = to_gray(&img);
        let g_back = to_gray(&decode_image(&encode_pgm(&g)).unwrap());
        prop_assert_eq!(g_back, g);
    }

    #[test]
    fn pooling_is_max_pooling((w, h, bits) in binary_image(), p in prop::sample::select(vec![1usize, 2, 3, 5])) {
        let img = binary(w, h, &bits);
        match pool(&img, PoolConfig::new(p).unwrap()) {
            Err(PoolError::ImageTooSmall { .. }) => prop_assert!(w < p || h < p),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
            Ok(out) => {
                prop_assert_eq!((out.width(), out.height()), (w / p, h / p));
                for i in 0..h / p {
                    for j in 0..w / p {
                        let any_white = (i * p..(i + 1) * p)
                            .any(|y| (j * p..(j + 1) * p).any(|x| bits[y * w + x]));
                        prop_assert_eq!(out.is_white(j, i), any_white);
                    }
                }
            }
        }
    }

    #[test]
    fn pooling_is_monotone((w, h, bits) in binary_image(), flip in any::<prop::sample::Index>(), p in 1usize..4) {
        prop_assume!(w >= p && h >= p);
        let mut brighter = bits.clone();
        brighter[flip.index(bits.len())] = true;
        let cfg = PoolConfig::new(p).unwrap();
        let a = pool(&binary(w, h, &bits), cfg).unwrap();
        let b = pool(&binary(w, h, &brighter), cfg).unwrap();
        for (x, y) in a.pixels().iter().zip(b.pixels()) {
            prop_assert!(y >= x);
        }
    }

    #[test]
    fn unit_pool_is_identity((w, h, bits) in binary_image()) {
        let img = binary(w, h, &bits);
        prop_assert_eq!(pool(&img, PoolConfig::new(1).unwrap()).unwrap(), img.clone());
        prop_assert_eq!(pool(&img, PoolConfig::disabled()).unwrap(), img);
    }
}

#[test]
fn pool_by_three_keeps_a_ninth() {
    for (w, h) in [(9, 9), (300, 300), (30, 12)] {
        let img = BinaryImage::from_fn(w, h, |x, y| (x + y) % 2 == 0);
        let out = pool(&img, PoolConfig::default()).unwrap();
        assert_eq!(out.width() * out.height() * 9, w * h);
    }
    let img = BinaryImage::from_fn(10, 8, |_, _| false);
    let out = pool(&img, PoolConfig::default()).unwrap();
    assert_eq!((out.width(), out.height()), (3, 2));
}

#[test]
fn decoder_errors() {
    assert!(matches!(decode_image(b"P7\n1 1\n255\n"), Err(ImageError::UnsupportedFormat(_))));
    assert!(matches!(decode_image(b"P5\n2 2\n255\n\x00"), Err(ImageError::MalformedFile(_))));
    assert!(matches!(decode_image(b"P2\n1 1\n65535\n0"), Err(ImageError::UnsupportedFormat(_))));
    assert!(matches!(GrayImage::new(2, 2, vec![0; 3]), Err(ImageError::DimensionMismatch { .. })));
    let plain = decode_image(b"P3\n# comment\n1 1\n255\n10 20 30\n").unwrap();
    assert_eq!(plain.pixels(), &[[10, 20, 30]]);
    let bin = BinaryImage::from_fn(2, 1, |x, _| x == 1);
    assert_eq!(decode_image(&encode_binary_pgm(&bin)).unwrap().pixels(), &[[0, 0, 0], [255, 255, 255]]);
}
