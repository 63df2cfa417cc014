//! Seeded synthetic shadow images with known ground truth.
//!
//! Shadows are axis-aligned ellipses painted dark on a bright background,
//! then both levels get uniform integer noise. Well-pruned trees scatter
//! many small blobs at low coverage; poorly pruned trees clump a few large
//! blobs at high coverage.

use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::imgcore::{encode_pgm, BinaryImage, GrayImage};
use crate::label::Label;
use crate::pipeline::{write_manifest, ManifestRow};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("failed to write manifest: {0}")]
    Manifest(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    PrunedGood,
    PrunedPoor,
}

impl Regime {
    pub fn label(self) -> Label {
        match self {
            Regime::PrunedGood => Label::Good,
            Regime::PrunedPoor => Label::NotGood,
        }
    }
}

/// Ellipse in pixel coordinates; pixel `(x, y)` is inside when its center
/// `(x + 0.5, y + 0.5)` satisfies the ellipse inequality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub cx: f64,
    pub cy: f64,
    pub rx: f64,
    pub ry: f64,
}

impl Ellipse {
    pub fn disk(cx: f64, cy: f64, r: f64) -> Self {
        Self { cx, cy, rx: r, ry: r }
    }

    fn contains(&self, x: usize, y: usize) -> bool {
        let dx = (x as f64 + 0.5 - self.cx) / self.rx;
        let dy = (y as f64 + 0.5 - self.cy) / self.ry;
        dx * dx + dy * dy <= 1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BlobLayout {
    /// Blobs with radii uniform in `radius` and uniform centers, added until
    /// shadow coverage reaches the target.
    Random { radius: (f64, f64) },
    /// Exactly these blobs; the coverage target is ignored.
    Fixed(Vec<Ellipse>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub width: usize,
    pub height: usize,
    pub regime: Regime,
    /// Target shadow fraction in `[0, 1)`.
    pub coverage: f64,
    pub layout: BlobLayout,
    pub background_mean: u8,
    pub shadow_mean: u8,
    /// Half-width of the additive uniform noise.
    pub noise: u8,
    pub seed: u64,
}

pub const DEFAULT_BACKGROUND_MEAN: u8 = 215;
pub const DEFAULT_SHADOW_MEAN: u8 = 40;
pub const DEFAULT_NOISE: u8 = 20;
pub const DEFAULT_IMAGE_EDGE: usize = 300;

impl SynthConfig {
    pub fn new(regime: Regime, coverage: f64, seed: u64) -> Self {
        let spec = RegimeSpec::default_for(regime);
        Self {
            width: DEFAULT_IMAGE_EDGE,
            height: DEFAULT_IMAGE_EDGE,
            regime,
            coverage,
            layout: BlobLayout::Random {
                radius: spec.radius,
            },
            background_mean: DEFAULT_BACKGROUND_MEAN,
            shadow_mean: DEFAULT_SHADOW_MEAN,
            noise: DEFAULT_NOISE,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidConfig(m));
        if self.width == 0 || self.height == 0 {
            return bad(format!("image must be non-empty, got {}x{}", self.width, self.height));
        }
        if !(0.0..1.0).contains(&self.coverage) {
            return bad(format!("coverage must lie in [0, 1), got {}", self.coverage));
        }
        if self.shadow_mean >= self.background_mean {
            return bad("shadow mean must be darker than the background".into());
        }
        match &self.layout {
            BlobLayout::Random { radius: (lo, hi) } => {
                if !(lo.is_finite() && hi.is_finite() && *lo > 0.0 && lo <= hi) {
                    return bad(format!("invalid radius range ({lo}, {hi})"));
                }
            }
            BlobLayout::Fixed(blobs) => {
                if blobs.iter().any(|b| !(b.rx > 0.0 && b.ry > 0.0)) {
                    return bad("fixed blobs need positive radii".into());
                }
            }
        }
        Ok(())
    }
}

/// A rendered image with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthImage {
    pub image: GrayImage,
    /// Exact light/shadow map that was rendered (white = light).
    pub mask: BinaryImage,
    pub label: Label,
    /// Exact fraction of shadow pixels in `mask`.
    pub shadow_fraction: f64,
    /// Interval the black-pixel rate must fall in after Otsu binarization.
    pub black_rate_bounds: (f64, f64),
}

/// Mixes a base seed with tree and point indices.
pub fn derive_seed(seed: u64, tree: u64, point: u64) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    splitmix(splitmix(splitmix(seed) ^ tree) ^ point)
}

fn paint(shadow: &mut [bool], width: usize, height: usize, e: &Ellipse) -> usize {
    let x0 = (e.cx - e.rx).floor().max(0.0) as usize;
    let y0 = (e.cy - e.ry).floor().max(0.0) as usize;
    let x1 = ((e.cx + e.rx).ceil().max(0.0) as usize).min(width);
    let y1 = ((e.cy + e.ry).ceil().max(0.0) as usize).min(height);
    let mut added = 0;
    for y in y0..y1 {
        for x in x0..x1 {
            let cell = &mut shadow[y * width + x];
            if !*cell && e.contains(x, y) {
                *cell = true;
                added += 1;
            }
        }
    }
    added
}

/// Renders one image.
pub fn generate(cfg: &SynthConfig) -> Result<SynthImage, SynthError> {
    cfg.validate()?;
    let (w, h) = (cfg.width, cfg.height);
    let total = w * h;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut shadow = vec![false; total];
    let mut covered = 0usize;

    let bounds = match &cfg.layout {
        BlobLayout::Fixed(blobs) => {
            for b in blobs {
                covered += paint(&mut shadow, w, h, b);
            }
            let f = covered as f64 / total as f64;
            (f, f)
        }
        BlobLayout::Random { radius: (lo, hi) } => {
            let target = (cfg.coverage * total as f64).ceil() as usize;
            // every blob is at least partly on the image, so progress is
            // guaranteed; the cap only guards pathological configs
            let max_blobs = 16 * total;
            let mut placed = 0;
            while covered < target && placed < max_blobs {
                let e = Ellipse {
                    cx: rng.gen_range(0.0..w as f64),
                    cy: rng.gen_range(0.0..h as f64),
                    rx: rng.gen_range(*lo..=*hi),
                    ry: rng.gen_range(*lo..=*hi),
                };
                covered += paint(&mut shadow, w, h, &e);
                placed += 1;
            }
            // the last blob overshoots the target by at most its bounding box
            let box_area = (2.0 * hi + 2.0).powi(2);
            (
                cfg.coverage,
                (cfg.coverage + box_area / total as f64).min(1.0),
            )
        }
    };

    let noise = i16::from(cfg.noise);
    let pixels: Vec<u8> = shadow
        .iter()
        .map(|&s| {
            let mean = if s { cfg.shadow_mean } else { cfg.background_mean };
            let jitter = if noise > 0 { rng.gen_range(-noise..=noise) } else { 0 };
            (i16::from(mean) + jitter).clamp(0, 255) as u8
        })
        .collect();

    let image = GrayImage::new(w, h, pixels).expect("pixel count matches dimensions");
    let mask = BinaryImage::from_fn(w, h, |x, y| !shadow[y * w + x]);
    Ok(SynthImage {
        image,
        mask,
        label: cfg.regime.label(),
        shadow_fraction: covered as f64 / total as f64,
        black_rate_bounds: bounds,
    })
}

/// Per-regime knobs for dataset generation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeSpec {
    /// Mean per-tree shadow coverage.
    pub coverage: f64,
    /// Per-tree coverage is uniform in `coverage ± tree_spread`.
    pub tree_spread: f64,
    /// Per-photo coverage is uniform in `tree coverage ± point_spread`.
    pub point_spread: f64,
    pub radius: (f64, f64),
}

impl RegimeSpec {
    pub fn default_for(regime: Regime) -> Self {
        match regime {
            Regime::PrunedGood => Self {
                coverage: 0.30,
                tree_spread: 0.08,
                point_spread: 0.03,
                radius: (3.0, 8.0),
            },
            Regime::PrunedPoor => Self {
                coverage: 0.65,
                tree_spread: 0.08,
                point_spread: 0.03,
                radius: (20.0, 45.0),
            },
        }
    }

    fn validate(&self) -> Result<(), SynthError> {
        if !(self.coverage > 0.0 && self.coverage < 1.0) {
            return Err(SynthError::InvalidConfig(format!(
                "regime coverage must lie in (0, 1), got {}",
                self.coverage
            )));
        }
        if !(self.tree_spread >= 0.0 && self.point_spread >= 0.0) {
            return Err(SynthError::InvalidConfig("spreads must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetConfig {
    pub n_trees: usize,
    pub points_per_tree: usize,
    pub width: usize,
    pub height: usize,
    pub good: RegimeSpec,
    pub poor: RegimeSpec,
    pub noise: u8,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            n_trees: 10,
            points_per_tree: 10,
            width: DEFAULT_IMAGE_EDGE,
            height: DEFAULT_IMAGE_EDGE,
            good: RegimeSpec::default_for(Regime::PrunedGood),
            poor: RegimeSpec::default_for(Regime::PrunedPoor),
            noise: DEFAULT_NOISE,
            seed: 0,
        }
    }
}

/// Tree `t` is well pruned for even `t` and poorly pruned for odd `t`.
pub fn tree_regime(tree: usize) -> Regime {
    if tree.is_multiple_of(2) {
        Regime::PrunedGood
    } else {
        Regime::PrunedPoor
    }
}

pub fn tree_id(tree: usize) -> String {
    format!("T{:03}", tree + 1)
}

pub fn photo_id(tree: usize, point: usize) -> String {
    format!("{}-P{:02}", tree_id(tree), point + 1)
}

/// Config for one photo of the dataset; randomness depends only on
/// `(seed, tree, point)`.
pub fn point_config(cfg: &DatasetConfig, tree: usize, point: usize) -> SynthConfig {
    let regime = tree_regime(tree);
    let spec = match regime {
        Regime::PrunedGood => cfg.good,
        Regime::PrunedPoor => cfg.poor,
    };
    let mut tree_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, tree as u64, u64::MAX));
    let tree_cov = spec.coverage + spec.tree_spread * tree_rng.gen_range(-1.0..=1.0);
    let mut point_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, tree as u64, point as u64));
    let cov = tree_cov + spec.point_spread * point_rng.gen_range(-1.0..=1.0);
    SynthConfig {
        width: cfg.width,
        height: cfg.height,
        regime,
        coverage: cov.clamp(0.01, 0.95),
        layout: BlobLayout::Random {
            radius: spec.radius,
        },
        background_mean: DEFAULT_BACKGROUND_MEAN,
        shadow_mean: DEFAULT_SHADOW_MEAN,
        noise: cfg.noise,
        seed: point_rng.gen(),
    }
}

/// Writes `points_per_tree` PGM images per tree and `manifest.csv` into
/// `dir`; returns the manifest path.
pub fn generate_dataset(cfg: &DatasetConfig, dir: impl AsRef<Path>) -> Result<PathBuf, SynthError> {
    if cfg.n_trees == 0 || cfg.points_per_tree == 0 {
        return Err(SynthError::InvalidConfig("need at least one tree and one point".into()));
    }
    cfg.good.validate()?;
    cfg.poor.validate()?;
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;

    use rayon::prelude::*;
    let jobs: Vec<(usize, usize)> = (0..cfg.n_trees)
        .flat_map(|t| (0..cfg.points_per_tree).map(move |p| (t, p)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(t, p)| {
            let img = generate(&point_config(cfg, t, p))?;
            let file = format!("{}.pgm", photo_id(t, p));
            std::fs::write(dir.join(&file), encode_pgm(&img.image))?;
            Ok(ManifestRow {
                tree_id: tree_id(t),
                photo_id: photo_id(t, p),
                image_path: file,
                label: img.label,
            })
        })
        .collect::<Result<Vec<_>, SynthError>>()?;

    let manifest = dir.join("manifest.csv");
    write_manifest(&manifest, &rows).map_err(|e| SynthError::Manifest(e.to_string()))?;
    Ok(manifest)
}
