//! Shadow-map features and min-max scaling.
//!
//! Two features describe a shadow map: the fraction of black pixels, and the
//! uniformity of light, measured as the population standard deviation of
//! white-pixel counts over disjoint square grids.

use thiserror::Error;

use crate::imgcore::BinaryImage;
use crate::pooling::PoolConfig;

/// Default grid edge in source pixels.
pub const DEFAULT_GRID_EDGE: usize = 100;

/// Number of features per sample.
pub const FEATURE_COUNT: usize = 2;

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = ["black_pixel_rate", "uniformity"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FeatureError {
    #[error("image has no pixels")]
    EmptyImage,
    #[error("grid edge must be at least 1")]
    InvalidGrid,
    #[error("image of {width}x{height} is smaller than a {edge}x{edge} grid")]
    ImageTooSmall {
        width: usize,
        height: usize,
        edge: usize,
    },
    #[error("no grid counts to summarize")]
    EmptyList,
    #[error("at least two rows are needed to fit a normalizer, got {0}")]
    InsufficientData(usize),
    #[error("feature {0} is constant over the fitting rows")]
    ConstantFeature(&'static str),
}

/// Raw per-image (or per-tree) features.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector {
    pub black_pixel_rate: f64,
    pub uniformity: f64,
}

impl FeatureVector {
    pub fn new(black_pixel_rate: f64, uniformity: f64) -> Self {
        Self {
            black_pixel_rate,
            uniformity,
        }
    }

    pub fn to_array(self) -> [f64; FEATURE_COUNT] {
        [self.black_pixel_rate, self.uniformity]
    }

    pub fn from_array(a: [f64; FEATURE_COUNT]) -> Self {
        Self::new(a[0], a[1])
    }

    /// Per-feature arithmetic mean. `None` for an empty slice.
    pub fn mean(vectors: &[FeatureVector]) -> Option<FeatureVector> {
        if vectors.is_empty() {
            return None;
        }
        let n = vectors.len() as f64;
        let (r, u) = vectors.iter().fold((0.0, 0.0), |(r, u), v| {
            (r + v.black_pixel_rate, u + v.uniformity)
        });
        Some(FeatureVector::new(r / n, u / n))
    }
}

/// Features after min-max scaling, in the order of [`FEATURE_NAMES`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedFeatureVector(pub [f64; FEATURE_COUNT]);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridConfig {
    edge: usize,
}

impl GridConfig {
    pub fn new(edge: usize) -> Result<Self, FeatureError> {
        if edge == 0 {
            return Err(FeatureError::InvalidGrid);
        }
        Ok(Self { edge })
    }

    pub fn edge(&self) -> usize {
        self.edge
    }

    /// Grid covering the same source extent after pooling: `floor(edge / p)`,
    /// at least 1.
    pub fn scaled_for(&self, pool: &PoolConfig) -> GridConfig {
        GridConfig {
            edge: (self.edge / pool.effective_factor()).max(1),
        }
    }
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            edge: DEFAULT_GRID_EDGE,
        }
    }
}

pub fn black_pixel_rate(img: &BinaryImage) -> Result<f64, FeatureError> {
    if img.is_empty() {
        return Err(FeatureError::EmptyImage);
    }
    Ok(img.black_count() as f64 / img.pixels().len() as f64)
}

pub fn white_pixel_rate(img: &BinaryImage) -> Result<f64, FeatureError> {
    if img.is_empty() {
        return Err(FeatureError::EmptyImage);
    }
    Ok(img.white_count() as f64 / img.pixels().len() as f64)
}

/// White-pixel count of each full `edge x edge` tile, row-major. Partial
/// tiles at the right and bottom edges are dropped.
pub fn grid_white_counts(img: &BinaryImage, cfg: GridConfig) -> Result<Vec<u64>, FeatureError> {
    let e = cfg.edge;
    if img.width() < e || img.height() < e {
        return Err(FeatureError::ImageTooSmall {
            width: img.width(),
            height: img.height(),
            edge: e,
        });
    }
    let (cols, rows) = (img.width() / e, img.height() / e);
    let mut counts = vec![0u64; cols * rows];
    for y in 0..rows * e {
        let row = &img.pixels()[y * img.width()..y * img.width() + cols * e];
        let base = (y / e) * cols;
        for (j, tile) in row.chunks_exact(e).enumerate() {
            counts[base + j] += tile.iter().filter(|&&v| v != 0).count() as u64;
        }
    }
    Ok(counts)
}

/// Population standard deviation of the grid counts.
pub fn uniformity(counts: &[u64]) -> Result<f64, FeatureError> {
    if counts.is_empty() {
        return Err(FeatureError::EmptyList);
    }
    let n = counts.len() as f64;
    let mean = counts.iter().map(|&c| c as f64).sum::<f64>() / n;
    let ss: f64 = counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum();
    Ok((ss / n).sqrt())
}

/// Both features of one shadow map, using `grid` for uniformity.
pub fn extract(img: &BinaryImage, grid: GridConfig) -> Result<FeatureVector, FeatureError> {
    let rate = black_pixel_rate(img)?;
    let sigma = uniformity(&grid_white_counts(img, grid)?)?;
    Ok(FeatureVector::new(rate, sigma))
}

/// Per-feature bounds learned from training rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalizer {
    mins: [f64; FEATURE_COUNT],
    maxs: [f64; FEATURE_COUNT],
}

impl Normalizer {
    /// Requires `maxs[k] >= mins[k]` and finite bounds.
    pub fn from_bounds(
        mins: [f64; FEATURE_COUNT],
        maxs: [f64; FEATURE_COUNT],
    ) -> Option<Self> {
        let ok = mins
            .iter()
            .zip(&maxs)
            .all(|(lo, hi)| lo.is_finite() && hi.is_finite() && hi >= lo);
        ok.then_some(Self { mins, maxs })
    }

    /// The mapping that leaves `[0, 1]` coordinates unchanged.
    pub fn identity() -> Self {
        Self {
            mins: [0.0; FEATURE_COUNT],
            maxs: [1.0; FEATURE_COUNT],
        }
    }

    pub fn mins(&self) -> [f64; FEATURE_COUNT] {
        self.mins
    }

    pub fn maxs(&self) -> [f64; FEATURE_COUNT] {
        self.maxs
    }

    /// Name of the first feature whose span is zero, if any.
    pub fn constant_feature(&self) -> Option<&'static str> {
        (0..FEATURE_COUNT)
            .find(|&k| self.maxs[k] == self.mins[k])
            .map(|k| FEATURE_NAMES[k])
    }

    /// `(x - min) / (max - min)` per feature, without clamping.
    pub fn apply(&self, v: &FeatureVector) -> Result<NormalizedFeatureVector, FeatureError> {
        if let Some(name) = self.constant_feature() {
            return Err(FeatureError::ConstantFeature(name));
        }
        Ok(self.scale(v.to_array()))
    }

    pub(crate) fn scale(&self, x: [f64; FEATURE_COUNT]) -> NormalizedFeatureVector {
        let mut out = [0.0; FEATURE_COUNT];
        for k in 0..FEATURE_COUNT {
            out[k] = (x[k] - self.mins[k]) / (self.maxs[k] - self.mins[k]);
        }
        NormalizedFeatureVector(out)
    }
}

/// Per-feature min and max over `rows`.
pub fn fit_normalizer(rows: &[FeatureVector]) -> Result<Normalizer, FeatureError> {
    if rows.len() < 2 {
        return Err(FeatureError::InsufficientData(rows.len()));
    }
    let mut mins = [f64::INFINITY; FEATURE_COUNT];
    let mut maxs = [f64::NEG_INFINITY; FEATURE_COUNT];
    for row in rows {
        for (k, x) in row.to_array().into_iter().enumerate() {
            mins[k] = mins[k].min(x);
            maxs[k] = maxs[k].max(x);
        }
    }
    let nz = Normalizer { mins, maxs };
    if let Some(name) = nz.constant_feature() {
        return Err(FeatureError::ConstantFeature(name));
    }
    Ok(nz)
}
