//! Patch-based downsampling of shadow maps.

use thiserror::Error;

use crate::imgcore::{BinaryImage, BLACK, WHITE};

/// Default patch edge.
pub const DEFAULT_POOL_FACTOR: usize = 3;

/// A patch whose pixel sum is below this value is black.
const WHITE_SUM_THRESHOLD: u32 = 5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PoolError {
    #[error("pool factor must be at least 1")]
    InvalidFactor,
    #[error("image of {width}x{height} is smaller than a {factor}x{factor} patch")]
    ImageTooSmall {
        width: usize,
        height: usize,
        factor: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolConfig {
    factor: usize,
    enabled: bool,
}

impl PoolConfig {
    pub fn new(factor: usize) -> Result<Self, PoolError> {
        if factor == 0 {
            return Err(PoolError::InvalidFactor);
        }
        Ok(Self {
            factor,
            enabled: true,
        })
    }

    /// Pooling turned off; [`pool`] returns its input unchanged.
    pub fn disabled() -> Self {
        Self {
            factor: 1,
            enabled: false,
        }
    }

    pub fn factor(&self) -> usize {
        self.factor
    }

    pub fn enabled(&self) -> bool {
        self.enabled
    }

    /// The factor actually applied to image dimensions.
    pub fn effective_factor(&self) -> usize {
        if self.enabled {
            self.factor
        } else {
            1
        }
    }
}

impl Default for PoolConfig {
    fn default() -> Self {
        Self {
            factor: DEFAULT_POOL_FACTOR,
            enabled: true,
        }
    }
}

/// Summarizes each disjoint `p x p` patch by one pixel: black when the patch
/// sum is below 5, white otherwise. On a shadow map this is white iff the
/// patch holds any white pixel. Rows and columns past the last full patch
/// are dropped.
pub fn pool(img: &BinaryImage, cfg: PoolConfig) -> Result<BinaryImage, PoolError> {
    if !cfg.enabled {
        return Ok(img.clone());
    }
    let p = cfg.factor;
    if img.width() < p || img.height() < p {
        return Err(PoolError::ImageTooSmall {
            width: img.width(),
            height: img.height(),
            factor: p,
        });
    }
    let (out_w, out_h) = (img.width() / p, img.height() / p);
    let src = img.pixels();
    let mut out = Vec::with_capacity(out_w * out_h);
    for i in 0..out_h {
        for j in 0..out_w {
            let mut sum = 0u32;
            for y in i * p..(i + 1) * p {
                let row = &src[y * img.width()..(y + 1) * img.width()];
                sum += row[j * p..(j + 1) * p]
                    .iter()
                    .map(|&v| u32::from(v))
                    .sum::<u32>();
            }
            out.push(if sum < WHITE_SUM_THRESHOLD { BLACK } else { WHITE });
        }
    }
    Ok(BinaryImage::from_raw(out_w, out_h, out))
}
