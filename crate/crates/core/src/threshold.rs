//! Intensity histograms, Otsu's global threshold and binarization.
//!
//! Pixels with intensity `< t` form class 0 (shadow) and pixels `>= t` form
//! class 1 (light). Candidate thresholds run over `1..=255` so both classes
//! can be non-empty; the chosen threshold maximizes the between-class
//! variance `w0 * w1 * (mu0 - mu1)^2` with ties going to the smallest `t`.

use std::cmp::Ordering;
use std::fmt;

use thiserror::Error;

use crate::imgcore::{BinaryImage, GrayImage, BLACK, WHITE};

/// Number of intensity levels in an 8-bit image.
pub const LEVELS: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ThresholdError {
    #[error("image has no pixels")]
    EmptyImage,
    #[error("histogram has fewer than two intensity levels; every split leaves a class empty")]
    DegenerateHistogram,
}

/// Pixel counts per intensity level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    counts: [u64; LEVELS],
    total: u64,
}

/// Class weights, means and variances for one candidate threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassSplit {
    pub w0: f64,
    pub w1: f64,
    pub mu0: f64,
    pub mu1: f64,
    pub var0: f64,
    pub var1: f64,
}

impl ClassSplit {
    /// Probability-weighted sum of the two class variances.
    pub fn within_class_variance(&self) -> f64 {
        self.w0 * self.var0 + self.w1 * self.var1
    }

    pub fn between_class_variance(&self) -> f64 {
        let d = self.mu0 - self.mu1;
        self.w0 * self.w1 * d * d
    }
}

impl Histogram {
    pub fn from_counts(counts: [u64; LEVELS]) -> Result<Self, ThresholdError> {
        let total = counts.iter().sum();
        if total == 0 {
            return Err(ThresholdError::EmptyImage);
        }
        Ok(Self { counts, total })
    }

    pub fn counts(&self) -> &[u64; LEVELS] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn probabilities(&self) -> [f64; LEVELS] {
        let n = self.total as f64;
        let mut p = [0.0; LEVELS];
        for (p, &c) in p.iter_mut().zip(&self.counts) {
            *p = c as f64 / n;
        }
        p
    }

    /// Global mean intensity.
    pub fn mean(&self) -> f64 {
        self.probabilities()
            .iter()
            .enumerate()
            .map(|(i, p)| i as f64 * p)
            .sum()
    }

    /// Global intensity variance.
    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.probabilities()
            .iter()
            .enumerate()
            .map(|(i, p)| (i as f64 - mean).powi(2) * p)
            .sum()
    }

    pub fn distinct_levels(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }

    /// Class statistics for threshold `t`, or `None` when either class is
    /// empty.
    pub fn split_at(&self, t: usize) -> Option<ClassSplit> {
        if t == 0 || t >= LEVELS {
            return None;
        }
        let p = self.probabilities();
        let (lo, hi) = p.split_at(t);
        let w0: f64 = lo.iter().sum();
        let w1: f64 = hi.iter().sum();
        let n0: u64 = self.counts[..t].iter().sum();
        if n0 == 0 || n0 == self.total {
            return None;
        }
        let mu0 = lo.iter().enumerate().map(|(i, p)| i as f64 * p).sum::<f64>() / w0;
        let mu1 = hi
            .iter()
            .enumerate()
            .map(|(i, p)| (i + t) as f64 * p)
            .sum::<f64>()
            / w1;
        let var0 = lo
            .iter()
            .enumerate()
            .map(|(i, p)| (i as f64 - mu0).powi(2) * p)
            .sum::<f64>()
            / w0;
        let var1 = hi
            .iter()
            .enumerate()
            .map(|(i, p)| ((i + t) as f64 - mu1).powi(2) * p)
            .sum::<f64>()
            / w1;
        Some(ClassSplit {
            w0,
            w1,
            mu0,
            mu1,
            var0,
            var1,
        })
    }
}

/// Counts pixels per intensity.
pub fn histogram(img: &GrayImage) -> Result<Histogram, ThresholdError> {
    if img.is_empty() {
        return Err(ThresholdError::EmptyImage);
    }
    let mut counts = [0u64; LEVELS];
    for &v in img.pixels() {
        counts[v as usize] += 1;
    }
    Ok(Histogram {
        counts,
        total: img.pixels().len() as u64,
    })
}

/// Outcome of Otsu's method, kept for audit logging.
#[derive(Debug, Clone, PartialEq)]
pub struct OtsuResult {
    pub threshold: u8,
    /// Between-class variance for every candidate `t` in `0..256`; zero where
    /// a class is empty.
    pub objective: Vec<f64>,
    pub w0: f64,
    pub w1: f64,
    pub mu0: f64,
    pub mu1: f64,
    /// Global mean intensity.
    pub mu_total: f64,
    pub max_between_variance: f64,
}

impl OtsuResult {
    /// One-line `key=value` audit record.
    pub fn audit_record(&self) -> String {
        format!(
            "otsu threshold={} w0={:?} w1={:?} mu0={:?} mu1={:?} max_sigma_b2={:?}",
            self.threshold, self.w0, self.w1, self.mu0, self.mu1, self.max_between_variance
        )
    }
}

impl fmt::Display for OtsuResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.audit_record())
    }
}

/// Compares `a/b` with `c/d` exactly. `b` and `d` must be non-zero.
fn cmp_fractions(mut a: u128, mut b: u128, mut c: u128, mut d: u128) -> Ordering {
    let mut flipped = false;
    loop {
        let (qa, qc) = (a / b, c / d);
        if qa != qc {
            let ord = qa.cmp(&qc);
            return if flipped { ord.reverse() } else { ord };
        }
        let (ra, rc) = (a % b, c % d);
        let ord = match (ra == 0, rc == 0) {
            (true, true) => Some(Ordering::Equal),
            (true, false) => Some(Ordering::Less),
            (false, true) => Some(Ordering::Greater),
            (false, false) => None,
        };
        if let Some(ord) = ord {
            return if flipped { ord.reverse() } else { ord };
        }
        // ra/b < rc/d  <=>  b/ra > d/rc
        (a, b, c, d) = (b, ra, d, rc);
        flipped = !flipped;
    }
}

/// Between-class variance scaled by `N^2`, as the exact fraction
/// `(s0*N - S*n0)^2 / (n0*n1)`. `None` if the numerator overflows.
fn scaled_objective(n0: u64, s0: u64, total: u64, sum: u64) -> Option<(u128, u128)> {
    let lhs = u128::from(s0) * u128::from(total);
    let rhs = u128::from(sum) * u128::from(n0);
    let diff = lhs.abs_diff(rhs);
    let num = diff.checked_mul(diff)?;
    let den = u128::from(n0) * u128::from(total - n0);
    Some((num, den))
}

/// Selects the Otsu threshold with a single pass over cumulative moments.
///
/// Candidates are ranked by exact rational comparison of the objective, so
/// equal partitions tie exactly and the smallest threshold wins.
pub fn otsu_threshold(h: &Histogram) -> Result<OtsuResult, ThresholdError> {
    if h.distinct_levels() < 2 {
        return Err(ThresholdError::DegenerateHistogram);
    }
    let total = h.total;
    let sum: u64 = h
        .counts
        .iter()
        .enumerate()
        .map(|(i, &c)| i as u64 * c)
        .sum();
    let n = total as f64;
    let mu_total = sum as f64 / n;

    let mut objective = vec![0.0; LEVELS];
    let mut best: Option<(usize, u64, u64)> = None;
    let (mut n0, mut s0) = (0u64, 0u64);
    for t in 1..LEVELS {
        n0 += h.counts[t - 1];
        s0 += (t as u64 - 1) * h.counts[t - 1];
        if n0 == 0 {
            continue;
        }
        if n0 == total {
            break;
        }
        let n1 = total - n0;
        let (w0, w1) = (n0 as f64 / n, n1 as f64 / n);
        let mu0 = s0 as f64 / n0 as f64;
        let mu1 = (sum - s0) as f64 / n1 as f64;
        objective[t] = w0 * w1 * (mu0 - mu1).powi(2);

        let better = match best {
            None => true,
            Some((bt, bn0, bs0)) => {
                let cur = scaled_objective(n0, s0, total, sum);
                let prev = scaled_objective(bn0, bs0, total, sum);
                let ord = match (cur, prev) {
                    (Some((a, b)), Some((c, d))) => cmp_fractions(a, b, c, d),
                    _ => objective[t].total_cmp(&objective[bt]),
                };
                ord == Ordering::Greater
            }
        };
        if better {
            best = Some((t, n0, s0));
        }
    }

    let (t, n0, s0) = best.ok_or(ThresholdError::DegenerateHistogram)?;
    let n1 = total - n0;
    Ok(OtsuResult {
        threshold: t as u8,
        w0: n0 as f64 / n,
        w1: n1 as f64 / n,
        mu0: s0 as f64 / n0 as f64,
        mu1: (sum - s0) as f64 / n1 as f64,
        mu_total,
        max_between_variance: objective[t],
        objective,
    })
}

/// Maps pixels `>= t` to white and the rest to black.
pub fn binarize(img: &GrayImage, t: u8) -> BinaryImage {
    let pixels = img
        .pixels()
        .iter()
        .map(|&v| if v >= t { WHITE } else { BLACK })
        .collect();
    BinaryImage::from_raw(img.width(), img.height(), pixels)
}

/// Otsu threshold followed by [`binarize`].
pub fn auto_binarize(img: &GrayImage) -> Result<(BinaryImage, OtsuResult), ThresholdError> {
    let otsu = otsu_threshold(&histogram(img)?)?;
    Ok((binarize(img, otsu.threshold), otsu))
}
