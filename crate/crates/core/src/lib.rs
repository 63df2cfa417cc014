//! Pruning-quality evaluation from tree shadow images.
//!
//! A shadow photo is converted to grayscale, binarized with Otsu's threshold,
//! optionally pooled, and summarized by two features: the black-pixel rate
//! and the uniformity of light across fixed-size grids. A maximum-margin
//! classifier over the min-max scaled features separates well-pruned trees
//! from poorly pruned ones.

pub mod features;
pub mod imgcore;
pub mod label;
pub mod pipeline;
pub mod plot;
pub mod pooling;
pub mod svm;
pub mod synth;
pub mod threshold;

pub use features::{FeatureVector, GridConfig, Normalizer};
pub use imgcore::{BinaryImage, GrayImage, RgbImage};
pub use label::Label;
pub use pooling::PoolConfig;
pub use svm::{SvmModel, TrainConfig, TrainingSet};
pub use threshold::{Histogram, OtsuResult};
