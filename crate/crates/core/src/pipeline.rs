//! Dataset ingestion, per-tree feature extraction, stratified splitting and
//! the train/evaluate experiment.
//!
//! A manifest CSV (`tree_id,photo_id,image_path,label`) lists shadow photos;
//! image paths are resolved relative to the manifest's directory. Each tree
//! is classified from the mean of its photos' features.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::features::{self, FeatureError, FeatureVector, GridConfig, Normalizer};
use crate::imgcore::{decode_image, to_gray, GrayImage, ImageError};
use crate::label::Label;
use crate::pooling::{self, PoolConfig, PoolError};
use crate::svm::{self, SvmError, SvmModel, TrainConfig, TrainingSet};
use crate::threshold::{auto_binarize, OtsuResult, ThresholdError};

pub const MANIFEST_HEADER: [&str; 4] = ["tree_id", "photo_id", "image_path", "label"];
pub const FEATURES_HEADER: [&str; 5] = ["tree_id", "photo_id", "black_pixel_rate", "uniformity", "label"];
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.6;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("CSV error: {0}")]
    Csv(String),
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("photo {photo_id}: image {path} does not exist")]
    MissingImage { photo_id: String, path: PathBuf },
    #[error("tree {tree_id} has rows labeled both good and not good")]
    LabelConflict { tree_id: String },
    #[error("tree {tree_id}: photo id {photo_id} appears more than once")]
    DuplicatePhotoId { tree_id: String, photo_id: String },
    #[error("photo {photo_id}: {source}")]
    Image { photo_id: String, source: ImageError },
    #[error("photo {photo_id}: {source}")]
    DegenerateHistogram {
        photo_id: String,
        source: ThresholdError,
    },
    #[error("photo {photo_id}: {source}")]
    Pool { photo_id: String, source: PoolError },
    #[error("photo {photo_id}: {source}")]
    PointFeatures {
        photo_id: String,
        source: FeatureError,
    },
    #[error("tree {0} has no photos")]
    EmptyTree(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Svm(#[from] SvmError),
}

impl From<csv::Error> for PipelineError {
    fn from(e: csv::Error) -> Self {
        PipelineError::Csv(e.to_string())
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// One manifest line as written on disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRow {
    pub tree_id: String,
    pub photo_id: String,
    pub image_path: String,
    pub label: Label,
}

pub fn write_manifest(path: impl AsRef<Path>, rows: &[ManifestRow]) -> Result<(), PipelineError> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(MANIFEST_HEADER)?;
    for r in rows {
        w.write_record([
            r.tree_id.as_str(),
            r.photo_id.as_str(),
            r.image_path.as_str(),
            &r.label.to_string(),
        ])?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

fn column_map(
    headers: &csv::StringRecord,
    required: &[&str],
) -> Result<Vec<usize>, PipelineError> {
    required
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h.trim() == *name)
                .ok_or_else(|| PipelineError::Schema {
                    line: 1,
                    message: format!("missing column {name}"),
                })
        })
        .collect()
}

fn parse_label(line: usize, raw: &str) -> Result<Label, PipelineError> {
    raw.parse().map_err(|e: crate::label::InvalidLabel| PipelineError::Schema {
        line,
        message: e.to_string(),
    })
}

pub fn read_manifest(reader: impl Read) -> Result<Vec<ManifestRow>, PipelineError> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let cols = column_map(r.headers()?, &MANIFEST_HEADER)?;
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let field = |k: usize| rec.get(cols[k]).unwrap_or("").to_string();
        rows.push(ManifestRow {
            tree_id: field(0),
            photo_id: field(1),
            image_path: field(2),
            label: parse_label(line, &field(3))?,
        });
    }
    Ok(rows)
}

/// One photo of a tree.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePoint {
    pub tree_id: String,
    pub photo_id: String,
    pub image_path: PathBuf,
    pub features: Option<FeatureVector>,
    /// Threshold audit from the last extraction.
    pub otsu: Option<OtsuResult>,
}

/// A tree with its photos and, once extracted, the mean of their features.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeRecord {
    pub tree_id: String,
    pub label: Label,
    pub points: Vec<SamplePoint>,
    pub features: Option<FeatureVector>,
}

impl TreeRecord {
    /// Mean of the cached point features, if every point has them.
    pub fn point_mean(&self) -> Option<FeatureVector> {
        let v: Option<Vec<FeatureVector>> = self.points.iter().map(|p| p.features).collect();
        FeatureVector::mean(&v?)
    }
}

/// Groups manifest rows into trees (in order of first appearance) and
/// resolves image paths against `base_dir`.
pub fn group_manifest(rows: Vec<ManifestRow>, base_dir: &Path) -> Result<Vec<TreeRecord>, PipelineError> {
    let mut trees: Vec<TreeRecord> = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    let mut photos: HashSet<String> = HashSet::new();
    for row in rows {
        let path = base_dir.join(&row.image_path);
        if !photos.insert(row.photo_id.clone()) {
            return Err(PipelineError::DuplicatePhotoId {
                tree_id: row.tree_id,
                photo_id: row.photo_id,
            });
        }
        if !path.is_file() {
            return Err(PipelineError::MissingImage {
                photo_id: row.photo_id,
                path,
            });
        }
        let point = SamplePoint {
            tree_id: row.tree_id.clone(),
            photo_id: row.photo_id,
            image_path: path,
            features: None,
            otsu: None,
        };
        match index.get(&row.tree_id) {
            Some(&i) => {
                if trees[i].label != row.label {
                    return Err(PipelineError::LabelConflict {
                        tree_id: row.tree_id,
                    });
                }
                trees[i].points.push(point);
            }
            None => {
                index.insert(row.tree_id.clone(), trees.len());
                trees.push(TreeRecord {
                    tree_id: row.tree_id,
                    label: row.label,
                    points: vec![point],
                    features: None,
                });
            }
        }
    }
    Ok(trees)
}

/// Reads a manifest file and groups it into trees.
pub fn ingest(manifest: impl AsRef<Path>) -> Result<Vec<TreeRecord>, PipelineError> {
    let manifest = manifest.as_ref();
    let file = std::fs::File::open(manifest).map_err(io_err(manifest))?;
    let rows = read_manifest(file)?;
    let base = manifest.parent().unwrap_or_else(|| Path::new("."));
    group_manifest(rows, base)
}

/// Pooling and grid settings for feature extraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ExtractConfig {
    pub pool: PoolConfig,
    pub grid: GridConfig,
}

impl ExtractConfig {
    pub fn new(pool: PoolConfig, grid: GridConfig) -> Self {
        Self { pool, grid }
    }

    /// Grid edge in the pixels features are computed on.
    pub fn effective_grid(&self) -> GridConfig {
        self.grid.scaled_for(&self.pool)
    }
}

/// Binarize, optionally pool, and measure one grayscale image.
pub fn point_features(
    photo_id: &str,
    gray: &GrayImage,
    cfg: &ExtractConfig,
) -> Result<(FeatureVector, OtsuResult), PipelineError> {
    let (binary, otsu) = auto_binarize(gray).map_err(|source| PipelineError::DegenerateHistogram {
        photo_id: photo_id.to_string(),
        source,
    })?;
    let shadow = pooling::pool(&binary, cfg.pool).map_err(|source| PipelineError::Pool {
        photo_id: photo_id.to_string(),
        source,
    })?;
    let fv = features::extract(&shadow, cfg.effective_grid()).map_err(|source| {
        PipelineError::PointFeatures {
            photo_id: photo_id.to_string(),
            source,
        }
    })?;
    Ok((fv, otsu))
}

fn load_gray(point: &SamplePoint) -> Result<GrayImage, PipelineError> {
    let bytes = std::fs::read(&point.image_path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            PipelineError::MissingImage {
                photo_id: point.photo_id.clone(),
                path: point.image_path.clone(),
            }
        } else {
            PipelineError::Io {
                path: point.image_path.clone(),
                source: e,
            }
        }
    })?;
    let rgb = decode_image(&bytes).map_err(|source| PipelineError::Image {
        photo_id: point.photo_id.clone(),
        source,
    })?;
    Ok(to_gray(&rgb))
}

/// Decodes and measures every photo of a tree; the tree's features are the
/// per-feature mean over its photos.
pub fn extract_tree_features(rec: &TreeRecord, cfg: &ExtractConfig) -> Result<TreeRecord, PipelineError> {
    if rec.points.is_empty() {
        return Err(PipelineError::EmptyTree(rec.tree_id.clone()));
    }
    let mut out = rec.clone();
    for point in &mut out.points {
        let gray = load_gray(point)?;
        let (fv, otsu) = point_features(&point.photo_id, &gray, cfg)?;
        point.features = Some(fv);
        point.otsu = Some(otsu);
    }
    out.features = out.point_mean();
    Ok(out)
}

/// A tree that could not be measured.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractFailure {
    pub tree_id: String,
    pub message: String,
}

/// Extracts all trees in parallel. A failing photo fails only its tree.
pub fn extract_all(records: &[TreeRecord], cfg: &ExtractConfig) -> (Vec<TreeRecord>, Vec<ExtractFailure>) {
    let results: Vec<_> = records
        .par_iter()
        .map(|r| extract_tree_features(r, cfg))
        .collect();
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for (rec, res) in records.iter().zip(results) {
        match res {
            Ok(r) => ok.push(r),
            Err(e) => failed.push(ExtractFailure {
                tree_id: rec.tree_id.clone(),
                message: e.to_string(),
            }),
        }
    }
    (ok, failed)
}

/// One classification unit: a tree (aggregated) or a single photo.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub features: FeatureVector,
    pub label: Label,
}

/// Classification granularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Unit {
    #[default]
    Tree,
    Point,
}

/// Samples from extracted trees. Trees without features are skipped.
pub fn samples_from_trees(records: &[TreeRecord], unit: Unit) -> Vec<Sample> {
    match unit {
        Unit::Tree => records
            .iter()
            .filter_map(|r| {
                r.features.map(|features| Sample {
                    id: r.tree_id.clone(),
                    features,
                    label: r.label,
                })
            })
            .collect(),
        Unit::Point => records
            .iter()
            .flat_map(|r| {
                r.points.iter().filter_map(move |p| {
                    p.features.map(|features| Sample {
                        id: p.photo_id.clone(),
                        features,
                        label: r.label,
                    })
                })
            })
            .collect(),
    }
}

/// One features CSV line. `photo_id` is `None` for per-tree rows.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub tree_id: String,
    pub photo_id: Option<String>,
    pub features: FeatureVector,
    pub label: Label,
}

pub fn feature_rows(records: &[TreeRecord], unit: Unit) -> Vec<FeatureRow> {
    match unit {
        Unit::Tree => records
            .iter()
            .filter_map(|r| {
                r.features.map(|features| FeatureRow {
                    tree_id: r.tree_id.clone(),
                    photo_id: None,
                    features,
                    label: r.label,
                })
            })
            .collect(),
        Unit::Point => records
            .iter()
            .flat_map(|r| {
                r.points.iter().filter_map(move |p| {
                    p.features.map(|features| FeatureRow {
                        tree_id: r.tree_id.clone(),
                        photo_id: Some(p.photo_id.clone()),
                        features,
                        label: r.label,
                    })
                })
            })
            .collect(),
    }
}

pub fn write_features_csv(out: impl Write, rows: &[FeatureRow]) -> Result<(), PipelineError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(FEATURES_HEADER)?;
    for r in rows {
        w.write_record([
            r.tree_id.clone(),
            r.photo_id.clone().unwrap_or_default(),
            format!("{:?}", r.features.black_pixel_rate),
            format!("{:?}", r.features.uniformity),
            r.label.to_string(),
        ])?;
    }
    w.flush().map_err(|e| PipelineError::Csv(e.to_string()))?;
    Ok(())
}

pub fn read_features_csv(reader: impl Read) -> Result<Vec<FeatureRow>, PipelineError> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let cols = column_map(r.headers()?, &FEATURES_HEADER)?;
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let field = |k: usize| rec.get(cols[k]).unwrap_or("");
        let num = |k: usize| {
            field(k)
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| PipelineError::Schema {
                    line,
                    message: format!("invalid {} {:?}", FEATURES_HEADER[k], field(k)),
                })
        };
        let photo = field(1);
        rows.push(FeatureRow {
            tree_id: field(0).to_string(),
            photo_id: (!photo.is_empty()).then(|| photo.to_string()),
            features: FeatureVector::new(num(2)?, num(3)?),
            label: parse_label(line, field(4))?,
        });
    }
    Ok(rows)
}

/// Samples from feature rows: one per row for [`Unit::Point`], or per-tree
/// means for [`Unit::Tree`].
pub fn samples_from_rows(rows: &[FeatureRow], unit: Unit) -> Result<Vec<Sample>, PipelineError> {
    match unit {
        Unit::Point => Ok(rows
            .iter()
            .map(|r| Sample {
                id: r.photo_id.clone().unwrap_or_else(|| r.tree_id.clone()),
                features: r.features,
                label: r.label,
            })
            .collect()),
        Unit::Tree => {
            let mut order: Vec<&str> = Vec::new();
            let mut groups: BTreeMap<&str, (Label, Vec<FeatureVector>)> = BTreeMap::new();
            for r in rows {
                match groups.get_mut(r.tree_id.as_str()) {
                    Some((label, v)) => {
                        if *label != r.label {
                            return Err(PipelineError::LabelConflict {
                                tree_id: r.tree_id.clone(),
                            });
                        }
                        v.push(r.features);
                    }
                    None => {
                        order.push(&r.tree_id);
                        groups.insert(&r.tree_id, (r.label, vec![r.features]));
                    }
                }
            }
            Ok(order
                .into_iter()
                .map(|id| {
                    let (label, v) = &groups[id];
                    Sample {
                        id: id.to_string(),
                        features: FeatureVector::mean(v).expect("group is non-empty"),
                        label: *label,
                    }
                })
                .collect())
        }
    }
}

/// Anything with a class label.
pub trait Labeled {
    fn label(&self) -> Label;
}

impl Labeled for Sample {
    fn label(&self) -> Label {
        self.label
    }
}

impl Labeled for TreeRecord {
    fn label(&self) -> Label {
        self.label
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    fraction: f64,
    seed: u64,
}

impl SplitSpec {
    pub fn new(fraction: f64, seed: u64) -> Result<Self, PipelineError> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(PipelineError::InsufficientData(format!(
                "train fraction must lie in (0, 1), got {fraction}"
            )));
        }
        Ok(Self { fraction, seed })
    }

    pub fn fraction(&self) -> f64 {
        self.fraction
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `round_half_up(fraction * n)`.
    pub fn train_size(&self, n: usize) -> usize {
        (self.fraction * n as f64 + 0.5).floor() as usize
    }
}

/// Row indices of a train/test partition, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified seeded split. The training size is `round_half_up(f * n)`,
/// shared between classes by largest remainder, then nudged so each class
/// keeps at least one row on both sides.
pub fn split_indices(labels: &[Label], spec: &SplitSpec) -> Result<SplitIndices, PipelineError> {
    let mut neg: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == Label::NotGood).collect();
    let mut pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == Label::Good).collect();
    if neg.len() < 2 || pos.len() < 2 {
        return Err(PipelineError::InsufficientData(format!(
            "a stratified split needs at least 2 rows per class, got {} good and {} not good",
            pos.len(),
            neg.len()
        )));
    }
    let n = labels.len();
    let target = spec.train_size(n).clamp(2, n - 2);

    let q_neg = spec.fraction * neg.len() as f64;
    let q_pos = spec.fraction * pos.len() as f64;
    let (mut k_neg, mut k_pos) = (q_neg.floor() as usize, q_pos.floor() as usize);
    let mut left = target.saturating_sub(k_neg + k_pos);
    while left > 0 {
        if q_neg - (k_neg as f64) >= q_pos - (k_pos as f64) {
            k_neg += 1;
        } else {
            k_pos += 1;
        }
        left -= 1;
    }
    let _ = k_pos;
    let lo = 1.max(target.saturating_sub(pos.len() - 1));
    let hi = (neg.len() - 1).min(target - 1);
    k_neg = k_neg.clamp(lo, hi);
    let k_pos = target - k_neg;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    neg.shuffle(&mut rng);
    pos.shuffle(&mut rng);
    let mut train: Vec<usize> = neg[..k_neg].iter().chain(&pos[..k_pos]).copied().collect();
    let mut test: Vec<usize> = neg[k_neg..].iter().chain(&pos[k_pos..]).copied().collect();
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitIndices { train, test })
}

pub fn split<T: Labeled + Clone>(items: &[T], spec: &SplitSpec) -> Result<(Vec<T>, Vec<T>), PipelineError> {
    let labels: Vec<Label> = items.iter().map(Labeled::label).collect();
    let idx = split_indices(&labels, spec)?;
    let pick = |ix: &[usize]| ix.iter().map(|&i| items[i].clone()).collect();
    Ok((pick(&idx.train), pick(&idx.test)))
}

/// Fits the normalizer on `train`, trains, and embeds the normalizer and
/// extraction settings in the model.
pub fn fit_model(
    train: &[Sample],
    cfg: &TrainConfig,
    extract: &ExtractConfig,
) -> Result<SvmModel, PipelineError> {
    let raw: Vec<FeatureVector> = train.iter().map(|s| s.features).collect();
    let nz = features::fit_normalizer(&raw)?;
    let set = training_set(train, &nz)?;
    let model = match svm::train(&set, cfg) {
        Ok(m) => m,
        Err(SvmError::NonConvergence { iterations, gap, best }) => {
            let best = best.with_normalizer(nz)?.with_pipeline_config(extract.pool, extract.grid);
            return Err(SvmError::NonConvergence {
                iterations,
                gap,
                best: Box::new(best),
            }
            .into());
        }
        Err(e) => return Err(e.into()),
    };
    Ok(model
        .with_normalizer(nz)?
        .with_pipeline_config(extract.pool, extract.grid))
}

fn training_set(rows: &[Sample], nz: &Normalizer) -> Result<TrainingSet, PipelineError> {
    let mut out = Vec::with_capacity(rows.len());
    for s in rows {
        out.push((nz.apply(&s.features)?.0, s.label));
    }
    Ok(TrainingSet::new(out)?)
}

/// Confusion counts with `Good` as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn record(&mut self, truth: Label, predicted: Label) {
        match (truth, predicted) {
            (Label::Good, Label::Good) => self.tp += 1,
            (Label::NotGood, Label::NotGood) => self.tn += 1,
            (Label::NotGood, Label::Good) => self.fp += 1,
            (Label::Good, Label::NotGood) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        if self.total() == 0 {
            return 0.0;
        }
        (self.tp + self.tn) as f64 / self.total() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub id: String,
    pub truth: Label,
    pub predicted: Label,
    pub decision_value: f64,
}

pub fn predict_samples(model: &SvmModel, samples: &[Sample]) -> Vec<Prediction> {
    samples
        .iter()
        .map(|s| {
            let decision_value = model.decision_value_raw(&s.features);
            Prediction {
                id: s.id.clone(),
                truth: s.label,
                predicted: Label::from_decision(decision_value),
                decision_value,
            }
        })
        .collect()
}

/// Test-set evaluation of one trained configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub config: String,
    pub kernel: String,
    pub confusion: Confusion,
    pub accuracy: f64,
    pub train_size: usize,
    pub test_size: usize,
    pub support_vectors: usize,
    pub predictions: Vec<Prediction>,
}

pub fn evaluate(model: &SvmModel, config: &TrainConfig, train_size: usize, test: &[Sample]) -> EvalReport {
    let predictions = predict_samples(model, test);
    let mut confusion = Confusion::default();
    for p in &predictions {
        confusion.record(p.truth, p.predicted);
    }
    EvalReport {
        config: config.describe(),
        kernel: config.kernel.clone(),
        accuracy: confusion.accuracy(),
        confusion,
        train_size,
        test_size: test.len(),
        support_vectors: model.support_indices().len(),
        predictions,
    }
}

#[derive(Debug, Clone)]
pub struct ConfigOutcome {
    pub config: TrainConfig,
    pub result: Result<EvalReport, String>,
    /// Numeric failure (non-convergence) as opposed to a data problem.
    pub numeric_failure: bool,
    pub model: Option<SvmModel>,
}

/// Everything a run produced; serializes deterministically.
#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub samples: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub split: SplitSpec,
    pub extract: ExtractConfig,
    pub outcomes: Vec<ConfigOutcome>,
    pub failures: Vec<ExtractFailure>,
}

impl ExperimentReport {
    /// Index of the most accurate configuration; ties go to the earliest.
    pub fn winner(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, o) in self.outcomes.iter().enumerate() {
            if let Ok(r) = &o.result {
                if best.is_none_or(|(_, a)| r.accuracy > a) {
                    best = Some((i, r.accuracy));
                }
            }
        }
        best.map(|(i, _)| i)
    }

    pub fn has_numeric_failure(&self) -> bool {
        self.outcomes.iter().any(|o| o.numeric_failure)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "samples: {} (train {}, test {}; train fraction {}, seed {})",
            self.samples,
            self.train_size,
            self.test_size,
            self.split.fraction,
            self.split.seed
        );
        let pool = if self.extract.pool.enabled() {
            format!("pooling factor {}", self.extract.pool.factor())
        } else {
            "pooling off".to_string()
        };
        let _ = writeln!(
            s,
            "{pool}; grid {} (effective {})",
            self.extract.grid.edge(),
            self.extract.effective_grid().edge()
        );
        for o in &self.outcomes {
            match &o.result {
                Ok(r) => {
                    let c = r.confusion;
                    let _ = writeln!(
                        s,
                        "[{}] accuracy {:.4} ({}/{})  TP={} TN={} FP={} FN={}  support vectors {}",
                        r.config,
                        r.accuracy,
                        c.tp + c.tn,
                        c.total(),
                        c.tp,
                        c.tn,
                        c.fp,
                        c.fn_,
                        r.support_vectors
                    );
                }
                Err(e) => {
                    let _ = writeln!(s, "[{}] failed: {e}", o.config.describe());
                }
            }
        }
        match self.winner() {
            Some(i) => {
                let r = self.outcomes[i].result.as_ref().expect("winner succeeded");
                let _ = writeln!(s, "winner: {} (accuracy {:.4})", r.config, r.accuracy);
            }
            None => {
                let _ = writeln!(s, "winner: none");
            }
        }
        if self.failures.is_empty() {
            let _ = writeln!(s, "extraction failures: none");
        } else {
            let _ = writeln!(s, "extraction failures: {}", self.failures.len());
            for f in &self.failures {
                let _ = writeln!(s, "  {}: {}", f.tree_id, f.message);
            }
        }
        s
    }

    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "samples={}", self.samples);
        let _ = writeln!(s, "train_size={}", self.train_size);
        let _ = writeln!(s, "test_size={}", self.test_size);
        let _ = writeln!(s, "train_fraction={:?}", self.split.fraction);
        let _ = writeln!(s, "seed={}", self.split.seed);
        let _ = writeln!(s, "pool.enabled={}", self.extract.pool.enabled());
        let _ = writeln!(s, "pool.factor={}", self.extract.pool.factor());
        let _ = writeln!(s, "grid.edge={}", self.extract.grid.edge());
        let _ = writeln!(s, "grid.effective={}", self.extract.effective_grid().edge());
        let _ = writeln!(s, "configs={}", self.outcomes.len());
        for (i, o) in self.outcomes.iter().enumerate() {
            let _ = writeln!(s, "config.{i}.name={}", o.config.describe());
            let _ = writeln!(s, "config.{i}.kernel={}", o.config.kernel);
            let _ = writeln!(s, "config.{i}.c={:?}", o.config.c);
            match &o.result {
                Ok(r) => {
                    let _ = writeln!(s, "config.{i}.status=ok");
                    let _ = writeln!(s, "config.{i}.accuracy={:?}", r.accuracy);
                    let _ = writeln!(s, "config.{i}.tp={}", r.confusion.tp);
                    let _ = writeln!(s, "config.{i}.tn={}", r.confusion.tn);
                    let _ = writeln!(s, "config.{i}.fp={}", r.confusion.fp);
                    let _ = writeln!(s, "config.{i}.fn={}", r.confusion.fn_);
                    let _ = writeln!(s, "config.{i}.support_vectors={}", r.support_vectors);
                }
                Err(e) => {
                    let _ = writeln!(s, "config.{i}.status=error");
                    let _ = writeln!(s, "config.{i}.error={e}");
                }
            }
        }
        match self.winner() {
            Some(i) => {
                let _ = writeln!(s, "winner={}", self.outcomes[i].config.describe());
            }
            None => {
                let _ = writeln!(s, "winner=none");
            }
        }
        let _ = writeln!(s, "failures={}", self.failures.len());
        for (i, f) in self.failures.iter().enumerate() {
            let _ = writeln!(s, "failure.{i}={}: {}", f.tree_id, f.message);
        }
        s
    }

    /// Predictions of every successful configuration as CSV text with
    /// header `config,id,label,predicted,decision_value`.
    pub fn predictions_csv(&self) -> Result<String, PipelineError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["config", "id", "label", "predicted", "decision_value"])?;
        for o in &self.outcomes {
            if let Ok(r) = &o.result {
                for p in &r.predictions {
                    w.write_record([
                        r.config.clone(),
                        p.id.clone(),
                        p.truth.to_string(),
                        p.predicted.to_string(),
                        format!("{:?}", p.decision_value),
                    ])?;
                }
            }
        }
        let bytes = w.into_inner().map_err(|e| PipelineError::Csv(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
    }
}

/// Splits once, then trains and evaluates every configuration on the same
/// partition. Training failures are recorded per configuration.
pub fn run_experiment(
    samples: &[Sample],
    configs: &[TrainConfig],
    spec: &SplitSpec,
    extract: &ExtractConfig,
) -> Result<ExperimentReport, PipelineError> {
    let (train, test) = split(samples, spec)?;
    let outcomes = configs
        .iter()
        .map(|cfg| match fit_model(&train, cfg, extract) {
            Ok(model) => ConfigOutcome {
                config: cfg.clone(),
                result: Ok(evaluate(&model, cfg, train.len(), &test)),
                numeric_failure: false,
                model: Some(model),
            },
            Err(e) => ConfigOutcome {
                config: cfg.clone(),
                numeric_failure: matches!(e, PipelineError::Svm(SvmError::NonConvergence { .. })),
                result: Err(e.to_string()),
                model: None,
            },
        })
        .collect();
    Ok(ExperimentReport {
        samples: samples.len(),
        train_size: train.len(),
        test_size: test.len(),
        split: *spec,
        extract: *extract,
        outcomes,
        failures: Vec::new(),
    })
}
