//! Maximum-margin binary classification over two features.
//!
//! Decision functions follow the `w'x - b` sign convention: a model stores
//! the offset `b` that is *subtracted*. Kernels are looked up by name in a
//! [`KernelRegistry`]; `linear` and `rbf` are built in.

pub mod kernel;
mod persist;
pub mod smo;

use thiserror::Error;

pub use kernel::{Kernel, KernelFactory, KernelParams, KernelRegistry, LinearKernel, Point, RbfKernel};
pub use persist::{load_model, load_model_with, parse_model, save_model, write_model, ModelIoError, MODEL_VERSION};

use crate::features::{FeatureVector, GridConfig, Normalizer};
use crate::label::Label;
use crate::pooling::PoolConfig;

#[derive(Debug, Error)]
pub enum SvmError {
    #[error("training data is empty")]
    EmptyData,
    #[error("training data holds a single class; both labels are required")]
    SingleClassData,
    #[error("training row {0} has a non-finite feature")]
    NonFinite(usize),
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown kernel {0:?}")]
    UnknownKernel(String),
    #[error("solver stopped after {iterations} iterations with KKT violation {gap:e}")]
    NonConvergence {
        iterations: usize,
        gap: f64,
        /// Model built from the last iterate.
        best: Box<SvmModel>,
    },
}

/// Normalized feature rows with ±1 labels.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    points: Vec<Point>,
    labels: Vec<Label>,
}

impl TrainingSet {
    pub fn new(rows: Vec<(Point, Label)>) -> Result<Self, SvmError> {
        if rows.is_empty() {
            return Err(SvmError::EmptyData);
        }
        if let Some(i) = rows
            .iter()
            .position(|(x, _)| !x.iter().all(|v| v.is_finite()))
        {
            return Err(SvmError::NonFinite(i));
        }
        let has = |l| rows.iter().any(|(_, y)| *y == l);
        if !(has(Label::Good) && has(Label::NotGood)) {
            return Err(SvmError::SingleClassData);
        }
        let (points, labels) = rows.into_iter().unzip();
        Ok(Self { points, labels })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn rows(&self) -> impl Iterator<Item = (&Point, Label)> {
        self.points.iter().zip(self.labels.iter().copied())
    }
}

pub const DEFAULT_C: f64 = 1.0;
pub const DEFAULT_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Registry name of the kernel.
    pub kernel: String,
    pub params: KernelParams,
    pub c: f64,
    pub tolerance: f64,
    /// Defaults to `10 * n * 1000` for `n` training rows.
    pub max_iterations: Option<usize>,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(kernel: impl Into<String>) -> Self {
        Self {
            kernel: kernel.into(),
            params: KernelParams::new(),
            c: DEFAULT_C,
            tolerance: DEFAULT_TOLERANCE,
            max_iterations: None,
            seed: 0,
        }
    }

    pub fn linear() -> Self {
        Self::new("linear")
    }

    pub fn rbf() -> Self {
        Self::new("rbf")
    }

    pub fn with_c(mut self, c: f64) -> Self {
        self.c = c;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.params.insert("gamma".to_string(), gamma);
        self
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_max_iterations(mut self, max_iterations: usize) -> Self {
        self.max_iterations = Some(max_iterations);
        self
    }

    pub fn validate(&self) -> Result<(), SvmError> {
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(SvmError::InvalidConfig(format!("C must be positive, got {}", self.c)));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(SvmError::InvalidConfig(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == Some(0) {
            return Err(SvmError::InvalidConfig("max_iterations must be positive".into()));
        }
        Ok(())
    }

    /// Short description such as `linear C=1` or `rbf C=1 gamma=2`.
    pub fn describe(&self) -> String {
        let mut s = format!("{} C={}", self.kernel, self.c);
        for (k, v) in &self.params {
            s.push_str(&format!(" {k}={v}"));
        }
        s
    }
}

/// Provenance stored alongside a model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelMeta {
    pub training_rows: usize,
    pub seed: u64,
    pub iterations: usize,
    pub pool: PoolConfig,
    pub grid: GridConfig,
}

/// A trained classifier. Support vectors live in normalized feature space;
/// the embedded normalizer maps raw features into that space.
#[derive(Debug, Clone)]
pub struct SvmModel {
    kernel: Box<dyn Kernel>,
    c: f64,
    tolerance: f64,
    offset: f64,
    weights: Option<Point>,
    support_vectors: Vec<Point>,
    /// `alpha_i * y_i` per support vector.
    dual_coefs: Vec<f64>,
    support_indices: Vec<usize>,
    normalizer: Normalizer,
    meta: ModelMeta,
}

impl SvmModel {
    pub fn kernel(&self) -> &dyn Kernel {
        self.kernel.as_ref()
    }

    pub fn kernel_name(&self) -> &'static str {
        self.kernel.name()
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    /// `b` in `f(x) = w'x - b`.
    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Primal weights, for kernels that have them.
    pub fn weights(&self) -> Option<Point> {
        self.weights
    }

    pub fn support_vectors(&self) -> &[Point] {
        &self.support_vectors
    }

    pub fn dual_coefs(&self) -> &[f64] {
        &self.dual_coefs
    }

    /// Training row indices with a positive multiplier.
    pub fn support_indices(&self) -> &[usize] {
        &self.support_indices
    }

    pub fn normalizer(&self) -> &Normalizer {
        &self.normalizer
    }

    pub fn meta(&self) -> &ModelMeta {
        &self.meta
    }

    /// Geometric margin width `2 / |w|`.
    pub fn margin(&self) -> Option<f64> {
        self.weights.map(|w| 2.0 / w[0].hypot(w[1]))
    }

    /// Multipliers for all `n` training rows (zero off the support set).
    pub fn alphas(&self, n: usize) -> Vec<f64> {
        let mut a = vec![0.0; n];
        for (&i, c) in self.support_indices.iter().zip(&self.dual_coefs) {
            a[i] = c.abs();
        }
        a
    }

    /// Replaces the embedded normalizer. Fails if any feature span is zero.
    pub fn with_normalizer(mut self, normalizer: Normalizer) -> Result<Self, crate::features::FeatureError> {
        if let Some(name) = normalizer.constant_feature() {
            return Err(crate::features::FeatureError::ConstantFeature(name));
        }
        self.normalizer = normalizer;
        Ok(self)
    }

    pub fn with_pipeline_config(mut self, pool: PoolConfig, grid: GridConfig) -> Self {
        self.meta.pool = pool;
        self.meta.grid = grid;
        self
    }

    /// `f(x)` for a point already in normalized space.
    pub fn decision_value(&self, x: &Point) -> f64 {
        match self.weights {
            Some(w) => w[0] * x[0] + w[1] * x[1] - self.offset,
            None => {
                self.support_vectors
                    .iter()
                    .zip(&self.dual_coefs)
                    .map(|(v, c)| c * self.kernel.eval(v, x))
                    .sum::<f64>()
                    - self.offset
            }
        }
    }

    /// `f(x)` for raw features, normalized with the embedded normalizer.
    pub fn decision_value_raw(&self, v: &FeatureVector) -> f64 {
        self.decision_value(&self.normalize(v))
    }

    pub fn normalize(&self, v: &FeatureVector) -> Point {
        self.normalizer.scale(v.to_array()).0
    }

    pub fn predict_point(&self, x: &Point) -> Label {
        Label::from_decision(self.decision_value(x))
    }

    /// Normalizes `v` and returns the sign of the decision value.
    pub fn predict(&self, v: &FeatureVector) -> Label {
        Label::from_decision(self.decision_value_raw(v))
    }
}

/// Trains with the built-in kernel registry.
pub fn train(data: &TrainingSet, cfg: &TrainConfig) -> Result<SvmModel, SvmError> {
    train_with(&KernelRegistry::default(), data, cfg)
}

/// Solves the soft-margin dual by SMO. The returned model carries an
/// identity normalizer; attach the fitted one with
/// [`SvmModel::with_normalizer`].
pub fn train_with(
    registry: &KernelRegistry,
    data: &TrainingSet,
    cfg: &TrainConfig,
) -> Result<SvmModel, SvmError> {
    cfg.validate()?;
    let kernel = registry.build(&cfg.kernel, &cfg.params, data.points())?;
    let n = data.len();
    let labels: Vec<f64> = data.labels().iter().map(|l| l.sign()).collect();
    let max_iterations = cfg.max_iterations.unwrap_or(10 * n * 1000);
    let sol = smo::solve(
        kernel.as_ref(),
        data.points(),
        &labels,
        &smo::SmoParams {
            c: cfg.c,
            tolerance: cfg.tolerance,
            max_iterations,
            seed: cfg.seed,
        },
    );

    let mut support_indices = Vec::new();
    let mut support_vectors = Vec::new();
    let mut dual_coefs = Vec::new();
    for (i, &a) in sol.alphas.iter().enumerate() {
        if a > 0.0 {
            support_indices.push(i);
            support_vectors.push(data.points()[i]);
            dual_coefs.push(a * labels[i]);
        }
    }
    let weights = kernel.primal_weights(&support_vectors, &dual_coefs);
    let model = SvmModel {
        kernel,
        c: cfg.c,
        tolerance: cfg.tolerance,
        offset: sol.offset,
        weights,
        support_vectors,
        dual_coefs,
        support_indices,
        normalizer: Normalizer::identity(),
        meta: ModelMeta {
            training_rows: n,
            seed: cfg.seed,
            iterations: sol.iterations,
            pool: PoolConfig::default(),
            grid: GridConfig::default(),
        },
    };
    if !sol.converged {
        return Err(SvmError::NonConvergence {
            iterations: sol.iterations,
            gap: sol.gap,
            best: Box::new(model),
        });
    }
    Ok(model)
}

/// Rows lying on or inside the margin: `y_i f(x_i) <= 1 + tolerance`.
pub fn support_vectors(model: &SvmModel, data: &TrainingSet) -> Vec<usize> {
    data.rows()
        .enumerate()
        .filter(|(_, (x, y))| y.sign() * model.decision_value(x) <= 1.0 + model.tolerance)
        .map(|(i, _)| i)
        .collect()
}
