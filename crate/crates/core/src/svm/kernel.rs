//! Kernel functions and the name-keyed registry used to select them.

use std::collections::BTreeMap;
use std::fmt;

use super::SvmError;

/// A point in feature space.
pub type Point = [f64; 2];

/// Named scalar kernel parameters, e.g. `gamma` for the RBF kernel.
pub type KernelParams = BTreeMap<String, f64>;

/// A positive semi-definite kernel over [`Point`]s.
pub trait Kernel: fmt::Debug + Send + Sync {
    /// Registry name; also written to model files.
    fn name(&self) -> &'static str;

    fn eval(&self, a: &Point, b: &Point) -> f64;

    /// Parameters needed to rebuild this kernel through the registry.
    fn params(&self) -> KernelParams;

    /// Collapses a dual expansion `sum coef_i K(v_i, .)` into explicit primal
    /// weights, when the kernel's feature map is the identity.
    fn primal_weights(&self, _vectors: &[Point], _coefs: &[f64]) -> Option<Point> {
        None
    }

    fn clone_box(&self) -> Box<dyn Kernel>;
}

impl Clone for Box<dyn Kernel> {
    fn clone(&self) -> Self {
        self.clone_box()
    }
}

/// `K(a, b) = a . b`
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LinearKernel;

impl Kernel for LinearKernel {
    fn name(&self) -> &'static str {
        "linear"
    }

    fn eval(&self, a: &Point, b: &Point) -> f64 {
        a[0] * b[0] + a[1] * b[1]
    }

    fn params(&self) -> KernelParams {
        KernelParams::new()
    }

    fn primal_weights(&self, vectors: &[Point], coefs: &[f64]) -> Option<Point> {
        let mut w = [0.0; 2];
        for (v, c) in vectors.iter().zip(coefs) {
            w[0] += c * v[0];
            w[1] += c * v[1];
        }
        Some(w)
    }

    fn clone_box(&self) -> Box<dyn Kernel> {
        Box::new(*self)
    }
}

/// `K(a, b) = exp(-gamma * |a - b|^2)`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RbfKernel {
    gamma: f64,
}

impl RbfKernel {
    pub fn new(gamma: f64) -> Result<Self, SvmError> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(SvmError::InvalidConfig(format!(
                "rbf gamma must be positive and finite, got {gamma}"
            )));
        }
        Ok(Self { gamma })
    }

    /// `1 / (d * Var(X))` over all feature values, with `d = 2`. Falls back
    /// to 1 when the values have no spread.
    pub fn default_gamma(data: &[Point]) -> f64 {
        let values: Vec<f64> = data.iter().flatten().copied().collect();
        if values.is_empty() {
            return 1.0;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        if var > 0.0 {
            1.0 / (2.0 * var)
        } else {
            1.0
        }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

impl Kernel for RbfKernel {
    fn name(&self) -> &'static str {
        "rbf"
    }

    fn eval(&self, a: &Point, b: &Point) -> f64 {
        let d0 = a[0] - b[0];
        let d1 = a[1] - b[1];
        (-self.gamma * (d0 * d0 + d1 * d1)).exp()
    }

    fn params(&self) -> KernelParams {
        KernelParams::from([("gamma".to_string(), self.gamma)])
    }

    fn clone_box(&self) -> Box<dyn Kernel> {
        Box::new(*self)
    }
}

/// Builds a kernel from its parameters. `data` is the (normalized) training
/// set, used for data-dependent defaults; it is empty when loading a model.
pub type KernelFactory = fn(&KernelParams, &[Point]) -> Result<Box<dyn Kernel>, SvmError>;

fn reject_unknown(name: &str, params: &KernelParams, allowed: &[&str]) -> Result<(), SvmError> {
    match params.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(SvmError::InvalidConfig(format!(
            "{name} kernel has no parameter {k:?}"
        ))),
        None => Ok(()),
    }
}

fn linear_factory(params: &KernelParams, _data: &[Point]) -> Result<Box<dyn Kernel>, SvmError> {
    reject_unknown("linear", params, &[])?;
    Ok(Box::new(LinearKernel))
}

fn rbf_factory(params: &KernelParams, data: &[Point]) -> Result<Box<dyn Kernel>, SvmError> {
    reject_unknown("rbf", params, &["gamma"])?;
    let gamma = match params.get("gamma") {
        Some(&g) => g,
        None => RbfKernel::default_gamma(data),
    };
    Ok(Box::new(RbfKernel::new(gamma)?))
}

/// Kernel constructors keyed by name.
#[derive(Clone)]
pub struct KernelRegistry {
    factories: BTreeMap<String, KernelFactory>,
}

impl KernelRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    /// Registry holding `linear` and `rbf`.
    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register("linear", linear_factory);
        r.register("rbf", rbf_factory);
        r
    }

    /// Adds or replaces the factory for `name`.
    pub fn register(&mut self, name: impl Into<String>, factory: KernelFactory) {
        self.factories.insert(name.into(), factory);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }

    pub fn build(
        &self,
        name: &str,
        params: &KernelParams,
        data: &[Point],
    ) -> Result<Box<dyn Kernel>, SvmError> {
        let factory = self
            .factories
            .get(name)
            .ok_or_else(|| SvmError::UnknownKernel(name.to_string()))?;
        factory(params, data)
    }
}

impl Default for KernelRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl fmt::Debug for KernelRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.factories.keys()).finish()
    }
}
