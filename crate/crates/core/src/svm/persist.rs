//! Plain-text model files.
//!
//! One `key=value` pair per line. Floats are written in shortest
//! round-trip form so a loaded model reproduces decision values bit for bit.
//! The file ends with an `end` line; anything missing it is truncated.
//!
//! ```text
//! version=1
//! kernel=linear
//! c=1000000.0
//! tolerance=0.0001
//! offset=1.0
//! weights=1.0,1.0
//! normalizer.min=0.0,0.0
//! normalizer.max=1.0,1.0
//! pool.enabled=true
//! pool.factor=3
//! grid.edge=100
//! train.rows=2
//! train.seed=0
//! train.iterations=1
//! sv.count=2
//! sv=0,0.0,0.0,-1.0
//! sv=1,1.0,1.0,1.0
//! end
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use super::{KernelParams, KernelRegistry, ModelMeta, Point, SvmModel};
use crate::features::{GridConfig, Normalizer};
use crate::pooling::PoolConfig;

pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("model file version {found:?} is not supported (expected {MODEL_VERSION})")]
    SchemaVersionMismatch { found: String },
    #[error("corrupt model file: {0}")]
    CorruptModel(String),
}

fn corrupt(msg: impl Into<String>) -> ModelIoError {
    ModelIoError::CorruptModel(msg.into())
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v:?}"))
        .collect::<Vec<_>>()
        .join(",")
}

/// Serializes a model to its text form.
pub fn write_model(m: &SvmModel) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "version={MODEL_VERSION}");
    let _ = writeln!(s, "kernel={}", m.kernel.name());
    for (k, v) in m.kernel.params() {
        let _ = writeln!(s, "kernel.{k}={v:?}");
    }
    let _ = writeln!(s, "c={:?}", m.c);
    let _ = writeln!(s, "tolerance={:?}", m.tolerance);
    let _ = writeln!(s, "offset={:?}", m.offset);
    if let Some(w) = m.weights {
        let _ = writeln!(s, "weights={}", join(&w));
    }
    let _ = writeln!(s, "normalizer.min={}", join(&m.normalizer.mins()));
    let _ = writeln!(s, "normalizer.max={}", join(&m.normalizer.maxs()));
    let _ = writeln!(s, "pool.enabled={}", m.meta.pool.enabled());
    let _ = writeln!(s, "pool.factor={}", m.meta.pool.factor());
    let _ = writeln!(s, "grid.edge={}", m.meta.grid.edge());
    let _ = writeln!(s, "train.rows={}", m.meta.training_rows);
    let _ = writeln!(s, "train.seed={}", m.meta.seed);
    let _ = writeln!(s, "train.iterations={}", m.meta.iterations);
    let _ = writeln!(s, "sv.count={}", m.support_vectors.len());
    for ((i, v), c) in m
        .support_indices
        .iter()
        .zip(&m.support_vectors)
        .zip(&m.dual_coefs)
    {
        let _ = writeln!(s, "sv={i},{:?},{:?},{c:?}", v[0], v[1]);
    }
    s.push_str("end\n");
    s
}

pub fn save_model(m: &SvmModel, path: impl AsRef<Path>) -> Result<(), ModelIoError> {
    std::fs::write(path, write_model(m))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<SvmModel, ModelIoError> {
    load_model_with(&KernelRegistry::default(), path)
}

pub fn load_model_with(
    registry: &KernelRegistry,
    path: impl AsRef<Path>,
) -> Result<SvmModel, ModelIoError> {
    let text = std::fs::read_to_string(path)?;
    parse_model(&text, registry)
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T, ModelIoError> {
    v.trim()
        .parse()
        .map_err(|_| corrupt(format!("invalid value {v:?} for {key}")))
}

fn parse_list<const N: usize>(key: &str, v: &str) -> Result<[f64; N], ModelIoError> {
    let parts: Vec<&str> = v.split(',').collect();
    if parts.len() != N {
        return Err(corrupt(format!("{key} needs {N} values, found {}", parts.len())));
    }
    let mut out = [0.0; N];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = parse_num(key, p)?;
    }
    Ok(out)
}

pub fn parse_model(text: &str, registry: &KernelRegistry) -> Result<SvmModel, ModelIoError> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));

    match lines.next().and_then(|l| l.split_once('=')) {
        Some(("version", v)) if v == MODEL_VERSION.to_string() => {}
        Some(("version", v)) => {
            return Err(ModelIoError::SchemaVersionMismatch {
                found: v.to_string(),
            })
        }
        _ => return Err(corrupt("missing version line")),
    }

    let mut fields: BTreeMap<&str, &str> = BTreeMap::new();
    let mut svs: Vec<&str> = Vec::new();
    let mut ended = false;
    for line in lines {
        if ended {
            return Err(corrupt("content after end marker"));
        }
        if line == "end" {
            ended = true;
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| corrupt(format!("malformed line {line:?}")))?;
        if k == "sv" {
            svs.push(v);
        } else if fields.insert(k, v).is_some() {
            return Err(corrupt(format!("duplicate key {k}")));
        }
    }
    if !ended {
        return Err(corrupt("missing end marker (truncated file?)"));
    }

    let get = |k: &str| {
        fields
            .get(k)
            .copied()
            .ok_or_else(|| corrupt(format!("missing key {k}")))
    };

    let kernel_name = get("kernel")?;
    let mut params = KernelParams::new();
    for (k, v) in &fields {
        if let Some(p) = k.strip_prefix("kernel.") {
            params.insert(p.to_string(), parse_num(k, v)?);
        }
    }
    let kernel = registry
        .build(kernel_name, &params, &[])
        .map_err(|e| corrupt(e.to_string()))?;

    let c: f64 = parse_num("c", get("c")?)?;
    let tolerance: f64 = parse_num("tolerance", get("tolerance")?)?;
    let offset: f64 = parse_num("offset", get("offset")?)?;
    let weights = fields
        .get("weights")
        .map(|v| parse_list::<2>("weights", v))
        .transpose()?;
    let mins = parse_list::<2>("normalizer.min", get("normalizer.min")?)?;
    let maxs = parse_list::<2>("normalizer.max", get("normalizer.max")?)?;
    let normalizer = Normalizer::from_bounds(mins, maxs)
        .filter(|n| n.constant_feature().is_none())
        .ok_or_else(|| corrupt("normalizer bounds are invalid"))?;

    let pool = if parse_num::<bool>("pool.enabled", get("pool.enabled")?)? {
        PoolConfig::new(parse_num("pool.factor", get("pool.factor")?)?)
            .map_err(|e| corrupt(e.to_string()))?
    } else {
        PoolConfig::disabled()
    };
    let grid = GridConfig::new(parse_num("grid.edge", get("grid.edge")?)?)
        .map_err(|e| corrupt(e.to_string()))?;
    let meta = ModelMeta {
        training_rows: parse_num("train.rows", get("train.rows")?)?,
        seed: parse_num("train.seed", get("train.seed")?)?,
        iterations: parse_num("train.iterations", get("train.iterations")?)?,
        pool,
        grid,
    };

    let count: usize = parse_num("sv.count", get("sv.count")?)?;
    if count != svs.len() {
        return Err(corrupt(format!(
            "sv.count is {count} but {} support vectors are listed",
            svs.len()
        )));
    }
    let mut support_indices = Vec::with_capacity(count);
    let mut support_vectors: Vec<Point> = Vec::with_capacity(count);
    let mut dual_coefs = Vec::with_capacity(count);
    for v in svs {
        let (idx, rest) = v
            .split_once(',')
            .ok_or_else(|| corrupt(format!("malformed support vector {v:?}")))?;
        let idx: usize = parse_num("sv", idx)?;
        if idx >= meta.training_rows {
            return Err(corrupt(format!("support vector index {idx} out of range")));
        }
        let [x0, x1, coef] = parse_list::<3>("sv", rest)?;
        support_indices.push(idx);
        support_vectors.push([x0, x1]);
        dual_coefs.push(coef);
    }

    Ok(SvmModel {
        kernel,
        c,
        tolerance,
        offset,
        weights,
        support_vectors,
        dual_coefs,
        support_indices,
        normalizer,
        meta,
    })
}
