use std::fmt::Display;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use shadeprune::features::{FeatureVector, GridConfig};
use shadeprune::imgcore::{decode_image, encode_binary_pgm, to_gray};
use shadeprune::pipeline::{
    self, ExtractConfig, ExtractFailure, FeatureRow, PipelineError, Sample, SplitSpec, Unit,
};
use shadeprune::plot::{self, PlotPoint, PlotSpec};
use shadeprune::pooling::{self, PoolConfig};
use shadeprune::svm::{load_model, save_model};
use shadeprune::svm::{KernelRegistry, SvmError, TrainConfig};
use shadeprune::synth::{self, DatasetConfig, SynthError};
use shadeprune::threshold::auto_binarize;

use crate::{Cli, Command, DataArgs, ExtractArgs, ModelArgs};

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn usage(msg: impl Display) -> Self {
        Self {
            code: EXIT_USAGE,
            message: msg.to_string(),
        }
    }

    fn data(msg: impl Display) -> Self {
        Self {
            code: EXIT_DATA,
            message: msg.to_string(),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        let code = match e {
            PipelineError::Svm(SvmError::NonConvergence { .. }) => EXIT_NUMERIC,
            PipelineError::Svm(SvmError::InvalidConfig(_) | SvmError::UnknownKernel(_)) => EXIT_USAGE,
            _ => EXIT_DATA,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Binarize {
            input,
            output,
            extract,
        } => binarize(input, output, extract),
        Command::Extract {
            manifest,
            output,
            per_tree,
            extract,
        } => extract_cmd(cli, manifest, output.as_deref(), *per_tree, extract),
        Command::Train {
            input,
            output,
            train_fraction,
            model,
            data,
        } => train(cli, input, output, *train_fraction, model, data),
        Command::Predict {
            input,
            model,
            output,
            per_point,
        } => predict(cli, input, model, output.as_deref(), *per_point),
        Command::Evaluate {
            input,
            train_fraction,
            model,
            data,
            report,
            report_kv,
            predictions,
            chart,
            model_dir,
        } => evaluate(
            cli,
            input,
            *train_fraction,
            model,
            data,
            EvalOutputs {
                report: report.as_deref(),
                report_kv: report_kv.as_deref(),
                predictions: predictions.as_deref(),
                chart: chart.as_deref(),
                model_dir: model_dir.as_deref(),
            },
        ),
        Command::Synth {
            output,
            trees,
            points,
            width,
            height,
            good_coverage,
            poor_coverage,
            noise,
        } => {
            let mut cfg = DatasetConfig {
                n_trees: *trees,
                points_per_tree: *points,
                width: *width,
                height: *height,
                noise: *noise,
                seed: cli.seed,
                ..DatasetConfig::default()
            };
            cfg.good.coverage = *good_coverage;
            cfg.poor.coverage = *poor_coverage;
            let manifest = synth::generate_dataset(&cfg, output).map_err(|e| match e {
                SynthError::InvalidConfig(_) => CliError::usage(e),
                _ => CliError::data(e),
            })?;
            println!(
                "wrote {} trees x {} points to {}",
                trees,
                points,
                manifest.display()
            );
            Ok(())
        }
        Command::Plot {
            features,
            model,
            output,
            title,
        } => plot_cmd(features, model, output, title.as_deref()),
    }
}

fn extract_config(args: &ExtractArgs) -> Result<ExtractConfig> {
    let pool = if args.no_pool {
        PoolConfig::disabled()
    } else {
        PoolConfig::new(args.pool_factor).map_err(CliError::usage)?
    };
    let grid = GridConfig::new(args.grid).map_err(CliError::usage)?;
    Ok(ExtractConfig::new(pool, grid))
}

fn write_output(path: Option<&Path>, text: &[u8]) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CliError::data(format!("{}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(text)
            .map_err(|e| CliError::data(format!("stdout: {e}"))),
    }
}

fn binarize(input: &Path, output: &Path, args: &ExtractArgs) -> Result<()> {
    let cfg = extract_config(args)?;
    let bytes = fs::read(input).map_err(|e| CliError::data(format!("{}: {e}", input.display())))?;
    let rgb = decode_image(&bytes).map_err(|e| CliError::data(format!("{}: {e}", input.display())))?;
    let gray = to_gray(&rgb);
    let (binary, otsu) =
        auto_binarize(&gray).map_err(|e| CliError::data(format!("{}: {e}", input.display())))?;
    let out = pooling::pool(&binary, cfg.pool).map_err(CliError::data)?;
    fs::write(output, encode_binary_pgm(&out))
        .map_err(|e| CliError::data(format!("{}: {e}", output.display())))?;
    println!("{}", otsu.audit_record());
    if cfg.pool.enabled() {
        println!(
            "pool factor={} {}x{} -> {}x{}",
            cfg.pool.factor(),
            binary.width(),
            binary.height(),
            out.width(),
            out.height()
        );
    } else {
        println!("pool off {}x{}", out.width(), out.height());
    }
    Ok(())
}

fn is_manifest(path: &Path) -> Result<bool> {
    let file = fs::File::open(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let mut header = String::new();
    BufReader::new(file)
        .read_line(&mut header)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    Ok(header.split(',').any(|h| h.trim() == "image_path"))
}

fn report_failures(failures: &[ExtractFailure]) {
    for f in failures {
        eprintln!("warning: tree {} skipped: {}", f.tree_id, f.message);
    }
}

fn audit(cli: &Cli, trees: &[pipeline::TreeRecord]) {
    if !cli.verbose {
        return;
    }
    for t in trees {
        for p in &t.points {
            if let Some(o) = &p.otsu {
                eprintln!("{} {}", p.photo_id, o.audit_record());
            }
        }
    }
}

/// Samples from a manifest (extracted with `cfg`) or a features CSV.
fn load_samples(
    cli: &Cli,
    path: &Path,
    unit: Unit,
    cfg: &ExtractConfig,
) -> Result<(Vec<Sample>, Vec<ExtractFailure>)> {
    if is_manifest(path)? {
        let trees = pipeline::ingest(path)?;
        let (ok, failures) = pipeline::extract_all(&trees, cfg);
        audit(cli, &ok);
        report_failures(&failures);
        Ok((pipeline::samples_from_trees(&ok, unit), failures))
    } else {
        let file = fs::File::open(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        let rows = pipeline::read_features_csv(file)?;
        Ok((pipeline::samples_from_rows(&rows, unit)?, Vec::new()))
    }
}

fn partial_failure(failures: &[ExtractFailure]) -> Result<()> {
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::data(format!(
            "{} tree(s) failed feature extraction",
            failures.len()
        )))
    }
}

fn extract_cmd(
    cli: &Cli,
    manifest: &Path,
    output: Option<&Path>,
    per_tree: bool,
    args: &ExtractArgs,
) -> Result<()> {
    let cfg = extract_config(args)?;
    let trees = pipeline::ingest(manifest)?;
    let (ok, failures) = pipeline::extract_all(&trees, &cfg);
    audit(cli, &ok);
    report_failures(&failures);
    let unit = if per_tree { Unit::Tree } else { Unit::Point };
    let mut buf = Vec::new();
    pipeline::write_features_csv(&mut buf, &pipeline::feature_rows(&ok, unit))?;
    write_output(output, &buf)?;
    partial_failure(&failures)
}

fn train_configs(cli: &Cli, args: &ModelArgs) -> Result<Vec<TrainConfig>> {
    let registry = KernelRegistry::default();
    let mut out = Vec::new();
    for name in &args.kernels {
        if !registry.contains(name) {
            return Err(CliError::usage(format!(
                "unknown kernel {name:?}; available: {}",
                registry.names().collect::<Vec<_>>().join(", ")
            )));
        }
        let mut cfg = TrainConfig::new(name.as_str())
            .with_c(args.c)
            .with_tolerance(args.tolerance)
            .with_seed(cli.seed);
        if let (Some(g), true) = (args.gamma, name != "linear") {
            cfg = cfg.with_gamma(g);
        }
        if let Some(n) = args.max_iter {
            cfg = cfg.with_max_iterations(n);
        }
        cfg.validate().map_err(CliError::usage)?;
        out.push(cfg);
    }
    Ok(out)
}

fn unit(per_point: bool) -> Unit {
    if per_point {
        Unit::Point
    } else {
        Unit::Tree
    }
}

fn train(
    cli: &Cli,
    input: &Path,
    output: &Path,
    fraction: Option<f64>,
    model: &ModelArgs,
    data: &DataArgs,
) -> Result<()> {
    let configs = train_configs(cli, model)?;
    let [cfg] = configs.as_slice() else {
        return Err(CliError::usage("train takes exactly one --kernel"));
    };
    let extract = extract_config(&data.extract)?;
    let (samples, failures) = load_samples(cli, input, unit(data.per_point), &extract)?;
    let train_rows = match fraction {
        Some(f) => {
            let spec = SplitSpec::new(f, cli.seed).map_err(CliError::usage)?;
            pipeline::split(&samples, &spec)?.0
        }
        None => samples,
    };
    let fitted = match pipeline::fit_model(&train_rows, cfg, &extract) {
        Ok(m) => m,
        Err(PipelineError::Svm(SvmError::NonConvergence {
            iterations,
            gap,
            best,
        })) => {
            save_model(&best, output).map_err(CliError::data)?;
            return Err(CliError {
                code: EXIT_NUMERIC,
                message: format!(
                    "solver stopped after {iterations} iterations with gap {gap:e}; best iterate written to {}",
                    output.display()
                ),
            });
        }
        Err(e) => return Err(e.into()),
    };
    save_model(&fitted, output).map_err(CliError::data)?;
    println!(
        "trained {} on {} rows: {} support vectors, {} iterations",
        cfg.describe(),
        train_rows.len(),
        fitted.support_indices().len(),
        fitted.meta().iterations
    );
    if let Some(m) = fitted.margin() {
        if cli.verbose {
            eprintln!("margin width {m} (normalized space)");
        }
    }
    partial_failure(&failures)
}

fn predictions_csv(rows: &[pipeline::Prediction]) -> Vec<u8> {
    let mut s = String::from("id,label,predicted,decision_value\n");
    for p in rows {
        s.push_str(&format!(
            "{},{},{},{:?}\n",
            p.id, p.truth, p.predicted, p.decision_value
        ));
    }
    s.into_bytes()
}

fn predict(cli: &Cli, input: &Path, model_path: &Path, output: Option<&Path>, per_point: bool) -> Result<()> {
    let model = load_model(model_path).map_err(|e| CliError::data(format!("{}: {e}", model_path.display())))?;
    let meta = model.meta();
    let extract = ExtractConfig::new(meta.pool, meta.grid);
    let (samples, failures) = load_samples(cli, input, unit(per_point), &extract)?;
    let preds = pipeline::predict_samples(&model, &samples);
    write_output(output, &predictions_csv(&preds))?;
    partial_failure(&failures)
}

struct EvalOutputs<'a> {
    report: Option<&'a Path>,
    report_kv: Option<&'a Path>,
    predictions: Option<&'a Path>,
    chart: Option<&'a Path>,
    model_dir: Option<&'a Path>,
}

fn evaluate(
    cli: &Cli,
    input: &Path,
    fraction: f64,
    model: &ModelArgs,
    data: &DataArgs,
    out: EvalOutputs<'_>,
) -> Result<()> {
    let configs = train_configs(cli, model)?;
    let spec = SplitSpec::new(fraction, cli.seed).map_err(CliError::usage)?;
    let extract = extract_config(&data.extract)?;
    let (samples, failures) = load_samples(cli, input, unit(data.per_point), &extract)?;
    let mut report = pipeline::run_experiment(&samples, &configs, &spec, &extract)?;
    report.failures = failures;

    let text = report.to_text();
    print!("{text}");
    let io = |p: &Path, bytes: &[u8]| {
        fs::write(p, bytes).map_err(|e| CliError::data(format!("{}: {e}", p.display())))
    };
    if let Some(p) = out.report {
        io(p, text.as_bytes())?;
    }
    if let Some(p) = out.report_kv {
        io(p, report.to_key_values().as_bytes())?;
    }
    if let Some(p) = out.predictions {
        io(p, report.predictions_csv()?.as_bytes())?;
    }
    if let Some(p) = out.chart {
        let svg = plot::render_accuracy_svg(&report, &PlotSpec::default()).map_err(CliError::data)?;
        io(p, svg.as_bytes())?;
    }
    if let Some(dir) = out.model_dir {
        fs::create_dir_all(dir).map_err(|e| CliError::data(format!("{}: {e}", dir.display())))?;
        for (i, o) in report.outcomes.iter().enumerate() {
            if let Some(m) = &o.model {
                let path = dir.join(format!("model-{i}-{}.txt", o.config.kernel));
                save_model(m, &path).map_err(CliError::data)?;
            }
        }
    }

    if report.has_numeric_failure() {
        return Err(CliError {
            code: EXIT_NUMERIC,
            message: "at least one configuration did not converge".into(),
        });
    }
    if report.outcomes.iter().any(|o| o.result.is_err()) {
        return Err(CliError::data("at least one configuration failed"));
    }
    partial_failure(&report.failures)
}

fn plot_cmd(features: &Path, model_path: &Path, output: &Path, title: Option<&str>) -> Result<()> {
    let model = load_model(model_path).map_err(|e| CliError::data(format!("{}: {e}", model_path.display())))?;
    let file = fs::File::open(features).map_err(|e| CliError::data(format!("{}: {e}", features.display())))?;
    let rows: Vec<FeatureRow> = pipeline::read_features_csv(file)?;
    let points: Vec<PlotPoint> = rows
        .iter()
        .map(|r| PlotPoint {
            features: FeatureVector::new(r.features.black_pixel_rate, r.features.uniformity),
            label: r.label,
        })
        .collect();
    let mut spec = PlotSpec::default();
    if let Some(t) = title {
        spec.title = t.to_string();
    }
    let svg = plot::render_svg(&points, Some(&model), &spec).map_err(CliError::data)?;
    fs::write(output, svg).map_err(|e| CliError::data(format!("{}: {e}", output.display())))?;
    Ok(())
}
