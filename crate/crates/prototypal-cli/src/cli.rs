//! Command-line surface: `fit`, `predict`, `evaluate`, `gram`, `report`.
//!
//! Exit codes: 2 for configuration errors (including flag parsing), 3 for
//! data errors, 4 for numerical failures. No command leaves a partial output
//! file behind: everything is written to a temp file and renamed on success.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use prototypal::archetypes::FitOptions;
use prototypal::regression::{class_probabilities, classify, ResponseWeights};
use serde::Deserialize;

use crate::data::{
    load_blocks, load_grouped_samples, onehot_with_categories, stratified_split,
    vector_block_from_table, BlockData, Dataset, FeatureBlock, Table,
};
use crate::error::{CliError, Result};
use crate::model_file::{load_model, save_gram, save_model, write_atomic, GramFile, ModelFile};
use crate::report::{
    fit_report_csv, materialize_rows, metrics_csv, onehot_rows, render_curve, render_scatter,
    render_ternary, ReportFormat, SUPPORTED_REPORTS,
};
use crate::run::{
    block_rows_mat, cv_folds, encode_rows, fit_dataset, from_model_file, kernel_map, predict_rows,
    resolve_kernels, score, to_model_file, FittedModel, Method,
};
use crate::schema::{parse_block_spec, parse_kernel_assignment, BlockSpec};

#[derive(Parser, Debug)]
#[command(
    name = "prototypal",
    version,
    about = "Archetypal analysis, prototypal analysis and prototypal regression"
)]
pub struct Cli {
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Subcommand, Debug)]
pub enum Cmd {
    /// Fit a model and write it to a JSON model file.
    Fit(FitArgs),
    /// Predict responses (or barycentric coordinates) for new data.
    Predict(PredictArgs),
    /// Score a model, run a train/test split, or grid-search (k, lambda).
    Evaluate(EvalArgs),
    /// Compute a Gram matrix and write it to a cache file.
    Gram(GramArgs),
    /// Render a fitted model as a static SVG or CSV figure.
    Report(ReportArgs),
}

/// Flags describing where blocks come from.
#[derive(Args, Debug, Default, Clone)]
pub struct SchemaArgs {
    /// Tabular CSV file with a header row.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Grouped-samples file for a distribution block (repeatable): NAME=PATH.
    #[arg(long = "dist", value_name = "NAME=PATH")]
    pub dists: Vec<String>,
    /// Predictor block (repeatable): name=col1,col2 | name=cat(col) | name=dist(path).
    #[arg(long = "predictor", value_name = "SPEC")]
    pub predictors: Vec<String>,
    /// Response block, same grammar as --predictor.
    #[arg(long, value_name = "SPEC")]
    pub response: Option<String>,
    /// Kernel per block (repeatable): `name=family[:param]`; default linear.
    #[arg(long = "kernel", value_name = "NAME=FAMILY[:PARAM]")]
    pub kernels: Vec<String>,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[command(flatten)]
    pub schema: SchemaArgs,
    /// JSON config file supplying defaults; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Prototype count (repeatable: one per predictor, or one broadcast).
    #[arg(long = "k")]
    pub k: Vec<usize>,
    /// Locality penalty (repeatable like --k). Defaults to 0.
    #[arg(long = "lambda")]
    pub lambda: Vec<f64>,
    /// prototypal (default) or archetypal; unsupervised fits only.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Relative objective-change tolerance of the outer loop.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Outer iteration cap.
    #[arg(long = "max-iter")]
    pub max_iter: Option<usize>,
    /// Output model file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Fit report CSV; written to stdout when omitted.
    #[arg(long = "report-out")]
    pub report_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    /// Model file produced by `fit`.
    #[arg(long)]
    pub model: PathBuf,
    /// Training tabular file (the data the model was fitted on).
    #[arg(long = "train-data")]
    pub train_data: Option<PathBuf>,
    /// Training grouped-samples files: NAME=PATH (repeatable).
    #[arg(long = "train-dist", value_name = "NAME=PATH")]
    pub train_dists: Vec<String>,
    /// New tabular data to predict on.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// New grouped-samples files: NAME=PATH (repeatable).
    #[arg(long = "dist", value_name = "NAME=PATH")]
    pub dists: Vec<String>,
    /// Override the training penalty when encoding new points.
    #[arg(long = "encode-lambda")]
    pub encode_lambda: Option<f64>,
    /// Output predictions CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    pub schema: SchemaArgs,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Score an existing model (otherwise fits internally).
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long = "train-data")]
    pub train_data: Option<PathBuf>,
    #[arg(long = "train-dist", value_name = "NAME=PATH")]
    pub train_dists: Vec<String>,
    #[arg(long = "k")]
    pub k: Vec<usize>,
    #[arg(long = "lambda")]
    pub lambda: Vec<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long = "max-iter")]
    pub max_iter: Option<usize>,
    /// Training fraction of the internal stratified split (default 0.7).
    #[arg(long = "train-frac")]
    pub train_frac: Option<f64>,
    /// Comma-separated prototype counts to grid-search.
    #[arg(long = "grid-k")]
    pub grid_k: Option<String>,
    /// Comma-separated penalties to grid-search.
    #[arg(long = "grid-lambda")]
    pub grid_lambda: Option<String>,
    /// Cross-validation folds for the grid search (default 5).
    #[arg(long)]
    pub folds: Option<usize>,
    /// Output metrics CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct GramArgs {
    #[command(flatten)]
    pub schema: SchemaArgs,
    /// Which block to compute (default: the first predictor).
    #[arg(long)]
    pub block: Option<String>,
    /// Output Gram cache file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long = "train-data")]
    pub train_data: Option<PathBuf>,
    #[arg(long = "train-dist", value_name = "NAME=PATH")]
    pub train_dists: Vec<String>,
    /// Figure format: svg (default) or csv.
    #[arg(long)]
    pub report: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Optional JSON config: same keys as the long flags; flags win.
#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    data: Option<PathBuf>,
    dist: Option<Vec<String>>,
    predictor: Option<Vec<String>>,
    response: Option<String>,
    kernel: Option<Vec<String>>,
    k: Option<Vec<usize>>,
    lambda: Option<Vec<f64>>,
    method: Option<String>,
    seed: Option<u64>,
    tol: Option<f64>,
    max_iter: Option<usize>,
    train_frac: Option<f64>,
    folds: Option<usize>,
    grid_k: Option<String>,
    grid_lambda: Option<String>,
    out: Option<PathBuf>,
    report_out: Option<PathBuf>,
}

impl ConfigFile {
    fn load(path: Option<&Path>) -> Result<ConfigFile> {
        match path {
            None => Ok(ConfigFile::default()),
            Some(p) => {
                let bytes = std::fs::read(p)
                    .map_err(|e| CliError::config(format!("{}: {e}", p.display())))?;
                serde_json::from_slice(&bytes)
                    .map_err(|e| CliError::config(format!("{}: bad config file: {e}", p.display())))
            }
        }
    }
}

fn merged_schema(schema: &SchemaArgs, cfg: &ConfigFile) -> SchemaArgs {
    SchemaArgs {
        data: schema.data.clone().or_else(|| cfg.data.clone()),
        dists: if schema.dists.is_empty() {
            cfg.dist.clone().unwrap_or_default()
        } else {
            schema.dists.clone()
        },
        predictors: if schema.predictors.is_empty() {
            cfg.predictor.clone().unwrap_or_default()
        } else {
            schema.predictors.clone()
        },
        response: schema.response.clone().or_else(|| cfg.response.clone()),
        kernels: if schema.kernels.is_empty() {
            cfg.kernel.clone().unwrap_or_default()
        } else {
            schema.kernels.clone()
        },
    }
}

pub fn dispatch(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Fit(args) => cmd_fit(args),
        Cmd::Predict(args) => cmd_predict(args),
        Cmd::Evaluate(args) => cmd_evaluate(args),
        Cmd::Gram(args) => cmd_gram(args),
        Cmd::Report(args) => cmd_report(args),
    }
}

fn parse_assignments(list: &[String], what: &str) -> Result<HashMap<String, PathBuf>> {
    let mut out = HashMap::new();
    for item in list {
        let (name, path) = item
            .split_once('=')
            .ok_or_else(|| CliError::config(format!("{what} '{item}' must look like NAME=PATH")))?;
        out.insert(name.trim().to_string(), PathBuf::from(path.trim()));
    }
    Ok(out)
}

fn parse_kernels(list: &[String]) -> Result<HashMap<String, prototypal::KernelSpec>> {
    let mut out = HashMap::new();
    for item in list {
        let (name, spec) = parse_kernel_assignment(item)?;
        out.insert(name, spec);
    }
    Ok(out)
}

/// Builds a dataset from schema flags (fit, gram, evaluate modes B/C).
fn build_dataset(schema: &SchemaArgs, require_predictor: bool) -> Result<Dataset> {
    if require_predictor && schema.predictors.is_empty() {
        return Err(CliError::config("at least one --predictor is required"));
    }
    let pred_specs: Vec<BlockSpec> = schema
        .predictors
        .iter()
        .map(|s| parse_block_spec(s))
        .collect::<Result<_>>()?;
    let resp_spec = schema
        .response
        .as_deref()
        .map(parse_block_spec)
        .transpose()?;
    let overrides = parse_assignments(&schema.dists, "--dist")?;
    let table = schema.data.as_deref().map(Table::load).transpose()?;
    let predictors = load_blocks(table.as_ref(), &pred_specs, &overrides)?;
    let response = resp_spec
        .map(|spec| load_blocks(table.as_ref(), std::slice::from_ref(&spec), &overrides))
        .transpose()?
        .map(|mut v| v.remove(0));
    Dataset::new(predictors, response)
}

/// Builds a dataset shaped like a stored model's schema from user-supplied
/// files (predict, evaluate mode A, report).
fn dataset_from_model_schema(
    mf: &ModelFile,
    table_path: Option<&Path>,
    dist_paths: &HashMap<String, PathBuf>,
    include_response: bool,
) -> Result<Dataset> {
    let table = table_path.map(Table::load).transpose()?;
    let need_table = mf
        .schema
        .iter()
        .any(|b| (b.role == "predictor" || include_response) && b.kind != "distribution");
    if need_table && table.is_none() {
        return Err(CliError::config(
            "this model reads tabular blocks; supply the CSV file",
        ));
    }
    let mut predictors = Vec::new();
    let mut response = None;
    for bs in &mf.schema {
        if bs.role == "response" && !include_response {
            continue;
        }
        let block = match bs.kind.as_str() {
            "vector" => vector_block_from_table(
                table.as_ref().expect("checked above"),
                &bs.name,
                &bs.columns,
            )?,
            "onehot" => onehot_with_categories(
                table.as_ref().expect("checked above"),
                &bs.name,
                &bs.columns[0],
                &bs.categories,
            )?,
            "distribution" => {
                let path = dist_paths.get(&bs.name).ok_or_else(|| {
                    CliError::config(format!(
                        "block '{}' is distributional; pass NAME=PATH for it",
                        bs.name
                    ))
                })?;
                let block = load_grouped_samples(path, &bs.name)?;
                if block.dim() != bs.dim {
                    return Err(CliError::data(format!(
                        "block '{}': samples have dimension {}, model expects {}",
                        bs.name,
                        block.dim(),
                        bs.dim
                    )));
                }
                block
            }
            other => return Err(CliError::data(format!("unknown block kind '{other}'"))),
        };
        if bs.role == "response" {
            response = Some(block);
        } else {
            predictors.push(block);
        }
    }
    Dataset::new(predictors, response)
}

fn fit_options(seed: Option<u64>, tol: Option<f64>, max_iter: Option<usize>) -> FitOptions {
    let mut opts = FitOptions::default();
    if let Some(s) = seed {
        opts.seed = s;
    }
    if let Some(t) = tol {
        opts.tol = t;
    }
    if let Some(m) = max_iter {
        opts.max_outer_iter = m;
    }
    opts
}

fn parse_method(s: Option<&str>) -> Result<Method> {
    match s.unwrap_or("prototypal") {
        "prototypal" => Ok(Method::Prototypal),
        "archetypal" => Ok(Method::Archetypal),
        other => Err(CliError::config(format!(
            "unknown method '{other}' (expected prototypal or archetypal)"
        ))),
    }
}

fn cmd_fit(args: FitArgs) -> Result<()> {
    let cfg = ConfigFile::load(args.config.as_deref())?;
    let schema = merged_schema(&args.schema, &cfg);
    let ds = build_dataset(&schema, true)?;
    let kernels = parse_kernels(&schema.kernels)?;
    let ks = if args.k.is_empty() {
        cfg.k.clone().unwrap_or_default()
    } else {
        args.k.clone()
    };
    if ks.is_empty() {
        return Err(CliError::config("--k is required"));
    }
    let lambdas = if args.lambda.is_empty() {
        cfg.lambda.clone().unwrap_or_else(|| vec![0.0])
    } else {
        args.lambda.clone()
    };
    let method = parse_method(args.method.as_deref().or(cfg.method.as_deref()))?;
    if ds.response.is_some() && method == Method::Archetypal {
        return Err(CliError::config(
            "archetypal analysis is unsupervised; drop --response or the method flag",
        ));
    }
    let opts = fit_options(
        args.seed.or(cfg.seed),
        args.tol.or(cfg.tol),
        args.max_iter.or(cfg.max_iter),
    );
    let out = args
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .ok_or_else(|| CliError::config("--out is required"))?;

    let fitted = fit_dataset(&ds, method, &ks, &lambdas, &kernels, &opts)?;
    let mf = to_model_file(&fitted, &ds, &kernels)?;
    save_model(&out, &mf)?;

    let report = fit_report_csv(&fitted, &ds);
    match args.report_out.or(cfg.report_out) {
        Some(path) => write_atomic(&path, report.as_bytes())?,
        None => print!("{report}"),
    }
    Ok(())
}

/// CSV of predictions, shaped by the response kind.
fn predictions_csv(train_ds: &Dataset, predictions: &[ResponseWeights]) -> Result<String> {
    let resp = train_ds
        .response
        .as_ref()
        .expect("regression model has a response");
    let mut out = String::new();
    match &resp.data {
        BlockData::OneHot { categories, .. } => {
            let label_mat = block_rows_mat(resp)?;
            let _ = write!(out, "row");
            for c in categories {
                let _ = write!(out, ",p_{c}");
            }
            let _ = writeln!(out, ",label");
            for (i, w) in predictions.iter().enumerate() {
                let probs = class_probabilities(w, &label_mat)?;
                let _ = write!(out, "{i}");
                for p in &probs {
                    let _ = write!(out, ",{p}");
                }
                let _ = writeln!(out, ",{}", categories[classify(w, &label_mat)?]);
            }
        }
        BlockData::Vector { columns, .. } => {
            let y_mat = block_rows_mat(resp)?;
            let _ = write!(out, "row");
            for c in columns {
                let _ = write!(out, ",{c}");
            }
            let _ = writeln!(out);
            for (i, w) in predictions.iter().enumerate() {
                let yhat = w.mix_rows(&y_mat)?;
                let _ = write!(out, "{i}");
                for v in &yhat {
                    let _ = write!(out, ",{v}");
                }
                let _ = writeln!(out);
            }
        }
        BlockData::Distribution { group_ids, .. } => {
            let _ = write!(out, "row");
            for g in group_ids {
                let _ = write!(out, ",w_{g}");
            }
            let _ = writeln!(out);
            for (i, w) in predictions.iter().enumerate() {
                let _ = write!(out, "{i}");
                for v in w.weights() {
                    let _ = write!(out, ",{v}");
                }
                let _ = writeln!(out);
            }
        }
    }
    Ok(out)
}

fn cmd_predict(args: PredictArgs) -> Result<()> {
    let mf = load_model(&args.model)?;
    let needs_response = mf.kind != "prototypal" && mf.kind != "archetypal";
    let train_dists = parse_assignments(&args.train_dists, "--train-dist")?;
    let new_dists = parse_assignments(&args.dists, "--dist")?;
    let train_ds = dataset_from_model_schema(
        &mf,
        args.train_data.as_deref(),
        &train_dists,
        needs_response,
    )?;
    let (fitted, warning) = from_model_file(&mf, &train_ds)?;
    if let Some(w) = warning {
        eprintln!("warning: {w}");
    }
    let new_ds = dataset_from_model_schema(&mf, args.data.as_deref(), &new_dists, false)?;
    let kernels = kernel_map(&mf)?;

    let csv = match &fitted {
        FittedModel::Prototypes { model, .. } => {
            let coords = encode_rows(&fitted, &train_ds, &new_ds, &kernels, args.encode_lambda)?;
            let mut out = String::new();
            let _ = write!(out, "row");
            for j in 1..=model.k() {
                let _ = write!(out, ",a_{j}");
            }
            let _ = writeln!(out);
            for (i, w) in coords.iter().enumerate() {
                let _ = write!(out, "{i}");
                for v in w.as_slice() {
                    let _ = write!(out, ",{v}");
                }
                let _ = writeln!(out);
            }
            out
        }
        _ => {
            let preds = predict_rows(&fitted, &train_ds, &new_ds, &kernels, args.encode_lambda)?;
            predictions_csv(&train_ds, &preds)?
        }
    };
    write_atomic(&args.out, csv.as_bytes())
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<T>()
                .map_err(|_| CliError::config(format!("cannot parse {what} list entry '{x}'")))
        })
        .collect()
}

fn cmd_evaluate(args: EvalArgs) -> Result<()> {
    let cfg = ConfigFile::load(args.config.as_deref())?;
    let out_path = args.out.clone();
    let grid_k = args.grid_k.clone().or(cfg.grid_k.clone());
    let grid_lambda = args.grid_lambda.clone().or(cfg.grid_lambda.clone());

    let csv = if let Some(model_path) = &args.model {
        evaluate_model(&args, model_path)?
    } else if grid_k.is_some() || grid_lambda.is_some() {
        evaluate_grid(&args, &cfg, grid_k.as_deref(), grid_lambda.as_deref())?
    } else {
        evaluate_split(&args, &cfg)?
    };
    write_atomic(&out_path, csv.as_bytes())
}

/// Mode A: score an existing model on labeled data.
fn evaluate_model(args: &EvalArgs, model_path: &Path) -> Result<String> {
    let mf = load_model(model_path)?;
    if mf.kind == "prototypal" || mf.kind == "archetypal" {
        return Err(CliError::config(
            "evaluate needs a regression model; unsupervised models have nothing to score",
        ));
    }
    let train_dists = parse_assignments(&args.train_dists, "--train-dist")?;
    let eval_dists = parse_assignments(&args.schema.dists, "--dist")?;
    let train_ds = dataset_from_model_schema(&mf, args.train_data.as_deref(), &train_dists, true)?;
    let (fitted, warning) = from_model_file(&mf, &train_ds)?;
    if let Some(w) = warning {
        eprintln!("warning: {w}");
    }
    let eval_ds = dataset_from_model_schema(&mf, args.schema.data.as_deref(), &eval_dists, true)?;
    let kernels = kernel_map(&mf)?;
    let preds = predict_rows(&fitted, &train_ds, &eval_ds, &kernels, None)?;
    let metrics = score(
        &preds,
        eval_ds.response.as_ref().expect("response loaded"),
        train_ds.response.as_ref().expect("response loaded"),
    )?;
    Ok(metrics_csv("", &metrics))
}

fn required_hypers(args: &EvalArgs, cfg: &ConfigFile) -> Result<(Vec<usize>, Vec<f64>)> {
    let ks = if args.k.is_empty() {
        cfg.k.clone().unwrap_or_default()
    } else {
        args.k.clone()
    };
    if ks.is_empty() {
        return Err(CliError::config("--k is required"));
    }
    let lambdas = if args.lambda.is_empty() {
        cfg.lambda.clone().unwrap_or_else(|| vec![0.0])
    } else {
        args.lambda.clone()
    };
    Ok((ks, lambdas))
}

/// Mode C: stratified split, fit on the training side, score both sides.
fn evaluate_split(args: &EvalArgs, cfg: &ConfigFile) -> Result<String> {
    let schema = merged_schema(&args.schema, cfg);
    let ds = build_dataset(&schema, true)?;
    let resp = ds
        .response
        .as_ref()
        .ok_or_else(|| CliError::config("evaluate needs a --response block"))?;
    let kernels = parse_kernels(&schema.kernels)?;
    let (ks, lambdas) = required_hypers(args, cfg)?;
    let opts = fit_options(
        args.seed.or(cfg.seed),
        args.tol.or(cfg.tol),
        args.max_iter.or(cfg.max_iter),
    );
    let frac = args.train_frac.or(cfg.train_frac).unwrap_or(0.7);

    let (train_idx, test_idx) = match resp.labels() {
        Some(labels) => stratified_split(&labels, frac, opts.seed)?,
        None => {
            // No classes to stratify over: plain shuffled split.
            let mut idx: Vec<usize> = (0..ds.n).collect();
            let mut rng = prototypal::rng::SplitMix64::new(opts.seed);
            rng.shuffle(&mut idx);
            let take = (frac * ds.n as f64).round() as usize;
            let (a, b) = idx.split_at(take.min(ds.n));
            let mut a = a.to_vec();
            let mut b = b.to_vec();
            a.sort_unstable();
            b.sort_unstable();
            (a, b)
        }
    };
    let train = ds.select(&train_idx);
    let test = ds.select(&test_idx);

    let fitted = fit_dataset(&train, Method::Prototypal, &ks, &lambdas, &kernels, &opts)?;
    let train_resp = train.response.as_ref().expect("response present");

    let mut out = String::new();
    let preds_train = predict_rows(&fitted, &train, &train, &kernels, None)?;
    out += &metrics_csv("train", &score(&preds_train, train_resp, train_resp)?);
    let preds_test = predict_rows(&fitted, &train, &test, &kernels, None)?;
    out += &metrics_csv(
        "test",
        &score(
            &preds_test,
            test.response.as_ref().expect("response"),
            train_resp,
        )?,
    );
    if let FittedModel::Multiple(m) = &fitted {
        for (block, tau) in train.predictors.iter().zip(m.tau()) {
            let _ = writeln!(out, "tau,{},{tau}", block.name);
        }
    }
    Ok(out)
}

/// Mode B: cross-validated grid search over (k, lambda), reporting every
/// cell and the best one.
fn evaluate_grid(
    args: &EvalArgs,
    cfg: &ConfigFile,
    grid_k: Option<&str>,
    grid_lambda: Option<&str>,
) -> Result<String> {
    let schema = merged_schema(&args.schema, cfg);
    let ds = build_dataset(&schema, true)?;
    let resp = ds
        .response
        .as_ref()
        .ok_or_else(|| CliError::config("grid search needs a --response block"))?;
    let kernels = parse_kernels(&schema.kernels)?;
    let opts = fit_options(
        args.seed.or(cfg.seed),
        args.tol.or(cfg.tol),
        args.max_iter.or(cfg.max_iter),
    );
    let ks: Vec<usize> = match grid_k {
        Some(s) => parse_list(s, "--grid-k")?,
        None => required_hypers(args, cfg)?.0,
    };
    let lambdas: Vec<f64> = match grid_lambda {
        Some(s) => parse_list(s, "--grid-lambda")?,
        None => required_hypers(args, cfg)?.1,
    };
    let folds = args.folds.or(cfg.folds).unwrap_or(5);
    let labels = resp.labels();
    let classify_mode = labels.is_some();
    let fold_sets = cv_folds(labels.as_deref(), ds.n, folds, opts.seed)?;

    let mut out = String::new();
    let metric_name = if classify_mode { "accuracy" } else { "rmse" };
    // best = (score, k, lambda); accuracy maximizes, rmse minimizes.
    let mut best: Option<(f64, usize, f64)> = None;
    for &k in &ks {
        for &lambda in &lambdas {
            let mut scores = Vec::with_capacity(folds);
            for fold in &fold_sets {
                let train_idx: Vec<usize> = (0..ds.n).filter(|i| !fold.contains(i)).collect();
                let train = ds.select(&train_idx);
                let val = ds.select(fold);
                let fitted =
                    fit_dataset(&train, Method::Prototypal, &[k], &[lambda], &kernels, &opts)?;
                let preds = predict_rows(&fitted, &train, &val, &kernels, None)?;
                let m = score(
                    &preds,
                    val.response.as_ref().expect("response"),
                    train.response.as_ref().expect("response"),
                )?;
                scores.push(if classify_mode {
                    m.accuracy.expect("classification metric")
                } else {
                    m.rmse.expect("regression metric")
                });
            }
            let mean = scores.iter().sum::<f64>() / scores.len() as f64;
            let _ = writeln!(out, "grid,{k},{lambda},{metric_name},{mean}");
            let better = match best {
                None => true,
                Some((b, _, _)) => {
                    if classify_mode {
                        mean > b
                    } else {
                        mean < b
                    }
                }
            };
            if better {
                best = Some((mean, k, lambda));
            }
        }
    }
    let (score_v, k, lambda) = best.expect("grid is non-empty");
    let _ = writeln!(out, "best,{k},{lambda},{metric_name},{score_v}");
    Ok(out)
}

fn cmd_gram(args: GramArgs) -> Result<()> {
    let ds = build_dataset(&args.schema, true)?;
    let kernels = parse_kernels(&args.schema.kernels)?;
    let (pred_kernels, resp_kernel) = resolve_kernels(&ds, &kernels)?;
    let (block, spec) = match &args.block {
        None => (&ds.predictors[0], pred_kernels[0].clone()),
        Some(name) => {
            if let Some(pos) = ds.predictors.iter().position(|b| &b.name == name) {
                (&ds.predictors[pos], pred_kernels[pos].clone())
            } else if ds.response.as_ref().map(|b| &b.name) == Some(name) {
                (
                    ds.response.as_ref().expect("matched"),
                    resp_kernel.expect("response kernel resolved"),
                )
            } else {
                return Err(CliError::config(format!("no block named '{name}'")));
            }
        }
    };
    let gram = block.gram(&spec)?;
    let (rows, hash) = crate::data::fingerprint(&[block]);
    let file = GramFile {
        schema_version: crate::model_file::SCHEMA_VERSION,
        kind: "gram".into(),
        provenance: gram.provenance().to_string(),
        fingerprint: crate::model_file::Fingerprint { rows, hash },
        gram: (0..gram.n()).map(|i| gram.row(i).to_vec()).collect(),
    };
    save_gram(&args.out, &file)
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let mf = load_model(&args.model)?;
    let needs_response = mf.kind != "prototypal" && mf.kind != "archetypal";
    let train_dists = parse_assignments(&args.train_dists, "--train-dist")?;
    let train_ds = dataset_from_model_schema(
        &mf,
        args.train_data.as_deref(),
        &train_dists,
        needs_response,
    )?;
    let (fitted, warning) = from_model_file(&mf, &train_ds)?;
    if let Some(w) = warning {
        eprintln!("warning: {w}");
    }
    let format = ReportFormat::parse(args.report.as_deref().unwrap_or("svg"))?;
    let kernels = kernel_map(&mf)?;

    let rendered = match &fitted {
        FittedModel::Prototypes { model, .. } => {
            let block = &train_ds.predictors[0];
            if block.kind_str() != "vector" || block.dim() > 2 {
                return Err(CliError::config(format!(
                    "cannot draw this model; {SUPPORTED_REPORTS}"
                )));
            }
            let points: Vec<Vec<f64>> = (0..block.len())
                .map(|i| block.row(i).expect("vector block").to_vec())
                .collect();
            let prototypes = materialize_rows(model.b(), block)?;
            // Reconstructions x̂_i = Σ_j a_ij u_j.
            let recon: Vec<Vec<f64>> = (0..block.len())
                .map(|i| {
                    let ai = model.point_weights(i);
                    let mut x = vec![0.0; block.dim()];
                    for (w, u) in ai.iter().zip(&prototypes) {
                        for (xc, uc) in x.iter_mut().zip(u) {
                            *xc += w * uc;
                        }
                    }
                    x
                })
                .collect();
            render_scatter(&points, &prototypes, &recon, format)
        }
        FittedModel::Simple(model)
            if is_1d_vector(&train_ds.predictors[0])
                && train_ds.response.as_ref().is_some_and(is_1d_vector) =>
        {
            let xb = &train_ds.predictors[0];
            let yb = train_ds.response.as_ref().expect("response");
            let data: Vec<(f64, f64)> = (0..xb.len())
                .map(|i| (xb.row(i).expect("1d")[0], yb.row(i).expect("1d")[0]))
                .collect();
            let (lo, hi) = data
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(x, _)| {
                    (lo.min(x), hi.max(x))
                });
            let grid: Vec<f64> = (0..200)
                .map(|i| lo + (hi - lo) * i as f64 / 199.0)
                .collect();
            let grid_block = FeatureBlock {
                name: xb.name.clone(),
                data: BlockData::Vector {
                    dim: 1,
                    values: grid.clone(),
                    columns: match &xb.data {
                        BlockData::Vector { columns, .. } => columns.clone(),
                        _ => unreachable!(),
                    },
                },
            };
            let grid_ds = Dataset::new(vec![grid_block], None)?;
            let preds = predict_rows(&fitted, &train_ds, &grid_ds, &kernels, None)?;
            let y_mat = block_rows_mat(yb)?;
            let curve: Vec<(f64, f64)> = grid
                .iter()
                .zip(&preds)
                .map(|(x, w)| Ok((*x, w.mix_rows(&y_mat)?[0])))
                .collect::<Result<_>>()?;
            let us = materialize_rows(model.x_model().b(), xb)?;
            let vs = materialize_rows(model.c(), yb)?;
            let prototypes: Vec<(f64, f64)> =
                us.iter().zip(&vs).map(|(u, v)| (u[0], v[0])).collect();
            render_curve(&data, &curve, &prototypes, format)
        }
        FittedModel::Simple(_) | FittedModel::Multiple(_) => {
            let resp = train_ds.response.as_ref().expect("regression response");
            let Some((labels, true_classes)) = onehot_rows(resp) else {
                return Err(CliError::config(format!(
                    "cannot draw this model; {SUPPORTED_REPORTS}"
                )));
            };
            if labels.len() != 3 {
                return Err(CliError::config(format!(
                    "barycentric plots need exactly 3 classes; {SUPPORTED_REPORTS}"
                )));
            }
            let preds = predict_rows(&fitted, &train_ds, &train_ds, &kernels, None)?;
            let label_mat = block_rows_mat(resp)?;
            let points: Vec<(Vec<f64>, usize)> = preds
                .iter()
                .zip(&true_classes)
                .map(|(w, &class)| Ok((class_probabilities(w, &label_mat)?, class)))
                .collect::<Result<_>>()?;
            let mut prototypes = Vec::new();
            match &fitted {
                FittedModel::Simple(m) => {
                    prototypes.extend(materialize_rows(m.c(), resp)?);
                }
                FittedModel::Multiple(m) => {
                    for part in m.parts() {
                        prototypes.extend(materialize_rows(&part.c, resp)?);
                    }
                }
                FittedModel::Prototypes { .. } => unreachable!(),
            }
            render_ternary(&labels, &points, &prototypes, format)
        }
    };
    write_atomic(&args.out, rendered.as_bytes())
}

fn is_1d_vector(b: &FeatureBlock) -> bool {
    b.kind_str() == "vector" && b.dim() == 1
}
