//! Orchestration shared by the CLI commands and the acceptance suite:
//! Gram assembly, fit dispatch, prediction on new rows, model-file
//! conversion and evaluation metrics.

use std::collections::HashMap;

use prototypal::archetypes::{fit_archetypal, fit_prototypal, FitOptions, PrototypeModel};
use prototypal::gram::{embed_inner, GramMatrix};
use prototypal::kernel::kernel_eval;
use prototypal::linalg::Mat;
use prototypal::regression::{
    classify, fit_multiple, fit_simple, MultipleRegressionModel, PredictorPart, ResponseWeights,
    SimpleRegressionModel,
};
use prototypal::simplex::SimplexWeights;
use prototypal::KernelSpec;

use crate::data::{fingerprint, BlockData, Dataset, FeatureBlock};
use crate::error::{CliError, Result};
use crate::model_file::{
    mat_transposed_rows, rows_to_mat_transposed, BlockSchema, Fingerprint, KernelSpecEntry,
    ModelFile, SCHEMA_VERSION,
};

/// Unsupervised fitting method.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Prototypal,
    Archetypal,
}

/// A fitted model of any supported kind.
#[derive(Debug, Clone)]
pub enum FittedModel {
    Prototypes {
        model: PrototypeModel,
        archetypal: bool,
    },
    Simple(SimpleRegressionModel),
    Multiple(MultipleRegressionModel),
}

impl FittedModel {
    pub fn kind(&self) -> &'static str {
        match self {
            FittedModel::Prototypes {
                archetypal: true, ..
            } => "archetypal",
            FittedModel::Prototypes {
                archetypal: false, ..
            } => "prototypal",
            FittedModel::Simple(_) => "simple_regression",
            FittedModel::Multiple(_) => "multiple_regression",
        }
    }
}

/// Per-block kernel choices; blocks without an assignment use the linear
/// kernel.
pub fn resolve_kernels(
    ds: &Dataset,
    assignments: &HashMap<String, KernelSpec>,
) -> Result<(Vec<KernelSpec>, Option<KernelSpec>)> {
    let mut known: Vec<&str> = ds.predictors.iter().map(|b| b.name.as_str()).collect();
    if let Some(r) = &ds.response {
        known.push(&r.name);
    }
    for name in assignments.keys() {
        if !known.contains(&name.as_str()) {
            return Err(CliError::config(format!(
                "kernel assigned to unknown block '{name}'"
            )));
        }
    }
    let pick = |b: &FeatureBlock| {
        assignments
            .get(&b.name)
            .cloned()
            .unwrap_or(KernelSpec::Linear)
    };
    let preds = ds.predictors.iter().map(pick).collect();
    let resp = ds.response.as_ref().map(pick);
    Ok((preds, resp))
}

/// Broadcasts a one-element list to `m` entries, passes an `m`-element list
/// through, and rejects anything else.
pub fn broadcast<T: Clone>(values: &[T], m: usize, what: &str) -> Result<Vec<T>> {
    match values.len() {
        1 => Ok(vec![values[0].clone(); m]),
        l if l == m => Ok(values.to_vec()),
        l => Err(CliError::config(format!(
            "need 1 or {m} values for {what}, got {l}"
        ))),
    }
}

/// Fits the model the dataset shape calls for: unsupervised analysis of a
/// single predictor when there is no response, simple regression for one
/// predictor plus response, multiple regression otherwise.
pub fn fit_dataset(
    ds: &Dataset,
    method: Method,
    ks: &[usize],
    lambdas: &[f64],
    kernels: &HashMap<String, KernelSpec>,
    opts: &FitOptions,
) -> Result<FittedModel> {
    if ds.predictors.is_empty() {
        return Err(CliError::config("need at least one predictor block"));
    }
    let m = ds.predictors.len();
    let ks = broadcast(ks, m, "--k")?;
    let lambdas = broadcast(lambdas, m, "--lambda")?;
    for &k in &ks {
        if k == 0 || k > ds.n {
            return Err(CliError::config(format!(
                "k = {k} must satisfy 1 <= k <= n = {}",
                ds.n
            )));
        }
    }
    for &l in &lambdas {
        if !l.is_finite() || l < 0.0 {
            return Err(CliError::config("lambda must be finite and non-negative"));
        }
    }
    let (pred_kernels, resp_kernel) = resolve_kernels(ds, kernels)?;

    match &ds.response {
        None => {
            if m != 1 {
                return Err(CliError::config(
                    "an unsupervised fit takes exactly one predictor block",
                ));
            }
            let g = ds.predictors[0].gram(&pred_kernels[0])?;
            let model = match method {
                Method::Archetypal => {
                    if lambdas[0] != 0.0 {
                        return Err(CliError::config(
                            "archetypal analysis has no penalty; drop --lambda or use --method prototypal",
                        ));
                    }
                    fit_archetypal(&g, ks[0], opts)?
                }
                Method::Prototypal => fit_prototypal(&g, ks[0], lambdas[0], opts)?,
            };
            Ok(FittedModel::Prototypes {
                model,
                archetypal: method == Method::Archetypal,
            })
        }
        Some(resp) => {
            let gy = resp.gram(&resp_kernel.expect("response kernel resolved"))?;
            if m == 1 {
                let gx = ds.predictors[0].gram(&pred_kernels[0])?;
                let model = fit_simple(&gx, &gy, ks[0], lambdas[0], opts)?;
                Ok(FittedModel::Simple(model))
            } else {
                let gxs = ds
                    .predictors
                    .iter()
                    .zip(&pred_kernels)
                    .map(|(b, spec)| b.gram(spec))
                    .collect::<Result<Vec<_>>>()?;
                let model = fit_multiple(&gxs, &gy, &ks, &lambdas, opts)?;
                Ok(FittedModel::Multiple(model))
            }
        }
    }
}

/// Inner products of every new observation against the training block
/// (`g0` rows) and with itself (`g00`).
pub fn cross_products(
    train: &FeatureBlock,
    new: &FeatureBlock,
    spec: &KernelSpec,
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    if train.kind_str() != new.kind_str() || train.dim() != new.dim() {
        return Err(CliError::data(format!(
            "block '{}': incoming data does not match the training layout",
            train.name
        )));
    }
    let n = train.len();
    let mut g0 = Vec::with_capacity(new.len());
    let mut g00 = Vec::with_capacity(new.len());
    match (&train.data, &new.data) {
        (BlockData::Distribution { dists: tr, .. }, BlockData::Distribution { dists: nw, .. }) => {
            for d_new in nw {
                let mut row = Vec::with_capacity(n);
                for d_tr in tr {
                    row.push(embed_inner(spec, d_new, d_tr)?);
                }
                g0.push(row);
                g00.push(embed_inner(spec, d_new, d_new)?);
            }
        }
        _ => {
            for i in 0..new.len() {
                let x_new = new.row(i).expect("vector-like block");
                let mut row = Vec::with_capacity(n);
                for j in 0..n {
                    row.push(kernel_eval(
                        spec,
                        x_new,
                        train.row(j).expect("vector-like"),
                    )?);
                }
                g0.push(row);
                g00.push(kernel_eval(spec, x_new, x_new)?);
            }
        }
    }
    Ok((g0, g00))
}

/// Predictions for every row of `new_ds`, as mixture weights over the
/// training responses. `encode_lambda` overrides the training penalty at
/// encoding time when given.
pub fn predict_rows(
    fitted: &FittedModel,
    train_ds: &Dataset,
    new_ds: &Dataset,
    kernels: &HashMap<String, KernelSpec>,
    encode_lambda: Option<f64>,
) -> Result<Vec<ResponseWeights>> {
    let (pred_kernels, _) = resolve_kernels(train_ds, kernels)?;
    match fitted {
        FittedModel::Prototypes { .. } => Err(CliError::config(
            "this model has no response; use it to encode barycentric coordinates instead",
        )),
        FittedModel::Simple(model) => {
            let (g0s, g00s) = cross_products(
                &train_ds.predictors[0],
                &new_ds.predictors[0],
                &pred_kernels[0],
            )?;
            let mut out = Vec::with_capacity(g0s.len());
            for (g0, g00) in g0s.iter().zip(&g00s) {
                let a0 = match encode_lambda {
                    Some(l) => model.x_model().encode_with_lambda(g0, *g00, l)?,
                    None => model.x_model().encode(g0, *g00)?,
                };
                let w = model.c().tr_mul_vec(a0.as_slice());
                out.push(ResponseWeights::new(w)?);
            }
            Ok(out)
        }
        FittedModel::Multiple(model) => {
            let m = model.m();
            let mut all_g0: Vec<Vec<Vec<f64>>> = Vec::with_capacity(m);
            let mut all_g00: Vec<Vec<f64>> = Vec::with_capacity(m);
            for l in 0..m {
                let (g0s, g00s) = cross_products(
                    &train_ds.predictors[l],
                    &new_ds.predictors[l],
                    &pred_kernels[l],
                )?;
                all_g0.push(g0s);
                all_g00.push(g00s);
            }
            let rows = all_g0[0].len();
            let mut out = Vec::with_capacity(rows);
            for r in 0..rows {
                let mut w = vec![0.0; model.n()];
                for (l, part) in model.parts().iter().enumerate() {
                    let a0 = match encode_lambda {
                        Some(lam) => {
                            part.model
                                .encode_with_lambda(&all_g0[l][r], all_g00[l][r], lam)?
                        }
                        None => part.model.encode(&all_g0[l][r], all_g00[l][r])?,
                    };
                    let wl = part.c.tr_mul_vec(a0.as_slice());
                    let tau_l = model.tau()[l];
                    for (acc, v) in w.iter_mut().zip(&wl) {
                        *acc += tau_l * v;
                    }
                }
                out.push(ResponseWeights::new(w)?);
            }
            Ok(out)
        }
    }
}

/// Barycentric coordinates of new rows under an unsupervised model.
pub fn encode_rows(
    fitted: &FittedModel,
    train_ds: &Dataset,
    new_ds: &Dataset,
    kernels: &HashMap<String, KernelSpec>,
    encode_lambda: Option<f64>,
) -> Result<Vec<SimplexWeights>> {
    let FittedModel::Prototypes { model, .. } = fitted else {
        return Err(CliError::config("encoding applies to unsupervised models"));
    };
    let (pred_kernels, _) = resolve_kernels(train_ds, kernels)?;
    let (g0s, g00s) = cross_products(
        &train_ds.predictors[0],
        &new_ds.predictors[0],
        &pred_kernels[0],
    )?;
    g0s.iter()
        .zip(&g00s)
        .map(|(g0, g00)| {
            let w = match encode_lambda {
                Some(l) => model.encode_with_lambda(g0, *g00, l)?,
                None => model.encode(g0, *g00)?,
            };
            Ok(w)
        })
        .collect()
}

fn block_schema(b: &FeatureBlock, role: &str) -> BlockSchema {
    let (columns, categories) = match &b.data {
        BlockData::Vector { columns, .. } => (columns.clone(), vec![]),
        BlockData::OneHot {
            column, categories, ..
        } => (vec![column.clone()], categories.clone()),
        BlockData::Distribution { .. } => (vec![], vec![]),
    };
    BlockSchema {
        name: b.name.clone(),
        role: role.to_string(),
        kind: b.kind_str().to_string(),
        columns,
        categories,
        dim: b.dim(),
    }
}

/// Packs a fitted model plus its training dataset into the on-disk document.
pub fn to_model_file(
    fitted: &FittedModel,
    ds: &Dataset,
    kernels: &HashMap<String, KernelSpec>,
) -> Result<ModelFile> {
    let (pred_kernels, resp_kernel) = resolve_kernels(ds, kernels)?;
    let mut schema: Vec<BlockSchema> = ds
        .predictors
        .iter()
        .map(|b| block_schema(b, "predictor"))
        .collect();
    let mut kernel_specs: Vec<KernelSpecEntry> = ds
        .predictors
        .iter()
        .zip(&pred_kernels)
        .map(|(b, s)| KernelSpecEntry::from_spec(&b.name, s))
        .collect();
    if let Some(resp) = &ds.response {
        schema.push(block_schema(resp, "response"));
        kernel_specs.push(KernelSpecEntry::from_spec(
            &resp.name,
            &resp_kernel.expect("response kernel resolved"),
        ));
    }
    let blocks: Vec<&FeatureBlock> = ds.predictors.iter().chain(ds.response.iter()).collect();
    let (rows, hash) = fingerprint(&blocks);

    let (lambda, k, a, b, c, tau) = match fitted {
        FittedModel::Prototypes { model, .. } => (
            vec![model.lambda()],
            vec![model.k()],
            vec![mat_transposed_rows(model.a())],
            vec![mat_transposed_rows(model.b())],
            vec![],
            vec![],
        ),
        FittedModel::Simple(model) => (
            vec![model.x_model().lambda()],
            vec![model.k()],
            vec![mat_transposed_rows(model.x_model().a())],
            vec![mat_transposed_rows(model.x_model().b())],
            vec![mat_transposed_rows(model.c())],
            vec![],
        ),
        FittedModel::Multiple(model) => {
            let mut la = Vec::new();
            let mut kk = Vec::new();
            let mut aa = Vec::new();
            let mut bb = Vec::new();
            let mut cc = Vec::new();
            for part in model.parts() {
                la.push(part.model.lambda());
                kk.push(part.model.k());
                aa.push(mat_transposed_rows(part.model.a()));
                bb.push(mat_transposed_rows(part.model.b()));
                cc.push(mat_transposed_rows(&part.c));
            }
            (la, kk, aa, bb, cc, model.tau().to_vec())
        }
    };

    Ok(ModelFile {
        schema_version: SCHEMA_VERSION,
        kind: fitted.kind().to_string(),
        schema,
        kernel_specs,
        lambda,
        k,
        a,
        b,
        c,
        tau,
        fingerprint: Fingerprint { rows, hash },
    })
}

/// Validates that a dataset matches the schema a model was trained with.
pub fn check_schema(mf: &ModelFile, ds: &Dataset, need_response: bool) -> Result<()> {
    let preds: Vec<&BlockSchema> = mf.schema.iter().filter(|b| b.role == "predictor").collect();
    if preds.len() != ds.predictors.len() {
        return Err(CliError::data(format!(
            "model expects {} predictor blocks, dataset has {}",
            preds.len(),
            ds.predictors.len()
        )));
    }
    for (want, got) in preds.iter().zip(&ds.predictors) {
        if want.name != got.name || want.kind != got.kind_str() || want.dim != got.dim() {
            return Err(CliError::data(format!(
                "block '{}' does not match the model schema (expected {} '{}' of width {})",
                got.name, want.kind, want.name, want.dim
            )));
        }
    }
    let resp_schema = mf.schema.iter().find(|b| b.role == "response");
    if need_response {
        let (Some(want), Some(got)) = (resp_schema, &ds.response) else {
            return Err(CliError::data(
                "model/dataset disagree on having a response",
            ));
        };
        if want.name != got.name || want.kind != got.kind_str() || want.dim != got.dim() {
            return Err(CliError::data(format!(
                "response block '{}' does not match the model schema",
                got.name
            )));
        }
    }
    Ok(())
}

/// Rebuilds the runtime model from a document plus the training dataset.
/// Returns a warning string (not an error) when the training-data
/// fingerprint disagrees with the stored one.
pub fn from_model_file(
    mf: &ModelFile,
    train_ds: &Dataset,
) -> Result<(FittedModel, Option<String>)> {
    let needs_response = mf.kind != "prototypal" && mf.kind != "archetypal";
    check_schema(mf, train_ds, needs_response)?;

    let blocks: Vec<&FeatureBlock> = train_ds
        .predictors
        .iter()
        .chain(train_ds.response.iter())
        .collect();
    let (rows, hash) = fingerprint(&blocks);
    let warning = if rows != mf.fingerprint.rows || hash != mf.fingerprint.hash {
        Some(format!(
            "training data fingerprint mismatch: model was fitted on {} rows ({}), supplied {} rows ({}); proceeding anyway",
            mf.fingerprint.rows, mf.fingerprint.hash, rows, hash
        ))
    } else {
        None
    };

    let kernels = kernel_map(mf)?;
    let (pred_kernels, resp_kernel) = resolve_kernels(train_ds, &kernels)?;
    let m = train_ds.predictors.len();
    if mf.a.len() != mf.b.len() || mf.k.len() != mf.lambda.len() || mf.a.len() != mf.k.len() {
        return Err(CliError::data("model file matrices are inconsistent"));
    }

    let rebuild_part = |l: usize, g: &GramMatrix| -> Result<PrototypeModel> {
        let a = rows_to_mat_transposed(&mf.a[l])?;
        let b = rows_to_mat_transposed(&mf.b[l])?;
        Ok(PrototypeModel::rebuild(a, b, mf.lambda[l], g)?)
    };

    let fitted = match mf.kind.as_str() {
        "prototypal" | "archetypal" => {
            if m != 1 {
                return Err(CliError::data("unsupervised model expects one predictor"));
            }
            let g = train_ds.predictors[0].gram(&pred_kernels[0])?;
            FittedModel::Prototypes {
                model: rebuild_part(0, &g)?,
                archetypal: mf.kind == "archetypal",
            }
        }
        "simple_regression" => {
            let gx = train_ds.predictors[0].gram(&pred_kernels[0])?;
            let gy = train_ds
                .response
                .as_ref()
                .expect("schema checked")
                .gram(&resp_kernel.expect("response kernel"))?;
            let x_model = rebuild_part(0, &gx)?;
            let c =
                rows_to_mat_transposed(mf.c.first().ok_or_else(|| {
                    CliError::data("simple regression model lacks mixing weights")
                })?)?;
            FittedModel::Simple(SimpleRegressionModel::rebuild(x_model, c, &gy)?)
        }
        "multiple_regression" => {
            if mf.c.len() != m || mf.tau.len() != m {
                return Err(CliError::data(
                    "multiple regression model file is inconsistent",
                ));
            }
            let mut parts = Vec::with_capacity(m);
            for l in 0..m {
                let g = train_ds.predictors[l].gram(&pred_kernels[l])?;
                let model = rebuild_part(l, &g)?;
                let c = rows_to_mat_transposed(&mf.c[l])?;
                parts.push(PredictorPart { model, c });
            }
            FittedModel::Multiple(MultipleRegressionModel::rebuild(parts, mf.tau.clone())?)
        }
        other => return Err(CliError::data(format!("unknown model kind '{other}'"))),
    };
    Ok((fitted, warning))
}

/// Kernel assignments stored in a model file, keyed by block name.
pub fn kernel_map(mf: &ModelFile) -> Result<HashMap<String, KernelSpec>> {
    let mut out = HashMap::new();
    for entry in &mf.kernel_specs {
        out.insert(entry.block.clone(), entry.to_spec()?);
    }
    Ok(out)
}

/// Evaluation metrics; which fields are present depends on the response
/// kind.
#[derive(Debug, Clone, Default)]
pub struct Metrics {
    pub n: usize,
    pub accuracy: Option<f64>,
    /// `confusion[actual][predicted]`, aligned with `classes`.
    pub confusion: Option<Vec<Vec<usize>>>,
    pub classes: Vec<String>,
    pub rmse: Option<f64>,
}

/// Scores predictions against a labeled response block. One-hot responses
/// get accuracy and a confusion matrix, vector responses an RMSE over the
/// materialized predictions.
pub fn score(
    predictions: &[ResponseWeights],
    truth: &FeatureBlock,
    train_response: &FeatureBlock,
) -> Result<Metrics> {
    if predictions.len() != truth.len() {
        return Err(CliError::data("prediction/label counts differ"));
    }
    let mut metrics = Metrics {
        n: truth.len(),
        ..Metrics::default()
    };
    match (&train_response.data, &truth.data) {
        (BlockData::OneHot { categories, .. }, BlockData::OneHot { .. }) => {
            let c = categories.len();
            let label_mat = block_rows_mat(train_response)?;
            let truth_labels = truth.labels().expect("one-hot block");
            let mut confusion = vec![vec![0usize; c]; c];
            let mut hits = 0usize;
            for (w, &actual) in predictions.iter().zip(&truth_labels) {
                let predicted = classify(w, &label_mat)?;
                confusion[actual][predicted] += 1;
                if predicted == actual {
                    hits += 1;
                }
            }
            metrics.accuracy = Some(hits as f64 / truth.len() as f64);
            metrics.confusion = Some(confusion);
            metrics.classes = categories.clone();
        }
        (BlockData::Vector { .. }, BlockData::Vector { .. }) => {
            let train_mat = block_rows_mat(train_response)?;
            let mut sse = 0.0;
            for (i, w) in predictions.iter().enumerate() {
                let yhat = w.mix_rows(&train_mat)?;
                let y = truth.row(i).expect("vector block");
                sse += y
                    .iter()
                    .zip(&yhat)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>();
            }
            metrics.rmse = Some((sse / truth.len() as f64).sqrt());
        }
        _ => {
            return Err(CliError::config(
                "scoring needs a one-hot or vector response; distributional responses are reported as mixture weights only",
            ))
        }
    }
    Ok(metrics)
}

/// Rows of a vector or one-hot block as a matrix.
pub fn block_rows_mat(b: &FeatureBlock) -> Result<Mat> {
    let rows: Vec<Vec<f64>> = (0..b.len())
        .map(|i| {
            b.row(i)
                .map(<[f64]>::to_vec)
                .ok_or_else(|| CliError::config("distribution blocks cannot be materialized"))
        })
        .collect::<Result<_>>()?;
    Mat::from_rows(&rows).map_err(CliError::from)
}

/// Deterministic fold assignment for cross-validation: stratified by label
/// when available, round-robin over a shuffled ordering otherwise.
pub fn cv_folds(
    labels: Option<&[usize]>,
    n: usize,
    folds: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    if folds < 2 || folds > n {
        return Err(CliError::config("fold count must satisfy 2 <= folds <= n"));
    }
    let mut rng = prototypal::rng::SplitMix64::new(seed);
    let mut assignment = vec![Vec::new(); folds];
    match labels {
        Some(labels) => {
            let mut class_order: Vec<usize> = Vec::new();
            let mut per_class: HashMap<usize, Vec<usize>> = HashMap::new();
            for (i, &l) in labels.iter().enumerate() {
                if !per_class.contains_key(&l) {
                    class_order.push(l);
                }
                per_class.entry(l).or_default().push(i);
            }
            let mut next = 0usize;
            for class in class_order {
                let mut idx = per_class.remove(&class).expect("recorded");
                rng.shuffle(&mut idx);
                for i in idx {
                    assignment[next % folds].push(i);
                    next += 1;
                }
            }
        }
        None => {
            let mut idx: Vec<usize> = (0..n).collect();
            rng.shuffle(&mut idx);
            for (pos, i) in idx.into_iter().enumerate() {
                assignment[pos % folds].push(i);
            }
        }
    }
    for fold in &mut assignment {
        fold.sort_unstable();
    }
    Ok(assignment)
}
