//! Simple and multiple prototypal regression.
//!
//! Simple regression pairs every predictor prototype `u_j` with a response
//! prototype `v_j = Σ_i c_ij y_i`; the `c` weights minimize the squared
//! training error of `f̂(x) = Σ_j a_j(x) v_j`, expanded through the response
//! Gram matrix. Multiple regression fits one prototype model per predictor
//! and blends them with simplex-constrained importance coefficients `τ`,
//! alternating a `τ`-step and a block-coordinate `c`-step.
//!
//! Predictions are [`ResponseWeights`]: simplex mixtures over the training
//! responses. The caller materializes `ŷ = Σ_i w_i y_i` for vector responses,
//! reads class probabilities for one-hot responses, or keeps the mixture as
//! is for distributional responses — one code path for all three.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::archetypes::{
    compute_gb, compute_proto_gram, fit_prototypal, objective_with, update_b_inplace, FitOptions,
    PrototypeModel,
};
use crate::error::{Error, Result};
use crate::fmath;
use crate::gram::GramMatrix;
use crate::linalg::{dot, ksum, Mat};
use crate::simplex::{solve_simplex_qp_from, QuadraticSubproblem, SimplexWeights};

/// Cap on τ/c alternations in [`fit_multiple`].
const ALTERNATION_CAP: usize = 100;

/// A prediction: simplex weights over the `n` training responses.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseWeights {
    w: SimplexWeights,
}

impl ResponseWeights {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        Ok(ResponseWeights {
            w: SimplexWeights::new(w)?,
        })
    }

    pub fn weights(&self) -> &[f64] {
        self.w.as_slice()
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    /// Materializes `Σ_i w_i · rows_i` for row-major response vectors.
    pub fn mix_rows(&self, rows: &Mat) -> Result<Vec<f64>> {
        if rows.rows() != self.len() {
            return Err(Error::invalid("row count does not match weight length"));
        }
        Ok(rows.tr_mul_vec(self.w.as_slice()))
    }
}

/// Simple prototypal regression: one predictor, one response.
#[derive(Debug, Clone, PartialEq)]
pub struct SimpleRegressionModel {
    x_model: PrototypeModel,
    /// `k × n`; row `j` mixes the training responses into prototype `v_j`.
    c: Mat,
    gy_provenance: String,
    mixing_trace: Vec<f64>,
}

impl SimpleRegressionModel {
    pub fn x_model(&self) -> &PrototypeModel {
        &self.x_model
    }

    /// Response mixing weights, `k × n` with simplex rows.
    pub fn c(&self) -> &Mat {
        &self.c
    }

    pub fn k(&self) -> usize {
        self.x_model.k()
    }

    pub fn n(&self) -> usize {
        self.x_model.n()
    }

    /// Provenance descriptor of the response Gram used in fitting.
    pub fn gy_provenance(&self) -> &str {
        &self.gy_provenance
    }

    /// Objective values of the response-mixing solve, non-increasing.
    pub fn mixing_trace(&self) -> &[f64] {
        &self.mixing_trace
    }

    /// Reassembles a model from stored weights and the training Grams.
    pub fn rebuild(x_model: PrototypeModel, c: Mat, gy: &GramMatrix) -> Result<Self> {
        validate_mixing(&c, x_model.k(), x_model.n())?;
        if gy.n() != x_model.n() {
            return Err(Error::invalid("response Gram size does not match model"));
        }
        Ok(SimpleRegressionModel {
            x_model,
            c,
            gy_provenance: String::from(gy.provenance()),
            mixing_trace: Vec::new(),
        })
    }
}

/// Multiple prototypal regression: `m` predictors blended by importance
/// coefficients `τ` on the simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct MultipleRegressionModel {
    parts: Vec<PredictorPart>,
    tau: SimplexWeights,
    fit_trace: Vec<f64>,
}

/// One predictor's prototype model and its response mixing weights.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorPart {
    pub model: PrototypeModel,
    /// `k_l × n` simplex rows.
    pub c: Mat,
}

impl MultipleRegressionModel {
    pub fn m(&self) -> usize {
        self.parts.len()
    }

    pub fn n(&self) -> usize {
        self.parts[0].model.n()
    }

    pub fn parts(&self) -> &[PredictorPart] {
        &self.parts
    }

    /// Importance coefficients, one per predictor.
    pub fn tau(&self) -> &[f64] {
        self.tau.as_slice()
    }

    /// Objective after every τ/c alternation, non-increasing.
    pub fn fit_trace(&self) -> &[f64] {
        &self.fit_trace
    }

    pub fn rebuild(parts: Vec<PredictorPart>, tau: Vec<f64>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::invalid("need at least one predictor"));
        }
        let n = parts[0].model.n();
        for part in &parts {
            if part.model.n() != n {
                return Err(Error::invalid("predictors disagree on training size"));
            }
            validate_mixing(&part.c, part.model.k(), n)?;
        }
        if tau.len() != parts.len() {
            return Err(Error::invalid("tau length does not match predictor count"));
        }
        Ok(MultipleRegressionModel {
            parts,
            tau: SimplexWeights::new(tau)?,
            fit_trace: Vec::new(),
        })
    }
}

fn validate_mixing(c: &Mat, k: usize, n: usize) -> Result<()> {
    if c.rows() != k || c.cols() != n {
        return Err(Error::invalid("mixing weights must be k x n"));
    }
    for j in 0..k {
        SimplexWeights::new(c.row(j).to_vec())?;
    }
    Ok(())
}

/// Fits simple prototypal regression.
///
/// Runs the prototypal fit on the predictor Gram, then solves for the
/// response mixing weights by block-coordinate simplex QPs over the rows of
/// `c` (a convex problem), iterated until the relative objective change
/// drops below `opts.tol`.
pub fn fit_simple(
    gx: &GramMatrix,
    gy: &GramMatrix,
    k: usize,
    lambda: f64,
    opts: &FitOptions,
) -> Result<SimpleRegressionModel> {
    if gx.n() != gy.n() {
        return Err(Error::invalid(
            "predictor and response Grams differ in size",
        ));
    }
    let x_model = fit_prototypal(gx, k, lambda, opts)?;
    let (c, mixing_trace) = solve_mixing(gy, x_model.a(), opts)?;
    Ok(SimpleRegressionModel {
        x_model,
        c,
        gy_provenance: String::from(gy.provenance()),
        mixing_trace,
    })
}

/// Solves the response-mixing problem for fixed reconstruction weights `a`.
///
/// This is the same block-coordinate machinery as the prototype `B`-sweep
/// with zero locality penalty, run on the response Gram.
fn solve_mixing(gy: &GramMatrix, a: &Mat, opts: &FitOptions) -> Result<(Mat, Vec<f64>)> {
    let n = a.rows();
    let k = a.cols();
    let mut c = Mat::zeros(k, n);
    for j in 0..k {
        for x in c.row_mut(j).iter_mut() {
            *x = 1.0 / n as f64;
        }
    }
    let gc = compute_gb(gy, &c);
    let mc = compute_proto_gram(&c, &gc);
    let mut f = objective_with(gy, a, &gc, &mc, 0.0);
    if !f.is_finite() {
        return Err(Error::numerical("response objective is not finite"));
    }
    let mut trace = vec![f];
    for _ in 1..=opts.max_outer_iter {
        update_b_inplace(gy, a, 0.0, &mut c, opts)?;
        let gc = compute_gb(gy, &c);
        let mc = compute_proto_gram(&c, &gc);
        let f_new = objective_with(gy, a, &gc, &mc, 0.0);
        if !f_new.is_finite() {
            return Err(Error::numerical("response objective is not finite"));
        }
        trace.push(f_new);
        let converged = fmath::abs(f - f_new) <= opts.tol * (1.0 + fmath::abs(f_new));
        f = f_new;
        if converged {
            break;
        }
    }
    Ok((c, trace))
}

/// Predicts mixture weights for a new point of the predictor.
///
/// `g0x[i] = ⟨x₀, x_i⟩`, `g00x = ⟨x₀, x₀⟩`. The encoding uses the training
/// penalty; the result is `w = Σ_j a_j(x₀) · c_j`.
pub fn predict_simple(
    model: &SimpleRegressionModel,
    g0x: &[f64],
    g00x: f64,
) -> Result<ResponseWeights> {
    let a0 = model.x_model.encode(g0x, g00x)?;
    ResponseWeights::new(model.c.tr_mul_vec(a0.as_slice()))
}

/// Fits multiple prototypal regression.
///
/// Each predictor gets its own prototype fit (they may differ in `k` and
/// `λ`); the response mixing weights and the importance coefficients are then
/// found by alternating minimization, τ-step first, until the relative
/// objective change drops below `opts.tol` (at most 100 alternations).
pub fn fit_multiple(
    gx_list: &[GramMatrix],
    gy: &GramMatrix,
    k_list: &[usize],
    lambda_list: &[f64],
    opts: &FitOptions,
) -> Result<MultipleRegressionModel> {
    fit_multiple_impl(gx_list, gy, k_list, lambda_list, opts, None)
}

/// [`fit_multiple`] with the importance coefficients pinned to `tau`.
///
/// Only the response mixing weights are optimized; useful for probing how
/// the objective depends on the predictor blend.
pub fn fit_multiple_frozen_tau(
    gx_list: &[GramMatrix],
    gy: &GramMatrix,
    k_list: &[usize],
    lambda_list: &[f64],
    tau: &[f64],
    opts: &FitOptions,
) -> Result<MultipleRegressionModel> {
    fit_multiple_impl(gx_list, gy, k_list, lambda_list, opts, Some(tau))
}

fn fit_multiple_impl(
    gx_list: &[GramMatrix],
    gy: &GramMatrix,
    k_list: &[usize],
    lambda_list: &[f64],
    opts: &FitOptions,
    frozen_tau: Option<&[f64]>,
) -> Result<MultipleRegressionModel> {
    let m = gx_list.len();
    if m == 0 {
        return Err(Error::invalid("need at least one predictor"));
    }
    if k_list.len() != m || lambda_list.len() != m {
        return Err(Error::invalid(
            "k_list and lambda_list must have one entry per predictor",
        ));
    }
    let n = gy.n();
    for gx in gx_list {
        if gx.n() != n {
            return Err(Error::invalid(
                "all Gram matrices must share the training size",
            ));
        }
    }

    // Every per-predictor fit runs from the same user seed; duplicated
    // predictors therefore fit identically, which keeps the objective
    // invariant under reweighting them.
    let mut models = Vec::with_capacity(m);
    for l in 0..m {
        models.push(fit_prototypal(
            &gx_list[l],
            k_list[l],
            lambda_list[l],
            opts,
        )?);
    }

    // Per-predictor fixed quantities: AᵀA diagonals and A columns.
    let usage: Vec<Mat> = models.iter().map(|mo| gram_of_columns(mo.a())).collect();
    let columns: Vec<Vec<Vec<f64>>> = models
        .iter()
        .map(|mo| (0..mo.k()).map(|j| mo.a().col(j)).collect())
        .collect();

    // Mixing weights start uniform; W_l caches the per-point response
    // mixtures C_lᵀ a_i as rows.
    let mut cs: Vec<Mat> = models
        .iter()
        .map(|mo| {
            let mut c = Mat::zeros(mo.k(), n);
            for j in 0..mo.k() {
                for x in c.row_mut(j).iter_mut() {
                    *x = 1.0 / n as f64;
                }
            }
            c
        })
        .collect();
    let mut ws: Vec<Mat> = (0..m)
        .map(|l| mixture_rows(models[l].a(), &cs[l]))
        .collect();
    let mut tau = match frozen_tau {
        Some(t) => {
            if t.len() != m {
                return Err(Error::invalid("tau length does not match predictor count"));
            }
            SimplexWeights::new(t.to_vec())?
        }
        None => SimplexWeights::uniform(m)?,
    };

    let mut f = multiple_objective(gy, &ws, tau.as_slice());
    if !f.is_finite() {
        return Err(Error::numerical("regression objective is not finite"));
    }
    let mut trace = vec![f];

    for _ in 0..ALTERNATION_CAP {
        if frozen_tau.is_none() {
            tau = tau_step(gy, &ws, &tau, opts)?;
        }
        c_step(
            gy,
            &models,
            &usage,
            &columns,
            &mut cs,
            &mut ws,
            tau.as_slice(),
            opts,
        )?;

        let f_new = multiple_objective(gy, &ws, tau.as_slice());
        if !f_new.is_finite() {
            return Err(Error::numerical("regression objective is not finite"));
        }
        trace.push(f_new);
        let converged = fmath::abs(f - f_new) <= opts.tol * (1.0 + fmath::abs(f_new));
        f = f_new;
        if converged {
            break;
        }
    }

    let parts = models
        .into_iter()
        .zip(cs)
        .map(|(model, c)| PredictorPart { model, c })
        .collect();
    Ok(MultipleRegressionModel {
        parts,
        tau,
        fit_trace: trace,
    })
}

/// Predicts mixture weights from per-predictor inner products.
///
/// Each predictor is encoded with its own training penalty; the mixtures are
/// blended by τ.
pub fn predict_multiple(
    model: &MultipleRegressionModel,
    g0_list: &[&[f64]],
    g00_list: &[f64],
) -> Result<ResponseWeights> {
    let m = model.m();
    if g0_list.len() != m || g00_list.len() != m {
        return Err(Error::invalid("need one inner-product set per predictor"));
    }
    let n = model.n();
    let mut w = vec![0.0; n];
    for (l, part) in model.parts.iter().enumerate() {
        let tau_l = model.tau.as_slice()[l];
        let a0 = part.model.encode(g0_list[l], g00_list[l])?;
        let wl = part.c.tr_mul_vec(a0.as_slice());
        for (acc, v) in w.iter_mut().zip(&wl) {
            *acc += tau_l * v;
        }
    }
    ResponseWeights::new(w)
}

/// Predicted class index for a one-hot response: argmax of `labelsᵀ w`,
/// ties broken by the lowest index.
pub fn classify(w: &ResponseWeights, labels: &Mat) -> Result<usize> {
    let p = class_probabilities(w, labels)?;
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    Ok(best)
}

/// Predicted probability vector `labelsᵀ w` for a one-hot label matrix
/// (`n × classes`, rows aligned with the training responses).
pub fn class_probabilities(w: &ResponseWeights, labels: &Mat) -> Result<Vec<f64>> {
    if labels.rows() != w.len() {
        return Err(Error::invalid(
            "label rows do not align with training responses",
        ));
    }
    Ok(labels.tr_mul_vec(w.weights()))
}

/// `AᵀA`, mirrored exactly.
fn gram_of_columns(a: &Mat) -> Mat {
    let k = a.cols();
    let mut aa = Mat::zeros(k, k);
    for i in 0..a.rows() {
        let ai = a.row(i);
        for p in 0..k {
            if ai[p] == 0.0 {
                continue;
            }
            for q in p..k {
                let v = aa.get(p, q) + ai[p] * ai[q];
                aa.set(p, q, v);
                aa.set(q, p, v);
            }
        }
    }
    aa
}

/// `n × n` matrix with row `i` equal to `Cᵀ a_i`.
fn mixture_rows(a: &Mat, c: &Mat) -> Mat {
    let n = a.rows();
    let k = a.cols();
    let mut w = Mat::zeros(n, n);
    for i in 0..n {
        let ai = a.row(i);
        let wi = w.row_mut(i);
        for j in 0..k {
            let coeff = ai[j];
            if coeff == 0.0 {
                continue;
            }
            for (acc, v) in wi.iter_mut().zip(c.row(j)) {
                *acc += coeff * v;
            }
        }
    }
    w
}

/// `Σ_i ‖y_i − Σ_l τ_l Σ_h w_ih^{(l)} y_h‖²` in Gram form.
fn multiple_objective(gy: &GramMatrix, ws: &[Mat], tau: &[f64]) -> f64 {
    let n = gy.n();
    let mut terms = Vec::with_capacity(n);
    let mut r = vec![0.0; n];
    for i in 0..n {
        for x in r.iter_mut() {
            *x = 0.0;
        }
        for (l, w) in ws.iter().enumerate() {
            let t = tau[l];
            if t == 0.0 {
                continue;
            }
            for (acc, v) in r.iter_mut().zip(w.row(i)) {
                *acc += t * v;
            }
        }
        let hr = gy.mul_vec(&r);
        terms.push(gy.get(i, i) - 2.0 * hr[i] + dot(&r, &hr));
    }
    ksum(&terms)
}

/// Importance-coefficient step: a simplex QP over `τ` with
/// `Q[l][l'] = Σ_i w_i^{(l)} ᵀ H w_i^{(l')}` and `q[l] = −Σ_i h_iᵀ w_i^{(l)}`.
fn tau_step(
    gy: &GramMatrix,
    ws: &[Mat],
    tau: &SimplexWeights,
    opts: &FitOptions,
) -> Result<SimplexWeights> {
    let m = ws.len();
    let n = gy.n();
    // H W_lᵀ rows, reused for both Q and q.
    let mut hw: Vec<Mat> = Vec::with_capacity(m);
    for w in ws {
        let mut x = Mat::zeros(n, n);
        for i in 0..n {
            x.set_row(i, &gy.mul_vec(w.row(i)));
        }
        hw.push(x);
    }
    let mut q = Mat::zeros(m, m);
    for l in 0..m {
        for l2 in l..m {
            let mut acc = 0.0;
            for i in 0..n {
                acc += dot(ws[l].row(i), hw[l2].row(i));
            }
            q.set(l, l2, acc);
            q.set(l2, l, acc);
        }
    }
    let mut lin = vec![0.0; m];
    for l in 0..m {
        let mut acc = 0.0;
        for i in 0..n {
            acc += hw[l].get(i, i);
        }
        lin[l] = -acc;
    }
    let qp = QuadraticSubproblem::new_unchecked(&q, &lin, opts.qp_tol, opts.qp_max_iter);
    solve_simplex_qp_from(&qp, &[tau.as_slice()])
}

/// Block-coordinate response-mixing step with τ fixed: predictors in index
/// order, rows in index order. Each subproblem scales to `Q = H`,
/// `q = −H r / (τ_l s)` with `r` the residual mixture excluding row `(l, j)`.
#[allow(clippy::too_many_arguments)]
fn c_step(
    gy: &GramMatrix,
    models: &[PrototypeModel],
    usage: &[Mat],
    columns: &[Vec<Vec<f64>>],
    cs: &mut [Mat],
    ws: &mut [Mat],
    tau: &[f64],
    opts: &FitOptions,
) -> Result<()> {
    let m = models.len();
    let n = gy.n();
    for l in 0..m {
        let tau_l = tau[l];
        if tau_l <= DEGENERATE_TAU {
            continue;
        }
        let k = models[l].k();
        for j in 0..k {
            let s = usage[l].get(j, j);
            if s <= 1e-12 {
                continue;
            }
            let alpha = &columns[l][j];
            let mass: f64 = alpha.iter().sum();

            // r = α_j − Σ_l' τ_l' W_l'ᵀ α_j + τ_l s c_j
            let mut r = alpha.clone();
            for (l2, w) in ws.iter().enumerate() {
                let t = tau[l2];
                if t == 0.0 {
                    continue;
                }
                let wt = w.tr_mul_vec(alpha);
                for (ri, v) in r.iter_mut().zip(&wt) {
                    *ri -= t * v;
                }
            }
            {
                let cj = cs[l].row(j);
                for (ri, v) in r.iter_mut().zip(cj) {
                    *ri += tau_l * s * v;
                }
            }
            let mut lin = gy.mul_vec(&r);
            let scale = -1.0 / (tau_l * s);
            for x in lin.iter_mut() {
                *x *= scale;
            }

            let current = cs[l].row(j).to_vec();
            let barycenter: Vec<f64> = if mass > 0.0 {
                alpha.iter().map(|v| v / mass).collect()
            } else {
                current.clone()
            };
            let qp = QuadraticSubproblem::new_unchecked(
                gy.as_mat(),
                &lin,
                opts.qp_tol,
                opts.qp_max_iter,
            );
            let sol = solve_simplex_qp_from(&qp, &[&current, &barycenter])?;

            // Propagate the row change into the cached mixtures.
            let delta: Vec<f64> = sol
                .as_slice()
                .iter()
                .zip(&current)
                .map(|(new, old)| new - old)
                .collect();
            if delta.iter().any(|d| *d != 0.0) {
                cs[l].set_row(j, sol.as_slice());
                for i in 0..n {
                    let coeff = alpha[i];
                    if coeff == 0.0 {
                        continue;
                    }
                    for (acc, d) in ws[l].row_mut(i).iter_mut().zip(&delta) {
                        *acc += coeff * d;
                    }
                }
            }
        }
    }
    Ok(())
}

/// τ below this leaves a predictor's mixing rows untouched (its subproblem
/// vanishes).
const DEGENERATE_TAU: f64 = 1e-12;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gram::{gram_matrix, GramItem};
    use crate::kernel::KernelSpec;

    fn linear_gram(points: &[Vec<f64>]) -> GramMatrix {
        let items: Vec<GramItem> = points.iter().map(|p| GramItem::Vector(&p[..])).collect();
        gram_matrix(&items, &KernelSpec::Linear).unwrap()
    }

    #[test]
    fn identity_regression_reconstructs_exactly() {
        let pts = vec![
            vec![0.0, 1.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
            vec![0.3, 0.7],
        ];
        let g = linear_gram(&pts);
        let opts = FitOptions {
            tol: 1e-11,
            qp_tol: 1e-13,
            ..FitOptions::default()
        };
        let model = fit_simple(&g, &g, 4, 0.0, &opts).unwrap();
        assert!(
            *model.mixing_trace().last().unwrap() < 1e-8,
            "trace = {:?}",
            model.mixing_trace()
        );
    }

    #[test]
    fn constant_response_has_zero_residual() {
        let x = vec![vec![0.0], vec![1.0], vec![2.0]];
        let y = vec![vec![5.0], vec![5.0], vec![5.0]];
        let gx = linear_gram(&x);
        let gy = linear_gram(&y);
        let model = fit_simple(&gx, &gy, 2, 0.1, &FitOptions::default()).unwrap();
        assert!(*model.mixing_trace().last().unwrap() < 1e-9);
        // Any feasible mixture reproduces the constant.
        let w = predict_simple(&model, &[0.0, 0.0, 0.0], 0.0).unwrap();
        let ys = Mat::from_rows(&y).unwrap();
        let yhat = w.mix_rows(&ys).unwrap();
        assert!((yhat[0] - 5.0).abs() < 1e-9);
    }

    #[test]
    fn predict_k1_returns_first_mixing_row() {
        let x = vec![vec![0.0], vec![1.0]];
        let y = vec![vec![1.0], vec![3.0]];
        let model = fit_simple(
            &linear_gram(&x),
            &linear_gram(&y),
            1,
            0.0,
            &FitOptions::default(),
        )
        .unwrap();
        let w = predict_simple(&model, &[0.0, 0.5], 0.25).unwrap();
        assert_eq!(w.weights(), model.c().row(0));
    }

    #[test]
    fn predictions_stay_on_simplex() {
        let x: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64 / 11.0]).collect();
        let y: Vec<Vec<f64>> = x.iter().map(|v| vec![v[0] * v[0]]).collect();
        let model = fit_simple(
            &linear_gram(&x),
            &linear_gram(&y),
            4,
            0.05,
            &FitOptions::default(),
        )
        .unwrap();
        for t in [0.0, 0.31, 0.77, 1.0] {
            let g0: Vec<f64> = x.iter().map(|v| v[0] * t).collect();
            let w = predict_simple(&model, &g0, t * t).unwrap();
            assert!(w.weights().iter().all(|&v| v >= 0.0));
            let sum: f64 = w.weights().iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn single_predictor_multiple_matches_simple_objective() {
        let x: Vec<Vec<f64>> = (0..10)
            .map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 0.71).cos()])
            .collect();
        let y: Vec<Vec<f64>> = x.iter().map(|v| vec![v[0] + 0.5 * v[1]]).collect();
        let gx = linear_gram(&x);
        let gy = linear_gram(&y);
        let opts = FitOptions {
            seed: 4,
            tol: 1e-10,
            ..FitOptions::default()
        };
        let simple = fit_simple(&gx, &gy, 3, 0.1, &opts).unwrap();
        let multi = fit_multiple(core::slice::from_ref(&gx), &gy, &[3], &[0.1], &opts).unwrap();
        assert_eq!(multi.tau(), &[1.0]);
        let f_simple = *simple.mixing_trace().last().unwrap();
        let f_multi = *multi.fit_trace().last().unwrap();
        assert!(
            (f_simple - f_multi).abs() < 1e-8,
            "simple {f_simple} vs multiple {f_multi}"
        );
    }

    #[test]
    fn duplicate_predictor_objective_is_tau_invariant() {
        // Supplying the same Gram twice makes the predictors interchangeable,
        // so fits with τ pinned at [1, 0] and at [0.5, 0.5] reach the same
        // (convex) optimum of the response-mixing problem.
        let x: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64, (i % 3) as f64]).collect();
        let y: Vec<Vec<f64>> = x.iter().map(|v| vec![v[0] - v[1]]).collect();
        let gx = linear_gram(&x);
        let gy = linear_gram(&y);
        let opts = FitOptions {
            seed: 2,
            tol: 1e-11,
            qp_tol: 1e-13,
            ..FitOptions::default()
        };
        let grams = [gx.clone(), gx.clone()];
        let one_hot =
            fit_multiple_frozen_tau(&grams, &gy, &[2, 2], &[0.1, 0.1], &[1.0, 0.0], &opts).unwrap();
        let blended =
            fit_multiple_frozen_tau(&grams, &gy, &[2, 2], &[0.1, 0.1], &[0.5, 0.5], &opts).unwrap();
        let f_a = *one_hot.fit_trace().last().unwrap();
        let f_b = *blended.fit_trace().last().unwrap();
        assert!(
            (f_a - f_b).abs() <= 1e-6 * (1.0 + f_a.abs()),
            "{f_a} vs {f_b}"
        );
    }

    #[test]
    fn fit_trace_is_non_increasing() {
        let x1: Vec<Vec<f64>> = (0..9).map(|i| vec![(i as f64).sin()]).collect();
        let x2: Vec<Vec<f64>> = (0..9)
            .map(|i| vec![(i as f64 * 1.3).cos(), i as f64])
            .collect();
        let y: Vec<Vec<f64>> = (0..9)
            .map(|i| vec![i as f64 * 0.5, 1.0 - i as f64 * 0.1])
            .collect();
        let model = fit_multiple(
            &[linear_gram(&x1), linear_gram(&x2)],
            &linear_gram(&y),
            &[3, 4],
            &[0.05, 0.2],
            &FitOptions::default(),
        )
        .unwrap();
        for pair in model.fit_trace().windows(2) {
            assert!(
                pair[1] <= pair[0] + 1e-10,
                "trace = {:?}",
                model.fit_trace()
            );
        }
    }

    #[test]
    fn mixing_trace_is_non_increasing_and_feasible() {
        let x: Vec<Vec<f64>> = (0..15).map(|i| vec![(i as f64 * 0.41).sin()]).collect();
        let y: Vec<Vec<f64>> = x.iter().map(|v| vec![v[0].abs(), 1.0 - v[0]]).collect();
        let model = fit_simple(
            &linear_gram(&x),
            &linear_gram(&y),
            4,
            0.2,
            &FitOptions::default(),
        )
        .unwrap();
        for pair in model.mixing_trace().windows(2) {
            assert!(pair[1] <= pair[0] + 1e-10, "{:?}", model.mixing_trace());
        }
        for j in 0..model.k() {
            let row = model.c().row(j);
            assert!(row.iter().all(|&v| v >= 0.0));
            let sum: f64 = row.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn prediction_is_bit_deterministic() {
        let x: Vec<Vec<f64>> = (0..10)
            .map(|i| vec![i as f64 * 0.3, (i % 4) as f64])
            .collect();
        let y: Vec<Vec<f64>> = x.iter().map(|v| vec![v[0] - v[1]]).collect();
        let model = fit_simple(
            &linear_gram(&x),
            &linear_gram(&y),
            3,
            0.1,
            &FitOptions::default(),
        )
        .unwrap();
        let g0: Vec<f64> = x.iter().map(|v| v[0] * 0.7 + v[1] * 0.1).collect();
        let a = predict_simple(&model, &g0, 0.5).unwrap();
        let b = predict_simple(&model, &g0, 0.5).unwrap();
        assert_eq!(a.weights(), b.weights());
    }

    #[test]
    fn classify_breaks_ties_to_lowest_index() {
        // Uniform mixture over balanced classes.
        let labels = Mat::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let w = ResponseWeights::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(classify(&w, &labels).unwrap(), 0);
    }

    #[test]
    fn classify_picks_the_loaded_class() {
        let labels = Mat::from_rows(&[
            vec![1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![0.0, 1.0, 0.0],
        ])
        .unwrap();
        let w = ResponseWeights::new(vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(classify(&w, &labels).unwrap(), 2);
    }

    #[test]
    fn predict_multiple_with_one_hot_tau_matches_single_branch() {
        let x1: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
        let x2: Vec<Vec<f64>> = (0..6).map(|i| vec![(i as f64) * -2.0]).collect();
        let y: Vec<Vec<f64>> = (0..6).map(|i| vec![(i as f64).powi(2)]).collect();
        let gx1 = linear_gram(&x1);
        let gx2 = linear_gram(&x2);
        let gy = linear_gram(&y);
        let model = fit_multiple(
            &[gx1, gx2],
            &gy,
            &[2, 2],
            &[0.1, 0.1],
            &FitOptions::default(),
        )
        .unwrap();
        // Force τ one-hot on predictor 0 and compare against that branch.
        let forced =
            MultipleRegressionModel::rebuild(model.parts().to_vec(), vec![1.0, 0.0]).unwrap();
        let g01: Vec<f64> = x1.iter().map(|v| v[0] * 2.5).collect();
        let g02: Vec<f64> = x2.iter().map(|v| v[0] * -5.0).collect();
        let w = predict_multiple(&forced, &[&g01, &g02], &[6.25, 25.0]).unwrap();
        let a0 = forced.parts()[0].model.encode(&g01, 6.25).unwrap();
        let expected = forced.parts()[0].c.tr_mul_vec(a0.as_slice());
        for (got, want) in w.weights().iter().zip(&expected) {
            assert!((got - want).abs() < 1e-12);
        }
    }
}
