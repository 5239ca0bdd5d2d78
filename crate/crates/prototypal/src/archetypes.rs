//! Archetypal and prototypal analysis by alternating minimization.
//!
//! Given pairwise inner products `G` of `n` training points, the fit finds
//! reconstruction weights `A` (one simplex row per point) and prototype
//! mixing weights `B` (one simplex row per prototype) minimizing
//!
//! ```text
//!   Σ_i ‖x_i − Σ_j a_ji u_j‖²  +  λ Σ_i Σ_j a_ji ‖x_i − u_j‖²,
//!   u_j = Σ_l b_lj x_l,
//! ```
//!
//! everything expanded through `G`, so prototypes exist only as weight
//! vectors and the code never touches coordinates. `λ = 0` is archetypal
//! analysis; as `λ` grows the penalty forces each point onto its nearest
//! prototype and the fit approaches k-means (hard one-hot assignments,
//! prototypes at cluster barycenters).
//!
//! Both half-steps reduce to simplex-constrained QPs:
//!
//! * `A`-step: independently per point `i`, `Q = 2 BᵀGB` and the penalty
//!   enters the linear term through the point-to-prototype squared distances.
//! * `B`-step: block-coordinate sweep over prototype rows; for row `j`,
//!   `Q = 2 (Σ_i a_ji² + λ Σ_i a_ji) G` with the residual cross terms in the
//!   linear part. Each subproblem is warm-started from the current row and
//!   from the normalized usage weights `α_j / Σ_i a_ji` (the weighted
//!   barycenter of the points the prototype currently serves), which in the
//!   large-λ regime is the exact minimizer.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fmath;
use crate::gram::GramMatrix;
use crate::linalg::{dot, ksum, Mat};
use crate::rng::SplitMix64;
use crate::simplex::{
    solve_simplex_qp_from, QuadraticSubproblem, SimplexWeights, DEFAULT_QP_MAX_ITER, DEFAULT_QP_TOL,
};

/// Column masses below this are treated as an unused prototype.
const DEGENERATE_MASS: f64 = 1e-12;

/// Knobs for the alternating fit. All randomness flows from `seed`.
#[derive(Debug, Clone)]
pub struct FitOptions {
    /// Cap on outer (A, B) alternations.
    pub max_outer_iter: usize,
    /// Relative objective-change tolerance `|f_t − f_{t−1}| < tol·(1 + |f_t|)`.
    pub tol: f64,
    /// Seed for prototype initialization.
    pub seed: u64,
    /// Reseed prototypes that no point uses (see [`fit_prototypal`]).
    pub restart_degenerate: bool,
    /// Relative tolerance of the inner simplex QPs.
    pub qp_tol: f64,
    /// Iteration cap of the inner simplex QPs.
    pub qp_max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_outer_iter: 500,
            tol: 1e-7,
            seed: 0,
            restart_degenerate: true,
            qp_tol: DEFAULT_QP_TOL,
            qp_max_iter: DEFAULT_QP_MAX_ITER,
        }
    }
}

impl FitOptions {
    pub(crate) fn validate(&self) -> Result<()> {
        if self.max_outer_iter == 0 {
            return Err(Error::invalid("max_outer_iter must be at least 1"));
        }
        if !self.tol.is_finite()
            || self.tol <= 0.0
            || !self.qp_tol.is_finite()
            || self.qp_tol <= 0.0
        {
            return Err(Error::invalid("tolerances must be positive"));
        }
        if self.qp_max_iter == 0 {
            return Err(Error::invalid("qp_max_iter must be at least 1"));
        }
        Ok(())
    }
}

/// A fitted archetypal or prototypal model.
///
/// Prototypes are never materialized: prototype `j` is `Σ_l b_lj x_l`, known
/// only through its weight row and the training Gram matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeModel {
    /// `n × k`; row `i` holds the barycentric weights of point `i`.
    a: Mat,
    /// `k × n`; row `j` holds the mixing weights of prototype `j`.
    b: Mat,
    lambda: f64,
    /// Objective value after every outer iteration, non-increasing.
    objective_trace: Vec<f64>,
    /// Cached `BᵀGB`, needed to encode new points.
    proto_gram: Mat,
}

impl PrototypeModel {
    pub fn n(&self) -> usize {
        self.a.rows()
    }

    pub fn k(&self) -> usize {
        self.b.rows()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Reconstruction weights, `n × k` with simplex rows.
    pub fn a(&self) -> &Mat {
        &self.a
    }

    /// Prototype mixing weights, `k × n` with simplex rows.
    pub fn b(&self) -> &Mat {
        &self.b
    }

    /// Barycentric weights of training point `i`.
    pub fn point_weights(&self, i: usize) -> &[f64] {
        self.a.row(i)
    }

    /// Mixing weights of prototype `j` over the training points.
    pub fn prototype_weights(&self, j: usize) -> &[f64] {
        self.b.row(j)
    }

    pub fn objective_trace(&self) -> &[f64] {
        &self.objective_trace
    }

    /// Final objective value (last trace entry).
    pub fn objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace is never empty")
    }

    /// Pairwise inner products of the prototypes, `k × k`.
    pub fn proto_gram(&self) -> &Mat {
        &self.proto_gram
    }

    /// Reassembles a model from stored weights (e.g. a model file) and the
    /// training Gram matrix it was fitted on.
    pub fn rebuild(a: Mat, b: Mat, lambda: f64, g: &GramMatrix) -> Result<Self> {
        let n = g.n();
        let k = b.rows();
        if a.rows() != n || a.cols() != k || b.cols() != n {
            return Err(Error::invalid("weight shapes do not match the Gram matrix"));
        }
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::invalid("lambda must be finite and non-negative"));
        }
        for i in 0..n {
            SimplexWeights::new(a.row(i).to_vec())?;
        }
        for j in 0..k {
            SimplexWeights::new(b.row(j).to_vec())?;
        }
        let gb = compute_gb(g, &b);
        let m = compute_proto_gram(&b, &gb);
        let f = objective_with(g, &a, &gb, &m, lambda);
        Ok(PrototypeModel {
            a,
            b,
            lambda,
            objective_trace: vec![f],
            proto_gram: m,
        })
    }

    /// Barycentric coordinates of a new point, using the training `lambda`.
    ///
    /// `g0[i] = ⟨x₀, x_i⟩` over the training points and `g00 = ⟨x₀, x₀⟩`.
    pub fn encode(&self, g0: &[f64], g00: f64) -> Result<SimplexWeights> {
        self.encode_with_lambda(g0, g00, self.lambda)
    }

    /// Same as [`encode`](Self::encode) with an explicit penalty override.
    pub fn encode_with_lambda(&self, g0: &[f64], g00: f64, lambda: f64) -> Result<SimplexWeights> {
        if g0.len() != self.n() {
            return Err(Error::invalid("g0 length does not match training size"));
        }
        if g0.iter().any(|x| !x.is_finite()) || !g00.is_finite() {
            return Err(Error::invalid("inner products must be finite"));
        }
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::invalid("lambda must be finite and non-negative"));
        }
        let k = self.k();
        let mut lin = Vec::with_capacity(k);
        for j in 0..k {
            let btg = dot(self.b.row(j), g0);
            let d0 = g00 - 2.0 * btg + self.proto_gram.get(j, j);
            lin.push(-btg + 0.5 * lambda * d0);
        }
        let qp = QuadraticSubproblem::new_unchecked(
            &self.proto_gram,
            &lin,
            DEFAULT_QP_TOL,
            DEFAULT_QP_MAX_ITER,
        );
        solve_simplex_qp_from(&qp, &[])
    }
}

/// Fits prototypal analysis with penalty `lambda ≥ 0`.
///
/// Prototypes start as one-hot rows on `k` distinct points chosen by
/// D²-weighted sequential sampling ([`initial_prototypes`]); the fit then
/// alternates the `B`-sweep and the `A`-step until the relative objective
/// change drops below `opts.tol` or `opts.max_outer_iter` is reached. If a
/// prototype ends up unused (its column of `A` has essentially zero mass) and
/// `opts.restart_degenerate` is set, it is reseeded one-hot on the currently
/// worst-reconstructed point — the reseed is kept only when it does not
/// increase the objective, so the trace stays non-increasing.
pub fn fit_prototypal(
    g: &GramMatrix,
    k: usize,
    lambda: f64,
    opts: &FitOptions,
) -> Result<PrototypeModel> {
    opts.validate()?;
    let n = g.n();
    if k == 0 || k > n {
        return Err(Error::invalid("k must satisfy 1 <= k <= n"));
    }
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::invalid("lambda must be finite and non-negative"));
    }

    let seeds = initial_prototypes(g, k, opts.seed)?;
    let mut b = Mat::zeros(k, n);
    for (j, &idx) in seeds.iter().enumerate() {
        b.set(j, idx, 1.0);
    }

    let mut gb = compute_gb(g, &b);
    let mut m = compute_proto_gram(&b, &gb);
    let mut a = Mat::zeros(n, k);
    update_a_with(g, &gb, &m, lambda, &mut a, opts, false)?;
    let mut f = objective_with(g, &a, &gb, &m, lambda);
    if !f.is_finite() {
        return Err(Error::numerical("objective is not finite"));
    }
    let mut trace = vec![f];

    for _ in 1..=opts.max_outer_iter {
        if opts.restart_degenerate {
            restart_degenerate_prototypes(g, &a, &mut b, &mut gb, &mut m, lambda, &mut f)?;
        }

        update_b_inplace(g, &a, lambda, &mut b, opts)?;
        gb = compute_gb(g, &b);
        m = compute_proto_gram(&b, &gb);
        update_a_with(g, &gb, &m, lambda, &mut a, opts, true)?;

        let f_new = objective_with(g, &a, &gb, &m, lambda);
        if !f_new.is_finite() {
            return Err(Error::numerical("objective is not finite"));
        }
        trace.push(f_new);
        let converged = fmath::abs(f - f_new) <= opts.tol * (1.0 + fmath::abs(f_new));
        f = f_new;
        if converged {
            break;
        }
    }

    Ok(PrototypeModel {
        a,
        b,
        lambda,
        objective_trace: trace,
        proto_gram: m,
    })
}

/// Archetypal analysis: [`fit_prototypal`] with `lambda = 0`, provided as a
/// named entry point. Traces are identical for identical seeds.
pub fn fit_archetypal(g: &GramMatrix, k: usize, opts: &FitOptions) -> Result<PrototypeModel> {
    fit_prototypal(g, k, 0.0, opts)
}

/// One `A`-step: per point `i`, the simplex QP over its reconstruction
/// weights, all prototypes fixed. Returns a fresh `n × k` matrix.
pub fn update_a(g: &GramMatrix, b: &Mat, lambda: f64) -> Result<Mat> {
    check_b_shape(g, b)?;
    let gb = compute_gb(g, b);
    let m = compute_proto_gram(b, &gb);
    let mut a = Mat::zeros(g.n(), b.rows());
    update_a_with(g, &gb, &m, lambda, &mut a, &FitOptions::default(), false)?;
    Ok(a)
}

/// One full `B`-sweep starting from `b`: block-coordinate updates of every
/// prototype row with `a` fixed. Returns the updated matrix.
pub fn update_b(g: &GramMatrix, a: &Mat, b: &Mat, lambda: f64) -> Result<Mat> {
    check_b_shape(g, b)?;
    if a.rows() != g.n() || a.cols() != b.rows() {
        return Err(Error::invalid("A shape does not match G and B"));
    }
    let mut out = b.clone();
    update_b_inplace(g, a, lambda, &mut out, &FitOptions::default())?;
    Ok(out)
}

/// Prototypal objective in Gram form:
/// `Σ_i [G_ii − 2 a_iᵀBᵀg_i + a_iᵀ BᵀGB a_i] + λ Σ_i Σ_j a_ji d_ij` with
/// `d_ij = G_ii − 2 b_jᵀ g_i + b_jᵀ G b_j`. With `lambda = 0` this is the
/// archetypal objective.
pub fn objective(g: &GramMatrix, a: &Mat, b: &Mat, lambda: f64) -> Result<f64> {
    check_b_shape(g, b)?;
    if a.rows() != g.n() || a.cols() != b.rows() {
        return Err(Error::invalid("A shape does not match G and B"));
    }
    let gb = compute_gb(g, b);
    let m = compute_proto_gram(b, &gb);
    Ok(objective_with(g, a, &gb, &m, lambda))
}

/// D²-weighted sequential sampling of `k` distinct point indices (k-means++
/// style), with all distances derived from the Gram matrix. Deterministic in
/// `seed`.
pub fn initial_prototypes(g: &GramMatrix, k: usize, seed: u64) -> Result<Vec<usize>> {
    let n = g.n();
    if k == 0 || k > n {
        return Err(Error::invalid("k must satisfy 1 <= k <= n"));
    }
    let mut rng = SplitMix64::new(seed);
    let first = rng.next_below(n);
    let mut chosen = Vec::with_capacity(k);
    chosen.push(first);
    let mut min_d2: Vec<f64> = (0..n).map(|i| g.sq_dist(i, first)).collect();

    while chosen.len() < k {
        let total: f64 = min_d2.iter().sum();
        let next = if total > 0.0 {
            let r = rng.next_f64() * total;
            let mut acc = 0.0;
            let mut pick = None;
            let mut last_positive = None;
            for (i, &w) in min_d2.iter().enumerate() {
                if w > 0.0 {
                    last_positive = Some(i);
                    acc += w;
                    if acc > r {
                        pick = Some(i);
                        break;
                    }
                }
            }
            pick.or(last_positive)
                .expect("total > 0 implies a positive weight")
        } else {
            // All remaining points coincide with a chosen one; fall back to
            // the lowest unchosen index so the k indices stay distinct.
            (0..n)
                .find(|i| !chosen.contains(i))
                .expect("k <= n leaves an unchosen index")
        };
        chosen.push(next);
        for i in 0..n {
            let d = g.sq_dist(i, next);
            if d < min_d2[i] {
                min_d2[i] = d;
            }
        }
        min_d2[next] = 0.0;
    }
    Ok(chosen)
}

fn check_b_shape(g: &GramMatrix, b: &Mat) -> Result<()> {
    if b.cols() != g.n() || b.rows() == 0 || b.rows() > g.n() {
        return Err(Error::invalid("B must be k x n with 1 <= k <= n"));
    }
    Ok(())
}

/// `k × n` matrix with row `j` equal to `G b_j`.
pub(crate) fn compute_gb(g: &GramMatrix, b: &Mat) -> Mat {
    let k = b.rows();
    let n = g.n();
    let mut gb = Mat::zeros(k, n);
    for j in 0..k {
        gb.set_row(j, &g.mul_vec(b.row(j)));
    }
    gb
}

/// `BᵀGB`, mirrored so it is symmetric exactly.
pub(crate) fn compute_proto_gram(b: &Mat, gb: &Mat) -> Mat {
    let k = b.rows();
    let mut m = Mat::zeros(k, k);
    for p in 0..k {
        for q in p..k {
            let v = dot(b.row(p), gb.row(q));
            m.set(p, q, v);
            m.set(q, p, v);
        }
    }
    m
}

/// Objective from precomputed `G b_j` rows and `BᵀGB`.
pub(crate) fn objective_with(g: &GramMatrix, a: &Mat, gb: &Mat, m: &Mat, lambda: f64) -> f64 {
    let n = a.rows();
    let k = a.cols();
    let mut terms = Vec::with_capacity(n);
    for i in 0..n {
        let ai = a.row(i);
        let gii = g.get(i, i);
        let mut cross = 0.0;
        let mut penalty = 0.0;
        for j in 0..k {
            let gbji = gb.get(j, i);
            cross += ai[j] * gbji;
            if lambda > 0.0 {
                penalty += ai[j] * (gii - 2.0 * gbji + m.get(j, j));
            }
        }
        let mai = m.mul_vec(ai);
        terms.push(gii - 2.0 * cross + dot(ai, &mai) + lambda * penalty);
    }
    ksum(&terms)
}

/// Solves the per-point reconstruction QPs. `Q = BᵀGB` after dividing the
/// canonical form by two; the locality penalty is linear in `a_i`.
fn update_a_with(
    g: &GramMatrix,
    gb: &Mat,
    m: &Mat,
    lambda: f64,
    a: &mut Mat,
    opts: &FitOptions,
    warm: bool,
) -> Result<()> {
    let n = a.rows();
    let k = a.cols();
    let mut lin = vec![0.0; k];
    for i in 0..n {
        let gii = g.get(i, i);
        for j in 0..k {
            let gbji = gb.get(j, i);
            let d_ij = gii - 2.0 * gbji + m.get(j, j);
            lin[j] = -gbji + 0.5 * lambda * d_ij;
        }
        let qp = QuadraticSubproblem::new_unchecked(m, &lin, opts.qp_tol, opts.qp_max_iter);
        let sol = if warm {
            let current = a.row(i).to_vec();
            solve_simplex_qp_from(&qp, &[&current])?
        } else {
            solve_simplex_qp_from(&qp, &[])?
        };
        a.set_row(i, sol.as_slice());
    }
    Ok(())
}

/// Block-coordinate sweep over the prototype rows. For row `j` the scaled
/// subproblem is `Q = G`, `q = G u / s_j` with
/// `u = Σ_{q≠j} (AᵀA)_{qj} b_q − (1+λ) α_j` and
/// `s_j = (AᵀA)_{jj} + λ Σ_i a_ji`; rows no point uses are skipped.
pub(crate) fn update_b_inplace(
    g: &GramMatrix,
    a: &Mat,
    lambda: f64,
    b: &mut Mat,
    opts: &FitOptions,
) -> Result<()> {
    let n = a.rows();
    let k = a.cols();

    // AᵀA and the column masses of A.
    let mut aa = Mat::zeros(k, k);
    for i in 0..n {
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
    let mut mass = vec![0.0; k];
    for i in 0..n {
        for (j, v) in a.row(i).iter().enumerate() {
            mass[j] += v;
        }
    }

    let mut u = vec![0.0; n];
    for j in 0..k {
        let s_j = aa.get(j, j) + lambda * mass[j];
        if s_j <= DEGENERATE_MASS {
            continue;
        }
        for x in u.iter_mut() {
            *x = 0.0;
        }
        for q in 0..k {
            if q == j {
                continue;
            }
            let c = aa.get(q, j);
            if c == 0.0 {
                continue;
            }
            for (ui, bi) in u.iter_mut().zip(b.row(q)) {
                *ui += c * bi;
            }
        }
        let one_lambda = 1.0 + lambda;
        for i in 0..n {
            u[i] -= one_lambda * a.get(i, j);
        }
        let mut lin = g.mul_vec(&u);
        for x in lin.iter_mut() {
            *x /= s_j;
        }

        let current = b.row(j).to_vec();
        let barycenter: Vec<f64> = if mass[j] > 0.0 {
            (0..n).map(|i| a.get(i, j) / mass[j]).collect()
        } else {
            current.clone()
        };
        let qp =
            QuadraticSubproblem::new_unchecked(g.as_mat(), &lin, opts.qp_tol, opts.qp_max_iter);
        let sol = solve_simplex_qp_from(&qp, &[&current, &barycenter])?;
        b.set_row(j, sol.as_slice());
    }
    Ok(())
}

/// Reseeds prototypes whose `A`-column carries no mass one-hot on the worst
/// reconstructed points. Kept only when the objective does not increase
/// (with exactly-zero mass the objective is untouched, so the reseed is
/// always accepted there).
fn restart_degenerate_prototypes(
    g: &GramMatrix,
    a: &Mat,
    b: &mut Mat,
    gb: &mut Mat,
    m: &mut Mat,
    lambda: f64,
    f: &mut f64,
) -> Result<()> {
    let n = a.rows();
    let k = a.cols();
    let mut degenerate = Vec::new();
    for j in 0..k {
        let mass: f64 = (0..n).map(|i| a.get(i, j)).sum();
        if mass < DEGENERATE_MASS {
            degenerate.push(j);
        }
    }
    if degenerate.is_empty() {
        return Ok(());
    }

    // Reconstruction error of every point under the current model.
    let mut errs: Vec<(usize, f64)> = (0..n)
        .map(|i| {
            let ai = a.row(i);
            let mut cross = 0.0;
            for j in 0..k {
                cross += ai[j] * gb.get(j, i);
            }
            let mai = m.mul_vec(ai);
            (i, g.get(i, i) - 2.0 * cross + dot(ai, &mai))
        })
        .collect();
    errs.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));

    let saved: Vec<(usize, Vec<f64>)> =
        degenerate.iter().map(|&j| (j, b.row(j).to_vec())).collect();
    for (slot, &j) in degenerate.iter().enumerate() {
        let target = errs[slot.min(n - 1)].0;
        for x in b.row_mut(j).iter_mut() {
            *x = 0.0;
        }
        b.set(j, target, 1.0);
    }

    let gb_new = compute_gb(g, b);
    let m_new = compute_proto_gram(b, &gb_new);
    let f_new = objective_with(g, a, &gb_new, &m_new, lambda);
    if f_new <= *f {
        *gb = gb_new;
        *m = m_new;
        *f = f_new;
    } else {
        for (j, row) in saved {
            b.set_row(j, &row);
        }
    }
    Ok(())
}
