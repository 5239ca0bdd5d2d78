//! Minimization of quadratic objectives over the probability simplex.
//!
//! Every inner argmin of the fitting algorithms (reconstruction weights,
//! prototype mixing weights, response mixing weights, importance
//! coefficients) is an instance of
//!
//! ```text
//!     minimize   (1/2) wᵀ Q w + qᵀ w
//!     subject to w ≥ 0,  Σ w = 1
//! ```
//!
//! with `Q` symmetric positive semidefinite. [`solve_simplex_qp`] solves it
//! with accelerated projected gradient descent (step `1/L`, `L` an upper
//! bound on the largest eigenvalue via the maximum absolute row sum) and a
//! monotone safeguard: whenever the accelerated step would raise the
//! objective, it falls back to a plain projected gradient step and resets the
//! momentum, so the iterate objectives never increase.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fmath;
use crate::linalg::{dot, ksum, Mat};

/// Default relative convergence tolerance for the inner QP solver.
pub const DEFAULT_QP_TOL: f64 = 1e-9;
/// Default iteration cap for the inner QP solver.
pub const DEFAULT_QP_MAX_ITER: usize = 10_000;

/// Tolerance on `|Σw − 1|` accepted by [`SimplexWeights::new`].
pub const SIMPLEX_SUM_TOL: f64 = 1e-12;

/// A point on the probability simplex: entries `≥ 0` summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexWeights {
    w: Vec<f64>,
}

impl SimplexWeights {
    /// Validates and wraps `w`: finite, non-negative, `Σw = 1` within 1e-12.
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::invalid("simplex weights must be non-empty"));
        }
        if w.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("simplex weights contain non-finite entries"));
        }
        if w.iter().any(|&x| x < 0.0) {
            return Err(Error::invalid("simplex weights contain negative entries"));
        }
        let sum = ksum(&w);
        if fmath::abs(sum - 1.0) > SIMPLEX_SUM_TOL {
            return Err(Error::invalid("simplex weights do not sum to one"));
        }
        Ok(SimplexWeights { w })
    }

    /// Uniform weights `1/d`.
    pub fn uniform(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("simplex dimension must be at least 1"));
        }
        Ok(SimplexWeights {
            w: vec![1.0 / d as f64; d],
        })
    }

    pub(crate) fn new_unchecked(w: Vec<f64>) -> Self {
        SimplexWeights { w }
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.w
    }
}

/// Euclidean projection of `v` onto the probability simplex.
///
/// Sort-based algorithm, `O(d log d)`: sort the entries in decreasing order,
/// find the largest prefix whose running average keeps the shifted entries
/// positive, and clip. Entries that end up inactive are exactly zero.
pub fn project_to_simplex(v: &[f64]) -> Result<SimplexWeights> {
    if v.is_empty() {
        return Err(Error::invalid("cannot project an empty vector"));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("cannot project non-finite entries"));
    }
    let mut sorted = v.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));

    let mut prefix = 0.0;
    let mut rho = 0;
    let mut theta = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        prefix += u;
        let t = (prefix - 1.0) / (j + 1) as f64;
        if u - t > 0.0 {
            rho = j + 1;
            theta = t;
        }
    }
    debug_assert!(rho > 0);
    let w = v.iter().map(|&x| (x - theta).max(0.0)).collect();
    Ok(SimplexWeights::new_unchecked(w))
}

/// One inner minimization in canonical form.
///
/// `q_matrix` must be symmetric (within 1e-10) and positive semidefinite;
/// PSD is not checked up front (that would cost an eigendecomposition) but
/// negative curvature encountered along the iterates is reported as
/// [`Error::Numerical`].
#[derive(Debug)]
pub struct QuadraticSubproblem<'a> {
    q_matrix: &'a Mat,
    linear: &'a [f64],
    tol: f64,
    max_iter: usize,
}

impl<'a> QuadraticSubproblem<'a> {
    pub fn new(q_matrix: &'a Mat, linear: &'a [f64], tol: f64, max_iter: usize) -> Result<Self> {
        let d = linear.len();
        if d == 0 {
            return Err(Error::invalid("subproblem dimension must be at least 1"));
        }
        if q_matrix.rows() != d || q_matrix.cols() != d {
            return Err(Error::invalid("Q must be d x d with d = len(q)"));
        }
        if !tol.is_finite() || tol <= 0.0 || max_iter == 0 {
            return Err(Error::invalid(
                "tol must be positive and max_iter at least 1",
            ));
        }
        if linear.iter().any(|x| !x.is_finite()) || q_matrix.data().iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("subproblem contains non-finite entries"));
        }
        for i in 0..d {
            for j in (i + 1)..d {
                if fmath::abs(q_matrix.get(i, j) - q_matrix.get(j, i)) > 1e-10 {
                    return Err(Error::invalid("Q is not symmetric within 1e-10"));
                }
            }
        }
        Ok(QuadraticSubproblem {
            q_matrix,
            linear,
            tol,
            max_iter,
        })
    }

    /// Skips the validation; for callers that construct `Q` symmetric by
    /// construction (mirrored Gram products).
    pub(crate) fn new_unchecked(
        q_matrix: &'a Mat,
        linear: &'a [f64],
        tol: f64,
        max_iter: usize,
    ) -> Self {
        QuadraticSubproblem {
            q_matrix,
            linear,
            tol,
            max_iter,
        }
    }
}

/// Solves the subproblem starting from uniform weights.
pub fn solve_simplex_qp(p: &QuadraticSubproblem) -> Result<SimplexWeights> {
    solve_simplex_qp_from(p, &[])
}

/// Solves the subproblem starting from the best of the uniform point and the
/// supplied warm-start candidates (each must be feasible).
///
/// The returned weights never have a larger objective than the uniform start,
/// whichever start wins.
pub fn solve_simplex_qp_from(
    p: &QuadraticSubproblem,
    warm_starts: &[&[f64]],
) -> Result<SimplexWeights> {
    let d = p.linear.len();
    if d == 1 {
        return Ok(SimplexWeights::new_unchecked(vec![1.0]));
    }

    // Upper bound on the spectral radius: max absolute row sum.
    let mut lipschitz = 0.0f64;
    for i in 0..d {
        let s: f64 = p.q_matrix.row(i).iter().map(|x| fmath::abs(*x)).sum();
        lipschitz = lipschitz.max(s);
    }

    if lipschitz == 0.0 {
        // Pure linear objective: the minimum sits at the vertex with the
        // smallest coefficient; ties break to the lowest index.
        let mut best = 0;
        for (j, &c) in p.linear.iter().enumerate() {
            if c < p.linear[best] {
                best = j;
            }
        }
        let mut w = vec![0.0; d];
        w[best] = 1.0;
        return Ok(SimplexWeights::new_unchecked(w));
    }

    let objective = |w: &[f64], qw: &[f64]| 0.5 * dot(w, qw) + dot(p.linear, w);

    // Pick the lowest-objective start; prefer a warm start on ties so a
    // stationary outer loop stays bit-for-bit stationary.
    let mut x = vec![1.0 / d as f64; d];
    let mut qx = p.q_matrix.mul_vec(&x);
    let mut fx = objective(&x, &qx);
    for ws in warm_starts {
        debug_assert_eq!(ws.len(), d);
        let qw = p.q_matrix.mul_vec(ws);
        let fw = objective(ws, &qw);
        if fw <= fx {
            x = ws.to_vec();
            qx = qw;
            fx = fw;
        }
    }

    let mut best_x = x.clone();
    let mut best_f = fx;
    let mut x_prev = x.clone();
    let mut qx_prev = qx.clone();
    let mut f_prev = fx;
    let mut y = x.clone();
    let mut qy = qx.clone();
    let mut t = 1.0f64;
    let step = 1.0 / lipschitz;

    for _ in 0..p.max_iter {
        // Accelerated step from the momentum point y.
        let trial: Vec<f64> = y
            .iter()
            .zip(&qy)
            .zip(p.linear)
            .map(|((&yi, &qyi), &qi)| yi - step * (qyi + qi))
            .collect();
        let mut xn = project_to_simplex(&trial)?.into_vec();
        let mut qxn = p.q_matrix.mul_vec(&xn);
        let mut fxn = objective(&xn, &qxn);

        if fxn >= f_prev {
            // Monotone fallback: plain projected gradient step from x_prev.
            // Falling back on equality matters too: a far-overshooting
            // momentum point can pin the accelerated trial onto one vertex
            // with the objective frozen, which would otherwise read as
            // convergence while the minimum sits on an adjacent face.
            let trial: Vec<f64> = x_prev
                .iter()
                .zip(&qx_prev)
                .zip(p.linear)
                .map(|((&xi, &qxi), &qi)| xi - step * (qxi + qi))
                .collect();
            xn = project_to_simplex(&trial)?.into_vec();
            qxn = p.q_matrix.mul_vec(&xn);
            fxn = objective(&xn, &qxn);
            t = 1.0;
        }

        // Curvature along the step direction; PSD matrices keep it >= 0 up
        // to roundoff. The guard has a relative part in ‖d‖² plus an
        // absolute part covering the floating-point noise of the two cached
        // products, so vanishing steps near convergence cannot false-alarm.
        let mut dqd = 0.0;
        let mut dnorm2 = 0.0;
        let mut dnorm1 = 0.0;
        let mut qscale = 0.0f64;
        for i in 0..d {
            let di = xn[i] - x_prev[i];
            dqd += di * (qxn[i] - qx_prev[i]);
            dnorm2 += di * di;
            dnorm1 += fmath::abs(di);
            qscale = qscale.max(fmath::abs(qxn[i])).max(fmath::abs(qx_prev[i]));
        }
        let guard = 1e-9 * lipschitz * dnorm2 + 1e-12 * dnorm1 * qscale + f64::MIN_POSITIVE;
        if dqd < -guard {
            return Err(Error::numerical(
                "negative curvature: Q is not positive semidefinite",
            ));
        }

        if fxn < best_f {
            best_f = fxn;
            best_x.copy_from_slice(&xn);
        }

        let converged = fmath::abs(fxn - f_prev) <= p.tol * (1.0 + fmath::abs(fxn));

        let t_next = 0.5 * (1.0 + fmath::sqrt(1.0 + 4.0 * t * t));
        let beta = (t - 1.0) / t_next;
        // Q y follows from linearity; no extra matrix-vector product needed.
        for i in 0..d {
            y[i] = xn[i] + beta * (xn[i] - x_prev[i]);
            qy[i] = qxn[i] + beta * (qxn[i] - qx_prev[i]);
        }
        x_prev.copy_from_slice(&xn);
        qx_prev.copy_from_slice(&qxn);
        f_prev = fxn;
        t = t_next;

        if converged {
            break;
        }
    }

    Ok(SimplexWeights::new_unchecked(best_x))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn qp<'a>(q: &'a Mat, lin: &'a [f64]) -> QuadraticSubproblem<'a> {
        QuadraticSubproblem::new(q, lin, DEFAULT_QP_TOL, DEFAULT_QP_MAX_ITER).unwrap()
    }

    #[test]
    fn projection_fixed_point() {
        let w = project_to_simplex(&[0.5, 0.5]).unwrap();
        assert_eq!(w.as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn projection_to_vertex() {
        let w = project_to_simplex(&[2.0, 0.0]).unwrap();
        assert_eq!(w.as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn projection_symmetry() {
        let w = project_to_simplex(&[1.0, 1.0]).unwrap();
        assert_eq!(w.as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn projection_rejects_bad_input() {
        assert!(project_to_simplex(&[]).is_err());
        assert!(project_to_simplex(&[f64::NAN, 0.0]).is_err());
        assert!(project_to_simplex(&[f64::INFINITY]).is_err());
    }

    #[test]
    fn identity_objective_is_uniform() {
        let q = Mat::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let lin = [0.0, 0.0];
        let w = solve_simplex_qp(&qp(&q, &lin)).unwrap();
        assert!((w.as_slice()[0] - 0.5).abs() < 1e-9);
        assert!((w.as_slice()[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn linear_objective_picks_smallest_coefficient() {
        let q = Mat::zeros(3, 3);
        let lin = [0.3, 0.1, 0.2];
        let w = solve_simplex_qp(&qp(&q, &lin)).unwrap();
        assert_eq!(w.as_slice(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn linear_tie_breaks_to_lowest_index() {
        let q = Mat::zeros(3, 3);
        let lin = [0.1, 0.1, 0.5];
        let w = solve_simplex_qp(&qp(&q, &lin)).unwrap();
        assert_eq!(w.as_slice(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn matches_1d_grid_oracle() {
        // min 1/2 ||w||^2 - w_1 over the 2-simplex, brute-forced on a grid.
        let q = Mat::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let lin = [-1.0, 0.0];
        let mut best = (f64::INFINITY, 0.0);
        let n = 10_000;
        for i in 0..=n {
            let w1 = i as f64 / n as f64;
            let w2 = 1.0 - w1;
            let f = 0.5 * (w1 * w1 + w2 * w2) - w1;
            if f < best.0 {
                best = (f, w1);
            }
        }
        assert_eq!(best.1, 1.0);
        let w = solve_simplex_qp(&qp(&q, &lin)).unwrap();
        assert!((w.as_slice()[0] - 1.0).abs() < 1e-6);
        assert!(w.as_slice()[1].abs() < 1e-6);
    }

    #[test]
    fn detects_negative_curvature() {
        let q = Mat::from_rows(&[vec![1.0, 3.0], vec![3.0, 1.0]]).unwrap();
        let lin = [-1.0, 0.0];
        let err = solve_simplex_qp(&qp(&q, &lin)).unwrap_err();
        assert!(matches!(err, crate::Error::Numerical(_)));
    }

    #[test]
    fn rejects_asymmetric_q() {
        let q = Mat::from_rows(&[vec![1.0, 0.5], vec![0.0, 1.0]]).unwrap();
        let lin = [0.0, 0.0];
        assert!(QuadraticSubproblem::new(&q, &lin, 1e-9, 100).is_err());
    }

    #[test]
    fn warm_start_never_hurts() {
        let q = Mat::from_rows(&[vec![2.0, 0.3], vec![0.3, 1.0]]).unwrap();
        let lin = [-0.2, -0.7];
        let cold = solve_simplex_qp(&qp(&q, &lin)).unwrap();
        let warm_point = [0.9, 0.1];
        let warm = solve_simplex_qp_from(&qp(&q, &lin), &[&warm_point]).unwrap();
        let f = |w: &[f64]| {
            let qw = q.mul_vec(w);
            0.5 * dot(w, &qw) + dot(&lin, w)
        };
        assert!(f(warm.as_slice()) <= f(cold.as_slice()) + 1e-12);
    }
}
