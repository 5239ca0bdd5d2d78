//! Pairwise inner products: Gram matrices over vectors, kernelized vectors
//! and kernel-embedded empirical distributions.
//!
//! The fitting algorithms touch the data only through `⟨x_i, x_j⟩` (and
//! `⟨y_i, y_j⟩` for regression), so swapping the inner-product provider is
//! all it takes to move between Euclidean features, RKHS features and
//! distributions. An empirical distribution embeds as the mean of the kernel
//! sections over its samples, and the induced inner product is the double
//! mean `(1/(n₁n₂)) ΣΣ K(x_i, y_j)`.
//!
//! For the energy kernel on sorted one-dimensional samples the double sum
//! collapses to a linear-time merge scan ([`energy_inner_1d_sorted`]): after
//! expanding `|x - y|` into indicator terms, only the number of samples on
//! either side of each value matters, and sorted inputs yield those counts in
//! one pass. The quadratic path ([`embed_inner_naive`]) is kept both as the
//! fallback for every other configuration and as the reference the fast path
//! is tested against.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fmath;
use crate::kernel::{kernel_eval, KernelSpec};
use crate::linalg::Mat;

/// Samples of one probability distribution, all of the same dimension.
///
/// One-dimensional sample sets are sorted ascending at construction and
/// flagged, which turns the precondition of the fast energy path into an
/// internal guarantee. Inner products depend only on the empirical measure,
/// so reordering samples never changes results.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    dim: usize,
    /// Row-major `len x dim` sample block.
    samples: Vec<f64>,
    sorted_1d: bool,
}

impl EmpiricalDistribution {
    /// Wraps a flat row-major `n x dim` sample block.
    pub fn new(dim: usize, samples: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("sample dimension must be at least 1"));
        }
        if samples.is_empty() {
            return Err(Error::invalid("a distribution needs at least one sample"));
        }
        if !samples.len().is_multiple_of(dim) {
            return Err(Error::invalid(
                "sample data length is not a multiple of dim",
            ));
        }
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("samples contain non-finite values"));
        }
        let mut samples = samples;
        let sorted_1d = if dim == 1 {
            samples.sort_unstable_by(f64::total_cmp);
            true
        } else {
            false
        };
        Ok(EmpiricalDistribution {
            dim,
            samples,
            sorted_1d,
        })
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let dim = points.first().map_or(0, Vec::len);
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::invalid("samples differ in dimension"));
        }
        let mut flat = Vec::with_capacity(points.len() * dim);
        for p in points {
            flat.extend_from_slice(p);
        }
        EmpiricalDistribution::new(dim, flat)
    }

    /// Number of samples.
    pub fn len(&self) -> usize {
        self.samples.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn sample(&self, i: usize) -> &[f64] {
        &self.samples[i * self.dim..(i + 1) * self.dim]
    }

    /// Flat row-major sample data.
    pub fn values(&self) -> &[f64] {
        &self.samples
    }

    /// True when the samples are one-dimensional and ascending.
    pub fn sorted_1d(&self) -> bool {
        self.sorted_1d
    }
}

/// One element of a homogeneous Gram input list.
#[derive(Debug, Clone, Copy)]
pub enum GramItem<'a> {
    Vector(&'a [f64]),
    Distribution(&'a EmpiricalDistribution),
}

/// Symmetric matrix of pairwise inner products.
///
/// Construction enforces symmetry (within 1e-10) and finiteness. Positive
/// semidefiniteness is a property of the providers (all supported kernels are
/// PSD) and is verified in the test suite rather than at every construction,
/// since it would cost an eigendecomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    mat: Mat,
    provenance: String,
}

impl GramMatrix {
    /// Validates and wraps a row-major `n x n` entry block.
    pub fn from_entries(
        n: usize,
        entries: Vec<f64>,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("Gram matrix must have at least one row"));
        }
        if entries.len() != n * n {
            return Err(Error::invalid("Gram entry count does not match n*n"));
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("Gram entries must be finite"));
        }
        let mat = Mat::from_vec(n, n, entries)?;
        for i in 0..n {
            for j in (i + 1)..n {
                if fmath::abs(mat.get(i, j) - mat.get(j, i)) > 1e-10 {
                    return Err(Error::invalid("Gram matrix is not symmetric within 1e-10"));
                }
            }
        }
        Ok(GramMatrix {
            mat,
            provenance: provenance.into(),
        })
    }

    pub fn n(&self) -> usize {
        self.mat.rows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.mat.get(i, j)
    }

    /// Row `i`, which by symmetry is also column `i`.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        self.mat.row(i)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        self.mat.mul_vec(x)
    }

    /// Squared distance `‖x_i − x_j‖²` induced by the inner products,
    /// clamped at zero.
    pub fn sq_dist(&self, i: usize, j: usize) -> f64 {
        (self.get(i, i) - 2.0 * self.get(i, j) + self.get(j, j)).max(0.0)
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub(crate) fn as_mat(&self) -> &Mat {
        &self.mat
    }
}

/// Inner product of two kernel-embedded empirical distributions.
///
/// Dispatches to [`energy_inner_1d_sorted`] when the kernel is `energy`,
/// both inputs are one-dimensional and both carry the sorted flag; otherwise
/// falls back to the quadratic double mean.
pub fn embed_inner(
    spec: &KernelSpec,
    a: &EmpiricalDistribution,
    b: &EmpiricalDistribution,
) -> Result<f64> {
    if matches!(spec, KernelSpec::Energy) && a.sorted_1d() && b.sorted_1d() {
        return energy_inner_1d_sorted(a, b);
    }
    embed_inner_naive(spec, a, b)
}

/// Quadratic-time reference path: `(1/(n₁ n₂)) Σ_i Σ_j K(x_i, y_j)`.
pub fn embed_inner_naive(
    spec: &KernelSpec,
    a: &EmpiricalDistribution,
    b: &EmpiricalDistribution,
) -> Result<f64> {
    spec.validate()?;
    if a.dim() != b.dim() {
        return Err(Error::invalid("distributions differ in dimension"));
    }
    let mut acc = 0.0;
    for i in 0..a.len() {
        for j in 0..b.len() {
            acc += kernel_eval(spec, a.sample(i), b.sample(j))?;
        }
    }
    Ok(acc / (a.len() as f64 * b.len() as f64))
}

/// Linear-time energy-kernel inner product for sorted 1D sample sets.
///
/// Expanding each `|x_i − y_j|` into signed indicator terms reduces the
/// double sum to counting, for every sample, how many samples of the other
/// set lie below it; a single merge scan over the two sorted arrays delivers
/// all counts. Runs in `O(n₁ + n₂)` and agrees with [`embed_inner_naive`] to
/// within roundoff.
pub fn energy_inner_1d_sorted(a: &EmpiricalDistribution, b: &EmpiricalDistribution) -> Result<f64> {
    if !a.sorted_1d() || !b.sorted_1d() {
        return Err(Error::invalid(
            "energy fast path requires sorted one-dimensional samples",
        ));
    }
    let xs = a.values();
    let ys = b.values();
    let nx = xs.len();
    let ny = ys.len();

    // sum_x accumulates Σ_i [#{y < x_i} − #{y ≥ x_i}] · x_i and sum_y the
    // mirrored term; together they equal Σ_i Σ_j |x_i − y_j|.
    let mut sum_x = 0.0;
    let mut sum_y = 0.0;
    let mut i = 0usize;
    let mut j = 0usize;
    while i < nx && j < ny {
        if xs[i] <= ys[j] {
            sum_x += (2.0 * j as f64 - ny as f64) * xs[i];
            i += 1;
        } else {
            sum_y += (2.0 * i as f64 - nx as f64) * ys[j];
            j += 1;
        }
    }
    // Whatever remains is larger than everything in the other set.
    for &x in &xs[i..] {
        sum_x += ny as f64 * x;
    }
    for &y in &ys[j..] {
        sum_y += nx as f64 * y;
    }

    let mean_abs_x: f64 = xs.iter().map(|x| fmath::abs(*x)).sum::<f64>() / nx as f64;
    let mean_abs_y: f64 = ys.iter().map(|y| fmath::abs(*y)).sum::<f64>() / ny as f64;
    Ok(mean_abs_x + mean_abs_y - (sum_x + sum_y) / (nx as f64 * ny as f64))
}

/// Squared maximum mean discrepancy between two embedded distributions,
/// clamped below at zero. With the energy kernel this equals the squared
/// energy distance.
pub fn squared_mmd(
    spec: &KernelSpec,
    a: &EmpiricalDistribution,
    b: &EmpiricalDistribution,
) -> Result<f64> {
    let kaa = embed_inner(spec, a, a)?;
    let kbb = embed_inner(spec, b, b)?;
    let kab = embed_inner(spec, a, b)?;
    Ok((kaa + kbb - 2.0 * kab).max(0.0))
}

/// Builds the Gram matrix of a homogeneous item list.
///
/// Vector items go through [`kernel_eval`], distribution items through
/// [`embed_inner`]. Only the upper triangle is computed; the lower half is
/// mirrored, so the result is symmetric exactly.
pub fn gram_matrix(items: &[GramItem<'_>], spec: &KernelSpec) -> Result<GramMatrix> {
    spec.validate()?;
    let n = items.len();
    if n == 0 {
        return Err(Error::invalid("cannot build a Gram matrix of zero items"));
    }
    let all_vectors = items.iter().all(|it| matches!(it, GramItem::Vector(_)));
    let all_dists = items
        .iter()
        .all(|it| matches!(it, GramItem::Distribution(_)));
    if !all_vectors && !all_dists {
        return Err(Error::invalid(
            "Gram items must be all vectors or all distributions",
        ));
    }

    let mut entries = alloc::vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = match (&items[i], &items[j]) {
                (GramItem::Vector(x), GramItem::Vector(y)) => kernel_eval(spec, x, y)?,
                (GramItem::Distribution(x), GramItem::Distribution(y)) => embed_inner(spec, x, y)?,
                _ => unreachable!(),
            };
            entries[i * n + j] = v;
            entries[j * n + i] = v;
        }
    }
    let provenance = if all_vectors {
        alloc::format!("kernel:{}", spec.descriptor())
    } else {
        alloc::format!("embedding:{}", spec.descriptor())
    };
    GramMatrix::from_entries(n, entries, provenance)
}
