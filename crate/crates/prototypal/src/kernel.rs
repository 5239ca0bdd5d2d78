//! Kernel functions on `R^d`.
//!
//! All of these induce injective kernel embeddings of probability measures,
//! which is what makes the distributional pipeline in [`crate::gram`] sound:
//!
//! | family    | `K(x, y)` |
//! |-----------|-----------|
//! | linear    | `⟨x, y⟩` |
//! | gaussian  | `exp(-σ ‖x−y‖²)` |
//! | laplacian | `exp(-σ ‖x−y‖₁)` |
//! | bspline   | `Π_i B_{2n+1}(x_i − y_i)` |
//! | energy    | `‖x‖ + ‖y‖ − ‖x−y‖` |
//!
//! `B_{2n+1}` is the centered cardinal B-spline of odd degree `2n+1` (the
//! `(2n+2)`-fold convolution of the unit-interval indicator, which has unit
//! integral); degrees 1 and 3 are supported in closed form.

use alloc::format;
use alloc::string::String;

use crate::error::{Error, Result};
use crate::fmath;

/// A kernel family plus its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    /// Plain Euclidean inner product.
    Linear,
    /// `exp(-sigma * ||x - y||^2)`, `sigma > 0`.
    Gaussian { sigma: f64 },
    /// `exp(-sigma * ||x - y||_1)`, `sigma > 0`.
    Laplacian { sigma: f64 },
    /// Product of centered cardinal B-splines per coordinate; `degree` must
    /// be 1 or 3.
    BSpline { degree: u32 },
    /// Energy distance kernel `||x|| + ||y|| - ||x - y||`.
    Energy,
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            KernelSpec::Linear | KernelSpec::Energy => Ok(()),
            KernelSpec::Gaussian { sigma } | KernelSpec::Laplacian { sigma } => {
                if sigma.is_finite() && *sigma > 0.0 {
                    Ok(())
                } else {
                    Err(Error::invalid("kernel bandwidth sigma must be positive"))
                }
            }
            KernelSpec::BSpline { degree } => {
                if *degree == 1 || *degree == 3 {
                    Ok(())
                } else {
                    Err(Error::invalid("bspline degree must be 1 or 3"))
                }
            }
        }
    }

    /// Short human-readable descriptor, used for Gram provenance tags.
    pub fn descriptor(&self) -> String {
        match self {
            KernelSpec::Linear => String::from("linear"),
            KernelSpec::Gaussian { sigma } => format!("gaussian(sigma={sigma})"),
            KernelSpec::Laplacian { sigma } => format!("laplacian(sigma={sigma})"),
            KernelSpec::BSpline { degree } => format!("bspline(degree={degree})"),
            KernelSpec::Energy => String::from("energy"),
        }
    }
}

/// Evaluates `K(x, y)` for the given kernel family.
pub fn kernel_eval(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    spec.validate()?;
    if x.len() != y.len() {
        return Err(Error::invalid("kernel arguments differ in dimension"));
    }
    if x.is_empty() {
        return Err(Error::invalid("kernel arguments must be non-empty"));
    }
    Ok(match spec {
        KernelSpec::Linear => crate::linalg::dot(x, y),
        KernelSpec::Gaussian { sigma } => fmath::exp(-sigma * sq_dist(x, y)),
        KernelSpec::Laplacian { sigma } => fmath::exp(-sigma * l1_dist(x, y)),
        KernelSpec::BSpline { degree } => {
            let b = if *degree == 1 { bspline1 } else { bspline3 };
            let mut prod = 1.0;
            for (xi, yi) in x.iter().zip(y) {
                prod *= b(xi - yi);
            }
            prod
        }
        KernelSpec::Energy => norm2(x) + norm2(y) - fmath::sqrt(sq_dist(x, y)),
    })
}

pub(crate) fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        let d = xi - yi;
        acc += d * d;
    }
    acc
}

pub(crate) fn l1_dist(x: &[f64], y: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        acc += fmath::abs(xi - yi);
    }
    acc
}

pub(crate) fn norm2(x: &[f64]) -> f64 {
    fmath::sqrt(crate::linalg::dot(x, x))
}

/// Centered linear B-spline (triangle on `[-1, 1]`, unit integral).
fn bspline1(t: f64) -> f64 {
    (1.0 - fmath::abs(t)).max(0.0)
}

/// Centered cubic B-spline (support `[-2, 2]`, unit integral).
fn bspline3(t: f64) -> f64 {
    let a = fmath::abs(t);
    if a <= 1.0 {
        2.0 / 3.0 - a * a + 0.5 * a * a * a
    } else if a <= 2.0 {
        let b = 2.0 - a;
        b * b * b / 6.0
    } else {
        0.0
    }
}
