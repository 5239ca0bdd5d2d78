//! Archetypal analysis, prototypal analysis and prototypal regression over
//! pairwise inner products.
//!
//! Archetypal analysis approximates every data point as a convex combination
//! of `k` archetypes, which are themselves convex combinations of the data.
//! Prototypal analysis adds a locality penalty `lambda` that discourages
//! reconstructing a point from prototypes far away from it, which makes the
//! prototypes robust to outliers and turns them into a data-driven
//! barycentric coordinate system. Prototypal regression maps prototypes of a
//! predictor to prototypes of a response and predicts new responses as convex
//! combinations.
//!
//! All solvers consume data exclusively through a [`GramMatrix`] of pairwise
//! inner products, so the same code runs on plain Euclidean vectors, on
//! kernelized vectors and on empirical distributions embedded in an RKHS via
//! kernel mean embedding (see [`gram`]). Predictions are returned as mixture
//! weights over the training responses ([`regression::ResponseWeights`]), so
//! vector, one-hot and distributional responses all share one code path.
//!
//! The crate is `no_std`-compatible (requires `alloc`); disable the default
//! `std` feature for embedded use.
//!
//! ```
//! use prototypal::archetypes::{fit_prototypal, FitOptions};
//! use prototypal::gram::{gram_matrix, GramItem};
//! use prototypal::kernel::KernelSpec;
//!
//! // Four points on the unit square, two prototypes.
//! let pts = [[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]];
//! let items: Vec<GramItem> = pts.iter().map(|p| GramItem::Vector(&p[..])).collect();
//! let g = gram_matrix(&items, &KernelSpec::Linear).unwrap();
//! let model = fit_prototypal(&g, 2, 0.05, &FitOptions::default()).unwrap();
//! assert_eq!(model.k(), 2);
//! ```

#![cfg_attr(not(feature = "std"), no_std)]
// Index-based loops are the clearer form for the dense kernels in here.
#![allow(clippy::needless_range_loop)]

extern crate alloc;

pub mod archetypes;
pub mod error;
mod fmath;
pub mod gram;
pub mod kernel;
pub mod linalg;
pub mod regression;
pub mod rng;
pub mod simplex;

pub use error::{Error, Result};
pub use gram::GramMatrix;
pub use kernel::KernelSpec;
pub use simplex::SimplexWeights;
