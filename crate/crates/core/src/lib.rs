//! Exact recovery of simple models from random linear measurements.
//!
//! The crate covers three model classes (sparse vectors, block-sparse
//! vectors, low-rank matrices), each regularized by a decomposable norm:
//!
//! * [`ensembles`] draws Gaussian and sign measurement maps and applies them.
//! * [`models`] holds the subspace `T`, the sign pattern `e`, projections and
//!   the dual norm on the complement of `T`.
//! * [`certificate`] builds the least-squares multiplier `q` and its image
//!   `y = Φ*q`, and decides whether `y` certifies `x₀` as the unique minimizer.
//! * [`solvers`] minimizes the norm over the affine set `{x : Φx = b}`.
//! * [`bounds`] evaluates the closed-form sample thresholds and failure
//!   probability bounds.
//! * [`montecarlo`] runs seeded trials and parameter sweeps.
//!
//! Model families and measurement ensembles are looked up by name through
//! [`registry`], so front ends select them at runtime.

// `!(a < b)` comparisons deliberately treat NaN as failure.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod certificate;
pub mod ensembles;
pub mod error;
pub mod models;
pub mod montecarlo;
pub mod registry;
pub mod solvers;
pub mod stats;

pub use error::{Error, Result};
