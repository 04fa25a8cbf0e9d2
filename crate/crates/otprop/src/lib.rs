//! Transductive semi-supervised label propagation driven by entropy-regularized
//! optimal transport.
//!
//! The crate is organized around the propagation pipeline:
//!
//! - [`transport`] — squared-distance cost matrices, the Sinkhorn solver for
//!   entropy-regularized transport plans, and an exhaustive exact-transport
//!   oracle for testing.
//! - [`propagation`] — the incremental labeling loop: the plan is
//!   column-normalized into an affinity matrix, labeled mass is pooled per
//!   class into per-point class probabilities, and points are committed once
//!   their entropy-based certainty clears a threshold.
//! - [`induction`] — out-of-sample prediction over the frozen transductive
//!   labeling via Gibbs-kernel weighted majority vote.
//! - [`baseline`] — a classical Gaussian-kernel label-propagation comparator.
//! - [`metrics`] — accuracy, normalized mutual information, adjusted Rand
//!   index, and a cross-dataset score aggregate.
//! - [`data`], [`split`], [`benchmark`] — CSV ingestion, stratified seeded
//!   splits, and the benchmark runner with CSV/JSON emission.
//!
//! Numeric kernels are generic over the scalar type through [`Real`]; the
//! `*64` aliases at the crate root pin the `f64` instantiations used by the
//! harness and CLI.

pub mod baseline;
pub mod benchmark;
pub mod data;
pub mod error;
pub mod induction;
pub mod metrics;
pub mod propagation;
pub mod split;
pub mod transport;

pub use error::{Error, Result};

use std::fmt::{Debug, Display};

use ndarray::ScalarOperand;
use num_traits::{Float, FromPrimitive, NumAssignOps, ToPrimitive};

/// Floating-point scalar for the dense numeric kernels: `f32` or `f64`.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssignOps
    + ScalarOperand
    + std::iter::Sum
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
}

impl<T> Real for T where
    T: Float
        + FromPrimitive
        + ToPrimitive
        + NumAssignOps
        + ScalarOperand
        + std::iter::Sum
        + Debug
        + Display
        + Send
        + Sync
        + 'static
{
}

/// Convert an `f64` literal into the working scalar type.
///
/// Out-of-range literals saturate the way `as` casts do (`1e300` becomes
/// `f32::INFINITY`), so callers guarding numeric ranges must pick literals
/// meaningful for the narrowest supported type or clamp afterwards.
pub(crate) fn real<R: Real>(x: f64) -> R {
    R::from_f64(x).expect("f64 literal converts into every Real type")
}

pub type CostMatrix64 = transport::CostMatrix<f64>;
pub type Marginals64 = transport::Marginals<f64>;
pub type TransportPlan64 = transport::TransportPlan<f64>;
pub type AffinityMatrix64 = propagation::AffinityMatrix<f64>;
pub type ClassProbabilityMatrix64 = propagation::ClassProbabilityMatrix<f64>;
pub type CertaintyVector64 = propagation::CertaintyVector<f64>;
pub type OtpConfig64 = propagation::OtpConfig<f64>;
pub type PropagationTrace64 = propagation::PropagationTrace<f64>;
pub type InductionModel64 = induction::InductionModel<f64>;
pub type GaussianAffinity64 = baseline::GaussianAffinity<f64>;
