//! Certified robustness bounds for ergodic averages of Markov processes.
//!
//! The crate combines three ingredients:
//!
//! * variational (Gibbs) bounds `Ξ±(Λ, η) = inf_{c>0} (Λ(±c) + η)/c` on the
//!   bias of an expectation under a perturbed law ([`divergence`]);
//! * bounds `Λ` on path-space cumulant generating functions coming from
//!   functional inequalities of the generator ([`spectral`]);
//! * relative-entropy rates `η` between a base and an alternative model
//!   ([`entropy`]).
//!
//! [`bound`] assembles the three into a report, and [`simulate`] checks
//! reports against Monte Carlo estimates of the bias. Worked examples with
//! known constants live in [`zoo`].
//!
//! All numeric code is generic over [`Scalar`] (`f64` or `f32`). The
//! aliases at the crate root fix the scalar to `f64`, which is what the
//! command-line tool and the tests use.

// `!(x > y)` is used deliberately so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod bound;
pub mod chain;
pub mod divergence;
pub mod entropy;
pub mod error;
pub mod rng;
pub mod scalar;
pub mod simulate;
pub mod spectral;
pub mod zoo;

pub use chain::{
    center_observable, invariant_measure, symmetrize, weighted_inner, Model, Sign,
};
pub use error::{ErrorClass, Result, UqError};
pub use scalar::Scalar;

pub type Generator = chain::GeneratorMatrix<f64>;
pub type Kernel = chain::TransitionKernel<f64>;
pub type Measure = chain::StationaryMeasure<f64>;
pub type Observable = chain::Observable<f64>;
pub type Lambda<'a> = divergence::LambdaFunction<'a, f64>;
pub type Xi = divergence::XiResult<f64>;
pub type Constants = spectral::FunctionalConstants<f64>;
pub type Rate = entropy::EntropyRate<f64>;
pub type Sde = zoo::SdeModel<f64>;
pub type Report = bound::UqBoundReport<f64>;
pub type Validation = simulate::ValidationReport<f64>;

pub type Generator32 = chain::GeneratorMatrix<f32>;
pub type Kernel32 = chain::TransitionKernel<f32>;
pub type Measure32 = chain::StationaryMeasure<f32>;
pub type Observable32 = chain::Observable<f32>;
