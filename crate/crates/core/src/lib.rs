//! Concentration inequalities for finite-state Markov chains.
//!
//! The crate computes spectral gaps, pseudo spectral gaps and mixing-time
//! profiles of a transition matrix, evaluates Bernstein and McDiarmid type
//! tail bounds from those quantities, runs likelihood-ratio tests between
//! two chains, and checks every bound against seeded Monte Carlo.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod ensemble;
pub mod error;
pub mod exec;
pub mod hypothesis;
pub mod kernel;
pub mod linalg;
pub mod marton;
pub mod mixing;
pub mod simulate;
pub mod spectral;

pub use error::{Error, Result};
pub use exec::Execution;
pub use hypothesis::{build_test, HypothesisTest};
pub use kernel::{Distribution, MarkovKernel, ObservedFunction};
pub use linalg::Matrix;
pub use mixing::{mixing_profile, MixingReport};
pub use simulate::SimConfig;
pub use spectral::{spectral_report, SpectralReport};
