//! Stochastic gradient Langevin dynamics with preferential data subsampling.
//!
//! This crate is the allocation-only numerical core: target models with
//! hand-coded gradients and Hessians, subsampling distributions backed by
//! Walker alias tables, the naive / importance-weighted / control-variate
//! gradient estimators and their pseudo-variance, the Langevin samplers
//! (including adaptive batch sizing), mode finding with ADAM, and sample
//! quality diagnostics. It builds under `#![no_std]`; file formats, the
//! experiment harness and the CLI live in the `psgld` crate.
//!
//! Data indices are zero-based throughout.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod diagnostics;
pub mod error;
pub mod estimators;
pub mod linalg;
mod math;
pub mod models;
pub mod samplers;
pub mod subsampling;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use models::{Dataset, ModeInfo, ModelKind, ModelSpec, ParamVector};

/// Deterministic random number generator used by every stochastic routine.
pub type ChainRng = rand_chacha::ChaCha8Rng;

/// Builds a [`ChainRng`] from a 64-bit seed.
pub fn seeded_rng(seed: u64) -> ChainRng {
    use rand::SeedableRng;
    ChainRng::seed_from_u64(seed)
}
