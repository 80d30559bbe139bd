//! One-dimensional self-repellent random walk polymers.
//!
//! The crate computes partition functions, endpoint laws and large-deviation
//! quantities for the Domb-Joyce (weakly self-avoiding) walk, its
//! self-attracting variant and the self-avoiding walk on a strip, both by
//! exact enumeration and by Monte Carlo, and compares weak-interaction
//! scaling against the Edwards-model constants.
//!
//! Modules, bottom-up:
//!
//! * [`stepdist`]: step distributions on the integers.
//! * [`hamiltonian`]: local times, interaction energies and incremental path state.
//! * [`enumerate`]: exact depth-first weighted enumeration.
//! * [`montecarlo`]: importance sampling and PERM growth sampling.
//! * [`ratefn`]: finite-n rate functions, Legendre transforms, `B_n`.
//! * [`renewal`]: piece decomposition and the renewal relation for `c_N`.
//! * [`harness`]: scaling sweeps and power-law fits.
//!
//! Parallel kernels use rayon when the `parallel` feature (default) is on;
//! every reduction is assembled in a fixed order so results do not depend on
//! the thread count.

pub mod enumerate;
pub mod error;
pub mod exec;
pub mod hamiltonian;
pub mod harness;
pub mod model;
pub mod montecarlo;
pub mod numeric;
pub mod ratefn;
pub mod renewal;
pub mod selftest;
pub mod stepdist;

pub use error::{Error, Result};
pub use exec::Exec;
pub use model::Model;
pub use stepdist::{Family, StepDistribution};
