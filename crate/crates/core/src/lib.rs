//! Training and evaluation stack for autonomous passage of a simulated
//! cervical canal.
//!
//! The crate is organized around a small set of building blocks:
//!
//! - [`nn`]: a minimal dense-network engine (forward pass, analytic
//!   backpropagation, Adam, and the squashed-Gaussian policy head).
//! - [`env`]: a quasi-static simulation of a rigid hysteroscope advancing
//!   through a curved, narrow canal with penalty contact forces and ordered
//!   checkpoints.
//! - [`reward`]: the composite sparse + dense reward.
//! - [`sac`]: the soft actor-critic learner with value, soft-Q, and policy
//!   networks, replay/expert buffers, and the mixed update schedule.
//! - [`expert`]: a scripted path-following controller that generates
//!   demonstration episodes for the expert buffer.
//! - [`metrics`]: per-episode clinical-skill metrics (max force, integral
//!   force, spectral force band, execution time) and batch summaries.
//! - [`config`], [`checkpoint`], [`report`]: run configuration, model
//!   persistence, and evaluation report files used by the CLI.
//!
//! Everything is `f64`, single-threaded, and deterministic per seed: the same
//! seed and configuration reproduce training trajectories, reward logs, and
//! checkpoint bytes exactly.

pub mod checkpoint;
pub mod config;
pub mod env;
pub mod eval;
pub mod expert;
pub mod metrics;
pub mod nn;
pub mod report;
pub mod reward;
pub mod sac;

mod error;

pub use error::{Error, Result};
