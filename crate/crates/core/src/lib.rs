//! Numerics for path-based feature attribution.
//!
//! The crate provides four estimators over the straight-line path from a
//! baseline `x'` to an input `x`:
//!
//! * integrated gradients ([`attribution::ig`]),
//! * path-weighted integrated gradients with an arbitrary weight `g(α)`
//!   ([`attribution::pwig`]),
//! * path-sampled integrated gradients evaluated deterministically through
//!   the CDF of the baseline density ([`attribution::psig_det`]),
//! * the same quantity estimated by Monte Carlo over sampled intermediate
//!   baselines ([`attribution::psig_mc`]).
//!
//! The [`experiments`] module drives the gradient-noise variance study and the
//! deterministic-versus-Monte-Carlo convergence study, and [`report`] writes
//! their CSV/JSON outputs.

pub mod attribution;
pub mod density;
pub mod error;
pub mod experiments;
pub mod kv;
pub mod mlp;
pub mod model;
pub mod pathgeom;
pub mod quadrature;
pub mod report;
pub mod rng;

pub use attribution::{AttributionResult, Estimator, WeightFn};
pub use density::{Density, EmpiricalCdf};
pub use error::{Error, Result};
pub use mlp::{Activation, MlpModel};
pub use model::{Model, ModelRegistry, SharedModel};
pub use pathgeom::PathSpec;
