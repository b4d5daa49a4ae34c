//! Energy and lifetime modelling for clustered machine-to-machine uplinks.
//!
//! The crate is organised bottom-up:
//!
//! - [`radio`]: path loss and expected-rate functions.
//! - [`lifetime`]: per-device and per-cluster lifetime formulas and the
//!   first-energy-drain (FED) network lifetime.
//! - [`geometry`]: Poisson deployments, nearest-head clustering and the
//!   stochastic-geometry distance estimates.
//! - [`planner`]: optimal cluster size, cluster-head selection and tenure,
//!   reformation and clustering feasibility.
//! - [`csma`]: closed-form non-persistent and n-phase CSMA/CA metrics, the
//!   Lambert W function and a Monte-Carlo channel model.
//! - [`sim`]: a seeded discrete-event simulator of the clustered MAC and the
//!   contention-based baseline.
//! - [`report`]: empirical CDFs and CSV row types.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod csma;
pub mod error;
pub mod geometry;
pub mod lifetime;
pub mod planner;
pub mod radio;
pub mod report;
pub mod sim;

pub use error::{Error, Result};
