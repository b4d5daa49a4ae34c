//! Seeded discrete-event simulation of clustered and direct uplink access.

mod cmac;
pub mod config;
mod engine;
pub mod outcome;
mod state;

use rayon::prelude::*;

pub use config::{MacVariant, RachConfig, ReselectPolicy, SimConfig};
pub use engine::run_sim;
pub use outcome::{
    delay_cdf, lifetime_cdf, summarize, Comparison, EnergyLedger, EnergySample, EventKind, SimEvent, SimOutcome,
    SummaryRow, VariantSummary,
};

use crate::error::Result;

/// Runs every configuration under every seed, in parallel, and returns the
/// outcomes in `(config, seed)` order.
pub fn run_batch(cfgs: &[SimConfig], seeds: &[u64]) -> Result<Vec<SimOutcome>> {
    let jobs: Vec<SimConfig> = cfgs
        .iter()
        .flat_map(|c| {
            seeds.iter().map(move |&seed| SimConfig {
                seed,
                ..c.clone()
            })
        })
        .collect();
    jobs.par_iter().map(run_sim).collect()
}

/// Per-variant table over seeds; see [`summarize`].
pub fn compare_variants(cfgs: &[SimConfig], seeds: &[u64]) -> Result<Comparison> {
    summarize(&run_batch(cfgs, seeds)?)
}
