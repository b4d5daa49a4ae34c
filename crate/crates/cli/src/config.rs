//! The JSON run document. Every section is optional and falls back to its
//! defaults; `_db` fields are converted to linear values once, here.

use std::path::Path;

use anyhow::{anyhow, Context};
use e2mac::csma::CsmaParams;
use e2mac::planner::{FeasibilityInputs, ReservationScenario};
use e2mac::radio::db_to_linear;
use e2mac::sim::SimConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub sim: SimConfig,
    pub csma: CsmaSection,
    pub cluster: ClusterSection,
    pub feasibility: FeasibilitySection,
    pub sweep: SweepSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CsmaSection {
    pub params: CsmaParams,
    /// Recompute the per-attempt energies from powers and timings.
    pub derive_energy: bool,
    /// Explicit attempt rates (1/s); overrides the grid below when present.
    pub g: Option<Vec<f64>>,
    /// Grid of `g_steps + 1` loads over `[0, g_t_max / T]`, `T` the cycle.
    pub g_t_max: f64,
    pub g_steps: usize,
    pub phases: Vec<u32>,
}

impl Default for CsmaSection {
    fn default() -> Self {
        CsmaSection {
            params: CsmaParams::default(),
            derive_energy: false,
            g: None,
            g_t_max: 20.0,
            g_steps: 400,
            phases: vec![1, 2, 3],
        }
    }
}

impl CsmaSection {
    pub fn base(&self) -> CsmaParams {
        if self.derive_energy {
            self.params.with_derived_energy()
        } else {
            self.params
        }
    }

    pub fn loads(&self) -> Vec<f64> {
        if let Some(g) = &self.g {
            return g.clone();
        }
        let top = self.g_t_max / self.base().cycle();
        let steps = self.g_steps.max(1);
        (0..=steps).map(|i| top * i as f64 / steps as f64).collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterSection {
    pub scenario: ReservationScenario,
    pub noise_dbw_per_hz: Option<f64>,
    pub snr_gap_db: Option<f64>,
    /// Search range for the optimum; the upper end is capped at `n_t`.
    pub bounds: Option<(u32, u32)>,
    /// Sizes listed in the lifetime table.
    pub z_values: Vec<u32>,
    /// Head placements drawn for the lifetime CDF at the optimum.
    pub cdf_samples: usize,
}

impl Default for ClusterSection {
    fn default() -> Self {
        ClusterSection {
            scenario: ReservationScenario::default(),
            noise_dbw_per_hz: None,
            snr_gap_db: None,
            bounds: None,
            z_values: vec![10, 50, 100, 500, 1000],
            cdf_samples: 1000,
        }
    }
}

impl ClusterSection {
    pub fn resolved(&self) -> ReservationScenario {
        let mut s = self.scenario;
        if let Some(db) = self.noise_dbw_per_hz {
            s.n0 = db_to_linear(db);
        }
        if let Some(db) = self.snr_gap_db {
            s.gamma_gap = db_to_linear(db);
        }
        s
    }

    pub fn bounds(&self) -> (u32, u32) {
        self.bounds.unwrap_or((1, self.scenario.n_t))
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeasibilitySection {
    pub inputs: FeasibilityInputs,
    pub s_h_db: Option<f64>,
    pub s_b_db: Option<f64>,
    pub noise_dbw_per_hz: Option<f64>,
    pub snr_gap_db: Option<f64>,
    /// Sets the direct-access static energy from this per-cycle budget (J).
    pub static_budget: Option<f64>,
}

impl FeasibilitySection {
    pub fn resolved(&self) -> FeasibilityInputs {
        let mut f = self.inputs;
        if let Some(db) = self.s_h_db {
            f.s_h = db_to_linear(db);
        }
        if let Some(db) = self.s_b_db {
            f.s_b = db_to_linear(db);
        }
        if let Some(db) = self.noise_dbw_per_hz {
            f.env.n0 = db_to_linear(db);
        }
        if let Some(db) = self.snr_gap_db {
            f.env.gamma_gap = db_to_linear(db);
        }
        match self.static_budget {
            Some(b) => f.with_static_budget(b),
            None => f,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    /// Each run is a partial `sim` object laid over the base `sim` section.
    pub runs: Vec<Value>,
    pub seeds: Vec<u64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            runs: vec![
                serde_json::json!({ "mac_variant": "e2mac", "n_phases": 3 }),
                serde_json::json!({ "mac_variant": "e2mac", "n_phases": 1 }),
                serde_json::json!({ "mac_variant": "e2mac", "cluster_size": 10.0 }),
                serde_json::json!({ "mac_variant": "cmac" }),
                serde_json::json!({ "mac_variant": "e2macn", "ch_reselect": "on_death" }),
                serde_json::json!({ "mac_variant": "e2macr" }),
            ],
            seeds: (1..=5).collect(),
        }
    }
}

impl SweepSection {
    /// Resolves every run against `base`.
    pub fn configs(&self, base: &SimConfig) -> anyhow::Result<Vec<SimConfig>> {
        let base = serde_json::to_value(base)?;
        self.runs
            .iter()
            .enumerate()
            .map(|(i, run)| {
                let mut merged = base.clone();
                overlay(&mut merged, run);
                let cfg: SimConfig = parse_value(merged, &format!("sweep.runs[{i}]"))?;
                cfg.validate().map_err(|e| anyhow!("sweep.runs[{i}]: {e}"))?;
                Ok(cfg)
            })
            .collect()
    }
}

/// Recursively replaces the keys of `base` present in `patch`.
fn overlay(base: &mut Value, patch: &Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(k) {
                    Some(slot) if slot.is_object() && v.is_object() => overlay(slot, v),
                    _ => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, p) => *b = p.clone(),
    }
}

fn parse_value<T: for<'de> Deserialize<'de>>(v: Value, at: &str) -> anyhow::Result<T> {
    serde_path_to_error::deserialize(v).map_err(|e| {
        let path = e.path().to_string();
        anyhow!("{at}.{path}: {}", e.inner())
    })
}

/// A parsed document with the bytes it came from.
pub struct Loaded {
    pub config: RunConfig,
    pub path: Option<String>,
    pub bytes: Vec<u8>,
}

impl Loaded {
    pub fn read(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Loaded {
                config: RunConfig::default(),
                path: None,
                bytes: Vec::new(),
            });
        };
        let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        let config = parse(&bytes)?;
        Ok(Loaded {
            config,
            path: Some(path.display().to_string()),
            bytes,
        })
    }
}

/// Parses a document, naming the offending field on failure.
pub fn parse(bytes: &[u8]) -> anyhow::Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        anyhow!("config field `{path}`: {}", e.inner())
    })
}
