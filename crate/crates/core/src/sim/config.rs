use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lifetime::{PowerProfile, TrafficProfile};
use crate::radio::{db_to_linear, PathLossModel};

/// Medium-access scheme under simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MacVariant {
    /// Clustered access with periodic head reselection.
    #[serde(rename = "e2mac")]
    E2Mac,
    /// Heads keep their role until they die.
    #[serde(rename = "e2macn")]
    E2MacN,
    /// After each reselection every device rejoins its nearest head.
    #[serde(rename = "e2macr")]
    E2MacR,
    /// Direct access through preamble contention.
    #[serde(rename = "cmac")]
    CMac,
}

impl MacVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            MacVariant::E2Mac => "e2mac",
            MacVariant::E2MacN => "e2macn",
            MacVariant::E2MacR => "e2macr",
            MacVariant::CMac => "cmac",
        }
    }

    pub fn is_clustered(self) -> bool {
        !matches!(self, MacVariant::CMac)
    }
}

impl std::str::FromStr for MacVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "e2mac" => Ok(MacVariant::E2Mac),
            "e2macn" => Ok(MacVariant::E2MacN),
            "e2macr" => Ok(MacVariant::E2MacR),
            "cmac" => Ok(MacVariant::CMac),
            other => Err(Error::config("mac_variant", format!("unknown variant `{other}`"))),
        }
    }
}

/// When clusters re-run head selection. A head that dies always triggers
/// a reselection in its cluster at the next cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReselectPolicy {
    EveryCycles(u32),
    OnDeath,
}

/// Preamble-based direct access.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RachConfig {
    pub preambles: u32,
    /// LTE frame length (s); opportunities fall in even frames.
    pub frame: f64,
    /// Offset of the preamble subframe inside its frame (s).
    pub preamble_offset: f64,
    pub preamble_duration: f64,
}

impl Default for RachConfig {
    fn default() -> Self {
        RachConfig {
            preambles: 54,
            frame: 10e-3,
            preamble_offset: 1e-3,
            preamble_duration: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub n_t: u32,
    pub r_inner: f64,
    pub r_outer: f64,
    pub pl_inter: PathLossModel,
    pub pl_intra: PathLossModel,
    pub noise_dbw_per_hz: f64,
    pub snr_gap_db: f64,
    /// Band of one resource block (Hz).
    pub w: f64,
    /// Interval between resource allocations, also the cluster cycle (s).
    pub t_ra: f64,
    /// Resource time per allocation (s); the intra- and inter-cluster
    /// windows, or the contention window of direct access, live inside it.
    pub resource_budget: f64,
    /// Time for intra-cluster traffic of all clusters (s).
    pub intra_window: f64,
    /// Orthogonal bunches the intra-cluster window is split into.
    pub bunches: u32,
    /// Per-cluster window is `min(size * intra_per_member, intra_cap)`.
    pub intra_per_member: f64,
    pub intra_cap: f64,
    /// Backoff means are `T_intra / (backoff_divisor * n_phases)`.
    pub backoff_divisor: f64,
    pub delta_d: f64,
    pub t_inter: f64,
    /// Attempts after which a packet is dropped.
    pub k_m: u32,
    pub power: PowerProfile,
    pub traffic: TrafficProfile,
    pub lambda: f64,
    pub rach: RachConfig,
    pub mac_variant: MacVariant,
    pub n_phases: u32,
    /// Target mean cluster size `z`; the head probability is `1/z`.
    pub cluster_size: f64,
    pub ch_reselect: ReselectPolicy,
    /// Per-device energy charged at each cluster re-formation (J).
    pub e_ref: f64,
    /// Initial energy of every device (J).
    pub e0: f64,
    pub seed: u64,
    /// Hard stop (cycles); devices alive at the stop have no death time.
    pub max_cycles: u64,
    pub record_events: bool,
    /// Sample every device's energy every this many cycles.
    pub trace_every: Option<u64>,
}

impl Default for SimConfig {
    /// Full-cell setting with the default clustered scheme at `z = 100`.
    fn default() -> Self {
        let power = PowerProfile {
            e_s_d: 1.75e-3,
            ..PowerProfile::default()
        };
        SimConfig {
            n_t: 5000,
            r_inner: 50.0,
            r_outer: 500.0,
            pl_inter: PathLossModel::inter_cluster_default(),
            pl_intra: PathLossModel::intra_cluster_default(),
            noise_dbw_per_hz: -204.0,
            snr_gap_db: 13.0,
            w: 180e3,
            t_ra: 1000.0,
            resource_budget: 2.4,
            intra_window: 1.4,
            bunches: 7,
            intra_per_member: 1e-3,
            intra_cap: 0.2,
            backoff_divisor: 5.0,
            delta_d: 1e-3,
            t_inter: 1.0,
            k_m: 64,
            power,
            traffic: TrafficProfile::default(),
            lambda: 1.0,
            rach: RachConfig::default(),
            mac_variant: MacVariant::E2Mac,
            n_phases: 1,
            cluster_size: 100.0,
            ch_reselect: ReselectPolicy::EveryCycles(1),
            e_ref: 0.0,
            e0: 2.0,
            seed: 0,
            max_cycles: 10_000_000,
            record_events: false,
            trace_every: None,
        }
    }
}

impl SimConfig {
    /// Scaled-down cell: 500 devices and a 100 s allocation interval.
    pub fn desk_scale() -> Self {
        SimConfig {
            n_t: 500,
            t_ra: 100.0,
            ..SimConfig::default()
        }
    }

    pub fn with_variant(mut self, variant: MacVariant) -> Self {
        self.mac_variant = variant;
        if variant == MacVariant::E2MacN {
            self.ch_reselect = ReselectPolicy::OnDeath;
        }
        self
    }

    pub fn n0(&self) -> f64 {
        db_to_linear(self.noise_dbw_per_hz)
    }

    pub fn gamma_gap(&self) -> f64 {
        db_to_linear(self.snr_gap_db)
    }

    /// Short label such as `(3,100)e2mac` or `cmac`.
    pub fn label(&self) -> String {
        match self.mac_variant {
            MacVariant::CMac => "cmac".to_string(),
            MacVariant::E2MacR => format!(
                "({},{})e2macr[e_ref={}uJ]",
                self.n_phases,
                self.cluster_size,
                self.e_ref * 1e6
            ),
            v => format!("({},{}){}", self.n_phases, self.cluster_size, v.as_str()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("r_outer", self.r_outer),
            ("w", self.w),
            ("t_ra", self.t_ra),
            ("resource_budget", self.resource_budget),
            ("intra_window", self.intra_window),
            ("intra_per_member", self.intra_per_member),
            ("intra_cap", self.intra_cap),
            ("backoff_divisor", self.backoff_divisor),
            ("t_inter", self.t_inter),
            ("cluster_size", self.cluster_size),
            ("rach.frame", self.rach.frame),
            ("rach.preamble_duration", self.rach.preamble_duration),
        ];
        for (field, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(field, format!("must be positive and finite, got {v}")));
            }
        }
        let non_negative = [
            ("r_inner", self.r_inner),
            ("delta_d", self.delta_d),
            ("e_ref", self.e_ref),
            ("lambda", self.lambda),
            ("rach.preamble_offset", self.rach.preamble_offset),
        ];
        for (field, v) in non_negative {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::config(field, format!("must be non-negative and finite, got {v}")));
            }
        }
        if !(self.e0 > 0.0) || !self.e0.is_finite() {
            return Err(Error::config("e0", "initial energy must be positive"));
        }
        if self.r_inner >= self.r_outer {
            return Err(Error::config("r_inner", "inner radius must be below the outer radius"));
        }
        if self.n_t == 0 {
            return Err(Error::config("n_t", "at least one device is required"));
        }
        if self.n_phases == 0 {
            return Err(Error::config("n_phases", "at least one phase is required"));
        }
        if self.bunches == 0 {
            return Err(Error::config("bunches", "at least one bunch is required"));
        }
        if self.k_m == 0 {
            return Err(Error::config("k_m", "at least one attempt is required"));
        }
        if self.rach.preambles == 0 {
            return Err(Error::config("rach.preambles", "at least one preamble is required"));
        }
        if self.rach.preamble_offset + self.rach.preamble_duration > self.rach.frame {
            return Err(Error::config("rach.preamble_offset", "preamble must fit inside its frame"));
        }
        if self.lambda > 1.0 {
            return Err(Error::config("lambda", "compression coefficient must be at most 1"));
        }
        if self.cluster_size < 1.0 {
            return Err(Error::config("cluster_size", "mean cluster size must be at least 1"));
        }
        if self.intra_window + self.t_inter > self.resource_budget + 1e-12 {
            return Err(Error::config(
                "intra_window",
                "intra- and inter-cluster windows exceed the resource budget",
            ));
        }
        if self.resource_budget > self.t_ra {
            return Err(Error::config("resource_budget", "resource budget exceeds the allocation interval"));
        }
        if self.intra_cap * f64::from(self.bunches) > self.intra_window + 1e-12 {
            return Err(Error::config("intra_cap", "per-cluster windows do not fit their bunches"));
        }
        if let ReselectPolicy::EveryCycles(0) = self.ch_reselect {
            return Err(Error::config("ch_reselect", "reselection period must be at least one cycle"));
        }
        if self.mac_variant == MacVariant::E2MacN && self.ch_reselect != ReselectPolicy::OnDeath {
            return Err(Error::config("ch_reselect", "e2macn reselects only when a head dies"));
        }
        if self.trace_every == Some(0) {
            return Err(Error::config("trace_every", "sampling period must be at least one cycle"));
        }
        self.power.validate()?;
        self.traffic.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        SimConfig::default().validate().unwrap();
        SimConfig::desk_scale().validate().unwrap();
        SimConfig::desk_scale().with_variant(MacVariant::E2MacN).validate().unwrap();
    }

    #[test]
    fn field_level_errors() {
        let bad = SimConfig {
            n_phases: 0,
            ..SimConfig::default()
        };
        match bad.validate() {
            Err(Error::Config { field, .. }) => assert_eq!(field, "n_phases"),
            other => panic!("{other:?}"),
        }
        let bad = SimConfig {
            intra_window: 2.0,
            ..SimConfig::default()
        };
        assert!(matches!(bad.validate(), Err(Error::Config { field, .. }) if field == "intra_window"));
        let bad = SimConfig {
            mac_variant: MacVariant::E2MacN,
            ..SimConfig::default()
        };
        assert!(matches!(bad.validate(), Err(Error::Config { field, .. }) if field == "ch_reselect"));
    }

    #[test]
    fn variant_names_round_trip() {
        for v in [MacVariant::E2Mac, MacVariant::E2MacN, MacVariant::E2MacR, MacVariant::CMac] {
            assert_eq!(v.as_str().parse::<MacVariant>().unwrap(), v);
            let json = serde_json::to_string(&v).unwrap();
            assert_eq!(json, format!("\"{}\"", v.as_str()));
        }
        assert!("tdma".parse::<MacVariant>().is_err());
    }
}
