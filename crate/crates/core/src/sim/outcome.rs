use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::report::{empirical_cdf, quantile};

/// Energy a device has spent, by activity (J).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub tx: f64,
    pub listen: f64,
    pub sleep: f64,
    /// Per-cycle static charges of the current role.
    pub fixed: f64,
    pub reform: f64,
}

impl EnergyLedger {
    pub fn total(&self) -> f64 {
        self.tx + self.listen + self.sleep + self.fixed + self.reform
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    HeadSelected,
    Reform,
    /// Start of a member transmission towards its head.
    IntraTx,
    IntraSuccess,
    IntraFailure,
    Forward,
    Preamble,
    DirectTx,
    Drop,
    Death,
}

/// One line of the event log. `window` is the interval the device was
/// allowed to start a transmission in, where one applies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimEvent {
    pub time: f64,
    pub device: usize,
    pub kind: EventKind,
    /// Residual energy after the event (J).
    pub energy: f64,
    pub cluster: Option<usize>,
    /// Bunch of the cluster for intra-cluster events.
    pub bunch: Option<u32>,
    pub window: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergySample {
    pub time: f64,
    pub energy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOutcome {
    pub label: String,
    pub seed: u64,
    pub initial_energy: f64,
    /// Device positions relative to the base station (m).
    pub positions: Vec<Point>,
    /// Death time of each device, indexed by id; `None` if still alive at the stop.
    pub death_times: Vec<Option<f64>>,
    pub residual_energy: Vec<f64>,
    pub ledgers: Vec<EnergyLedger>,
    /// Delay of every delivered packet (s).
    pub packet_delays: Vec<f64>,
    pub dropped_packets: u64,
    pub collisions: u64,
    pub cycles: u64,
    pub events: Option<Vec<SimEvent>>,
    pub energy_trace: Option<Vec<EnergySample>>,
}

impl SimOutcome {
    fn deaths(&self) -> impl Iterator<Item = f64> + '_ {
        self.death_times.iter().flatten().copied()
    }

    /// First-energy-drain lifetime; `None` if nobody died.
    pub fn fed(&self) -> Option<f64> {
        self.deaths().reduce(f64::min)
    }

    /// Time of the last death, once every device has died.
    pub fn last_death(&self) -> Option<f64> {
        if self.death_times.iter().all(Option::is_some) {
            self.deaths().reduce(f64::max)
        } else {
            None
        }
    }

    /// Largest relative mismatch between spent energy and the ledgers.
    pub fn energy_balance_error(&self) -> f64 {
        self.residual_energy
            .iter()
            .zip(&self.ledgers)
            .map(|(r, l)| ((self.initial_energy - r - l.total()) / self.initial_energy).abs())
            .fold(0.0, f64::max)
    }
}

/// Fraction of devices dead by each death time.
pub fn lifetime_cdf(outcome: &SimOutcome) -> Result<Vec<(f64, f64)>> {
    let n = outcome.death_times.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let deaths: Vec<f64> = outcome.deaths().collect();
    let scale = deaths.len() as f64 / n as f64;
    Ok(empirical_cdf(&deaths)?.into_iter().map(|(t, f)| (t, f * scale)).collect())
}

pub fn delay_cdf(outcome: &SimOutcome) -> Result<Vec<(f64, f64)>> {
    empirical_cdf(&outcome.packet_delays)
}

/// One row of the variant comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub variant: String,
    pub seed: u64,
    pub fed_s: Option<f64>,
    pub last_death_s: Option<f64>,
    pub delay_p50_s: Option<f64>,
    pub delay_max_s: Option<f64>,
}

impl SummaryRow {
    pub fn from_outcome(o: &SimOutcome) -> Self {
        SummaryRow {
            variant: o.label.clone(),
            seed: o.seed,
            fed_s: o.fed(),
            last_death_s: o.last_death(),
            delay_p50_s: quantile(&o.packet_delays, 0.5),
            delay_max_s: o.packet_delays.iter().copied().reduce(f64::max),
        }
    }
}

/// Per-variant aggregate over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub variant: String,
    pub seeds: usize,
    pub mean_fed_s: f64,
    pub mean_last_death_s: f64,
    pub delay_p50_s: f64,
    pub delay_p95_s: f64,
    pub delay_max_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<SummaryRow>,
    pub variants: Vec<VariantSummary>,
}

/// Aggregates outcomes grouped by label, in first-seen order. Delay
/// percentiles pool every packet of every seed.
pub fn summarize(outcomes: &[SimOutcome]) -> Result<Comparison> {
    let rows: Vec<SummaryRow> = outcomes.iter().map(SummaryRow::from_outcome).collect();
    let mut labels: Vec<&str> = Vec::new();
    for o in outcomes {
        if !labels.contains(&o.label.as_str()) {
            labels.push(&o.label);
        }
    }
    let mut variants = Vec::with_capacity(labels.len());
    for label in labels {
        let group: Vec<&SimOutcome> = outcomes.iter().filter(|o| o.label == label).collect();
        let mean = |f: &dyn Fn(&SimOutcome) -> Option<f64>| -> Result<f64> {
            let v: Option<Vec<f64>> = group.iter().map(|o| f(o)).collect();
            let v = v.ok_or_else(|| Error::domain(format!("`{label}`: a run ended with devices alive")))?;
            Ok(v.iter().sum::<f64>() / v.len() as f64)
        };
        let delays: Vec<f64> = group.iter().flat_map(|o| o.packet_delays.iter().copied()).collect();
        variants.push(VariantSummary {
            variant: label.to_string(),
            seeds: group.len(),
            mean_fed_s: mean(&|o| o.fed())?,
            mean_last_death_s: mean(&|o| o.last_death())?,
            delay_p50_s: quantile(&delays, 0.5).unwrap_or(f64::NAN),
            delay_p95_s: quantile(&delays, 0.95).unwrap_or(f64::NAN),
            delay_max_s: delays.iter().copied().reduce(f64::max).unwrap_or(f64::NAN),
        });
    }
    Ok(Comparison { rows, variants })
}
