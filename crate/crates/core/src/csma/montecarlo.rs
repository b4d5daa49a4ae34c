//! Event-driven unslotted non-persistent CSMA channel.
//!
//! Attempts (new and retried) arrive as one Poisson stream. An attempt that
//! finds the channel idle starts a busy period; attempts within the detection
//! delay of that start also transmit and all of them collide; later attempts
//! sense the channel busy. Tagged packets are then replayed against the
//! recorded timeline with exponential backoffs to measure access delay.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelSimConfig {
    pub g: f64,
    pub tau_p: f64,
    pub delta_d: f64,
    pub delta: f64,
    pub theta_b: f64,
    pub theta_f: f64,
    /// Attempts in the background stream.
    pub arrivals: usize,
    /// Tagged packets replayed for the delay estimate.
    pub tagged: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelSimResult {
    /// Fraction of attempts that found the channel idle.
    pub p_i: f64,
    /// Fraction of attempts that succeeded.
    pub p_is: f64,
    /// Fraction of time carrying a successful transmission.
    pub success_airtime: f64,
    /// Mean time from arrival to the end of a successful transmission.
    pub mean_delay: f64,
    pub horizon: f64,
}

#[derive(Debug, Clone, Copy)]
struct BusyPeriod {
    start: f64,
    end: f64,
}

enum Outcome {
    Busy,
    Collided,
    Success,
}

pub fn simulate_channel(cfg: &ChannelSimConfig) -> Result<ChannelSimResult> {
    if !(cfg.g > 0.0) || !(cfg.tau_p > 0.0) || !(cfg.delta_d >= 0.0) || !(cfg.delta >= 0.0) {
        return Err(Error::domain("channel simulation needs g > 0, tau_p > 0 and non-negative delays"));
    }
    if cfg.arrivals == 0 {
        return Err(Error::domain("channel simulation needs at least one arrival"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let gap = Exp::new(cfg.g).map_err(|e| Error::domain(e.to_string()))?;

    let mut periods: Vec<BusyPeriod> = Vec::new();
    let mut t = 0.0;
    let mut initiators = 0usize;
    let mut successes = 0usize;
    let mut joined = false;
    for _ in 0..cfg.arrivals {
        t += gap.sample(&mut rng);
        match periods.last_mut() {
            Some(p) if t < p.end => {
                if t < p.start + cfg.delta_d {
                    p.end = t + cfg.tau_p + cfg.delta;
                    joined = true;
                }
            }
            _ => {
                if !periods.is_empty() && !joined {
                    successes += 1;
                }
                periods.push(BusyPeriod {
                    start: t,
                    end: t + cfg.tau_p + cfg.delta,
                });
                initiators += 1;
                joined = false;
            }
        }
    }
    // the final period's outcome depends on arrivals after the horizon
    let last = *periods.last().expect("at least one arrival");
    let next = t + gap.sample(&mut rng);
    if !joined && next >= last.start + cfg.delta_d {
        successes += 1;
    }
    let horizon = t.max(last.end);

    let mean_delay = if cfg.tagged > 0 {
        tagged_delay(cfg, &periods, horizon, &mut rng)?
    } else {
        f64::NAN
    };

    let n = cfg.arrivals as f64;
    Ok(ChannelSimResult {
        p_i: initiators as f64 / n,
        p_is: successes as f64 / n,
        success_airtime: successes as f64 * cfg.tau_p / horizon,
        mean_delay,
        horizon,
    })
}

fn tagged_delay(cfg: &ChannelSimConfig, periods: &[BusyPeriod], horizon: f64, rng: &mut ChaCha8Rng) -> Result<f64> {
    let busy = Exp::new(1.0 / cfg.theta_b).map_err(|e| Error::domain(e.to_string()))?;
    let fail = Exp::new(1.0 / cfg.theta_f).map_err(|e| Error::domain(e.to_string()))?;
    let classify = |t: f64| -> Outcome {
        let idx = periods.partition_point(|p| p.start <= t);
        if idx > 0 {
            let p = periods[idx - 1];
            if t < p.end {
                return if t < p.start + cfg.delta_d {
                    Outcome::Collided
                } else {
                    Outcome::Busy
                };
            }
        }
        match periods.get(idx) {
            Some(next) if next.start < t + cfg.delta_d => Outcome::Collided,
            _ => Outcome::Success,
        }
    };
    let mut total = 0.0;
    for _ in 0..cfg.tagged {
        let mut t = rng.random::<f64>() * horizon;
        let mut delay = 0.0;
        let mut attempts = 0u64;
        loop {
            attempts += 1;
            if attempts > 100_000_000 {
                return Err(Error::DelayDivergent);
            }
            let step = match classify(t) {
                Outcome::Success => {
                    delay += cfg.tau_p;
                    break;
                }
                Outcome::Busy => busy.sample(rng),
                Outcome::Collided => cfg.tau_p + fail.sample(rng),
            };
            delay += step;
            t = (t + step) % horizon;
        }
        total += delay;
    }
    Ok(total / cfg.tagged as f64)
}
