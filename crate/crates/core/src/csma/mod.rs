//! Non-persistent and n-phase CSMA/CA: closed-form energy efficiency,
//! throughput and delay, plus a Monte-Carlo channel for cross-checks.

mod lambert;
pub mod montecarlo;

pub use lambert::{lambert_w, spectral_optimum_load};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of one contention domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsmaParams {
    /// Aggregate attempt rate, new and retransmitted (1/s).
    pub g: f64,
    /// Packet transmission time (s).
    pub tau_p: f64,
    /// Detection delay (s).
    pub delta_d: f64,
    /// Propagation delay (s).
    pub delta: f64,
    /// Mean backoff after sensing busy (s).
    pub theta_b: f64,
    /// Mean backoff after a collision (s).
    pub theta_f: f64,
    /// Acknowledgement round trip (s).
    pub tau_r: f64,
    /// Maximum number of retries summed in the delay.
    pub k_m: u32,
    /// Number of contention phases.
    pub n: u32,
    /// Payload per packet (bits).
    pub d_tilde: f64,
    /// Energy of a successful attempt (J).
    pub e_s: f64,
    /// Energy of a collided attempt (J).
    pub e_f: f64,
    /// Energy of an attempt that sensed busy (J).
    pub e_b: f64,
    pub p_l: f64,
    pub p_c: f64,
    pub p_t_m: f64,
    pub xi: f64,
    /// Link rate while transmitting (bit/s).
    pub r_in: f64,
}

impl Default for CsmaParams {
    /// Unit-cycle setting: `T = 1 s`, `δ_d / τ_p = 0.005`, 5-bit payload,
    /// energies 5 / 6 / 2 mJ for success / collision / busy.
    fn default() -> Self {
        let tau_p = 1.0 / 1.005;
        CsmaParams {
            g: 0.0,
            tau_p,
            delta_d: 0.005 * tau_p,
            delta: 0.0,
            theta_b: 1.0,
            theta_f: 1.0,
            tau_r: 0.0,
            k_m: 64,
            n: 1,
            d_tilde: 5.0,
            e_s: 5e-3,
            e_f: 6e-3,
            e_b: 2e-3,
            p_l: 0.02,
            p_c: 0.02,
            p_t_m: 0.05,
            xi: 2.0,
            r_in: 5.0 / tau_p,
        }
    }
}

impl CsmaParams {
    /// `T = τ_p + δ_d + δ`.
    pub fn cycle(&self) -> f64 {
        self.tau_p + self.delta_d + self.delta
    }

    /// Replaces the energy triple with the values implied by the powers and timings.
    pub fn with_derived_energy(mut self) -> Self {
        self.e_s = (self.p_c + self.xi * self.p_t_m) * self.tau_p + self.p_l * self.tau_r;
        self.e_f = self.e_s + self.p_l * self.theta_f;
        self.e_b = self.p_l * self.theta_b;
        self
    }

    pub fn with_g(self, g: f64) -> Self {
        CsmaParams { g, ..self }
    }

    pub fn with_n(self, n: u32) -> Self {
        CsmaParams { n, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("g", self.g),
            ("delta_d", self.delta_d),
            ("delta", self.delta),
            ("theta_b", self.theta_b),
            ("theta_f", self.theta_f),
            ("tau_r", self.tau_r),
            ("e_s", self.e_s),
            ("e_f", self.e_f),
            ("e_b", self.e_b),
            ("r_in", self.r_in),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::config(name, "must be finite and non-negative"));
            }
        }
        if !(self.tau_p > 0.0) {
            return Err(Error::config("tau_p", "transmission time must be positive"));
        }
        if self.n == 0 {
            return Err(Error::config("n", "at least one phase is required"));
        }
        if !(self.d_tilde > 0.0) {
            return Err(Error::config("d_tilde", "payload must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CsmaMetrics {
    pub y_hat: f64,
    pub p_i: f64,
    pub p_s: f64,
    pub p_is: f64,
    pub e_cons: f64,
    /// bits per joule
    pub u_e: f64,
    /// bits per second
    pub u_s: f64,
    /// seconds; infinite when no attempt can succeed
    pub delay: f64,
}

/// Mean offset of the last attempt inside the detection window,
/// `δ_d - (1 - e^{-g δ_d}) / g`, extended continuously to 0 at `g = 0`.
pub fn busy_tail(g: f64, delta_d: f64) -> f64 {
    let x = g * delta_d;
    if x <= 0.0 {
        return 0.0;
    }
    if x < 1e-3 {
        // 1 - (1 - e^{-x})/x = x/2 - x²/6 + x³/24 - x⁴/120
        return delta_d * x * (0.5 - x * (1.0 / 6.0 - x * (1.0 / 24.0 - x / 120.0)));
    }
    delta_d - (-(-x).exp_m1()) / g
}

/// Idle, no-follower and success probabilities `(p_i, p_s, p_is)` at attempt rate `g`.
pub fn probabilities_at(g: f64, t: f64, delta_d: f64) -> (f64, f64, f64) {
    let e = (-g * delta_d).exp();
    let p_i = 1.0 / (g * t + e);
    let p_s = e;
    let p_is = 1.0 / (g * t / e + 1.0);
    (p_i, p_s, p_is)
}

pub fn channel_probabilities(p: &CsmaParams) -> (f64, f64, f64) {
    probabilities_at(p.g, p.cycle(), p.delta_d)
}

/// Mean energy spent per attempt given the attempt-outcome probabilities.
pub fn energy_per_attempt(p: &CsmaParams, p_i: f64, p_s: f64) -> f64 {
    (1.0 - p_i) * p.e_b + p_i * (1.0 - p_s) * p.e_f + p_i * p_s * p.e_s
}

pub fn per_packet_energy(p: &CsmaParams) -> f64 {
    let (p_i, p_s, _) = channel_probabilities(p);
    energy_per_attempt(p, p_i, p_s)
}

fn energy_efficiency_at(p: &CsmaParams, g: f64) -> f64 {
    let t = p.cycle();
    let e1 = (g * p.delta_d).exp();
    let gt = g * t;
    let f_weight = gt * e1 * e1 / (gt * e1 + 1.0);
    let b_weight = 1.0 + (gt - 1.0) * e1;
    p.d_tilde / (p.e_s + f_weight * p.e_f + b_weight * p.e_b)
}

/// Delivered bits per joule in closed form,
/// `D / (E_S + gT e^{2gδ_d}/(gT e^{gδ_d} + 1) E_F + (1 + (gT - 1) e^{gδ_d}) E_B)`.
///
/// The success and busy weights equal those of `D p_is / E_cons`; the
/// collision weight is larger than the `e^{gδ_d} - 1` that ratio gives.
pub fn energy_efficiency(p: &CsmaParams) -> f64 {
    energy_efficiency_at(p, p.g)
}

/// `D p_is / E_cons`: delivered bits over the mean energy of an attempt.
pub fn energy_efficiency_per_attempt(p: &CsmaParams) -> f64 {
    let (p_i, p_s, p_is) = channel_probabilities(p);
    p.d_tilde * p_is / energy_per_attempt(p, p_i, p_s)
}

fn throughput_at(p: &CsmaParams, g: f64) -> f64 {
    let gt = g * p.cycle();
    g * p.tau_p / (1.0 + gt * (g * p.delta_d).exp()) * p.r_in
}

/// Successful bits per second, `g τ_p / (1 + gT e^{gδ_d}) R_in`.
pub fn throughput(p: &CsmaParams) -> f64 {
    throughput_at(p, p.g)
}

fn delay_terms(p: &CsmaParams, p_i: f64, p_s: f64, p_is: f64) -> Result<Option<f64>> {
    if !(p_is > 0.0) {
        return Err(Error::DelayDivergent);
    }
    if p_is >= 1.0 {
        return Ok(None);
    }
    let q = 1.0 - p_is;
    Ok(Some(
        (1.0 - p_i) / q * p.theta_b + p_i * (1.0 - p_s) / q * (p.theta_f + p.tau_p),
    ))
}

/// Retry-truncated mean delay from arrival to successful transmission,
/// `Σ_{k=0}^{k_m} (1 - p_is)^k p_is (τ_p + k c)` with `c` the mean cost of a failure.
pub fn delay_sum(p: &CsmaParams, p_i: f64, p_s: f64, p_is: f64) -> Result<f64> {
    let Some(cost) = delay_terms(p, p_i, p_s, p_is)? else {
        return Ok(p.tau_p);
    };
    let q = 1.0 - p_is;
    let mut weight = p_is;
    let mut total = 0.0;
    for k in 0..=p.k_m {
        total += weight * (p.tau_p + f64::from(k) * cost);
        weight *= q;
        if weight == 0.0 {
            break;
        }
    }
    Ok(total)
}

/// Untruncated limit `τ_p + (1/p_is - 1) c`.
pub fn delay_limit(p: &CsmaParams, p_i: f64, p_s: f64, p_is: f64) -> Result<f64> {
    let Some(cost) = delay_terms(p, p_i, p_s, p_is)? else {
        return Ok(p.tau_p);
    };
    Ok(p.tau_p + (1.0 / p_is - 1.0) * cost)
}

pub fn mean_delay(p: &CsmaParams) -> Result<f64> {
    let (p_i, p_s, p_is) = channel_probabilities(p);
    delay_sum(p, p_i, p_s, p_is)
}

pub fn mean_delay_limit(p: &CsmaParams) -> Result<f64> {
    let (p_i, p_s, p_is) = channel_probabilities(p);
    delay_limit(p, p_i, p_s, p_is)
}

/// Single-phase metrics (ignores `p.n`).
pub fn base_metrics(p: &CsmaParams) -> Result<CsmaMetrics> {
    p.validate()?;
    let (p_i, p_s, p_is) = channel_probabilities(p);
    Ok(CsmaMetrics {
        y_hat: busy_tail(p.g, p.delta_d),
        p_i,
        p_s,
        p_is,
        e_cons: energy_per_attempt(p, p_i, p_s),
        u_e: energy_efficiency(p),
        u_s: throughput(p),
        delay: delay_sum(p, p_i, p_s, p_is).unwrap_or(f64::INFINITY),
    })
}

/// Per-phase attempt-outcome probabilities `(p̃_i, p̃_s, p̃_is)` with `g_n = g / n`;
/// the idle probability carries the `1/n` chance of being in one's own phase.
pub fn phase_probabilities(p: &CsmaParams) -> (f64, f64, f64) {
    let n = f64::from(p.n);
    let (p_i, p_s, p_is) = probabilities_at(p.g / n, p.cycle(), p.delta_d);
    (p_i / n, p_s, p_is / n)
}

/// n-phase metrics: energy and spectral efficiency at the per-phase load
/// `g / n`, delay with the phase-scaled probabilities.
pub fn n_phase_metrics(p: &CsmaParams) -> Result<CsmaMetrics> {
    p.validate()?;
    let g_n = p.g / f64::from(p.n);
    let (p_i, p_s, p_is) = phase_probabilities(p);
    Ok(CsmaMetrics {
        y_hat: busy_tail(g_n, p.delta_d),
        p_i,
        p_s,
        p_is,
        e_cons: energy_per_attempt(p, p_i, p_s),
        u_e: energy_efficiency_at(p, g_n),
        u_s: throughput_at(p, g_n),
        delay: delay_sum(p, p_i, p_s, p_is).unwrap_or(f64::INFINITY),
    })
}

/// Energy efficiency as a function of the normalised spectral efficiency
/// `u = U_S / R_in` when detection delay is negligible.
pub fn zero_dd_energy_efficiency(p: &CsmaParams, u: f64) -> Result<f64> {
    check_normalised(u)?;
    Ok(p.d_tilde / (p.e_s + u * p.e_f + u / (1.0 - u) * p.e_b))
}

/// Mean delay as a function of `u = U_S / R_in` when detection delay is negligible.
pub fn zero_dd_delay(p: &CsmaParams, u: f64) -> Result<f64> {
    check_normalised(u)?;
    let n = f64::from(p.n);
    Ok(p.tau_p + (n - 1.0) * p.theta_b + n * p.theta_b * u / (1.0 - u))
}

fn check_normalised(u: f64) -> Result<()> {
    if !(0.0..1.0).contains(&u) {
        return Err(Error::domain(format!("normalised spectral efficiency must lie in [0, 1), got {u}")));
    }
    Ok(())
}

/// One point of the two tradeoff curves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TradeoffPoint {
    pub u_s_normalised: f64,
    pub u_e: f64,
    pub delay: f64,
}

pub fn zero_dd_tradeoffs(p: &CsmaParams, grid: &[f64]) -> Result<Vec<TradeoffPoint>> {
    grid.iter()
        .map(|&u| {
            Ok(TradeoffPoint {
                u_s_normalised: u,
                u_e: zero_dd_energy_efficiency(p, u)?,
                delay: zero_dd_delay(p, u)?,
            })
        })
        .collect()
}

/// Row of a load / phase sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub g: f64,
    pub n: u32,
    pub p_i: f64,
    pub p_s: f64,
    pub p_is: f64,
    pub u_e_bits_per_j: f64,
    pub u_s_bits_per_s: f64,
    pub delay_s: f64,
}

/// Evaluates n-phase metrics over every `(g, n)` pair.
pub fn sweep(base: &CsmaParams, loads: &[f64], phases: &[u32]) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(loads.len() * phases.len());
    for &n in phases {
        for &g in loads {
            let m = n_phase_metrics(&base.with_g(g).with_n(n))?;
            rows.push(SweepRow {
                g,
                n,
                p_i: m.p_i,
                p_s: m.p_s,
                p_is: m.p_is,
                u_e_bits_per_j: m.u_e,
                u_s_bits_per_s: m.u_s,
                delay_s: m.delay,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fig() -> CsmaParams {
        CsmaParams::default()
    }

    #[test]
    fn busy_tail_limits_and_sampling() {
        assert_eq!(busy_tail(0.0, 1e-3), 0.0);
        assert_relative_eq!(busy_tail(1e9, 1e-3), 1e-3, max_relative = 1e-5);
        // continuity across the series switch
        let d = 2e-3;
        let lo = busy_tail(0.999e-3 / d, d);
        let hi = busy_tail(1.001e-3 / d, d);
        assert_relative_eq!(lo, hi, max_relative = 3e-3);
        let x: f64 = 0.5;
        assert_relative_eq!(busy_tail(x / d, d), d * (1.0 - (1.0 - (-x).exp()) / x), max_relative = 1e-12);

        // last Poisson arrival inside [0, δ_d], 0 when there is none
        let g = 10.0 / d;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let trials = 200_000;
        let mut total = 0.0;
        for _ in 0..trials {
            let mut t = 0.0;
            let mut last = 0.0;
            loop {
                t += -(1.0 - rng.random::<f64>()).ln() / g;
                if t > d {
                    break;
                }
                last = t;
            }
            total += last;
        }
        let mc = total / trials as f64;
        assert!((mc / busy_tail(g, d) - 1.0).abs() < 0.01, "{mc} vs {}", busy_tail(g, d));
    }

    #[test]
    fn zero_load_limits() {
        let p = fig();
        assert_eq!(channel_probabilities(&p), (1.0, 1.0, 1.0));
        assert_relative_eq!(per_packet_energy(&p), p.e_s);
        assert_relative_eq!(energy_efficiency(&p), 1000.0, max_relative = 1e-12);
        assert_eq!(throughput(&p), 0.0);
        assert_eq!(mean_delay(&p).unwrap(), p.tau_p);
        assert_eq!(mean_delay_limit(&p).unwrap(), p.tau_p);
    }

    #[test]
    fn per_packet_energy_at_moderate_load() {
        // gT = 5 with T = 1 s, δ_d = 0.005/1.005 s
        let p = fig().with_g(5.0);
        let x: f64 = 5.0 * 0.005 / 1.005;
        let p_i = 1.0 / (5.0 + (-x).exp());
        let p_s = (-x).exp();
        let oracle = (1.0 - p_i) * 2e-3 + p_i * (1.0 - p_s) * 6e-3 + p_i * p_s * 5e-3;
        assert_relative_eq!(per_packet_energy(&p), oracle, max_relative = 1e-14);
        assert_relative_eq!(per_packet_energy(&p), 2.506_167_447_743_594e-3, max_relative = 1e-9);
    }

    #[test]
    fn efficiency_forms_differ_only_in_collision_weight() {
        for g in [0.01, 0.3, 1.0, 5.0, 13.7, 40.0] {
            let p = fig().with_g(g);
            let gt = g * p.cycle();
            let e1 = (g * p.delta_d).exp();
            let closed = p.d_tilde / energy_efficiency(&p);
            let per_attempt = p.d_tilde / energy_efficiency_per_attempt(&p);
            let gap = (gt * e1 * e1 / (gt * e1 + 1.0) - (e1 - 1.0)) * p.e_f;
            assert_relative_eq!(closed - per_attempt, gap, max_relative = 1e-9, epsilon = 1e-15);
            let no_collision_cost = CsmaParams { e_f: 0.0, ..p };
            assert_relative_eq!(
                energy_efficiency(&no_collision_cost),
                energy_efficiency_per_attempt(&no_collision_cost),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn efficiency_falls_and_delay_rises_with_load() {
        let mut prev_ue = f64::INFINITY;
        let mut prev_d = 0.0;
        for k in 0..=200 {
            let p = fig().with_g(0.1 * k as f64);
            let ue = energy_efficiency(&p);
            let d = mean_delay(&p).unwrap();
            assert!(ue < prev_ue);
            assert!(d > prev_d);
            prev_ue = ue;
            prev_d = d;
        }
    }

    #[test]
    fn throughput_peak_location() {
        let p = fig();
        let mut best = (0.0, 0.0);
        for k in 1..=40_000 {
            let x = k as f64 * 1e-3;
            let s = throughput(&p.with_g(x / p.tau_p));
            if s > best.1 {
                best = (x, s);
            }
        }
        let a = p.delta_d / p.tau_p;
        assert!((best.0 - spectral_optimum_load(a).unwrap()).abs() < 0.1, "{best:?}");
    }

    #[test]
    fn delay_sum_and_limit_agree_for_many_retries() {
        for g in [0.2, 1.0, 5.0, 13.0] {
            let p = CsmaParams { k_m: 10_000, ..fig().with_g(g) };
            let a = mean_delay(&p).unwrap();
            let b = mean_delay_limit(&p).unwrap();
            assert!((a / b - 1.0).abs() < 1e-3, "g = {g}: {a} vs {b}");
        }
        assert!(matches!(delay_sum(&fig(), 0.5, 0.5, 0.0), Err(Error::DelayDivergent)));
    }

    #[test]
    fn one_phase_is_base() {
        for g in [0.0, 0.5, 3.0, 20.0] {
            let p = fig().with_g(g);
            assert_eq!(n_phase_metrics(&p).unwrap(), base_metrics(&p).unwrap());
        }
    }

    #[test]
    fn derived_energy_triple() {
        let p = CsmaParams { tau_r: 0.01, ..fig() }.with_derived_energy();
        assert_relative_eq!(p.e_s, 0.12 * p.tau_p + 0.02 * 0.01);
        assert_relative_eq!(p.e_f, p.e_s + 0.02 * p.theta_f);
        assert_relative_eq!(p.e_b, 0.02 * p.theta_b);
    }

    #[test]
    fn zero_detection_tradeoffs() {
        let p = CsmaParams { delta_d: 0.0, delta: 0.0, k_m: 100_000, ..fig() };
        assert_relative_eq!(zero_dd_energy_efficiency(&p, 0.0).unwrap(), p.d_tilde / p.e_s);
        assert!(zero_dd_energy_efficiency(&p, 1.0 - 1e-12).unwrap() < 1e-6);
        assert!(zero_dd_delay(&p, 1.0 - 1e-12).unwrap() > 1e9);
        assert!(zero_dd_delay(&p, 1.0).is_err());
        assert!(zero_dd_energy_efficiency(&p, -0.1).is_err());
        let curve = zero_dd_tradeoffs(&p, &[0.0, 0.2, 0.5]).unwrap();
        assert_eq!(curve.len(), 3);
        assert!(curve[0].u_e > curve[1].u_e && curve[1].u_e > curve[2].u_e);
    }

    #[test]
    fn sweep_shape() {
        let rows = sweep(&fig(), &[0.0, 1.0, 2.0], &[1, 3]).unwrap();
        assert_eq!(rows.len(), 6);
        assert_eq!(rows[3].n, 3);
        assert!(sweep(&fig(), &[], &[1]).unwrap().is_empty());
    }

    fn arb_params() -> impl Strategy<Value = CsmaParams> {
        (0.0f64..50.0, 1e-4f64..10.0, 0.0f64..0.05, 0.0f64..0.01, 1e-3f64..5.0, 1e-3f64..5.0, 1e-4f64..1e-2, 1e-4f64..1e-2, 1e-4f64..1e-2)
            .prop_map(|(g, tau_p, a, d, tb, tf, es, ef, eb)| CsmaParams {
                g,
                tau_p,
                delta_d: a * tau_p,
                delta: d * tau_p,
                theta_b: tb,
                theta_f: tf,
                e_s: es,
                e_f: ef,
                e_b: eb,
                ..CsmaParams::default()
            })
    }

    proptest! {
        #[test]
        fn probability_ordering(p in arb_params()) {
            let (p_i, p_s, p_is) = channel_probabilities(&p);
            prop_assert!((p_is - p_i * p_s).abs() <= 1e-12 * p_is.max(1e-300));
            prop_assert!(0.0 <= p_is && p_is <= p_i + 1e-15 && p_i <= 1.0 + 1e-15);
            prop_assert!(p_s <= 1.0);
            let e = per_packet_energy(&p);
            let lo = p.e_s.min(p.e_f).min(p.e_b);
            let hi = p.e_s.max(p.e_f).max(p.e_b);
            prop_assert!(e >= lo * (1.0 - 1e-12) && e <= hi * (1.0 + 1e-12));
            let w = (1.0 - p_i) + p_i * (1.0 - p_s) + p_i * p_s;
            prop_assert!((w - 1.0).abs() < 1e-12);
        }

        #[test]
        fn zero_detection_matches_full_forms(g in 0.0f64..20.0, n in 1u32..8, tau_p in 0.01f64..2.0, tb in 0.01f64..2.0) {
            let p = CsmaParams { g, n, tau_p, delta_d: 0.0, delta: 0.0, theta_b: tb, k_m: u32::MAX, ..CsmaParams::default() };
            let full = n_phase_metrics(&CsmaParams { k_m: 200_000, ..p }).unwrap();
            let u = full.u_s / p.r_in;
            let ue = zero_dd_energy_efficiency(&p, u).unwrap();
            prop_assert!((ue / full.u_e - 1.0).abs() < 1e-9);
            let (p_i, p_s, p_is) = phase_probabilities(&p);
            let limit = delay_limit(&p, p_i, p_s, p_is).unwrap();
            let d = zero_dd_delay(&p, u).unwrap();
            prop_assert!((d / limit - 1.0).abs() < 1e-9, "{} vs {}", d, limit);
        }
    }
}
