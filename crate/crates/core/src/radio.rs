//! Path loss and expected uplink rates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Converts a dB quantity to linear scale.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Log-distance path loss `intercept + slope * log10(d / reference)` in dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLossModel {
    pub intercept_db: f64,
    pub slope_db_per_decade: f64,
    pub reference_distance: f64,
}

impl PathLossModel {
    /// Macro-cell device-to-base-station loss, distances referenced to 1 km.
    pub fn inter_cluster_default() -> Self {
        PathLossModel {
            intercept_db: 128.1,
            slope_db_per_decade: 37.6,
            reference_distance: 1000.0,
        }
    }

    /// Short-range device-to-device loss, distances referenced to 1 m.
    pub fn intra_cluster_default() -> Self {
        PathLossModel {
            intercept_db: 38.5,
            slope_db_per_decade: 20.0,
            reference_distance: 1.0,
        }
    }

    pub fn loss_db(&self, d: f64) -> Result<f64> {
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::domain(format!("path loss distance must be positive, got {d}")));
        }
        Ok(self.intercept_db + self.slope_db_per_decade * (d / self.reference_distance).log10())
    }

    /// Linear attenuation Ω(d) > 0.
    pub fn linear(&self, d: f64) -> Result<f64> {
        self.loss_db(d).map(db_to_linear)
    }

    /// Power-law form Ω(d) = β d^γ: returns (β, γ).
    pub fn power_law(&self) -> (f64, f64) {
        let gamma = self.slope_db_per_decade / 10.0;
        let beta = db_to_linear(self.intercept_db) / self.reference_distance.powf(gamma);
        (beta, gamma)
    }
}

/// Free function form of [`PathLossModel::linear`].
pub fn path_loss_linear(model: &PathLossModel, d: f64) -> Result<f64> {
    model.linear(d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LogBase {
    #[default]
    Base2,
    Natural,
}

impl LogBase {
    #[inline]
    pub fn log1p(self, x: f64) -> f64 {
        match self {
            LogBase::Base2 => x.ln_1p() / std::f64::consts::LN_2,
            LogBase::Natural => x.ln_1p(),
        }
    }
}

/// Bandwidths, noise and path-loss models shared by every rate computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RadioEnvironment {
    /// Intra-cluster bandwidth (Hz).
    pub w_m: f64,
    /// Inter-cluster bandwidth (Hz).
    pub w_h: f64,
    /// Noise power spectral density (W/Hz).
    pub n0: f64,
    /// SNR gap, linear.
    pub gamma_gap: f64,
    pub pl_inter: PathLossModel,
    pub pl_intra: PathLossModel,
    pub log_base: LogBase,
}

impl Default for RadioEnvironment {
    /// Single 180 kHz resource block, -204 dBW/Hz noise and a 13 dB gap.
    fn default() -> Self {
        RadioEnvironment {
            w_m: 180e3,
            w_h: 180e3,
            n0: db_to_linear(-204.0),
            gamma_gap: db_to_linear(13.0),
            pl_inter: PathLossModel::inter_cluster_default(),
            pl_intra: PathLossModel::intra_cluster_default(),
            log_base: LogBase::Base2,
        }
    }
}

impl RadioEnvironment {
    pub fn validate(&self) -> Result<()> {
        if !(self.w_m > 0.0) {
            return Err(Error::config("w_m", "bandwidth must be positive"));
        }
        if !(self.w_h > 0.0) {
            return Err(Error::config("w_h", "bandwidth must be positive"));
        }
        if !(self.n0 > 0.0) {
            return Err(Error::config("n0", "noise density must be positive"));
        }
        if !(self.gamma_gap >= 1.0) {
            return Err(Error::config("gamma_gap", "SNR gap must be at least 1 (0 dB)"));
        }
        Ok(())
    }

    /// Received SNR over bandwidth `w` after the gap.
    #[inline]
    pub fn snr(&self, w: f64, p_tx: f64, omega: f64) -> f64 {
        p_tx / (self.n0 * self.gamma_gap * omega * w)
    }

    /// Shannon-form rate `w log(1 + p / (N0 Γ Ω w))` over the full band.
    #[inline]
    pub fn shannon_rate(&self, w: f64, p_tx: f64, omega: f64) -> f64 {
        if p_tx == 0.0 {
            return 0.0;
        }
        w * self.log_base.log1p(self.snr(w, p_tx, omega))
    }

    /// Transmit power needed to reach `snr` over bandwidth `w` and loss `omega`.
    pub fn power_for_snr(&self, snr: f64, w: f64, omega: f64) -> f64 {
        snr * self.n0 * self.gamma_gap * omega * w
    }
}

fn check_rate_inputs(w: f64, p_tx: f64, omega: f64) -> Result<()> {
    if !(w >= 0.0) || !(p_tx >= 0.0) {
        return Err(Error::domain("bandwidth and transmit power must be non-negative"));
    }
    if !(omega > 0.0) {
        return Err(Error::domain("path loss must be positive"));
    }
    Ok(())
}

/// FDMA: each of `u` users owns `w/u` of the band.
pub fn fdma_rate(env: &RadioEnvironment, w: f64, p_tx: f64, omega: f64, u: u32) -> Result<f64> {
    if u == 0 {
        return Err(Error::domain("number of sharing users must be at least 1"));
    }
    check_rate_inputs(w, p_tx, omega)?;
    let share = w / f64::from(u);
    Ok(env.shannon_rate(share, p_tx, omega))
}

/// TDMA: each of `u` users owns the full band for `1/u` of the time.
pub fn tdma_rate(env: &RadioEnvironment, w: f64, p_tx: f64, omega: f64, u: u32) -> Result<f64> {
    if u == 0 {
        return Err(Error::domain("number of sharing users must be at least 1"));
    }
    check_rate_inputs(w, p_tx, omega)?;
    Ok(env.shannon_rate(w, p_tx, omega) / f64::from(u))
}

/// Effective per-packet rate of a contention channel that delivers a packet
/// with probability `p_is` per attempt, when each node offers `r_g * t_ra`
/// packets per reservation interval.
pub fn csma_effective_rate(
    env: &RadioEnvironment,
    w: f64,
    p_tx: f64,
    omega: f64,
    p_is: f64,
    r_g: f64,
    t_ra: f64,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&p_is) {
        return Err(Error::domain(format!("p_is must be a probability, got {p_is}")));
    }
    let load = r_g * t_ra;
    if !(load > 0.0) {
        return Err(Error::domain("r_g * t_ra must be positive"));
    }
    check_rate_inputs(w, p_tx, omega)?;
    Ok(p_is / load * env.shannon_rate(w, p_tx, omega))
}

/// Multiple-access scheme used to turn (bandwidth, power, loss, sharers) into
/// an expected rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "scheme")]
pub enum RateScheme {
    Fdma,
    Tdma,
    /// Reserved resources: the full band, independent of the number of sharers.
    Dedicated,
    /// Contention with per-attempt success `p_is` and `load = r_g * T_RA`
    /// packets per node per interval.
    Csma { p_is: f64, load: f64 },
}

impl RateScheme {
    pub fn rate(&self, env: &RadioEnvironment, w: f64, p_tx: f64, omega: f64, u: f64) -> Result<f64> {
        match *self {
            RateScheme::Fdma | RateScheme::Tdma => {
                if !(u >= 1.0) {
                    return Err(Error::domain(format!("number of sharing users must be >= 1, got {u}")));
                }
                check_rate_inputs(w, p_tx, omega)?;
                // real-valued sharer count: z is continuous in the analysis
                if matches!(self, RateScheme::Fdma) {
                    Ok(env.shannon_rate(w / u, p_tx, omega))
                } else {
                    Ok(env.shannon_rate(w, p_tx, omega) / u)
                }
            }
            RateScheme::Dedicated => {
                check_rate_inputs(w, p_tx, omega)?;
                Ok(env.shannon_rate(w, p_tx, omega))
            }
            RateScheme::Csma { p_is, load } => csma_effective_rate(env, w, p_tx, omega, p_is, load, 1.0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn table_one_path_losses() {
        let h = PathLossModel::inter_cluster_default();
        let m = PathLossModel::intra_cluster_default();
        assert_relative_eq!(h.linear(1000.0).unwrap(), 10f64.powf(12.81), max_relative = 1e-12);
        assert_relative_eq!(h.linear(1000.0).unwrap(), 6.457e12, max_relative = 1e-3);
        assert_relative_eq!(m.linear(1.0).unwrap(), 7.079e3, max_relative = 1e-3);
        assert!(h.linear(400.0).unwrap() > h.linear(300.0).unwrap());
    }

    #[test]
    fn nonpositive_distance_rejected() {
        let m = PathLossModel::intra_cluster_default();
        assert!(m.linear(0.0).is_err());
        assert!(m.linear(-3.0).is_err());
    }

    #[test]
    fn power_law_matches_db_form() {
        let h = PathLossModel::inter_cluster_default();
        let (beta, gamma) = h.power_law();
        for d in [37.0f64, 250.0, 500.0, 1900.0] {
            assert_relative_eq!(beta * d.powf(gamma), h.linear(d).unwrap(), max_relative = 1e-12);
        }
    }

    #[test]
    fn unit_snr_gives_one_bit() {
        let env = RadioEnvironment {
            n0: 1.0,
            gamma_gap: 1.0,
            ..RadioEnvironment::default()
        };
        assert_relative_eq!(fdma_rate(&env, 1.0, 1.0, 1.0, 1).unwrap(), 1.0, max_relative = 1e-15);
        assert_eq!(fdma_rate(&env, 1.0, 0.0, 1.0, 1).unwrap(), 0.0);
        assert!(fdma_rate(&env, 1.0, 1.0, 1.0, 0).is_err());
        assert!(tdma_rate(&env, 1.0, 1.0, 1.0, 0).is_err());
    }

    #[test]
    fn cell_edge_rate_matches_direct_substitution() {
        // 180 kHz, 0.2 W, Ω_h(500 m), single user, base-2 logs.
        // Oracle: 180e3 * log2(1 + 0.2 / (10^-20.4 * 10^1.3 * 10^11.678... * 180e3))
        let env = RadioEnvironment::default();
        let omega = env.pl_inter.linear(500.0).unwrap();
        let r = fdma_rate(&env, 180e3, 0.2, omega, 1).unwrap();
        assert_relative_eq!(r, 886_265.248_989_327_5, max_relative = 1e-9);
    }

    #[test]
    fn csma_rate_collapses_to_shannon() {
        let env = RadioEnvironment::default();
        let omega = env.pl_intra.linear(60.0).unwrap();
        let plain = env.shannon_rate(180e3, 0.05, omega);
        assert_relative_eq!(
            csma_effective_rate(&env, 180e3, 0.05, omega, 1.0, 2.0, 0.5).unwrap(),
            plain,
            max_relative = 1e-15
        );
        assert_eq!(csma_effective_rate(&env, 180e3, 0.05, omega, 0.0, 1.0, 1.0).unwrap(), 0.0);
        assert!(csma_effective_rate(&env, 180e3, 0.05, omega, 0.5, 0.0, 1.0).is_err());
    }

    #[test]
    fn csma_rate_under_reservation_parameters() {
        // r_g = 1/7h, T_RA = 1000 s, p_is = 0.627, Ω_m at 62.35 m.
        let env = RadioEnvironment::default();
        let omega = env.pl_intra.linear(62.35).unwrap();
        let r_g = 1.0 / (7.0 * 3600.0);
        let r = csma_effective_rate(&env, 180e3, 0.05, omega, 0.627, r_g, 1000.0).unwrap();
        // independent: snr = 0.05/(N0 Γ Ω w); rate = p_is w log2(1+snr)/(r_g T_RA)
        let snr = 0.05 / (10f64.powf(-20.4) * 10f64.powf(1.3) * omega * 180e3);
        let expected = 0.627 * 180e3 * (1.0 + snr).log2() / (1000.0 / 25200.0);
        assert_relative_eq!(r, expected, max_relative = 1e-12);
    }

    #[test]
    fn tdma_equals_fdma_for_one_user_and_halves() {
        let env = RadioEnvironment::default();
        let omega = env.pl_intra.linear(80.0).unwrap();
        let f1 = fdma_rate(&env, 180e3, 0.05, omega, 1).unwrap();
        let t1 = tdma_rate(&env, 180e3, 0.05, omega, 1).unwrap();
        assert_eq!(f1, t1);
        let t2 = tdma_rate(&env, 180e3, 0.05, omega, 2).unwrap();
        assert_relative_eq!(t2, t1 / 2.0, max_relative = 1e-15);
    }

    proptest! {
        #[test]
        fn rates_are_monotone(
            w in 1e3f64..1e6, p in 1e-3f64..1.0, d in 1.0f64..400.0, u in 1u32..64,
        ) {
            let env = RadioEnvironment::default();
            let om = env.pl_intra.linear(d).unwrap();
            let om2 = env.pl_intra.linear(d * 1.5).unwrap();
            for f in [fdma_rate, tdma_rate] {
                let r = f(&env, w, p, om, u).unwrap();
                prop_assert!(r > 0.0);
                prop_assert!(f(&env, w, p * 1.1, om, u).unwrap() > r);
                prop_assert!(f(&env, w * 1.1, p, om, u).unwrap() > r);
                prop_assert!(f(&env, w, p, om2, u).unwrap() < r);
                prop_assert!(f(&env, w, p, om, u + 1).unwrap() < r);
                prop_assert_eq!(f(&env, w, 0.0, om, u).unwrap(), 0.0);
            }
            prop_assert!(tdma_rate(&env, w, p, om, u).unwrap() <= fdma_rate(&env, w, p, om, u).unwrap());
        }

        #[test]
        fn db_round_trip(d in 0.5f64..5000.0) {
            for m in [PathLossModel::inter_cluster_default(), PathLossModel::intra_cluster_default()] {
                let lin = m.linear(d).unwrap();
                let back = db_to_linear(linear_to_db(lin));
                prop_assert!(((back - lin) / lin).abs() < 1e-12);
                prop_assert!((linear_to_db(lin) - m.loss_db(d).unwrap()).abs() < 1e-9);
            }
        }
    }
}
