//! Device and cluster lifetime under a static-plus-dynamic energy model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radio::{RadioEnvironment, RateScheme};

/// Per-device power and energy constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PowerProfile {
    /// Circuit power while transmitting (W).
    pub p_c: f64,
    /// Sleep power (W).
    pub p_s: f64,
    /// Listening / receiving power (W).
    pub p_l: f64,
    /// Member-to-head transmit power (W).
    pub p_t_m: f64,
    /// Head-to-base-station transmit power (W).
    pub p_t_h: f64,
    /// Direct-access transmit power (W).
    pub p_t_d: f64,
    /// Inverse power-amplifier efficiency.
    pub xi: f64,
    /// Static energy per duty cycle as member (J).
    pub e_s: f64,
    /// Static energy per duty cycle as cluster head (J).
    pub e_s_h: f64,
    /// Static energy per duty cycle in direct mode (J).
    pub e_s_d: f64,
    /// Active time outside transmission (s).
    pub t_a: f64,
}

impl Default for PowerProfile {
    fn default() -> Self {
        PowerProfile {
            p_c: 0.02,
            p_s: 0.0,
            p_l: 0.02,
            p_t_m: 0.05,
            p_t_h: 0.2,
            p_t_d: 0.2,
            xi: 2.0,
            e_s: 0.0,
            e_s_h: 1.5e-3,
            e_s_d: 0.0,
            t_a: 0.0,
        }
    }
}

impl PowerProfile {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("p_c", self.p_c),
            ("p_s", self.p_s),
            ("p_l", self.p_l),
            ("p_t_m", self.p_t_m),
            ("p_t_h", self.p_t_h),
            ("p_t_d", self.p_t_d),
            ("e_s", self.e_s),
            ("e_s_h", self.e_s_h),
            ("e_s_d", self.e_s_d),
            ("t_a", self.t_a),
        ];
        for (name, v) in fields {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::config(name, "must be finite and non-negative"));
            }
        }
        if !(self.xi >= 1.0) {
            return Err(Error::config("xi", "inverse amplifier efficiency must be >= 1"));
        }
        if self.e_s_h < self.e_s {
            return Err(Error::config("e_s_h", "head static energy must be at least the member static energy"));
        }
        Ok(())
    }

    /// Transmit power for the given mode.
    pub fn tx_power(&self, mode: TxMode) -> f64 {
        match mode {
            TxMode::Member => self.p_t_m,
            TxMode::Head => self.p_t_h,
            TxMode::Direct => self.p_t_d,
        }
    }

    /// Power drawn while transmitting in the given mode, `P_c + ξ P_t`.
    pub fn tx_draw(&self, mode: TxMode) -> f64 {
        self.p_c + self.xi * self.tx_power(mode)
    }

    /// Static energy per cycle for the given mode.
    pub fn static_energy(&self, mode: TxMode) -> f64 {
        match mode {
            TxMode::Member => self.e_s,
            TxMode::Head => self.e_s_h,
            TxMode::Direct => self.e_s_d,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TxMode {
    Member,
    Head,
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrafficProfile {
    /// Mean interval between reports (s).
    pub t_i: f64,
    /// Mean packet size (bits).
    pub d_i: f64,
    /// Packet generation rate (1/s).
    pub r_g: f64,
}

impl Default for TrafficProfile {
    /// One 5 KB report every seven hours.
    fn default() -> Self {
        let t_i = 7.0 * 3600.0;
        TrafficProfile {
            t_i,
            d_i: 5.0 * 8192.0,
            r_g: 1.0 / t_i,
        }
    }
}

impl TrafficProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_i > 0.0) {
            return Err(Error::config("t_i", "report interval must be positive"));
        }
        if !(self.d_i > 0.0) {
            return Err(Error::config("d_i", "packet size must be positive"));
        }
        if !(self.r_g >= 0.0) {
            return Err(Error::config("r_g", "generation rate must be non-negative"));
        }
        Ok(())
    }
}

/// Homogeneous cluster used by the cluster-size analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    /// Mean cluster size.
    pub z: f64,
    /// Packet-length compression coefficient at the head.
    pub lambda: f64,
    /// Cluster duty cycle (s).
    pub t_c: f64,
    /// Reference remaining energy (J).
    pub e0: f64,
    /// Device density (1/m²).
    pub sigma: f64,
    /// Devices in the cell.
    pub n_t: u32,
}

impl ClusterModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.z >= 1.0) {
            return Err(Error::domain(format!("cluster size must be >= 1, got {}", self.z)));
        }
        if self.z > f64::from(self.n_t) {
            return Err(Error::domain("cluster size exceeds the device count"));
        }
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(Error::domain("compression coefficient must lie in (0, 1]"));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::domain("device density must be positive"));
        }
        if !(self.t_c > 0.0) || !(self.e0 >= 0.0) {
            return Err(Error::domain("duty cycle must be positive and energy non-negative"));
        }
        Ok(())
    }

    /// Mean member-to-head distance `sqrt(z / 4σ)`.
    pub fn member_distance(&self) -> f64 {
        (self.z / (4.0 * self.sigma)).sqrt()
    }
}

/// Expected lifetime of a device from its remaining energy and duty cycle.
pub fn node_lifetime(
    e_remaining: f64,
    traffic: &TrafficProfile,
    rate: f64,
    power: &PowerProfile,
    mode: TxMode,
) -> Result<f64> {
    let airtime = cycle_airtime(traffic, rate, power)?;
    let denom = power.static_energy(mode)
        + power.p_s * (traffic.t_i - airtime - power.t_a)
        + airtime * power.tx_draw(mode);
    if !(denom > 0.0) {
        return Err(Error::domain("per-cycle energy must be positive"));
    }
    Ok(e_remaining * traffic.t_i / denom)
}

/// The same lifetime through the energy-efficiency factorisation
/// `L = (E T_i / D_i) * R / (P̃_t(R) + P̃_c)`.
pub fn node_lifetime_factored(
    e_remaining: f64,
    traffic: &TrafficProfile,
    rate: f64,
    power: &PowerProfile,
    mode: TxMode,
) -> Result<f64> {
    cycle_airtime(traffic, rate, power)?;
    let p_t_eff = power.xi * power.tx_power(mode)
        + rate / traffic.d_i * (power.static_energy(mode) + power.p_s * (traffic.t_i - power.t_a));
    let p_c_eff = power.p_c - power.p_s;
    let denom = p_t_eff + p_c_eff;
    if !(denom > 0.0) {
        return Err(Error::domain("effective power must be positive"));
    }
    let efficiency = rate / denom;
    Ok(e_remaining * traffic.t_i / traffic.d_i * efficiency)
}

fn cycle_airtime(traffic: &TrafficProfile, rate: f64, power: &PowerProfile) -> Result<f64> {
    if !(rate > 0.0) {
        return Err(Error::domain(format!("rate must be positive, got {rate}")));
    }
    let airtime = traffic.d_i / rate;
    if airtime + power.t_a > traffic.t_i {
        return Err(Error::InfeasibleDutyCycle {
            airtime,
            active: power.t_a,
            interval: traffic.t_i,
        });
    }
    Ok(airtime)
}

/// Energy of a member per cluster cycle: `E_s + D(P_c + ξP_t^m)/R_m`.
pub fn cm_cycle_energy(power: &PowerProfile, traffic: &TrafficProfile, r_m: f64) -> Result<f64> {
    if !(r_m > 0.0) {
        return Err(Error::domain("member rate must be positive"));
    }
    Ok(power.e_s + traffic.d_i * power.tx_draw(TxMode::Member) / r_m)
}

/// Energy of the head per cluster cycle: static, listening to `z - 1` members
/// and forwarding `1 + λ(z - 1)` packets.
pub fn ch_cycle_energy(
    cluster: &ClusterModel,
    power: &PowerProfile,
    traffic: &TrafficProfile,
    r_m: f64,
    r_h: f64,
) -> Result<f64> {
    if !(r_m > 0.0) || !(r_h > 0.0) {
        return Err(Error::domain("member and head rates must be positive"));
    }
    if !(cluster.z >= 1.0) {
        return Err(Error::domain("cluster size must be >= 1"));
    }
    let members = cluster.z - 1.0;
    Ok(power.e_s_h
        + members * traffic.d_i * power.p_l / r_m
        + (1.0 + cluster.lambda * members) * traffic.d_i * power.tx_draw(TxMode::Head) / r_h)
}

/// Intra- and inter-cluster rates of the homogeneous cluster at head distance `d_h`.
pub fn cluster_rates(
    cluster: &ClusterModel,
    power: &PowerProfile,
    env: &RadioEnvironment,
    d_h: f64,
    rate_m: RateScheme,
    rate_h: RateScheme,
) -> Result<(f64, f64)> {
    let omega_m = env.pl_intra.linear(cluster.member_distance())?;
    let omega_h = env.pl_inter.linear(d_h)?;
    let r_m = rate_m.rate(env, env.w_m, power.p_t_m, omega_m, cluster.z)?;
    let r_h = rate_h.rate(env, env.w_h, power.p_t_h, omega_h, f64::from(cluster.n_t) / cluster.z)?;
    Ok((r_m, r_h))
}

/// Per-node expected energy per cluster cycle when the head role rotates
/// with probability `1/z`.
pub fn cluster_cycle_energy(
    cluster: &ClusterModel,
    power: &PowerProfile,
    traffic: &TrafficProfile,
    env: &RadioEnvironment,
    d_h: f64,
    rate_m: RateScheme,
    rate_h: RateScheme,
) -> Result<f64> {
    cluster.validate()?;
    if !(d_h > 0.0) {
        return Err(Error::domain("head distance must be positive"));
    }
    let (r_m, r_h) = cluster_rates(cluster, power, env, d_h, rate_m, rate_h)?;
    let e_m = cm_cycle_energy(power, traffic, r_m)?;
    let e_h = ch_cycle_energy(cluster, power, traffic, r_m, r_h)?;
    let w = 1.0 / cluster.z;
    Ok(w * e_h + (1.0 - w) * e_m)
}

/// Expected lifetime of a cluster at head distance `d_h`.
pub fn cluster_lifetime(
    cluster: &ClusterModel,
    power: &PowerProfile,
    traffic: &TrafficProfile,
    env: &RadioEnvironment,
    d_h: f64,
    rate_m: RateScheme,
    rate_h: RateScheme,
) -> Result<f64> {
    let per_cycle = cluster_cycle_energy(cluster, power, traffic, env, d_h, rate_m, rate_h)?;
    Ok(cluster.e0 * cluster.t_c / per_cycle)
}

/// Denominator of the FDMA/FDMA closed form (λ = 1), written through
/// `A1 = P_t^m (4σ)^{γ_m/2} / (Γ N0 w_m β_m)` and
/// `A2 = P_t^h N_t / (Γ N0 w_h β_h d_h^{γ_h})`.
pub fn fdma_closed_form_denominator(
    z: f64,
    cluster: &ClusterModel,
    power: &PowerProfile,
    traffic: &TrafficProfile,
    env: &RadioEnvironment,
    d_h: f64,
) -> f64 {
    let (beta_m, gamma_m) = env.pl_intra.power_law();
    let (beta_h, gamma_h) = env.pl_inter.power_law();
    let gn = env.gamma_gap * env.n0;
    let a1 = power.p_t_m * (4.0 * cluster.sigma).powf(gamma_m / 2.0) / (gn * env.w_m * beta_m);
    let n_t = f64::from(cluster.n_t);
    let a2 = power.p_t_h * n_t / (gn * env.w_h * beta_h * d_h.powf(gamma_h));
    let lb = env.log_base;
    let d = traffic.d_i;
    power.e_s
        + (power.e_s_h - power.e_s) / z
        + d * (z - 1.0) * (power.p_c + power.xi * power.p_t_m + power.p_l)
            / (env.w_m * lb.log1p(a1 * z.powf(1.0 - gamma_m / 2.0)))
        + n_t * d * (power.p_c + power.xi * power.p_t_h) / (z * env.w_h * lb.log1p(a2 / z))
}

/// FDMA/FDMA cluster lifetime through the closed form (λ = 1).
pub fn cluster_lifetime_fdma_closed_form(
    cluster: &ClusterModel,
    power: &PowerProfile,
    traffic: &TrafficProfile,
    env: &RadioEnvironment,
    d_h: f64,
) -> f64 {
    cluster.e0 * cluster.t_c / fdma_closed_form_denominator(cluster.z, cluster, power, traffic, env, d_h)
}

/// First-energy-drain network lifetime: the earliest death.
pub fn fed_lifetime(lifetimes: &[f64]) -> Result<f64> {
    lifetimes
        .iter()
        .copied()
        .reduce(f64::min)
        .ok_or_else(|| Error::domain("FED lifetime of an empty network"))
}
