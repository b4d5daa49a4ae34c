//! Whether re-forming clusters around a newly selected head saves energy.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lifetime::{cm_cycle_energy, ClusterModel, PowerProfile, TrafficProfile};
use crate::radio::{RadioEnvironment, RateScheme};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReformationDecision {
    pub beneficial: bool,
    /// Energy saved per device over the head tenure, net of the re-formation cost (J).
    pub savings: f64,
    /// Member energy per cycle with the head at the cluster centre (J).
    pub member_energy_reformed: f64,
    /// Member energy per cycle with the head `r` away from the centre (J).
    pub member_energy_kept: f64,
    /// Mean member distance to the off-centre head (m).
    pub offcenter_distance: f64,
}

/// Mean member distance to a head at distance `r` from the cluster centre,
/// to fourth order in `r`.
pub fn offcenter_member_distance(r: f64, z: f64, sigma: f64) -> f64 {
    let x = (sigma / z).sqrt();
    0.5 / x + 2.0 * r * r * x / 3.0 - 0.25 * r.powi(4) * x.powi(3)
}

/// Compares the member energy over a head tenure `t_dur` with and without
/// re-forming the clusters; `e_ref` is the per-device cost of re-forming.
#[allow(clippy::too_many_arguments)]
pub fn reformation_decision(
    e_ref: f64,
    t_dur: f64,
    t_c: f64,
    r: f64,
    cluster: &ClusterModel,
    power: &PowerProfile,
    traffic: &TrafficProfile,
    env: &RadioEnvironment,
    rate_m: RateScheme,
) -> Result<ReformationDecision> {
    if !(e_ref >= 0.0) || !(t_dur >= 0.0) || !(t_c > 0.0) || !(r >= 0.0) {
        return Err(Error::domain(
            "re-formation needs e_ref >= 0, t_dur >= 0, t_c > 0 and r >= 0",
        ));
    }
    cluster.validate()?;
    let member_energy = |d: f64| -> Result<f64> {
        let omega = env.pl_intra.linear(d)?;
        let rate = rate_m.rate(env, env.w_m, power.p_t_m, omega, cluster.z)?;
        cm_cycle_energy(power, traffic, rate)
    };
    let d_cent = cluster.member_distance();
    let d_r = offcenter_member_distance(r, cluster.z, cluster.sigma);
    let reformed = member_energy(d_cent)?;
    let kept = member_energy(d_r)?;
    let gross = t_dur / t_c * (kept - reformed);
    Ok(ReformationDecision {
        beneficial: e_ref < gross,
        savings: gross - e_ref,
        member_energy_reformed: reformed,
        member_energy_kept: kept,
        offcenter_distance: d_r,
    })
}
