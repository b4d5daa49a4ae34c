//! Lifetime-maximising cluster size.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::csma::probabilities_at;
use crate::error::{Error, Result};
use crate::geometry::sample_in_annulus;
use crate::lifetime::{
    cluster_lifetime, cluster_lifetime_fdma_closed_form, ch_cycle_energy, cm_cycle_energy, ClusterModel, PowerProfile,
    TrafficProfile,
};
use crate::radio::{PathLossModel, RadioEnvironment, RateScheme};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SizeOptimum {
    pub z_star: u32,
    pub lifetime: f64,
    /// Sizes whose lifetime could not be evaluated, with the reason.
    pub excluded: Vec<(u32, String)>,
}

/// Integer maximiser of a unimodal `lifetime(z)` on `[lo, hi]` by ternary
/// search followed by a ±2 scan around the bracket. Sizes where `lifetime`
/// fails are skipped and reported.
pub fn optimal_cluster_size_by<F>(lo: u32, hi: u32, mut lifetime: F) -> Result<SizeOptimum>
where
    F: FnMut(u32) -> Result<f64>,
{
    if lo == 0 || lo > hi {
        return Err(Error::domain(format!("invalid cluster size bounds [{lo}, {hi}]")));
    }
    let mut memo: BTreeMap<u32, Option<f64>> = BTreeMap::new();
    let mut excluded = Vec::new();
    let mut eval = |z: u32, memo: &mut BTreeMap<u32, Option<f64>>| -> f64 {
        *memo.entry(z).or_insert_with(|| match lifetime(z) {
            Ok(v) if v.is_finite() => Some(v),
            Ok(v) => {
                excluded.push((z, format!("non-finite lifetime {v}")));
                None
            }
            Err(e) => {
                excluded.push((z, e.to_string()));
                None
            }
        })
        .get_or_insert(f64::NEG_INFINITY)
    };
    let (mut a, mut b) = (lo, hi);
    while b - a > 2 {
        let m1 = a + (b - a) / 3;
        let m2 = b - (b - a) / 3;
        if eval(m1, &mut memo) < eval(m2, &mut memo) {
            a = m1 + 1;
        } else {
            b = m2;
        }
    }
    let scan_lo = a.saturating_sub(2).max(lo);
    let scan_hi = b.saturating_add(2).min(hi);
    let mut best: Option<(u32, f64)> = None;
    for z in scan_lo..=scan_hi {
        let v = eval(z, &mut memo);
        if v > f64::NEG_INFINITY && best.is_none_or(|(_, bv)| v > bv) {
            best = Some((z, v));
        }
    }
    let (z_star, lifetime) = best.ok_or_else(|| Error::domain("no feasible cluster size in the search range"))?;
    excluded.sort_by_key(|(z, _)| *z);
    Ok(SizeOptimum {
        z_star,
        lifetime,
        excluded,
    })
}

/// Cluster size maximising the FDMA/FDMA cluster lifetime at head distance `d_h`
/// (the cell edge for the worst-case cluster).
pub fn optimal_cluster_size(
    template: &ClusterModel,
    power: &PowerProfile,
    traffic: &TrafficProfile,
    env: &RadioEnvironment,
    d_h: f64,
    bounds: (u32, u32),
) -> Result<SizeOptimum> {
    if bounds.1 > template.n_t {
        return Err(Error::domain("upper size bound exceeds the device count"));
    }
    optimal_cluster_size_by(bounds.0, bounds.1, |z| {
        let c = ClusterModel { z: f64::from(z), ..*template };
        Ok(cluster_lifetime_fdma_closed_form(&c, power, traffic, env, d_h))
    })
}

/// Same search using the general lifetime with arbitrary access schemes.
#[allow(clippy::too_many_arguments)]
pub fn optimal_cluster_size_general(
    template: &ClusterModel,
    power: &PowerProfile,
    traffic: &TrafficProfile,
    env: &RadioEnvironment,
    d_h: f64,
    bounds: (u32, u32),
    rate_m: RateScheme,
    rate_h: RateScheme,
) -> Result<SizeOptimum> {
    optimal_cluster_size_by(bounds.0, bounds.1, |z| {
        let c = ClusterModel { z: f64::from(z), ..*template };
        cluster_lifetime(&c, power, traffic, env, d_h, rate_m, rate_h)
    })
}

/// How the device density is derived from the cell geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DensityArea {
    #[default]
    Annulus,
    Disc,
}

/// Cell-wide clustered uplink with periodic resource reservation: members
/// contend by CSMA/CA inside a per-cluster window, heads forward over a
/// dedicated channel once per reservation period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReservationScenario {
    pub n_t: u32,
    pub r_inner: f64,
    pub r_outer: f64,
    pub density_area: DensityArea,
    /// Reservation period, also the cluster duty cycle (s).
    pub t_ra: f64,
    /// Bandwidth for both hops (Hz).
    pub w: f64,
    pub power: PowerProfile,
    pub traffic: TrafficProfile,
    pub e0: f64,
    pub lambda: f64,
    pub n_phases: u32,
    pub delta_d: f64,
    /// Contention window per member (s) and its cap (s).
    pub intra_per_member: f64,
    pub intra_cap: f64,
    /// Head static energy on top of listening through the window (J).
    pub head_static: f64,
    pub pl_inter: PathLossModel,
    pub pl_intra: PathLossModel,
    pub n0: f64,
    pub gamma_gap: f64,
}

impl Default for ReservationScenario {
    fn default() -> Self {
        ReservationScenario {
            n_t: 5000,
            r_inner: 50.0,
            r_outer: 500.0,
            density_area: DensityArea::Annulus,
            t_ra: 1000.0,
            w: 180e3,
            power: PowerProfile::default(),
            traffic: TrafficProfile::default(),
            e0: 2.0,
            lambda: 1.0,
            n_phases: 1,
            delta_d: 1e-3,
            intra_per_member: 1e-3,
            intra_cap: 0.2,
            head_static: 1.5e-3,
            pl_inter: PathLossModel::inter_cluster_default(),
            pl_intra: PathLossModel::intra_cluster_default(),
            n0: crate::radio::db_to_linear(-204.0),
            gamma_gap: crate::radio::db_to_linear(13.0),
        }
    }
}

/// Per-size quantities of [`ReservationScenario`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScenarioPoint {
    pub z: f64,
    pub t_intra: f64,
    pub member_distance: f64,
    pub link_rate: f64,
    pub tau_p: f64,
    pub attempt_rate: f64,
    pub p_is: f64,
    pub r_m: f64,
    pub r_h: f64,
    pub e_member: f64,
    pub e_head: f64,
    pub lifetime: f64,
}

impl ReservationScenario {
    pub fn sigma(&self) -> f64 {
        let inner = match self.density_area {
            DensityArea::Annulus => self.r_inner,
            DensityArea::Disc => 0.0,
        };
        f64::from(self.n_t) / (PI * (self.r_outer * self.r_outer - inner * inner))
    }

    pub fn t_intra(&self, z: f64) -> f64 {
        (z * self.intra_per_member).min(self.intra_cap)
    }

    fn env(&self) -> RadioEnvironment {
        RadioEnvironment {
            w_m: self.w,
            w_h: self.w,
            n0: self.n0,
            gamma_gap: self.gamma_gap,
            pl_inter: self.pl_inter,
            pl_intra: self.pl_intra,
            ..RadioEnvironment::default()
        }
    }

    /// Evaluates the model at mean cluster size `z` and head distance `d_h`.
    pub fn evaluate(&self, z: f64, d_h: f64) -> Result<ScenarioPoint> {
        if !(z >= 1.0) || z > f64::from(self.n_t) {
            return Err(Error::domain(format!("cluster size {z} outside [1, {}]", self.n_t)));
        }
        if self.n_phases == 0 {
            return Err(Error::config("n_phases", "at least one phase is required"));
        }
        let env = self.env();
        let sigma = self.sigma();
        let t_intra = self.t_intra(z);
        let d_m = (z / (4.0 * sigma)).sqrt();
        let omega_m = env.pl_intra.linear(d_m)?;
        let link_rate = env.shannon_rate(self.w, self.power.p_t_m, omega_m);
        let tau_p = self.traffic.d_i / link_rate;
        // all member packets of one reservation period contend inside the window
        let per_period = self.traffic.r_g * self.t_ra;
        let g = z * per_period / t_intra;
        let (_, _, p_is) = probabilities_at(g, tau_p + self.delta_d, self.delta_d);
        let r_m = RateScheme::Csma { p_is, load: per_period }.rate(&env, self.w, self.power.p_t_m, omega_m, z)?;
        let omega_h = env.pl_inter.linear(d_h)?;
        let r_h = RateScheme::Dedicated.rate(&env, self.w, self.power.p_t_h, omega_h, f64::from(self.n_t) / z)?;
        let theta_b = t_intra / (5.0 * f64::from(self.n_phases));
        let power = PowerProfile {
            e_s: per_period * self.power.p_c * theta_b,
            e_s_h: self.power.p_c * t_intra + self.head_static,
            ..self.power
        };
        let cluster = ClusterModel {
            z,
            lambda: self.lambda,
            t_c: self.t_ra,
            e0: self.e0,
            sigma,
            n_t: self.n_t,
        };
        let e_member = cm_cycle_energy(&power, &self.traffic, r_m)?;
        let e_head = ch_cycle_energy(&cluster, &power, &self.traffic, r_m, r_h)?;
        let per_cycle = e_head / z + (1.0 - 1.0 / z) * e_member;
        Ok(ScenarioPoint {
            z,
            t_intra,
            member_distance: d_m,
            link_rate,
            tau_p,
            attempt_rate: g,
            p_is,
            r_m,
            r_h,
            e_member,
            e_head,
            lifetime: self.e0 * self.t_ra / per_cycle,
        })
    }

    pub fn lifetime(&self, z: f64, d_h: f64) -> Result<f64> {
        Ok(self.evaluate(z, d_h)?.lifetime)
    }

    /// Lifetime of the worst-placed (cell-edge) cluster.
    pub fn edge_lifetime(&self, z: f64) -> Result<f64> {
        self.lifetime(z, self.r_outer)
    }

    pub fn optimal_size(&self, bounds: (u32, u32)) -> Result<SizeOptimum> {
        optimal_cluster_size_by(bounds.0, bounds.1.min(self.n_t), |z| self.edge_lifetime(f64::from(z)))
    }

    /// Lifetimes at size `z` for `count` heads placed uniformly in the cell.
    pub fn lifetime_samples(&self, z: f64, count: usize, seed: u64) -> Result<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                let d_h = sample_in_annulus(&mut rng, self.r_inner, self.r_outer).norm();
                self.lifetime(z, d_h)
            })
            .collect()
    }
}
