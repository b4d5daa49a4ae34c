//! Whether clustering a region of `N` devices beats direct access.
//!
//! Both modes use FDMA and transmit powers chosen to hit target SNRs: `s_h`
//! at the head (members share `w_m`) and `s_b` at the base station (the head
//! owns `w_h`, direct-access devices share `w_m + w_h`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::mean_pairwise_distance_disc;
use crate::lifetime::{PowerProfile, TrafficProfile};
use crate::radio::{db_to_linear, RadioEnvironment};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeasibilityInputs {
    /// Devices in the region.
    pub n: u32,
    /// Region radius (m).
    pub r: f64,
    /// Region-to-base-station distance (m).
    pub big_r: f64,
    /// Target SNR at the head, linear.
    pub s_h: f64,
    /// Target SNR at the base station, linear.
    pub s_b: f64,
    pub lambda: f64,
    /// Member band (Hz).
    pub w_m: f64,
    /// Head band (Hz).
    pub w_h: f64,
    pub power: PowerProfile,
    /// `d_i` is the payload.
    pub traffic: TrafficProfile,
    /// Noise, gap, path losses and log base; its bandwidths are not used.
    pub env: RadioEnvironment,
    pub e0: f64,
    pub t_c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub l_c: f64,
    pub l_d: f64,
    /// Smallest `Ω_h(R)` (linear) for which clustering wins; only when `M ≠ N`.
    pub threshold_omega: Option<f64>,
}

impl Default for FeasibilityInputs {
    fn default() -> Self {
        FeasibilityInputs::small_region()
    }
}

impl FeasibilityInputs {
    /// Ten devices in a 50 m region 250 m from the base station, 20 dB
    /// targets, 360 kHz / 144 kHz bands and a static-energy budget of 16 mJ.
    pub fn small_region() -> Self {
        let base = FeasibilityInputs {
            n: 10,
            r: 50.0,
            big_r: 250.0,
            s_h: db_to_linear(20.0),
            s_b: db_to_linear(20.0),
            lambda: 1.0,
            w_m: 360e3,
            w_h: 144e3,
            power: PowerProfile::default(),
            traffic: TrafficProfile { d_i: 8192.0, ..TrafficProfile::default() },
            env: RadioEnvironment::default(),
            e0: 2.0,
            t_c: 1000.0,
        };
        base.with_static_budget(16e-3)
    }

    /// Sets the direct-mode static energy so that `static_budget()` equals `budget`.
    pub fn with_static_budget(mut self, budget: f64) -> Self {
        let n = f64::from(self.n);
        self.power.e_s_d = (budget + self.power.e_s_h + (n - 1.0) * self.power.e_s) / n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::config("n", "region needs at least one device"));
        }
        for (field, v) in [
            ("r", self.r),
            ("big_r", self.big_r),
            ("s_h", self.s_h),
            ("s_b", self.s_b),
            ("w_m", self.w_m),
            ("w_h", self.w_h),
            ("t_c", self.t_c),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(field, "must be positive and finite"));
            }
        }
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(Error::config("lambda", "must lie in (0, 1]"));
        }
        if !(self.e0 >= 0.0) {
            return Err(Error::config("e0", "must be non-negative"));
        }
        self.power.validate()?;
        self.traffic.validate()
    }

    /// Packets the head forwards per cycle, `1 + λ(N - 1)`.
    pub fn m(&self) -> f64 {
        1.0 + self.lambda * (f64::from(self.n) - 1.0)
    }

    pub fn w_t(&self) -> f64 {
        self.w_h + self.w_m
    }

    /// `s / log(1 + s)`.
    pub fn s_bar(&self, s: f64) -> f64 {
        s / self.env.log_base.log1p(s)
    }

    /// `N E_s^d - E_s^h - (N - 1) E_s`.
    pub fn static_budget(&self) -> f64 {
        let n = f64::from(self.n);
        n * self.power.e_s_d - self.power.e_s_h - (n - 1.0) * self.power.e_s
    }

    /// Circuit and listening energy per payload bit that clustering adds
    /// over direct access (J/bit). Reduces to `P_c Q` when `P_l = P_c`.
    pub fn circuit_coefficient(&self) -> f64 {
        let n = f64::from(self.n);
        let lb = self.env.log_base.log1p(self.s_b);
        let lh = self.env.log_base.log1p(self.s_h);
        let members = (n - 1.0).powi(2) / (self.w_m * lh);
        self.power.p_c * (self.m() / (self.w_h * lb) + members - n * n / (self.w_t() * lb)) + self.power.p_l * members
    }

    /// `Q` as used when listening and circuit power coincide.
    pub fn q(&self) -> f64 {
        let n = f64::from(self.n);
        let lb = self.env.log_base.log1p(self.s_b);
        let lh = self.env.log_base.log1p(self.s_h);
        self.m() / (self.w_h * lb) + 2.0 * (n - 1.0).powi(2) / (self.w_m * lh) - n * n / (self.w_t() * lb)
    }

    pub fn mean_member_distance(&self) -> f64 {
        mean_pairwise_distance_disc(self.r)
    }

    fn losses(&self) -> Result<(f64, f64)> {
        Ok((
            self.env.pl_inter.linear(self.big_r)?,
            self.env.pl_intra.linear(self.mean_member_distance())?,
        ))
    }

    /// Per-cycle energies `(head, member, direct)` at payload `d` bits.
    pub fn cycle_energies(&self, d: f64) -> Result<(f64, f64, f64)> {
        let (omega_h, omega_m) = self.losses()?;
        let n = f64::from(self.n);
        let p = &self.power;
        let env = &self.env;
        let lb = env.log_base.log1p(self.s_b);
        let lh = env.log_base.log1p(self.s_h);
        let sharers = (n - 1.0).max(1.0);
        let p_head = env.power_for_snr(self.s_b, self.w_h, omega_h);
        let p_member = env.power_for_snr(self.s_h, self.w_m / sharers, omega_m);
        let p_direct = env.power_for_snr(self.s_b, self.w_t() / n, omega_h);
        let r_head = self.w_h * lb;
        let r_member = self.w_m / sharers * lh;
        let r_direct = self.w_t() / n * lb;
        let e_h = p.e_s_h + self.m() * d * (p.p_c + p.xi * p_head) / r_head + d * p.p_l * (n - 1.0) / r_member;
        let e_m = p.e_s + d * (p.p_c + p.xi * p_member) / r_member;
        let e_d = p.e_s_d + d * (p.p_c + p.xi * p_direct) / r_direct;
        Ok((e_h, e_m, e_d))
    }

    /// `N E_h^d - E_h^c - (N - 1) E_m^c`: positive when clustering wins.
    fn advantage(&self, d: f64) -> Result<f64> {
        let (e_h, e_m, e_d) = self.cycle_energies(d)?;
        let n = f64::from(self.n);
        Ok(n * e_d - e_h - (n - 1.0) * e_m)
    }
}

pub fn clustering_feasibility(inp: &FeasibilityInputs) -> Result<FeasibilityReport> {
    inp.validate()?;
    let n = f64::from(inp.n);
    let (e_h, e_m, e_d) = inp.cycle_energies(inp.traffic.d_i)?;
    let l_c = inp.e0 * inp.t_c / (e_h / n + (1.0 - 1.0 / n) * e_m);
    let l_d = inp.e0 * inp.t_c / e_d;
    if inp.n == 1 {
        return Ok(FeasibilityReport {
            feasible: false,
            l_c,
            l_d,
            threshold_omega: None,
        });
    }
    let feasible = l_c > l_d;
    let m = inp.m();
    let threshold_omega = if m != n {
        let (_, omega_m) = inp.losses()?;
        let d = inp.traffic.d_i;
        let gn = inp.env.gamma_gap * inp.env.n0;
        let xi = inp.power.xi;
        let num = inp.s_bar(inp.s_h) * (n - 1.0) * omega_m
            + (d * inp.circuit_coefficient() - inp.static_budget()) / (gn * d * xi);
        Some(num / (inp.s_bar(inp.s_b) * (n - m)))
    } else {
        None
    };
    Ok(FeasibilityReport {
        feasible,
        l_c,
        l_d,
        threshold_omega,
    })
}

/// Payload at which clustered and direct lifetimes are equal; clustering
/// wins below it. Found by bisection on the lifetime comparison.
pub fn crossover_payload(inp: &FeasibilityInputs) -> Result<f64> {
    inp.validate()?;
    if inp.n < 2 {
        return Err(Error::NoCrossover("a single device cannot form a cluster"));
    }
    let at = |d: f64| inp.advantage(d);
    if !(at(0.0)? > 0.0) {
        return Err(Error::NoCrossover("clustering does not win even at zero payload"));
    }
    let mut hi = 1.0;
    while at(hi)? > 0.0 {
        hi *= 2.0;
        if hi > 1e18 {
            return Err(Error::NoCrossover("clustering wins at every payload"));
        }
    }
    let mut lo = 0.0;
    while hi - lo > 1e-9 * hi {
        let mid = 0.5 * (lo + hi);
        if at(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn lifetimes_at(inp: &FeasibilityInputs, d: f64) -> (f64, f64) {
        let mut x = *inp;
        x.traffic.d_i = d;
        let r = clustering_feasibility(&x).unwrap();
        (r.l_c, r.l_d)
    }

    #[test]
    fn small_region_crossover() {
        let inp = FeasibilityInputs::small_region();
        assert_relative_eq!(inp.static_budget(), 16e-3, max_relative = 1e-12);
        let d = crossover_payload(&inp).unwrap();
        // linear closed form of the same condition
        let (omega_h, omega_m) = inp.losses().unwrap();
        let n = f64::from(inp.n);
        let gn = inp.env.gamma_gap * inp.env.n0;
        let k = inp.circuit_coefficient()
            + inp.power.xi
                * gn
                * ((inp.m() - n) * inp.s_bar(inp.s_b) * omega_h + (n - 1.0) * inp.s_bar(inp.s_h) * omega_m);
        assert_relative_eq!(d, inp.static_budget() / k, max_relative = 1e-8);
        assert_relative_eq!(d, 16_586.67, max_relative = 1e-5);
        let (l_c, l_d) = lifetimes_at(&inp, d);
        assert!((l_c / l_d - 1.0).abs() <= 1e-6);
        assert!(lifetimes_at(&inp, 0.9 * d).0 > lifetimes_at(&inp, 0.9 * d).1);
        assert!(lifetimes_at(&inp, 1.1 * d).0 < lifetimes_at(&inp, 1.1 * d).1);
    }

    #[test]
    fn q_matches_coefficient_with_equal_listen_power() {
        let inp = FeasibilityInputs::small_region();
        assert_eq!(inp.power.p_l, inp.power.p_c);
        assert_relative_eq!(inp.circuit_coefficient(), inp.power.p_c * inp.q(), max_relative = 1e-12);
    }

    #[test]
    fn single_device_is_not_feasible() {
        let inp = FeasibilityInputs { n: 1, ..FeasibilityInputs::small_region() };
        assert!(!clustering_feasibility(&inp).unwrap().feasible);
        assert!(matches!(crossover_payload(&inp), Err(Error::NoCrossover(_))));
    }

    #[test]
    fn threshold_only_without_full_aggregation() {
        let inp = FeasibilityInputs::small_region();
        assert!(clustering_feasibility(&inp).unwrap().threshold_omega.is_none());
        let half = FeasibilityInputs { lambda: 0.5, ..inp };
        assert!(clustering_feasibility(&half).unwrap().threshold_omega.is_some());
    }

    #[test]
    fn higher_circuit_power_shrinks_the_payload_range() {
        let base = FeasibilityInputs::small_region();
        let mut prev = f64::INFINITY;
        for p_c in [0.005, 0.01, 0.02, 0.04, 0.08] {
            let mut inp = base;
            inp.power.p_c = p_c;
            inp.power.p_l = p_c;
            let d = crossover_payload(&inp).unwrap();
            assert!(d < prev, "p_c = {p_c}: {d} >= {prev}");
            prev = d;
        }
    }

    #[test]
    fn no_budget_means_no_crossover() {
        let inp = FeasibilityInputs::small_region().with_static_budget(0.0);
        assert!(matches!(crossover_payload(&inp), Err(Error::NoCrossover(_))));
    }

    fn random_inputs(n: u32, lambda: f64, big_r: f64, r: f64, d: f64, budget: f64) -> FeasibilityInputs {
        let mut inp = FeasibilityInputs {
            n,
            lambda,
            big_r,
            r,
            ..FeasibilityInputs::small_region()
        }
        .with_static_budget(budget);
        inp.traffic.d_i = d;
        inp
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]
        #[test]
        fn threshold_agrees_with_direct_comparison(
            n in 2u32..60,
            lambda in 0.05f64..0.95,
            big_r in 50.0f64..2000.0,
            r in 5.0f64..200.0,
            d in 100.0f64..1e6,
            budget in 0.0f64..0.1,
        ) {
            let inp = random_inputs(n, lambda, big_r, r, d, budget);
            let rep = clustering_feasibility(&inp).unwrap();
            let omega_h = inp.env.pl_inter.linear(big_r).unwrap();
            let thr = rep.threshold_omega.unwrap();
            // skip numerically tied cases
            prop_assume!((omega_h / thr - 1.0).abs() > 1e-9);
            prop_assert_eq!(rep.feasible, omega_h > thr);
        }

        #[test]
        fn verdict_survives_unit_rescaling(
            n in 2u32..60,
            lambda in 0.05f64..1.0,
            big_r in 50.0f64..2000.0,
            d in 100.0f64..1e6,
            budget in 0.0f64..0.1,
        ) {
            let inp = random_inputs(n, lambda, big_r, 50.0, d, budget);
            let base = clustering_feasibility(&inp).unwrap();
            prop_assume!((base.l_c / base.l_d - 1.0).abs() > 1e-9);
            // energies in mJ
            let mut mj = inp;
            let p = &mut mj.power;
            for v in [&mut p.p_c, &mut p.p_l, &mut p.p_s, &mut p.p_t_m, &mut p.p_t_h, &mut p.p_t_d,
                      &mut p.e_s, &mut p.e_s_h, &mut p.e_s_d] {
                *v *= 1e3;
            }
            mj.env.n0 *= 1e3;
            mj.e0 *= 1e3;
            // bandwidths in kHz, payload in kbit
            let mut khz = inp;
            khz.w_m /= 1e3;
            khz.w_h /= 1e3;
            khz.env.n0 *= 1e3;
            khz.traffic.d_i /= 1e3;
            prop_assert_eq!(clustering_feasibility(&mj).unwrap().feasible, base.feasible);
            prop_assert_eq!(clustering_feasibility(&khz).unwrap().feasible, base.feasible);
        }
    }
}
