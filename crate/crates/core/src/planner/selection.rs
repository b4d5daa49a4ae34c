//! Max-min lifetime head selection, head tenure and reselection runs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{cluster_radius_estimate, offcenter_distance_unchecked, Point};
use crate::lifetime::{ClusterModel, PowerProfile, TxMode};
use crate::radio::{RadioEnvironment, RateScheme};

/// How the mean member-to-head distance of a candidate head is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum HeadDistanceMode {
    /// Disc approximation of the cluster with radius from the mean cluster size.
    #[default]
    DiscApproximation,
    /// Exact average over the other cluster members.
    MemberAverage,
}

/// A candidate cluster: positions, payloads and the per-cycle energy of each
/// node under each possible head, computed once.
#[derive(Debug, Clone)]
pub struct ChCandidateContext {
    ids: Vec<usize>,
    positions: Vec<Point>,
    bs: Point,
    centroid: Point,
    payloads: Vec<f64>,
    t_c: f64,
    /// `cost[j][i]`: energy of node `j` per cycle when node `i` is head.
    cost: Vec<Vec<f64>>,
}

/// Parameters shared by all nodes of a candidate cluster.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionModel {
    pub env: RadioEnvironment,
    pub power: PowerProfile,
    /// Supplies `z` (sharers of the member channel), `λ`, `σ` and `N_t`.
    pub cluster: ClusterModel,
    pub rate_m: RateScheme,
    pub rate_h: RateScheme,
    pub t_c: f64,
    pub head_distance: HeadDistanceMode,
    /// Energy charged to every node at each head change (J).
    pub reselection_charge: f64,
}

impl ChCandidateContext {
    /// Builds the cost matrix. `nodes` are `(id, position, payload bits)`;
    /// they are ordered by id internally.
    pub fn new(nodes: &[(usize, Point, f64)], bs: Point, model: &SelectionModel) -> Result<Self> {
        let env = &model.env;
        Self::with_member_rates(nodes, bs, model, |_, _, d| {
            let omega = env.pl_intra.linear(d)?;
            model.rate_m.rate(env, env.w_m, model.power.p_t_m, omega, model.cluster.z)
        })
    }

    /// As [`ChCandidateContext::new`], with member-to-head rates supplied by
    /// `pair_rate(from_id, to_id, distance)`, e.g. from a cache.
    pub fn with_member_rates<F>(
        nodes: &[(usize, Point, f64)],
        bs: Point,
        model: &SelectionModel,
        mut pair_rate: F,
    ) -> Result<Self>
    where
        F: FnMut(usize, usize, f64) -> Result<f64>,
    {
        if nodes.is_empty() {
            return Err(Error::domain("a cluster needs at least one node"));
        }
        let mut nodes = nodes.to_vec();
        nodes.sort_by_key(|n| n.0);
        if nodes.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::domain("duplicate node id in cluster"));
        }
        let ids: Vec<usize> = nodes.iter().map(|n| n.0).collect();
        let positions: Vec<Point> = nodes.iter().map(|n| n.1).collect();
        let payloads: Vec<f64> = nodes.iter().map(|n| n.2).collect();
        let k = nodes.len();
        let centroid = Point::new(
            positions.iter().map(|p| p.x).sum::<f64>() / k as f64,
            positions.iter().map(|p| p.y).sum::<f64>() / k as f64,
        );
        let mean_payload = payloads.iter().sum::<f64>() / k as f64;
        let psi = (k - 1) as f64;
        let env = &model.env;
        let p = &model.power;
        let z = model.cluster.z;
        let n_heads = f64::from(model.cluster.n_t) / z;
        let member_rate = |d: f64, a: usize, b: usize| -> Result<f64> {
            let omega = env.pl_intra.linear(d).map_err(|_| Error::NonPositiveRate {
                from: ids[a].to_string(),
                to: ids[b].to_string(),
            })?;
            model.rate_m.rate(env, env.w_m, p.p_t_m, omega, z)
        };
        let radius = cluster_radius_estimate(z, model.cluster.sigma)?;
        let mut cost = vec![vec![0.0; k]; k];
        for i in 0..k {
            // head-side terms for candidate i
            let omega_h = env.pl_inter.linear(positions[i].dist(&bs)).map_err(|_| Error::NonPositiveRate {
                from: ids[i].to_string(),
                to: "base station".into(),
            })?;
            let r_h = model.rate_h.rate(env, env.w_h, p.p_t_h, omega_h, n_heads)?;
            check_rate(r_h, ids[i], || "base station".into())?;
            let listen = if k > 1 {
                let d_v = match model.head_distance {
                    HeadDistanceMode::DiscApproximation => {
                        let r = positions[i].dist(&centroid);
                        offcenter_distance_unchecked(r, radius.max(r))
                    }
                    HeadDistanceMode::MemberAverage => {
                        (0..k).filter(|&j| j != i).map(|j| positions[j].dist(&positions[i])).sum::<f64>() / psi
                    }
                };
                let r_v = member_rate(d_v, i, i)?;
                check_rate(r_v, ids[i], || "cluster average".into())?;
                psi * mean_payload * p.p_l / r_v
            } else {
                0.0
            };
            cost[i][i] = p.e_s_h + listen + (1.0 + model.cluster.lambda * psi) * mean_payload * p.tx_draw(TxMode::Head) / r_h;
            for j in 0..k {
                if j == i {
                    continue;
                }
                let r = pair_rate(ids[j], ids[i], positions[j].dist(&positions[i])).map_err(|_| {
                    Error::NonPositiveRate {
                        from: ids[j].to_string(),
                        to: ids[i].to_string(),
                    }
                })?;
                check_rate(r, ids[j], || ids[i].to_string())?;
                cost[j][i] = p.e_s + payloads[j] * p.tx_draw(TxMode::Member) / r;
            }
        }
        Ok(ChCandidateContext {
            ids,
            positions,
            bs,
            centroid,
            payloads,
            t_c: model.t_c,
            cost,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn payloads(&self) -> &[f64] {
        &self.payloads
    }

    pub fn bs(&self) -> Point {
        self.bs
    }

    pub fn centroid(&self) -> Point {
        self.centroid
    }

    pub fn t_c(&self) -> f64 {
        self.t_c
    }

    /// Per-cycle energy of the node at index `j` when the node at index `i` is head.
    pub fn cost(&self, j: usize, i: usize) -> f64 {
        self.cost[j][i]
    }

    pub fn index_of(&self, id: usize) -> Option<usize> {
        self.ids.binary_search(&id).ok()
    }

    /// Shortest expected lifetime in the cluster with head at index `i`, and
    /// the index of the node that attains it (lowest index on ties).
    pub fn bottleneck(&self, energies: &[f64], i: usize) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (j, e) in energies.iter().enumerate() {
            let l = e * self.t_c / self.cost[j][i];
            if l < best.1 {
                best = (j, l);
            }
        }
        best
    }
}

fn check_rate(r: f64, from: usize, to: impl FnOnce() -> String) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveRate {
            from: from.to_string(),
            to: to(),
        })
    }
}

fn check_energies(ctx: &ChCandidateContext, energies: &[f64]) -> Result<()> {
    if energies.len() != ctx.len() {
        return Err(Error::domain(format!(
            "expected {} energies, got {}",
            ctx.len(),
            energies.len()
        )));
    }
    if energies.iter().any(|e| !(*e >= 0.0)) {
        return Err(Error::domain("energies must be non-negative"));
    }
    Ok(())
}

/// Result of a head selection, in context indices and ids.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Selection {
    pub index: usize,
    pub ch_id: usize,
    /// Shortest expected node lifetime under this head (s).
    pub min_lifetime: f64,
}

/// Head maximising the shortest expected lifetime in the cluster; ties go
/// to the lowest id. `energies` are index-aligned with the context.
pub fn ch_select(ctx: &ChCandidateContext, energies: &[f64]) -> Result<Selection> {
    check_energies(ctx, energies)?;
    let mut best: Option<(usize, f64)> = None;
    for i in 0..ctx.len() {
        let (_, l) = ctx.bottleneck(energies, i);
        if best.is_none_or(|(_, bl)| l > bl) {
            best = Some((i, l));
        }
    }
    let (index, min_lifetime) = best.expect("non-empty context");
    Ok(Selection {
        index,
        ch_id: ctx.ids[index],
        min_lifetime,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChTenure {
    pub ch_id: usize,
    /// Number of cycles the head keeps its role.
    pub k_cycles: u64,
    /// Node with the shortest expected lifetime under this head.
    pub bottleneck_id: usize,
    /// True when no other candidate overtakes before the energy runs out.
    pub depleted: bool,
}

/// Number of cycles `K` before another candidate's bottleneck lifetime
/// overtakes that of head `i_star`, with every bottleneck fixed at the
/// current energies and energies drained at the rates of head `i_star`.
pub fn ch_tenure(ctx: &ChCandidateContext, energies: &[f64], i_star: usize) -> Result<ChTenure> {
    check_energies(ctx, energies)?;
    if i_star >= ctx.len() {
        return Err(Error::domain("head index outside the cluster"));
    }
    let (m_star, _) = ctx.bottleneck(energies, i_star);
    let a = energies[m_star] / ctx.cost(m_star, i_star);
    let mut k_best: Option<u64> = None;
    for j in 0..ctx.len() {
        if j == i_star {
            continue;
        }
        let (mj, _) = ctx.bottleneck(energies, j);
        let b = energies[mj] / ctx.cost(mj, j);
        let c = ctx.cost(mj, i_star) / ctx.cost(mj, j);
        if c < 1.0 {
            let k = ((a - b) / (1.0 - c)).max(0.0).floor() as u64 + 1;
            k_best = Some(k_best.map_or(k, |kb| kb.min(k)));
        }
    }
    let cap = (0..ctx.len())
        .map(|j| energies[j] / ctx.cost(j, i_star))
        .fold(f64::INFINITY, f64::min)
        .floor()
        .max(1.0) as u64;
    let (k_cycles, depleted) = match k_best {
        Some(k) if k <= cap => (k, false),
        _ => (cap, true),
    };
    Ok(ChTenure {
        ch_id: ctx.ids[i_star],
        k_cycles,
        bottleneck_id: ctx.ids[m_star],
        depleted,
    })
}

/// Tenure by cycle-by-cycle replay: drain every node at the rates of head
/// `i_star` and count cycles until the selection moves away from it. A cycle
/// that would overdraw some node ends the tenure before it (but never below one).
pub fn ch_tenure_replay(ctx: &ChCandidateContext, energies: &[f64], i_star: usize, max_cycles: u64) -> Result<u64> {
    check_energies(ctx, energies)?;
    let mut e = energies.to_vec();
    for k in 1..=max_cycles {
        for (j, ej) in e.iter_mut().enumerate() {
            *ej -= ctx.cost(j, i_star);
        }
        if e.iter().any(|x| *x < 0.0) {
            return Ok((k - 1).max(1));
        }
        if ch_select(ctx, &e)?.index != i_star {
            return Ok(k);
        }
    }
    Ok(max_cycles)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FairnessReport {
    pub max_gap: f64,
    pub relative_gap: f64,
    pub fair: bool,
}

/// Spread of death times: fair when `(max - min) <= tolerance * mean`.
pub fn maxmin_fairness_check(death_times: &[f64], tolerance: f64) -> Result<FairnessReport> {
    if death_times.is_empty() {
        return Err(Error::domain("no death times"));
    }
    let max = death_times.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = death_times.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = death_times.iter().sum::<f64>() / death_times.len() as f64;
    let gap = max - min;
    let relative_gap = if mean > 0.0 { gap / mean } else { 0.0 };
    Ok(FairnessReport {
        max_gap: gap,
        relative_gap,
        fair: gap <= tolerance * mean,
    })
}

/// When a cluster re-runs head selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "cycles")]
pub enum ReselectionPolicy {
    /// Every `n` cycles (and whenever the head dies).
    Every(u64),
    /// Only when the head dies.
    OnDeath,
}

/// Per-node death times of one cluster that drains the expected per-cycle
/// energies, re-selecting its head per `policy`. Dead nodes leave the
/// cluster and the cost matrix is rebuilt for the survivors.
pub fn run_reselection(
    nodes: &[(usize, Point, f64)],
    bs: Point,
    model: &SelectionModel,
    initial_energy: &[f64],
    policy: ReselectionPolicy,
    max_cycles: u64,
) -> Result<Vec<(usize, f64)>> {
    if nodes.len() != initial_energy.len() {
        return Err(Error::domain("one initial energy per node is required"));
    }
    if let ReselectionPolicy::Every(0) = policy {
        return Err(Error::domain("reselection period must be at least one cycle"));
    }
    let mut alive: Vec<((usize, Point, f64), f64)> =
        nodes.iter().copied().zip(initial_energy.iter().copied()).collect();
    alive.sort_by_key(|(n, _)| n.0);
    let mut deaths = Vec::with_capacity(nodes.len());
    let mut cycle: u64 = 0;
    let mut head: Option<usize> = None;
    let mut since_selection = 0u64;
    while !alive.is_empty() && cycle < max_cycles {
        let members: Vec<(usize, Point, f64)> = alive.iter().map(|(n, _)| *n).collect();
        let ctx = ChCandidateContext::new(&members, bs, model)?;
        let energies: Vec<f64> = alive.iter().map(|(_, e)| *e).collect();
        let due = match policy {
            ReselectionPolicy::Every(n) => head.is_none() || since_selection >= n,
            ReselectionPolicy::OnDeath => head.is_none(),
        };
        let head_idx = if due {
            let s = ch_select(&ctx, &energies)?;
            if head.is_some_and(|h| h != s.ch_id) {
                for (_, e) in alive.iter_mut() {
                    *e -= model.reselection_charge;
                }
            }
            head = Some(s.ch_id);
            since_selection = 0;
            s.index
        } else {
            ctx.index_of(head.expect("head present")).expect("head alive")
        };
        // drain one cycle; deaths are placed at the exact fraction of the cycle
        let t0 = cycle as f64 * model.t_c;
        let mut survivors = Vec::with_capacity(alive.len());
        for (j, (node, e)) in alive.into_iter().enumerate() {
            let c = ctx.cost(j, head_idx);
            if e <= c {
                let frac = if c > 0.0 { (e / c).max(0.0) } else { 0.0 };
                deaths.push((node.0, t0 + frac * model.t_c));
                if head == Some(node.0) {
                    head = None;
                }
            } else {
                survivors.push((node, e - c));
            }
        }
        alive = survivors;
        cycle += 1;
        since_selection += 1;
    }
    deaths.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    Ok(deaths)
}

/// The 10-node setting used for head-selection experiments: 50 m cluster
/// radius, base station 250 m from the centre, 1 KB reports, 360 kHz member
/// band and 144 kHz head band.
pub fn small_cluster_model() -> SelectionModel {
    let env = RadioEnvironment {
        w_m: 360e3,
        w_h: 144e3,
        ..RadioEnvironment::default()
    };
    let z = 10.0;
    let radius = 50.0;
    SelectionModel {
        env,
        power: PowerProfile::default(),
        cluster: ClusterModel {
            z,
            lambda: 1.0,
            t_c: 1000.0,
            e0: 2.0,
            // density that makes the disc estimate of the radius equal 50 m
            sigma: z * (1.5f64 / radius).powi(2) / 4.0,
            n_t: 10,
        },
        rate_m: RateScheme::Fdma,
        rate_h: RateScheme::Dedicated,
        t_c: 1000.0,
        head_distance: HeadDistanceMode::DiscApproximation,
        reselection_charge: 0.0,
    }
}
