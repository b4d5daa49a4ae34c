//! Clustered access: head selection, bunch layout, n-phase CSMA/CA inside
//! each cluster window and reserved forwarding to the base station.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use rand::seq::index::sample;
use rand_distr::{Distribution, Exp};

use super::cmac;
use super::config::{MacVariant, ReselectPolicy, SimConfig};
use super::outcome::{EventKind, SimOutcome};
use super::state::{Activity, World};
use crate::error::{Error, Result};
use crate::geometry::{NearestIndex, Point};
use crate::lifetime::{ClusterModel, PowerProfile, TxMode};
use crate::planner::{ch_select, ChCandidateContext, HeadDistanceMode, SelectionModel};
use crate::radio::RateScheme;

/// Pairwise member rates are tabulated up to this many devices.
const RATE_TABLE_MAX: usize = 2048;

/// Runs one seeded simulation until every device is dead or `max_cycles`
/// cycles have elapsed.
pub fn run_sim(cfg: &SimConfig) -> Result<SimOutcome> {
    cfg.validate()?;
    let mut world = World::new(cfg)?;
    if cfg.mac_variant.is_clustered() {
        run_clustered(&mut world)?;
    } else {
        cmac::run(&mut world)?;
    }
    Ok(world.finish(cfg.label()))
}

/// Member-to-head rates over the full resource block.
struct MemberRates {
    positions: Vec<Point>,
    table: Option<Vec<f64>>,
}

impl MemberRates {
    fn new(w: &World) -> Result<Self> {
        let positions: Vec<Point> = w.nodes.iter().map(|n| n.position).collect();
        let mut rates = MemberRates { positions, table: None };
        let n = rates.positions.len();
        if n <= RATE_TABLE_MAX {
            let mut table = vec![0.0; n * n];
            for a in 0..n {
                for b in a + 1..n {
                    let r = rates.compute(w, a, b)?;
                    table[a * n + b] = r;
                    table[b * n + a] = r;
                }
            }
            rates.table = Some(table);
        }
        Ok(rates)
    }

    fn compute(&self, w: &World, a: usize, b: usize) -> Result<f64> {
        let d = self.positions[a].dist(&self.positions[b]);
        let err = || Error::NonPositiveRate {
            from: a.to_string(),
            to: b.to_string(),
        };
        let omega = w.env.pl_intra.linear(d).map_err(|_| err())?;
        let r = w.env.shannon_rate(w.cfg.w, w.cfg.power.p_t_m, omega);
        if r > 0.0 && r.is_finite() {
            Ok(r)
        } else {
            Err(err())
        }
    }

    fn get(&self, w: &World, a: usize, b: usize) -> Result<f64> {
        match &self.table {
            Some(t) => Ok(t[a * self.positions.len() + b]),
            None => self.compute(w, a, b),
        }
    }
}

struct Cluster {
    id: usize,
    head: usize,
    /// Non-head devices, ascending ids; may include dead ones until the next cycle.
    members: Vec<usize>,
    cache: Option<(Vec<usize>, ChCandidateContext)>,
}

struct Window {
    bunch: u32,
    start: f64,
    len: f64,
}

fn run_clustered(w: &mut World) -> Result<()> {
    let cfg = w.cfg;
    let rates = MemberRates::new(w)?;
    let n = w.nodes.len();
    let area = PI * (cfg.r_outer.powi(2) - cfg.r_inner.powi(2));
    let sigma = f64::from(cfg.n_t) / area;

    let k = ((n as f64 / cfg.cluster_size).round() as usize).clamp(1, n);
    let mut seeds = sample(&mut w.head_rng, n, k).into_vec();
    seeds.sort_unstable();
    let mut clusters: Vec<Cluster> = seeds
        .iter()
        .enumerate()
        .map(|(id, &h)| Cluster {
            id,
            head: h,
            members: Vec::new(),
            cache: None,
        })
        .collect();
    partition(w, &mut clusters);

    for cycle in 0..cfg.max_cycles {
        if !w.any_alive() {
            break;
        }
        let t0 = cycle as f64 * cfg.t_ra;
        let changed = reselect(w, &rates, &mut clusters, cycle, t0, sigma)?;
        if cfg.mac_variant == MacVariant::E2MacR && changed && cycle > 0 {
            partition(w, &mut clusters);
            for id in 0..n {
                if w.nodes[id].is_alive() {
                    w.nodes[id].charge_lump(t0, cfg.e_ref, Activity::Reform);
                    w.note(t0, id, EventKind::Reform, None);
                }
            }
        }
        for c in &clusters {
            w.nodes[c.head].charge_lump(t0, cfg.power.e_s_h, Activity::Fixed);
            w.note_death(c.head);
            for &m in &c.members {
                w.nodes[m].charge_lump(t0, cfg.power.e_s, Activity::Fixed);
                w.note_death(m);
            }
        }
        let windows = layout_windows(w, &rates, &clusters, t0)?;
        let mut relayed = vec![0usize; clusters.len()];
        for (ci, win) in windows.iter().enumerate() {
            relayed[ci] = contend(w, &rates, &clusters[ci], win)?;
        }
        let t_f = t0 + cfg.intra_window;
        for (ci, c) in clusters.iter().enumerate() {
            forward(w, c, relayed[ci], t_f)?;
        }
        w.close_cycle(cycle, t0);
    }
    Ok(())
}

/// Every alive device joins its nearest head.
fn partition(w: &World, clusters: &mut [Cluster]) {
    let index = NearestIndex::new(clusters.iter().map(|c| w.nodes[c.head].position).collect());
    for c in clusters.iter_mut() {
        c.members.clear();
    }
    let is_head: Vec<bool> = {
        let mut v = vec![false; w.nodes.len()];
        for c in clusters.iter() {
            v[c.head] = true;
        }
        v
    };
    for (id, node) in w.nodes.iter().enumerate() {
        if is_head[id] || !node.is_alive() {
            continue;
        }
        let (c, _) = index.nearest(&node.position).expect("at least one cluster");
        clusters[c].members.push(id);
    }
}

/// Re-runs head selection where due. Returns whether any head changed.
fn reselect(w: &mut World, rates: &MemberRates, clusters: &mut Vec<Cluster>, cycle: u64, t0: f64, sigma: f64) -> Result<bool> {
    let cfg = w.cfg;
    let mut changed = false;
    for c in clusters.iter_mut() {
        c.members.retain(|&m| w.nodes[m].is_alive());
    }
    clusters.retain(|c| w.nodes[c.head].is_alive() || !c.members.is_empty());
    for c in clusters.iter_mut() {
        let head_dead = !w.nodes[c.head].is_alive();
        let due = cycle == 0
            || head_dead
            || match cfg.ch_reselect {
                ReselectPolicy::EveryCycles(p) => cycle.is_multiple_of(u64::from(p)),
                ReselectPolicy::OnDeath => false,
            };
        if !due {
            continue;
        }
        let mut all = c.members.clone();
        if !head_dead {
            all.push(c.head);
        }
        all.sort_unstable();
        let fresh = !matches!(&c.cache, Some((ids, _)) if *ids == all);
        if fresh {
            let ctx = selection_context(w, rates, &all, sigma)?;
            c.cache = Some((all.clone(), ctx));
        }
        let (_, ctx) = c.cache.as_ref().expect("context just cached");
        let energies: Vec<f64> = all.iter().map(|&id| w.nodes[id].energy).collect();
        let sel = ch_select(ctx, &energies)?;
        if sel.ch_id != c.head {
            changed = true;
        }
        c.head = sel.ch_id;
        c.members = all.into_iter().filter(|&id| id != sel.ch_id).collect();
        w.note(t0, c.head, EventKind::HeadSelected, Some(c.id));
    }
    Ok(changed)
}

/// Expected per-cycle costs of a cluster, with contention listening folded
/// into the static terms.
fn selection_context(w: &World, rates: &MemberRates, ids: &[usize], sigma: f64) -> Result<ChCandidateContext> {
    let cfg = w.cfg;
    let p = cfg.power;
    let size = ids.len() as f64;
    let t_intra = (size * cfg.intra_per_member).min(cfg.intra_cap);
    let theta = t_intra / (cfg.backoff_divisor * f64::from(cfg.n_phases));
    let load = cfg.traffic.r_g * cfg.t_ra;
    let model = SelectionModel {
        env: w.env,
        power: PowerProfile {
            e_s_h: p.e_s_h + p.p_l * t_intra,
            e_s: p.e_s + load * p.p_l * theta,
            ..p
        },
        cluster: ClusterModel {
            z: size,
            lambda: cfg.lambda,
            t_c: cfg.t_ra,
            e0: cfg.e0,
            sigma,
            n_t: cfg.n_t,
        },
        rate_m: RateScheme::Dedicated,
        rate_h: RateScheme::Dedicated,
        t_c: cfg.t_ra,
        head_distance: HeadDistanceMode::DiscApproximation,
        reselection_charge: 0.0,
    };
    let payload = load * cfg.traffic.d_i;
    let nodes: Vec<(usize, Point, f64)> = ids.iter().map(|&id| (id, w.nodes[id].position, payload)).collect();
    ChCandidateContext::with_member_rates(&nodes, Point::ORIGIN, &model, |a, b, _| rates.get(w, a, b))
}

/// Sizes each cluster window and places it in a bunch. Bunches split the
/// intra-cluster window in time. Windows sharing a bunch are stacked, each
/// followed by a guard of its longest member airtime so that transmissions
/// started late can finish; a cluster avoids the bunches of its six nearest
/// already-placed clusters when it can. When nothing fits, a bunch is
/// reused from its start.
fn layout_windows(w: &World, rates: &MemberRates, clusters: &[Cluster], t0: f64) -> Result<Vec<Window>> {
    let cfg = w.cfg;
    let bunch_len = cfg.intra_window / f64::from(cfg.bunches);
    let mut lens = Vec::with_capacity(clusters.len());
    let mut spans = Vec::with_capacity(clusters.len());
    for c in clusters {
        let mut size = 1.0;
        let mut longest: f64 = 0.0;
        for &m in c.members.iter().filter(|&&m| w.nodes[m].is_alive()) {
            size += 1.0;
            longest = longest.max(cfg.traffic.d_i / rates.get(w, m, c.head)?);
        }
        let len = (size * cfg.intra_per_member).min(cfg.intra_cap);
        lens.push(len);
        spans.push(len + longest);
    }
    let heads: Vec<Point> = clusters.iter().map(|c| w.nodes[c.head].position).collect();
    let mut load = vec![0.0; cfg.bunches as usize];
    let mut placed: Vec<u32> = Vec::with_capacity(clusters.len());
    let mut out = Vec::with_capacity(clusters.len());
    for ci in 0..clusters.len() {
        let mut near: Vec<(f64, u32)> = (0..ci).map(|j| (heads[ci].dist(&heads[j]), placed[j])).collect();
        near.sort_by(|a, b| a.0.total_cmp(&b.0));
        let taken: Vec<u32> = near.iter().take(6).map(|x| x.1).collect();
        let fits = |b: usize| load[b] + spans[ci] <= bunch_len + 1e-12;
        let pick = |ok: &dyn Fn(usize) -> bool| -> Option<usize> {
            (0..load.len()).filter(|&b| ok(b)).min_by(|&a, &b| load[a].total_cmp(&load[b]))
        };
        let free = |b: usize| !taken.contains(&(b as u32));
        let (bunch, offset) = match pick(&|b| free(b) && fits(b)).or_else(|| pick(&fits)) {
            Some(b) => {
                let offset = load[b];
                load[b] += spans[ci];
                (b, offset)
            }
            None => (pick(&free).or_else(|| pick(&|_| true)).expect("at least one bunch"), 0.0),
        };
        placed.push(bunch as u32);
        out.push(Window {
            bunch: bunch as u32,
            start: t0 + bunch as f64 * bunch_len + offset,
            len: lens[ci],
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Step {
    Sense,
    TxEnd,
}

#[derive(Debug, Clone, Copy)]
struct Ev {
    t: f64,
    id: usize,
    step: Step,
}

impl PartialEq for Ev {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Ev {}
impl PartialOrd for Ev {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Ev {
    /// Reversed so the max-heap pops the earliest (time, id) first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .t
            .total_cmp(&self.t)
            .then(other.id.cmp(&self.id))
            .then((other.step as u8).cmp(&(self.step as u8)))
    }
}

struct Contender {
    /// First and last allowed transmission start.
    window: (f64, f64),
    phase_end: f64,
    airtime: f64,
}

struct OnAir {
    id: usize,
    start: f64,
    end: f64,
    collided: bool,
    truncated: bool,
}

/// Non-persistent CSMA/CA inside one cluster window. Returns the number of
/// member packets the head received.
fn contend(w: &mut World, rates: &MemberRates, c: &Cluster, win: &Window) -> Result<usize> {
    let cfg = w.cfg;
    let p = cfg.power;
    let n_ph = cfg.n_phases as usize;
    let phase_len = win.len / n_ph as f64;
    // θ_b = θ_f
    let theta = win.len / (cfg.backoff_divisor * n_ph as f64);
    let backoff = Exp::new(1.0 / theta).map_err(|e| Error::config("backoff_divisor", e.to_string()))?;

    // the head listens from the window start until the last transmission ends
    let head = &w.nodes[c.head];
    let head_death = match head.death {
        Some(t) => t,
        None if p.p_l > 0.0 => win.start + head.energy / p.p_l,
        None => f64::INFINITY,
    };
    let mut listen_end = win.start + win.len;

    let mut heap = BinaryHeap::new();
    let mut who: Vec<Contender> = Vec::new();
    let mut ids: Vec<usize> = Vec::new();
    for (rank, &m) in c.members.iter().enumerate() {
        if !w.nodes[m].is_alive() {
            continue;
        }
        w.pull(m, win.start);
        if w.nodes[m].queue.is_empty() {
            continue;
        }
        let a = win.start + (rank % n_ph) as f64 * phase_len;
        let b = a + phase_len;
        let airtime = cfg.traffic.d_i / rates.get(w, m, c.head)?;
        ids.push(m);
        // starting at least δ_d before the phase ends keeps a late start
        // audible to the next phase
        let st = Contender {
            window: (a, b - cfg.delta_d),
            phase_end: b,
            airtime,
        };
        wait(w, &mut heap, &st, m, a, &backoff);
        who.push(st);
    }

    let mut air: Vec<OnAir> = Vec::new();
    let mut received = 0;
    let draw = p.tx_draw(TxMode::Member);
    while let Some(ev) = heap.pop() {
        let k = ids.iter().position(|&x| x == ev.id).expect("known contender");
        let st = &who[k];
        match ev.step {
            Step::Sense => {
                let t = ev.t;
                let node = &mut w.nodes[ev.id];
                node.queue.front_mut().expect("queued packet").attempts += 1;
                let busy = air.iter().any(|x| x.start <= t - cfg.delta_d && x.end > t);
                if busy {
                    w.note_window(t, ev.id, EventKind::IntraFailure, Some(c.id), Some(win.bunch), Some(st.window));
                    fail(w, &mut heap, st, ev.id, t, &backoff);
                    continue;
                }
                let mut collided = false;
                for x in air.iter_mut().filter(|x| x.end > t) {
                    x.collided = true;
                    collided = true;
                }
                let alive = w.nodes[ev.id].charge(t, draw, st.airtime, Activity::Tx);
                let end = if alive {
                    t + st.airtime
                } else {
                    w.nodes[ev.id].death.expect("dead node has a death time")
                };
                air.push(OnAir {
                    id: ev.id,
                    start: t,
                    end,
                    collided,
                    truncated: !alive,
                });
                heap.push(Ev {
                    t: end,
                    id: ev.id,
                    step: Step::TxEnd,
                });
                w.note_window(t, ev.id, EventKind::IntraTx, Some(c.id), Some(win.bunch), Some(st.window));
            }
            Step::TxEnd => {
                let t = ev.t;
                let i = air.iter().position(|x| x.id == ev.id).expect("transmission on air");
                let tx = air.swap_remove(i);
                listen_end = listen_end.max(t);
                if tx.truncated {
                    continue;
                }
                if !tx.collided && t <= head_death {
                    let pkt = w.nodes[ev.id].queue.pop_front().expect("queued packet");
                    w.delays.push(t - pkt.generated);
                    received += 1;
                    w.note_window(t, ev.id, EventKind::IntraSuccess, Some(c.id), Some(win.bunch), Some(st.window));
                    if !w.nodes[ev.id].queue.is_empty() {
                        wait(w, &mut heap, st, ev.id, t, &backoff);
                    }
                } else {
                    if tx.collided {
                        w.collisions += 1;
                    }
                    w.note_window(t, ev.id, EventKind::IntraFailure, Some(c.id), Some(win.bunch), Some(st.window));
                    fail(w, &mut heap, st, ev.id, t, &backoff);
                }
            }
        }
    }
    w.nodes[c.head].charge(win.start, p.p_l, listen_end - win.start, Activity::Listen);
    w.note_death(c.head);
    Ok(received)
}

/// Listens for an exponential wait, then senses; gives the cycle up if the
/// wait ends past the last allowed start.
fn wait(w: &mut World, heap: &mut BinaryHeap<Ev>, st: &Contender, id: usize, t: f64, dist: &Exp<f64>) {
    let x = dist.sample(&mut w.access_rng);
    let te = t + x;
    let p_l = w.cfg.power.p_l;
    if te > st.window.1 {
        w.nodes[id].charge(t, p_l, te.min(st.phase_end) - t, Activity::Listen);
        w.note_death(id);
        return;
    }
    if w.nodes[id].charge(t, p_l, x, Activity::Listen) {
        heap.push(Ev {
            t: te,
            id,
            step: Step::Sense,
        });
    } else {
        w.note_death(id);
    }
}

fn fail(w: &mut World, heap: &mut BinaryHeap<Ev>, st: &Contender, id: usize, t: f64, dist: &Exp<f64>) {
    let k_m = w.cfg.k_m;
    let node = &mut w.nodes[id];
    if node.queue.front().is_some_and(|p| p.attempts >= k_m) {
        node.queue.pop_front();
        w.dropped += 1;
        w.note(t, id, EventKind::Drop, None);
        if w.nodes[id].queue.is_empty() {
            return;
        }
    }
    wait(w, heap, st, id, t, dist);
}

/// The head sends its own packets and the compressed relayed data on its
/// reserved channel at the start of the inter-cluster window.
fn forward(w: &mut World, c: &Cluster, relayed: usize, t_f: f64) -> Result<()> {
    let cfg = w.cfg;
    let h = c.head;
    if !w.nodes[h].is_alive() {
        return Ok(());
    }
    w.pull(h, t_f);
    let own = w.nodes[h].queue.len();
    let bits = cfg.traffic.d_i * (own as f64 + cfg.lambda * relayed as f64);
    if bits <= 0.0 {
        return Ok(());
    }
    let d = w.nodes[h].position.norm();
    let omega = w.env.pl_inter.linear(d).map_err(|_| Error::NonPositiveRate {
        from: h.to_string(),
        to: "base station".into(),
    })?;
    let rate = w.env.shannon_rate(cfg.w, cfg.power.p_t_h, omega);
    let dur = bits / rate;
    let alive = w.nodes[h].charge(t_f, cfg.power.tx_draw(TxMode::Head), dur, Activity::Tx);
    w.note_window(t_f, h, EventKind::Forward, Some(c.id), None, Some((t_f, t_f)));
    if alive {
        let done = t_f + dur;
        let node = &mut w.nodes[h];
        w.delays.extend(node.queue.drain(..).map(|p| done - p.generated));
    }
    Ok(())
}
