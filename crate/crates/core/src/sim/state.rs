//! Per-device state and energy bookkeeping shared by every access scheme.

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use super::config::SimConfig;
use super::outcome::{EnergyLedger, EnergySample, EventKind, SimEvent, SimOutcome};
use crate::error::{Error, Result};
use crate::geometry::{sample_in_annulus, Point};
use crate::radio::{LogBase, RadioEnvironment};

const STREAM_DEPLOY: u64 = 0;
const STREAM_ACCESS: u64 = 1;
const STREAM_HEADS: u64 = 2;
const STREAM_TRAFFIC: u64 = 16;

pub(super) fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(super) enum Activity {
    Tx,
    Listen,
    Sleep,
    Fixed,
    Reform,
}

#[derive(Debug, Clone, Copy)]
pub(super) struct Packet {
    pub generated: f64,
    pub attempts: u32,
}

pub(super) struct Node {
    pub position: Point,
    pub energy: f64,
    pub ledger: EnergyLedger,
    pub death: Option<f64>,
    /// Seconds spent transmitting or listening in the current cycle.
    pub active: f64,
    pub queue: VecDeque<Packet>,
    arrivals: ChaCha8Rng,
    next_arrival: f64,
}

impl Node {
    pub fn is_alive(&self) -> bool {
        self.death.is_none()
    }

    /// Queues every packet generated before `until`.
    pub fn pull_arrivals(&mut self, until: f64, gap: Option<&Exp<f64>>) {
        let Some(gap) = gap else { return };
        while self.next_arrival < until {
            self.queue.push_back(Packet {
                generated: self.next_arrival,
                attempts: 0,
            });
            self.next_arrival += gap.sample(&mut self.arrivals);
        }
    }

    fn book(&mut self, e: f64, what: Activity) {
        let l = &mut self.ledger;
        match what {
            Activity::Tx => l.tx += e,
            Activity::Listen => l.listen += e,
            Activity::Sleep => l.sleep += e,
            Activity::Fixed => l.fixed += e,
            Activity::Reform => l.reform += e,
        }
    }

    /// Draws `power` for `dur` seconds from `t`. Returns false if the node
    /// is or becomes dead; the death time is where the battery runs out.
    pub fn charge(&mut self, t: f64, power: f64, dur: f64, what: Activity) -> bool {
        if self.death.is_some() {
            return false;
        }
        let dur = dur.max(0.0);
        let e = power * dur;
        let counts = matches!(what, Activity::Tx | Activity::Listen);
        if e < self.energy {
            self.energy -= e;
            self.book(e, what);
            if counts {
                self.active += dur;
            }
            return true;
        }
        let spent = self.energy;
        let lived = spent / power;
        self.book(spent, what);
        if counts {
            self.active += lived;
        }
        self.energy = 0.0;
        self.death = Some(t + lived);
        false
    }

    /// Charges a lump of energy at `t`.
    pub fn charge_lump(&mut self, t: f64, e: f64, what: Activity) -> bool {
        if self.death.is_some() {
            return false;
        }
        if e < self.energy {
            self.energy -= e;
            self.book(e, what);
            return true;
        }
        let spent = self.energy;
        self.book(spent, what);
        self.energy = 0.0;
        self.death = Some(t);
        false
    }
}

/// Devices, random streams and collected statistics of one run.
pub(super) struct World<'a> {
    pub cfg: &'a SimConfig,
    pub env: RadioEnvironment,
    pub nodes: Vec<Node>,
    /// Contention draws (backoffs, preamble choices).
    pub access_rng: ChaCha8Rng,
    /// Initial head draw.
    pub head_rng: ChaCha8Rng,
    pub gap: Option<Exp<f64>>,
    pub delays: Vec<f64>,
    pub dropped: u64,
    pub collisions: u64,
    events: Option<Vec<SimEvent>>,
    trace: Option<Vec<EnergySample>>,
    deaths_logged: Vec<bool>,
    pub cycles: u64,
}

impl<'a> World<'a> {
    pub fn new(cfg: &'a SimConfig) -> Result<Self> {
        let env = RadioEnvironment {
            w_m: cfg.w,
            w_h: cfg.w,
            n0: cfg.n0(),
            gamma_gap: cfg.gamma_gap(),
            pl_inter: cfg.pl_inter,
            pl_intra: cfg.pl_intra,
            log_base: LogBase::Base2,
        };
        env.validate()?;
        let gap = if cfg.traffic.r_g > 0.0 {
            Some(Exp::new(cfg.traffic.r_g).map_err(|e| Error::config("traffic.r_g", e.to_string()))?)
        } else {
            None
        };
        let mut deploy = stream(cfg.seed, STREAM_DEPLOY);
        let n = cfg.n_t as usize;
        let nodes = (0..n)
            .map(|id| {
                let position = sample_in_annulus(&mut deploy, cfg.r_inner, cfg.r_outer);
                let mut arrivals = stream(cfg.seed, STREAM_TRAFFIC + id as u64);
                let next_arrival = gap.as_ref().map_or(f64::INFINITY, |g| g.sample(&mut arrivals));
                Node {
                    position,
                    energy: cfg.e0,
                    ledger: EnergyLedger::default(),
                    death: None,
                    active: 0.0,
                    queue: VecDeque::new(),
                    arrivals,
                    next_arrival,
                }
            })
            .collect();
        Ok(World {
            cfg,
            env,
            nodes,
            access_rng: stream(cfg.seed, STREAM_ACCESS),
            head_rng: stream(cfg.seed, STREAM_HEADS),
            gap,
            delays: Vec::new(),
            dropped: 0,
            collisions: 0,
            events: cfg.record_events.then(Vec::new),
            trace: cfg.trace_every.map(|_| Vec::new()),
            deaths_logged: vec![false; n],
            cycles: 0,
        })
    }

    pub fn any_alive(&self) -> bool {
        self.nodes.iter().any(Node::is_alive)
    }

    pub fn pull(&mut self, id: usize, until: f64) {
        let gap = self.gap;
        self.nodes[id].pull_arrivals(until, gap.as_ref());
    }

    pub fn log(&mut self, ev: SimEvent) {
        if let Some(events) = self.events.as_mut() {
            events.push(ev);
        }
    }

    /// Logs an event for `id` with its current energy.
    pub fn note(&mut self, time: f64, id: usize, kind: EventKind, cluster: Option<usize>) {
        self.note_window(time, id, kind, cluster, None, None);
    }

    pub fn note_window(
        &mut self,
        time: f64,
        id: usize,
        kind: EventKind,
        cluster: Option<usize>,
        bunch: Option<u32>,
        window: Option<(f64, f64)>,
    ) {
        if self.events.is_some() {
            let energy = self.nodes[id].energy;
            self.log(SimEvent {
                time,
                device: id,
                kind,
                energy,
                cluster,
                bunch,
                window,
            });
        }
        self.note_death(id);
    }

    /// Logs the death of `id` once, if it has died.
    pub fn note_death(&mut self, id: usize) {
        if let Some(t) = self.nodes[id].death {
            if !self.deaths_logged[id] {
                self.deaths_logged[id] = true;
                self.log(SimEvent {
                    time: t,
                    device: id,
                    kind: EventKind::Death,
                    energy: 0.0,
                    cluster: None,
                    bunch: None,
                    window: None,
                });
            }
        }
    }

    /// Sleep for the idle part of the cycle, then trace sampling.
    pub fn close_cycle(&mut self, cycle: u64, t0: f64) {
        let cfg = self.cfg;
        for id in 0..self.nodes.len() {
            let node = &mut self.nodes[id];
            if node.is_alive() && cfg.power.p_s > 0.0 {
                let idle = (cfg.t_ra - node.active).max(0.0);
                node.charge(t0 + node.active, cfg.power.p_s, idle, Activity::Sleep);
            }
            node.active = 0.0;
            self.note_death(id);
        }
        if let (Some(every), Some(trace)) = (cfg.trace_every, self.trace.as_mut()) {
            if cycle.is_multiple_of(every) {
                trace.push(EnergySample {
                    time: t0 + cfg.t_ra,
                    energy: self.nodes.iter().map(|n| n.energy).collect(),
                });
            }
        }
        self.cycles = cycle + 1;
    }

    pub fn finish(self, label: String) -> SimOutcome {
        let mut events = self.events;
        if let Some(ev) = events.as_mut() {
            ev.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.device.cmp(&b.device)));
        }
        SimOutcome {
            label,
            seed: self.cfg.seed,
            initial_energy: self.cfg.e0,
            positions: self.nodes.iter().map(|n| n.position).collect(),
            death_times: self.nodes.iter().map(|n| n.death).collect(),
            residual_energy: self.nodes.iter().map(|n| n.energy).collect(),
            ledgers: self.nodes.iter().map(|n| n.ledger).collect(),
            packet_delays: self.delays,
            dropped_packets: self.dropped,
            collisions: self.collisions,
            cycles: self.cycles,
            events,
            energy_trace: self.trace,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(e: f64) -> Node {
        Node {
            position: Point::ORIGIN,
            energy: e,
            ledger: EnergyLedger::default(),
            death: None,
            active: 0.0,
            queue: VecDeque::new(),
            arrivals: stream(0, 0),
            next_arrival: f64::INFINITY,
        }
    }

    #[test]
    fn overdraw_sets_death_where_battery_ends() {
        let mut n = node(1.0);
        assert!(n.charge(10.0, 0.5, 1.0, Activity::Tx));
        assert!(!n.charge(20.0, 0.25, 10.0, Activity::Listen));
        assert_eq!(n.death, Some(22.0));
        assert_eq!(n.energy, 0.0);
        assert_eq!(n.ledger.total(), 1.0);
        assert!(!n.charge(30.0, 1.0, 1.0, Activity::Tx));
        assert_eq!(n.ledger.total(), 1.0);
    }

    #[test]
    fn lump_overdraw_dies_immediately() {
        let mut n = node(1.0);
        assert!(!n.charge_lump(5.0, 1.0, Activity::Fixed));
        assert_eq!(n.death, Some(5.0));
        assert_eq!(n.ledger.fixed, 1.0);
    }

    #[test]
    fn arrivals_are_ordered_and_bounded() {
        let gap = Exp::new(0.5).unwrap();
        let mut n = node(1.0);
        n.next_arrival = 0.0;
        n.pull_arrivals(100.0, Some(&gap));
        let g: Vec<f64> = n.queue.iter().map(|p| p.generated).collect();
        assert!(g.windows(2).all(|w| w[0] <= w[1]));
        assert!(g.iter().all(|&t| t < 100.0));
        assert!(n.next_arrival >= 100.0);
        assert!((30..70).contains(&g.len()));
    }
}
