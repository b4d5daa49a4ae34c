//! Direct access through preamble contention in even frames.

use rand::Rng;

use super::outcome::EventKind;
use super::state::{Activity, World};
use crate::error::{Error, Result};
use crate::lifetime::TxMode;

pub(super) fn run(w: &mut World) -> Result<()> {
    let cfg = w.cfg;
    let rach = cfg.rach;
    let p = cfg.power;
    let n = w.nodes.len();
    let mut rates = Vec::with_capacity(n);
    for (id, node) in w.nodes.iter().enumerate() {
        let omega = w.env.pl_inter.linear(node.position.norm()).map_err(|_| Error::NonPositiveRate {
            from: id.to_string(),
            to: "base station".into(),
        })?;
        rates.push(w.env.shannon_rate(cfg.w, p.p_t_d, omega));
    }
    let frames = (cfg.resource_budget / rach.frame + 1e-9).floor() as u64;
    let draw = p.tx_draw(TxMode::Direct);
    let mut busy_until = vec![0.0; n];
    let mut picks: Vec<(usize, u32)> = Vec::new();
    let mut uses = vec![0u32; rach.preambles as usize];

    for cycle in 0..cfg.max_cycles {
        if !w.any_alive() {
            break;
        }
        let t0 = cycle as f64 * cfg.t_ra;
        let mut contenders = Vec::new();
        for id in 0..n {
            if !w.nodes[id].is_alive() {
                continue;
            }
            w.nodes[id].charge_lump(t0, p.e_s_d, Activity::Fixed);
            w.note_death(id);
            w.pull(id, t0);
            busy_until[id] = t0;
            if w.nodes[id].is_alive() && !w.nodes[id].queue.is_empty() {
                contenders.push(id);
            }
        }
        // each opportunity needs the two following frames for data
        let mut f = 0;
        while f + 2 < frames && !contenders.is_empty() {
            let ts = t0 + f as f64 * rach.frame + rach.preamble_offset;
            let rar_end = t0 + (f + 1) as f64 * rach.frame;
            picks.clear();
            uses.iter_mut().for_each(|u| *u = 0);
            for &id in &contenders {
                if busy_until[id] <= ts {
                    let pre = w.access_rng.random_range(0..rach.preambles);
                    uses[pre as usize] += 1;
                    picks.push((id, pre));
                }
            }
            for &(id, pre) in &picks {
                let node = &mut w.nodes[id];
                node.queue.front_mut().expect("queued packet").attempts += 1;
                let ok = node.charge(ts, draw, rach.preamble_duration, Activity::Tx)
                    && node.charge(ts + rach.preamble_duration, p.p_l, rar_end - ts - rach.preamble_duration, Activity::Listen);
                w.note_window(ts, id, EventKind::Preamble, None, None, Some((ts, ts)));
                if !ok {
                    continue;
                }
                if uses[pre as usize] == 1 {
                    let airtime = cfg.traffic.d_i / rates[id];
                    let node = &mut w.nodes[id];
                    let alive = node.charge(rar_end, draw, airtime, Activity::Tx);
                    w.note_window(rar_end, id, EventKind::DirectTx, None, None, Some((rar_end, rar_end)));
                    if alive {
                        let pkt = w.nodes[id].queue.pop_front().expect("queued packet");
                        w.delays.push(rar_end + airtime - pkt.generated);
                        busy_until[id] = rar_end + airtime;
                    }
                } else {
                    w.collisions += 1;
                    let node = &mut w.nodes[id];
                    if node.queue.front().is_some_and(|q| q.attempts >= cfg.k_m) {
                        node.queue.pop_front();
                        w.dropped += 1;
                        w.note(ts, id, EventKind::Drop, None);
                    }
                }
            }
            contenders.retain(|&id| w.nodes[id].is_alive() && !w.nodes[id].queue.is_empty());
            f += 2;
        }
        w.close_cycle(cycle, t0);
    }
    Ok(())
}
