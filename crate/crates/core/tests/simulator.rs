use std::collections::BTreeMap;

use e2mac::lifetime::{node_lifetime, PowerProfile, TrafficProfile, TxMode};
use e2mac::radio::{LogBase, RadioEnvironment};
use e2mac::sim::*;

fn small(variant: MacVariant) -> SimConfig {
    SimConfig {
        n_t: 60,
        cluster_size: 20.0,
        e0: 0.05,
        ..SimConfig::desk_scale().with_variant(variant)
    }
}

fn env(cfg: &SimConfig) -> RadioEnvironment {
    RadioEnvironment {
        w_m: cfg.w,
        w_h: cfg.w,
        n0: cfg.n0(),
        gamma_gap: cfg.gamma_gap(),
        pl_inter: cfg.pl_inter,
        pl_intra: cfg.pl_intra,
        log_base: LogBase::Base2,
    }
}

const ALL: [MacVariant; 4] = [MacVariant::E2Mac, MacVariant::E2MacN, MacVariant::E2MacR, MacVariant::CMac];

#[test]
fn same_seed_same_outcome() {
    for v in ALL {
        let cfg = SimConfig {
            record_events: true,
            trace_every: Some(10),
            ..small(v)
        };
        let a = run_sim(&cfg).unwrap();
        let b = run_sim(&cfg).unwrap();
        assert_eq!(a, b, "{v:?}");
        let c = run_sim(&SimConfig { seed: 9, ..cfg }).unwrap();
        assert_ne!(a.death_times, c.death_times);
    }
}

#[test]
fn every_run_conserves_energy() {
    for v in ALL {
        for seed in 0..3 {
            let cfg = SimConfig {
                seed,
                e_ref: 20e-6,
                power: PowerProfile {
                    p_s: 1e-6,
                    e_s: 1e-5,
                    ..small(v).power
                },
                ..small(v)
            };
            let o = run_sim(&cfg).unwrap();
            assert!(o.energy_balance_error() <= 1e-9, "{v:?}: {}", o.energy_balance_error());
            assert!(o.death_times.iter().all(Option::is_some));
            assert!(o.residual_energy.iter().all(|&e| e == 0.0));
            if v == MacVariant::E2MacR {
                assert!(o.ledgers.iter().any(|l| l.reform > 0.0));
            }
            assert!(o.ledgers.iter().all(|l| l.sleep > 0.0));
        }
    }
}

#[test]
fn lone_direct_device_matches_closed_form() {
    let traffic = TrafficProfile {
        t_i: 250.0,
        d_i: 40960.0,
        r_g: 1.0 / 250.0,
    };
    let cfg = SimConfig {
        n_t: 1,
        e0: 100.0,
        traffic,
        power: PowerProfile {
            e_s_d: 0.0,
            ..PowerProfile::default()
        },
        ..SimConfig::desk_scale().with_variant(MacVariant::CMac)
    };
    let o = run_sim(&cfg).unwrap();
    let env = env(&cfg);
    let d = o.positions[0].norm();
    let rate = env.shannon_rate(cfg.w, cfg.power.p_t_d, env.pl_inter.linear(d).unwrap());
    let p = cfg.power;
    let rach = cfg.rach;
    let per_packet = rach.preamble_duration * p.tx_draw(TxMode::Direct)
        + (rach.frame - rach.preamble_offset - rach.preamble_duration) * p.p_l;
    let oracle_power = PowerProfile { e_s_d: per_packet, ..p };
    let expected = node_lifetime(cfg.e0, &traffic, rate, &oracle_power, TxMode::Direct).unwrap();
    let got = o.fed().unwrap();
    assert!((got / expected - 1.0).abs() < 0.05, "{got} vs {expected}");
    assert_eq!(o.collisions, 0);
}

#[test]
fn one_member_per_phase_never_collides() {
    let traffic = TrafficProfile {
        t_i: 50.0,
        d_i: 40960.0,
        r_g: 1.0 / 50.0,
    };
    let base = SimConfig {
        n_t: 8,
        cluster_size: 8.0,
        e0: 0.5,
        traffic,
        // windows long enough for every phase to hold a packet
        intra_per_member: 0.025,
        ..SimConfig::desk_scale()
    };
    let spread = run_sim(&SimConfig { n_phases: 8, ..base.clone() }).unwrap();
    assert_eq!(spread.collisions, 0);
    assert!(spread.packet_delays.len() > 100);
    let crowded = run_sim(&SimConfig {
        n_phases: 1,
        delta_d: 5e-3,
        ..base
    })
    .unwrap();
    assert!(crowded.collisions > 0);
}

/// Per (cycle, cluster): the bunch and the span from the first transmission
/// start to the last transmission end.
fn cluster_spans(events: &[SimEvent], t_ra: f64) -> BTreeMap<(u64, usize), (u32, f64, f64)> {
    let mut spans: BTreeMap<(u64, usize), (u32, f64, f64)> = BTreeMap::new();
    for e in events {
        let (Some(c), Some(b)) = (e.cluster, e.bunch) else { continue };
        let key = ((e.time / t_ra).floor() as u64, c);
        let s = spans.entry(key).or_insert((b, f64::INFINITY, f64::NEG_INFINITY));
        assert_eq!(s.0, b, "a cluster keeps one bunch per cycle");
        s.1 = s.1.min(e.time);
        s.2 = s.2.max(e.time);
    }
    spans
}

#[test]
fn transmissions_stay_in_their_windows() {
    for (v, z, n) in [(MacVariant::E2Mac, 20.0, 3), (MacVariant::E2MacR, 10.0, 2), (MacVariant::E2Mac, 5.0, 1)] {
        let cfg = SimConfig {
            record_events: true,
            cluster_size: z,
            n_phases: n,
            traffic: TrafficProfile {
                t_i: 200.0,
                d_i: 40960.0,
                r_g: 1.0 / 200.0,
            },
            ..small(v)
        };
        let o = run_sim(&cfg).unwrap();
        let events = o.events.as_ref().unwrap();
        let mut starts = 0;
        for e in events {
            if matches!(e.kind, EventKind::IntraTx | EventKind::Preamble) {
                let (a, b) = e.window.unwrap();
                assert!(e.time >= a && e.time <= b, "{e:?}");
                starts += 1;
            }
            if e.kind == EventKind::IntraTx {
                let in_cycle = e.time - (e.time / cfg.t_ra).floor() * cfg.t_ra;
                assert!(in_cycle < cfg.intra_window, "{e:?}");
            }
        }
        assert!(starts > 50);
        let spans = cluster_spans(events, cfg.t_ra);
        for (&(cy, c1), &(b1, s1, e1)) in &spans {
            for (&(cy2, c2), &(b2, s2, e2)) in spans.range((cy, c1 + 1)..(cy + 1, 0)) {
                assert_eq!(cy, cy2);
                if b1 == b2 {
                    assert!(e1 <= s2 || e2 <= s1, "clusters {c1} and {c2} overlap in bunch {b1}");
                }
            }
        }
    }
}

#[test]
fn delays_exceed_the_shortest_airtime() {
    for v in ALL {
        let cfg = small(v);
        let o = run_sim(&cfg).unwrap();
        let env = env(&cfg);
        let p = cfg.power;
        let mut best_rate: f64 = 0.0;
        for (i, a) in o.positions.iter().enumerate() {
            let bs = env.pl_inter.linear(a.norm()).unwrap();
            best_rate = best_rate.max(env.shannon_rate(cfg.w, p.p_t_h.max(p.p_t_d), bs));
            for b in &o.positions[i + 1..] {
                let omega = env.pl_intra.linear(a.dist(b)).unwrap();
                best_rate = best_rate.max(env.shannon_rate(cfg.w, p.p_t_m, omega));
            }
        }
        let tau = cfg.traffic.d_i / best_rate;
        assert!(!o.packet_delays.is_empty());
        assert!(o.packet_delays.iter().all(|&d| d >= tau), "{v:?}");
    }
}

#[test]
fn lifetime_cdf_starts_at_one_device() {
    let o = run_sim(&small(MacVariant::E2Mac)).unwrap();
    let cdf = lifetime_cdf(&o).unwrap();
    assert_eq!(cdf[0].0, o.fed().unwrap());
    let first_step = cdf[0].1;
    let ties = o.death_times.iter().filter(|t| **t == o.fed()).count();
    assert_eq!(first_step, ties as f64 / 60.0);
    assert_eq!(cdf.last().unwrap(), &(o.last_death().unwrap(), 1.0));
    assert!(cdf.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 < w[1].1));
    let d = delay_cdf(&o).unwrap();
    assert_eq!(d.last().unwrap().1, 1.0);
}

fn max_delay(cfg: &SimConfig) -> f64 {
    run_sim(cfg).unwrap().packet_delays.into_iter().fold(0.0, f64::max)
}

#[test]
fn more_phases_raise_the_worst_delay() {
    for seed in 1..=3 {
        let base = SimConfig {
            seed,
            e0: 0.2,
            ..SimConfig::desk_scale()
        };
        let one = max_delay(&base);
        let three = max_delay(&SimConfig { n_phases: 3, ..base });
        assert!(three > one, "seed {seed}: {three} vs {one}");
    }
}

#[test]
fn reforming_does_not_raise_the_worst_delay() {
    let base = SimConfig {
        n_t: 200,
        e0: 0.2,
        ..SimConfig::desk_scale()
    };
    let kept = max_delay(&base);
    let reformed = max_delay(&base.clone().with_variant(MacVariant::E2MacR));
    assert!(reformed <= kept, "{reformed} vs {kept}");
}

#[test]
fn comparison_tables() {
    let cfgs = vec![small(MacVariant::E2Mac), small(MacVariant::CMac)];
    let a = compare_variants(&cfgs, &[1, 2]).unwrap();
    let b = compare_variants(&cfgs, &[1, 2]).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.rows.len(), 4);
    assert_eq!(a.variants.len(), 2);
    assert_eq!(a.variants[1].variant, "cmac");

    let single = compare_variants(&cfgs[..1], &[3]).unwrap();
    let run = run_sim(&SimConfig { seed: 3, ..cfgs[0].clone() }).unwrap();
    assert_eq!(single.rows[0], SummaryRow::from_outcome(&run));
    assert_eq!(single.variants[0].mean_fed_s, run.fed().unwrap());
    assert_eq!(single.variants[0].mean_last_death_s, run.last_death().unwrap());
}

#[test]
fn bad_configs_name_their_field() {
    let cfg = SimConfig {
        r_inner: 600.0,
        ..SimConfig::desk_scale()
    };
    match run_sim(&cfg) {
        Err(e2mac::Error::Config { field, .. }) => assert_eq!(field, "r_inner"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn stops_at_the_cycle_limit() {
    let cfg = SimConfig {
        max_cycles: 5,
        ..small(MacVariant::E2Mac)
    };
    let o = run_sim(&cfg).unwrap();
    assert_eq!(o.cycles, 5);
    assert!(o.death_times.iter().all(Option::is_none));
    assert_eq!(o.fed(), None);
    assert!(o.energy_balance_error() <= 1e-9);
}
