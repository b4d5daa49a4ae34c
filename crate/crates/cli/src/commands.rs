use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{anyhow, Context, Result};
use e2mac::csma::{self, spectral_optimum_load};
use e2mac::planner::{clustering_feasibility, crossover_payload, FeasibilityReport};
use e2mac::report::{empirical_cdf, quantile, write_cdf_csv, write_rows_csv};
use e2mac::sim::{delay_cdf, lifetime_cdf, run_batch, run_sim, summarize, MacVariant, SimOutcome, SummaryRow};
use serde::Serialize;

use crate::config::Loaded;
use crate::manifest::RunManifest;

const SWEEP_HEADER: [&str; 8] = ["g", "n", "p_i", "p_s", "p_is", "u_e_bits_per_j", "u_s_bits_per_s", "delay_s"];
const SUMMARY_HEADER: [&str; 6] = ["variant", "seed", "fed_s", "last_death_s", "delay_p50_s", "delay_max_s"];
const VARIANTS_HEADER: [&str; 7] = [
    "variant",
    "seeds",
    "mean_fed_s",
    "mean_last_death_s",
    "delay_p50_s",
    "delay_p95_s",
    "delay_max_s",
];
const SIZES_HEADER: [&str; 8] = ["z", "t_intra_s", "p_is", "r_m_bps", "r_h_bps", "e_member_j", "e_head_j", "lifetime_s"];

/// Prefixes library configuration errors with the section they came from.
fn at(section: &'static str) -> impl Fn(e2mac::Error) -> anyhow::Error {
    move |e| match e {
        e2mac::Error::Config { field, reason } => anyhow!("config field `{section}.{field}`: {reason}"),
        other => anyhow!(other),
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn prepare(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn analyze_csma(config: Option<&Path>, out_dir: &Path) -> Result<()> {
    let loaded = Loaded::read(config)?;
    let section = &loaded.config.csma;
    let base = section.base();
    base.validate().map_err(at("csma.params"))?;
    let rows = csma::sweep(&base, &section.loads(), &section.phases).map_err(at("csma.params"))?;
    prepare(out_dir)?;
    write_rows_csv(create(out_dir, "csma_sweep.csv")?, &SWEEP_HEADER, &rows)?;
    RunManifest::new("analyze-csma", &loaded, &loaded.config, out_dir).write(out_dir)?;

    println!("{} rows -> {}", rows.len(), out_dir.join("csma_sweep.csv").display());
    for &n in &section.phases {
        let best = rows
            .iter()
            .filter(|r| r.n == n)
            .max_by(|a, b| a.u_s_bits_per_s.total_cmp(&b.u_s_bits_per_s));
        if let Some(r) = best {
            println!(
                "n = {n}: U_S peaks at {:.4} bit/s, g*tau_p = {:.2} on the grid",
                r.u_s_bits_per_s,
                r.g * base.tau_p
            );
        }
    }
    if let Ok(load) = spectral_optimum_load(base.delta_d / base.tau_p) {
        println!("small-delay optimum (n = 1): g*tau_p = {load:.2}");
    }
    Ok(())
}

#[derive(Serialize)]
struct SizeRow {
    z: u32,
    t_intra_s: f64,
    p_is: f64,
    r_m_bps: f64,
    r_h_bps: f64,
    e_member_j: f64,
    e_head_j: f64,
    lifetime_s: f64,
}

pub fn optimize_cluster(config: Option<&Path>, out_dir: Option<&Path>, seed: u64) -> Result<()> {
    let loaded = Loaded::read(config)?;
    let section = &loaded.config.cluster;
    let scenario = section.resolved();
    let opt = scenario.optimal_size(section.bounds()).map_err(at("cluster.scenario"))?;
    let t_ra = scenario.t_ra;
    println!(
        "z* = {} (cell-edge lifetime {:.6e} s = {:.2} periods)",
        opt.z_star,
        opt.lifetime,
        opt.lifetime / t_ra
    );

    let mut rows = Vec::new();
    println!("{:>6} {:>10} {:>8} {:>14} {:>10}", "z", "t_intra_s", "p_is", "lifetime_s", "periods");
    for &z in &section.z_values {
        match scenario.evaluate(f64::from(z), scenario.r_outer) {
            Ok(p) => {
                println!(
                    "{z:>6} {:>10.4} {:>8.4} {:>14.6e} {:>10.2}",
                    p.t_intra,
                    p.p_is,
                    p.lifetime,
                    p.lifetime / t_ra
                );
                rows.push(SizeRow {
                    z,
                    t_intra_s: p.t_intra,
                    p_is: p.p_is,
                    r_m_bps: p.r_m,
                    r_h_bps: p.r_h,
                    e_member_j: p.e_member,
                    e_head_j: p.e_head,
                    lifetime_s: p.lifetime,
                });
            }
            Err(e) => println!("{z:>6} skipped: {e}"),
        }
    }

    let samples = scenario
        .lifetime_samples(f64::from(opt.z_star), section.cdf_samples, seed)
        .map_err(at("cluster.scenario"))?;
    let cdf = empirical_cdf(&samples)?;
    if let (Some(lo), Some(mid), Some(hi)) = (quantile(&samples, 0.0), quantile(&samples, 0.5), quantile(&samples, 1.0)) {
        println!(
            "lifetime over {} head placements at z*: min {lo:.6e} s, median {mid:.6e} s, max {hi:.6e} s",
            samples.len()
        );
    }

    if let Some(dir) = out_dir {
        prepare(dir)?;
        write_rows_csv(create(dir, "cluster_sizes.csv")?, &SIZES_HEADER, &rows)?;
        write_cdf_csv(create(dir, "cluster_lifetime_cdf.csv")?, ["lifetime_s", "fraction"], &cdf)?;
        let mut m = RunManifest::new("optimize-cluster", &loaded, &loaded.config, dir);
        m.seeds = vec![seed];
        m.write(dir)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct FeasibilityOutput {
    #[serde(flatten)]
    report: FeasibilityReport,
    crossover_bits: Option<f64>,
    crossover_note: Option<String>,
}

pub fn feasibility(config: Option<&Path>, out_dir: Option<&Path>) -> Result<()> {
    let loaded = Loaded::read(config)?;
    let inputs = loaded.config.feasibility.resolved();
    let report = clustering_feasibility(&inputs).map_err(at("feasibility.inputs"))?;
    let crossover = crossover_payload(&inputs);
    let verdict = if report.feasible { "clustering wins" } else { "direct access wins" };
    println!("verdict: {verdict}");
    println!("L_c = {:.6e} s", report.l_c);
    println!("L_d = {:.6e} s", report.l_d);
    match report.threshold_omega {
        Some(t) if t > 0.0 => println!("threshold: clustering wins when Omega_h(R) >= {t:.6e}"),
        Some(t) => println!("threshold: {t:.6e}, so clustering wins at every Omega_h(R)"),
        None => {}
    }
    let (crossover_bits, crossover_note) = match crossover {
        Ok(bits) => {
            println!(
                "crossover payload = {bits:.2} bits ({:.2} bytes, {:.3} KiB)",
                bits / 8.0,
                bits / 8192.0
            );
            (Some(bits), None)
        }
        Err(e) => {
            println!("crossover payload: none ({e})");
            (None, Some(e.to_string()))
        }
    };
    if let Some(dir) = out_dir {
        prepare(dir)?;
        let out = FeasibilityOutput {
            report,
            crossover_bits,
            crossover_note,
        };
        let mut f = create(dir, "feasibility.json")?;
        serde_json::to_writer_pretty(&mut f, &out)?;
        writeln!(f)?;
        f.flush()?;
        RunManifest::new("feasibility", &loaded, &loaded.config, dir).write(dir)?;
    }
    Ok(())
}

pub fn simulate(config: Option<&Path>, out_dir: &Path, variant: Option<MacVariant>, seed: Option<u64>) -> Result<()> {
    let loaded = Loaded::read(config)?;
    let mut resolved = loaded.config.clone();
    if let Some(v) = variant {
        resolved.sim = resolved.sim.with_variant(v);
    }
    if let Some(s) = seed {
        resolved.sim.seed = s;
    }
    let cfg = &resolved.sim;
    cfg.validate().map_err(at("sim"))?;
    let outcome = run_sim(cfg).map_err(at("sim"))?;

    prepare(out_dir)?;
    write_cdf_csv(create(out_dir, "lifetime_cdf.csv")?, ["time_s", "fraction_dead"], &lifetime_cdf(&outcome)?)?;
    write_cdf_csv(create(out_dir, "delay_cdf.csv")?, ["delay_s", "fraction"], &delay_cdf(&outcome)?)?;
    let row = SummaryRow::from_outcome(&outcome);
    write_rows_csv(create(out_dir, "summary.csv")?, &SUMMARY_HEADER, std::slice::from_ref(&row))?;
    write_extras(out_dir, &outcome)?;
    let mut m = RunManifest::new("simulate", &loaded, &resolved, out_dir);
    m.seeds = vec![cfg.seed];
    m.variant = Some(cfg.mac_variant.as_str().to_string());
    m.write(out_dir)?;

    let show = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.6e}"));
    println!("{} seed {}: {} cycles", outcome.label, outcome.seed, outcome.cycles);
    println!("first death {} s, last death {} s", show(row.fed_s), show(row.last_death_s));
    println!(
        "{} packets delivered (median delay {} s, max {} s), {} dropped, {} collisions",
        outcome.packet_delays.len(),
        show(row.delay_p50_s),
        show(row.delay_max_s),
        outcome.dropped_packets,
        outcome.collisions
    );
    Ok(())
}

/// Event log and energy trace, when the run recorded them.
fn write_extras(dir: &Path, o: &SimOutcome) -> Result<()> {
    if let Some(events) = &o.events {
        let mut f = create(dir, "events.csv")?;
        writeln!(f, "time_s,device,event,energy_j")?;
        for e in events {
            let kind = serde_json::to_value(e.kind)?;
            writeln!(f, "{},{},{},{}", e.time, e.device, kind.as_str().unwrap_or_default(), e.energy)?;
        }
        f.flush()?;
    }
    if let Some(trace) = &o.energy_trace {
        let mut f = create(dir, "energy_trace.csv")?;
        writeln!(f, "time_s,device,energy_j")?;
        for s in trace {
            for (id, e) in s.energy.iter().enumerate() {
                writeln!(f, "{},{id},{e}", s.time)?;
            }
        }
        f.flush()?;
    }
    Ok(())
}

pub fn sweep(config: Option<&Path>, out_dir: &Path, seeds: &[u64], jobs: Option<usize>) -> Result<()> {
    let loaded = Loaded::read(config)?;
    let mut resolved = loaded.config.clone();
    if !seeds.is_empty() {
        resolved.sweep.seeds = seeds.to_vec();
    }
    let cfgs = resolved.sweep.configs(&resolved.sim)?;
    let seeds = resolved.sweep.seeds.clone();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        pool = pool.num_threads(j.max(1));
    }
    let outcomes = pool.build()?.install(|| run_batch(&cfgs, &seeds)).map_err(at("sim"))?;

    prepare(out_dir)?;
    let rows: Vec<SummaryRow> = outcomes.iter().map(SummaryRow::from_outcome).collect();
    write_rows_csv(create(out_dir, "summary.csv")?, &SUMMARY_HEADER, &rows)?;
    write_pooled_cdfs(out_dir, &outcomes)?;
    let mut m = RunManifest::new("sweep", &loaded, &resolved, out_dir);
    m.seeds = seeds;
    m.jobs = jobs;
    m.write(out_dir)?;

    let cmp = summarize(&outcomes)?;
    write_rows_csv(create(out_dir, "variants.csv")?, &VARIANTS_HEADER, &cmp.variants)?;
    println!("{:<28} {:>14} {:>14} {:>12}", "variant", "mean_fed_s", "mean_last_s", "delay_p95_s");
    for v in &cmp.variants {
        println!(
            "{:<28} {:>14.6e} {:>14.6e} {:>12.4}",
            v.variant, v.mean_fed_s, v.mean_last_death_s, v.delay_p95_s
        );
    }
    Ok(())
}

/// Lifetime and delay CDFs per variant, pooling every seed.
fn write_pooled_cdfs(dir: &Path, outcomes: &[SimOutcome]) -> Result<()> {
    let mut labels: Vec<&str> = Vec::new();
    for o in outcomes {
        if !labels.contains(&o.label.as_str()) {
            labels.push(&o.label);
        }
    }
    let mut life = create(dir, "lifetime_cdfs.csv")?;
    let mut delay = create(dir, "delay_cdfs.csv")?;
    writeln!(life, "variant,time_s,fraction_dead")?;
    writeln!(delay, "variant,delay_s,fraction")?;
    for label in labels {
        let group: Vec<&SimOutcome> = outcomes.iter().filter(|o| o.label == label).collect();
        let devices: usize = group.iter().map(|o| o.death_times.len()).sum();
        let deaths: Vec<f64> = group.iter().flat_map(|o| o.death_times.iter().flatten().copied()).collect();
        let scale = if devices == 0 { 0.0 } else { deaths.len() as f64 / devices as f64 };
        for (t, f) in empirical_cdf(&deaths)? {
            writeln!(life, "\"{label}\",{t},{}", f * scale)?;
        }
        let delays: Vec<f64> = group.iter().flat_map(|o| o.packet_delays.iter().copied()).collect();
        for (d, f) in empirical_cdf(&delays)? {
            writeln!(delay, "\"{label}\",{d},{f}")?;
        }
    }
    life.flush()?;
    delay.flush()?;
    Ok(())
}
