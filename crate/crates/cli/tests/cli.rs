use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};
use tempfile::TempDir;

fn e2mac(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_e2mac"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = e2mac(args, cwd);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn records(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

const SMALL_SIM: &str = r#"{
  "sim": {"n_t": 40, "t_ra": 100.0, "cluster_size": 10.0, "e0": 0.03},
  "sweep": {"runs": [{"mac_variant": "e2mac"}, {"mac_variant": "cmac"}], "seeds": [1, 2, 3]}
}"#;

#[test]
fn feasibility_reports_the_crossover() {
    let dir = TempDir::new().unwrap();
    let text = ok(&["feasibility", "--out-dir", "f"], dir.path());
    assert!(text.contains("verdict: clustering wins"), "{text}");
    let report: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("f/feasibility.json")).unwrap()).unwrap();
    let bits = report["crossover_bits"].as_f64().unwrap();
    assert!((bits / 16584.0 - 1.0).abs() < 0.01, "{bits}");
    assert!(report["l_c"].as_f64().unwrap() > report["l_d"].as_f64().unwrap());
    assert!(report["threshold_omega"].is_null());
    assert!(dir.path().join("f/manifest.json").exists());
}

#[test]
fn partial_forwarding_prints_the_threshold() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("c.json"), r#"{"feasibility": {"inputs": {"lambda": 0.5}}}"#).unwrap();
    let text = ok(&["feasibility", "--config", "c.json"], dir.path());
    assert!(text.contains("threshold"), "{text}");
}

#[test]
fn malformed_configs_fail_naming_the_field() {
    let dir = TempDir::new().unwrap();
    for (doc, field) in [
        (r#"{"feasibility": {"inputs": {"r": "wide"}}}"#, "feasibility.inputs.r"),
        (r#"{"feasibility": {"inputs": {"lambda": 2.0}}}"#, "feasibility.inputs.lambda"),
        (r#"{"sim": {"n_t": 40, "r_inner": 900.0}}"#, "sim.r_inner"),
        (r#"{"sim": {"n_t": 40}, "sweep": {"runs": [{"k_m": -3}]}}"#, "sweep.runs[0].k_m"),
        (r#"{"sim": {"n_t": 40,}}"#, "sim"),
    ] {
        fs::write(dir.path().join("bad.json"), doc).unwrap();
        let cmd = if field.starts_with("feasibility") {
            "feasibility"
        } else if field.starts_with("sweep") {
            "sweep"
        } else {
            "simulate"
        };
        let out = e2mac(&[cmd, "--config", "bad.json", "--out-dir", "o"], dir.path());
        assert!(!out.status.success(), "{doc}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(field), "{doc}: {err}");
    }
}

#[test]
fn csma_sweep_layout_and_determinism() {
    let dir = TempDir::new().unwrap();
    let text = ok(&["analyze-csma", "--out-dir", "a"], dir.path());
    ok(&["analyze-csma", "--out-dir", "b"], dir.path());
    let a = fs::read(dir.path().join("a/csma_sweep.csv")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b/csma_sweep.csv")).unwrap());
    let (header, rows) = records(&dir.path().join("a/csma_sweep.csv"));
    assert_eq!(header, ["g", "n", "p_i", "p_s", "p_is", "u_e_bits_per_j", "u_s_bits_per_s", "delay_s"]);
    assert_eq!(rows.len(), 3 * 401);
    // the single-phase throughput peak sits near g tau_p = 13.7
    let tau_p = 1.0 / 1.005;
    let best = rows
        .iter()
        .filter(|r| r[1] == "1")
        .max_by(|a, b| a[6].parse::<f64>().unwrap().total_cmp(&b[6].parse().unwrap()))
        .unwrap();
    let load: f64 = best[0].parse::<f64>().unwrap() * tau_p;
    assert!((load - 13.7).abs() < 0.3, "{load}");
    assert!(text.contains("n = 1"), "{text}");

    fs::write(dir.path().join("empty.json"), r#"{"csma": {"g": []}}"#).unwrap();
    ok(&["analyze-csma", "--config", "empty.json", "--out-dir", "e"], dir.path());
    let empty = fs::read_to_string(dir.path().join("e/csma_sweep.csv")).unwrap();
    assert_eq!(empty, "g,n,p_i,p_s,p_is,u_e_bits_per_j,u_s_bits_per_s,delay_s\n");
}

#[test]
fn cluster_table_rises_then_falls_around_the_optimum() {
    let dir = TempDir::new().unwrap();
    let text = ok(&["optimize-cluster", "--out-dir", "c"], dir.path());
    let z_star: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("z* = "))
        .and_then(|l| l.split_whitespace().next())
        .unwrap()
        .parse()
        .unwrap();
    let (header, rows) = records(&dir.path().join("c/cluster_sizes.csv"));
    assert_eq!(header.last().unwrap(), "lifetime_s");
    let table: Vec<(f64, f64)> = rows.iter().map(|r| (r[0].parse().unwrap(), r[7].parse().unwrap())).collect();
    assert_eq!(table.iter().map(|r| r.0).collect::<Vec<_>>(), [10.0, 50.0, 100.0, 500.0, 1000.0]);
    for w in table.windows(2) {
        if w[1].0 <= z_star {
            assert!(w[1].1 > w[0].1, "{w:?}");
        } else if w[0].0 >= z_star {
            assert!(w[1].1 < w[0].1, "{w:?}");
        }
    }
    let (_, cdf) = records(&dir.path().join("c/cluster_lifetime_cdf.csv"));
    assert_eq!(cdf.last().unwrap()[1], "1");

    fs::write(dir.path().join("one.json"), r#"{"cluster": {"z_values": [80]}}"#).unwrap();
    ok(&["optimize-cluster", "--config", "one.json", "--out-dir", "one"], dir.path());
    let (_, rows) = records(&dir.path().join("one/cluster_sizes.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][0], "80");
}

#[test]
fn simulate_writes_reproducible_outputs() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("s.json"), SMALL_SIM).unwrap();
    let args = |out: &'static str| ["simulate", "--config", "s.json", "--variant", "e2mac", "--seed", "7", "--out-dir", out];
    ok(&args("deep/nested/a"), dir.path());
    ok(&args("b"), dir.path());
    for f in ["lifetime_cdf.csv", "delay_cdf.csv", "summary.csv"] {
        let a = fs::read(dir.path().join("deep/nested/a").join(f)).unwrap();
        assert_eq!(a, fs::read(dir.path().join("b").join(f)).unwrap(), "{f}");
    }
    let (header, rows) = records(&dir.path().join("b/summary.csv"));
    assert_eq!(header, ["variant", "seed", "fed_s", "last_death_s", "delay_p50_s", "delay_max_s"]);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][1], "7");
    let (header, _) = records(&dir.path().join("b/lifetime_cdf.csv"));
    assert_eq!(header, ["time_s", "fraction_dead"]);
    let (header, _) = records(&dir.path().join("b/delay_cdf.csv"));
    assert_eq!(header, ["delay_s", "fraction"]);

    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("b/manifest.json")).unwrap()).unwrap();
    let digest = hex::encode(Sha256::digest(SMALL_SIM.as_bytes()));
    assert_eq!(manifest["config_sha256"], digest.as_str());
    assert_eq!(manifest["subcommand"], "simulate");
    assert_eq!(manifest["seeds"], serde_json::json!([7]));
    assert_eq!(manifest["resolved_config"]["sim"]["seed"], 7);

    // the resolved config alone reproduces the run
    let resolved = serde_json::to_vec(&manifest["resolved_config"]).unwrap();
    fs::write(dir.path().join("again.json"), resolved).unwrap();
    ok(&["simulate", "--config", "again.json", "--out-dir", "c"], dir.path());
    assert_eq!(
        fs::read(dir.path().join("b/lifetime_cdf.csv")).unwrap(),
        fs::read(dir.path().join("c/lifetime_cdf.csv")).unwrap()
    );
}

#[test]
fn sweep_results_do_not_depend_on_the_job_count() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("s.json"), SMALL_SIM).unwrap();
    ok(&["sweep", "--config", "s.json", "--jobs", "1", "--out-dir", "one"], dir.path());
    let text = ok(&["sweep", "--config", "s.json", "--jobs", "3", "--out-dir", "three"], dir.path());
    assert!(text.contains("cmac"), "{text}");
    for f in ["summary.csv", "variants.csv", "lifetime_cdfs.csv", "delay_cdfs.csv"] {
        let a = fs::read(dir.path().join("one").join(f)).unwrap();
        assert_eq!(a, fs::read(dir.path().join("three").join(f)).unwrap(), "{f}");
    }
    let (_, rows) = records(&dir.path().join("one/summary.csv"));
    assert_eq!(rows.len(), 6);
    let (_, variants) = records(&dir.path().join("one/variants.csv"));
    assert_eq!(variants.len(), 2);

    ok(&["sweep", "--config", "s.json", "--seed", "4,5", "--out-dir", "seeds"], dir.path());
    let (_, rows) = records(&dir.path().join("seeds/summary.csv"));
    assert_eq!(rows.iter().map(|r| r[1].as_str()).collect::<Vec<_>>(), ["4", "5", "4", "5"]);
}
