use std::path::{Path, PathBuf};

use clap::Parser;
use tempfile::TempDir;
use zeno_sta::harness::cli::{main_with_args, resolve, Cli};
use zeno_sta::harness::Format;

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> i32 {
    main_with_args(std::iter::once("zeno-sta").chain(args.iter().copied()))
}

const STROBE: &str = r#"{
  "protocol": "strobe",
  "model": { "name": "rotating-qubit", "params": { "omega": 1.0, "T": 1.0 } },
  "grid": { "steps": 50 }
}"#;

const SME: &str = r#"{
  "protocol": "sme",
  "model": { "name": "rotating-qubit", "params": { "omega": 1.0, "T": 1.0 } },
  "grid": { "steps": 400 },
  "seed": 3,
  "sme": { "kappa": 20.0, "trajectories": 16 }
}"#;

fn setup(name: &str, text: &str) -> (TempDir, String) {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), name, text);
    let s = p.to_str().unwrap().to_string();
    (dir, s)
}

#[test]
fn strobe_rows_to_csv() {
    let (dir, cfg) = setup("s.json", STROBE);
    let out = dir.path().join("rows.csv");
    assert_eq!(run(&["strobe", "--config", &cfg, "--out", out.to_str().unwrap()]), 0);
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,p_surv,cum_surv,fidelity_to_target,leak_rate"));
    assert_eq!(lines.count(), 51);
}

#[test]
fn json_export_matches_csv() {
    let (dir, cfg) = setup("s.json", STROBE);
    let csv_out = dir.path().join("rows.csv");
    let json_out = dir.path().join("rows.json");
    assert_eq!(run(&["strobe", "--config", &cfg, "--out", csv_out.to_str().unwrap()]), 0);
    assert_eq!(run(&["strobe", "--config", &cfg, "--out", json_out.to_str().unwrap()]), 0);

    let rows: Vec<serde_json::Map<String, serde_json::Value>> =
        serde_json::from_str(&std::fs::read_to_string(&json_out).unwrap()).unwrap();
    let mut rdr = csv::Reader::from_path(&csv_out).unwrap();
    let header = rdr.headers().unwrap().clone();
    let records: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), records.len());
    for (obj, rec) in rows.iter().zip(&records) {
        let mut cols: Vec<&str> = header.iter().collect();
        cols.sort_unstable();
        assert_eq!(obj.keys().map(String::as_str).collect::<Vec<_>>(), cols);
        for (k, v) in header.iter().zip(rec.iter()) {
            assert_eq!(obj[k].as_f64().unwrap(), v.parse::<f64>().unwrap(), "{k}");
        }
    }
}

#[test]
fn format_flag_and_extension() {
    let (dir, cfg) = setup("s.json", STROBE);
    let out = dir.path().join("rows.txt");
    let cli = Cli::try_parse_from(["zeno-sta", "strobe", "--config", &cfg, "--out", out.to_str().unwrap(), "--format", "json"]).unwrap();
    assert_eq!(resolve(&cli).unwrap().output.format, Format::Json);
    let cli = Cli::try_parse_from(["zeno-sta", "strobe", "--config", &cfg, "--out", "x.json"]).unwrap();
    assert_eq!(resolve(&cli).unwrap().output.format, Format::Json);
    assert!(Cli::try_parse_from(["zeno-sta", "strobe", "--format", "xml"]).is_err());
}

#[test]
fn seed_override_applies() {
    let (_dir, cfg) = setup("s.json", SME);
    let cli = Cli::try_parse_from(["zeno-sta", "sme", "--config", &cfg, "--seed", "77"]).unwrap();
    assert_eq!(resolve(&cli).unwrap().seed, 77);
}

#[test]
fn threads_from_env() {
    std::env::set_var("ZENO_STA_THREADS", "3");
    let cli = Cli::try_parse_from(["zeno-sta", "identities"]).unwrap();
    std::env::remove_var("ZENO_STA_THREADS");
    assert_eq!(cli.threads, Some(3));
    let cli = Cli::try_parse_from(["zeno-sta", "identities", "--threads", "2"]).unwrap();
    assert_eq!(cli.threads, Some(2));
}

#[test]
fn sme_output_independent_of_threads() {
    let (dir, cfg) = setup("sme.json", SME);
    let mut outputs = Vec::new();
    for threads in ["1", "1", "4"] {
        let out = dir.path().join(format!("rows-{}.csv", outputs.len()));
        assert_eq!(run(&["sme", "--config", &cfg, "--threads", threads, "--out", out.to_str().unwrap()]), 0);
        outputs.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);

    let other = dir.path().join("other.csv");
    assert_eq!(run(&["sme", "--config", &cfg, "--seed", "4", "--out", other.to_str().unwrap()]), 0);
    assert_ne!(std::fs::read(&other).unwrap(), outputs[0]);
}

#[test]
fn sweep_fits_slope() {
    let (dir, cfg) = setup(
        "cap.json",
        r#"{
  "protocol": "cap",
  "model": { "name": "rotating-qubit", "params": { "omega": 1.0, "T": 1.0 } },
  "grid": { "steps": 2000 },
  "cap": { "kappa": 10.0 }
}"#,
    );
    let out = dir.path().join("sweep.csv");
    let code = run(&["sweep", "--config", &cfg, "--axis", "kappa", "--values", "10,30,100,300", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("kappa,metric,"));
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn invalid_configs_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let no_kappa = write(
        dir.path(),
        "cap.json",
        r#"{"protocol":"cap","model":{"name":"rotating-qubit","params":{"omega":1.0,"T":1.0}},"grid":{"steps":10}}"#,
    );
    assert_eq!(run(&["cap", "--config", no_kappa.to_str().unwrap()]), 2);
    let unknown = write(dir.path(), "u.json", r#"{"protocol":"strobe","bogus":1}"#);
    assert_eq!(run(&["strobe", "--config", unknown.to_str().unwrap()]), 2);
    let (_d, cfg) = setup("s.json", STROBE);
    assert_eq!(run(&["cap", "--config", &cfg]), 2);
    assert_eq!(run(&["sweep", "--config", &cfg, "--axis", "dt", "--values", "0.1,0.05,0.02"]), 2);
    assert_eq!(run(&["teleport"]), 2);
}

#[test]
fn runtime_failures_exit_one() {
    let (_dir, cfg) = setup(
        "coarse.json",
        r#"{
  "protocol": "strobe",
  "model": { "name": "rotating-qubit", "params": { "omega": 1.0, "T": 1.0 } },
  "grid": { "steps": 20 }
}"#,
    );
    assert_eq!(run(&["strobe", "--config", &cfg]), 1);
    assert_eq!(run(&["strobe", "--config", "/no/such/scenario.json"]), 1);
}
