use std::path::PathBuf;
use std::process::{Command, Output};

use star_secrecy_cli::CSV_HEADER;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_star-secrecy"));
    c.env("STAR_SECRECY_LOG", "error");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn temp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("star-secrecy-test-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

/// Data rows split into fields.
fn rows(csv: &str) -> Vec<Vec<String>> {
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    lines.map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn run_default_es_is_feasible() {
    let o = run(&["run", "--protocol", "es", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = rows(&stdout(&o));
    assert_eq!(r.len(), 1);
    assert_eq!(r[0][0], "es");
    assert_eq!(r[0][9], "true");
    assert!(r[0][4].parse::<f64>().unwrap() > 0.0);
}

#[test]
fn run_unreachable_energy_exits_2() {
    let o = run(&["run", "--e", "1e6", "--m", "4"]);
    assert_eq!(o.status.code(), Some(2));
    let r = rows(&stdout(&o));
    assert_eq!(r[0][9], "false");
}

#[test]
fn run_missing_config_exits_1() {
    let o = run(&["run", "--config", "/definitely/not/here.toml"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not/here.toml"));
}

#[test]
fn run_reads_config_and_writes_sidecar() {
    let dir = temp_dir("config");
    let cfg = dir.join("s.toml");
    std::fs::write(&cfg, "m = 3\np_s = 10.0\nprotocol = \"ts\"\nseed = 5\n").unwrap();
    let out = dir.join("out");
    let o = run(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(out.join("run.csv")).unwrap();
    assert_eq!(rows(&csv)[0][0], "ts");
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("run.json")).unwrap()).unwrap();
    assert_eq!(meta["scenario"]["num_elements"], 3);
    assert_eq!(meta["scenario"]["seed"], 5);
    assert!(meta["prng"].as_str().unwrap().contains("ChaCha20"));
    assert!(meta["version"].is_string());
    assert!(meta["settings"]["eps1"].is_number());
}

#[test]
fn run_rejects_unknown_protocol() {
    let o = run(&["run", "--protocol", "xyz"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn sweep_row_count() {
    let o = run(&["sweep", "--var", "m", "--values", "2,3", "--protocol", "ts,ris,none", "--trials", "4"]);
    assert_eq!(o.status.code(), Some(0));
    let r = rows(&stdout(&o));
    assert_eq!(r.len(), 2 * 3 * 4);
    assert!(r.iter().all(|f| f.len() == 13));
}

#[test]
fn sweep_rejects_unordered_values() {
    let o = run(&["sweep", "--var", "e", "--values", "0.5,0.1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn sweep_is_byte_identical_across_runs() {
    let dir = temp_dir("determinism");
    let args = |out: &str| {
        vec![
            "sweep".to_string(),
            "--var".into(),
            "e".into(),
            "--values".into(),
            "0,0.1".into(),
            "--protocol".into(),
            "es,ms".into(),
            "--m".into(),
            "3".into(),
            "--trials".into(),
            "3".into(),
            "--seed".into(),
            "11".into(),
            "--no-wall-time".into(),
            "--out".into(),
            dir.join(out).to_str().unwrap().to_string(),
        ]
    };
    for out in ["a", "b"] {
        let o = bin().args(args(out)).output().unwrap();
        assert_eq!(o.status.code(), Some(0));
    }
    for f in ["sweep.csv", "sweep.json"] {
        let a = std::fs::read(dir.join("a").join(f)).unwrap();
        let b = std::fs::read(dir.join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs");
    }
}

#[test]
fn sweep_rate_non_increasing_in_energy() {
    let o = run(&[
        "sweep",
        "--var",
        "e",
        "--values",
        "0.05,0.12",
        "--protocol",
        "es,ms,ts",
        "--m",
        "6",
        "--trials",
        "5",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let r = rows(&stdout(&o));
    for proto in ["es", "ms", "ts"] {
        for trial in 0..5 {
            let rate = |e: &str| {
                let row = r.iter().find(|f| f[0] == proto && f[2] == e && f[3] == trial.to_string()).unwrap();
                row[4].parse::<f64>().unwrap()
            };
            let (lo, hi) = (rate("5.00000000e-2"), rate("1.20000000e-1"));
            assert!(hi <= lo + 1e-9, "{proto} trial {trial}: {lo} -> {hi}");
        }
    }
}

#[test]
fn figure_5_meets_energy_on_feasible_rows() {
    let dir = temp_dir("fig5");
    let o = run(&["figure", "5", "--trials", "1", "--out", dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for (name, e) in [
        ("fig5_e0.05_ps20", 0.05),
        ("fig5_e0.05_ps40", 0.05),
        ("fig5_e0.12_ps20", 0.12),
        ("fig5_e0.12_ps40", 0.12),
    ] {
        let csv = std::fs::read_to_string(dir.join(format!("{name}.csv"))).unwrap();
        let r = rows(&csv);
        assert_eq!(r.len(), 7);
        for f in r.iter().filter(|f| f[9] == "true") {
            for col in [7, 8] {
                assert!(f[col].parse::<f64>().unwrap() >= e - 1e-6, "{name}: {f:?}");
            }
        }
        assert!(dir.join(format!("{name}.json")).exists());
    }
}

#[test]
fn figure_rejects_unknown_id() {
    let o = run(&["figure", "7"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn aggregate_summarizes_groups() {
    let dir = temp_dir("aggregate");
    let out = dir.join("sweep");
    let o = run(&[
        "sweep",
        "--var",
        "p_s",
        "--values",
        "10,20",
        "--protocol",
        "none",
        "--m",
        "2",
        "--e",
        "0",
        "--trials",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let o = run(&["aggregate", out.join("sweep.csv").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("none,p_s,1.00000000e1,3,3,"));

    let bits = run(&["aggregate", "--bits", out.join("sweep.csv").to_str().unwrap()]);
    let nats_mean: f64 = lines[1].split(',').nth(5).unwrap().parse().unwrap();
    let bits_mean: f64 = stdout(&bits).lines().nth(1).unwrap().split(',').nth(5).unwrap().parse().unwrap();
    assert!((bits_mean - nats_mean / std::f64::consts::LN_2).abs() <= 1e-7 * bits_mean.abs().max(1.0));
}
