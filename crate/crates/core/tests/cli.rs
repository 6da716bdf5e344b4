use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_htbandit");

const STOCHASTIC: &str = r#"{
  "policy": {"name": "uniinf"},
  "environment": {
    "kind": {"stochastic": {"arms": [
      {"mean": 0.0, "spread": 10.0, "tail_prob": 0.01},
      {"mean": 0.5, "spread": 10.0, "tail_prob": 0.01}
    ]}},
    "alpha": 1.5,
    "sigma": 1.0
  },
  "horizons": [1024],
  "reps": 2,
  "base_seed": 3
}"#;

fn htbandit(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env("HTBANDIT_THREADS", "1")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned() + &String::from_utf8_lossy(&o.stderr)
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn check_env_paths() {
    let dir = tempfile::tempdir().unwrap();
    let ok = write(dir.path(), "ok.json", STOCHASTIC);
    let o = htbandit(&["check-env", "--config", &ok]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("margin"));

    let tied = write(dir.path(), "tied.json", &STOCHASTIC.replace("\"mean\": 0.5", "\"mean\": 0.0"));
    let o = htbandit(&["check-env", "--config", &tied]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("unique best arm"));

    let o = htbandit(&["check-env", "--config", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let bad = write(dir.path(), "bad.json", "{\"horizons\": [");
    assert_eq!(htbandit(&["check-env", "--config", &bad]).status.code(), Some(2));
}

#[test]
fn run_writes_regret_rows_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", STOCHASTIC);
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let o = htbandit(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--diagnostics"]);
        assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    }
    let regret = fs::read_to_string(out_a.join("regret.csv")).unwrap();
    let lines: Vec<&str> = regret.lines().collect();
    assert!(lines[0].starts_with("# config_digest="));
    assert_eq!(lines[1], "T,rep,seed,pseudo_regret,final_S,skip_count");
    assert_eq!(lines.len(), 4);
    for name in ["regret.csv", "rounds_1024_0.csv", "rounds_1024_1.csv", "config.json"] {
        assert_eq!(fs::read(out_a.join(name)).unwrap(), fs::read(out_b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn run_rejects_bad_environment_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let heavy = STOCHASTIC.replace("\"tail_prob\": 0.01", "\"tail_prob\": 0.5");
    let cfg = write(dir.path(), "c.json", &heavy);
    let out = dir.path().join("o");
    let o = htbandit(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.join("regret.csv").exists());
}

#[test]
fn audit_genuine_forged_and_truncated_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", STOCHASTIC);
    let out = dir.path().join("o");
    let o = htbandit(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--diagnostics", "--reps", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let rounds = out.join("rounds_1024_0.csv");
    let eff = out.join("config.json");
    let o = htbandit(&[
        "audit",
        rounds.to_str().unwrap(),
        "-k",
        "2",
        "-T",
        "1024",
        "--config",
        eff.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(!stdout(&o).contains("mismatch"));

    // A different config only warns.
    let o = htbandit(&["audit", rounds.to_str().unwrap(), "-k", "2", "-T", "1024", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("digest mismatch"));

    let text = fs::read_to_string(&rounds).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let (idx, t) = (2..lines.len())
        .map(|i| (i, lines[i].split(',').nth(8).unwrap().parse::<f64>().unwrap()))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| (i, lines[i].split(',').next().unwrap().to_string()))
        .unwrap();
    let mut fields: Vec<String> = lines[idx].split(',').map(String::from).collect();
    fields[8] = format!("{:.16e}", 2.0 * fields[8].parse::<f64>().unwrap());
    lines[idx] = fields.join(",");
    let forged = write(dir.path(), "forged.csv", &(lines.join("\n") + "\n"));
    let o = htbandit(&["audit", &forged, "-k", "2", "-T", "1024"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains(&format!("t = {t}")), "{}", stdout(&o));

    let truncated = write(dir.path(), "trunc.csv", &(text.lines().take(500).collect::<Vec<_>>().join("\n") + "\n"));
    assert_eq!(htbandit(&["audit", &truncated, "-k", "2", "-T", "1024"]).status.code(), Some(2));

    let short_row = write(dir.path(), "short.csv", &text.replacen(",0.0000000000000000e0\n", "\n", 1));
    assert_eq!(htbandit(&["audit", &short_row, "-k", "2", "-T", "1024"]).status.code(), Some(2));
}

#[test]
fn sweep_synthetic_power_law() {
    let dir = tempfile::tempdir().unwrap();
    let text = STOCHASTIC
        .replace("\"horizons\": [1024]", "\"horizons\": [1024, 4096, 16384, 65536]")
        .replace("\"base_seed\": 3", "\"base_seed\": 3, \"synthetic\": {\"coefficient\": 2.5, \"exponent\": 0.6}");
    let cfg = write(dir.path(), "c.json", &text);
    let out = dir.path().join("o");
    let o = htbandit(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let fit: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("fit.json")).unwrap()).unwrap();
    assert!((fit["log_log_slope"].as_f64().unwrap() - 0.6).abs() < 1e-9);
    assert_eq!(fit["config_digest"].as_str().unwrap().len(), 64);
    let scaling = fs::read_to_string(out.join("scaling.csv")).unwrap();
    assert_eq!(scaling.lines().nth(1), Some("T,mean_regret,stderr"));
    assert_eq!(scaling.lines().count(), 6);
}

#[test]
fn sweep_stochastic_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let text = STOCHASTIC.replace("\"horizons\": [1024]", "\"horizons\": [1024, 2048, 4096, 8192, 16384]");
    let cfg = write(dir.path(), "c.json", &text);
    let out = dir.path().join("o");
    let o = htbandit(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap(), "--reps", "4"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let fit: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("fit.json")).unwrap()).unwrap();
    assert!(fit["log_log_slope"].as_f64().unwrap().is_finite());
}

#[test]
fn sweep_needs_three_horizons() {
    let dir = tempfile::tempdir().unwrap();
    let text = STOCHASTIC.replace("\"horizons\": [1024]", "\"horizons\": [1024, 2048]");
    let cfg = write(dir.path(), "c.json", &text);
    let out = dir.path().join("o");
    let o = htbandit(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("need ≥ 3 horizons"));
    assert!(!out.join("scaling.csv").exists());
}
