use std::path::Path;
use std::process::{Command, Output};

use wkg_core::diagnostics::output::read_csv;

fn wkg(args: &[&str], out_dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wkg"))
        .args(args)
        .env("WKG_OUTPUT_DIR", out_dir)
        .output()
        .expect("spawn wkg")
}

const SMALL: &str = r#"
[grid]
n = 64
L = 24.0

[time]
dt = 0.1
T = 4.0
record_every = 1.0
checkpoint_every = 2.0

[couplings]
c1 = 1.0
c2 = 1.0

[initial_data]
epsilon = 0.01

[[initial_data.bumps]]
kind = "gaussian"
target = "w"
amplitude = 1.0
width = 2.0

[[initial_data.bumps]]
kind = "gaussian"
target = "v"
amplitude = 1.0
width = 2.0

[diagnostics]
order_cap = 1
decay_window = [5.0, 10.0]

[output]
formats = ["csv", "json"]
"#;

// Products of the fields stay resolved below the dealiasing cutoff.
const RESOLVED: &str = r#"
[grid]
n = 192
L = 48.0

[time]
dt = 0.1
T = 2.0
record_every = 1.0

[couplings]
c1 = 1.0
c2 = 1.0
c1ab = [[0.0, 0.5, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]

[initial_data]
epsilon = 0.01

[[initial_data.bumps]]
kind = "gaussian"
target = "w"
amplitude = 1.0
width = 4.0

[[initial_data.bumps]]
kind = "gaussian"
target = "v"
component = "velocity"
amplitude = 1.0
center = [0.0, 1.0]
width = 4.0
"#;

const FREE: &str = r#"
[grid]
n = 64
L = 24.0

[time]
dt = 0.1
T = 3.0
record_every = 0.5

[[initial_data.bumps]]
kind = "gaussian"
target = "w"
amplitude = 0.1
width = 2.0

[diagnostics]
order_cap = 1

[output]
formats = ["csv"]
"#;

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("cfg.toml");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn schema_lists_keys_and_presets() {
    let tmp = tempfile::tempdir().unwrap();
    let out = wkg(&["print-config-schema"], tmp.path());
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let keys: Vec<&str> = doc["keys"].as_array().unwrap().iter().filter_map(|k| k["key"].as_str()).collect();
    for k in ["grid.n", "grid.L", "time.dt", "diagnostics.order_cap", "output.directory"] {
        assert!(keys.contains(&k), "{k} missing from schema");
    }
    let presets = doc["presets"].as_array().unwrap();
    assert!(presets.iter().any(|p| p == "theorem-decay"));
}

#[test]
fn bad_config_exits_with_code_two_and_names_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &SMALL.replace("dt = 0.1", "dt = -0.1"));
    let out = wkg(&["run", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("time.dt"));

    let cfg = write_config(tmp.path(), &SMALL.replace("[grid]", "[gird]"));
    let out = wkg(&["run", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("did you mean \"grid."));
}

#[test]
fn unknown_preset_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = wkg(&["run", "--preset", "no-such-preset"], tmp.path());
    assert!(!out.status.success());
}

#[test]
fn free_run_conserves_the_wave_energy() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let cfg = write_config(tmp.path(), FREE);
    let out = wkg(&["run", &cfg], &out_dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&out_dir.join("diagnostics.csv")).unwrap();
    assert_eq!(rows.len(), 7);
    let col = header.iter().position(|h| h == "E_w[id]").unwrap();
    let e0 = rows[0][col];
    assert!(e0 > 0.0);
    for r in &rows {
        assert!((r[col] - e0).abs() <= 1e-10 * e0, "{} vs {}", r[col], e0);
    }
    assert!(out_dir.join("config.toml").exists());
}

#[test]
fn resume_reproduces_the_csv_byte_for_byte() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let cfg = write_config(tmp.path(), SMALL);
    let out = wkg(&["run", &cfg], &out_dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = out_dir.join("diagnostics.csv");
    let first = std::fs::read(&csv).unwrap();
    assert!(out_dir.join("summary.json").exists());

    let mut checkpoints: Vec<_> =
        std::fs::read_dir(out_dir.join("checkpoints")).unwrap().map(|e| e.unwrap().path()).collect();
    checkpoints.sort();
    assert!(!checkpoints.is_empty());
    std::fs::remove_file(&csv).unwrap();
    let out = wkg(&["resume", checkpoints[0].to_str().unwrap()], &out_dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read(&csv).unwrap(), first);
}

#[test]
fn identity_and_oracle_suites_pass_on_a_resolved_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let cfg = write_config(tmp.path(), RESOLVED);
    for suite in ["identities", "oracles"] {
        let out = wkg(&["verify", suite, &cfg], &out_dir);
        assert!(
            out.status.success(),
            "{suite}: {}\n{}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        );
        let report: serde_json::Value =
            serde_json::from_slice(&std::fs::read(out_dir.join(format!("verify-{suite}.json"))).unwrap()).unwrap();
        assert_eq!(report["passed"], true);
    }
}
