//! End-to-end checks of the batch CLI: exit codes, output determinism, and
//! the shape of the emitted CSV.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cmlens"))
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

fn radial_config(sweep: &str, seed: u64) -> String {
    format!(
        r#"{{
  "lens": {{"m": 16.0, "r0": 1.0, "alpha": 2.0, "d": 2, "k": 0.0, "delta": 0.01, "R": 64.0,
           "object": {{"kind": "constant", "a": 4.0, "sigma": 1.0}}}},
  "solver": "radial",
  "sweep": {sweep},
  "source": {{"radius": 40.0, "modes": [{{"n": 1, "re": 1.0}}, {{"n": 3, "re": 0.5, "im": 0.25}}]}},
  "observe_radius": 33.0,
  "seed": {seed}
}}"#
    )
}

fn tmpdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("cmlens-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn design_prints_radii() {
    let dir = tmpdir("design");
    let cfg = dir.join("exp.json");
    write(&cfg, &radial_config("[1e-2, 1e-3]", 7));
    let out = bin().args(["design", "--config"]).arg(&cfg).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("r1 = 2.0000"), "stdout: {text}");
    assert!(text.contains("r3 = 32.0000"));
    assert!(text.contains("complementarity residuals"));
}

#[test]
fn malformed_json_exits_2() {
    let dir = tmpdir("badjson");
    let cfg = dir.join("exp.json");
    write(&cfg, "{ not json");
    let out = bin().args(["design", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_config_exits_2() {
    let out = bin()
        .args(["sweep", "--config", "/nonexistent/none.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn empty_sweep_exits_2() {
    let dir = tmpdir("emptysweep");
    let cfg = dir.join("exp.json");
    write(&cfg, &radial_config("[]", 7));
    let out = bin().args(["sweep", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn nondecreasing_sweep_exits_2() {
    let dir = tmpdir("badsweep");
    let cfg = dir.join("exp.json");
    write(&cfg, &radial_config("[1e-3, 1e-2]", 7));
    let out = bin().args(["sweep", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_lens_key_exits_2() {
    let dir = tmpdir("unknownkey");
    let cfg = dir.join("exp.json");
    write(
        &cfg,
        &radial_config("[1e-2]", 7).replace("\"m\": 16.0", "\"m\": 16.0, \"zzz\": 1"),
    );
    let out = bin().args(["design", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_is_deterministic_and_carries_parameters() {
    let dir = tmpdir("determinism");
    let cfg = dir.join("exp.json");
    write(&cfg, &radial_config("[1e-2, 1e-3, 1e-4]", 41));
    let out_a = dir.join("a");
    let out_b = dir.join("b");
    for out in [&out_a, &out_b] {
        let st = bin()
            .args(["sweep", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(out)
            .args(["--threads", "2"])
            .status()
            .unwrap();
        assert!(st.success());
    }
    let a = std::fs::read(out_a.join("sweep.csv")).unwrap();
    let b = std::fs::read(out_b.join("sweep.csv")).unwrap();
    assert_eq!(a, b, "sweep output not byte-identical");
    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("m,r0,alpha,d,k,r_s,observe_radius,seed,delta"));
    for line in lines {
        assert!(line.contains(",ok"), "row missing status: {line}");
        assert!(line.starts_with("1.6000000000000000e1,"), "row missing parameter tuple");
    }
}

#[test]
fn resonance_emits_norm_columns() {
    let dir = tmpdir("resonance");
    let cfg = dir.join("exp.json");
    write(&cfg, &radial_config("[1e-2, 1e-3]", 7));
    let st = bin()
        .args(["resonance", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&dir)
        .status()
        .unwrap();
    assert!(st.success());
    let text = std::fs::read_to_string(dir.join("resonance.csv")).unwrap();
    assert!(text.contains("energy_shell,energy_r2_r3,u_h1_outside,uhat_h1_outside_r3"));
    assert_eq!(text.lines().count(), 3);
}
