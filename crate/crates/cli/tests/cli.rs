use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn snse(dir: &Path, args: &[&str], config: &str) -> Output {
    let cfg = dir.join("config.toml");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_snse"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .env("RUST_LOG", "warn")
        .env_remove("SNSE_OUT")
        .output()
        .unwrap()
}

fn table(dir: &Path, name: &str) -> (String, Vec<Vec<String>>) {
    let text = fs::read_to_string(dir.join("out").join(name)).unwrap();
    let mut lines = text.lines();
    let manifest = lines.next().unwrap().strip_prefix("# manifest: ").unwrap().to_string();
    let rows = lines
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    (manifest, rows)
}

fn column(rows: &[Vec<String>], name: &str) -> usize {
    rows[0].iter().position(|c| c == name).unwrap()
}

fn note(dir: &Path, name: &str, prefix: &str) -> String {
    let text = fs::read_to_string(dir.join("out").join(name)).unwrap();
    text.lines()
        .find_map(|l| l.strip_prefix(prefix))
        .unwrap_or_else(|| panic!("no `{prefix}` line in {name}"))
        .to_string()
}

const OU: &str = "
[spectral]
cutoff = 4
[noise]
decay = 2.5
seed = 3
[scheme]
convection = false
[sweep]
levels = [4, 8, 16, 32]
reference_steps = 64
replicates = 24
oracle_replicates = 48
";

#[test]
fn zero_noise_passes_every_condition() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[spectral]\ncutoff = 4\n[noise]\ntrace = 0.0\n[constants]\nc_bar = 0.2\nsigma = 0.3\n";
    let out = snse(dir.path(), &["check-conditions"], cfg);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (_, rows) = table(dir.path(), "conditions.csv");
    assert_eq!(rows[0], ["theorem", "threshold", "value", "margin", "pass"]);
    let pass = column(&rows, "pass");
    assert_eq!(rows.len(), 10);
    assert!(rows[1..].iter().all(|r| r[pass] == "true"), "{rows:?}");
}

#[test]
fn simulate_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = "[spectral]\ncutoff = 4\n[noise]\nseed = 11\n[sweep]\nsteps = 16\n[initial]\nkind = \"shear\"\n";
    let ra = snse(a.path(), &["simulate", "--threads", "1"], cfg);
    let rb = snse(b.path(), &["simulate"], cfg);
    assert!(ra.status.success() && rb.status.success());
    let ta = fs::read(a.path().join("out/trajectory.nst")).unwrap();
    let tb = fs::read(b.path().join("out/trajectory.nst")).unwrap();
    assert!(!ta.is_empty());
    assert_eq!(ta, tb);
    let (_, rows) = table(a.path(), "trajectory.csv");
    assert_eq!(rows.len(), 18);

    let c = tempfile::tempdir().unwrap();
    let rc = snse(c.path(), &["simulate", "--seed", "12"], cfg);
    assert!(rc.status.success());
    assert_ne!(ta, fs::read(c.path().join("out/trajectory.nst")).unwrap());
}

#[test]
fn linear_time_sweep_matches_ou_validation() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(snse(a.path(), &["converge-time"], OU).status.success());
    assert!(snse(b.path(), &["ou-validate"], OU).status.success());
    let slope = |dir: &Path| -> f64 {
        let line = note(dir, "rates.csv", "# fit L2sq: slope=");
        line.split(' ').next().unwrap().parse().unwrap()
    };
    let (sa, sb) = (slope(a.path()), slope(b.path()));
    assert!((sa - sb).abs() < 0.05, "{sa} vs {sb}");
    let slopes = note(b.path(), "ou.csv", "# slopes: ");
    assert!(slopes.contains("oracle="), "{slopes}");
}

#[test]
fn manifest_lists_artifacts_and_hash() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[spectral]\ncutoff = 4\n[constants]\nsamples = 20\nrefinements = 10\n";
    let out = snse(dir.path(), &["estimate-constants"], cfg);
    assert!(out.status.success());
    let (hash, rows) = table(dir.path(), "constants.csv");
    assert_eq!(rows[0], ["iteration", "c_bar", "sigma"]);
    assert_eq!(rows.len(), 31);
    let manifest: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["hash"], Value::String(hash.clone()));
    assert_eq!(manifest["command"], "estimate-constants");
    assert_eq!(manifest["artifacts"][0]["file"], "constants.csv");
    assert_eq!(hash.len(), 64);

    // the same run elsewhere carries the same hash; a different seed does not
    let other = tempfile::tempdir().unwrap();
    snse(other.path(), &["estimate-constants"], cfg);
    assert_eq!(table(other.path(), "constants.csv").0, hash);
    snse(other.path(), &["estimate-constants", "--seed", "9"], cfg);
    assert_ne!(table(other.path(), "constants.csv").0, hash);
}

#[test]
fn json_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[spectral]\ncutoff = 4\n[noise]\ntrace = 0.0\n[constants]\nc_bar = 0.2\nsigma = 0.3\n";
    let out = snse(dir.path(), &["check-conditions", "--format", "json"], cfg);
    assert!(out.status.success());
    let v: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/conditions.json")).unwrap()).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 9);
    assert_eq!(v["rows"][0]["theorem"], "time-rate");
    assert_eq!(v["rows"][0]["pass"], true);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = snse(dir.path(), &["moments"], "[physical]\nviscocity = 1.0\n");
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("did you mean `viscosity`"), "{err}");

    let out = snse(dir.path(), &["converge-time"], "[sweep]\nlevels = [4, 8, 12]\n");
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("levels"));

    let out = snse(dir.path(), &["frobnicate"], "");
    assert_eq!(out.status.code(), Some(2));

    let out = snse(dir.path(), &["converge-space"], "[spectral]\ncutoff = 4\n");
    assert_eq!(out.status.code(), Some(2), "time-step sweep variable is rejected for a mesh sweep");
}
