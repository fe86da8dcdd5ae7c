use std::fs;
use std::path::Path;
use std::process::Command;

const CONFIG: &str = r#"
version = 1
name = "cli-test"

[train]
n_iterations = 3
batch_size = 64
policy_epochs = 1
fit_steps = 2
policy_hidden = [8]
value_hidden = [8]
env = { kind = "block_quadratic", block_dims = [2, 2] }
advnet = { wide_hidden = [8], deep_hidden = [8] }

[sweep]
estimators = ["ASDG", "GADB"]
subspaces = [2]
seeds = [0, 1]

[gridk]
k_values = [1, 2]
final_window = 2

[variance]
warmup_iterations = 1
n_batches = 3
batch_size = 32
"#;

fn posa(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_posa")).args(args).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn dry_run_prints_matrix_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out = dir.path().join("out");
    let o = posa(&["run", &cfg, "--dry-run", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("asdg_k2_s0") && stdout.contains("gadb_k1_s1"), "{stdout}");
    assert!(stdout.contains("4 runs planned"));
    assert!(!out.exists());
}

#[test]
fn run_twice_gives_identical_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        assert!(posa(&["run", &cfg, "--out", d.to_str().unwrap()]).status.success());
    }
    for f in ["metrics.csv", "runs/asdg_k2_s0.csv", "runs/gadb_k1_s1.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let manifest = fs::read_to_string(a.join("manifest.toml")).unwrap();
    assert!(manifest.contains("status = \"ok\""));
}

#[test]
fn seed_offset_shifts_run_ids() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let o = posa(&["run", &cfg, "--dry-run", "--seed-offset", "100"]);
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("asdg_k2_s100") && stdout.contains("asdg_k2_s101"));
}

#[test]
fn bad_config_reports_field_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &CONFIG.replace("fit_steps", "fit_stepz"));
    let o = posa(&["run", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    let stderr = String::from_utf8(o.stderr).unwrap();
    assert!(stderr.contains("fit_stepz") && stderr.contains("line"), "{stderr}");
}

#[test]
fn gridk_and_variance_write_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out = dir.path().join("g");
    let o = posa(&["gridk", &cfg, "--out", out.to_str().unwrap(), "--max-seeds", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(out.join("gridk.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
    let out = dir.path().join("v");
    let o = posa(&["variance", &cfg, "--out", out.to_str().unwrap(), "--max-seeds", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(out.join("variance.csv")).unwrap();
    assert_eq!(table.lines().count(), 4);
}
