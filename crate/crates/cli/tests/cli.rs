use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn zeroflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zeroflow"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn run(experiment: &str, config: &Path, out: &Path) -> Output {
    zeroflow(&[experiment, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()])
}

fn shipped(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.toml",
        "experiment = \"simulate\"\n[stepper]\ndt = 1e-3\ndt_max = 1e-2\n[simulate]\ninitial = \"0\"\nt1 = 0.1\n",
    );
    let o = run("simulate", &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("dt_max"), "{}", stderr(&o));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn bad_expression_reports_offset() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "expr.toml",
        "[nonlinearity]\nkind = \"burgers\"\nforcing = \"sin(\"\n[simulate]\ninitial = \"0\"\nt1 = 0.1\n",
    );
    let o = run("simulate", &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("offset 4"), "{}", stderr(&o));
}

#[test]
fn forcing_may_not_depend_on_u() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "u.toml",
        "[nonlinearity]\nkind = \"burgers\"\nforcing = \"u*sin(2*pi*x)\"\n[simulate]\ninitial = \"0\"\nt1 = 0.1\n",
    );
    let o = run("simulate", &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("variable `u`"), "{}", stderr(&o));
}

#[test]
fn experiment_mismatch_and_missing_table() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "m.toml", "experiment = \"vfamily\"\n[vfamily]\nys = [0.0]\n");
    assert_eq!(run("simulate", &cfg, &dir.path().join("a")).status.code(), Some(2));
    let cfg = write_config(dir.path(), "n.toml", "seed = 3\n");
    assert_eq!(run("balance", &cfg, &dir.path().join("b")).status.code(), Some(2));
    // clap rejects unknown experiments with its own usage error
    assert_eq!(run("nonsense", &cfg, &dir.path().join("c")).status.code(), Some(2));
}

#[test]
fn heat_balance_ledger() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("balance");
    let o = run("balance", &shipped("heat_balance.toml"), &out);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let line = fs::read_to_string(out.join("ledger.jsonl")).unwrap();
    assert_eq!(line.lines().count(), 1);
    let ledger: Value = serde_json::from_str(line.trim()).unwrap();
    assert_eq!(ledger["residual"], 0);
    assert_eq!(ledger["d"], 2);
    assert_eq!(ledger["z_start"], 4);
    assert_eq!(ledger["z_end"], 2);
    let curves = fs::read_to_string(out.join("curves.csv")).unwrap();
    assert!(curves.starts_with("curve_id,t,x,terminal"));
    let manifest: Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["exit_code"], 0);
    assert_eq!(manifest["config"]["nonlinearity"]["kind"], "heat");
    assert_eq!(manifest["config"]["stepper"]["dt"], 1e-5);
}

#[test]
fn check_runs_selected_criteria() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "check.toml", "experiment = \"check\"\n[check]\ncriteria = [1, 2]\n");
    let out = dir.path().join("check");
    let o = run("check", &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("criterion  1 PASS"), "{stdout}");
    assert!(stdout.contains("criterion  2 PASS"), "{stdout}");
    let report = fs::read_to_string(out.join("suite.jsonl")).unwrap();
    let rows: Vec<Value> = report.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r["passed"] == true));

    let cfg = write_config(dir.path(), "bad.toml", "[check]\ncriteria = [14]\n");
    assert_eq!(run("check", &cfg, &dir.path().join("bad")).status.code(), Some(2));
}

#[test]
fn shipped_reference_config_resolves() {
    let cfg = zeroflow::config::Config::load(&shipped("reference.toml")).unwrap();
    let cfg = cfg
        .resolve(zeroflow::config::Experiment::Check, None, None)
        .unwrap();
    assert_eq!(cfg.check.unwrap().criteria, zeroflow_core::suite::CRITERIA.to_vec());
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = zeroflow::config::Config::load(&path).unwrap();
        let exp = cfg.experiment.expect("shipped configs name their experiment");
        cfg.resolve(exp, None, None).unwrap();
        seen += 1;
    }
    assert!(seen >= 7);
}

#[test]
fn identical_runs_give_identical_artifacts() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "ens.toml",
        r#"
seed = 5
[grid]
cells = 4
points_per_cell = 16
[stepper]
dt = 1e-2
probes = [0.5]
snapshot_stride = 10
[ensemble]
p0 = "0.4*sin(2*pi*x)*sin(pi*x)^2"
p1 = "-0.4*sin(2*pi*x)*sin(pi*x)^2"
count = 8
iterates = 3
target_y = 0.0
[simulate]
initial = "0.1 + 0.3*cos(2*pi*x)"
t1 = 1.0
"#,
    );
    for exp in ["ensemble", "simulate"] {
        let (a, b) = (dir.path().join(format!("{exp}_a")), dir.path().join(format!("{exp}_b")));
        assert_eq!(run(exp, &cfg, &a).status.code(), Some(0));
        assert_eq!(run(exp, &cfg, &b).status.code(), Some(0));
        let manifest: Value = serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
        let artifacts = manifest["artifacts"].as_array().unwrap();
        assert!(!artifacts.is_empty());
        for name in artifacts {
            let name = name.as_str().unwrap();
            assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{exp}/{name}");
        }
    }
}

#[test]
fn seed_override_changes_the_ensemble() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "ens.toml",
        "[grid]\ncells = 4\npoints_per_cell = 16\n[stepper]\ndt = 1e-2\n[ensemble]\np0 = \"0.3*sin(2*pi*x)\"\np1 = \"-0.3*sin(2*pi*x)\"\ncount = 8\niterates = 1\n",
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(run("ensemble", &cfg, &a).status.code(), Some(0));
    let o = zeroflow(&["ensemble", "--config", cfg.to_str().unwrap(), "--out", b.to_str().unwrap(), "--seed", "99"]);
    assert_eq!(o.status.code(), Some(0));
    let read = |d: &Path| fs::read_to_string(d.join("ensemble_initial.jsonl")).unwrap();
    assert_ne!(read(&a), read(&b));
    let manifest: Value = serde_json::from_str(&fs::read_to_string(b.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["seed"], 99);
}

#[test]
fn small_runs_of_the_other_experiments() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "small.toml",
        r#"
[grid]
cells = 1
points_per_cell = 64
[stepper]
dt = 1e-3
[vfamily]
ys = [-0.2, 0.0, 0.2]
converge_from = "0.1 + 0.3*sin(2*pi*x)"
[colehopf]
initial = "sin(2*pi*x)"
t_end = 0.1
"#,
    );
    let out = dir.path().join("vf");
    let o = run("vfamily", &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(out.join("family/family.json").exists());
    assert!(fs::read_to_string(out.join("convergence.csv")).unwrap().starts_with("k,distance"));

    let out = dir.path().join("ch");
    let o = run("colehopf", &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let ch: Value = serde_json::from_str(&fs::read_to_string(out.join("colehopf.json")).unwrap()).unwrap();
    assert!(ch["relative_sup_error"].as_f64().unwrap() < 1e-3);

    let ac = write_config(
        dir.path(),
        "ac.toml",
        "[grid]\ncells = 4\npoints_per_cell = 16\n[stepper]\ndt = 1e-2\n[nonlinearity]\nkind = \"gradient\"\npotential = \"u^4/4 - u^2/2\"\n[allencahn]\nletter_cells = 4\ncount = 4\nhorizon = 5.0\n",
    );
    let out = dir.path().join("ac");
    let o = run("allencahn", &ac, &out);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(out.join("energy.csv").exists());
}

#[test]
fn allencahn_needs_a_gradient_flow() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "ac.toml",
        "[grid]\ncells = 4\npoints_per_cell = 16\n[stepper]\ndt = 1e-2\n[nonlinearity]\nkind = \"heat\"\n[allencahn]\nletter_cells = 4\ncount = 2\nhorizon = 0.1\n",
    );
    let out = dir.path().join("ac");
    let o = run("allencahn", &cfg, &out);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let manifest: Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["exit_code"], 1);
}
