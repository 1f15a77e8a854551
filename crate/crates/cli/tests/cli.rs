//! End-to-end tests of the `epfes` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL_UNGM: &str = "[ungm]\nsteps = 200\nrealizations = 2\nparticle_counts = [10, 20]\nbase_seed = 5\n";

const SMALL_AEC: &str = "\
[aec]
configs = [\"C3\"]
params = [\"P1\", \"P3\"]
seeds = 1
trace_decimation = 64

[aec.scenario]
duration_s = 1.5

[aec.run.schedule]
freeze_s = 1.0
";

fn epfes(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_epfes"))
        .args(args)
        .env_remove("EPFES_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn read(path: impl AsRef<Path>) -> Vec<u8> {
    fs::read(path.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", path.as_ref().display()))
}

#[test]
fn no_arguments_prints_usage_and_exits_2() {
    let out = epfes(&[]);
    assert_eq!(out.status.code(), Some(2));
    let text = String::from_utf8_lossy(&out.stdout).to_string() + &String::from_utf8_lossy(&out.stderr);
    assert!(text.contains("Usage"), "{text}");
}

#[test]
fn unknown_config_key_exits_2_and_names_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.toml", "[ungm]\nsteps = 10\nparticle_cuonts = [10]\n");
    let out_dir = tmp.path().join("out");
    let out = epfes(&["ungm", "--config", &cfg, "--output-dir", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("particle_cuonts"), "{stderr}");
    assert_eq!(stderr.trim().lines().count(), 1, "{stderr}");
}

#[test]
fn invalid_value_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.toml", "[ungm]\nsteps = 0\n");
    let out_dir = tmp.path().join("out");
    let out = epfes(&["ungm", "--config", &cfg, "--output-dir", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn ungm_runs_are_byte_identical_and_manifest_reproduces_them() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "ungm.toml", SMALL_UNGM);
    let dirs: Vec<_> = ["a", "b"].iter().map(|d| tmp.path().join(d)).collect();
    for d in &dirs {
        let out = epfes(&["ungm", "--config", &cfg, "--output-dir", d.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for file in ["report.csv", "ungm_realizations.csv", "manifest.toml"] {
        assert_eq!(read(dirs[0].join(file)), read(dirs[1].join(file)), "{file}");
    }
    let report = String::from_utf8(read(dirs[0].join("report.csv"))).unwrap();
    assert!(report.starts_with("study,variant,L_or_config,phase,metric,value"));
    assert_eq!(report.lines().count(), 1 + 4);

    let manifest = dirs[0].join("manifest.toml");
    let rerun = tmp.path().join("rerun");
    let out = epfes(&[
        "ungm",
        "--config",
        manifest.to_str().unwrap(),
        "--output-dir",
        rerun.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for file in ["report.csv", "ungm_realizations.csv", "manifest.toml"] {
        assert_eq!(read(dirs[0].join(file)), read(rerun.join(file)), "{file}");
    }
}

#[test]
fn sequential_and_parallel_outputs_match() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "ungm.toml", SMALL_UNGM);
    let par = tmp.path().join("par");
    let seq = tmp.path().join("seq");
    assert!(
        epfes(&["ungm", "--config", &cfg, "--output-dir", par.to_str().unwrap()])
            .status
            .success()
    );
    assert!(epfes(&[
        "ungm",
        "--config",
        &cfg,
        "--sequential",
        "--output-dir",
        seq.to_str().unwrap()
    ])
    .status
    .success());
    assert_eq!(read(par.join("report.csv")), read(seq.join("report.csv")));
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "ungm.toml", SMALL_UNGM);
    let out_dir = tmp.path().join("out");
    let out = epfes(&[
        "ungm",
        "--config",
        &cfg,
        "--seed",
        "99",
        "--output-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let manifest = String::from_utf8(read(out_dir.join("manifest.toml"))).unwrap();
    assert!(manifest.contains("base_seed = 99"), "{manifest}");
}

#[test]
fn aec_writes_report_traces_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "aec.toml", SMALL_AEC);
    let out_dir = tmp.path().join("aec");
    let out = epfes(&["aec", "--config", &cfg, "--output-dir", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let report = String::from_utf8(read(out_dir.join("report.csv"))).unwrap();
    for param in ["P1", "P3"] {
        let row = report
            .lines()
            .find(|l| l.starts_with(&format!("aec,{param},C3,frozen,erle_db,")))
            .unwrap_or_else(|| panic!("no frozen row for {param}:\n{report}"));
        let value: f64 = row.rsplit(',').next().unwrap().parse().unwrap();
        assert!(value.is_finite());
    }
    let erle = String::from_utf8(read(out_dir.join("traces/erle_C3_P3_seed0.csv"))).unwrap();
    assert!(erle.starts_with("time_s,erle_db\n"));
    let coeffs = String::from_utf8(read(out_dir.join("traces/coeffs_C3_P1_seed0.csv"))).unwrap();
    assert!(coeffs.starts_with("time_s,a1,a2,a3\n"));
    assert!(coeffs.lines().count() > 100);
    assert!(out_dir.join("manifest.toml").exists());
}

#[test]
fn selftest_passes() {
    let out = epfes(&["selftest"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}");
    assert!(stdout.lines().count() >= 6);
    assert!(stdout.lines().all(|l| l.starts_with("PASS ")), "{stdout}");
}
