use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_levycoupling"))
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("cfg.toml");
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn presets_lists_every_scenario() {
    let out = bin().arg("presets").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for s in [
        "marginality",
        "drift_bound",
        "pushforward",
        "j_exponent",
        "coupling_decay",
        "gradient_rate",
        "tv_decay",
        "invariant_probe",
        "full_suite",
    ] {
        assert!(text.contains(s), "missing {s} in:\n{text}");
    }
}

#[test]
fn invalid_alpha_exits_with_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "scenario = \"marginality\"\n[model]\nalpha = 2.5\n");
    let out = bin().arg("run").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("alpha must lie in (0,2)"), "{err}");
}

#[test]
fn unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "scenario = \"marginality\"\n[sim]\nsed = 4\n");
    let out = bin().arg("run").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn scenario_run_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "scenario = \"j_exponent\"\n[model]\ndim = 1\nalpha = 0.5\n[params]\nradii = [0.1, 0.05, 0.025]\nsamples_per_radius = 2\n",
    );
    let out_dir = dir.path().join("artifacts");
    let out = bin().arg("run").arg(&cfg).arg("--seed").arg("9").arg("--out").arg(&out_dir).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let manifest = std::fs::read_to_string(out_dir.join("manifest.toml")).unwrap();
    let parsed: toml::Table = manifest.parse().unwrap();
    assert_eq!(parsed["run"]["passed"].as_bool(), Some(true));
    assert_eq!(parsed["config"]["sim"]["seed"].as_integer(), Some(9));

    let csvs: Vec<_> =
        std::fs::read_dir(&out_dir).unwrap().map(|e| e.unwrap().path()).filter(|p| p.extension().is_some_and(|e| e == "csv")).collect();
    assert!(!csvs.is_empty());
    for p in csvs {
        let body = std::fs::read_to_string(&p).unwrap();
        assert!(body.starts_with("# schema=1\n"), "{}", p.display());
    }
    assert!(out_dir.join("report.txt").exists());
}
