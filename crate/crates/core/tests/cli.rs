use std::path::Path;
use std::process::{Command, Output};

fn gridhold(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridhold"))
        .args(args)
        .env("GRIDHOLD_WORKERS", "2")
        .output()
        .unwrap()
}

fn scenario(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("examples/scenarios")
        .join(name)
        .display()
        .to_string()
}

#[test]
fn validate_prints_normalised_scenario() {
    let out = gridhold(&["validate", "--scenario", &scenario("hold-ring7.toml")]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("label = \"hold-ring7\""));
    assert!(text.contains("[network]"));
}

#[test]
fn validate_rejects_bad_files() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[controller]\nkind = \"nmp\"\n").unwrap();
    let out = gridhold(&["validate", "--scenario", bad.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("perimeter"));

    std::fs::write(&bad, "horizon = 10\n").unwrap();
    assert!(!gridhold(&["validate", "--scenario", bad.to_str().unwrap()]).status.success());
}

#[test]
fn simulate_writes_run_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = gridhold(&[
        "simulate",
        "--scenario",
        &scenario("reference.toml"),
        "--seed",
        "4",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8(out.stdout).unwrap().contains("reference seed 4"));
    let run = dir.path().join("reference");
    for file in ["summary.csv", "seed_4/vehicles.csv", "seed_4/mfd.csv", "seed_4/events.csv", "seed_4/occupancy.csv"] {
        assert!(run.join(file).is_file(), "missing {file}");
    }
    let mfd = std::fs::read_to_string(run.join("seed_4/mfd.csv")).unwrap();
    assert!(mfd.starts_with("bin,rho,rho_p,nef,held,cum_exits"));
}

#[test]
fn sweep_rejects_unknown_presets() {
    let out = gridhold(&["sweep", "--preset", "no-such-preset"]);
    assert!(!out.status.success());
}
