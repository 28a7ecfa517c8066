//! End-to-end runs of the `hazard-lfd` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_hazard-lfd"));
    c.env_remove("HAZARD_LFD_CALIBRATION");
    c
}

fn run(args: &[&str], cwd: &Path) -> Output {
    bin().args(args).current_dir(cwd).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(args: &[&str], cwd: &Path) -> Output {
    let o = run(args, cwd);
    assert_eq!(code(&o), 0, "{args:?}: {}", stderr(&o));
    o
}

fn simulate(dir: &Path, label: &str, n: &str, seed: &str, out: &str) -> PathBuf {
    ok(&["simulate", label, "--n", n, "--seed", seed, "--out", out], dir);
    dir.join(out)
}

#[test]
fn simulate_writes_population() {
    let tmp = TempDir::new().unwrap();
    let pop = simulate(tmp.path(), "moderate-far-bi", "24", "5", "pop");
    let csvs = fs::read_dir(&pop).unwrap().filter(|e| {
        e.as_ref().unwrap().path().extension().is_some_and(|x| x == "csv")
    });
    assert_eq!(csvs.count(), 24);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(pop.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["demos"].as_array().unwrap().len(), 24);
    assert_eq!(manifest["master_seed"], 5);
    assert!(pop.join("resolved_config.toml").exists());

    let onsets: Vec<f64> = manifest["demos"]
        .as_array()
        .unwrap()
        .iter()
        .map(|d| d["onset_d_thresh"].as_f64().unwrap())
        .collect();
    let mean = onsets.iter().sum::<f64>() / onsets.len() as f64;
    assert!((12.0..=17.0).contains(&mean), "{mean}");

    let other = simulate(tmp.path(), "moderate-far-bi", "24", "6", "pop2");
    let a = fs::read_to_string(pop.join("demo_000.csv")).unwrap();
    let b = fs::read_to_string(other.join("demo_000.csv")).unwrap();
    assert_ne!(a, b);
    assert_eq!(a.lines().next(), b.lines().next());
}

#[test]
fn train_generate_plot() {
    let tmp = TempDir::new().unwrap();
    let t = tmp.path();
    simulate(t, "large-near-uni", "20", "1", "pop");
    let o = ok(&["train", "pop", "--out", "m"], t);
    let text = String::from_utf8_lossy(&o.stdout).into_owned();
    assert!(text.contains("demos: 20") && text.contains("rejected: []"), "{text}");
    let model: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(t.join("m/model.json")).unwrap()).unwrap();
    assert!(model["keyframes"].as_array().unwrap().len() >= 3);
    assert_eq!(model["format_version"], 1);

    ok(&["generate", "--model", "m/model.json", "--hazard", "40", "--out", "one"], t);
    let env: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(t.join("one/envelope.json")).unwrap()).unwrap();
    assert_eq!(env["hazards"].as_array().unwrap().len(), 1);
    assert!(fs::read_to_string(t.join("one/envelope.csv")).unwrap().starts_with("y,lat_min"));

    let o = ok(
        &[
            "generate", "--model", "m/model.json", "--model", "m/model.json", "--model",
            "m/model.json", "--hazard", "40", "--hazard", "52", "--hazard", "64", "--out", "three",
        ],
        t,
    );
    assert_eq!(String::from_utf8_lossy(&o.stdout).matches("junction").count(), 2);

    ok(&["plot", "one/envelope.json", "--out", "p"], t);
    ok(&["plot", "three/envelope.json", "--out", "p"], t);
    let one = fs::read_to_string(t.join("p/envelope.svg")).unwrap();
    assert_eq!(one.matches("<rect").count(), 3);
    let o = ok(&["plot", "one/envelope.json", "--stdout"], t);
    let svg = String::from_utf8(o.stdout).unwrap();
    assert_eq!(svg.matches(r#"class="bound""#).count(), 2);
    let again = ok(&["plot", "one/envelope.json", "--stdout"], t);
    assert_eq!(svg.as_bytes(), &again.stdout[..]);
    ok(&["plot", "m/model.json", "--out", "p"], t);
    assert!(t.join("p/model.svg").exists());
}

#[test]
fn stdout_mode_prints_only_data() {
    let tmp = TempDir::new().unwrap();
    let t = tmp.path();
    simulate(t, "large-near-uni", "6", "2", "pop");
    let o = ok(&["train", "pop", "--stdout"], t);
    let model: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(model["n_demos"], 6);
    assert!(stderr(&o).contains("d_thresh"));
}

#[test]
fn analyze_contrasts() {
    let tmp = TempDir::new().unwrap();
    let t = tmp.path();
    simulate(t, "large-near-uni", "24", "11", "near");
    simulate(t, "large-far-uni", "24", "12", "far");
    simulate(t, "large-near-bi", "24", "13", "bi");

    ok(&["analyze", "near", "far", "--out", "r"], t);
    let csv = fs::read_to_string(t.join("r/report.csv")).unwrap();
    let lane: Vec<&str> = csv.lines().filter(|l| l.contains(",sub_lane,")).collect();
    assert_eq!(lane.len(), 2);
    assert!(lane.iter().all(|l| l.ends_with(",true")), "{csv}");

    ok(&["analyze", "near", "near", "--out", "same"], t);
    let csv = fs::read_to_string(t.join("same/report.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",false")), "{csv}");

    assert_eq!(code(&run(&["analyze", "near", "bi", "--out", "x"], t)), 7);
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    let t = tmp.path();
    simulate(t, "large-near-uni", "4", "3", "pop");

    fs::create_dir(t.join("single")).unwrap();
    fs::copy(t.join("pop/demo_000.csv"), t.join("single/demo_000.csv")).unwrap();
    fs::copy(t.join("pop/manifest.json"), t.join("single/manifest.json")).unwrap();
    assert_eq!(code(&run(&["train", "single", "--out", "o"], t)), 2);

    let bad = t.join("bad");
    fs::create_dir(&bad).unwrap();
    fs::copy(t.join("pop/manifest.json"), bad.join("manifest.json")).unwrap();
    fs::copy(t.join("pop/demo_000.csv"), bad.join("demo_000.csv")).unwrap();
    fs::write(bad.join("demo_001.csv"), "t,x,y,heading,vx\n0,0,-40,0,0\n1,0,-39,0,0\n").unwrap();
    let o = run(&["train", "bad", "--out", "o"], t);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("vy"), "{}", stderr(&o));
    fs::write(bad.join("demo_001.csv"), "t,x,y,heading,vx,vy\n0,0,-40,0,0,10\n1,zz,-39,0,0,10\n").unwrap();
    let o = run(&["train", "bad", "--out", "o"], t);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("row 3") && stderr(&o).contains("`x`"), "{}", stderr(&o));

    ok(&["train", "pop", "--out", "m"], t);
    let o = run(
        &["generate", "--model", "m/model.json", "--model", "m/model.json", "--hazard", "40",
          "--hazard", "41", "--out", "o"],
        t,
    );
    assert_eq!(code(&o), 4, "{}", stderr(&o));
    let o = run(&["generate", "--model", "m/model.json", "--hazard", "40", "--traffic", "bi", "--out", "o"], t);
    assert_eq!(code(&o), 5, "{}", stderr(&o));

    let cal = fs::read_to_string(
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/calibration.toml"),
    )
    .unwrap()
    .replace("d_thresh = 36.5", "d_thresh = 1.0")
    .replace("d_thresh = 36.18", "d_thresh = 1.0");
    fs::write(t.join("cal.toml"), cal).unwrap();
    let o = bin()
        .args(["simulate", "moderate-near-uni", "--n", "4", "--out", "o"])
        .env("HAZARD_LFD_CALIBRATION", t.join("cal.toml"))
        .current_dir(t)
        .output()
        .unwrap();
    assert_eq!(code(&o), 6, "{}", stderr(&o));

    fs::write(t.join("junk.json"), "{\"format_version\": 1}").unwrap();
    assert_eq!(code(&run(&["plot", "junk.json", "--out", "o"], t)), 8);
    assert_eq!(code(&run(&["simulate", "huge-near-uni", "--out", "o"], t)), 1);
}

#[test]
fn runs_are_reproducible() {
    let tmp = TempDir::new().unwrap();
    let t = tmp.path();
    let a = simulate(t, "moderate-near-bi", "24", "99", "a");
    let b = simulate(t, "moderate-near-bi", "24", "99", "b");
    for name in ["manifest.json", "demo_000.csv", "demo_023.csv", "resolved_config.toml"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    ok(&["train", "a", "--out", "ma"], t);
    ok(&["train", "a", "--out", "mb"], t);
    assert_eq!(fs::read(t.join("ma/model.json")).unwrap(), fs::read(t.join("mb/model.json")).unwrap());
}

#[test]
fn config_override_is_echoed() {
    let tmp = TempDir::new().unwrap();
    let t = tmp.path();
    fs::write(t.join("c.toml"), "[population]\nlateral_noise_sigma = 0.02\n").unwrap();
    ok(&["simulate", "large-far-uni", "--n", "3", "--config", "c.toml", "--out", "pop"], t);
    let echoed: toml::Table =
        toml::from_str(&fs::read_to_string(t.join("pop/resolved_config.toml")).unwrap()).unwrap();
    assert_eq!(echoed["population"]["lateral_noise_sigma"].as_float(), Some(0.02));
    assert_eq!(echoed["population"]["approach_speed"].as_float(), Some(10.0));
    assert_eq!(echoed["run"]["command"].as_str(), Some("simulate"));
    assert!(echoed["calibration"]["rows"].as_array().unwrap().len() == 8);
}
