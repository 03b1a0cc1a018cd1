use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use navcore::scene::{scene_from_json, NavigationCommand, Trajectory};
use serde_json::Value;
use tempfile::TempDir;

fn navcore(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_navcore")).args(args).env_remove("NAVCORE_SEED").output().expect("spawn navcore")
}

fn ok(args: &[&str]) -> Output {
    let out = navcore(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn generate(dir: &TempDir, name: &str, count: usize, seed: u64) -> PathBuf {
    let out = dir.path().join(name);
    ok(&["generate", "--count", &count.to_string(), "--seed", &seed.to_string(), "--out-dir", s(&out)]);
    out
}

/// Scene files plus the split, excluding the run manifest with its timestamps.
fn scene_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "run_manifest.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect()
}

#[test]
fn help_exits_cleanly() {
    assert_eq!(code(&navcore(&["--help"])), 0);
    assert_eq!(code(&navcore(&["evaluate", "--help"])), 0);
    assert_eq!(code(&navcore(&["no-such-command"])), 1);
}

#[test]
fn generation_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let a = generate(&dir, "a", 6, 3);
    let b = generate(&dir, "b", 6, 3);
    let c = generate(&dir, "c", 6, 4);
    assert_eq!(scene_bytes(&a), scene_bytes(&b));
    assert_ne!(scene_bytes(&a), scene_bytes(&c));
    assert_eq!(read_json(&a.join("split.json"))["scenes"].as_array().unwrap().len(), 6);
    assert_eq!(read_json(&a.join("run_manifest.json"))["command"], "generate");
}

#[test]
fn seed_environment_overrides_flag() {
    let dir = TempDir::new().unwrap();
    let flagged = generate(&dir, "flag", 4, 9);
    let env_dir = dir.path().join("env");
    let out = Command::new(env!("CARGO_BIN_EXE_navcore"))
        .args(["generate", "--count", "4", "--seed", "1", "--out-dir", s(&env_dir)])
        .env("NAVCORE_SEED", "9")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(scene_bytes(&flagged), scene_bytes(&env_dir));
}

#[test]
fn generation_rejects_bad_counts_and_honours_archetypes() {
    let dir = TempDir::new().unwrap();
    let out = navcore(&["generate", "--count", "0", "--out-dir", s(&dir.path().join("none"))]);
    assert_eq!(code(&out), 1);
    assert_eq!(code(&navcore(&["generate", "--count", "3", "--archetypes", "roundabout=1", "--out-dir", s(dir.path())])), 1);

    let left = dir.path().join("left");
    ok(&["generate", "--count", "5", "--archetypes", "left_turn=1", "--out-dir", s(&left)]);
    for (name, bytes) in scene_bytes(&left) {
        if name == "split.json" {
            continue;
        }
        let scene = scene_from_json(std::str::from_utf8(&bytes).unwrap()).unwrap();
        assert_eq!(scene.ego_init.navigation_command, NavigationCommand::Left, "{name}");
    }
}

#[test]
fn evaluate_writes_report_csv_and_manifest() {
    let dir = TempDir::new().unwrap();
    let scenes = generate(&dir, "scenes", 5, 1);
    let report = dir.path().join("cv.json");
    ok(&["evaluate", "--scenes", s(&scenes), "--planner", "constant_velocity", "--out", s(&report), "--jobs", "2"]);
    let json = read_json(&report);
    assert_eq!(json["scene_count"], 5);
    assert_eq!(json["rows"].as_array().unwrap().len(), 5);
    let pdms = json["mean"]["pdms"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&pdms));
    let csv = fs::read_to_string(dir.path().join("cv.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);
    assert!(csv.starts_with("scene_id,nc,dac,ep,ttc,comfort,pdms,ols,cls"));
    let manifest = read_json(&dir.path().join("cv.manifest.json"));
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 6, "split plus five scene files");

    let again = dir.path().join("again.json");
    ok(&["evaluate", "--scenes", s(&scenes), "--planner", "constant_velocity", "--out", s(&again), "--jobs", "1"]);
    assert_eq!(read_json(&again)["rows"], json["rows"]);
}

fn human_trajectories(scenes: &Path) -> BTreeMap<String, Trajectory> {
    scene_bytes(scenes)
        .into_iter()
        .filter(|(name, _)| name != "split.json")
        .map(|(_, bytes)| {
            let scene = scene_from_json(std::str::from_utf8(&bytes).unwrap()).unwrap();
            (scene.scene_id.clone(), scene.human_trajectory)
        })
        .collect()
}

#[test]
fn human_trajectory_file_scores_perfect_ols() {
    let dir = TempDir::new().unwrap();
    let scenes = generate(&dir, "scenes", 4, 2);
    let mut trajectories = human_trajectories(&scenes);
    let file = dir.path().join("human.json");
    fs::write(&file, serde_json::to_string(&trajectories).unwrap()).unwrap();
    let report = dir.path().join("human_report.json");
    ok(&["evaluate", "--scenes", s(&scenes), "--planner", s(&file), "--out", s(&report)]);
    for row in read_json(&report)["rows"].as_array().unwrap() {
        assert_eq!(row["ols"].as_f64(), Some(1.0), "{row}");
    }

    let missing = trajectories.keys().next().unwrap().clone();
    trajectories.remove(&missing);
    fs::write(&file, serde_json::to_string(&trajectories).unwrap()).unwrap();
    let out = navcore(&["evaluate", "--scenes", s(&scenes), "--planner", s(&file), "--out", s(&report)]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains(&missing));
}

#[test]
fn unknown_planner_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let scenes = generate(&dir, "scenes", 1, 2);
    let out = navcore(&["evaluate", "--scenes", s(&scenes), "--planner", "teleport", "--out", s(&dir.path().join("r.json"))]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("teleport"));
}

#[test]
fn filtering_is_idempotent_through_the_kept_manifest() {
    let dir = TempDir::new().unwrap();
    let scenes = generate(&dir, "scenes", 14, 5);
    let first = dir.path().join("first");
    ok(&["filter", "--scenes", s(&scenes), "--out", s(&first)]);
    let report = read_json(&first.join("filter_report.json"));
    let kept = report["summary"]["kept"].as_u64().unwrap();
    assert!(kept > 0);
    let kept_list = read_json(&first.join("kept.json"));
    assert_eq!(kept_list["scenes"].as_array().unwrap().len() as u64, kept);

    let second = dir.path().join("second");
    ok(&["filter", "--scenes", s(&first.join("kept.json")), "--out", s(&second)]);
    assert_eq!(read_json(&second.join("kept.json")), kept_list);

    let lenient = dir.path().join("lenient");
    ok(&["filter", "--scenes", s(&scenes), "--cv-threshold", "1.01", "--out", s(&lenient)]);
    assert_eq!(read_json(&lenient.join("filter_report.json"))["summary"]["trivial"], 0);
}

#[test]
fn correlate_runs_on_a_small_population() {
    let dir = TempDir::new().unwrap();
    let scenes = generate(&dir, "scenes", 3, 6);
    let population = dir.path().join("population.json");
    let spec = serde_json::json!({"planners": [
        {"name": "cv", "planner": "constant_velocity"},
        {"name": "idm", "planner": "idm"},
        {"name": "pdm", "planner": "pdm_lite"},
        {"name": "sloppy", "planner": "perturbed_human", "params": {"lateral_sigma": 1.5}},
    ]});
    fs::write(&population, spec.to_string()).unwrap();
    let out = dir.path().join("study");
    ok(&["correlate", "--scenes", s(&scenes), "--population", s(&population), "--duration", "4", "--out", s(&out)]);
    let study = read_json(&out.join("study.json"));
    assert_eq!(study["records"].as_array().unwrap().len(), 4);
    assert!(study["overall"]["pdms_cls"]["spearman"].is_number());
    assert!(fs::read_to_string(out.join("scatter.svg")).unwrap().starts_with("<svg"));

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"planners": [{"name": "x", "planner": "warp_drive"}]}"#).unwrap();
    let failed = navcore(&["correlate", "--scenes", s(&scenes), "--population", s(&bad), "--out", s(&out)]);
    assert_eq!(code(&failed), 2);
    assert!(String::from_utf8_lossy(&failed.stderr).contains("warp_drive"));
}

#[test]
fn rollout_and_render_are_reproducible() {
    let dir = TempDir::new().unwrap();
    let scenes = generate(&dir, "scenes", 1, 8);
    let split = read_json(&scenes.join("split.json"));
    let scene = scenes.join(split["scenes"][0].as_str().unwrap());
    let log = dir.path().join("log.json");
    ok(&["rollout", "--scene", s(&scene), "--planner", "idm", "--duration", "5", "--out", s(&log)]);
    assert_eq!(read_json(&log)["ego_states"].as_array().unwrap().len(), 51);

    let (a, b) = (dir.path().join("a.svg"), dir.path().join("b.svg"));
    ok(&["render", "--scene", s(&scene), "--log", s(&log), "--out", s(&a)]);
    ok(&["render", "--scene", s(&scene), "--log", s(&log), "--out", s(&b)]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let map_only = dir.path().join("map.svg");
    ok(&["render", "--scene", s(&scene), "--out", s(&map_only)]);
    assert!(fs::read_to_string(&map_only).unwrap().contains("</svg>"));

    let out = navcore(&["render", "--scene", s(&scene), "--log", s(&log), "--ticks", "0,51", "--out", s(&a)]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("51"));

    let open = dir.path().join("open.json");
    ok(&["rollout", "--scene", s(&scene), "--planner", "constant_velocity", "--mode", "open", "--out", s(&open)]);
    assert_eq!(read_json(&open)["ego_states"].as_array().unwrap().len(), 41);
}

#[test]
fn bench_checks_corpus_size_and_reports_identity() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("bench.json");
    assert_eq!(code(&navcore(&["bench", "--count", "20", "--out", s(&out)])), 2);
    assert_eq!(code(&navcore(&["bench", "--jobs", "0", "--out", s(&out)])), 1);
    ok(&["bench", "--jobs", "2", "--out", s(&out)]);
    let result = read_json(&out);
    assert_eq!(result["scenes"], 500);
    assert_eq!(result["bit_identical"], true);
}
