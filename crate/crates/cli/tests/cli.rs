use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use routine_core::model::{build_nodes, parse_concept_str, IngestConfig};
use routine_core::pattern::{Pattern, PatternSet};
use routine_core::synth::GroundTruth;
use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_routine-miner"));
    c.env_remove("ROUTINE_MINER_CONFIG");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, seed: u64) -> PathBuf {
    let out = dir.join(format!("synth{seed}"));
    ok(&["synth", "--seed", &seed.to_string(), "--output-dir", s(&out)]);
    out
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    v.sort();
    v
}

#[test]
fn missing_input_names_the_path() {
    let tmp = TempDir::new().unwrap();
    let missing = tmp.path().join("absent.jsonl");
    let out = run(&["mine", "--input", s(&missing), "--output-dir", s(&tmp.path().join("o"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains(s(&missing)));
    assert!(!tmp.path().join("o").exists());
}

#[test]
fn mine_writes_outputs_and_one_manifest() {
    let tmp = TempDir::new().unwrap();
    let data = synth(tmp.path(), 1);
    let out = tmp.path().join("mine");
    ok(&["mine", "--input", s(&data.join("concepts.jsonl")), "--output-dir", s(&out)]);
    let names = files(&out);
    for f in ["patterns.json", "scores.json", "sweep.csv", "manifest.json", "timeline.svg"] {
        assert!(names.contains(&f.to_string()), "{f} missing from {names:?}");
    }
    assert_eq!(names.iter().filter(|n| n.contains("manifest")).count(), 1);
    let m = manifest(&out);
    assert_eq!(m["command"], "mine");
    assert_eq!(m["config"]["threshold"], "none");
    assert!(m["timings"].as_array().unwrap().len() >= 4);
    let listed: Vec<&str> = m["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert!(listed.iter().all(|f| names.contains(&f.to_string())));
    let set = PatternSet::from_json(&fs::read_to_string(out.join("patterns.json")).unwrap()).unwrap();
    let sweep = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 1 + 26);
    assert!(set.patterns.iter().all(|p| p.nodes.len() >= 2));
}

#[test]
fn threshold_flag_overrides_sweep() {
    let tmp = TempDir::new().unwrap();
    let data = synth(tmp.path(), 2);
    let cfg = tmp.path().join("cfg.txt");
    fs::write(&cfg, "sweep = 0:0.02:0.004\nsigma = 5\n").unwrap();
    let out = tmp.path().join("mine");
    ok(&[
        "mine",
        "--config",
        s(&cfg),
        "--input",
        s(&data.join("concepts.jsonl")),
        "--output-dir",
        s(&out),
        "--threshold",
        "0.008",
        "--sigma",
        "2",
    ]);
    let sweep = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 2);
    assert!(sweep.lines().nth(1).unwrap().starts_with("0.008,"));
    let m = manifest(&out);
    assert_eq!(m["config"]["threshold"], "0.008");
    assert_eq!(m["config"]["sigma"], "2");
    assert_eq!(m["config"]["sweep"], "0:0.02:0.004");
}

#[test]
fn env_config_sits_under_explicit_config() {
    let tmp = TempDir::new().unwrap();
    let data = synth(tmp.path(), 2);
    let env_cfg = tmp.path().join("env.txt");
    let cfg = tmp.path().join("cfg.txt");
    fs::write(&env_cfg, "sigma = 4\nmin_pattern_days = 3\nthreshold = 0.01\n").unwrap();
    fs::write(&cfg, "sigma = 6\n").unwrap();
    let out = tmp.path().join("mine");
    let status = bin()
        .env("ROUTINE_MINER_CONFIG", &env_cfg)
        .args(["mine", "--config", s(&cfg), "--input", s(&data.join("concepts.jsonl")), "--output-dir", s(&out)])
        .output()
        .unwrap();
    assert!(status.status.success());
    let m = manifest(&out);
    assert_eq!(m["config"]["sigma"], "6");
    assert_eq!(m["config"]["min_pattern_days"], "3");
    assert_eq!(m["config"]["threshold"], "0.01");
    assert_eq!(m["config_files"].as_array().unwrap().len(), 2);
}

#[test]
fn bad_config_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("cfg.txt");
    fs::write(&cfg, "colour = blue\n").unwrap();
    let out = run(&["synth", "--config", s(&cfg), "--output-dir", s(tmp.path())]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
}

#[test]
fn mine_is_deterministic_and_replayable() {
    let tmp = TempDir::new().unwrap();
    let data = synth(tmp.path(), 4);
    let input = data.join("concepts.jsonl");
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let c = tmp.path().join("c");
    let out_a = ok(&["mine", "--input", s(&input), "--output-dir", s(&a), "--svg"]);
    let out_b = ok(&["mine", "--input", s(&input), "--output-dir", s(&b), "--svg"]);
    ok(&["replay", "--input", s(&a.join("manifest.json")), "--output-dir", s(&c)]);
    assert_eq!(out_a.stdout, out_b.stdout);
    for f in files(&a).iter().filter(|f| *f != "manifest.json") {
        let bytes = fs::read(a.join(f)).unwrap();
        assert_eq!(bytes, fs::read(b.join(f)).unwrap(), "{f} differs between runs");
        assert_eq!(bytes, fs::read(c.join(f)).unwrap(), "{f} differs after replay");
    }
    assert_eq!(manifest(&a)["config"], manifest(&c)["config"]);
    assert!(manifest(&c)["replay_of"].is_string());
}

#[test]
fn synth_is_deterministic_by_seed() {
    let tmp = TempDir::new().unwrap();
    let a = synth(tmp.path(), 9);
    let b = tmp.path().join("again");
    ok(&["synth", "--seed", "9", "--output-dir", s(&b)]);
    for f in ["concepts.jsonl", "truth.json", "spec.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
    }
    let other = synth(tmp.path(), 10);
    assert_ne!(fs::read(a.join("concepts.jsonl")).unwrap(), fs::read(other.join("concepts.jsonl")).unwrap());

    // a spec file reproduces the seeded run
    let c = tmp.path().join("from_spec");
    ok(&["synth", "--input", s(&a.join("spec.json")), "--output-dir", s(&c)]);
    assert_eq!(fs::read(a.join("concepts.jsonl")).unwrap(), fs::read(c.join("concepts.jsonl")).unwrap());
}

#[test]
fn eval_of_the_truth_is_perfect() {
    let tmp = TempDir::new().unwrap();
    let data = synth(tmp.path(), 5);
    let records = parse_concept_str(&fs::read_to_string(data.join("concepts.jsonl")).unwrap()).unwrap();
    let grid = build_nodes(&records, &IngestConfig::default()).unwrap();
    let truth = GroundTruth::from_json(&fs::read_to_string(data.join("truth.json")).unwrap()).unwrap();
    let patterns = (0..truth.planted_count())
        .map(|id| Pattern::from_nodes(id, truth.members(id), &grid).unwrap())
        .collect();
    let set = PatternSet { method: "truth".into(), patterns, unassigned: vec![] };
    let found = tmp.path().join("found.json");
    fs::write(&found, set.to_json()).unwrap();
    let out = tmp.path().join("eval");
    let stdout = ok(&["eval", "--input", s(&found), "--truth", s(&data.join("truth.json")), "--output-dir", s(&out)]).stdout;
    assert_eq!(String::from_utf8(stdout).unwrap(), "eval: macro-F1 1.000000\n");
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("eval.json")).unwrap()).unwrap();
    assert_eq!(report["macro_f1"], 1.0);
}

#[test]
fn eval_requires_truth() {
    let tmp = TempDir::new().unwrap();
    let out = run(&["eval", "--input", "x.json", "--output-dir", s(tmp.path())]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--truth"));
}

#[test]
fn baseline_on_identical_nodes_is_one_pattern() {
    let tmp = TempDir::new().unwrap();
    let mut log = String::new();
    for day in 1..=3 {
        for slot in 16..19 {
            for i in 0..12 {
                let minute = slot * 30 + i * 2;
                log.push_str(&format!(
                    "{{\"user\":\"u\",\"day\":\"2021-03-0{day}\",\"time\":\"{:02}:{:02}\",\"scene\":\"office\",\"activity\":\"typing\",\"objects\":[{{\"label\":\"laptop\",\"conf\":0.9}}]}}\n",
                    minute / 60,
                    minute % 60
                ));
            }
        }
    }
    let input = tmp.path().join("log.jsonl");
    fs::write(&input, log).unwrap();
    let out = tmp.path().join("b");
    ok(&["baseline", "--input", s(&input), "--output-dir", s(&out), "--time-weight", "0"]);
    let set = PatternSet::from_json(&fs::read_to_string(out.join("patterns.json")).unwrap()).unwrap();
    assert_eq!(set.len(), 1);
    assert_eq!(set.patterns[0].nodes.len(), 9);
    assert_eq!(set.method, "dbscan-baseline");
    assert_eq!(manifest(&out)["config"]["time_weight"], "0");
}

#[test]
fn histogram_svg_only_on_request() {
    let tmp = TempDir::new().unwrap();
    let data = synth(tmp.path(), 6);
    let mined = tmp.path().join("m");
    ok(&["mine", "--input", s(&data.join("concepts.jsonl")), "--output-dir", s(&mined), "--threshold", "0.004"]);
    let patterns = mined.join("patterns.json");
    let plain = tmp.path().join("h1");
    let svg = tmp.path().join("h2");
    ok(&["histogram", "--input", s(&patterns), "--output-dir", s(&plain)]);
    ok(&["histogram", "--input", s(&patterns), "--output-dir", s(&svg), "--svg"]);
    assert_eq!(files(&plain), ["histogram.csv", "manifest.json"]);
    assert_eq!(files(&svg), ["histogram.csv", "histogram.svg", "manifest.json"]);
    let csv = fs::read_to_string(plain.join("histogram.csv")).unwrap();
    assert!(csv.starts_with("pattern_id,days,nodes\n"));
}

#[test]
fn timeline_matches_mine_output() {
    let tmp = TempDir::new().unwrap();
    let data = synth(tmp.path(), 7);
    let mined = tmp.path().join("m");
    ok(&["mine", "--input", s(&data.join("concepts.jsonl")), "--output-dir", s(&mined), "--threshold", "0.004"]);
    let t1 = tmp.path().join("t1");
    let t2 = tmp.path().join("t2");
    for t in [&t1, &t2] {
        ok(&[
            "timeline",
            "--input",
            s(&mined.join("patterns.json")),
            "--nodes",
            s(&mined.join("nodes.jsonl")),
            "--output-dir",
            s(t),
        ]);
    }
    let svg = fs::read(t1.join("timeline.svg")).unwrap();
    assert_eq!(svg, fs::read(t2.join("timeline.svg")).unwrap());
    assert_eq!(svg, fs::read(mined.join("timeline.svg")).unwrap());
}
