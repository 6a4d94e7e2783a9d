use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use routine_core::baseline::baseline_patterns;
use routine_core::distance::{distance_matrix, DistanceMatrix};
use routine_core::mds::embed;
use routine_core::miner::{mine, MinerConfig, MiningInput, Threshold};
use routine_core::model::{build_nodes, parse_concept_str, NodeGrid};
use routine_core::pattern::PatternSet;
use routine_core::report;
use routine_core::scoring::{score_pattern_set, sweep_csv, sweep_threshold, SweepRow};
use routine_core::synth::{evaluate, generate, to_concept_log, GroundTruth, SynthSpec};

use crate::manifest::{self, RunManifest, Timing, MANIFEST_FILE};
use crate::settings::Settings;
use crate::RunArgs;

#[derive(Debug, Clone, Default)]
pub struct Inputs {
    pub input: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub nodes: Option<PathBuf>,
}

fn absolute(p: &Path) -> Result<PathBuf> {
    std::path::absolute(p).with_context(|| format!("cannot resolve {}", p.display()))
}

impl Inputs {
    pub fn from_args(args: &RunArgs) -> Result<Self> {
        let abs = |p: &Option<PathBuf>| p.as_deref().map(absolute).transpose();
        Ok(Self {
            input: abs(&args.input)?,
            truth: abs(&args.truth)?,
            nodes: abs(&args.nodes)?,
        })
    }

    fn to_map(&self) -> BTreeMap<String, PathBuf> {
        [("input", &self.input), ("truth", &self.truth), ("nodes", &self.nodes)]
            .into_iter()
            .filter_map(|(k, v)| v.clone().map(|p| (k.to_string(), p)))
            .collect()
    }

    fn from_map(map: &BTreeMap<String, PathBuf>) -> Self {
        Self {
            input: map.get("input").cloned(),
            truth: map.get("truth").cloned(),
            nodes: map.get("nodes").cloned(),
        }
    }

    fn require(&self, role: &str) -> Result<&Path> {
        let p = match role {
            "truth" => &self.truth,
            "nodes" => &self.nodes,
            _ => &self.input,
        };
        p.as_deref().ok_or_else(|| anyhow!("--{role} is required"))
    }
}

/// Files produced by a command, kept in memory until the run succeeds.
struct Run {
    files: Vec<(String, String)>,
    timings: Vec<Timing>,
    clock: Instant,
    summary: Vec<String>,
}

impl Run {
    fn new() -> Self {
        Self { files: vec![], timings: vec![], clock: Instant::now(), summary: vec![] }
    }

    fn stage(&mut self, name: &str) {
        let now = Instant::now();
        self.timings.push(Timing {
            stage: name.to_string(),
            ms: (now - self.clock).as_secs_f64() * 1e3,
        });
        self.clock = now;
    }

    fn file(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }
}

fn read(path: &Path, role: &str) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {role} file {}", path.display()))
}

fn load_grid(path: &Path, s: &Settings) -> Result<NodeGrid> {
    let records = parse_concept_str(&read(path, "input")?).with_context(|| format!("in {}", path.display()))?;
    Ok(build_nodes(&records, &s.ingest())?)
}

fn load_patterns(path: &Path) -> Result<PatternSet> {
    PatternSet::from_json(&read(path, "patterns")?).with_context(|| format!("in {}", path.display()))
}

fn push_reports(run: &mut Run, set: &PatternSet, grid: &NodeGrid, s: &Settings) {
    let rows = report::histogram(set);
    run.file("histogram.csv", report::histogram_csv(&rows));
    if s.svg {
        run.file("histogram.svg", report::histogram_svg(&rows));
    }
    run.file("timeline.svg", report::timeline_svg(set, grid));
}

fn prepared(run: &mut Run, path: &Path, s: &Settings) -> Result<(NodeGrid, DistanceMatrix)> {
    let grid = load_grid(path, s)?;
    run.stage("ingest");
    let d = distance_matrix(&grid)?;
    run.stage("distance");
    Ok((grid, d))
}

fn cmd_mine(run: &mut Run, inputs: &Inputs, s: &Settings) -> Result<()> {
    let (grid, d) = prepared(run, inputs.require("input")?, s)?;
    let e = embed(&d, s.dim)?;
    run.stage("embed");
    let input = MiningInput::new(&grid, &d, &e)?;
    let out = mine(&input, &s.miner())?;
    run.stage("mine");
    let mut scores = score_pattern_set(&out.patterns, &grid, &d, s.frq)?;
    scores.sweep = out.sweep.clone().unwrap_or_else(|| {
        vec![SweepRow { threshold: out.threshold, sc: scores.sc, patterns: out.patterns.len() }]
    });
    run.stage("score");
    run.summary.push(format!(
        "{} patterns at T={} (sc {:.6})",
        out.patterns.len(),
        out.threshold,
        scores.sc
    ));
    run.file("patterns.json", out.patterns.to_json());
    run.file("scores.json", scores.to_json());
    run.file("sweep.csv", sweep_csv(&scores.sweep));
    run.file("nodes.jsonl", grid.to_jsonl());
    run.file("embedding.csv", e.to_csv());
    push_reports(run, &out.patterns, &grid, s);
    Ok(())
}

fn cmd_sweep(run: &mut Run, inputs: &Inputs, s: &Settings) -> Result<()> {
    let (grid, d) = prepared(run, inputs.require("input")?, s)?;
    let e = embed(&d, s.dim)?;
    run.stage("embed");
    let input = MiningInput::new(&grid, &d, &e)?;
    let cfg = MinerConfig { threshold: Threshold::Sweep(s.sweep), ..s.miner() };
    cfg.validate()?;
    let result = sweep_threshold(&input, &cfg, s.sweep)?;
    run.stage("sweep");
    run.summary.push(format!("best T={} over {} thresholds", result.best, result.table.len()));
    let json = serde_json::json!({ "best": result.best, "table": result.table });
    run.file("sweep.csv", sweep_csv(&result.table));
    run.file("sweep.json", serde_json::to_string_pretty(&json)?);
    Ok(())
}

fn cmd_baseline(run: &mut Run, inputs: &Inputs, s: &Settings) -> Result<()> {
    let (grid, d) = prepared(run, inputs.require("input")?, s)?;
    let set = baseline_patterns(&grid, &s.baseline())?;
    run.stage("cluster");
    let scores = score_pattern_set(&set, &grid, &d, s.frq)?;
    run.stage("score");
    run.summary.push(format!("{} clusters, {} noise nodes", set.len(), set.unassigned.len()));
    run.file("patterns.json", set.to_json());
    run.file("scores.json", scores.to_json());
    run.file("nodes.jsonl", grid.to_jsonl());
    push_reports(run, &set, &grid, s);
    Ok(())
}

fn cmd_synth(run: &mut Run, inputs: &Inputs, s: &Settings) -> Result<()> {
    let spec = match &inputs.input {
        Some(p) => serde_json::from_str::<SynthSpec>(&read(p, "spec")?)
            .with_context(|| format!("invalid spec {}", p.display()))?,
        None => SynthSpec::randomized(s.seed),
    };
    let (records, truth) = generate(&spec)?;
    run.stage("generate");
    run.summary.push(format!(
        "{} records, {} planted routines",
        records.len(),
        truth.planted_count()
    ));
    run.file("concepts.jsonl", to_concept_log(&records));
    run.file("truth.json", truth.to_json());
    run.file("spec.json", serde_json::to_string_pretty(&spec)?);
    Ok(())
}

fn cmd_eval(run: &mut Run, inputs: &Inputs) -> Result<()> {
    let truth_path = inputs.require("truth")?;
    let found = load_patterns(inputs.require("input")?)?;
    let truth = GroundTruth::from_json(&read(truth_path, "truth")?)
        .with_context(|| format!("in {}", truth_path.display()))?;
    let report = evaluate(&found, &truth);
    run.stage("evaluate");
    run.summary.push(format!("macro-F1 {:.6}", report.macro_f1));
    run.file("eval.json", report.to_json());
    Ok(())
}

fn cmd_histogram(run: &mut Run, inputs: &Inputs, s: &Settings) -> Result<()> {
    let set = load_patterns(inputs.require("input")?)?;
    let rows = report::histogram(&set);
    run.file("histogram.csv", report::histogram_csv(&rows));
    if s.svg {
        run.file("histogram.svg", report::histogram_svg(&rows));
    }
    run.stage("render");
    Ok(())
}

fn cmd_timeline(run: &mut Run, inputs: &Inputs, s: &Settings) -> Result<()> {
    let set = load_patterns(inputs.require("input")?)?;
    let nodes_path = inputs.require("nodes")?;
    let grid = NodeGrid::from_jsonl(&read(nodes_path, "nodes")?, "user", s.slot_minutes)
        .with_context(|| format!("in {}", nodes_path.display()))?;
    set.check_partition(&grid)
        .context("patterns do not match the node export")?;
    run.file("timeline.svg", report::timeline_svg(&set, &grid));
    run.stage("render");
    Ok(())
}

/// Runs `command`, then writes its outputs and the manifest.
pub fn execute(
    command: &str,
    inputs: &Inputs,
    s: &Settings,
    output_dir: &Path,
    config_files: Vec<PathBuf>,
    replay_of: Option<PathBuf>,
) -> Result<()> {
    let started_at = manifest::now();
    let mut run = Run::new();
    match command {
        "mine" => cmd_mine(&mut run, inputs, s)?,
        "sweep" => cmd_sweep(&mut run, inputs, s)?,
        "baseline" => cmd_baseline(&mut run, inputs, s)?,
        "synth" => cmd_synth(&mut run, inputs, s)?,
        "eval" => cmd_eval(&mut run, inputs)?,
        "histogram" => cmd_histogram(&mut run, inputs, s)?,
        "timeline" => cmd_timeline(&mut run, inputs, s)?,
        other => bail!("unknown command {other:?}"),
    }
    std::fs::create_dir_all(output_dir)
        .with_context(|| format!("cannot create output directory {}", output_dir.display()))?;
    let output_dir = absolute(output_dir)?;
    for (name, contents) in &run.files {
        let path = output_dir.join(name);
        std::fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;
    }
    run.stage("write");
    let m = RunManifest {
        command: command.to_string(),
        inputs: inputs.to_map(),
        config: s.to_map(),
        config_files,
        versions: manifest::versions(),
        output_dir: output_dir.clone(),
        outputs: run.files.iter().map(|(n, _)| n.clone()).collect(),
        timings: run.timings,
        started_at,
        finished_at: manifest::now(),
        replay_of,
    };
    let path = output_dir.join(MANIFEST_FILE);
    std::fs::write(&path, m.to_json()).with_context(|| format!("cannot write {}", path.display()))?;
    for line in &run.summary {
        println!("{command}: {line}");
    }
    Ok(())
}

/// Repeats a recorded run with its recorded inputs and effective config.
pub fn replay(manifest_path: &Path, output_dir: Option<&Path>) -> Result<()> {
    let m = RunManifest::load(manifest_path)?;
    let mut s = Settings::default();
    s.apply_map(&m.config)
        .with_context(|| format!("in manifest {}", manifest_path.display()))?;
    let dir = output_dir.map_or_else(|| m.output_dir.clone(), Path::to_path_buf);
    execute(
        &m.command,
        &Inputs::from_map(&m.inputs),
        &s,
        &dir,
        vec![],
        Some(absolute(manifest_path)?),
    )
}
