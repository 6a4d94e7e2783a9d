//! `routine-miner`: mine, score and report recurrent routines in a concept log.

mod commands;
mod manifest;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use settings::Settings;

#[derive(Debug, Parser)]
#[command(name = "routine-miner", version, about)]
struct Cli {
    /// Flat `key = value` config file, applied over the file named by
    /// ROUTINE_MINER_CONFIG and under command-line flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Mine patterns from a concept log.
    Mine(RunArgs),
    /// Score every threshold of the sweep range.
    Sweep(RunArgs),
    /// Cluster the nodes of a concept log with DBSCAN.
    Baseline(RunArgs),
    /// Generate a concept log with planted routines from a spec file, or
    /// from `--seed` when no spec is given.
    Synth(RunArgs),
    /// Compare a patterns file against a ground-truth file.
    Eval(RunArgs),
    /// Days-of-occurrence histogram of a patterns file.
    Histogram(RunArgs),
    /// Day-by-slot SVG of a patterns file over its node export.
    Timeline(RunArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub output_dir: PathBuf,
    /// Ground-truth file (eval).
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Node export written by mine or baseline (timeline).
    #[arg(long)]
    pub nodes: Option<PathBuf>,
    #[command(flatten)]
    pub tuning: Tuning,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Tuning {
    #[arg(long)]
    pub slot_minutes: Option<u32>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, conflicts_with = "sweep")]
    pub threshold: Option<f64>,
    /// Threshold grid as lo:hi:step.
    #[arg(long)]
    pub sweep: Option<String>,
    /// Variance cap for pattern growth.
    #[arg(long = "K")]
    pub k: Option<f64>,
    #[arg(long)]
    pub min_pattern_nodes: Option<usize>,
    #[arg(long)]
    pub min_pattern_days: Option<usize>,
    #[arg(long)]
    pub frq: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub min_pts: Option<usize>,
    #[arg(long)]
    pub time_weight: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub svg: bool,
}

impl Tuning {
    fn pairs(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let mut push = |k, v: Option<String>| {
            if let Some(v) = v {
                out.push((k, v));
            }
        };
        push("slot_minutes", self.slot_minutes.map(|v| v.to_string()));
        push("sigma", self.sigma.map(|v| v.to_string()));
        push("threshold", self.threshold.map(|v| v.to_string()));
        if let Some(s) = &self.sweep {
            push("threshold", Some("none".into()));
            push("sweep", Some(s.clone()));
        }
        push("K", self.k.map(|v| v.to_string()));
        push("min_pattern_nodes", self.min_pattern_nodes.map(|v| v.to_string()));
        push("min_pattern_days", self.min_pattern_days.map(|v| v.to_string()));
        push("frq", self.frq.map(|v| v.to_string()));
        push("eps", self.eps.map(|v| v.to_string()));
        push("min_pts", self.min_pts.map(|v| v.to_string()));
        push("time_weight", self.time_weight.map(|v| v.to_string()));
        push("seed", self.seed.map(|v| v.to_string()));
        push("svg", self.svg.then(|| "true".to_string()));
        out
    }
}

#[derive(Debug, Clone, Args)]
struct ReplayArgs {
    /// Manifest of the run to repeat.
    #[arg(long)]
    input: PathBuf,
    /// Defaults to the recorded output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

fn effective_settings(config: Option<&PathBuf>, tuning: &Tuning) -> Result<(Settings, Vec<PathBuf>)> {
    let mut s = Settings::default();
    let mut files = Vec::new();
    if let Some(env) = std::env::var_os(settings::CONFIG_ENV).filter(|v| !v.is_empty()) {
        let path = PathBuf::from(env);
        s.apply_file(&path)?;
        files.push(path);
    }
    if let Some(path) = config {
        s.apply_file(path)?;
        files.push(path.clone());
    }
    for (k, v) in tuning.pairs() {
        s.set(k, &v)?;
    }
    Ok((s, files))
}

fn run(cli: Cli) -> Result<()> {
    let (name, args) = match cli.command {
        Command::Replay(r) => return commands::replay(&r.input, r.output_dir.as_deref()),
        Command::Mine(a) => ("mine", a),
        Command::Sweep(a) => ("sweep", a),
        Command::Baseline(a) => ("baseline", a),
        Command::Synth(a) => ("synth", a),
        Command::Eval(a) => ("eval", a),
        Command::Histogram(a) => ("histogram", a),
        Command::Timeline(a) => ("timeline", a),
    };
    let (settings, config_files) = effective_settings(cli.config.as_ref(), &args.tuning)?;
    let inputs = commands::Inputs::from_args(&args)?;
    commands::execute(name, &inputs, &settings, &args.output_dir, config_files, None)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
