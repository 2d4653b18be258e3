//! `hdacs`: run, sweep, check and plot hierarchical compressive-sensing
//! aggregation experiments.
//!
//! Exit codes: 0 on success, 1 for invalid input, 2 for runtime or tolerance
//! failures. Verbosity comes from `HDACS_LOG` (e.g. `HDACS_LOG=debug`).

mod plot;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use hdacs_core::analytics::{self, AnalyticParams};
use hdacs_core::experiment::{self, ExperimentConfig, ExperimentError};
use hdacs_core::report;

#[derive(Parser)]
#[command(
    name = "hdacs",
    version,
    about = "Hierarchical compressive-sensing aggregation simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured protocol on one deployment.
    Run(RunArgs),
    /// Produce the comparison tables over network sizes and cluster factors.
    Sweep(RunArgs),
    /// Check every closed form against its direct summation.
    Oracle(OracleArgs),
    /// Render sweep tables as SVG line plots.
    Plot(PlotArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (TOML), or a manifest.json from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Charge energy per frame instead of per transmission.
    #[arg(long)]
    frame_mode: bool,
    /// HCS heads forward raw data until they hold at least M samples.
    #[arg(long)]
    strict_hcs: bool,
}

#[derive(Args)]
struct OracleArgs {
    /// Cluster factor n.
    #[arg(long, default_value_t = 4)]
    factor: usize,
    /// Hierarchy depth T.
    #[arg(long, default_value_t = 5)]
    levels: u32,
    /// Network size N; defaults to n^T.
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long, default_value_t = 1)]
    sparsity: usize,
    #[arg(long, default_value_t = 1.0)]
    startup: f64,
    #[arg(long, default_value_t = 1.0)]
    cost: f64,
    #[arg(long, default_value_t = 1.0)]
    area: f64,
    /// Also write the report as a key/value table.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    /// Tables written by `hdacs sweep`.
    #[arg(required = true)]
    tables: Vec<PathBuf>,
    #[arg(long, default_value = "plots")]
    out: PathBuf,
}

#[derive(Debug)]
enum Failure {
    Invalid(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        if e.is_validation() {
            Failure::Invalid(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

/// Everything needed to repeat a run.
#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    tool: String,
    version: String,
    command: String,
    seed: u64,
    config: ExperimentConfig,
    outputs: Vec<PathBuf>,
    duration_ms: u128,
}

/// Writes to stdout, ignoring a closed pipe (e.g. `hdacs oracle | head`).
fn emit(text: &str) {
    use std::io::Write;
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig, Failure> {
    let Some(path) = path else {
        return Ok(ExperimentConfig::preset());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Invalid(format!("cannot read {}: {e}", path.display())))?;
    if path.extension().is_some_and(|e| e == "json") {
        let manifest: Manifest = serde_json::from_str(&text)
            .map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?;
        manifest
            .config
            .validate()
            .map_err(|e| Failure::Invalid(e.to_string()))?;
        return Ok(manifest.config);
    }
    ExperimentConfig::from_toml(&text)
        .map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))
}

fn prepare(args: &RunArgs) -> Result<(ExperimentConfig, PathBuf), Failure> {
    let mut cfg = load_config(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
        cfg.sweep.seeds = vec![seed];
    }
    cfg.thresholds.frame_mode |= args.frame_mode;
    cfg.thresholds.strict_hcs |= args.strict_hcs;
    let out = args
        .out
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("hdacs-out"));
    cfg.out_dir = Some(out.clone());
    cfg.validate()
        .map_err(|e| Failure::Invalid(e.to_string()))?;
    Ok((cfg, out))
}

fn finish(
    command: &str,
    cfg: ExperimentConfig,
    out: &Path,
    mut outputs: Vec<PathBuf>,
    started: Instant,
) -> Result<(), Failure> {
    let snapshot = out.join("config.toml");
    report::write_atomic(&snapshot, cfg.to_toml().as_bytes())?;
    outputs.push(snapshot);
    let manifest = Manifest {
        tool: "hdacs".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        seed: cfg.seed,
        config: cfg,
        outputs,
        duration_ms: started.elapsed().as_millis(),
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    report::write_atomic(&out.join("manifest.json"), json.as_bytes())?;
    Ok(())
}

fn cmd_run(args: &RunArgs) -> Result<(), Failure> {
    let started = Instant::now();
    let (cfg, out) = prepare(args)?;
    let outcome = experiment::run_experiment(&cfg)?;
    let outputs = report::write_run(&outcome, &out)?;
    emit(&report::summary_table(&outcome));
    emit(&format!(
        "N={} n={} T={} K={} frames of {}; outputs in {}\n",
        outcome.tree.node_count(),
        outcome.tree.cluster_factor,
        outcome.tree.level_count(),
        outcome.thresholds.sparsity,
        outcome.thresholds.frame_size,
        out.display()
    ));
    finish("run", cfg, &out, outputs, started)
}

fn cmd_sweep(args: &RunArgs) -> Result<(), Failure> {
    let started = Instant::now();
    let (cfg, out) = prepare(args)?;
    let tables = experiment::sweep(&cfg)?;
    let outputs = report::write_sweep(&tables.all(), &out)?;
    for path in &outputs {
        emit(&format!("{}\n", path.display()));
    }
    finish("sweep", cfg, &out, outputs, started)
}

fn cmd_oracle(args: &OracleArgs) -> Result<(), Failure> {
    let nodes = match args.nodes {
        Some(n) => n,
        None => args
            .factor
            .checked_pow(args.levels)
            .ok_or_else(|| Failure::Invalid("n^T overflows; pass --nodes".into()))?,
    };
    let params = AnalyticParams {
        sparsity: args.sparsity,
        startup: args.startup,
        per_unit_distance: args.cost,
        unit_area: args.area,
        ..AnalyticParams::new(nodes, args.factor, args.levels)
    };
    let report = analytics::analyze(&params).map_err(|e| Failure::Invalid(e.to_string()))?;
    let checks = analytics::oracle_checks(&params);
    for c in &checks {
        emit(&format!(
            "{:<8} closed={:<22} direct={:<22} rel={:.3e} tol={:.0e} {}\n",
            c.name,
            c.closed_form,
            c.direct,
            c.relative_error,
            c.tolerance,
            if c.pass { "PASS" } else { "FAIL" }
        ));
    }
    if let Some(path) = &args.out {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        report::write_atomic(path, report.to_key_value().as_bytes())?;
    }
    let failed: Vec<&str> = checks
        .iter()
        .filter(|c| !c.pass)
        .map(|c| c.name.as_str())
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Runtime(format!(
            "tolerance exceeded for {}",
            failed.join(", ")
        )))
    }
}

fn cmd_plot(args: &PlotArgs) -> Result<(), Failure> {
    for table in &args.tables {
        let path =
            plot::plot_file(table, &args.out).map_err(|e| Failure::Invalid(e.to_string()))?;
        emit(&format!("{}\n", path.display()));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("HDACS_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Plot(a) => cmd_plot(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Invalid(msg) | Failure::Runtime(msg)) = &f;
            eprintln!("hdacs: {msg}");
            ExitCode::from(f.code())
        }
    }
}
