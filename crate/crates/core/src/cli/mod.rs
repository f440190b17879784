//! The `gridscan` command-line front end.

mod config;
mod manifest;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde::Serialize;

pub use config::{
    apply_override, from_value, load_dataset, meta_path, resolve, DatasetMeta, DatasetSource,
    RunConfig,
};
pub use manifest::{config_hash, sha256_hex, Artifact, RunManifest, MANIFEST_FILE};

use crate::dataset::{generate_synthetic_year, write_csv, OperatingPointSet, SyntheticYearConfig};
use crate::error::{Error, Result};
use crate::oracles::{full_scan, OracleKind, StabilityOracle, StabilityTrace};
use crate::scanning::{
    compare_full_vs_fast, fast_scan_with, select_weights, validate, worst_case_analysis, Clusterer,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "gridscan", version, about = "Fast stability scanning of yearly operating points")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Override a config field, e.g. `--set scan.pso.n_iter=50`.
    #[arg(long = "set", global = true, value_name = "PATH=VALUE")]
    pub set: Vec<String>,

    /// Output directory (default: the config's `out`, else `.`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Overwrite an existing dataset.
    #[arg(long, global = true)]
    pub force: bool,

    /// Reuse the configuration stored in a previous run manifest.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Write a synthetic year as CSV.
    Generate,
    /// Rank attributes with RReliefF and adjust the weights.
    Select,
    /// Feature selection followed by self-adaptive PSO-k-means.
    Cluster,
    /// Evaluate the oracle at every hour.
    Fullscan,
    /// Evaluate the oracle at cluster centroids only and validate on a sample.
    Fastscan,
    /// Full scan (cached when present) against fast scan, with speed-up.
    Compare,
    /// Compare the least stable hour with the peak-demand hour.
    Worstcase,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Generate => "generate",
            Command::Select => "select",
            Command::Cluster => "cluster",
            Command::Fullscan => "fullscan",
            Command::Fastscan => "fastscan",
            Command::Compare => "compare",
            Command::Worstcase => "worstcase",
        }
    }
}

/// Exit code for a library error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidConfig(_)
        | Error::Parse { .. }
        | Error::NonFinite { .. }
        | Error::InvalidData(_)
        | Error::DimensionMismatch { .. }
        | Error::TooManyClusters { .. }
        | Error::Json(_)
        | Error::Csv(_) => EXIT_INVALID,
        _ => EXIT_FAILURE,
    }
}

struct Run {
    cfg: RunConfig,
    dir: PathBuf,
    manifest: RunManifest,
    force: bool,
}

impl Run {
    fn write_text(&mut self, file: &str, text: &str, volatile: bool) -> Result<()> {
        let path = self.dir.join(file);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        self.manifest.record(&self.dir, file, volatile)
    }

    fn write_json<T: Serialize>(&mut self, file: &str, value: &T, volatile: bool) -> Result<()> {
        self.write_text(file, &serde_json::to_string_pretty(value)?, volatile)
    }

    fn dataset(&self) -> Result<(OperatingPointSet, Option<Vec<usize>>)> {
        load_dataset(&self.cfg.dataset)
    }

    fn oracle(&self, data: &OperatingPointSet, informative: Option<&[usize]>) -> Result<StabilityOracle> {
        self.cfg.scan.oracle.build(data, informative)
    }

    /// A previous full-scan trace in the output directory matching `data`.
    fn cached_trace(&self, data: &OperatingPointSet, kind: OracleKind) -> Option<StabilityTrace> {
        if !self.cfg.reuse_full_trace {
            return None;
        }
        let text = std::fs::read_to_string(self.dir.join("full_trace.json")).ok()?;
        let t: StabilityTrace = serde_json::from_str(&text).ok()?;
        (t.kind == kind && t.hours == data.hours() && !t.is_partial()).then_some(t)
    }

    fn full_trace(&mut self, data: &OperatingPointSet, oracle: &StabilityOracle) -> Result<StabilityTrace> {
        if let Some(t) = self.cached_trace(data, oracle.kind()) {
            return Ok(t);
        }
        let t = full_scan(data, oracle);
        self.write_trace(&t)?;
        Ok(t)
    }

    fn write_trace(&mut self, t: &StabilityTrace) -> Result<()> {
        self.write_text("full_trace.csv", &t.to_csv(), false)?;
        self.write_json("full_trace.json", t, true)
    }
}

/// Returns whether every convergence flag of the run is set.
fn execute(command: Command, run: &mut Run) -> Result<bool> {
    match command {
        Command::Generate => cmd_generate(run),
        Command::Select => {
            let (data, informative) = run.dataset()?;
            let oracle = run.oracle(&data, informative.as_deref())?;
            let selected = select_weights(&data, &oracle, &run.cfg.scan)?;
            let sel = &selected.selection;
            run.write_text("features.csv", &sel.report.to_csv(), false)?;
            run.write_json(
                "features.json",
                &serde_json::json!({
                    "report": sel.report,
                    "history": sel.history,
                    "failed_hours": sel.failed.iter().map(|&p| data.hours()[p]).collect::<Vec<_>>(),
                }),
                false,
            )?;
            Ok(sel.report.converged)
        }
        Command::Cluster => {
            let (data, informative) = run.dataset()?;
            let oracle = run.oracle(&data, informative.as_deref())?;
            let selected = select_weights(&data, &oracle, &run.cfg.scan)?;
            let points = crate::swarm_clustering::Points::from(&data);
            let scan = &run.cfg.scan;
            let out = crate::swarm_clustering::self_adaptive_pso_kmeans(
                points,
                &selected.weights,
                &scan.pso,
                &scan.adapt,
            )?;
            run.write_text("features.csv", &selected.selection.report.to_csv(), false)?;
            run.write_json("clusters.json", &out, false)?;
            run.write_text("assignments.csv", &out.model.assignment_csv(data.hours()), false)?;
            Ok(selected.selection.report.converged && out.model.converged)
        }
        Command::Fullscan => {
            let (data, informative) = run.dataset()?;
            let oracle = run.oracle(&data, informative.as_deref())?;
            let t = full_scan(&data, &oracle);
            run.write_trace(&t)?;
            if t.is_partial() {
                return Err(Error::Oracle(format!(
                    "evaluation failed at {} hours",
                    t.failed_hours.len()
                )));
            }
            Ok(true)
        }
        Command::Fastscan => {
            let (data, informative) = run.dataset()?;
            run.cfg.scan.validate_for(&data)?;
            let oracle = run.oracle(&data, informative.as_deref())?;
            let scan = run.cfg.scan.clone();
            let selected = select_weights(&data, &oracle, &scan)?;
            let (mut report, _) =
                fast_scan_with(&data, &oracle, &scan, &selected, Clusterer::SelfAdaptivePso)?;
            let v = validate(
                &report,
                &data,
                &oracle,
                &selected.selection.lambda,
                scan.sample_size,
                scan.seed ^ 0x5eed,
            )?;
            run.write_text("error_histogram.csv", &v.histogram_csv(), false)?;
            report.validation = Some(v);
            run.write_json("scan_report.json", &report, true)?;
            run.write_text("scan_trace.csv", &report.trace_csv(), false)?;
            Ok(report.converged())
        }
        Command::Compare => {
            let (data, informative) = run.dataset()?;
            let oracle = run.oracle(&data, informative.as_deref())?;
            let cached = run.cached_trace(&data, oracle.kind());
            let reused = cached.is_some();
            let scan = run.cfg.scan.clone();
            let (report, trace) = compare_full_vs_fast(&data, &oracle, &scan, cached)?;
            if !reused {
                run.write_trace(&trace)?;
            }
            if let Some(v) = &report.validation {
                run.write_text("compare_histogram.csv", &v.histogram_csv(), false)?;
            }
            run.write_json("compare_report.json", &report, true)?;
            run.write_text("compare_trace.csv", &report.trace_csv(), false)?;
            Ok(report.converged())
        }
        Command::Worstcase => {
            let (data, informative) = run.dataset()?;
            let oracle = run.oracle(&data, informative.as_deref())?;
            let trace = run.full_trace(&data, &oracle)?;
            let demand = data.total_demand()?;
            let by_hour: std::collections::HashMap<usize, f64> =
                data.hours().iter().copied().zip(demand).collect();
            let aligned: Vec<f64> = trace.hours.iter().map(|h| by_hour[h]).collect();
            let wc = worst_case_analysis(&trace, &aligned)?;
            run.write_json("worst_case.json", &wc, false)?;
            Ok(true)
        }
    }
}

fn cmd_generate(run: &mut Run) -> Result<bool> {
    let synth: SyntheticYearConfig = match &run.cfg.dataset {
        DatasetSource::Synthetic(s) => s.clone(),
        DatasetSource::Csv(_) => {
            return Err(Error::InvalidConfig(
                "generate needs a synthetic dataset source".into(),
            ))
        }
    };
    let csv = run.dir.join("dataset.csv");
    if csv.exists() && !run.force {
        return Err(Error::InvalidConfig(format!(
            "{} exists; pass --force to overwrite",
            csv.display()
        )));
    }
    let year = generate_synthetic_year(&synth)?;
    write_csv(&year.set, &csv)?;
    run.manifest.record(&run.dir, "dataset.csv", false)?;
    run.manifest.record(&run.dir, "dataset.normalization.json", false)?;
    let meta = DatasetMeta {
        informative_names: year
            .informative
            .iter()
            .map(|&j| year.set.attributes()[j].name.clone())
            .collect(),
        informative: year.informative,
        synthetic: synth,
    };
    run.write_json("dataset.meta.json", &meta, false)?;
    Ok(true)
}

fn configure_threads() {
    if let Some(n) = std::env::var("GRIDSCAN_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn run_cli(cli: &Cli) -> Result<bool> {
    let base = match &cli.manifest {
        Some(p) => Some(RunManifest::read(p)?.config),
        None => None,
    };
    let (cfg, canonical) = resolve(base, cli.config.as_deref(), &cli.set)?;
    let dir = cli
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut run = Run {
        manifest: RunManifest::new(cli.command.name(), canonical, cfg.scan.seed),
        cfg,
        dir,
        force: cli.force,
    };
    let converged = execute(cli.command, &mut run)?;
    run.manifest.write(&run.dir)?;
    Ok(converged)
}

/// Parse `args` and run; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    configure_threads();
    match run_cli(&cli) {
        Ok(true) => EXIT_OK,
        Ok(false) => {
            eprintln!("warning: a convergence flag is unset; results use the last valid state");
            EXIT_NOT_CONVERGED
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
