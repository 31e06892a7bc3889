//! `pairseek`: synthetic observations, pair formation and discovery from the
//! command line. Every subcommand reads one JSON run config; flags override
//! the seed, the instrumental delay, the output directory and the thread count.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pairseek::pipeline::{self, discover_stage, pair_stage, synth_stage_with_threads};
use pairseek::synth::correlator::{fit_fringe_period, generate_correlator_trace, TraceConfig};
use pairseek::selftest::run_selftest;
use pairseek::{Error, Result, RunConfig};
use serde_json::json;

#[derive(Parser)]
#[command(name = "pairseek", version, about = "Pulse-pair discovery on two-element interferometer data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate first-level event files and a coverage table.
    Synth(SynthArgs),
    /// Form, filter and excise pulse pairs from first-level files.
    Pair(StageArgs),
    /// Prefix scan and report over candidate pairs.
    Discover(DiscoverArgs),
    /// Discovery with an overridden instrumental delay.
    Ablate(AblateArgs),
    /// Correlator trace for one day and its fringe-period fit.
    Fringe(FringeArgs),
    /// Compare the fast paths with their brute-force counterparts.
    Selftest(SelftestArgs),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Replaces the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::from_path(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.scenario.seed = seed;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, env = "PAIRSEEK_THREADS", default_value_t = 1)]
    threads: usize,
}

#[derive(Args)]
struct StageArgs {
    #[command(flatten)]
    common: Common,
    /// Directory written by the previous stage.
    #[arg(long)]
    input: PathBuf,
}

#[derive(Args)]
struct DiscoverArgs {
    #[command(flatten)]
    stage: StageArgs,
    /// Instrumental delay in seconds, replacing the configured one.
    #[arg(long, allow_hyphen_values = true)]
    tau_int: Option<f64>,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    stage: StageArgs,
    #[arg(long, allow_hyphen_values = true)]
    tau_int: f64,
}

#[derive(Args)]
struct FringeArgs {
    #[command(flatten)]
    common: Common,
    /// Start of the day; defaults to the scenario start.
    #[arg(long)]
    mjd: Option<f64>,
    #[arg(long, default_value_t = 10.0)]
    sample_interval: f64,
}

#[derive(Args)]
struct SelftestArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Frames for the dense-band comparison.
    #[arg(long, default_value_t = 100_000)]
    frames: u64,
}

fn print(value: serde_json::Value) {
    println!("{value}");
}

fn synth(args: &SynthArgs) -> Result<()> {
    let cfg = args.common.load()?;
    let s = synth_stage_with_threads(&cfg, &args.common.out, args.threads)?;
    print(json!({
        "frames_observed": s.frames_observed,
        "events_seen": s.events_seen,
        "persisted": s.persisted,
        "dropped_below_floor": s.dropped_below_floor,
        "files_written": s.files_written,
    }));
    Ok(())
}

fn pair(args: &StageArgs) -> Result<()> {
    let cfg = args.common.load()?;
    let s = pair_stage(&cfg, &args.input, &args.common.out)?;
    print(json!({
        "files_read": s.files_read,
        "events_read": s.events_read,
        "pairs_formed": s.pairs_formed,
        "candidates": s.candidates,
        "excluded_frequencies": s.exclusions.centers_hz.len(),
    }));
    Ok(())
}

fn discover(args: &StageArgs, tau_int: Option<f64>) -> Result<()> {
    let cfg = args.common.load()?;
    let (report, _) = discover_stage(&cfg, &args.input, &args.common.out, tau_int)?;
    let flagged: Vec<_> = report
        .flagged
        .iter()
        .map(|f| json!({"bin": f.bin_index, "ra_hours": f.ra_hours, "count": f.count, "d": f.cohen_d_final}))
        .collect();
    print(json!({
        "tau_int_s": report.parameters.tau_int_used_s,
        "kept_pairs": report.events.len(),
        "max_final_d": report.max_final_d(),
        "flagged": flagged,
        "report": args.common.out.join(pipeline::REPORT_FILE),
    }));
    Ok(())
}

fn fringe(args: &FringeArgs) -> Result<()> {
    let cfg = args.common.load()?;
    let mjd = args.mjd.unwrap_or(cfg.scenario.start_mjd);
    let trace_cfg = TraceConfig {
        sample_interval_s: args.sample_interval,
        ..TraceConfig::default()
    };
    let trace = generate_correlator_trace(&cfg.scenario, mjd, &trace_cfg)?;
    fs::create_dir_all(&args.common.out)?;
    let path = args.common.out.join("fringe.csv");
    write_csv(&path, &trace)?;
    let fit = if cfg.scenario.continuum_sources.is_empty() {
        None
    } else {
        Some(fit_fringe_period(&trace, 0.5)?)
    };
    print(json!({ "samples": trace.len(), "trace": path, "fit": fit }));
    Ok(())
}

fn write_csv<T: serde::Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    for row in rows {
        w.serialize(row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidInput(format!("{other:?}")),
    }
}

fn selftest(args: &SelftestArgs) -> Result<bool> {
    let report = run_selftest(args.seed, args.frames)?;
    print(serde_json::to_value(&report)?);
    Ok(report.pass())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Synth(a) => synth(a).map(|_| true),
        Command::Pair(a) => pair(a).map(|_| true),
        Command::Discover(a) => discover(&a.stage, a.tau_int).map(|_| true),
        Command::Ablate(a) => discover(&a.stage, Some(a.tau_int)).map(|_| true),
        Command::Fringe(a) => fringe(a).map(|_| true),
        Command::Selftest(a) => selftest(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: selftest-failed: oracle comparison failed");
            ExitCode::from(1)
        }
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error: {}: {msg}", e.class());
            ExitCode::from(2)
        }
    }
}
