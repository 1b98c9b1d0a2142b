use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use offload::metrics::{self, OutputFormat, RunReport};
use offload::sim::{self, ModelParams, SimConfig};
use offload::{generate_trace, LoadError, ParamError, Preset, TraceKind};

#[derive(Parser)]
#[command(name = "offload-sim", version, about = "Deadline-aware offloading simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic frame trace.
    TraceGen {
        /// uniform, weighted1 .. weighted4
        #[arg(long)]
        kind: TraceKind,
        #[arg(long)]
        frames: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate one configuration.
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Write the event log as JSON lines.
        #[arg(long)]
        log: Option<PathBuf>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Run an experiment batch.
    Preset {
        /// compare, bw_sweep or congestion_sweep
        name: Preset,
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Comma-separated seeds; every configuration runs once per seed.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        /// Directory for per-run logs.
        #[arg(long)]
        log_dir: Option<PathBuf>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Aggregate existing run logs.
    Report {
        #[arg(required = true)]
        logs: Vec<PathBuf>,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "trace")]
    trace: Option<String>,
    #[arg(long = "scheduler")]
    scheduler: Option<String>,
    #[arg(long = "frame_period_s")]
    frame_period_s: Option<String>,
    #[arg(long = "bw_interval_s")]
    bw_interval_s: Option<String>,
    #[arg(long = "duty_cycle")]
    duty_cycle: Option<String>,
    #[arg(long = "nominal_bw_bps")]
    nominal_bw_bps: Option<String>,
    #[arg(long = "probe_count")]
    probe_count: Option<String>,
    #[arg(long = "probe_bytes")]
    probe_bytes: Option<String>,
    #[arg(long = "traffic_bytes")]
    traffic_bytes: Option<String>,
    #[arg(long = "seed")]
    seed: Option<String>,
    #[arg(long = "duration_s")]
    duration_s: Option<String>,
    /// Charge the measured scheduling time instead of the fixed table.
    #[arg(long)]
    measured_latency: bool,
}

#[derive(Args)]
struct OutArgs {
    /// Directory for report files; a summary is printed when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: OutputFormat,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }
}

impl From<ParamError> for Failure {
    fn from(e: ParamError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

impl ConfigArgs {
    fn resolve(&self) -> Result<(SimConfig, ModelParams), Failure> {
        let mut cfg = match &self.config {
            Some(p) => SimConfig::load(p).map_err(|e| Failure::Config(e.to_string()))?,
            None => SimConfig::default(),
        };
        let flags = [
            ("trace", &self.trace),
            ("scheduler", &self.scheduler),
            ("frame_period_s", &self.frame_period_s),
            ("bw_interval_s", &self.bw_interval_s),
            ("duty_cycle", &self.duty_cycle),
            ("nominal_bw_bps", &self.nominal_bw_bps),
            ("probe_count", &self.probe_count),
            ("probe_bytes", &self.probe_bytes),
            ("traffic_bytes", &self.traffic_bytes),
            ("seed", &self.seed),
            ("duration_s", &self.duration_s),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        cfg.validate()?;
        let mut model = ModelParams::default();
        if self.measured_latency {
            model.latency = Some(sim::LatencyModel::Measured);
        }
        Ok((cfg, model))
    }
}

fn simulate(cfg: &SimConfig, model: &ModelParams) -> Result<sim::RunOutput, Failure> {
    sim::run_with(cfg, model).map_err(|e| match e {
        LoadError::Param(p) => Failure::Config(p.to_string()),
        other => runtime(other),
    })
}

fn write_log(path: &Path, out: &sim::RunOutput) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(runtime)?;
    }
    fs::write(path, metrics::log_to_jsonl(&out.log)).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn emit(reports: &[RunReport], out: &OutArgs) -> Result<(), Failure> {
    match &out.out {
        Some(dir) => {
            let written = metrics::write_reports(dir, reports, out.format)
                .map_err(|e| runtime(format!("{}: {e}", dir.display())))?;
            for p in written {
                log::info!("wrote {}", p.display());
            }
        }
        None => match out.format {
            OutputFormat::Csv => {
                for r in reports {
                    print!("{}", metrics::describe(r));
                }
            }
            OutputFormat::Json => println!("{}", metrics::reports_json(reports)),
        },
    }
    Ok(())
}

fn execute(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::TraceGen { kind, frames, seed, out } => {
            let text = generate_trace(kind, frames, seed)?.to_text();
            match out {
                Some(p) => fs::write(&p, text).map_err(|e| runtime(format!("{}: {e}", p.display())))?,
                None => print!("{text}"),
            }
        }
        Command::Run { cfg, log, out } => {
            let (cfg, model) = cfg.resolve()?;
            let result = simulate(&cfg, &model)?;
            if let Some(p) = log {
                write_log(&p, &result)?;
            }
            emit(&[result.report], &out)?;
        }
        Command::Preset { name, cfg, seeds, log_dir, out } => {
            let (base, model) = cfg.resolve()?;
            let seeds = if seeds.is_empty() { vec![base.seed] } else { seeds };
            let batch: Vec<SimConfig> = seeds
                .iter()
                .flat_map(|&seed| name.configs(&SimConfig { seed, ..base.clone() }))
                .collect();
            log::info!("{name}: {} runs", batch.len());
            let results: Vec<sim::RunOutput> =
                batch.par_iter().map(|c| simulate(c, &model)).collect::<Result<_, _>>()?;
            if let Some(dir) = &log_dir {
                for r in &results {
                    write_log(&dir.join(format!("{}.jsonl", r.report.label)), r)?;
                }
            }
            let reports: Vec<RunReport> = results.into_iter().map(|r| r.report).collect();
            emit(&reports, &out)?;
        }
        Command::Report { logs, out } => {
            let reports = logs
                .iter()
                .map(|p| {
                    let text = fs::read_to_string(p).map_err(|e| runtime(format!("{}: {e}", p.display())))?;
                    metrics::aggregate_text(&text).map_err(|e| runtime(format!("{}: {e}", p.display())))
                })
                .collect::<Result<Vec<_>, _>>()?;
            emit(&reports, &out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Config(m) | Failure::Runtime(m)) = &f;
            eprintln!("error: {m}");
            ExitCode::from(f.code())
        }
    }
}
