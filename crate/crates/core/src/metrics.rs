//! Run logs and the aggregate report computed from them.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::LoadError;
use crate::model::{ConfigKind, Priority, TaskState};
use crate::sched::{Outcome, RejectReason, SchedulerKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobKind {
    Hp,
    Lp,
    Preempt,
    Realloc,
    BandwidthUpdate,
}

/// One line of a run log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogRecord {
    Run {
        scheduler: SchedulerKind,
        trace: String,
        seed: u64,
        duration_s: f64,
        frame_period_s: f64,
        bw_interval_s: f64,
        duty_cycle: f64,
        nominal_bw_bps: f64,
    },
    Frame {
        frame: usize,
        device: usize,
        spawn: f64,
        requested: u8,
        hp_task: u64,
        lp_tasks: Vec<u64>,
    },
    Decision {
        request: u64,
        job: JobKind,
        time: f64,
        queued_us: f64,
        latency_us: f64,
        outcome: Outcome,
        reason: Option<RejectReason>,
        config: Option<ConfigKind>,
        tasks: Vec<u64>,
        devices: Vec<usize>,
        windows: Vec<[f64; 2]>,
        buckets: Vec<Option<usize>>,
        victims: Vec<u64>,
    },
    Task {
        task: u64,
        frame: usize,
        priority: Priority,
        state: TaskState,
        config: Option<ConfigKind>,
        device: Option<usize>,
        remote: bool,
        start: Option<f64>,
        end: Option<f64>,
        preemptions: u32,
        /// Time from request to the allocation taking effect.
        alloc_latency_us: Option<f64>,
        via_preemption: bool,
    },
    Bandwidth {
        time: f64,
        estimate_bps: f64,
        transfer_unit_s: f64,
        overflow: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandwidthPoint {
    pub time_s: f64,
    pub estimate_bps: f64,
    pub transfer_unit_s: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub label: String,
    pub scheduler: String,
    pub trace: String,
    pub seed: u64,
    pub duration_s: f64,
    pub bw_interval_s: f64,
    pub duty_cycle: f64,
    pub frames_total: u64,
    pub frames_completed: u64,
    pub frame_completion_rate: f64,
    pub hp_total: u64,
    pub hp_completed: u64,
    pub hp_rejected: u64,
    pub hp_violated: u64,
    pub hp_direct: u64,
    pub hp_via_preemption: u64,
    pub hp_direct_latency_ms: f64,
    pub hp_preemption_latency_ms: f64,
    pub lp_total: u64,
    pub lp_completed: u64,
    pub lp_violated: u64,
    pub lp_rejected: u64,
    pub lp_reallocations: u64,
    pub lp_reallocated_ok: u64,
    pub lp_initial_latency_ms: f64,
    pub lp_realloc_latency_ms: f64,
    pub offloaded_total: u64,
    pub offloaded_completed: u64,
    pub offloaded_completion_rate: f64,
    pub alloc_2core: u64,
    pub alloc_4core: u64,
    pub frac_2core: f64,
    pub frac_4core: f64,
    pub bandwidth: Vec<BandwidthPoint>,
}

/// Scalar columns of the summary CSV, in order.
pub const SUMMARY_COLUMNS: [&str; 33] = [
    "label",
    "scheduler",
    "trace",
    "seed",
    "duration_s",
    "bw_interval_s",
    "duty_cycle",
    "frames_total",
    "frames_completed",
    "frame_completion_rate",
    "hp_total",
    "hp_completed",
    "hp_rejected",
    "hp_violated",
    "hp_direct",
    "hp_via_preemption",
    "hp_direct_latency_ms",
    "hp_preemption_latency_ms",
    "lp_total",
    "lp_completed",
    "lp_violated",
    "lp_rejected",
    "lp_reallocations",
    "lp_reallocated_ok",
    "lp_initial_latency_ms",
    "lp_realloc_latency_ms",
    "offloaded_total",
    "offloaded_completed",
    "offloaded_completion_rate",
    "alloc_2core",
    "alloc_4core",
    "frac_2core",
    "frac_4core",
];

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

pub fn run_label(scheduler: &str, trace: &str, bw_interval_s: f64, duty_cycle: f64, seed: u64) -> String {
    let trace = trace.strip_prefix("generated:").unwrap_or(trace);
    let trace = Path::new(trace).file_stem().and_then(|s| s.to_str()).unwrap_or(trace);
    format!("{scheduler}-{trace}-bw{bw_interval_s}-duty{duty_cycle}-seed{seed}")
}

/// Computes the report of a run from its log records.
pub fn aggregate(log: &[LogRecord]) -> RunReport {
    let mut r = RunReport::default();
    let mut frames: Vec<(u64, Vec<u64>, u8)> = Vec::new();
    let mut states: std::collections::BTreeMap<u64, TaskState> = std::collections::BTreeMap::new();
    let (mut hp_direct_lat, mut hp_pre_lat, mut lp_init_lat, mut lp_re_lat) = (vec![], vec![], vec![], vec![]);
    for rec in log {
        match rec {
            LogRecord::Run { scheduler, trace, seed, duration_s, bw_interval_s, duty_cycle, .. } => {
                r.scheduler = scheduler.name().into();
                r.trace = trace.clone();
                r.seed = *seed;
                r.duration_s = *duration_s;
                r.bw_interval_s = *bw_interval_s;
                r.duty_cycle = *duty_cycle;
                r.label = run_label(scheduler.name(), trace, *bw_interval_s, *duty_cycle, *seed);
            }
            LogRecord::Frame { hp_task, lp_tasks, requested, .. } => {
                frames.push((*hp_task, lp_tasks.clone(), *requested));
            }
            LogRecord::Decision { job, outcome, config, tasks, latency_us, .. } => match job {
                JobKind::Lp | JobKind::Realloc => {
                    if *job == JobKind::Lp {
                        lp_init_lat.push(latency_us / 1000.0);
                    } else {
                        r.lp_reallocations += 1;
                        lp_re_lat.push(latency_us / 1000.0);
                    }
                    if *outcome == Outcome::Allocated {
                        if *job == JobKind::Realloc {
                            r.lp_reallocated_ok += 1;
                        }
                        let n = tasks.len() as u64;
                        match config {
                            Some(ConfigKind::LowPriority2Core) => r.alloc_2core += n,
                            Some(ConfigKind::LowPriority4Core) => r.alloc_4core += n,
                            _ => {}
                        }
                    }
                }
                _ => {}
            },
            LogRecord::Task { task, priority, state, remote, alloc_latency_us, via_preemption, .. } => {
                states.insert(*task, *state);
                match priority {
                    Priority::High => {
                        r.hp_total += 1;
                        match state {
                            TaskState::Completed => r.hp_completed += 1,
                            TaskState::Rejected => r.hp_rejected += 1,
                            TaskState::ViolatedDeadline => r.hp_violated += 1,
                            _ => {}
                        }
                        if let Some(l) = alloc_latency_us {
                            if *via_preemption {
                                r.hp_via_preemption += 1;
                                hp_pre_lat.push(l / 1000.0);
                            } else {
                                r.hp_direct += 1;
                                hp_direct_lat.push(l / 1000.0);
                            }
                        }
                    }
                    Priority::Low => {
                        r.lp_total += 1;
                        match state {
                            TaskState::Completed => r.lp_completed += 1,
                            TaskState::Rejected => r.lp_rejected += 1,
                            TaskState::ViolatedDeadline => r.lp_violated += 1,
                            _ => {}
                        }
                        if *remote {
                            r.offloaded_total += 1;
                            if *state == TaskState::Completed {
                                r.offloaded_completed += 1;
                            }
                        }
                    }
                }
            }
            LogRecord::Bandwidth { time, estimate_bps, transfer_unit_s, .. } => r.bandwidth.push(BandwidthPoint {
                time_s: *time,
                estimate_bps: *estimate_bps,
                transfer_unit_s: *transfer_unit_s,
            }),
        }
    }
    let done = |t: &u64| states.get(t) == Some(&TaskState::Completed);
    r.frames_total = frames.len() as u64;
    r.frames_completed = frames
        .iter()
        .filter(|(hp, lps, req)| done(hp) && lps.len() == usize::from(*req) && lps.iter().all(done))
        .count() as u64;
    r.frame_completion_rate = ratio(r.frames_completed, r.frames_total);
    r.hp_direct_latency_ms = mean(&hp_direct_lat);
    r.hp_preemption_latency_ms = mean(&hp_pre_lat);
    r.lp_initial_latency_ms = mean(&lp_init_lat);
    r.lp_realloc_latency_ms = mean(&lp_re_lat);
    r.offloaded_completion_rate = ratio(r.offloaded_completed, r.offloaded_total);
    let allocs = r.alloc_2core + r.alloc_4core;
    r.frac_2core = ratio(r.alloc_2core, allocs);
    r.frac_4core = ratio(r.alloc_4core, allocs);
    r
}

pub fn log_to_jsonl(log: &[LogRecord]) -> String {
    let mut out = String::new();
    for rec in log {
        out.push_str(&serde_json::to_string(rec).expect("log records serialise"));
        out.push('\n');
    }
    out
}

pub fn parse_log(text: &str) -> Result<Vec<LogRecord>, LoadError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| LoadError::parse(i + 1, e.to_string())))
        .collect()
}

/// Aggregates a JSON Lines run log.
pub fn aggregate_text(text: &str) -> Result<RunReport, LoadError> {
    Ok(aggregate(&parse_log(text)?))
}

fn csv_string(write: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    write(&mut w).expect("writing csv to memory");
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv is utf-8")
}

/// One row per run, columns as in [`SUMMARY_COLUMNS`].
pub fn summary_csv(reports: &[RunReport]) -> String {
    csv_string(|w| {
        w.write_record(SUMMARY_COLUMNS)?;
        for r in reports {
            let v = serde_json::to_value(r).expect("report serialises");
            let row: Vec<String> = SUMMARY_COLUMNS
                .iter()
                .map(|c| match &v[*c] {
                    serde_json::Value::String(s) => s.clone(),
                    other => other.to_string(),
                })
                .collect();
            w.write_record(row)?;
        }
        Ok(())
    })
}

/// Share of successful low-priority allocations per core count, in percent,
/// one column per run.
pub fn core_mix_csv(reports: &[RunReport]) -> String {
    csv_string(|w| {
        let mut header = vec!["cores".to_string()];
        header.extend(reports.iter().map(|r| r.label.clone()));
        w.write_record(&header)?;
        for (name, f) in [("2-core", (|r: &RunReport| r.frac_2core) as fn(&RunReport) -> f64), ("4-core", |r: &RunReport| r.frac_4core)] {
            let mut row = vec![name.to_string()];
            row.extend(reports.iter().map(|r| format!("{:.2}", 100.0 * f(r))));
            w.write_record(&row)?;
        }
        Ok(())
    })
}

/// HP, LP and offloading breakdown per run.
pub fn breakdown_csv(reports: &[RunReport]) -> String {
    csv_string(|w| {
        w.write_record(["label", "category", "metric", "value"])?;
        for r in reports {
            let rows: [(&str, &str, String); 14] = [
                ("frames", "completion_rate", r.frame_completion_rate.to_string()),
                ("hp", "direct", r.hp_direct.to_string()),
                ("hp", "via_preemption", r.hp_via_preemption.to_string()),
                ("hp", "direct_latency_ms", r.hp_direct_latency_ms.to_string()),
                ("hp", "preemption_latency_ms", r.hp_preemption_latency_ms.to_string()),
                ("lp", "completed", r.lp_completed.to_string()),
                ("lp", "violated", r.lp_violated.to_string()),
                ("lp", "rejected", r.lp_rejected.to_string()),
                ("lp", "reallocations", r.lp_reallocations.to_string()),
                ("lp", "initial_latency_ms", r.lp_initial_latency_ms.to_string()),
                ("lp", "realloc_latency_ms", r.lp_realloc_latency_ms.to_string()),
                ("offload", "completion_rate", r.offloaded_completion_rate.to_string()),
                ("cores", "frac_2core", r.frac_2core.to_string()),
                ("cores", "frac_4core", r.frac_4core.to_string()),
            ];
            for (cat, metric, value) in rows {
                w.write_record([r.label.as_str(), cat, metric, value.as_str()])?;
            }
        }
        Ok(())
    })
}

pub fn bandwidth_csv(reports: &[RunReport]) -> String {
    csv_string(|w| {
        w.write_record(["label", "time_s", "estimate_bps", "transfer_unit_s"])?;
        for r in reports {
            for p in &r.bandwidth {
                w.write_record([r.label.clone(), p.time_s.to_string(), p.estimate_bps.to_string(), p.transfer_unit_s.to_string()])?;
            }
        }
        Ok(())
    })
}

pub fn reports_json(reports: &[RunReport]) -> String {
    let mut s = serde_json::to_string_pretty(reports).expect("reports serialise");
    s.push('\n');
    s
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = crate::error::ParamError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(crate::error::ParamError::Invalid(format!("unknown format '{other}'"))),
        }
    }
}

/// Writes report files into `dir`; returns the paths written.
pub fn write_reports(dir: &Path, reports: &[RunReport], format: OutputFormat) -> std::io::Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let files: Vec<(&str, String)> = match format {
        OutputFormat::Csv => vec![
            ("summary.csv", summary_csv(reports)),
            ("breakdown.csv", breakdown_csv(reports)),
            ("core_mix.csv", core_mix_csv(reports)),
            ("bandwidth.csv", bandwidth_csv(reports)),
        ],
        OutputFormat::Json => vec![("reports.json", reports_json(reports))],
    };
    let mut written = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        std::fs::File::create(&path)?.write_all(body.as_bytes())?;
        written.push(path);
    }
    Ok(written)
}

/// Short human-readable summary of one report.
pub fn describe(r: &RunReport) -> String {
    let mut s = String::new();
    writeln!(s, "{}", r.label).unwrap();
    writeln!(s, "  frames      {}/{} ({:.1}%)", r.frames_completed, r.frames_total, 100.0 * r.frame_completion_rate).unwrap();
    writeln!(
        s,
        "  hp          completed {} direct {} via pre-emption {} (latency {:.2} / {:.2} ms)",
        r.hp_completed, r.hp_direct, r.hp_via_preemption, r.hp_direct_latency_ms, r.hp_preemption_latency_ms
    )
    .unwrap();
    writeln!(
        s,
        "  lp          completed {} violated {} rejected {} reallocations {} (latency {:.2} / {:.2} ms)",
        r.lp_completed, r.lp_violated, r.lp_rejected, r.lp_reallocations, r.lp_initial_latency_ms, r.lp_realloc_latency_ms
    )
    .unwrap();
    writeln!(
        s,
        "  offloaded   {}/{} completed; cores 2:{:.2}% 4:{:.2}%",
        r.offloaded_completed,
        r.offloaded_total,
        100.0 * r.frac_2core,
        100.0 * r.frac_4core
    )
    .unwrap();
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(hp: u64, lps: Vec<u64>) -> LogRecord {
        LogRecord::Frame { frame: 0, device: 0, spawn: 0.0, requested: lps.len() as u8, hp_task: hp, lp_tasks: lps }
    }

    fn task(id: u64, priority: Priority, state: TaskState) -> LogRecord {
        LogRecord::Task {
            task: id,
            frame: 0,
            priority,
            state,
            config: None,
            device: Some(0),
            remote: false,
            start: None,
            end: None,
            preemptions: 0,
            alloc_latency_us: Some(4000.0),
            via_preemption: false,
        }
    }

    #[test]
    fn counts_complete_frame() {
        let log = vec![
            frame(1, vec![2, 3]),
            task(1, Priority::High, TaskState::Completed),
            task(2, Priority::Low, TaskState::Completed),
            task(3, Priority::Low, TaskState::Completed),
        ];
        let r = aggregate(&log);
        assert_eq!((r.frames_completed, r.frames_total), (1, 1));
        assert_eq!(r.lp_completed, 2);
        assert_eq!(r.hp_direct_latency_ms, 4.0);
    }

    #[test]
    fn violation_spoils_frame() {
        let log = vec![
            frame(1, vec![2, 3]),
            task(1, Priority::High, TaskState::Completed),
            task(2, Priority::Low, TaskState::Completed),
            task(3, Priority::Low, TaskState::ViolatedDeadline),
        ];
        let r = aggregate(&log);
        assert_eq!(r.frames_completed, 0);
        assert_eq!(r.lp_violated, 1);
    }

    #[test]
    fn empty_log_is_zero() {
        assert_eq!(aggregate(&[]), RunReport::default());
        assert_eq!(aggregate_text("").unwrap(), RunReport::default());
    }

    #[test]
    fn parse_error_has_line() {
        let good = log_to_jsonl(&[frame(1, vec![])]);
        let text = format!("{good}\n{{\"type\":\"nope\"}}\n");
        match aggregate_text(&text) {
            Err(LoadError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn jsonl_round_trip() {
        let log = vec![frame(1, vec![2]), task(1, Priority::High, TaskState::Completed)];
        assert_eq!(parse_log(&log_to_jsonl(&log)).unwrap(), log);
    }

    #[test]
    fn csv_shapes() {
        let reports = vec![RunReport { label: "a".into(), alloc_2core: 3, frac_2core: 0.75, frac_4core: 0.25, ..Default::default() }; 8];
        let s = summary_csv(&reports);
        assert_eq!(s.lines().count(), 9);
        assert_eq!(s.lines().next().unwrap().split(',').count(), SUMMARY_COLUMNS.len());
        let m = core_mix_csv(&reports[..4]);
        let lines: Vec<&str> = m.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("2-core,75.00"));
        assert!(lines[2].starts_with("4-core,25.00"));
    }

    #[test]
    fn labels() {
        assert_eq!(run_label("ras", "generated:weighted4", 30.0, 0.25, 3), "ras-weighted4-bw30-duty0.25-seed3");
        assert_eq!(run_label("wps", "traces/w1.txt", 1.5, 0.0, 1), "wps-w1-bw1.5-duty0-seed1");
    }
}
