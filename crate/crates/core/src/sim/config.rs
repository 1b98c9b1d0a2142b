//! Run configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{LoadError, ParamError};
use crate::model::DEFAULT_FRAME_PERIOD;
use crate::sched::SchedulerKind;
use crate::trace::TraceKind;

/// Keys accepted in a run configuration file, in canonical order.
pub const CONFIG_KEYS: [&str; 11] = [
    "trace",
    "scheduler",
    "frame_period_s",
    "bw_interval_s",
    "duty_cycle",
    "nominal_bw_bps",
    "probe_count",
    "probe_bytes",
    "traffic_bytes",
    "seed",
    "duration_s",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceSource {
    File(PathBuf),
    /// Generated in memory from the run seed, long enough for the run.
    Generated(TraceKind),
}

impl TraceSource {
    pub fn label(&self) -> String {
        match self {
            TraceSource::File(p) => p.display().to_string(),
            TraceSource::Generated(k) => format!("generated:{}", k.name()),
        }
    }
}

impl FromStr for TraceSource {
    type Err = ParamError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        match s.strip_prefix("generated:") {
            Some(kind) => Ok(TraceSource::Generated(kind.parse()?)),
            None if s.is_empty() => Err(ParamError::Invalid("empty trace path".into())),
            None => Ok(TraceSource::File(PathBuf::from(s))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub trace: TraceSource,
    pub scheduler: SchedulerKind,
    pub frame_period_s: f64,
    pub bw_interval_s: f64,
    pub duty_cycle: f64,
    pub nominal_bw_bps: f64,
    pub probe_count: u32,
    pub probe_bytes: u32,
    pub traffic_bytes: u32,
    pub seed: u64,
    pub duration_s: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            trace: TraceSource::Generated(TraceKind::Weighted(4)),
            scheduler: SchedulerKind::Ras,
            frame_period_s: DEFAULT_FRAME_PERIOD,
            bw_interval_s: 30.0,
            duty_cycle: 0.0,
            nominal_bw_bps: 20e6,
            probe_count: 10,
            probe_bytes: 1400,
            traffic_bytes: 1024,
            seed: 1,
            duration_s: 1800.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), ParamError> {
        let positive = [
            ("frame_period_s", self.frame_period_s),
            ("bw_interval_s", self.bw_interval_s),
            ("nominal_bw_bps", self.nominal_bw_bps),
            ("duration_s", self.duration_s),
        ];
        for (what, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(ParamError::NonPositive { what, value: v.to_string() });
            }
        }
        for (what, v) in [("probe_count", self.probe_count), ("probe_bytes", self.probe_bytes), ("traffic_bytes", self.traffic_bytes)] {
            if v == 0 {
                return Err(ParamError::NonPositive { what, value: "0".into() });
            }
        }
        if !(0.0..1.0).contains(&self.duty_cycle) {
            return Err(ParamError::Invalid(format!("duty_cycle must be in [0, 1), got {}", self.duty_cycle)));
        }
        Ok(())
    }

    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ParamError> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T, ParamError> {
            v.trim().parse().map_err(|_| ParamError::Invalid(format!("bad value '{v}' for {key}")))
        }
        match key {
            "trace" => self.trace = value.parse()?,
            "scheduler" => self.scheduler = value.parse()?,
            "frame_period_s" => self.frame_period_s = num(key, value)?,
            "bw_interval_s" => self.bw_interval_s = num(key, value)?,
            "duty_cycle" => self.duty_cycle = num(key, value)?,
            "nominal_bw_bps" => self.nominal_bw_bps = num(key, value)?,
            "probe_count" => self.probe_count = num(key, value)?,
            "probe_bytes" => self.probe_bytes = num(key, value)?,
            "traffic_bytes" => self.traffic_bytes = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "duration_s" => self.duration_s = num(key, value)?,
            other => return Err(ParamError::Invalid(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment. Keys not present
    /// keep their defaults.
    pub fn parse(text: &str) -> Result<Self, LoadError> {
        let mut cfg = SimConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| LoadError::parse(i + 1, format!("expected key = value, got '{line}'")))?;
            cfg.set(k.trim(), v.trim()).map_err(|e| LoadError::parse(i + 1, e.to_string()))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, LoadError> {
        let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let t = self.trace.label();
        let values = [
            t,
            self.scheduler.name().to_string(),
            self.frame_period_s.to_string(),
            self.bw_interval_s.to_string(),
            self.duty_cycle.to_string(),
            self.nominal_bw_bps.to_string(),
            self.probe_count.to_string(),
            self.probe_bytes.to_string(),
            self.traffic_bytes.to_string(),
            self.seed.to_string(),
            self.duration_s.to_string(),
        ];
        for (k, v) in CONFIG_KEYS.iter().zip(values) {
            writeln!(out, "{k} = {v}").unwrap();
        }
        out
    }
}

/// How device frame clocks are offset from each other.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpawnPhase {
    /// All devices spawn together.
    Aligned,
    /// Device `i` is offset by `i / devices` of a period.
    Staggered,
    /// Each device gets a seeded uniform offset.
    Random,
}

/// Controller time charged per request type, in seconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatencyTable {
    pub hp: f64,
    pub preempt: f64,
    pub lp_initial: f64,
    pub lp_realloc: f64,
    pub bw_update: f64,
}

impl LatencyTable {
    pub const ZERO: LatencyTable = LatencyTable { hp: 0.0, preempt: 0.0, lp_initial: 0.0, lp_realloc: 0.0, bw_update: 0.0 };

    /// Typical controller latencies of each scheduler on the reference
    /// testbed.
    pub fn preset(kind: SchedulerKind) -> Self {
        match kind {
            SchedulerKind::Ras => LatencyTable { hp: 0.004, preempt: 0.06, lp_initial: 0.004, lp_realloc: 0.014, bw_update: 0.002 },
            SchedulerKind::Wps => LatencyTable { hp: 0.012, preempt: 0.28, lp_initial: 0.17, lp_realloc: 0.15, bw_update: 0.0 },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatencyModel {
    /// Charge a fixed time per request type (reproducible).
    Fixed(LatencyTable),
    /// Charge the wall-clock time of the scheduling call.
    Measured,
}

/// Simulation model constants that are not part of the run configuration
/// file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub devices: usize,
    pub cores: u32,
    /// Largest input image; sets the base transfer unit.
    pub image_bytes: u64,
    /// Fraction of link capacity taken by background traffic while a burst
    /// is on.
    pub congestion_load: f64,
    /// Time between successive probe pings.
    pub ping_spacing_s: f64,
    pub ewma_alpha: f64,
    /// Probability of the dominant value in weighted traces.
    pub dominant_probability: f64,
    /// Offset of each device's frame clock within the period.
    pub phase: SpawnPhase,
    /// Start every burst at the beginning of its interval instead of at a
    /// random phase.
    pub aligned_bursts: bool,
    /// Run the periodic bandwidth test under the baseline scheduler too.
    pub baseline_probes: bool,
    /// Hold the controller for the whole bandwidth test, not just the rebuild.
    pub probe_blocks_controller: bool,
    /// Capacity tracking horizon, in frame periods.
    pub horizon_periods: f64,
    /// Task deadline measured from frame spawn; `None` means one period.
    pub deadline_s: Option<f64>,
    /// `None` picks the preset of the configured scheduler.
    pub latency: Option<LatencyModel>,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            devices: 4,
            cores: 4,
            image_bytes: 416 * 416 * 3,
            congestion_load: 0.6,
            ping_spacing_s: 0.02,
            ewma_alpha: 0.3,
            dominant_probability: crate::trace::DEFAULT_DOMINANT_PROBABILITY,
            phase: SpawnPhase::Random,
            aligned_bursts: false,
            baseline_probes: false,
            probe_blocks_controller: true,
            horizon_periods: 10.0,
            deadline_s: None,
            latency: None,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        if self.devices == 0 || self.devices > crate::trace::TRACE_DEVICES {
            return Err(ParamError::Invalid(format!("devices must be 1..={}", crate::trace::TRACE_DEVICES)));
        }
        if self.image_bytes == 0 {
            return Err(ParamError::NonPositive { what: "image_bytes", value: "0".into() });
        }
        if !(0.0..1.0).contains(&self.congestion_load) {
            return Err(ParamError::Invalid(format!("congestion_load must be in [0, 1), got {}", self.congestion_load)));
        }
        if !(self.ping_spacing_s > 0.0) {
            return Err(ParamError::NonPositive { what: "ping_spacing_s", value: self.ping_spacing_s.to_string() });
        }
        if !(self.ewma_alpha > 0.0 && self.ewma_alpha <= 1.0) {
            return Err(ParamError::Alpha(self.ewma_alpha.to_string()));
        }
        if let Some(d) = self.deadline_s {
            if !(d > 0.0) {
                return Err(ParamError::NonPositive { what: "deadline_s", value: d.to_string() });
            }
        }
        Ok(())
    }

    pub fn image_bits(&self) -> f64 {
        self.image_bytes as f64 * 8.0
    }
}
