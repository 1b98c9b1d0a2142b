//! Controller-side schedulers.
//!
//! [`RasScheduler`] answers placement queries from availability lists and the
//! discretised link. [`WpsScheduler`] recomputes exact capacity from the raw
//! workloads on every request and serves as the reference.

mod ras;
mod wps;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::ParamError;
use crate::model::{Allocation, ConfigKind, ConfigTable, DeviceId, TaskId, DEFAULT_DEVICE_CORES, DEFAULT_FRAME_PERIOD};
use crate::window::Window;

pub use ras::RasScheduler;
pub use wps::{max_usage, WpsScheduler};

/// Upper bound on tasks in one low-priority request.
pub const MAX_LP_TASKS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchedulerKind {
    Ras,
    Wps,
}

impl SchedulerKind {
    pub const ALL: [SchedulerKind; 2] = [SchedulerKind::Ras, SchedulerKind::Wps];

    pub fn name(self) -> &'static str {
        match self {
            SchedulerKind::Ras => "ras",
            SchedulerKind::Wps => "wps",
        }
    }
}

impl fmt::Display for SchedulerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchedulerKind {
    type Err = ParamError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ras" => Ok(SchedulerKind::Ras),
            "wps" => Ok(SchedulerKind::Wps),
            other => Err(ParamError::Invalid(format!("unknown scheduler '{other}' (expected ras or wps)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SchedulerParams {
    pub configs: ConfigTable<f64>,
    pub devices: usize,
    pub cores: u32,
    /// Initial base transfer unit in seconds.
    pub transfer_unit: f64,
    /// How far ahead of the current time capacity is tracked.
    pub horizon: f64,
    /// Seed for the remote-device shuffle.
    pub seed: u64,
}

impl Default for SchedulerParams {
    fn default() -> Self {
        Self {
            configs: ConfigTable::default(),
            devices: 4,
            cores: DEFAULT_DEVICE_CORES,
            transfer_unit: 0.2,
            horizon: 10.0 * DEFAULT_FRAME_PERIOD,
            seed: 0,
        }
    }
}

impl SchedulerParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        if self.devices == 0 {
            return Err(ParamError::Invalid("at least one device is required".into()));
        }
        if !(self.transfer_unit > 0.0) {
            return Err(ParamError::NonPositive { what: "transfer unit", value: self.transfer_unit.to_string() });
        }
        let longest = self.configs.iter().map(|c| c.effective_duration()).fold(0.0, f64::max);
        if !(self.horizon >= longest) {
            return Err(ParamError::HorizonTooShort { horizon: self.horizon.to_string(), min: longest.to_string() });
        }
        for c in self.configs.iter() {
            if c.cores == 0 || self.cores % c.cores != 0 {
                return Err(ParamError::IndivisibleCores { cores: self.cores, per_track: c.cores });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HpRequest {
    pub task: TaskId,
    pub source: DeviceId,
    pub deadline: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpRequest {
    pub id: u64,
    pub source: DeviceId,
    pub tasks: Vec<TaskId>,
    pub deadline: f64,
    pub issued: f64,
    /// Single-task request re-issued for a pre-empted task.
    pub reallocation: bool,
}

impl LpRequest {
    pub fn validate(&self) -> Result<(), ParamError> {
        if self.tasks.is_empty() || self.tasks.len() > MAX_LP_TASKS {
            return Err(ParamError::Invalid(format!(
                "low-priority request must hold 1..={MAX_LP_TASKS} tasks, got {}",
                self.tasks.len()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PreemptionRequest {
    pub device: DeviceId,
    pub window: Window<f64>,
    pub task: TaskId,
    pub deadline: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Allocated,
    Rejected,
    PreemptionIssued,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    /// No configuration can finish by the deadline even on an idle device.
    DeadlineInfeasible,
    /// Fewer usable windows than tasks.
    InsufficientWindows,
    /// Pre-emption found nothing to evict that makes room.
    NoVictim,
    InvalidRequest,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decision {
    pub outcome: Outcome,
    pub allocations: Vec<Allocation<f64>>,
    pub preemption: Option<PreemptionRequest>,
    pub reason: Option<RejectReason>,
    /// Configuration used for low-priority placements.
    pub config: Option<ConfigKind>,
    /// Wall-clock seconds spent deciding.
    pub latency: f64,
}

impl Decision {
    pub fn allocated(allocations: Vec<Allocation<f64>>, config: Option<ConfigKind>) -> Self {
        Self { outcome: Outcome::Allocated, allocations, preemption: None, reason: None, config, latency: 0.0 }
    }

    pub fn rejected(reason: RejectReason) -> Self {
        Self { outcome: Outcome::Rejected, allocations: Vec::new(), preemption: None, reason: Some(reason), config: None, latency: 0.0 }
    }

    pub fn preemption(req: PreemptionRequest) -> Self {
        Self { outcome: Outcome::PreemptionIssued, allocations: Vec::new(), preemption: Some(req), reason: None, config: None, latency: 0.0 }
    }

    pub fn is_allocated(&self) -> bool {
        self.outcome == Outcome::Allocated
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PreemptionOutcome {
    pub victims: Vec<Allocation<f64>>,
    pub decision: Decision,
}

pub trait Scheduler: Send {
    fn kind(&self) -> SchedulerKind;

    /// Forgets state that ended before `now`.
    fn advance(&mut self, now: f64);

    fn schedule_high(&mut self, req: &HpRequest, now: f64) -> Decision;

    fn schedule_low(&mut self, req: &LpRequest, now: f64) -> Decision;

    /// Evicts low-priority work overlapping the request window, latest
    /// deadline first, until the high-priority task fits.
    fn preempt(&mut self, req: &PreemptionRequest, now: f64) -> PreemptionOutcome;

    /// Removes an allocation; returns it if it existed.
    fn release(&mut self, task: TaskId, now: f64) -> Option<Allocation<f64>>;

    /// Installs a new base transfer unit. Returns tasks whose reserved
    /// transfer no longer fits on the link.
    fn set_transfer_unit(&mut self, d: f64, now: f64) -> Vec<TaskId>;

    fn transfer_unit(&self) -> f64;

    /// Adds an allocation decided elsewhere, bypassing admission.
    fn import(&mut self, alloc: Allocation<f64>);

    fn workload(&self, device: DeviceId) -> &[Allocation<f64>];

    fn device_count(&self) -> usize;

    fn allocations(&self) -> Vec<Allocation<f64>> {
        (0..self.device_count()).flat_map(|d| self.workload(DeviceId(d)).to_vec()).collect()
    }
}

pub fn new_scheduler(kind: SchedulerKind, params: SchedulerParams) -> Result<Box<dyn Scheduler>, ParamError> {
    Ok(match kind {
        SchedulerKind::Ras => Box::new(RasScheduler::new(params)?),
        SchedulerKind::Wps => Box::new(WpsScheduler::new(params)?),
    })
}

/// Which configurations can meet `deadline` from `now` on an idle local
/// device, in preference order.
pub(crate) fn viable_configs(configs: &ConfigTable<f64>, now: f64, deadline: f64) -> Vec<ConfigKind> {
    [ConfigKind::LowPriority2Core, ConfigKind::LowPriority4Core]
        .into_iter()
        .filter(|k| now + configs.get(*k).effective_duration() <= deadline)
        .collect()
}

/// Remote devices other than `source`, in shuffled order.
pub(crate) fn shuffled_remotes(devices: usize, source: DeviceId, rng: &mut rand_chacha::ChaCha8Rng) -> Vec<DeviceId> {
    use rand::seq::SliceRandom;
    let mut remotes: Vec<DeviceId> = (0..devices).map(DeviceId).filter(|d| *d != source).collect();
    remotes.shuffle(rng);
    remotes
}

/// Low-priority allocations on `workload` overlapping `window`, ordered by
/// latest deadline first.
pub(crate) fn victim_order(workload: &[Allocation<f64>], window: &Window<f64>) -> Vec<Allocation<f64>> {
    let mut v: Vec<Allocation<f64>> = workload
        .iter()
        .filter(|a| a.priority == crate::model::Priority::Low && a.window.overlaps(window))
        .copied()
        .collect();
    v.sort_by(|a, b| b.deadline.total_cmp(&a.deadline).then(a.task.cmp(&b.task)));
    v
}

pub(crate) fn make_alloc(
    task: TaskId,
    device: DeviceId,
    source: DeviceId,
    kind: ConfigKind,
    configs: &ConfigTable<f64>,
    deadline: f64,
    window: Window<f64>,
) -> Allocation<f64> {
    Allocation {
        task,
        device,
        source,
        priority: kind.priority(),
        kind,
        cores: configs.get(kind).cores,
        deadline,
        window,
        comm: None,
    }
}
