//! Domain records shared by the schedulers, the simulator and the metrics.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ParamError;
use crate::scalar::Scalar;
use crate::window::Window;

pub const DEFAULT_FRAME_PERIOD: f64 = 18.86;
pub const DEFAULT_DEVICE_CORES: u32 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaskId(pub u64);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DeviceId(pub usize);

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0)
    }
}

impl fmt::Display for DeviceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "d{}", self.0)
    }
}

/// Interval between frames on one device.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FramePeriod(f64);

impl FramePeriod {
    pub fn new(seconds: f64) -> Result<Self, ParamError> {
        if seconds > 0.0 && seconds.is_finite() {
            Ok(Self(seconds))
        } else {
            Err(ParamError::NonPositive {
                what: "frame period",
                value: seconds.to_string(),
            })
        }
    }

    pub fn seconds(self) -> f64 {
        self.0
    }
}

impl Default for FramePeriod {
    fn default() -> Self {
        Self(DEFAULT_FRAME_PERIOD)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Priority {
    High,
    Low,
}

/// Execution profile of a task.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ConfigKind {
    #[serde(rename = "hp")]
    HighPriority,
    #[serde(rename = "lp2")]
    LowPriority2Core,
    #[serde(rename = "lp4")]
    LowPriority4Core,
}

impl ConfigKind {
    pub const ALL: [ConfigKind; 3] = [
        ConfigKind::HighPriority,
        ConfigKind::LowPriority2Core,
        ConfigKind::LowPriority4Core,
    ];

    pub fn cores(self) -> u32 {
        match self {
            ConfigKind::HighPriority => 1,
            ConfigKind::LowPriority2Core => 2,
            ConfigKind::LowPriority4Core => 4,
        }
    }

    /// Benchmarked processing time in seconds.
    pub fn base_duration(self) -> f64 {
        match self {
            ConfigKind::HighPriority => 0.98,
            ConfigKind::LowPriority2Core => 16.862,
            ConfigKind::LowPriority4Core => 11.611,
        }
    }

    pub fn priority(self) -> Priority {
        match self {
            ConfigKind::HighPriority => Priority::High,
            _ => Priority::Low,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            ConfigKind::HighPriority => "hp",
            ConfigKind::LowPriority2Core => "lp2",
            ConfigKind::LowPriority4Core => "lp4",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskConfig<T = f64> {
    pub kind: ConfigKind,
    pub cores: u32,
    pub duration: T,
    pub padding: T,
}

impl<T: Scalar> TaskConfig<T> {
    pub fn standard(kind: ConfigKind) -> Self {
        Self {
            kind,
            cores: kind.cores(),
            duration: T::lit(kind.base_duration()),
            padding: T::zero(),
        }
    }

    pub fn with_padding(mut self, padding: T) -> Result<Self, ParamError> {
        if padding < T::zero() || !padding.is_finite() {
            return Err(ParamError::Invalid(format!(
                "padding must be non-negative, got {padding}"
            )));
        }
        self.padding = padding;
        Ok(self)
    }

    /// Reserved processing time: benchmark duration plus padding.
    pub fn effective_duration(&self) -> T {
        self.duration + self.padding
    }
}

/// The three execution profiles of a run, indexed by [`ConfigKind::index`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConfigTable<T = f64> {
    configs: [TaskConfig<T>; 3],
}

impl<T: Scalar> ConfigTable<T> {
    pub fn with_paddings(hp: T, lp2: T, lp4: T) -> Result<Self, ParamError> {
        Ok(Self {
            configs: [
                TaskConfig::standard(ConfigKind::HighPriority).with_padding(hp)?,
                TaskConfig::standard(ConfigKind::LowPriority2Core).with_padding(lp2)?,
                TaskConfig::standard(ConfigKind::LowPriority4Core).with_padding(lp4)?,
            ],
        })
    }

    pub fn get(&self, kind: ConfigKind) -> &TaskConfig<T> {
        &self.configs[kind.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = &TaskConfig<T>> {
        self.configs.iter()
    }
}

impl<T: Scalar> Default for ConfigTable<T> {
    fn default() -> Self {
        Self {
            configs: ConfigKind::ALL.map(TaskConfig::standard),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskState {
    Pending,
    Allocated,
    Running,
    Completed,
    Preempted,
    ViolatedDeadline,
    Rejected,
}

impl TaskState {
    pub const ALL: [TaskState; 7] = [
        TaskState::Pending,
        TaskState::Allocated,
        TaskState::Running,
        TaskState::Completed,
        TaskState::Preempted,
        TaskState::ViolatedDeadline,
        TaskState::Rejected,
    ];

    pub fn is_terminal(self) -> bool {
        matches!(
            self,
            TaskState::Completed | TaskState::ViolatedDeadline | TaskState::Rejected
        )
    }

    /// Legal lifecycle edges. A task may be rejected straight from `Pending`,
    /// and an allocated task can be pre-empted or miss its deadline before it
    /// starts running (for instance while its input is still in transit).
    pub fn can_transition_to(self, next: TaskState) -> bool {
        use TaskState::*;
        matches!(
            (self, next),
            (Pending, Allocated)
                | (Pending, Rejected)
                | (Allocated, Running)
                | (Allocated, Preempted)
                | (Allocated, ViolatedDeadline)
                | (Running, Completed)
                | (Running, Preempted)
                | (Running, ViolatedDeadline)
                | (Preempted, Allocated)
                | (Preempted, Rejected)
                | (Preempted, ViolatedDeadline)
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Task<T = f64> {
    pub id: TaskId,
    pub source_device: DeviceId,
    pub config: TaskConfig<T>,
    pub deadline: T,
    pub priority: Priority,
    pub state: TaskState,
}

impl<T: Scalar> Task<T> {
    pub fn high(id: TaskId, source: DeviceId, deadline: T, config: TaskConfig<T>) -> Self {
        Self {
            id,
            source_device: source,
            config,
            deadline,
            priority: Priority::High,
            state: TaskState::Pending,
        }
    }

    pub fn low(id: TaskId, source: DeviceId, deadline: T, config: TaskConfig<T>) -> Self {
        Self {
            id,
            source_device: source,
            config,
            deadline,
            priority: Priority::Low,
            state: TaskState::Pending,
        }
    }

    /// Moves the task along a legal lifecycle edge.
    pub fn transition(&mut self, next: TaskState) -> Result<(), ParamError> {
        if self.state.can_transition_to(next) {
            self.state = next;
            Ok(())
        } else {
            Err(ParamError::Invalid(format!(
                "task {} cannot move from {:?} to {:?}",
                self.id, self.state, next
            )))
        }
    }
}

/// A transfer of the task input over the shared link.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommReservation<T = f64> {
    /// Bucket of the discretised link, when the scheduler uses one.
    pub bucket: Option<usize>,
    pub transfer: Window<T>,
}

/// A task bound to a device, a processing window and optionally a transfer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Allocation<T = f64> {
    pub task: TaskId,
    pub device: DeviceId,
    pub source: DeviceId,
    pub priority: Priority,
    pub kind: ConfigKind,
    pub cores: u32,
    pub deadline: T,
    pub window: Window<T>,
    pub comm: Option<CommReservation<T>>,
}

impl<T: Scalar> Allocation<T> {
    pub fn is_remote(&self) -> bool {
        self.device != self.source
    }

    /// Checks the record against its configuration: the window is long
    /// enough, ends by the deadline, and remote placements carry a transfer
    /// that finishes before processing starts.
    pub fn is_consistent(&self, config: &TaskConfig<T>) -> bool {
        let long_enough = self.window.duration() >= config.effective_duration() * T::lit(1.0 - 1e-12);
        let in_time = self.window.t2 <= self.deadline;
        let comm_ok = match (&self.comm, self.is_remote()) {
            (Some(c), true) => c.transfer.t2 <= self.window.t1,
            (None, false) => true,
            _ => false,
        };
        long_enough && in_time && comm_ok && self.cores == config.cores
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Device<T = f64> {
    pub id: DeviceId,
    pub total_cores: u32,
    pub active_workload: Vec<Allocation<T>>,
}

impl<T: Scalar> Device<T> {
    pub fn new(id: DeviceId, total_cores: u32) -> Self {
        Self {
            id,
            total_cores,
            active_workload: Vec::new(),
        }
    }

    pub fn remove(&mut self, task: TaskId) -> Option<Allocation<T>> {
        let pos = self.active_workload.iter().position(|a| a.task == task)?;
        Some(self.active_workload.remove(pos))
    }

    pub fn cores_in_use_at(&self, t: T) -> u32 {
        self.active_workload
            .iter()
            .filter(|a| a.window.contains_instant(t))
            .map(|a| a.cores)
            .sum()
    }
}

/// One sampling event on one device: a high-priority task plus 0..4
/// low-priority tasks issued after it completes.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame<T = f64> {
    pub index: usize,
    pub device: DeviceId,
    pub spawn: T,
    /// Number of low-priority tasks requested once the HP task completes.
    pub requested: u8,
    pub hp_task: Task<T>,
    pub lp_tasks: Vec<Task<T>>,
}

impl<T: Scalar> Frame<T> {
    /// True iff the HP task and every LP task completed and the full LP
    /// request was issued.
    pub fn is_complete(&self) -> bool {
        self.hp_task.state == TaskState::Completed
            && self.lp_tasks.len() == usize::from(self.requested)
            && self.lp_tasks.iter().all(|t| t.state == TaskState::Completed)
    }

    pub fn task_mut(&mut self, id: TaskId) -> Option<&mut Task<T>> {
        if self.hp_task.id == id {
            return Some(&mut self.hp_task);
        }
        self.lp_tasks.iter_mut().find(|t| t.id == id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn frame_period_default_and_override() {
        assert_eq!(FramePeriod::default().seconds(), 18.86);
        assert_eq!(FramePeriod::new(10.0).unwrap().seconds(), 10.0);
        assert!(FramePeriod::new(0.0).is_err());
        assert!(FramePeriod::new(-1.0).is_err());
    }

    #[test]
    fn standard_configs() {
        let hp = TaskConfig::<f64>::standard(ConfigKind::HighPriority);
        assert_eq!((hp.cores, hp.duration), (1, 0.98));
        let lp2 = TaskConfig::<f64>::standard(ConfigKind::LowPriority2Core);
        assert_eq!((lp2.cores, lp2.duration), (2, 16.862));
        let lp4 = TaskConfig::<f64>::standard(ConfigKind::LowPriority4Core);
        assert_eq!((lp4.cores, lp4.duration), (4, 11.611));
        let padded = lp2.with_padding(0.5).unwrap();
        assert!((padded.effective_duration() - 17.362).abs() < 1e-12);
        assert!(lp2.with_padding(-0.1).is_err());
    }

    #[test]
    fn transition_table_is_exactly_the_lifecycle() {
        use TaskState::*;
        let allowed = [
            (Pending, Allocated),
            (Pending, Rejected),
            (Allocated, Running),
            (Allocated, Preempted),
            (Allocated, ViolatedDeadline),
            (Running, Completed),
            (Running, Preempted),
            (Running, ViolatedDeadline),
            (Preempted, Allocated),
            (Preempted, Rejected),
            (Preempted, ViolatedDeadline),
        ];
        for from in TaskState::ALL {
            for to in TaskState::ALL {
                assert_eq!(
                    from.can_transition_to(to),
                    allowed.contains(&(from, to)),
                    "{from:?} -> {to:?}"
                );
            }
        }
        for s in TaskState::ALL.into_iter().filter(|s| s.is_terminal()) {
            assert!(TaskState::ALL.iter().all(|&n| !s.can_transition_to(n)));
        }
    }

    #[test]
    fn illegal_transition_is_an_error() {
        let mut t = Task::low(TaskId(1), DeviceId(0), 10.0, TaskConfig::standard(ConfigKind::LowPriority2Core));
        assert!(t.transition(TaskState::Completed).is_err());
        t.transition(TaskState::Allocated).unwrap();
        t.transition(TaskState::Running).unwrap();
        t.transition(TaskState::Completed).unwrap();
        assert!(t.transition(TaskState::Running).is_err());
    }

    fn state() -> impl Strategy<Value = TaskState> {
        prop::sample::select(TaskState::ALL.to_vec())
    }

    proptest! {
        #[test]
        fn frame_completion_is_conjunction(hp in state(), lps in prop::collection::vec(state(), 0..=4)) {
            let cfg = TaskConfig::standard(ConfigKind::HighPriority);
            let mut hp_task = Task::high(TaskId(0), DeviceId(0), 18.86, cfg);
            hp_task.state = hp;
            let lp_tasks: Vec<_> = lps.iter().enumerate().map(|(i, &s)| {
                let mut t = Task::low(TaskId(i as u64 + 1), DeviceId(0), 18.86,
                                      TaskConfig::standard(ConfigKind::LowPriority2Core));
                t.state = s;
                t
            }).collect();
            let frame = Frame { index: 0, device: DeviceId(0), spawn: 0.0,
                                requested: lps.len() as u8, hp_task, lp_tasks };
            let expected = hp == TaskState::Completed && lps.iter().all(|&s| s == TaskState::Completed);
            prop_assert_eq!(frame.is_complete(), expected);
        }
    }
}
