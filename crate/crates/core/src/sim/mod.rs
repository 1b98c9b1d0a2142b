//! Trace-driven discrete-event simulation of the offloading system.
//!
//! Devices spawn frames on a fixed period. Each frame runs a high-priority
//! task locally and, once it completes, asks the controller to place up to
//! four low-priority tasks anywhere in the cluster. The controller handles
//! one request at a time; each request occupies it for the scheduler's
//! latency before its decision takes effect. Transfers share a single link
//! whose capacity drops during background bursts, and the controller's view
//! of that capacity comes from periodic probes.

pub mod config;
pub mod events;
pub mod link_model;

use std::collections::VecDeque;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bandwidth::BandwidthEstimate;
use crate::error::{LoadError, ParamError};
use crate::link::compute_d;
use crate::metrics::{aggregate, JobKind, LogRecord, RunReport};
use crate::model::{Allocation, ConfigTable, DeviceId, Priority, TaskId, TaskState};
use crate::sched::{
    new_scheduler, Decision, HpRequest, LpRequest, Outcome, PreemptionRequest, Scheduler, SchedulerParams,
};
use crate::trace::{generate_trace_with, Trace};

pub use config::{LatencyModel, LatencyTable, ModelParams, SimConfig, SpawnPhase, TraceSource, CONFIG_KEYS};
pub use events::{Event, EventKind, EventQueue};
pub use link_model::{effective_bandwidth, Congestion, SharedLink};

/// Log and report of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub log: Vec<LogRecord>,
    pub report: RunReport,
}

#[derive(Clone, Debug)]
struct TaskRec {
    frame: usize,
    source: DeviceId,
    priority: Priority,
    deadline: f64,
    state: TaskState,
    generation: u64,
    alloc: Option<Allocation<f64>>,
    transfer_active: bool,
    start: Option<f64>,
    end: Option<f64>,
    preemptions: u32,
    requested_at: f64,
    alloc_latency: Option<f64>,
    via_preemption: bool,
}

#[derive(Clone, Debug)]
enum Job {
    High(TaskId),
    Low { source: DeviceId, tasks: Vec<TaskId>, deadline: f64 },
    Preempt(PreemptionRequest),
    Realloc(TaskId),
    /// Bandwidth test followed by a rebuild of the link model. The
    /// controller is occupied until the rebuild is done.
    Probe,
    /// Link model rebuild from a finished background test with this mean.
    Rebuild(f64),
}

#[derive(Clone, Debug)]
struct Queued {
    job: Job,
    enqueued: f64,
}

#[derive(Clone, Debug)]
enum Effect {
    Decision { job: Job, decision: Decision, victims: Vec<Allocation<f64>> },
    Bandwidth { overflow: Vec<TaskId> },
}

struct Probe {
    peers: usize,
    means: Vec<f64>,
}

pub struct Simulation {
    cfg: SimConfig,
    model: ModelParams,
    latency: LatencyModel,
    trace: Trace,
    sched: Box<dyn Scheduler>,
    events: EventQueue,
    now: f64,
    tasks: Vec<TaskRec>,
    queue: VecDeque<Queued>,
    busy: bool,
    pending: Option<Effect>,
    next_request: u64,
    link: SharedLink,
    link_generation: u64,
    congestion: Congestion,
    estimate: BandwidthEstimate<f64>,
    probe: Option<Probe>,
    /// Cores in use on each device, and tasks waiting for cores to free up.
    cores_busy: Vec<u32>,
    waiting: Vec<VecDeque<(TaskId, u64)>>,
    rng: ChaCha8Rng,
    log: Vec<LogRecord>,
}

/// Runs `cfg` with default model parameters.
pub fn run(cfg: &SimConfig) -> Result<RunOutput, LoadError> {
    run_with(cfg, &ModelParams::default())
}

pub fn run_with(cfg: &SimConfig, model: &ModelParams) -> Result<RunOutput, LoadError> {
    let trace = load_trace(cfg, model)?;
    Ok(Simulation::new(cfg.clone(), model.clone(), trace)?.run())
}

/// Frames needed to cover the run.
pub fn frames_for(cfg: &SimConfig) -> usize {
    (cfg.duration_s / cfg.frame_period_s).ceil() as usize
}

pub fn load_trace(cfg: &SimConfig, model: &ModelParams) -> Result<Trace, LoadError> {
    cfg.validate()?;
    model.validate()?;
    match &cfg.trace {
        TraceSource::File(p) => Trace::load(p),
        TraceSource::Generated(kind) => Ok(generate_trace_with(*kind, frames_for(cfg), cfg.seed, model.dominant_probability)?),
    }
}

impl Simulation {
    pub fn new(cfg: SimConfig, model: ModelParams, trace: Trace) -> Result<Self, ParamError> {
        cfg.validate()?;
        model.validate()?;
        let configs = ConfigTable::default();
        let congestion = Congestion::new(&cfg, &model);
        let initial_bw = congestion.effective_bandwidth(0.0);
        let estimate = BandwidthEstimate::new(initial_bw, model.ewma_alpha)?;
        let d = compute_d(model.image_bits(), initial_bw)?;
        let params = SchedulerParams {
            configs,
            devices: model.devices,
            cores: model.cores,
            transfer_unit: d,
            horizon: model.horizon_periods * cfg.frame_period_s,
            seed: cfg.seed,
        };
        let sched = new_scheduler(cfg.scheduler, params)?;
        let latency = model.latency.unwrap_or(LatencyModel::Fixed(LatencyTable::preset(cfg.scheduler)));
        Ok(Self {
            latency,
            trace,
            sched,
            events: EventQueue::default(),
            now: 0.0,
            tasks: Vec::new(),
            queue: VecDeque::new(),
            busy: false,
            pending: None,
            next_request: 0,
            link: SharedLink::new(initial_bw),
            link_generation: 0,
            congestion,
            estimate,
            probe: None,
            cores_busy: vec![0; model.devices],
            waiting: vec![VecDeque::new(); model.devices],
            rng: ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_9b0b_e5ca_1ab1),
            log: Vec::new(),
            cfg,
            model,
        })
    }

    pub fn run(mut self) -> RunOutput {
        self.log.push(LogRecord::Run {
            scheduler: self.cfg.scheduler,
            trace: self.cfg.trace.label(),
            seed: self.cfg.seed,
            duration_s: self.cfg.duration_s,
            frame_period_s: self.cfg.frame_period_s,
            bw_interval_s: self.cfg.bw_interval_s,
            duty_cycle: self.cfg.duty_cycle,
            nominal_bw_bps: self.cfg.nominal_bw_bps,
        });
        self.log.push(LogRecord::Bandwidth {
            time: 0.0,
            estimate_bps: self.estimate.value(),
            transfer_unit_s: self.sched.transfer_unit(),
            overflow: 0,
        });
        self.seed_events();
        while let Some(ev) = self.events.pop() {
            self.now = ev.time;
            self.handle(ev);
        }
        self.finish_stragglers();
        let report = aggregate(&self.log);
        RunOutput { log: self.log, report }
    }

    fn seed_events(&mut self) {
        let p = self.cfg.frame_period_s;
        let frames = frames_for(&self.cfg).min(self.trace.len());
        let n = self.model.devices;
        let offsets: Vec<f64> = (0..n)
            .map(|d| match self.model.phase {
                SpawnPhase::Aligned => 0.0,
                SpawnPhase::Staggered => d as f64 * p / n as f64,
                SpawnPhase::Random => self.rng.gen::<f64>() * p,
            })
            .collect();
        for f in 0..frames {
            for (d, offset) in offsets.iter().enumerate() {
                let t = f as f64 * p + offset;
                if t < self.cfg.duration_s {
                    self.events.push(t, EventKind::FrameSpawn, (f * n + d) as u64, 0);
                }
            }
        }
        let interval = self.cfg.bw_interval_s;
        let mut k = 0u64;
        loop {
            let t = k as f64 * interval;
            if t >= self.cfg.duration_s {
                break;
            }
            if let Some(&start) = self.congestion.starts.get(k as usize) {
                if start < self.cfg.duration_s {
                    self.events.push(start, EventKind::TrafficBurstOn, k, 0);
                    self.events.push(start + self.congestion.burst_s, EventKind::TrafficBurstOff, k, 0);
                }
            }
            if k > 0 && self.probes_enabled() {
                self.events.push(t, EventKind::BandwidthProbe, 0, k);
            }
            k += 1;
        }
    }

    /// The baseline keeps its initial estimate unless told to probe.
    fn probes_enabled(&self) -> bool {
        self.cfg.scheduler == crate::sched::SchedulerKind::Ras || self.model.baseline_probes
    }

    fn handle(&mut self, ev: Event) {
        match ev.kind {
            EventKind::TrafficBurstOn | EventKind::TrafficBurstOff => {
                let cap = self.congestion.effective_bandwidth(self.now);
                self.link.set_capacity(self.now, cap);
                self.reschedule_link();
            }
            EventKind::FrameSpawn => self.spawn_frame(ev.subject as usize),
            EventKind::BandwidthProbe if ev.subject == 0 => {
                if self.model.probe_blocks_controller {
                    self.enqueue(Job::Probe, false)
                } else if self.probe.is_none() {
                    self.start_probe()
                }
            }
            EventKind::BandwidthProbe => self.probe_peer(ev.subject as usize - 1),
            EventKind::ProbeEnd => self.finish_probe(),
            EventKind::ControllerDispatch => self.dispatch(),
            EventKind::DecisionEffect => self.apply_effect(),
            EventKind::TransferStart => self.start_transfer(TaskId(ev.subject), ev.generation),
            EventKind::TransferEnd => self.end_transfer(ev.subject, ev.generation),
            EventKind::TaskStart => self.start_task(TaskId(ev.subject), ev.generation),
            EventKind::HpComplete | EventKind::TaskComplete => self.complete_task(TaskId(ev.subject), ev.generation),
            EventKind::DeadlineCheck => self.check_deadline(TaskId(ev.subject)),
            EventKind::LpRequestIssue => self.issue_lp(TaskId(ev.subject)),
        }
    }

    fn task(&mut self, id: TaskId) -> &mut TaskRec {
        &mut self.tasks[id.0 as usize]
    }

    fn new_task(&mut self, frame: usize, source: DeviceId, priority: Priority, deadline: f64) -> TaskId {
        let id = TaskId(self.tasks.len() as u64);
        self.tasks.push(TaskRec {
            frame,
            source,
            priority,
            deadline,
            state: TaskState::Pending,
            generation: 0,
            alloc: None,
            transfer_active: false,
            start: None,
            end: None,
            preemptions: 0,
            requested_at: self.now,
            alloc_latency: None,
            via_preemption: false,
        });
        id
    }

    fn set_state(&mut self, id: TaskId, next: TaskState) {
        let rec = self.task(id);
        debug_assert!(rec.state.can_transition_to(next), "task {id}: {:?} -> {next:?}", rec.state);
        let stopped = rec.state == TaskState::Running && next != TaskState::Running;
        rec.state = next;
        if next.is_terminal() {
            self.log_task(id);
        }
        if stopped {
            let a = self.tasks[id.0 as usize].alloc.expect("running task has an allocation");
            self.cores_busy[a.device.0] -= a.kind.cores();
            self.admit_waiting(a.device.0);
        }
    }

    /// Starts queued tasks on `device` that now fit, oldest first.
    fn admit_waiting(&mut self, device: usize) {
        let queued = std::mem::take(&mut self.waiting[device]);
        for (id, generation) in queued {
            self.start_task(id, generation);
        }
    }

    fn log_task(&mut self, id: TaskId) {
        let rec = &self.tasks[id.0 as usize];
        self.log.push(LogRecord::Task {
            task: id.0,
            frame: rec.frame,
            priority: rec.priority,
            state: rec.state,
            config: rec.alloc.map(|a| a.kind),
            device: rec.alloc.map(|a| a.device.0),
            remote: rec.alloc.is_some_and(|a| a.is_remote()),
            start: rec.start,
            end: rec.end,
            preemptions: rec.preemptions,
            alloc_latency_us: rec.alloc_latency.map(|l| l * 1e6),
            via_preemption: rec.via_preemption,
        });
    }

    fn spawn_frame(&mut self, key: usize) {
        let devices = self.model.devices;
        let (frame, device) = (key / devices, key % devices);
        let value = self.trace.entries[frame].per_device[device];
        if value < 0 {
            return;
        }
        let deadline = self.now + self.model.deadline_s.unwrap_or(self.cfg.frame_period_s);
        let src = DeviceId(device);
        let hp = self.new_task(frame, src, Priority::High, deadline);
        let lps: Vec<TaskId> = (0..value).map(|_| self.new_task(frame, src, Priority::Low, deadline)).collect();
        self.log.push(LogRecord::Frame {
            frame,
            device,
            spawn: self.now,
            requested: value as u8,
            hp_task: hp.0,
            lp_tasks: lps.iter().map(|t| t.0).collect(),
        });
        for t in std::iter::once(hp).chain(lps.iter().copied()) {
            self.events.push(deadline, EventKind::DeadlineCheck, t.0, 0);
        }
        self.enqueue(Job::High(hp), false);
    }

    fn enqueue(&mut self, job: Job, front: bool) {
        let q = Queued { job, enqueued: self.now };
        if front {
            self.queue.push_front(q);
        } else {
            self.queue.push_back(q);
        }
        if !self.busy {
            self.busy = true;
            self.events.push(self.now, EventKind::ControllerDispatch, 0, 0);
        }
    }

    fn fixed(&self, pick: impl Fn(&LatencyTable) -> f64, measured: f64) -> f64 {
        match &self.latency {
            LatencyModel::Fixed(t) => pick(t),
            LatencyModel::Measured => measured,
        }
    }

    fn dispatch(&mut self) {
        let Some(Queued { job, enqueued }) = self.queue.pop_front() else {
            self.busy = false;
            return;
        };
        let now = self.now;
        let request = self.next_request;
        self.next_request += 1;
        let (effect, latency, kind) = match &job {
            Job::High(id) => {
                let rec = &self.tasks[id.0 as usize];
                let req = HpRequest { task: *id, source: rec.source, deadline: rec.deadline };
                let d = self.sched.schedule_high(&req, now);
                let l = self.fixed(|t| t.hp, d.latency);
                (Effect::Decision { job: job.clone(), decision: d, victims: vec![] }, l, JobKind::Hp)
            }
            Job::Low { source, tasks, deadline } => {
                let req = LpRequest { id: request, source: *source, tasks: tasks.clone(), deadline: *deadline, issued: enqueued, reallocation: false };
                let d = self.sched.schedule_low(&req, now);
                let l = self.fixed(|t| t.lp_initial, d.latency);
                (Effect::Decision { job: job.clone(), decision: d, victims: vec![] }, l, JobKind::Lp)
            }
            Job::Realloc(id) => {
                let rec = &self.tasks[id.0 as usize];
                let req = LpRequest { id: request, source: rec.source, tasks: vec![*id], deadline: rec.deadline, issued: enqueued, reallocation: true };
                let d = self.sched.schedule_low(&req, now);
                let l = self.fixed(|t| t.lp_realloc, d.latency);
                (Effect::Decision { job: job.clone(), decision: d, victims: vec![] }, l, JobKind::Realloc)
            }
            Job::Preempt(req) => {
                let out = self.sched.preempt(req, now);
                let l = self.fixed(|t| t.preempt, out.decision.latency);
                (Effect::Decision { job: job.clone(), decision: out.decision, victims: out.victims }, l, JobKind::Preempt)
            }
            Job::Probe => {
                self.start_probe();
                return;
            }
            Job::Rebuild(mean) => {
                self.rebuild(*mean);
                return;
            }
        };
        if let Effect::Decision { decision, victims, .. } = &effect {
            let tasks: Vec<u64> = match &job {
                Job::High(id) | Job::Realloc(id) => vec![id.0],
                Job::Low { tasks, .. } => tasks.iter().map(|t| t.0).collect(),
                Job::Preempt(req) => vec![req.task.0],
                Job::Probe | Job::Rebuild(_) => vec![],
            };
            self.log.push(LogRecord::Decision {
                request,
                job: kind,
                time: now,
                queued_us: (now - enqueued) * 1e6,
                latency_us: latency * 1e6,
                outcome: decision.outcome,
                reason: decision.reason,
                config: decision.config,
                tasks,
                devices: decision.allocations.iter().map(|a| a.device.0).collect(),
                windows: decision.allocations.iter().map(|a| [a.window.t1, a.window.t2]).collect(),
                buckets: decision.allocations.iter().map(|a| a.comm.and_then(|c| c.bucket)).collect(),
                victims: victims.iter().map(|v| v.task.0).collect(),
            });
        }
        self.pending = Some(effect);
        self.events.push(now + latency, EventKind::DecisionEffect, request, 0);
    }

    fn apply_effect(&mut self) {
        let effect = self.pending.take().expect("effect scheduled with a pending decision");
        match effect {
            Effect::Bandwidth { overflow } => {
                for id in overflow {
                    let rec = &self.tasks[id.0 as usize];
                    // Only transfers that have not begun are moved.
                    if rec.state == TaskState::Allocated && rec.alloc.is_some_and(|a| a.is_remote()) && !rec.transfer_active {
                        self.sched.release(id, self.now);
                        self.evict(id);
                    }
                }
            }
            Effect::Decision { job, decision, victims } => {
                for v in victims {
                    self.evict(v.task);
                }
                match job {
                    Job::High(id) => match decision.outcome {
                        Outcome::Allocated => self.start_allocation(id, decision.allocations[0], false),
                        Outcome::PreemptionIssued => {
                            let req = decision.preemption.expect("pre-emption decision carries its request");
                            self.enqueue(Job::Preempt(req), true);
                        }
                        Outcome::Rejected => self.set_state(id, TaskState::Rejected),
                    },
                    Job::Preempt(req) => {
                        if decision.is_allocated() {
                            self.start_allocation(req.task, decision.allocations[0], true);
                        } else {
                            self.set_state(req.task, TaskState::Rejected);
                        }
                    }
                    Job::Low { tasks, .. } => self.apply_lp(&tasks, &decision),
                    Job::Realloc(id) => self.apply_lp(&[id], &decision),
                    Job::Probe | Job::Rebuild(_) => unreachable!("probes use their own effect"),
                }
            }
        }
        if self.queue.is_empty() {
            self.busy = false;
        } else {
            self.events.push(self.now, EventKind::ControllerDispatch, 0, 0);
        }
    }

    fn apply_lp(&mut self, tasks: &[TaskId], decision: &Decision) {
        if decision.is_allocated() {
            for a in &decision.allocations {
                self.start_allocation(a.task, *a, false);
            }
        } else {
            for id in tasks {
                if !self.tasks[id.0 as usize].state.is_terminal() {
                    self.set_state(*id, TaskState::Rejected);
                }
            }
        }
    }

    /// Marks a task's allocation as taken effect and schedules its first
    /// physical step.
    fn start_allocation(&mut self, id: TaskId, alloc: Allocation<f64>, via_preemption: bool) {
        let now = self.now;
        if self.tasks[id.0 as usize].state.is_terminal() {
            return;
        }
        self.set_state(id, TaskState::Allocated);
        let rec = self.task(id);
        rec.alloc = Some(alloc);
        rec.generation += 1;
        if rec.alloc_latency.is_none() {
            rec.alloc_latency = Some(now - rec.requested_at);
            rec.via_preemption = via_preemption;
        }
        let g = rec.generation;
        match alloc.comm {
            Some(c) => self.events.push(c.transfer.t1.max(now), EventKind::TransferStart, id.0, g),
            None => self.events.push(alloc.window.t1.max(now), EventKind::TaskStart, id.0, g),
        }
    }

    /// Takes a task off its device and queues it for reallocation.
    fn evict(&mut self, id: TaskId) {
        let now = self.now;
        let state = self.tasks[id.0 as usize].state;
        if state.is_terminal() || !matches!(state, TaskState::Allocated | TaskState::Running) {
            return;
        }
        if self.tasks[id.0 as usize].transfer_active {
            self.link.remove(now, id.0);
            self.task(id).transfer_active = false;
            self.reschedule_link();
        }
        self.set_state(id, TaskState::Preempted);
        let rec = self.task(id);
        rec.generation += 1;
        rec.preemptions += 1;
        rec.start = None;
        self.enqueue(Job::Realloc(id), false);
    }

    fn start_transfer(&mut self, id: TaskId, generation: u64) {
        let now = self.now;
        let rec = &self.tasks[id.0 as usize];
        if rec.generation != generation || rec.state != TaskState::Allocated {
            return;
        }
        self.task(id).transfer_active = true;
        self.link.add(now, id.0, self.model.image_bits());
        self.reschedule_link();
    }

    fn reschedule_link(&mut self) {
        self.link_generation += 1;
        if let Some((t, flow)) = self.link.next_completion() {
            self.events.push(t.max(self.now), EventKind::TransferEnd, flow, self.link_generation);
        }
    }

    fn end_transfer(&mut self, flow: u64, generation: u64) {
        if generation != self.link_generation {
            return;
        }
        let now = self.now;
        self.link.remove(now, flow);
        self.reschedule_link();
        let id = TaskId(flow);
        let rec = self.task(id);
        rec.transfer_active = false;
        let start = rec.alloc.map_or(now, |a| a.window.t1.max(now));
        let g = rec.generation;
        self.events.push(start, EventKind::TaskStart, id.0, g);
    }

    fn start_task(&mut self, id: TaskId, generation: u64) {
        let now = self.now;
        let rec = &self.tasks[id.0 as usize];
        if rec.generation != generation || rec.state != TaskState::Allocated {
            return;
        }
        let alloc = rec.alloc.expect("allocated task has an allocation");
        let (device, kind) = (alloc.device.0, alloc.kind);
        // A late transfer can leave the reserved cores still in use.
        if self.cores_busy[device] + kind.cores() > self.model.cores {
            self.waiting[device].push_back((id, generation));
            return;
        }
        self.cores_busy[device] += kind.cores();
        let dur = kind.base_duration();
        self.set_state(id, TaskState::Running);
        let rec = self.task(id);
        rec.start = Some(now);
        let g = rec.generation;
        let ev = if rec.priority == Priority::High { EventKind::HpComplete } else { EventKind::TaskComplete };
        self.events.push(now + dur, ev, id.0, g);
    }

    fn complete_task(&mut self, id: TaskId, generation: u64) {
        let now = self.now;
        let rec = &self.tasks[id.0 as usize];
        if rec.generation != generation || rec.state != TaskState::Running {
            return;
        }
        let ok = now <= rec.deadline;
        let high = rec.priority == Priority::High;
        self.task(id).end = Some(now);
        self.set_state(id, if ok { TaskState::Completed } else { TaskState::ViolatedDeadline });
        if ok && high {
            self.events.push(now, EventKind::LpRequestIssue, id.0, 0);
        }
    }

    fn issue_lp(&mut self, hp: TaskId) {
        let rec = &self.tasks[hp.0 as usize];
        let (frame, source, deadline) = (rec.frame, rec.source, rec.deadline);
        let tasks: Vec<TaskId> = self
            .tasks
            .iter()
            .enumerate()
            .skip(hp.0 as usize + 1)
            .take_while(|(_, t)| t.frame == frame && t.source == source && t.priority == Priority::Low)
            .map(|(i, _)| TaskId(i as u64))
            .collect();
        if tasks.is_empty() {
            return;
        }
        let now = self.now;
        for t in &tasks {
            self.task(*t).requested_at = now;
        }
        self.enqueue(Job::Low { source, tasks, deadline }, false);
    }

    fn check_deadline(&mut self, id: TaskId) {
        let now = self.now;
        let state = self.tasks[id.0 as usize].state;
        if !matches!(state, TaskState::Allocated | TaskState::Running | TaskState::Preempted) {
            return;
        }
        if self.tasks[id.0 as usize].transfer_active {
            self.link.remove(now, id.0);
            self.task(id).transfer_active = false;
            self.reschedule_link();
        }
        self.task(id).generation += 1;
        self.set_state(id, TaskState::ViolatedDeadline);
    }

    fn start_probe(&mut self) {
        let now = self.now;
        let host = self.rng.gen_range(0..self.model.devices);
        log::debug!("probe cycle at {now:.3} hosted by device {host}");
        let peers = self.model.devices.saturating_sub(1).max(1);
        self.probe = Some(Probe { peers, means: Vec::with_capacity(peers) });
        self.link.set_probe(now, true);
        self.reschedule_link();
        self.probe_peer(0);
    }

    fn probe_peer(&mut self, index: usize) {
        let now = self.now;
        let count = self.cfg.probe_count as usize;
        let spacing = self.model.ping_spacing_s;
        // Each ping of the batch sees its share of the link as it stands now.
        let contention = (self.link.transfers() + 1) as f64;
        let samples: Vec<f64> =
            (0..count).map(|i| self.congestion.effective_bandwidth(now + i as f64 * spacing) / contention).collect();
        let probe = self.probe.as_mut().expect("probe cycle in progress");
        probe.means.push(samples.iter().sum::<f64>() / samples.len() as f64);
        // A ping returns after two transmissions of its payload.
        let bits = self.cfg.probe_bytes as f64 * 8.0;
        let next = now + samples.iter().map(|b| spacing + 2.0 * bits / b).sum::<f64>();
        if probe.means.len() < probe.peers {
            self.events.push(next, EventKind::BandwidthProbe, index as u64 + 2, 0);
        } else {
            self.events.push(next, EventKind::ProbeEnd, 0, 0);
        }
    }

    fn finish_probe(&mut self) {
        let now = self.now;
        self.link.set_probe(now, false);
        self.reschedule_link();
        let probe = self.probe.take().expect("probe cycle in progress");
        let mean = probe.means.iter().sum::<f64>() / probe.means.len().max(1) as f64;
        if self.model.probe_blocks_controller {
            self.rebuild(mean);
        } else {
            self.enqueue(Job::Rebuild(mean), false);
        }
    }

    fn rebuild(&mut self, mean: f64) {
        let now = self.now;
        let started = Instant::now();
        let mut overflow = Vec::new();
        if let Some(estimate) = self.estimate.update(&[mean], now) {
            match compute_d(self.model.image_bits(), estimate) {
                Ok(d) => overflow = self.sched.set_transfer_unit(d, now),
                Err(e) => log::warn!("skipping bandwidth update: {e}"),
            }
        }
        let l = self.fixed(|t| t.bw_update, started.elapsed().as_secs_f64());
        self.log.push(LogRecord::Bandwidth {
            time: now,
            estimate_bps: self.estimate.value(),
            transfer_unit_s: self.sched.transfer_unit(),
            overflow: overflow.len(),
        });
        self.pending = Some(Effect::Bandwidth { overflow });
        let request = self.next_request;
        self.next_request += 1;
        self.events.push(now + l, EventKind::DecisionEffect, request, 0);
    }

    fn finish_stragglers(&mut self) {
        let open: Vec<TaskId> = (0..self.tasks.len())
            .map(|i| TaskId(i as u64))
            .filter(|id| !self.tasks[id.0 as usize].state.is_terminal())
            .filter(|id| self.tasks[id.0 as usize].state != TaskState::Pending || self.tasks[id.0 as usize].priority == Priority::High)
            .collect();
        for id in open {
            let next = match self.tasks[id.0 as usize].state {
                TaskState::Pending => TaskState::Rejected,
                _ => TaskState::ViolatedDeadline,
            };
            self.set_state(id, next);
        }
    }
}
