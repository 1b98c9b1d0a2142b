//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use offload::link::NetworkLink;
use offload::model::{Allocation, ConfigKind, DeviceId, Priority, TaskId};
use offload::sched::{HpRequest, LpRequest, Outcome, PreemptionRequest, Scheduler, SchedulerParams};
use offload::Window;
use rand::Rng;

/// First instant where summed core demand exceeds `total`, with the demand
/// there. Windows are half-open.
pub fn overcommit(loads: &[(u32, Window<f64>)], total: u32) -> Option<(f64, u32)> {
    let mut edges: Vec<(f64, i64)> = Vec::with_capacity(loads.len() * 2);
    for (c, w) in loads {
        edges.push((w.t1, *c as i64));
        edges.push((w.t2, -(*c as i64)));
    }
    // Releases sort before acquisitions at the same instant.
    edges.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut used = 0i64;
    for (t, delta) in edges {
        used += delta;
        if used > total as i64 {
            return Some((t, used as u32));
        }
    }
    None
}

pub fn workload_loads(s: &dyn Scheduler, device: usize) -> Vec<(u32, Window<f64>)> {
    s.workload(DeviceId(device)).iter().map(|a| (a.cores, a.window)).collect()
}

/// Bucket index by walking the link: the bucket holding the slot after the
/// one `t_p` falls in. Negative for instants before the anchor.
pub fn scan_index(link: &NetworkLink<f64>, t_p: f64) -> i64 {
    let (t_r, d) = (link.t_r(), link.d());
    if t_p < t_r {
        return ((t_p - t_r) / d).floor() as i64;
    }
    let mut k = 0usize;
    while t_r + (k + 1) as f64 * d <= t_p {
        k += 1;
    }
    let probe = t_r + (k as f64 + 1.5) * d;
    link.buckets()
        .iter()
        .find(|b| b.window.t1 <= probe && probe < b.window.t2)
        .map_or(link.buckets().len() as i64, |b| b.index as i64)
}

/// v_n = (1-a)^n v_0 + sum_k a (1-a)^(n-k) m_k
pub fn ewma_closed_form(initial: f64, alpha: f64, means: &[f64]) -> f64 {
    let n = means.len() as i32;
    let mut v = (1.0 - alpha).powi(n) * initial;
    for (k, m) in means.iter().enumerate() {
        v += alpha * (1.0 - alpha).powi(n - 1 - k as i32) * m;
    }
    v
}

pub fn small_params(rng: &mut impl Rng, devices: usize) -> SchedulerParams {
    SchedulerParams {
        devices,
        transfer_unit: rng.gen_range(0.05..0.8),
        horizon: rng.gen_range(3.0..8.0) * 18.86,
        seed: rng.gen(),
        ..Default::default()
    }
}

pub fn hp_alloc(task: u64, device: usize, t1: f64) -> Allocation<f64> {
    let kind = ConfigKind::HighPriority;
    Allocation {
        task: TaskId(task),
        device: DeviceId(device),
        source: DeviceId(device),
        priority: Priority::High,
        kind,
        cores: kind.cores(),
        deadline: t1 + 18.86,
        window: Window::new(t1, t1 + kind.base_duration()).unwrap(),
        comm: None,
    }
}

/// Drives a scheduler with random requests the way the simulator would.
pub struct Driver {
    pub now: f64,
    pub next_task: u64,
    pub next_request: u64,
    pub devices: usize,
    /// Requests that ended allocated, pre-emption included.
    pub accepted: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Step {
    Hp,
    Lp,
    Release,
    Bandwidth,
}

impl Driver {
    pub fn new(devices: usize) -> Self {
        Self { now: 0.0, next_task: 0, next_request: 0, devices, accepted: 0 }
    }

    fn task(&mut self) -> TaskId {
        self.next_task += 1;
        TaskId(self.next_task - 1)
    }

    pub fn hp_request(&mut self, rng: &mut impl Rng) -> HpRequest {
        let task = self.task();
        HpRequest { task, source: DeviceId(rng.gen_range(0..self.devices)), deadline: self.now + rng.gen_range(0.5..20.0) }
    }

    pub fn lp_request(&mut self, rng: &mut impl Rng, max_tasks: usize) -> LpRequest {
        let n = rng.gen_range(1..=max_tasks.clamp(1, 4));
        let tasks = (0..n).map(|_| self.task()).collect();
        self.next_request += 1;
        LpRequest {
            id: self.next_request,
            source: DeviceId(rng.gen_range(0..self.devices)),
            tasks,
            deadline: self.now + rng.gen_range(10.0..45.0),
            issued: self.now,
            reallocation: false,
        }
    }

    /// Advances time and applies one random step; returns what was done.
    pub fn step(&mut self, s: &mut dyn Scheduler, rng: &mut impl Rng, allow: &[Step]) -> Step {
        self.now += rng.gen_range(0.0..6.0);
        s.advance(self.now);
        let step = allow[rng.gen_range(0..allow.len())];
        match step {
            Step::Hp => {
                let req = self.hp_request(rng);
                let d = s.schedule_high(&req, self.now);
                match d.outcome {
                    Outcome::Allocated => self.accepted += 1,
                    Outcome::PreemptionIssued => {
                        let p: PreemptionRequest = d.preemption.expect("pre-emption request");
                        if s.preempt(&p, self.now).decision.is_allocated() {
                            self.accepted += 1;
                        }
                    }
                    Outcome::Rejected => {}
                }
            }
            Step::Lp => {
                let req = self.lp_request(rng, 4);
                if s.schedule_low(&req, self.now).is_allocated() {
                    self.accepted += 1;
                }
            }
            Step::Release => {
                let all = s.allocations();
                if !all.is_empty() {
                    let pick = all[rng.gen_range(0..all.len())].task;
                    s.release(pick, self.now);
                }
            }
            Step::Bandwidth => {
                let d = rng.gen_range(0.05..1.5);
                for t in s.set_transfer_unit(d, self.now) {
                    s.release(t, self.now);
                }
            }
        }
        step
    }
}
