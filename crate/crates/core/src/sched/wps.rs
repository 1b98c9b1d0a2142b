use std::collections::HashMap;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::model::{CommReservation, Device};

type Load = (u32, Window<f64>);

/// Peak number of cores in use by `loads` at any instant of `window`.
pub fn max_usage(loads: impl IntoIterator<Item = (u32, Window<f64>)> + Clone, window: &Window<f64>) -> u32 {
    let mut points = vec![window.t1];
    points.extend(
        loads
            .clone()
            .into_iter()
            .filter(|(_, w)| w.overlaps(window) && w.t1 > window.t1)
            .map(|(_, w)| w.t1),
    );
    points
        .into_iter()
        .map(|p| loads.clone().into_iter().filter(|(_, w)| w.contains_instant(p)).map(|(c, _)| c).sum::<u32>())
        .max()
        .unwrap_or(0)
}

/// Earliest start at or after `arrival` where `cores` cores stay free for
/// `dur` seconds, finishing by `deadline`. Starts are tried at `arrival` and
/// at the ends of the first `existing` entries of `loads`, so tasks are not
/// queued behind work placed for the same request.
fn earliest_start(loads: &[Load], existing: usize, total: u32, cores: u32, dur: f64, arrival: f64, deadline: f64) -> Option<f64> {
    let mut candidates: Vec<f64> = std::iter::once(arrival)
        .chain(loads[..existing].iter().map(|(_, w)| w.t2).filter(|t| *t > arrival))
        .collect();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    for s in candidates {
        if s + dur > deadline {
            return None;
        }
        let w = Window { t1: s, t2: s + dur };
        if max_usage(loads.iter().copied(), &w) + cores <= total {
            return Some(s);
        }
    }
    None
}

/// Places one task per entry of `arrivals` on a device, trying every
/// placement order. Returns the windows in the order of `arrivals`.
fn pack(loads: &mut Vec<Load>, total: u32, cores: u32, dur: f64, deadline: f64, arrivals: &[f64]) -> Option<Vec<Window<f64>>> {
    fn go(
        loads: &mut Vec<Load>,
        total: u32,
        cores: u32,
        dur: f64,
        deadline: f64,
        arrivals: &[f64],
        placed: &mut [Option<Window<f64>>],
    ) -> bool {
        let Some(_) = placed.iter().position(Option::is_none) else { return true };
        for i in 0..arrivals.len() {
            if placed[i].is_some() {
                continue;
            }
            // Tasks with equal arrival are interchangeable.
            if (0..i).any(|j| placed[j].is_none() && arrivals[j] == arrivals[i]) {
                continue;
            }
            let mut candidates: Vec<f64> = std::iter::once(arrivals[i])
                .chain(loads.iter().map(|(_, w)| w.t2).filter(|t| *t > arrivals[i]))
                .collect();
            candidates.sort_by(f64::total_cmp);
            candidates.dedup();
            for s in candidates {
                if s + dur > deadline {
                    break;
                }
                let w = Window { t1: s, t2: s + dur };
                if max_usage(loads.iter().copied(), &w) + cores > total {
                    continue;
                }
                loads.push((cores, w));
                placed[i] = Some(w);
                if go(loads, total, cores, dur, deadline, arrivals, placed) {
                    return true;
                }
                placed[i] = None;
                loads.pop();
            }
        }
        false
    }
    let mut placed = vec![None; arrivals.len()];
    let base = loads.len();
    let ok = go(loads, total, cores, dur, deadline, arrivals, &mut placed);
    loads.truncate(base);
    ok.then(|| placed.into_iter().map(Option::unwrap).collect())
}

/// Earliest start of a gap of `d` seconds at or after `from`.
fn earliest_gap(transfers: &[Window<f64>], from: f64, d: f64) -> f64 {
    let mut s = from;
    let mut sorted: Vec<&Window<f64>> = transfers.iter().filter(|t| t.t2 > from).collect();
    sorted.sort_by(|a, b| a.t1.total_cmp(&b.t1));
    for t in sorted {
        if t.t2 <= s {
            continue;
        }
        if t.t1 >= s + d {
            break;
        }
        s = s.max(t.t2);
    }
    s
}

/// All sequences of length `counts.sum()` using label `i` exactly
/// `counts[i]` times.
fn arrangements(counts: &mut Vec<usize>, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if counts.iter().all(|c| *c == 0) {
        out.push(prefix.clone());
        return;
    }
    for i in 0..counts.len() {
        if counts[i] > 0 {
            counts[i] -= 1;
            prefix.push(i);
            arrangements(counts, prefix, out);
            prefix.pop();
            counts[i] += 1;
        }
    }
}

/// All ways to split `n` identical items over `k` bins.
fn compositions(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return if n == 0 { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    for first in (0..=n).rev() {
        for mut rest in compositions(n - first, k - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

struct Placement {
    device: DeviceId,
    window: Window<f64>,
    gap: Option<usize>,
}

/// Scheduler that recomputes exact capacity from raw workloads.
#[derive(Clone, Debug)]
pub struct WpsScheduler {
    params: SchedulerParams,
    devices: Vec<Device<f64>>,
    transfers: Vec<(TaskId, Window<f64>)>,
    d: f64,
    rng: ChaCha8Rng,
    now: f64,
}

impl WpsScheduler {
    pub fn new(params: SchedulerParams) -> Result<Self, ParamError> {
        params.validate()?;
        Ok(Self {
            devices: (0..params.devices).map(|d| Device::new(DeviceId(d), params.cores)).collect(),
            transfers: Vec::new(),
            d: params.transfer_unit,
            rng: ChaCha8Rng::seed_from_u64(params.seed),
            now: 0.0,
            params,
        })
    }

    pub fn transfers(&self) -> &[(TaskId, Window<f64>)] {
        &self.transfers
    }

    fn loads(&self, device: DeviceId) -> Vec<Load> {
        self.devices[device.0].active_workload.iter().map(|a| (a.cores, a.window)).collect()
    }

    /// First `n` free transfer windows from `now`, taken one after another.
    fn gaps(&self, n: usize, now: f64) -> Vec<Window<f64>> {
        let mut busy: Vec<Window<f64>> = self.transfers.iter().map(|(_, w)| *w).collect();
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let s = earliest_gap(&busy, now, self.d);
            let w = Window { t1: s, t2: s + self.d };
            busy.push(w);
            out.push(w);
        }
        out
    }

    fn greedy(&self, req: &LpRequest, kind: ConfigKind, now: f64, remotes: &[DeviceId], gaps: &[Window<f64>]) -> Option<Vec<Placement>> {
        let n = req.tasks.len();
        let cfg = self.params.configs.get(kind);
        let (cores, dur, total) = (cfg.cores, cfg.effective_duration(), self.params.cores);
        let mut out = Vec::with_capacity(n);
        let mut src = self.loads(req.source);
        let src_existing = src.len();
        while out.len() < n {
            let Some(s) = earliest_start(&src, src_existing, total, cores, dur, now, req.deadline) else { break };
            let window = Window { t1: s, t2: s + dur };
            src.push((cores, window));
            out.push(Placement { device: req.source, window, gap: None });
        }
        let mut loads: Vec<Vec<Load>> = remotes.iter().map(|d| self.loads(*d)).collect();
        let existing: Vec<usize> = loads.iter().map(Vec::len).collect();
        let mut open = vec![true; remotes.len()];
        let mut k = 0;
        while out.len() < n && k < gaps.len() && open.iter().any(|o| *o) {
            for (i, dev) in remotes.iter().enumerate() {
                if out.len() == n || k >= gaps.len() || !open[i] {
                    continue;
                }
                match earliest_start(&loads[i], existing[i], total, cores, dur, gaps[k].t2, req.deadline) {
                    Some(s) => {
                        let window = Window { t1: s, t2: s + dur };
                        loads[i].push((cores, window));
                        out.push(Placement { device: *dev, window, gap: Some(k) });
                        k += 1;
                    }
                    None => open[i] = false,
                }
            }
        }
        (out.len() == n).then_some(out)
    }

    /// Tries every split of the tasks over devices and every assignment of
    /// transfer windows to remote tasks.
    fn exhaustive(&self, req: &LpRequest, kind: ConfigKind, now: f64, remotes: &[DeviceId], gaps: &[Window<f64>]) -> Option<Vec<Placement>> {
        let n = req.tasks.len();
        let cfg = self.params.configs.get(kind);
        let (cores, dur, total) = (cfg.cores, cfg.effective_duration(), self.params.cores);
        let mut memo: HashMap<(usize, Vec<u64>), Option<Vec<Window<f64>>>> = HashMap::new();
        let mut try_device = |dev: DeviceId, arrivals: &[f64]| -> Option<Vec<Window<f64>>> {
            let key = (dev.0, arrivals.iter().map(|a| a.to_bits()).collect());
            memo.entry(key)
                .or_insert_with(|| pack(&mut self.loads(dev), total, cores, dur, req.deadline, arrivals))
                .clone()
        };
        for split in compositions(n, remotes.len() + 1) {
            let local = split[0];
            let remote_counts = split[1..].to_vec();
            let r: usize = remote_counts.iter().sum();
            if r > gaps.len() {
                continue;
            }
            let Some(local_windows) = try_device(req.source, &vec![now; local]) else { continue };
            let mut seqs = Vec::new();
            arrangements(&mut remote_counts.clone(), &mut Vec::new(), &mut seqs);
            'seq: for seq in seqs {
                let mut placements: Vec<Placement> = local_windows
                    .iter()
                    .map(|w| Placement { device: req.source, window: *w, gap: None })
                    .collect();
                for (i, dev) in remotes.iter().enumerate() {
                    let ks: Vec<usize> = (0..r).filter(|k| seq[*k] == i).collect();
                    if ks.is_empty() {
                        continue;
                    }
                    let arrivals: Vec<f64> = ks.iter().map(|k| gaps[*k].t2).collect();
                    let Some(ws) = try_device(*dev, &arrivals) else { continue 'seq };
                    placements.extend(ks.iter().zip(ws).map(|(k, w)| Placement { device: *dev, window: w, gap: Some(*k) }));
                }
                return Some(placements);
            }
        }
        None
    }
}

impl Scheduler for WpsScheduler {
    fn kind(&self) -> SchedulerKind {
        SchedulerKind::Wps
    }

    fn advance(&mut self, now: f64) {
        if now < self.now {
            return;
        }
        self.now = now;
        for dev in self.devices.iter_mut() {
            dev.active_workload.retain(|a| a.window.t2 > now);
        }
        self.transfers.retain(|(_, w)| w.t2 > now);
    }

    fn schedule_high(&mut self, req: &HpRequest, now: f64) -> Decision {
        let started = Instant::now();
        self.advance(now);
        let dur = self.params.configs.get(ConfigKind::HighPriority).effective_duration();
        let window = Window { t1: now, t2: now + dur };
        let cores = self.params.configs.get(ConfigKind::HighPriority).cores;
        let mut decision = if window.t2 > req.deadline {
            Decision::rejected(RejectReason::DeadlineInfeasible)
        } else if max_usage(self.loads(req.source), &window) + cores <= self.params.cores {
            let alloc = make_alloc(req.task, req.source, req.source, ConfigKind::HighPriority, &self.params.configs, req.deadline, window);
            self.devices[req.source.0].active_workload.push(alloc);
            Decision::allocated(vec![alloc], Some(ConfigKind::HighPriority))
        } else {
            Decision::preemption(PreemptionRequest { device: req.source, window, task: req.task, deadline: req.deadline })
        };
        decision.latency = started.elapsed().as_secs_f64();
        decision
    }

    fn schedule_low(&mut self, req: &LpRequest, now: f64) -> Decision {
        let started = Instant::now();
        let remotes = shuffled_remotes(self.params.devices, req.source, &mut self.rng);
        if req.validate().is_err() {
            return Decision { latency: started.elapsed().as_secs_f64(), ..Decision::rejected(RejectReason::InvalidRequest) };
        }
        self.advance(now);
        let viable = viable_configs(&self.params.configs, now, req.deadline);
        if viable.is_empty() {
            return Decision { latency: started.elapsed().as_secs_f64(), ..Decision::rejected(RejectReason::DeadlineInfeasible) };
        }
        let gaps = self.gaps(req.tasks.len(), now);
        let found = viable.iter().find_map(|&kind| {
            self.greedy(req, kind, now, &remotes, &gaps)
                .or_else(|| self.exhaustive(req, kind, now, &remotes, &gaps))
                .map(|p| (kind, p))
        });
        let Some((kind, placements)) = found else {
            return Decision { latency: started.elapsed().as_secs_f64(), ..Decision::rejected(RejectReason::InsufficientWindows) };
        };
        let mut allocs: Vec<Allocation<f64>> = placements
            .iter()
            .zip(&req.tasks)
            .map(|(p, task)| {
                let mut a = make_alloc(*task, p.device, req.source, kind, &self.params.configs, req.deadline, p.window);
                a.comm = p.gap.map(|k| CommReservation { bucket: None, transfer: gaps[k] });
                a
            })
            .collect();
        allocs.sort_by_key(|a| a.task);
        for a in &allocs {
            self.devices[a.device.0].active_workload.push(*a);
            if let Some(c) = a.comm {
                self.transfers.push((a.task, c.transfer));
            }
        }
        let mut decision = Decision::allocated(allocs, Some(kind));
        decision.latency = started.elapsed().as_secs_f64();
        decision
    }

    fn preempt(&mut self, req: &PreemptionRequest, now: f64) -> PreemptionOutcome {
        let started = Instant::now();
        self.advance(now);
        let dur = req.window.duration();
        let t1 = req.window.t1.max(now);
        let window = Window { t1, t2: t1 + dur };
        let dev = req.device;
        let cores = self.params.configs.get(ConfigKind::HighPriority).cores;
        let mut victims = Vec::new();
        let mut fits = false;
        if window.t2 <= req.deadline {
            for v in victim_order(&self.devices[dev.0].active_workload, &window) {
                self.devices[dev.0].remove(v.task);
                self.transfers.retain(|(t, _)| *t != v.task);
                victims.push(v);
                if max_usage(self.loads(dev), &window) + cores <= self.params.cores {
                    fits = true;
                    break;
                }
            }
        }
        if !fits {
            for v in victims.drain(..) {
                self.import(v);
            }
            let decision = Decision { latency: started.elapsed().as_secs_f64(), ..Decision::rejected(RejectReason::NoVictim) };
            return PreemptionOutcome { victims, decision };
        }
        let alloc = make_alloc(req.task, dev, dev, ConfigKind::HighPriority, &self.params.configs, req.deadline, window);
        self.devices[dev.0].active_workload.push(alloc);
        let mut decision = Decision::allocated(vec![alloc], Some(ConfigKind::HighPriority));
        decision.latency = started.elapsed().as_secs_f64();
        PreemptionOutcome { victims, decision }
    }

    fn release(&mut self, task: TaskId, _now: f64) -> Option<Allocation<f64>> {
        let dev = self.devices.iter().position(|d| d.active_workload.iter().any(|a| a.task == task))?;
        self.transfers.retain(|(t, _)| *t != task);
        self.devices[dev].remove(task)
    }

    fn set_transfer_unit(&mut self, d: f64, _now: f64) -> Vec<TaskId> {
        if d > 0.0 && d.is_finite() {
            self.d = d;
        } else {
            log::warn!("ignoring invalid transfer unit {d}");
        }
        Vec::new()
    }

    fn transfer_unit(&self) -> f64 {
        self.d
    }

    fn import(&mut self, alloc: Allocation<f64>) {
        if let Some(c) = alloc.comm {
            self.transfers.push((alloc.task, c.transfer));
        }
        self.devices[alloc.device.0].active_workload.push(alloc);
    }

    fn workload(&self, device: DeviceId) -> &[Allocation<f64>] {
        &self.devices[device.0].active_workload
    }

    fn device_count(&self) -> usize {
        self.devices.len()
    }
}
