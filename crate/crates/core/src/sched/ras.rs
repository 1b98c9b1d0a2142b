use std::collections::VecDeque;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::availability::DeviceAvailability;
use crate::link::{NetworkLink, BASE_BUCKETS};
use crate::model::{CommReservation, Device};

/// Scheduler backed by availability lists and the discretised link.
#[derive(Clone, Debug)]
pub struct RasScheduler {
    params: SchedulerParams,
    devices: Vec<Device<f64>>,
    avail: Vec<DeviceAvailability<f64>>,
    link: NetworkLink<f64>,
    rng: ChaCha8Rng,
    next_transfer: u64,
    now: f64,
}

struct Placement {
    task: TaskId,
    device: DeviceId,
    window: Window<f64>,
    /// Index into the provisional transfer slots, for remote placements.
    slot: Option<usize>,
}

impl RasScheduler {
    pub fn new(params: SchedulerParams) -> Result<Self, ParamError> {
        params.validate()?;
        let horizon = Window::new(0.0, params.horizon)?;
        let avail = (0..params.devices)
            .map(|d| DeviceAvailability::new(DeviceId(d), params.cores, &params.configs, horizon))
            .collect::<Result<Vec<_>, _>>()?;
        let link = Self::fresh_link(&params, 0.0, params.transfer_unit)?;
        Ok(Self {
            devices: (0..params.devices).map(|d| Device::new(DeviceId(d), params.cores)).collect(),
            avail,
            link,
            rng: ChaCha8Rng::seed_from_u64(params.seed),
            next_transfer: 0,
            now: 0.0,
            params,
        })
    }

    fn fresh_link(params: &SchedulerParams, now: f64, d: f64) -> Result<NetworkLink<f64>, ParamError> {
        NetworkLink::build(now, d, BASE_BUCKETS, NetworkLink::exp_buckets_for(params.horizon, d))
    }

    pub fn availability(&self, device: DeviceId) -> &DeviceAvailability<f64> {
        &self.avail[device.0]
    }

    pub fn link(&self) -> &NetworkLink<f64> {
        &self.link
    }

    /// Fresh lists for `device` built from its current workload.
    pub fn rebuilt_availability(&self, device: DeviceId) -> DeviceAvailability<f64> {
        let dev = &self.devices[device.0];
        let horizon = self.avail[device.0].horizon();
        DeviceAvailability::rebuild(
            device,
            dev.total_cores,
            &self.params.configs,
            dev.active_workload.iter().filter(|a| a.window.t2 > horizon.t1).map(|a| (a.cores, a.window)),
            horizon,
        )
        .expect("horizon was valid when the lists were built")
    }

    fn rebuild_device(&mut self, device: DeviceId) {
        self.avail[device.0] = self.rebuilt_availability(device);
    }

    fn commit(&mut self, alloc: Allocation<f64>) {
        self.avail[alloc.device.0].record_allocation(&alloc.window, alloc.cores);
        self.devices[alloc.device.0].active_workload.push(alloc);
    }

    /// Up to `n` transfer windows, taken in order from a scratch copy of the
    /// link. Nothing is reserved.
    fn provisional_slots(&self, n: usize, now: f64) -> Vec<Window<f64>> {
        let mut scratch = self.link.clone();
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            let Some((idx, _)) = scratch.find_comm_slot(now) else { break };
            match scratch.reserve(idx, TaskId(u64::MAX), u64::MAX - k as u64, now) {
                Ok(w) => out.push(w),
                Err(_) => break,
            }
        }
        out
    }

    fn place(&self, req: &LpRequest, kind: ConfigKind, now: f64, remotes: &[DeviceId], slots: &[Window<f64>]) -> Option<Vec<Placement>> {
        let n = req.tasks.len();
        let dur = self.params.configs.get(kind).effective_duration();
        let source_fits = self.avail[req.source.0].list(kind).fitting_windows(now, req.deadline, dur);
        let mut queues: Vec<VecDeque<Window<f64>>> = match slots.first() {
            Some(first) => remotes
                .iter()
                .map(|d| {
                    self.avail[d.0]
                        .list(kind)
                        .fitting_windows(first.t2, req.deadline, dur)
                        .into_iter()
                        .map(|(r, _)| r.window)
                        .collect()
                })
                .collect(),
            None => vec![VecDeque::new(); remotes.len()],
        };
        let total = source_fits.len() + queues.iter().map(VecDeque::len).sum::<usize>();
        if total < n {
            return None;
        }
        let mut tasks = req.tasks.iter().copied();
        let mut out: Vec<Placement> = source_fits
            .into_iter()
            .take(n)
            .map(|(_, window)| Placement { task: tasks.next().unwrap(), device: req.source, window, slot: None })
            .collect();
        let mut k = 0;
        while out.len() < n && k < slots.len() && queues.iter().any(|q| !q.is_empty()) {
            for (i, dev) in remotes.iter().enumerate() {
                if out.len() == n || k >= slots.len() {
                    break;
                }
                let arrival = slots[k].t2;
                while let Some(w) = queues[i].pop_front() {
                    let start = w.t1.max(arrival);
                    if start + dur <= w.t2 && start + dur <= req.deadline {
                        out.push(Placement {
                            task: tasks.next().unwrap(),
                            device: *dev,
                            window: Window { t1: start, t2: start + dur },
                            slot: Some(k),
                        });
                        k += 1;
                        break;
                    }
                }
            }
        }
        (out.len() == n).then_some(out)
    }
}

impl Scheduler for RasScheduler {
    fn kind(&self) -> SchedulerKind {
        SchedulerKind::Ras
    }

    fn advance(&mut self, now: f64) {
        if now < self.now {
            return;
        }
        self.now = now;
        let span = self.params.horizon;
        for (dev, av) in self.devices.iter_mut().zip(self.avail.iter_mut()) {
            dev.active_workload.retain(|a| a.window.t2 > now);
            av.advance(now, span);
        }
        // Re-anchor the link once a quarter of its horizon has passed.
        let h = self.link.horizon();
        if now - h.t1 > 0.25 * h.duration() {
            let d = self.link.d();
            if let Ok(fresh) = Self::fresh_link(&self.params, now, d) {
                self.link = self.link.cascade_into(fresh).0;
            }
        }
    }

    fn schedule_high(&mut self, req: &HpRequest, now: f64) -> Decision {
        let started = Instant::now();
        self.advance(now);
        let dur = self.params.configs.get(ConfigKind::HighPriority).effective_duration();
        let window = Window { t1: now, t2: now + dur };
        let mut decision = if window.t2 > req.deadline {
            Decision::rejected(RejectReason::DeadlineInfeasible)
        } else if self.avail[req.source.0].list(ConfigKind::HighPriority).find_window(&window).is_some() {
            let alloc = make_alloc(req.task, req.source, req.source, ConfigKind::HighPriority, &self.params.configs, req.deadline, window);
            Decision::allocated(vec![alloc], Some(ConfigKind::HighPriority))
        } else {
            Decision::preemption(PreemptionRequest { device: req.source, window, task: req.task, deadline: req.deadline })
        };
        decision.latency = started.elapsed().as_secs_f64();
        for a in decision.allocations.clone() {
            self.commit(a);
        }
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
        let slots = self.provisional_slots(req.tasks.len(), now);
        let found = viable
            .iter()
            .find_map(|&kind| self.place(req, kind, now, &remotes, &slots).map(|p| (kind, p)));
        let Some((kind, placements)) = found else {
            return Decision { latency: started.elapsed().as_secs_f64(), ..Decision::rejected(RejectReason::InsufficientWindows) };
        };

        let mut allocs = Vec::with_capacity(placements.len());
        let mut ordered: Vec<&Placement> = placements.iter().collect();
        ordered.sort_by_key(|p| p.slot.unwrap_or(usize::MAX));
        for p in ordered {
            let mut a = make_alloc(p.task, p.device, req.source, kind, &self.params.configs, req.deadline, p.window);
            if p.slot.is_some() {
                let (idx, _) = self.link.find_comm_slot(now).expect("provisional slot exists");
                let transfer = self.link.reserve(idx, p.task, self.next_transfer, now).expect("slot was just found");
                self.next_transfer += 1;
                debug_assert!(transfer.t2 <= p.window.t1);
                a.comm = Some(CommReservation { bucket: Some(idx), transfer });
            }
            allocs.push(a);
        }
        allocs.sort_by_key(|a| a.task);
        let mut decision = Decision::allocated(allocs, Some(kind));
        decision.latency = started.elapsed().as_secs_f64();
        // Write-through runs after the decision is returned to the caller.
        for a in decision.allocations.clone() {
            self.commit(a);
        }
        decision
    }

    fn preempt(&mut self, req: &PreemptionRequest, now: f64) -> PreemptionOutcome {
        let started = Instant::now();
        self.advance(now);
        let dur = req.window.duration();
        let t1 = req.window.t1.max(now);
        let window = Window { t1, t2: t1 + dur };
        let dev = req.device;
        let mut victims = Vec::new();
        let mut fits = false;
        if window.t2 <= req.deadline {
            for v in victim_order(&self.devices[dev.0].active_workload, &window) {
                self.devices[dev.0].remove(v.task);
                self.link.release(v.task);
                victims.push(v);
                self.rebuild_device(dev);
                if self.avail[dev.0].list(ConfigKind::HighPriority).find_window(&window).is_some() {
                    fits = true;
                    break;
                }
            }
        }
        if !fits {
            // Nothing evicted made room: put the workload back as it was.
            for v in victims.drain(..) {
                self.devices[dev.0].active_workload.push(v);
                if let Some(c) = v.comm {
                    self.reinsert_transfer(v.task, c.transfer);
                }
            }
            self.rebuild_device(dev);
            let decision = Decision { latency: started.elapsed().as_secs_f64(), ..Decision::rejected(RejectReason::NoVictim) };
            return PreemptionOutcome { victims, decision };
        }
        let alloc = make_alloc(req.task, dev, dev, ConfigKind::HighPriority, &self.params.configs, req.deadline, window);
        let mut decision = Decision::allocated(vec![alloc], Some(ConfigKind::HighPriority));
        decision.latency = started.elapsed().as_secs_f64();
        self.commit(alloc);
        PreemptionOutcome { victims, decision }
    }

    fn release(&mut self, task: TaskId, _now: f64) -> Option<Allocation<f64>> {
        let dev = self.devices.iter().position(|d| d.active_workload.iter().any(|a| a.task == task))?;
        let a = self.devices[dev].remove(task)?;
        self.link.release(task);
        self.rebuild_device(DeviceId(dev));
        Some(a)
    }

    fn set_transfer_unit(&mut self, d: f64, now: f64) -> Vec<TaskId> {
        let Ok(fresh) = Self::fresh_link(&self.params, now.max(self.now), d) else {
            log::warn!("ignoring invalid transfer unit {d}");
            return Vec::new();
        };
        let (link, report) = self.link.cascade_into(fresh);
        self.link = link;
        report.overflow.iter().map(|o| o.task).collect()
    }

    fn transfer_unit(&self) -> f64 {
        self.link.d()
    }

    fn import(&mut self, alloc: Allocation<f64>) {
        if let Some(c) = alloc.comm {
            self.reinsert_transfer(alloc.task, c.transfer);
        }
        self.commit(alloc);
    }

    fn workload(&self, device: DeviceId) -> &[Allocation<f64>] {
        &self.devices[device.0].active_workload
    }

    fn device_count(&self) -> usize {
        self.devices.len()
    }
}

impl RasScheduler {
    /// Puts an existing transfer back on the link in the bucket its start
    /// time maps to.
    fn reinsert_transfer(&mut self, task: TaskId, transfer: Window<f64>) {
        let id = self.next_transfer;
        self.next_transfer += 1;
        self.link.insert_occupant(crate::link::Occupant { task, transfer: id, window: transfer });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Priority;

    fn sched() -> RasScheduler {
        RasScheduler::new(SchedulerParams { seed: 7, ..Default::default() }).unwrap()
    }

    fn lp(id: u64, src: usize, n: u64, deadline: f64) -> LpRequest {
        LpRequest { id, source: DeviceId(src), tasks: (0..n).map(|k| TaskId(100 * id + k)).collect(), deadline, issued: 0.0, reallocation: false }
    }

    #[test]
    fn hp_on_idle_device() {
        let mut s = sched();
        let d = s.schedule_high(&HpRequest { task: TaskId(1), source: DeviceId(0), deadline: 18.86 }, 0.0);
        assert_eq!(d.outcome, Outcome::Allocated);
        assert_eq!(d.allocations[0].window, Window::new(0.0, 0.98).unwrap());
        assert_eq!(d.allocations[0].priority, Priority::High);
    }

    #[test]
    fn hp_preempts_when_booked() {
        let mut s = sched();
        for k in 0..2 {
            s.import(make_alloc(TaskId(10 + k), DeviceId(0), DeviceId(0), ConfigKind::LowPriority2Core, &ConfigTable::default(), 30.0, Window::new(0.0, 16.862).unwrap()));
        }
        let d = s.schedule_high(&HpRequest { task: TaskId(1), source: DeviceId(0), deadline: 18.86 }, 0.0);
        assert_eq!(d.outcome, Outcome::PreemptionIssued);
        assert_eq!(d.preemption.unwrap().window, Window::new(0.0, 0.98).unwrap());
    }

    #[test]
    fn hp_uses_free_track() {
        let mut s = sched();
        for k in 0..3 {
            s.import(make_alloc(TaskId(10 + k), DeviceId(0), DeviceId(0), ConfigKind::HighPriority, &ConfigTable::default(), 30.0, Window::new(0.0, 0.98).unwrap()));
        }
        let d = s.schedule_high(&HpRequest { task: TaskId(1), source: DeviceId(0), deadline: 18.86 }, 0.0);
        assert_eq!(d.outcome, Outcome::Allocated);
    }

    #[test]
    fn two_tasks_stay_local() {
        let mut s = sched();
        let d = s.schedule_low(&lp(1, 0, 2, 40.0), 0.0);
        assert_eq!(d.outcome, Outcome::Allocated);
        assert_eq!(d.config, Some(ConfigKind::LowPriority2Core));
        assert!(d.allocations.iter().all(|a| a.device == DeviceId(0) && a.comm.is_none()));
        assert_eq!(s.link().occupant_count(), 0);
    }

    #[test]
    fn four_tasks_spread_to_distinct_remotes() {
        let mut s = sched();
        let d = s.schedule_low(&lp(1, 0, 4, 40.0), 0.0);
        assert_eq!(d.outcome, Outcome::Allocated);
        let remote: Vec<_> = d.allocations.iter().filter(|a| a.is_remote()).collect();
        assert_eq!(remote.len(), 2);
        assert_ne!(remote[0].device, remote[1].device);
        assert_eq!(s.link().occupant_count(), 2);
        let configs = ConfigTable::default();
        for a in &d.allocations {
            assert!(a.is_consistent(configs.get(a.kind)), "{a:?}");
        }
    }

    #[test]
    fn infeasible_deadline_rejected_early() {
        let mut s = sched();
        let d = s.schedule_low(&lp(1, 0, 1, 11.0), 0.0);
        assert_eq!(d.reason, Some(RejectReason::DeadlineInfeasible));
    }

    #[test]
    fn preemption_picks_latest_deadline() {
        let mut s = sched();
        let c = ConfigTable::default();
        s.import(make_alloc(TaskId(10), DeviceId(0), DeviceId(0), ConfigKind::LowPriority2Core, &c, 50.0, Window::new(0.0, 16.862).unwrap()));
        s.import(make_alloc(TaskId(11), DeviceId(0), DeviceId(0), ConfigKind::LowPriority2Core, &c, 80.0, Window::new(0.0, 16.862).unwrap()));
        let req = PreemptionRequest { device: DeviceId(0), window: Window::new(0.0, 0.98).unwrap(), task: TaskId(1), deadline: 18.86 };
        let out = s.preempt(&req, 0.0);
        assert_eq!(out.victims.len(), 1);
        assert_eq!(out.victims[0].task, TaskId(11));
        assert!(out.decision.is_allocated());
        assert_eq!(*s.availability(DeviceId(0)), s.rebuilt_availability(DeviceId(0)));
    }

    #[test]
    fn preemption_without_lp_work_fails() {
        let mut s = sched();
        let c = ConfigTable::default();
        for k in 0..4 {
            s.import(make_alloc(TaskId(10 + k), DeviceId(0), DeviceId(0), ConfigKind::HighPriority, &c, 50.0, Window::new(0.0, 0.98).unwrap()));
        }
        let req = PreemptionRequest { device: DeviceId(0), window: Window::new(0.0, 0.98).unwrap(), task: TaskId(1), deadline: 18.86 };
        let out = s.preempt(&req, 0.0);
        assert!(out.victims.is_empty());
        assert_eq!(out.decision.reason, Some(RejectReason::NoVictim));
        assert_eq!(s.workload(DeviceId(0)).len(), 4);
    }

    #[test]
    fn release_frees_capacity() {
        let mut s = sched();
        let d = s.schedule_low(&lp(1, 0, 4, 40.0), 0.0);
        for a in &d.allocations {
            assert!(s.release(a.task, 0.0).is_some());
        }
        assert!(s.allocations().is_empty());
        assert_eq!(s.link().occupant_count(), 0);
        assert_eq!(*s.availability(DeviceId(0)), s.rebuilt_availability(DeviceId(0)));
    }
}
