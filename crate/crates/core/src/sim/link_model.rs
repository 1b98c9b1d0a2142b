//! Physical behaviour of the shared link: background bursts and fair
//! sharing of capacity among concurrent flows.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{ModelParams, SimConfig};

/// Duty-cycled background traffic. Each interval carries one burst whose
/// start is drawn uniformly from the interval, since the traffic source runs
/// independently of the controller's probe timer.
#[derive(Clone, Debug, PartialEq)]
pub struct Congestion {
    pub nominal_bps: f64,
    pub interval_s: f64,
    pub load: f64,
    pub burst_s: f64,
    /// Burst start times, one per interval.
    pub starts: Vec<f64>,
}

impl Congestion {
    /// The burst covers `duty_cycle` of each interval, rounded down to a
    /// whole number of traffic frames.
    pub fn new(cfg: &SimConfig, model: &ModelParams) -> Self {
        let target = cfg.duty_cycle * cfg.bw_interval_s;
        let burst_s = if model.congestion_load > 0.0 {
            let frame_s = cfg.traffic_bytes as f64 * 8.0 / (cfg.nominal_bw_bps * model.congestion_load);
            (target / frame_s).floor() * frame_s
        } else {
            target
        };
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xb0a5_7ed0_7ac0_ffee);
        let intervals = (cfg.duration_s / cfg.bw_interval_s).ceil() as usize + 1;
        let starts = if burst_s > 0.0 {
            (0..intervals)
                .map(|k| {
                    let phase = if model.aligned_bursts { 0.0 } else { rng.gen::<f64>() * cfg.bw_interval_s };
                    k as f64 * cfg.bw_interval_s + phase
                })
                .collect()
        } else {
            Vec::new()
        };
        Self { nominal_bps: cfg.nominal_bw_bps, interval_s: cfg.bw_interval_s, load: model.congestion_load, burst_s, starts }
    }

    pub fn in_burst(&self, t: f64) -> bool {
        if self.burst_s <= 0.0 || t < 0.0 {
            return false;
        }
        let k = (t / self.interval_s).floor() as usize;
        // A burst may spill into the next interval.
        [k.checked_sub(1), Some(k)]
            .into_iter()
            .flatten()
            .filter_map(|i| self.starts.get(i))
            .any(|&s| t >= s && t < s + self.burst_s)
    }

    /// Capacity left for scheduled transfers at time `t`.
    pub fn effective_bandwidth(&self, t: f64) -> f64 {
        if self.in_burst(t) {
            self.nominal_bps * (1.0 - self.load)
        } else {
            self.nominal_bps
        }
    }
}

pub fn effective_bandwidth(t: f64, cfg: &SimConfig, model: &ModelParams) -> f64 {
    Congestion::new(cfg, model).effective_bandwidth(t)
}

/// Processor-sharing link: every active flow gets an equal share.
#[derive(Clone, Debug, Default)]
pub struct SharedLink {
    flows: BTreeMap<u64, f64>,
    probe: bool,
    capacity: f64,
    last: f64,
}

impl SharedLink {
    pub fn new(capacity: f64) -> Self {
        Self { capacity, ..Default::default() }
    }

    fn share(&self) -> f64 {
        let n = self.flows.len() + usize::from(self.probe);
        if n == 0 {
            0.0
        } else {
            self.capacity / n as f64
        }
    }

    fn settle(&mut self, now: f64) {
        let moved = self.share() * (now - self.last).max(0.0);
        for rem in self.flows.values_mut() {
            *rem = (*rem - moved).max(0.0);
        }
        self.last = now;
    }

    pub fn set_capacity(&mut self, now: f64, capacity: f64) {
        self.settle(now);
        self.capacity = capacity;
    }

    pub fn add(&mut self, now: f64, id: u64, bits: f64) {
        self.settle(now);
        self.flows.insert(id, bits);
    }

    pub fn remove(&mut self, now: f64, id: u64) -> bool {
        self.settle(now);
        self.flows.remove(&id).is_some()
    }

    pub fn set_probe(&mut self, now: f64, on: bool) {
        self.settle(now);
        self.probe = on;
    }

    pub fn transfers(&self) -> usize {
        self.flows.len()
    }

    /// Flow that finishes first under current rates, with its finish time.
    pub fn next_completion(&self) -> Option<(f64, u64)> {
        let share = self.share();
        if share <= 0.0 {
            return None;
        }
        self.flows
            .iter()
            .map(|(id, rem)| (self.last + rem / share, *id))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
    }
}
