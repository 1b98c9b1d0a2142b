//! Batches of run configurations for the standard experiments.

use std::fmt;
use std::str::FromStr;

use crate::error::ParamError;
use crate::sched::SchedulerKind;
use crate::sim::{SimConfig, TraceSource};
use crate::trace::TraceKind;

pub const BW_INTERVALS: [f64; 5] = [1.5, 5.0, 10.0, 20.0, 30.0];
pub const DUTY_CYCLES: [f64; 4] = [0.0, 0.25, 0.5, 0.75];
/// Length of the trace slice used by the sweeps.
pub const SWEEP_DURATION_S: f64 = 1800.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Preset {
    /// Both schedulers on every weighted trace.
    Compare,
    /// Probe interval sweep on the heaviest trace.
    BwSweep,
    /// Background-traffic duty cycle sweep.
    CongestionSweep,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Compare, Preset::BwSweep, Preset::CongestionSweep];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Compare => "compare",
            Preset::BwSweep => "bw_sweep",
            Preset::CongestionSweep => "congestion_sweep",
        }
    }

    /// Expands the preset around `base`. Keys the preset does not vary are
    /// taken from `base`.
    pub fn configs(self, base: &SimConfig) -> Vec<SimConfig> {
        match self {
            Preset::Compare => [SchedulerKind::Ras, SchedulerKind::Wps]
                .into_iter()
                .flat_map(|s| {
                    (1..=4).map(move |w| SimConfig {
                        scheduler: s,
                        trace: TraceSource::Generated(TraceKind::Weighted(w)),
                        ..base.clone()
                    })
                })
                .collect(),
            Preset::BwSweep => BW_INTERVALS
                .iter()
                .map(|&i| SimConfig {
                    scheduler: SchedulerKind::Ras,
                    trace: TraceSource::Generated(TraceKind::Weighted(4)),
                    bw_interval_s: i,
                    duration_s: SWEEP_DURATION_S,
                    ..base.clone()
                })
                .collect(),
            Preset::CongestionSweep => DUTY_CYCLES
                .iter()
                .map(|&d| SimConfig {
                    scheduler: SchedulerKind::Ras,
                    trace: TraceSource::Generated(TraceKind::Weighted(4)),
                    bw_interval_s: 30.0,
                    duty_cycle: d,
                    ..base.clone()
                })
                .collect(),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = ParamError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s.trim().replace('-', "_"))
            .ok_or_else(|| ParamError::Invalid(format!("unknown preset '{s}'")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_sizes() {
        let base = SimConfig::default();
        assert_eq!(Preset::Compare.configs(&base).len(), 8);
        let bw = Preset::BwSweep.configs(&base);
        assert_eq!(bw.len(), 5);
        assert!(bw.iter().all(|c| c.duration_s == 1800.0));
        let cg = Preset::CongestionSweep.configs(&base);
        assert_eq!(cg.len(), 4);
        assert!(cg.iter().all(|c| c.bw_interval_s == 30.0));
    }

    #[test]
    fn parse_names() {
        assert_eq!("bw-sweep".parse::<Preset>().unwrap(), Preset::BwSweep);
        assert!("sweep".parse::<Preset>().is_err());
    }
}
