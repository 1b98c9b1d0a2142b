//! Per-frame workload traces.
//!
//! One line per frame with four comma-separated values in `-1..=4`; lines
//! starting with `#` are comments. `-1` means nothing was detected, `0` a
//! high-priority task only, and `k` a high-priority task followed by a
//! request for `k` low-priority tasks.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LoadError, ParamError};

pub const TRACE_DEVICES: usize = 4;
pub const DEFAULT_DOMINANT_PROBABILITY: f64 = 0.7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub frame: usize,
    pub per_device: [i8; TRACE_DEVICES],
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Trace {
    pub entries: Vec<TraceEntry>,
}

impl Trace {
    pub fn parse(text: &str) -> Result<Self, LoadError> {
        let mut entries = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut per_device = [0i8; TRACE_DEVICES];
            let mut count = 0;
            for field in line.split(',') {
                if count == TRACE_DEVICES {
                    return Err(LoadError::parse(n + 1, "more than four values"));
                }
                let v: i8 = field
                    .trim()
                    .parse()
                    .map_err(|_| LoadError::parse(n + 1, format!("not an integer: {field:?}")))?;
                if !(-1..=4).contains(&v) {
                    return Err(LoadError::parse(n + 1, format!("value {v} outside -1..=4")));
                }
                per_device[count] = v;
                count += 1;
            }
            if count != TRACE_DEVICES {
                return Err(LoadError::parse(n + 1, format!("expected 4 values, found {count}")));
            }
            entries.push(TraceEntry {
                frame: entries.len(),
                per_device,
            });
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self, LoadError> {
        let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let [a, b, c, d] = e.per_device;
            writeln!(out, "{a},{b},{c},{d}").unwrap();
        }
        out
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Workload distribution of a generated trace.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TraceKind {
    /// 1..=4 low-priority tasks with equal probability.
    Uniform,
    /// Mostly `n` low-priority tasks, `n` in 1..=4.
    Weighted(u8),
}

impl TraceKind {
    pub const WEIGHTED: [TraceKind; 4] = [
        TraceKind::Weighted(1),
        TraceKind::Weighted(2),
        TraceKind::Weighted(3),
        TraceKind::Weighted(4),
    ];

    pub fn name(self) -> String {
        match self {
            TraceKind::Uniform => "uniform".into(),
            TraceKind::Weighted(n) => format!("weighted{n}"),
        }
    }

    /// Values `-1..=4` and their probabilities.
    pub fn distribution(self, dominant: f64) -> Vec<(i8, f64)> {
        match self {
            TraceKind::Uniform => (1..=4).map(|v| (v, 0.25)).collect(),
            TraceKind::Weighted(x) => {
                let rest = (1.0 - dominant) / 5.0;
                (-1..=4)
                    .map(|v| (v, if v == x as i8 { dominant } else { rest }))
                    .collect()
            }
        }
    }
}

impl FromStr for TraceKind {
    type Err = ParamError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        if lower == "uniform" {
            return Ok(TraceKind::Uniform);
        }
        if let Some(n) = lower.strip_prefix("weighted") {
            if let Ok(n @ 1..=4) = n.trim_start_matches(['-', '_']).parse::<u8>() {
                return Ok(TraceKind::Weighted(n));
            }
        }
        Err(ParamError::Invalid(format!("unknown trace kind {s:?}")))
    }
}

/// Draws `frames` entries from the kind's distribution. Deterministic in `seed`.
pub fn generate_trace(kind: TraceKind, frames: usize, seed: u64) -> Result<Trace, ParamError> {
    generate_trace_with(kind, frames, seed, DEFAULT_DOMINANT_PROBABILITY)
}

pub fn generate_trace_with(
    kind: TraceKind,
    frames: usize,
    seed: u64,
    dominant: f64,
) -> Result<Trace, ParamError> {
    if frames == 0 {
        return Err(ParamError::NonPositive {
            what: "frame count",
            value: "0".into(),
        });
    }
    if !(0.0..=1.0).contains(&dominant) {
        return Err(ParamError::Invalid(format!(
            "dominant probability {dominant} outside [0, 1]"
        )));
    }
    let dist = kind.distribution(dominant);
    let sampler = WeightedIndex::new(dist.iter().map(|(_, p)| *p))
        .map_err(|e| ParamError::Invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entries = (0..frames)
        .map(|frame| {
            let mut per_device = [0i8; TRACE_DEVICES];
            for v in per_device.iter_mut() {
                *v = dist[sampler.sample(&mut rng)].0;
            }
            TraceEntry { frame, per_device }
        })
        .collect();
    Ok(Trace { entries })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_values() {
        let t = Trace::parse("# header\n0,-1,-1,-1\n\n 4, 3 ,2,1\n").unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.entries[0].per_device, [0, -1, -1, -1]);
        assert_eq!(t.entries[1].per_device, [4, 3, 2, 1]);
        assert_eq!(t.entries[1].frame, 1);
    }

    #[test]
    fn reports_line_numbers() {
        let err = Trace::parse("0,0,0,0\n# ok\n0,5,0,0\n").unwrap_err();
        assert!(matches!(err, LoadError::Parse { line: 3, .. }), "{err}");
        assert!(matches!(Trace::parse("0,0,0").unwrap_err(), LoadError::Parse { line: 1, .. }));
        assert!(matches!(Trace::parse("0,0,0,0,0").unwrap_err(), LoadError::Parse { line: 1, .. }));
        assert!(matches!(Trace::parse("0,x,0,0").unwrap_err(), LoadError::Parse { line: 1, .. }));
    }

    #[test]
    fn text_round_trip() {
        let t = generate_trace(TraceKind::Weighted(3), 50, 9).unwrap();
        assert_eq!(Trace::parse(&t.to_text()).unwrap(), t);
    }

    #[test]
    fn kind_names() {
        assert_eq!("uniform".parse::<TraceKind>().unwrap(), TraceKind::Uniform);
        assert_eq!("Weighted4".parse::<TraceKind>().unwrap(), TraceKind::Weighted(4));
        assert_eq!("weighted-2".parse::<TraceKind>().unwrap(), TraceKind::Weighted(2));
        assert!("weighted5".parse::<TraceKind>().is_err());
        assert_eq!(TraceKind::Weighted(1).name(), "weighted1");
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = generate_trace(TraceKind::Uniform, 200, 42).unwrap().to_text();
        let b = generate_trace(TraceKind::Uniform, 200, 42).unwrap().to_text();
        let c = generate_trace(TraceKind::Uniform, 200, 43).unwrap().to_text();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn zero_frames_rejected() {
        assert!(generate_trace(TraceKind::Uniform, 0, 1).is_err());
    }

    #[test]
    fn uniform_frequencies_within_three_sigma() {
        let frames = 25_000;
        let t = generate_trace(TraceKind::Uniform, frames, 7).unwrap();
        let mut counts = [0usize; 6];
        for e in &t.entries {
            for v in e.per_device {
                counts[(v + 1) as usize] += 1;
            }
        }
        let n = (frames * TRACE_DEVICES) as f64;
        let expect = n * 0.25;
        let sigma = (n * 0.25 * 0.75).sqrt();
        assert_eq!(counts[0] + counts[1], 0, "uniform never emits -1 or 0");
        for c in &counts[2..] {
            assert!((*c as f64 - expect).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn weighted_mode_is_dominant_value() {
        for x in 1..=4u8 {
            let t = generate_trace(TraceKind::Weighted(x), 2_000, 11).unwrap();
            let mut counts = [0usize; 6];
            for e in &t.entries {
                for v in e.per_device {
                    counts[(v + 1) as usize] += 1;
                }
            }
            let mode = (0..6).max_by_key(|&i| counts[i]).unwrap() as i8 - 1;
            assert_eq!(mode, x as i8);
            assert!(counts.iter().all(|&c| c > 0), "every value appears: {counts:?}");
        }
    }
}
