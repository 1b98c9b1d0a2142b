//! Guaranteed-availability windows for device compute capacity.
//!
//! Each device keeps one [`AvailabilityList`] per task configuration. A list
//! with minimum core capacity `j` on an `n`-core device has `n / j` tracks;
//! every window stored on a track guarantees that `j` cores are free for the
//! whole window, and that the window is at least as long as the
//! configuration's processing time. Queries are containment checks with an
//! early exit; allocations are written through to every list of the device.
//!
//! Write-through removes, at every instant covered by the allocated slot,
//! `ceil(cores / j)` free tracks (lowest track index first). This keeps the
//! per-instant number of free tracks at or below `floor(free_cores / j)`,
//! which is what makes any window returned by a query safe to use.

use std::fmt::Write as _;

use crate::error::ParamError;
use crate::model::{ConfigKind, ConfigTable, DeviceId, TaskConfig};
use crate::scalar::Scalar;
use crate::window::Window;

/// A window located in a list: its track, its position on the track, and
/// its bounds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WindowRef<T = f64> {
    pub track: usize,
    pub index: usize,
    pub window: Window<T>,
}

/// Surviving fragments of a bisected window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bisection<T = f64> {
    pub left: Option<Window<T>>,
    pub right: Option<Window<T>>,
}

impl<T: Scalar> Bisection<T> {
    pub fn iter(&self) -> impl Iterator<Item = Window<T>> + '_ {
        self.left.iter().chain(self.right.iter()).copied()
    }

    pub fn len(&self) -> usize {
        self.left.is_some() as usize + self.right.is_some() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Splits `window` around `slot`, keeping the left and right remnants that
/// are at least `min_duration` long.
pub fn bisect<T: Scalar>(
    window: &Window<T>,
    slot: &Window<T>,
    min_duration: T,
) -> Result<Bisection<T>, ParamError> {
    if !window.contains(slot) {
        return Err(ParamError::Invalid(format!(
            "slot {slot} is not contained in window {window}"
        )));
    }
    let keep = |t1: T, t2: T| (t1 < t2 && t2 - t1 >= min_duration).then_some(Window { t1, t2 });
    Ok(Bisection {
        left: keep(window.t1, slot.t1),
        right: keep(slot.t2, window.t2),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct AvailabilityList<T = f64> {
    device: DeviceId,
    kind: ConfigKind,
    min_cores: u32,
    min_duration: T,
    /// End of the tracked horizon. A remnant reaching it may still grow, so
    /// it is kept even when short.
    end: T,
    tracks: Vec<Vec<Window<T>>>,
}

impl<T: Scalar> AvailabilityList<T> {
    /// Fully available list: every track holds exactly `horizon`.
    pub fn new_full(
        device: DeviceId,
        total_cores: u32,
        config: &TaskConfig<T>,
        horizon: Window<T>,
    ) -> Result<Self, ParamError> {
        if config.cores == 0 || total_cores % config.cores != 0 {
            return Err(ParamError::IndivisibleCores {
                cores: total_cores,
                per_track: config.cores,
            });
        }
        Self::with_tracks(
            device,
            config.kind,
            config.cores,
            config.effective_duration(),
            (total_cores / config.cores) as usize,
            horizon,
        )
    }

    /// Fully available list with explicit parameters.
    pub fn with_tracks(
        device: DeviceId,
        kind: ConfigKind,
        min_cores: u32,
        min_duration: T,
        track_count: usize,
        horizon: Window<T>,
    ) -> Result<Self, ParamError> {
        if horizon.duration() < min_duration {
            return Err(ParamError::HorizonTooShort {
                horizon: horizon.duration().to_string(),
                min: min_duration.to_string(),
            });
        }
        if min_cores == 0 || track_count == 0 {
            return Err(ParamError::Invalid("list needs at least one track of one core".into()));
        }
        Ok(Self {
            device,
            kind,
            min_cores,
            min_duration,
            end: horizon.t2,
            tracks: vec![vec![horizon]; track_count],
        })
    }

    pub fn device(&self) -> DeviceId {
        self.device
    }

    pub fn kind(&self) -> ConfigKind {
        self.kind
    }

    pub fn min_cores(&self) -> u32 {
        self.min_cores
    }

    pub fn min_duration(&self) -> T {
        self.min_duration
    }

    pub fn track_count(&self) -> usize {
        self.tracks.len()
    }

    pub fn tracks(&self) -> &[Vec<Window<T>>] {
        &self.tracks
    }

    pub fn window_count(&self) -> usize {
        self.tracks.iter().map(Vec::len).sum()
    }

    fn iter_refs(&self) -> impl Iterator<Item = WindowRef<T>> + '_ {
        self.tracks.iter().enumerate().flat_map(|(track, ws)| {
            ws.iter()
                .enumerate()
                .map(move |(index, &window)| WindowRef { track, index, window })
        })
    }

    /// First window (track order, then time order) containing `desired`.
    pub fn find_window(&self, desired: &Window<T>) -> Option<WindowRef<T>> {
        for (track, ws) in self.tracks.iter().enumerate() {
            for (index, w) in ws.iter().enumerate() {
                if w.t1 > desired.t1 {
                    break;
                }
                if w.contains(desired) {
                    return Some(WindowRef { track, index, window: *w });
                }
            }
        }
        None
    }

    /// Every window that can host `duration` seconds of work starting no
    /// earlier than `arrival` and ending by `deadline`, paired with the
    /// earliest such slot inside it.
    pub fn fitting_windows(
        &self,
        arrival: T,
        deadline: T,
        duration: T,
    ) -> Vec<(WindowRef<T>, Window<T>)> {
        self.iter_refs()
            .filter_map(|r| fit_in(&r.window, arrival, deadline, duration).map(|s| (r, s)))
            .collect()
    }

    /// First window hosting the work per [`Self::fitting_windows`].
    pub fn find_fit(
        &self,
        arrival: T,
        deadline: T,
        duration: T,
    ) -> Option<(WindowRef<T>, Window<T>)> {
        self.iter_refs()
            .find_map(|r| fit_in(&r.window, arrival, deadline, duration).map(|s| (r, s)))
    }

    /// Removes `slot` from `ceil(cores / min_cores)` tracks at every instant
    /// it covers, scanning tracks in index order, and drops remnants shorter
    /// than the minimum duration unless they reach the horizon end.
    pub fn subtract(&mut self, slot: &Window<T>, cores: u32) {
        let lanes = (cores.div_ceil(self.min_cores) as usize).min(self.tracks.len());
        if lanes == 0 {
            return;
        }
        let mut pending: Vec<(Window<T>, usize)> = vec![(*slot, lanes)];
        let (min, end) = (self.min_duration, self.end);
        for track in self.tracks.iter_mut() {
            if pending.is_empty() {
                break;
            }
            let mut cuts: Vec<Window<T>> = Vec::new();
            for w in track.iter() {
                for (p, _) in &pending {
                    if let Some(x) = w.intersection(p) {
                        cuts.push(x);
                    }
                }
            }
            if cuts.is_empty() {
                continue;
            }
            cuts.sort_by(|a, b| a.t1.partial_cmp(&b.t1).unwrap());
            *track = carve(track, &cuts, min, end);
            pending = consume(pending, &cuts);
        }
    }

    /// Forgets availability before `t`: windows are clipped to start no
    /// earlier than `t` and remnants that become too short are dropped.
    pub fn prune_before(&mut self, t: T) {
        let (min, end) = (self.min_duration, self.end);
        for track in self.tracks.iter_mut() {
            track.retain_mut(|w| {
                w.t1 = w.t1.max(t);
                w.t2 > w.t1 && (w.duration() >= min || w.t2 == end)
            });
        }
    }

    /// Extends the horizon from `old_end` to `new_end`: windows touching the
    /// old end grow, other tracks gain a fresh window.
    pub fn extend(&mut self, old_end: T, new_end: T) {
        if new_end <= old_end {
            return;
        }
        self.end = new_end;
        for track in self.tracks.iter_mut() {
            match track.last_mut() {
                Some(last) if last.t2 == old_end => last.t2 = new_end,
                _ => {
                    if new_end - old_end >= self.min_duration {
                        track.push(Window { t1: old_end, t2: new_end });
                    }
                }
            }
        }
    }

    /// Windows as `(track, window)` pairs in scan order.
    pub fn windows(&self) -> Vec<(usize, Window<T>)> {
        self.iter_refs().map(|r| (r.track, r.window)).collect()
    }

    /// Checks ordering, disjointness and minimum duration on every track.
    pub fn check_invariants(&self) -> Result<(), String> {
        for (i, track) in self.tracks.iter().enumerate() {
            for w in track {
                if !(w.t1 < w.t2) || (w.duration() < self.min_duration && w.t2 != self.end) {
                    return Err(format!("{} track {i}: window {w} too short", self.kind.label()));
                }
            }
            for pair in track.windows(2) {
                if pair[0].t2 > pair[1].t1 {
                    return Err(format!(
                        "{} track {i}: {} and {} out of order or overlapping",
                        self.kind.label(),
                        pair[0],
                        pair[1]
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn dump(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "device {} {} min_cores={} min_duration={} tracks={}",
            self.device.0,
            self.kind.label(),
            self.min_cores,
            self.min_duration,
            self.tracks.len()
        )
        .unwrap();
        for (i, track) in self.tracks.iter().enumerate() {
            write!(out, "  track {i}:").unwrap();
            for w in track {
                write!(out, " {w}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

fn fit_in<T: Scalar>(w: &Window<T>, arrival: T, deadline: T, duration: T) -> Option<Window<T>> {
    let start = w.t1.max(arrival);
    let end = start + duration;
    (end <= w.t2 && end <= deadline).then_some(Window { t1: start, t2: end })
}

/// Removes the sorted, disjoint `cuts` from a track and keeps remnants of at
/// least `min` seconds or reaching `end`.
fn carve<T: Scalar>(track: &[Window<T>], cuts: &[Window<T>], min: T, end: T) -> Vec<Window<T>> {
    let mut out = Vec::with_capacity(track.len() + cuts.len());
    for w in track {
        let mut cursor = w.t1;
        for c in cuts.iter().filter(|c| c.overlaps(w)) {
            if c.t1 > cursor && c.t1 - cursor >= min {
                out.push(Window { t1: cursor, t2: c.t1 });
            }
            cursor = cursor.max(c.t2);
        }
        if w.t2 > cursor && (w.t2 - cursor >= min || w.t2 == end) {
            out.push(Window { t1: cursor, t2: w.t2 });
        }
    }
    out
}

/// Decrements the remaining lane count of `pending` over each cut and drops
/// intervals whose count reaches zero.
fn consume<T: Scalar>(pending: Vec<(Window<T>, usize)>, cuts: &[Window<T>]) -> Vec<(Window<T>, usize)> {
    let mut out = Vec::with_capacity(pending.len() + 2 * cuts.len());
    for (p, n) in pending {
        let mut cursor = p.t1;
        for c in cuts.iter().filter(|c| c.overlaps(&p)) {
            let lo = c.t1.max(p.t1);
            let hi = c.t2.min(p.t2);
            if lo > cursor {
                out.push((Window { t1: cursor, t2: lo }, n));
            }
            if n > 1 {
                out.push((Window { t1: lo, t2: hi }, n - 1));
            }
            cursor = cursor.max(hi);
        }
        if p.t2 > cursor {
            out.push((Window { t1: cursor, t2: p.t2 }, n));
        }
    }
    out
}

/// The three availability lists of one device.
#[derive(Clone, Debug, PartialEq)]
pub struct DeviceAvailability<T = f64> {
    device: DeviceId,
    total_cores: u32,
    horizon: Window<T>,
    lists: Vec<AvailabilityList<T>>,
}

impl<T: Scalar> DeviceAvailability<T> {
    pub fn new(
        device: DeviceId,
        total_cores: u32,
        configs: &ConfigTable<T>,
        horizon: Window<T>,
    ) -> Result<Self, ParamError> {
        let lists = configs
            .iter()
            .map(|c| AvailabilityList::new_full(device, total_cores, c, horizon))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            device,
            total_cores,
            horizon,
            lists,
        })
    }

    /// Fresh lists over `horizon` with every `(cores, slot)` of the workload
    /// written in order.
    pub fn rebuild<I>(
        device: DeviceId,
        total_cores: u32,
        configs: &ConfigTable<T>,
        workload: I,
        horizon: Window<T>,
    ) -> Result<Self, ParamError>
    where
        I: IntoIterator<Item = (u32, Window<T>)>,
    {
        let mut fresh = Self::new(device, total_cores, configs, horizon)?;
        for (cores, slot) in workload {
            fresh.record_allocation(&slot, cores);
        }
        Ok(fresh)
    }

    pub fn device(&self) -> DeviceId {
        self.device
    }

    pub fn total_cores(&self) -> u32 {
        self.total_cores
    }

    pub fn horizon(&self) -> Window<T> {
        self.horizon
    }

    pub fn list(&self, kind: ConfigKind) -> &AvailabilityList<T> {
        &self.lists[kind.index()]
    }

    pub fn lists(&self) -> &[AvailabilityList<T>] {
        &self.lists
    }

    /// Writes an allocated slot through every list of the device.
    pub fn record_allocation(&mut self, slot: &Window<T>, cores: u32) {
        for list in self.lists.iter_mut() {
            list.subtract(slot, cores);
        }
    }

    /// Keeps the horizon at least `span` seconds ahead of `now` and forgets
    /// windows that are already over.
    pub fn advance(&mut self, now: T, span: T) {
        for list in self.lists.iter_mut() {
            list.prune_before(now);
        }
        let wanted = now + span;
        if wanted > self.horizon.t2 {
            for list in self.lists.iter_mut() {
                list.extend(self.horizon.t2, wanted);
            }
            self.horizon.t2 = wanted;
        }
        if now > self.horizon.t1 {
            self.horizon.t1 = now.min(self.horizon.t2);
        }
    }

    pub fn check_invariants(&self) -> Result<(), String> {
        self.lists.iter().try_for_each(AvailabilityList::check_invariants)
    }

    pub fn dump(&self) -> String {
        self.lists.iter().map(AvailabilityList::dump).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn w(a: f64, b: f64) -> Window<f64> {
        Window::new(a, b).unwrap()
    }

    fn cfg(kind: ConfigKind) -> TaskConfig<f64> {
        TaskConfig::standard(kind)
    }

    #[test]
    fn track_counts_follow_core_division() {
        let h = w(0.0, 1000.0);
        let d = DeviceId(0);
        let lp2 = AvailabilityList::new_full(d, 4, &cfg(ConfigKind::LowPriority2Core), h).unwrap();
        assert_eq!(lp2.track_count(), 2);
        assert!(lp2.tracks().iter().all(|t| t == &vec![h]));
        let lp4 = AvailabilityList::new_full(d, 4, &cfg(ConfigKind::LowPriority4Core), h).unwrap();
        assert_eq!(lp4.track_count(), 1);
        let hp = AvailabilityList::new_full(d, 4, &cfg(ConfigKind::HighPriority), h).unwrap();
        assert_eq!(hp.track_count(), 4);
    }

    #[test]
    fn construction_errors() {
        let d = DeviceId(0);
        let short = w(0.0, 10.0);
        assert!(matches!(
            AvailabilityList::new_full(d, 4, &cfg(ConfigKind::LowPriority2Core), short),
            Err(ParamError::HorizonTooShort { .. })
        ));
        assert!(matches!(
            AvailabilityList::new_full(d, 6, &cfg(ConfigKind::LowPriority4Core), w(0.0, 100.0)),
            Err(ParamError::IndivisibleCores { .. })
        ));
    }

    #[test]
    fn find_window_cases() {
        let d = DeviceId(0);
        let mut list = AvailabilityList::with_tracks(d, ConfigKind::LowPriority2Core, 2, 5.0, 1, w(0.0, 100.0)).unwrap();
        let hit = list.find_window(&w(10.0, 26.862)).unwrap();
        assert_eq!((hit.track, hit.window), (0, w(0.0, 100.0)));

        list = AvailabilityList::with_tracks(d, ConfigKind::LowPriority2Core, 2, 5.0, 2, w(0.0, 100.0)).unwrap();
        list.tracks[0] = vec![w(0.0, 5.0)];
        let hit = list.find_window(&w(10.0, 30.0)).unwrap();
        assert_eq!((hit.track, hit.window), (1, w(0.0, 100.0)));

        list.tracks = vec![vec![], vec![]];
        assert!(list.find_window(&w(0.0, 10.0)).is_none());
    }

    #[test]
    fn bisect_cases() {
        let b = bisect(&w(0.0, 100.0), &w(10.0, 30.0), 5.0).unwrap();
        assert_eq!(b.iter().collect::<Vec<_>>(), vec![w(0.0, 10.0), w(30.0, 100.0)]);
        assert!(bisect(&w(0.0, 100.0), &w(0.0, 100.0), 5.0).unwrap().is_empty());
        let b = bisect(&w(0.0, 20.0), &w(5.0, 18.0), 5.0).unwrap();
        assert_eq!(b.iter().collect::<Vec<_>>(), vec![w(0.0, 5.0)]);
        assert!(bisect(&w(0.0, 20.0), &w(15.0, 25.0), 5.0).is_err());
    }

    #[test]
    fn write_through_example() {
        let configs = ConfigTable::<f64>::default();
        let mut dev = DeviceAvailability::new(DeviceId(0), 4, &configs, w(0.0, 100.0)).unwrap();
        dev.record_allocation(&w(10.0, 26.9), 2);
        let lp2 = dev.list(ConfigKind::LowPriority2Core);
        // [0,10) is shorter than the LP2 minimum, so only the right remnant survives.
        assert_eq!(lp2.tracks()[0], vec![w(26.9, 100.0)]);
        assert_eq!(lp2.tracks()[1], vec![w(0.0, 100.0)]);
        let lp4 = dev.list(ConfigKind::LowPriority4Core);
        assert_eq!(lp4.tracks()[0], vec![w(26.9, 100.0)]);
        let hp = dev.list(ConfigKind::HighPriority);
        assert_eq!(hp.tracks()[0], vec![w(0.0, 10.0), w(26.9, 100.0)]);
        assert_eq!(hp.tracks()[1], vec![w(0.0, 10.0), w(26.9, 100.0)]);
        assert_eq!(hp.tracks()[2], vec![w(0.0, 100.0)]);
        dev.check_invariants().unwrap();
    }

    #[test]
    fn write_through_with_short_minimum() {
        let d = DeviceId(0);
        let mut lp2 = AvailabilityList::with_tracks(d, ConfigKind::LowPriority2Core, 2, 5.0, 2, w(0.0, 100.0)).unwrap();
        let mut lp4 = AvailabilityList::with_tracks(d, ConfigKind::LowPriority4Core, 4, 5.0, 1, w(0.0, 100.0)).unwrap();
        lp2.subtract(&w(10.0, 26.9), 2);
        lp4.subtract(&w(10.0, 26.9), 2);
        assert_eq!(lp2.tracks()[0], vec![w(0.0, 10.0), w(26.9, 100.0)]);
        assert_eq!(lp2.tracks()[1], vec![w(0.0, 100.0)]);
        assert_eq!(lp4.tracks()[0], vec![w(0.0, 10.0), w(26.9, 100.0)]);
    }

    #[test]
    fn full_and_empty_subtraction() {
        let configs = ConfigTable::<f64>::default();
        let h = w(0.0, 100.0);
        let mut dev = DeviceAvailability::new(DeviceId(0), 4, &configs, h).unwrap();
        dev.record_allocation(&h, 4);
        assert!(dev.lists().iter().all(|l| l.window_count() == 0));
        let before = dev.clone();
        dev.record_allocation(&w(10.0, 20.0), 1);
        assert_eq!(dev, before);
    }

    #[test]
    fn partial_overlap_spills_to_next_track() {
        let d = DeviceId(0);
        let mut hp = AvailabilityList::with_tracks(d, ConfigKind::HighPriority, 1, 0.5, 2, w(0.0, 50.0)).unwrap();
        hp.tracks[0] = vec![w(5.0, 50.0)];
        hp.subtract(&w(0.0, 10.0), 1);
        assert_eq!(hp.tracks()[0], vec![w(10.0, 50.0)]);
        assert_eq!(hp.tracks()[1], vec![w(5.0, 50.0)]);
    }

    #[test]
    fn rebuild_of_empty_workload_is_full() {
        let configs = ConfigTable::<f64>::default();
        let h = w(0.0, 1000.0);
        let fresh = DeviceAvailability::new(DeviceId(1), 4, &configs, h).unwrap();
        let rebuilt = DeviceAvailability::rebuild(DeviceId(1), 4, &configs, std::iter::empty(), h).unwrap();
        assert_eq!(fresh, rebuilt);
    }

    #[test]
    fn advance_extends_and_prunes() {
        let configs = ConfigTable::<f64>::default();
        let mut dev = DeviceAvailability::new(DeviceId(0), 4, &configs, w(0.0, 100.0)).unwrap();
        dev.record_allocation(&w(60.0, 100.0), 4);
        dev.advance(70.0, 100.0);
        assert_eq!(dev.horizon(), w(70.0, 170.0));
        let lp4 = dev.list(ConfigKind::LowPriority4Core);
        assert_eq!(lp4.tracks()[0], vec![w(100.0, 170.0)]);
        dev.record_allocation(&w(80.0, 90.0), 1);
        dev.advance(75.0, 200.0);
        let hp = dev.list(ConfigKind::HighPriority);
        assert_eq!(hp.tracks()[0], vec![w(100.0, 275.0)]);
        dev.check_invariants().unwrap();
    }

    #[test]
    fn dump_format() {
        let configs = ConfigTable::<f64>::default();
        let mut dev = DeviceAvailability::new(DeviceId(2), 4, &configs, w(0.0, 100.0)).unwrap();
        dev.record_allocation(&w(10.0, 26.9), 2);
        let expected = "\
device 2 hp min_cores=1 min_duration=0.98 tracks=4
  track 0: [0, 10) [26.9, 100)
  track 1: [0, 10) [26.9, 100)
  track 2: [0, 100)
  track 3: [0, 100)
device 2 lp2 min_cores=2 min_duration=16.862 tracks=2
  track 0: [26.9, 100)
  track 1: [0, 100)
device 2 lp4 min_cores=4 min_duration=11.611 tracks=1
  track 0: [26.9, 100)
";
        assert_eq!(dev.dump(), expected);
    }

    #[test]
    fn generic_over_f32() {
        let configs = ConfigTable::<f32>::default();
        let mut dev = DeviceAvailability::<f32>::new(DeviceId(0), 4, &configs, Window::new(0.0f32, 100.0).unwrap()).unwrap();
        dev.record_allocation(&Window::new(1.0f32, 1.98).unwrap(), 1);
        let hit = dev.list(ConfigKind::HighPriority).find_window(&Window::new(1.0f32, 1.98).unwrap()).unwrap();
        assert_eq!(hit.track, 1);
    }

    fn slot() -> impl Strategy<Value = Window<f64>> {
        (0.0f64..90.0, 0.5f64..30.0).prop_map(|(a, l)| w(a, (a + l).min(100.0)))
    }

    proptest! {
        #[test]
        fn fragment_law(a in 0.0f64..50.0, la in 1.0f64..50.0, off in 0.0f64..1.0, frac in 0.0f64..1.0, min in 0.0f64..10.0) {
            let window = w(a, a + la);
            let s1 = a + off * la * 0.99;
            let s2 = s1 + (window.t2 - s1) * frac.max(1e-3);
            let slot = w(s1, s2);
            let b = bisect(&window, &slot, min).unwrap();
            let kept: f64 = b.iter().map(|f| f.duration()).sum();
            let dropped: f64 = [(window.t1, slot.t1), (slot.t2, window.t2)]
                .iter()
                .map(|(x, y)| y - x)
                .filter(|d| *d > 0.0 && *d < min)
                .sum();
            prop_assert!((kept - (window.duration() - slot.duration() - dropped)).abs() < 1e-9);
            for f in b.iter() {
                prop_assert!(!f.overlaps(&slot));
                prop_assert!(f.duration() >= min);
            }
        }

        #[test]
        fn subtraction_commutes_without_dropping(x in slot(), cx in 1u32..=4, y in slot(), cy in 1u32..=4) {
            let d = DeviceId(0);
            for (kind, j, tracks) in [(ConfigKind::HighPriority, 1, 4), (ConfigKind::LowPriority2Core, 2, 2)] {
                let base = AvailabilityList::with_tracks(d, kind, j, 1e-9, tracks, w(0.0, 100.0)).unwrap();
                let mut ab = base.clone();
                ab.subtract(&x, cx);
                ab.subtract(&y, cy);
                let mut ba = base.clone();
                ba.subtract(&y, cy);
                ba.subtract(&x, cx);
                prop_assert_eq!(free_tracks_profile(&ab), free_tracks_profile(&ba));
            }
        }

        #[test]
        fn invariants_hold_after_every_write(slots in prop::collection::vec((slot(), 1u32..=4), 1..25)) {
            let configs = ConfigTable::<f64>::default();
            let mut dev = DeviceAvailability::new(DeviceId(0), 4, &configs, w(0.0, 100.0)).unwrap();
            for (s, c) in slots {
                dev.record_allocation(&s, c);
                prop_assert!(dev.check_invariants().is_ok(), "{}", dev.dump());
            }
        }

        #[test]
        fn found_window_contains_desired(slots in prop::collection::vec((slot(), 1u32..=4), 0..10), q in slot()) {
            let configs = ConfigTable::<f64>::default();
            let mut dev = DeviceAvailability::new(DeviceId(0), 4, &configs, w(0.0, 100.0)).unwrap();
            for (s, c) in slots {
                dev.record_allocation(&s, c);
            }
            for list in dev.lists() {
                if let Some(hit) = list.find_window(&q) {
                    prop_assert!(hit.window.contains(&q));
                    prop_assert_eq!(list.tracks()[hit.track][hit.index], hit.window);
                }
            }
        }
    }

    /// Number of free tracks on each elementary interval between window
    /// boundaries.
    fn free_tracks_profile(list: &AvailabilityList<f64>) -> Vec<(u64, u64, usize)> {
        let mut pts: Vec<f64> = list.windows().iter().flat_map(|(_, w)| [w.t1, w.t2]).collect();
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup();
        let mut out: Vec<(u64, u64, usize)> = Vec::new();
        for p in pts.windows(2) {
            let mid = 0.5 * (p[0] + p[1]);
            let n = list.windows().iter().filter(|(_, w)| w.contains_instant(mid)).count();
            if n == 0 {
                continue;
            }
            match out.last_mut() {
                Some(last) if last.1 == p[0].to_bits() && last.2 == n => last.1 = p[1].to_bits(),
                _ => out.push((p[0].to_bits(), p[1].to_bits(), n)),
            }
        }
        out
    }
}
