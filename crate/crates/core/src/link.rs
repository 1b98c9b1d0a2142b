//! Discretised shared wireless link.
//!
//! Time after the reasoning anchor `t_r` is cut into slots of the base
//! transfer unit `D` (the time to move one maximum-size image at the
//! current bandwidth estimate). The first four buckets hold one slot each;
//! bucket `m >= 4` covers slots `[2^(m-2), 2^(m-1))` and holds that many
//! transfers. A bucket index is found in constant time from a timestamp.

use crate::error::{LinkError, ParamError};
use crate::model::TaskId;
use crate::scalar::Scalar;
use crate::window::Window;

/// Number of single-slot buckets at the front of every link.
pub const BASE_BUCKETS: usize = 4;

/// Base transfer unit in seconds for an image of `max_image_bits` at
/// `bandwidth` bits per second.
pub fn compute_d<T: Scalar>(max_image_bits: T, bandwidth: T) -> Result<T, ParamError> {
    for (what, v) in [("image size", max_image_bits), ("bandwidth", bandwidth)] {
        if !(v > T::zero()) || !v.is_finite() {
            return Err(ParamError::NonPositive { what, value: v.to_string() });
        }
    }
    Ok(max_image_bits / bandwidth)
}

/// Bucket index of `t_p` on a link anchored at `t_r` with unit `d`.
///
/// A timestamp maps to the slot after the one it falls in, so an exact slot
/// boundary maps to the next slot. Times before `t_r` give negative indices.
pub fn query_index<T: Scalar>(t_r: T, d: T, t_p: T) -> i64 {
    let diff = t_p - t_r;
    if diff < T::zero() {
        return (diff / d).floor().to_i64().unwrap_or(i64::MIN);
    }
    // (diff + (d - diff % d)) / d: one past the slot holding t_p. The slot is
    // settled against the boundaries t_r + k * d the link itself uses, so
    // rounding in the division cannot move t_p across a boundary.
    let mut whole = (diff / d).floor();
    if t_r + (whole + T::one()) * d <= t_p {
        whole = whole + T::one();
    } else if whole > T::zero() && t_r + whole * d > t_p {
        whole = whole - T::one();
    }
    let base = whole + T::one();
    if base < T::from_count(BASE_BUCKETS) {
        base.to_i64().unwrap_or(i64::MAX)
    } else {
        (base.log2() + T::lit(2.0)).floor().to_i64().unwrap_or(i64::MAX)
    }
}

/// A transfer held by a bucket.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Occupant<T = f64> {
    pub task: TaskId,
    pub transfer: u64,
    pub window: Window<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bucket<T = f64> {
    pub index: usize,
    pub window: Window<T>,
    pub capacity: usize,
    pub occupants: Vec<Occupant<T>>,
    /// Earliest time a new transfer in this bucket may start.
    pub next_free: T,
}

impl<T: Scalar> Bucket<T> {
    pub fn is_full(&self) -> bool {
        self.occupants.len() >= self.capacity
    }

    fn start_for(&self, earliest: T, d: T) -> Option<T> {
        if self.is_full() {
            return None;
        }
        let start = self.window.t1.max(self.next_free).max(earliest);
        (start + d <= self.window.t2).then_some(start)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Placed {
    Kept,
    /// Started before the anchor; treated as already done.
    Past,
    /// No bucket left with spare capacity.
    Overflow,
}

/// Outcome of moving a link's occupants onto a freshly built link.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CascadeReport<T = f64> {
    pub kept: usize,
    /// Transfers that started before the new anchor.
    pub dropped: Vec<Occupant<T>>,
    /// Transfers that found no bucket with spare capacity.
    pub overflow: Vec<Occupant<T>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkLink<T = f64> {
    t_r: T,
    d: T,
    n_exp: usize,
    buckets: Vec<Bucket<T>>,
}

impl<T: Scalar> NetworkLink<T> {
    /// Empty link anchored at `now` rounded up to a multiple of `d`.
    pub fn build(now: T, d: T, n_base: usize, n_exp: usize) -> Result<Self, ParamError> {
        if !(d > T::zero()) || !d.is_finite() {
            return Err(ParamError::NonPositive { what: "base transfer unit", value: d.to_string() });
        }
        if n_base != BASE_BUCKETS {
            return Err(ParamError::UnitBuckets(n_base));
        }
        if n_exp == 0 {
            return Err(ParamError::NoExponentialBuckets);
        }
        let t_r = (now / d).ceil() * d;
        let mut buckets = Vec::with_capacity(n_base + n_exp);
        let slot = |k: usize| t_r + T::from_count(k) * d;
        for i in 0..n_base + n_exp {
            let (lo, cap) = if i < n_base { (i, 1) } else { (1usize << (i - 2), 1usize << (i - 2)) };
            let window = Window { t1: slot(lo), t2: slot(lo + cap) };
            buckets.push(Bucket { index: i, window, capacity: cap, occupants: Vec::new(), next_free: window.t1 });
        }
        Ok(Self { t_r, d, n_exp, buckets })
    }

    /// Smallest exponential bucket count whose horizon reaches `span`
    /// seconds past the anchor.
    pub fn exp_buckets_for(span: T, d: T) -> usize {
        let slots = (span / d).ceil().to_f64().unwrap_or(f64::MAX).max(1.0);
        // Total slots with n_exp exponential buckets is 2^(n_exp + 2).
        (slots.log2().ceil() as i64 - 2).clamp(1, 60) as usize
    }

    pub fn t_r(&self) -> T {
        self.t_r
    }

    pub fn d(&self) -> T {
        self.d
    }

    pub fn n_exp(&self) -> usize {
        self.n_exp
    }

    pub fn buckets(&self) -> &[Bucket<T>] {
        &self.buckets
    }

    pub fn horizon(&self) -> Window<T> {
        Window { t1: self.t_r, t2: self.buckets.last().map_or(self.t_r, |b| b.window.t2) }
    }

    pub fn occupant_count(&self) -> usize {
        self.buckets.iter().map(|b| b.occupants.len()).sum()
    }

    pub fn occupants(&self) -> impl Iterator<Item = &Occupant<T>> {
        self.buckets.iter().flat_map(|b| b.occupants.iter())
    }

    pub fn query_index(&self, t_p: T) -> i64 {
        query_index(self.t_r, self.d, t_p)
    }

    /// First bucket at or after the index of `earliest` that can take one
    /// more transfer of length `D`, with the transfer start.
    pub fn find_comm_slot(&self, earliest: T) -> Option<(usize, T)> {
        let from = self.query_index(earliest).max(0) as usize;
        self.buckets
            .iter()
            .skip(from)
            .find_map(|b| b.start_for(earliest, self.d).map(|s| (b.index, s)))
    }

    /// Places a transfer for `task` in bucket `index`, starting no earlier
    /// than `earliest`.
    pub fn reserve(
        &mut self,
        index: usize,
        task: TaskId,
        transfer: u64,
        earliest: T,
    ) -> Result<Window<T>, LinkError> {
        let d = self.d;
        let bucket = self.buckets.get_mut(index).ok_or(LinkError::NoSuchBucket(index))?;
        let start = bucket
            .start_for(earliest, d)
            .ok_or(LinkError::BucketFull { index, capacity: bucket.capacity })?;
        let window = Window { t1: start, t2: start + d };
        bucket.occupants.push(Occupant { task, transfer, window });
        bucket.next_free = window.t2;
        Ok(window)
    }

    /// Removes every transfer of `task`; returns how many were removed.
    pub fn release(&mut self, task: TaskId) -> usize {
        let mut removed = 0;
        for b in self.buckets.iter_mut() {
            let before = b.occupants.len();
            b.occupants.retain(|o| o.task != task);
            removed += before - b.occupants.len();
        }
        removed
    }

    /// Places an existing transfer in the first bucket with spare capacity
    /// at or after the index of its start time, keeping its timing.
    pub fn insert_occupant(&mut self, occ: Occupant<T>) -> Placed {
        let idx = self.query_index(occ.window.t1);
        if idx < 0 {
            return Placed::Past;
        }
        match self.buckets.iter_mut().skip(idx as usize).find(|b| !b.is_full()) {
            Some(b) => {
                b.occupants.push(occ);
                b.next_free = b.next_free.max(occ.window.t2);
                Placed::Kept
            }
            None => Placed::Overflow,
        }
    }

    /// Moves every occupant of `self` onto `target`, in bucket order.
    pub fn cascade_into(&self, mut target: NetworkLink<T>) -> (NetworkLink<T>, CascadeReport<T>) {
        let mut report = CascadeReport::default();
        for occ in self.occupants() {
            match target.insert_occupant(*occ) {
                Placed::Kept => report.kept += 1,
                Placed::Past => report.dropped.push(*occ),
                Placed::Overflow => report.overflow.push(*occ),
            }
        }
        (target, report)
    }

    /// Rebuilds the link at `now` with unit `d`, carrying occupants over.
    pub fn rebuilt(&self, now: T, d: T, n_exp: usize) -> Result<(NetworkLink<T>, CascadeReport<T>), ParamError> {
        let fresh = NetworkLink::build(now.max(self.t_r), d, BASE_BUCKETS, n_exp)?;
        Ok(self.cascade_into(fresh))
    }

    pub fn check_invariants(&self) -> Result<(), String> {
        for pair in self.buckets.windows(2) {
            if pair[0].window.t2 != pair[1].window.t1 {
                return Err(format!("buckets {} and {} do not tile", pair[0].index, pair[1].index));
            }
        }
        for b in &self.buckets {
            if b.occupants.len() > b.capacity {
                return Err(format!("bucket {} over capacity", b.index));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bounds(link: &NetworkLink<f64>) -> Vec<(f64, f64, usize)> {
        link.buckets().iter().map(|b| (b.window.t1, b.window.t2, b.capacity)).collect()
    }

    #[test]
    fn compute_d_examples() {
        assert_eq!(compute_d(8e6, 8e6).unwrap(), 1.0);
        assert_eq!(compute_d(4e6, 8e6).unwrap(), 0.5);
        assert!(compute_d(0.0, 8e6).is_err());
        assert!(compute_d(1.0, -1.0).is_err());
    }

    #[test]
    fn build_examples() {
        let l = NetworkLink::build(99.2, 1.0, 4, 2).unwrap();
        assert_eq!(l.t_r(), 100.0);
        assert_eq!(
            bounds(&l),
            vec![
                (100.0, 101.0, 1),
                (101.0, 102.0, 1),
                (102.0, 103.0, 1),
                (103.0, 104.0, 1),
                (104.0, 108.0, 4),
                (108.0, 116.0, 8)
            ]
        );
        assert_eq!(NetworkLink::build(100.0, 1.0, 4, 2).unwrap().t_r(), 100.0);
        let l = NetworkLink::build(0.0, 2.0, 4, 1).unwrap();
        assert_eq!(bounds(&l), vec![(0.0, 2.0, 1), (2.0, 4.0, 1), (4.0, 6.0, 1), (6.0, 8.0, 1), (8.0, 16.0, 4)]);
        assert!(matches!(NetworkLink::build(0.0, 1.0, 3, 2), Err(ParamError::UnitBuckets(3))));
        assert!(NetworkLink::build(0.0, 1.0, 4, 0).is_err());
        assert!(NetworkLink::build(0.0, 0.0, 4, 2).is_err());
    }

    #[test]
    fn span_formula() {
        for n_exp in 1..8 {
            let l = NetworkLink::build(0.0, 1.0, 4, n_exp).unwrap();
            let expect = 4 + (4..4 + n_exp).map(|m| 1usize << (m - 2)).sum::<usize>();
            assert_eq!(l.horizon().duration(), expect as f64);
            l.check_invariants().unwrap();
        }
    }

    #[test]
    fn index_examples() {
        assert_eq!(query_index(100.0, 1.0, 100.0), 1);
        assert_eq!(query_index(100.0, 1.0, 102.5), 3);
        assert_eq!(query_index(100.0, 1.0, 110.0), 5);
        assert_eq!(query_index(100.0, 1.0, 104.0), 4);
        assert_eq!(query_index(100.0, 1.0, 107.5), 5);
        assert_eq!(query_index(100.0, 1.0, 103.999), 4);
        assert_eq!(query_index(100.0, 1.0, 99.5), -1);
        assert_eq!(query_index(100.0, 1.0, 97.0), -3);
    }

    #[test]
    fn slot_search_and_reserve() {
        let mut l = NetworkLink::build(100.0, 1.0, 4, 2).unwrap();
        assert_eq!(l.find_comm_slot(100.0), Some((1, 101.0)));
        for i in 1..=3 {
            l.reserve(i, TaskId(i as u64), i as u64, 100.0).unwrap();
        }
        assert_eq!(l.find_comm_slot(100.5), Some((4, 104.0)));
        assert!(matches!(l.reserve(1, TaskId(9), 9, 100.0), Err(LinkError::BucketFull { .. })));
        assert!(matches!(l.reserve(99, TaskId(9), 9, 100.0), Err(LinkError::NoSuchBucket(99))));
        for k in 0..4 {
            l.reserve(4, TaskId(10 + k), 10 + k, 104.0).unwrap();
        }
        assert!(l.reserve(4, TaskId(20), 20, 104.0).is_err());
        l.check_invariants().unwrap();
    }

    #[test]
    fn saturated_link_has_no_slot() {
        let mut l = NetworkLink::build(0.0, 1.0, 4, 1).unwrap();
        let mut k = 0;
        while let Some((i, _)) = l.find_comm_slot(0.0) {
            l.reserve(i, TaskId(k), k, 0.0).unwrap();
            k += 1;
        }
        // bucket 0 is behind the first reachable slot
        assert_eq!(k, 3 + 4);
        assert_eq!(l.find_comm_slot(0.0), None);
    }

    #[test]
    fn reservations_in_a_bucket_are_serial() {
        let mut l = NetworkLink::build(0.0, 1.0, 4, 3).unwrap();
        let a = l.reserve(5, TaskId(1), 1, 0.0).unwrap();
        let b = l.reserve(5, TaskId(2), 2, 0.0).unwrap();
        assert_eq!(a, Window::new(8.0, 9.0).unwrap());
        assert_eq!(b, Window::new(9.0, 10.0).unwrap());
    }

    #[test]
    fn release_removes_task() {
        let mut l = NetworkLink::build(0.0, 1.0, 4, 2).unwrap();
        l.reserve(1, TaskId(1), 1, 0.0).unwrap();
        l.reserve(2, TaskId(2), 2, 0.0).unwrap();
        assert_eq!(l.release(TaskId(1)), 1);
        assert_eq!(l.occupant_count(), 1);
        assert_eq!(l.release(TaskId(1)), 0);
    }

    #[test]
    fn cascade_examples() {
        let mut old = NetworkLink::build(0.0, 1.0, 4, 3).unwrap();
        old.reserve(1, TaskId(1), 1, 0.0).unwrap();
        old.reserve(5, TaskId(2), 2, 0.0).unwrap();
        let (new, rep) = old.rebuilt(5.0, 1.0, 3).unwrap();
        assert_eq!(rep.dropped.len(), 1);
        assert_eq!(rep.dropped[0].task, TaskId(1));
        assert_eq!(rep.kept, 1);
        assert_eq!(new.occupants().filter(|o| o.task == TaskId(2)).count(), 1);

        let empty = NetworkLink::build(0.0, 1.0, 4, 2).unwrap();
        let target = NetworkLink::build(3.0, 1.0, 4, 2).unwrap();
        let (out, rep) = empty.cascade_into(target.clone());
        assert_eq!(out, target);
        assert_eq!(rep, CascadeReport::default());
    }

    #[test]
    fn cascade_reports_overflow() {
        let mut old = NetworkLink::build(0.0, 0.25, 4, 4).unwrap();
        let mut k = 0;
        while let Some((i, _)) = old.find_comm_slot(0.0) {
            old.reserve(i, TaskId(k), k, 0.0).unwrap();
            k += 1;
        }
        let (new, rep) = old.rebuilt(0.0, 1.0, 1).unwrap();
        assert!(!rep.overflow.is_empty());
        assert_eq!(rep.kept + rep.dropped.len() + rep.overflow.len(), k as usize);
        new.check_invariants().unwrap();
    }

    #[test]
    fn generic_over_f32() {
        let l = NetworkLink::<f32>::build(99.2, 1.0, 4, 2).unwrap();
        assert_eq!(l.t_r(), 100.0);
        assert_eq!(l.query_index(110.0), 5);
    }

    proptest! {
        #[test]
        fn capacity_never_exceeded(ops in prop::collection::vec((0.0f64..40.0, any::<bool>()), 1..80)) {
            let mut l = NetworkLink::build(0.0, 1.0, 4, 3).unwrap();
            for (k, (t, release)) in ops.into_iter().enumerate() {
                if release {
                    l.release(TaskId(k as u64 / 2));
                } else if let Some((i, s)) = l.find_comm_slot(t) {
                    let w = l.reserve(i, TaskId(k as u64), k as u64, t).unwrap();
                    prop_assert_eq!(w.t1, s);
                    prop_assert!(w.t1 >= t);
                }
                prop_assert!(l.check_invariants().is_ok());
            }
        }

        #[test]
        fn index_is_monotone(a in 0.0f64..500.0, b in 0.0f64..500.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(query_index(0.0, 0.7, lo) <= query_index(0.0, 0.7, hi));
        }
    }
}
