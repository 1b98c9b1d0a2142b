use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ParamError;
use crate::scalar::Scalar;

/// Half-open time interval `[t1, t2)` in seconds.
///
/// Abutting windows do not overlap, so a reservation ending at `t` never
/// conflicts with one starting at `t`.
#[derive(Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Window<T = f64> {
    pub t1: T,
    pub t2: T,
}

impl<T: Scalar> Window<T> {
    pub fn new(t1: T, t2: T) -> Result<Self, ParamError> {
        if t1 < t2 && t1.is_finite() && t2.is_finite() {
            Ok(Self { t1, t2 })
        } else {
            Err(ParamError::EmptyWindow {
                t1: t1.to_string(),
                t2: t2.to_string(),
            })
        }
    }

    /// Window of `len` seconds starting at `t1`; `len` must be positive.
    pub fn starting_at(t1: T, len: T) -> Result<Self, ParamError> {
        Self::new(t1, t1 + len)
    }

    pub fn duration(&self) -> T {
        self.t2 - self.t1
    }

    /// `inner` lies entirely inside `self`.
    pub fn contains(&self, inner: &Window<T>) -> bool {
        self.t1 <= inner.t1 && inner.t2 <= self.t2
    }

    pub fn overlaps(&self, other: &Window<T>) -> bool {
        self.t1 < other.t2 && other.t1 < self.t2
    }

    pub fn contains_instant(&self, t: T) -> bool {
        self.t1 <= t && t < self.t2
    }

    pub fn intersection(&self, other: &Window<T>) -> Option<Window<T>> {
        let t1 = self.t1.max(other.t1);
        let t2 = self.t2.min(other.t2);
        (t1 < t2).then_some(Window { t1, t2 })
    }
}

impl<T: fmt::Debug> fmt::Debug for Window<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:?}, {:?})", self.t1, self.t2)
    }
}

impl<T: fmt::Display> fmt::Display for Window<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.t1, self.t2)
    }
}

pub fn window_contains<T: Scalar>(outer: &Window<T>, inner: &Window<T>) -> bool {
    outer.contains(inner)
}

pub fn windows_overlap<T: Scalar>(a: &Window<T>, b: &Window<T>) -> bool {
    a.overlaps(b)
}
