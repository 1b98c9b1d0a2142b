//! Smoothed link bandwidth estimate.

use crate::error::ParamError;
use crate::scalar::Scalar;

pub const DEFAULT_ALPHA: f64 = 0.3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BandwidthEstimate<T = f64> {
    value: T,
    alpha: T,
    last_update: T,
}

impl<T: Scalar> BandwidthEstimate<T> {
    pub fn new(initial: T, alpha: T) -> Result<Self, ParamError> {
        if !(initial > T::zero()) || !initial.is_finite() {
            return Err(ParamError::NonPositive { what: "bandwidth", value: initial.to_string() });
        }
        if !(alpha > T::zero() && alpha <= T::one()) {
            return Err(ParamError::Alpha(alpha.to_string()));
        }
        Ok(Self { value: initial, alpha, last_update: T::zero() })
    }

    pub fn with_default_alpha(initial: T) -> Result<Self, ParamError> {
        Self::new(initial, T::lit(DEFAULT_ALPHA))
    }

    /// Bits per second.
    pub fn value(&self) -> T {
        self.value
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn last_update(&self) -> T {
        self.last_update
    }

    /// Folds the mean of `samples` into the estimate. Returns the new value,
    /// or `None` (leaving the estimate untouched) when there are no usable
    /// samples.
    pub fn update(&mut self, samples: &[T], now: T) -> Option<T> {
        let valid: Vec<T> = samples.iter().copied().filter(|s| *s > T::zero() && s.is_finite()).collect();
        if valid.is_empty() {
            log::warn!("bandwidth update at {now} had no usable samples; estimate kept at {}", self.value);
            return None;
        }
        let mean = valid.iter().fold(T::zero(), |a, b| a + *b) / T::from_count(valid.len());
        self.value = self.alpha * mean + (T::one() - self.alpha) * self.value;
        self.last_update = now;
        Some(self.value)
    }
}
