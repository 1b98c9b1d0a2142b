//! Deadline-constrained offloading of periodic inference work across a small
//! cluster of edge devices.
//!
//! The crate provides an availability-window model of device compute
//! capacity, a discretised model of a shared wireless link, two schedulers
//! built on them (the window-based scheduler and an exhaustive
//! overlapping-range baseline), and a trace-driven discrete-event simulator
//! with metrics aggregation.

pub mod availability;
pub mod bandwidth;
pub mod error;
pub mod experiments;
pub mod link;
pub mod metrics;
pub mod model;
pub mod sched;
pub mod sim;
pub mod scalar;
pub mod trace;
pub mod window;

pub use availability::{bisect, AvailabilityList, Bisection, DeviceAvailability, WindowRef};
pub use bandwidth::BandwidthEstimate;
pub use error::{LinkError, LoadError, ParamError};
pub use experiments::Preset;
pub use link::{compute_d, query_index, Bucket, CascadeReport, NetworkLink, Occupant, BASE_BUCKETS};
pub use model::*;
pub use scalar::Scalar;
pub use sched::{
    new_scheduler, Decision, HpRequest, LpRequest, Outcome, PreemptionOutcome, PreemptionRequest, RasScheduler,
    RejectReason, Scheduler, SchedulerKind, SchedulerParams, WpsScheduler,
};
pub use metrics::{aggregate, LogRecord, RunReport};
pub use sim::{run, run_with, ModelParams, RunOutput, SimConfig};
pub use trace::{generate_trace, Trace, TraceEntry, TraceKind};
pub use window::Window;

pub type TimeWindow = Window<f64>;
pub type Availability = DeviceAvailability<f64>;
pub type Link = NetworkLink<f64>;
pub type Bandwidth = BandwidthEstimate<f64>;
