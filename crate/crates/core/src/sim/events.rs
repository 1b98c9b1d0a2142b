//! Event queue ordered by time, then event kind, then insertion order.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Kinds in tie-break order: capacity changes and completions come before
/// deadline checks, which come before new work.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    TrafficBurstOn,
    TrafficBurstOff,
    HpComplete,
    TaskComplete,
    TransferEnd,
    DeadlineCheck,
    FrameSpawn,
    BandwidthProbe,
    ProbeEnd,
    LpRequestIssue,
    DecisionEffect,
    ControllerDispatch,
    TransferStart,
    TaskStart,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    pub seq: u64,
    /// Task, frame or flow the event refers to.
    pub subject: u64,
    /// Generation of the subject when the event was scheduled.
    pub generation: u64,
}

impl Eq for Event {}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap pops the greatest element.
        other
            .time
            .total_cmp(&self.time)
            .then(other.kind.cmp(&self.kind))
            .then(other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Event>,
    seq: u64,
}

impl EventQueue {
    pub fn push(&mut self, time: f64, kind: EventKind, subject: u64, generation: u64) {
        self.seq += 1;
        self.heap.push(Event { time, kind, seq: self.seq, subject, generation });
    }

    pub fn pop(&mut self) -> Option<Event> {
        self.heap.pop()
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordering() {
        let mut q = EventQueue::default();
        q.push(2.0, EventKind::FrameSpawn, 0, 0);
        q.push(1.0, EventKind::TaskStart, 1, 0);
        q.push(1.0, EventKind::TaskComplete, 2, 0);
        q.push(1.0, EventKind::TaskComplete, 3, 0);
        let order: Vec<u64> = std::iter::from_fn(|| q.pop()).map(|e| e.subject).collect();
        assert_eq!(order, vec![2, 3, 1, 0]);
    }
}
