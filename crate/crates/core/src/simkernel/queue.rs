use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::fmt;

use thiserror::Error;

use crate::topology::NodeId;

/// Simulation time in integer microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub fn from_ms(ms: f64) -> SimTime {
        SimTime((ms * 1000.0).round().max(0.0) as u64)
    }

    pub fn as_ms(self) -> f64 {
        self.0 as f64 / 1000.0
    }

    pub fn as_secs(self) -> f64 {
        self.0 as f64 / 1e6
    }

    pub fn plus_us(self, us: u64) -> SimTime {
        SimTime(self.0 + us)
    }

    pub fn plus_ms(self, ms: f64) -> SimTime {
        SimTime(self.0 + (ms * 1000.0).round().max(0.0) as u64)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    TxStart,
    TxEnd,
    BackoffExpire,
    TimerFire,
    RxDeliver,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EventKind::TxStart => "TxStart",
            EventKind::TxEnd => "TxEnd",
            EventKind::BackoffExpire => "BackoffExpire",
            EventKind::TimerFire => "TimerFire",
            EventKind::RxDeliver => "RxDeliver",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct Event<P> {
    pub at: SimTime,
    pub seq: u64,
    pub kind: EventKind,
    pub node: NodeId,
    pub payload: P,
}

impl<P> PartialEq for Event<P> {
    fn eq(&self, other: &Self) -> bool {
        self.at == other.at && self.seq == other.seq
    }
}

impl<P> Eq for Event<P> {}

impl<P> PartialOrd for Event<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// Reversed so that BinaryHeap pops the earliest (at, seq) first.
impl<P> Ord for Event<P> {
    fn cmp(&self, other: &Self) -> Ordering {
        other.at.cmp(&self.at).then_with(|| other.seq.cmp(&self.seq))
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("cannot schedule at {at} us, clock is already at {now} us")]
    InPast { at: SimTime, now: SimTime },
    #[error("sequence number {0} already used")]
    DuplicateSeq(u64),
}

/// Text rendering of an event payload for trace dumps.
pub trait TraceDetail {
    fn detail(&self) -> String;
}

impl TraceDetail for () {
    fn detail(&self) -> String {
        String::new()
    }
}

/// Deterministic event queue ordered by `(at, seq)`.
#[derive(Debug)]
pub struct EventQueue<P> {
    heap: BinaryHeap<Event<P>>,
    now: SimTime,
    next_seq: u64,
    issued: HashSet<u64>,
    trace: Option<Vec<String>>,
}

impl<P> Default for EventQueue<P> {
    fn default() -> Self {
        Self::new()
    }
}

impl<P> EventQueue<P> {
    pub fn new() -> Self {
        EventQueue { heap: BinaryHeap::new(), now: SimTime::ZERO, next_seq: 0, issued: HashSet::new(), trace: None }
    }

    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    pub fn take_trace(&mut self) -> Vec<String> {
        self.trace.take().unwrap_or_default()
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Enqueues an event, assigning it the next sequence number.
    pub fn schedule(&mut self, at: SimTime, kind: EventKind, node: NodeId, payload: P) -> Result<u64, ScheduleError> {
        if at < self.now {
            return Err(ScheduleError::InPast { at, now: self.now });
        }
        while self.issued.contains(&self.next_seq) {
            self.next_seq += 1;
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.issued.insert(seq);
        self.heap.push(Event { at, seq, kind, node, payload });
        Ok(seq)
    }

    /// Enqueues a fully formed event whose `seq` has never been used.
    pub fn push(&mut self, ev: Event<P>) -> Result<(), ScheduleError> {
        if ev.at < self.now {
            return Err(ScheduleError::InPast { at: ev.at, now: self.now });
        }
        if !self.issued.insert(ev.seq) {
            return Err(ScheduleError::DuplicateSeq(ev.seq));
        }
        self.heap.push(ev);
        Ok(())
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.heap.peek().map(|e| e.at)
    }

    pub fn pop(&mut self) -> Option<Event<P>>
    where
        P: TraceDetail,
    {
        let ev = self.heap.pop()?;
        debug_assert!(ev.at >= self.now);
        self.now = ev.at;
        if let Some(t) = self.trace.as_mut() {
            t.push(format!("{},{},{},{}", ev.at.0, ev.kind, ev.node, ev.payload.detail()));
        }
        Some(ev)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_times_dispatch_in_seq_order() {
        let mut q: EventQueue<()> = EventQueue::new();
        q.push(Event { at: SimTime(10), seq: 6, kind: EventKind::TimerFire, node: NodeId(1), payload: () }).unwrap();
        q.push(Event { at: SimTime(10), seq: 5, kind: EventKind::TimerFire, node: NodeId(2), payload: () }).unwrap();
        assert_eq!(q.pop().unwrap().seq, 5);
        assert_eq!(q.pop().unwrap().seq, 6);
    }

    #[test]
    fn same_instant_event_dispatches_before_clock_advances() {
        let mut q: EventQueue<()> = EventQueue::new();
        q.schedule(SimTime(100), EventKind::TimerFire, NodeId(0), ()).unwrap();
        q.schedule(SimTime(50), EventKind::TimerFire, NodeId(0), ()).unwrap();
        assert_eq!(q.pop().unwrap().at, SimTime(50));
        q.schedule(SimTime(50), EventKind::TxStart, NodeId(1), ()).unwrap();
        let e = q.pop().unwrap();
        assert_eq!((e.at, e.kind), (SimTime(50), EventKind::TxStart));
        assert_eq!(q.pop().unwrap().at, SimTime(100));
    }

    #[test]
    fn scheduling_into_the_past_fails() {
        let mut q: EventQueue<()> = EventQueue::new();
        q.schedule(SimTime(10), EventKind::TimerFire, NodeId(0), ()).unwrap();
        q.pop();
        assert_eq!(
            q.schedule(SimTime(9), EventKind::TimerFire, NodeId(0), ()),
            Err(ScheduleError::InPast { at: SimTime(9), now: SimTime(10) })
        );
    }

    #[test]
    fn duplicate_seq_rejected() {
        let mut q: EventQueue<()> = EventQueue::new();
        q.schedule(SimTime(1), EventKind::TimerFire, NodeId(0), ()).unwrap();
        let e = Event { at: SimTime(2), seq: 0, kind: EventKind::TimerFire, node: NodeId(0), payload: () };
        assert_eq!(q.push(e), Err(ScheduleError::DuplicateSeq(0)));
    }

    #[test]
    fn trace_lines_follow_dispatch_order() {
        let mut q: EventQueue<()> = EventQueue::new();
        q.enable_trace();
        q.schedule(SimTime(7), EventKind::TxEnd, NodeId(3), ()).unwrap();
        q.schedule(SimTime(2), EventKind::TxStart, NodeId(3), ()).unwrap();
        while q.pop().is_some() {}
        assert_eq!(q.take_trace(), vec!["2,TxStart,3,", "7,TxEnd,3,"]);
    }
}
