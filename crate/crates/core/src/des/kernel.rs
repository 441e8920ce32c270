use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use super::time::SimTime;
use crate::error::DesError;

pub const DEFAULT_MAX_EVENTS: u64 = 100_000_000;

/// Cancellation token returned by [`Kernel::schedule`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct EventHandle(u64);

impl EventHandle {
    pub fn sequence(self) -> u64 {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    /// Every event with `fire_time <= until` has executed.
    ReachedUntil,
    /// The queue drained before `until`.
    Exhausted,
    /// The max-event guard fired.
    EventLimit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub final_time: SimTime,
    pub events_executed: u64,
    pub stop: StopReason,
}

/// What [`Kernel::next_event`] found.
pub enum Next<E> {
    Event(SimTime, E),
    Done(StopReason),
}

/// Event queue plus clock. Events are totally ordered by
/// `(fire_time, sequence)` where `sequence` is a global insertion counter.
#[derive(Debug)]
pub struct Kernel<E> {
    now: SimTime,
    next_seq: u64,
    heap: BinaryHeap<Reverse<(SimTime, u64)>>,
    pending: HashMap<u64, E>,
    executed: u64,
    max_events: u64,
}

impl<E> Default for Kernel<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> Kernel<E> {
    pub fn new() -> Self {
        Self::with_max_events(DEFAULT_MAX_EVENTS)
    }

    pub fn with_max_events(max_events: u64) -> Self {
        Kernel {
            now: SimTime::ZERO,
            next_seq: 0,
            heap: BinaryHeap::new(),
            pending: HashMap::new(),
            executed: 0,
            max_events,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn events_executed(&self) -> u64 {
        self.executed
    }

    /// Number of live (not cancelled, not yet fired) events.
    pub fn pending(&self) -> usize {
        self.pending.len()
    }

    pub fn max_events(&self) -> u64 {
        self.max_events
    }

    /// Enqueue `event` to fire `delay` seconds from now.
    pub fn schedule(&mut self, delay: f64, event: E) -> Result<EventHandle, DesError> {
        let delay = SimTime::from_secs(delay).ok_or(DesError::InvalidDelay(delay))?;
        if delay.is_infinite() {
            return Err(DesError::InvalidDelay(f64::INFINITY));
        }
        Ok(self.push(self.now + delay, event))
    }

    /// Enqueue `event` at an absolute time, which must not lie in the past.
    pub fn schedule_at(&mut self, at: SimTime, event: E) -> Result<EventHandle, DesError> {
        if at < self.now {
            return Err(DesError::InPast { at, now: self.now });
        }
        Ok(self.push(at, event))
    }

    fn push(&mut self, at: SimTime, event: E) -> EventHandle {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Reverse((at, seq)));
        self.pending.insert(seq, event);
        EventHandle(seq)
    }

    /// Returns `true` if the event was still pending.
    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        self.pending.remove(&handle.0).is_some()
    }

    pub fn is_pending(&self, handle: EventHandle) -> bool {
        self.pending.contains_key(&handle.0)
    }

    fn peek_live(&mut self) -> Option<SimTime> {
        while let Some(&Reverse((at, seq))) = self.heap.peek() {
            if self.pending.contains_key(&seq) {
                return Some(at);
            }
            self.heap.pop();
        }
        None
    }

    /// Pop the next event firing at or before `until`, advancing the clock.
    ///
    /// When nothing is left before `until` the clock moves to `until` (if
    /// finite) and the stop reason is returned instead.
    pub fn next_event(&mut self, until: SimTime) -> Next<E> {
        if self.executed >= self.max_events {
            return Next::Done(StopReason::EventLimit);
        }
        match self.peek_live() {
            Some(at) if at <= until => {
                let Reverse((at, seq)) = self.heap.pop().expect("peeked");
                let event = self.pending.remove(&seq).expect("live event");
                debug_assert!(at >= self.now);
                self.now = at;
                self.executed += 1;
                Next::Event(at, event)
            }
            Some(_) => {
                self.now = self.now.max(until);
                Next::Done(StopReason::ReachedUntil)
            }
            None => {
                if !until.is_infinite() {
                    self.now = self.now.max(until);
                    Next::Done(StopReason::ReachedUntil)
                } else {
                    Next::Done(StopReason::Exhausted)
                }
            }
        }
    }

    pub fn report(&self, stop: StopReason) -> RunReport {
        RunReport {
            final_time: self.now,
            events_executed: self.executed,
            stop,
        }
    }

    /// Drive the queue against `state` until `until` or exhaustion.
    ///
    /// A handler error aborts the run and names the offending event.
    pub fn run<S, F>(&mut self, state: &mut S, until: SimTime, mut handler: F) -> Result<RunReport, DesError>
    where
        F: FnMut(&mut S, &mut Kernel<E>, E) -> Result<(), String>,
    {
        loop {
            match self.next_event(until) {
                Next::Event(at, event) => {
                    let seq = self.executed - 1;
                    if let Err(message) = handler(state, self, event) {
                        return Err(DesError::EventFault { index: seq, at, message });
                    }
                }
                Next::Done(stop) => return Ok(self.report(stop)),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    type Log = Vec<(u64, &'static str)>;
    struct Action(Box<dyn FnOnce(&mut Log, &mut Kernel<Action>)>);

    fn act(f: impl FnOnce(&mut Log, &mut Kernel<Action>) + 'static) -> Action {
        Action(Box::new(f))
    }

    fn exec(log: &mut Log, k: &mut Kernel<Action>, a: Action) -> Result<(), String> {
        (a.0)(log, k);
        Ok(())
    }

    fn tag(name: &'static str) -> Action {
        act(move |log: &mut Log, k: &mut Kernel<Action>| log.push((k.now().as_nanos(), name)))
    }

    #[test]
    fn equal_time_events_fire_in_schedule_order() {
        let mut k: Kernel<Action> = Kernel::new();
        k.schedule(0.0, tag("A")).unwrap();
        k.schedule(0.0, tag("B")).unwrap();
        let mut log = Log::new();
        k.run(&mut log, SimTime::INFINITY, exec).unwrap();
        assert_eq!(log, vec![(0, "A"), (0, "B")]);
    }

    #[test]
    fn delay_is_relative_to_now() {
        let mut k: Kernel<Action> = Kernel::new();
        k.schedule(
            2.0,
            act(|_: &mut Log, k: &mut Kernel<Action>| {
                k.schedule(1.5, tag("A")).unwrap();
            }),
        )
        .unwrap();
        let mut log = Log::new();
        k.run(&mut log, SimTime::INFINITY, exec).unwrap();
        assert_eq!(log, vec![(3_500_000_000, "A")]);
    }

    #[test]
    fn cancelled_event_never_runs() {
        let mut k: Kernel<Action> = Kernel::new();
        let h = k.schedule(1.0, tag("A")).unwrap();
        k.schedule(2.0, tag("B")).unwrap();
        assert!(k.cancel(h));
        assert!(!k.cancel(h));
        let mut log = Log::new();
        let report = k.run(&mut log, SimTime::INFINITY, exec).unwrap();
        assert_eq!(log, vec![(2_000_000_000, "B")]);
        assert_eq!(report.events_executed, 1);
    }

    #[test]
    fn negative_delay_rejected() {
        let mut k: Kernel<Action> = Kernel::new();
        assert!(matches!(k.schedule(-0.5, tag("A")), Err(DesError::InvalidDelay(_))));
    }

    #[test]
    fn empty_queue_advances_to_until() {
        let mut k: Kernel<Action> = Kernel::new();
        let mut log = Log::new();
        let r = k.run(&mut log, SimTime::from_secs(10.0).unwrap(), exec).unwrap();
        assert_eq!(r.final_time.as_secs(), 10.0);
        assert_eq!(r.events_executed, 0);
        assert_eq!(r.stop, StopReason::ReachedUntil);
    }

    #[test]
    fn events_after_until_stay_queued() {
        let mut k: Kernel<Action> = Kernel::new();
        k.schedule(5.0, tag("A")).unwrap();
        k.schedule(15.0, tag("B")).unwrap();
        let mut log = Log::new();
        k.run(&mut log, SimTime::from_secs(10.0).unwrap(), exec).unwrap();
        assert_eq!(log.len(), 1);
        assert_eq!(k.pending(), 1);
        k.run(&mut log, SimTime::INFINITY, exec).unwrap();
        assert_eq!(log.len(), 2);
    }

    fn beacon() -> Action {
        act(|log: &mut Log, k: &mut Kernel<Action>| {
            log.push((k.now().as_nanos(), "beacon"));
            k.schedule(1.0, beacon()).unwrap();
        })
    }

    #[test]
    fn self_rescheduling_beacon_stops_at_guard() {
        let mut k: Kernel<Action> = Kernel::with_max_events(1000);
        k.schedule(0.0, beacon()).unwrap();
        let mut log = Log::new();
        let r = k.run(&mut log, SimTime::INFINITY, exec).unwrap();
        assert_eq!(r.stop, StopReason::EventLimit);
        assert_eq!(r.events_executed, 1000);
        assert_eq!(log.len(), 1000);
    }

    #[test]
    fn handler_fault_names_event() {
        let mut k: Kernel<u32> = Kernel::new();
        k.schedule(1.0, 7).unwrap();
        k.schedule(2.0, 13).unwrap();
        let err = k
            .run(&mut (), SimTime::INFINITY, |_, _, e| if e == 13 { Err("boom".into()) } else { Ok(()) })
            .unwrap_err();
        match err {
            DesError::EventFault { index, at, message } => {
                assert_eq!(index, 1);
                assert_eq!(at.as_secs(), 2.0);
                assert_eq!(message, "boom");
            }
            other => panic!("{other:?}"),
        }
    }

    proptest! {
        #[test]
        fn execution_is_causal_and_ties_keep_schedule_order(
            delays in prop::collection::vec(0u8..5, 1..200)
        ) {
            let mut k: Kernel<usize> = Kernel::new();
            for (i, d) in delays.iter().enumerate() {
                k.schedule(*d as f64, i).unwrap();
            }
            let mut seen: Vec<(SimTime, usize)> = Vec::new();
            k.run(&mut seen, SimTime::INFINITY, |seen, k, i| { seen.push((k.now(), i)); Ok(()) }).unwrap();
            prop_assert_eq!(seen.len(), delays.len());
            for w in seen.windows(2) {
                prop_assert!(w[0].0 <= w[1].0);
                if w[0].0 == w[1].0 {
                    prop_assert!(w[0].1 < w[1].1);
                }
            }
        }
    }
}
