//! Deterministic discrete-event core.
//!
//! Events are kept in a binary heap keyed by `(time, sequence)`. The sequence
//! number is assigned at insertion, so simultaneous events fire in the order
//! they were scheduled. Random draws go through [`RngStream`], a ChaCha8
//! generator whose stream is selected from a label so that independent
//! consumers never share draws.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::fmt;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

const NANOS_PER_SEC: u64 = 1_000_000_000;

/// Simulation time with nanosecond resolution.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SimTime(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub const fn from_nanos(nanos: u64) -> Self {
        SimTime(nanos)
    }

    /// Rounds to the nearest nanosecond. Negative and NaN inputs are rejected.
    pub fn from_secs_f64(secs: f64) -> Result<Self, EngineError> {
        if !secs.is_finite() || secs < 0.0 || secs * NANOS_PER_SEC as f64 > u64::MAX as f64 {
            return Err(EngineError::InvalidTime(secs));
        }
        Ok(SimTime((secs * NANOS_PER_SEC as f64).round() as u64))
    }

    pub const fn as_nanos(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / NANOS_PER_SEC as f64
    }

    pub fn saturating_add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_add(rhs.0))
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:09}", self.0 / NANOS_PER_SEC, self.0 % NANOS_PER_SEC)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("event scheduled at {at} but the clock is already at {now}")]
    ScheduleInPast { at: SimTime, now: SimTime },
    #[error("invalid simulation time {0} s")]
    InvalidTime(f64),
}

/// What happens when an event fires. Payloads carry plain indices so the
/// engine stays independent of the models that interpret them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EventKind {
    /// Trace-driven message generation: `index` into the app's timestamp list.
    MessageDue { node: usize, app: usize, index: usize },
    FrameStart { frame: u64 },
    SlotStart { frame: u64, slot: usize, node: usize },
    /// Arrival of the transmission stored at `transmission` in the run's in-flight table.
    ReceptionComplete { transmission: usize },
    SimEnd,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Event {
    pub time: SimTime,
    pub sequence: u64,
    pub kind: EventKind,
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.time, self.sequence).cmp(&(other.time, other.sequence))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Time-ordered event queue plus the simulation clock.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Reverse<Event>>,
    now: SimTime,
    next_sequence: u64,
    executed: u64,
    log: Option<Vec<Event>>,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records every executed event; used to compare replays.
    pub fn with_log() -> Self {
        EventQueue {
            log: Some(Vec::new()),
            ..Self::default()
        }
    }

    pub fn enable_log(&mut self) {
        self.log.get_or_insert_with(Vec::new);
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

    pub fn executed(&self) -> u64 {
        self.executed
    }

    pub fn log(&self) -> Option<&[Event]> {
        self.log.as_deref()
    }

    pub fn take_log(&mut self) -> Option<Vec<Event>> {
        self.log.take()
    }

    pub fn schedule(&mut self, time: SimTime, kind: EventKind) -> Result<u64, EngineError> {
        if time < self.now {
            return Err(EngineError::ScheduleInPast {
                at: time,
                now: self.now,
            });
        }
        let sequence = self.next_sequence;
        self.next_sequence += 1;
        self.heap.push(Reverse(Event {
            time,
            sequence,
            kind,
        }));
        Ok(sequence)
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.heap.peek().map(|Reverse(e)| e.time)
    }

    /// Removes the earliest event and advances the clock to it.
    pub fn pop(&mut self) -> Option<Event> {
        let Reverse(event) = self.heap.pop()?;
        debug_assert!(event.time >= self.now);
        self.now = event.time;
        self.executed += 1;
        if let Some(log) = self.log.as_mut() {
            log.push(event.clone());
        }
        Some(event)
    }

    fn finish(&mut self, end: SimTime) -> Event {
        let event = Event {
            time: end,
            sequence: self.next_sequence,
            kind: EventKind::SimEnd,
        };
        self.next_sequence += 1;
        self.now = end;
        self.executed += 1;
        if let Some(log) = self.log.as_mut() {
            log.push(event.clone());
        }
        event
    }
}

/// Something that reacts to events and may schedule more.
pub trait Process {
    type Error: From<EngineError>;

    fn handle(&mut self, event: &Event, queue: &mut EventQueue) -> Result<(), Self::Error>;
}

/// Executes every event with `time <= end` in `(time, sequence)` order, then
/// delivers a final `SimEnd` at `end`. Events past `end` never run.
pub fn run_until<P: Process>(
    queue: &mut EventQueue,
    end: SimTime,
    process: &mut P,
) -> Result<(), P::Error> {
    while let Some(time) = queue.peek_time() {
        if time > end {
            break;
        }
        let event = queue.pop().expect("peeked event");
        process.handle(&event, queue)?;
    }
    let sim_end = queue.finish(end);
    process.handle(&sim_end, queue)
}

/// A named, seeded random stream.
///
/// The 64-bit seed keys the ChaCha8 generator and a hash of the label picks
/// the ChaCha stream, so `(seed, label)` fully determines the draw sequence
/// on every platform.
#[derive(Clone, Debug)]
pub struct RngStream {
    label: String,
    seed: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, label: &str) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(label_hash(label));
        RngStream {
            label: label.to_owned(),
            seed,
            rng,
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform draw in `[low, high)`.
    pub fn uniform_range(&mut self, low: f64, high: f64) -> f64 {
        low + (high - low) * self.uniform()
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Seed used by run `run` of a sweep.
pub fn run_seed(base_seed: u64, run: u32) -> u64 {
    base_seed.wrapping_add(u64::from(run))
}

// FNV-1a
fn label_hash(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(secs: f64) -> SimTime {
        SimTime::from_secs_f64(secs).unwrap()
    }

    #[test]
    fn earlier_event_dequeues_first() {
        let mut q = EventQueue::new();
        q.schedule(at(5.0), EventKind::FrameStart { frame: 5 }).unwrap();
        q.schedule(at(3.0), EventKind::FrameStart { frame: 3 }).unwrap();
        assert_eq!(q.pop().unwrap().time, at(3.0));
        assert_eq!(q.pop().unwrap().time, at(5.0));
        assert!(q.pop().is_none());
    }

    #[test]
    fn simultaneous_events_are_fifo() {
        let mut q = EventQueue::new();
        q.schedule(at(7.0), EventKind::FrameStart { frame: 1 }).unwrap();
        q.schedule(at(7.0), EventKind::FrameStart { frame: 2 }).unwrap();
        assert_eq!(q.pop().unwrap().kind, EventKind::FrameStart { frame: 1 });
        assert_eq!(q.pop().unwrap().kind, EventKind::FrameStart { frame: 2 });
    }

    #[test]
    fn scheduling_in_the_past_fails() {
        let mut q = EventQueue::new();
        q.schedule(at(4.0), EventKind::SimEnd).unwrap();
        q.pop();
        let err = q.schedule(at(2.0), EventKind::SimEnd).unwrap_err();
        assert!(matches!(err, EngineError::ScheduleInPast { .. }));
    }

    #[test]
    fn sim_time_rejects_bad_values() {
        assert!(SimTime::from_secs_f64(-1.0).is_err());
        assert!(SimTime::from_secs_f64(f64::NAN).is_err());
        assert_eq!(at(0.01).as_nanos(), 10_000_000);
        assert_eq!(at(10000.0).to_string(), "10000.000000000");
    }

    struct Recorder {
        seen: Vec<(SimTime, EventKind)>,
    }

    impl Process for Recorder {
        type Error = EngineError;

        fn handle(&mut self, event: &Event, queue: &mut EventQueue) -> Result<(), EngineError> {
            self.seen.push((event.time, event.kind.clone()));
            if let EventKind::FrameStart { frame } = event.kind {
                queue.schedule(
                    event.time.saturating_add(at(1.0)),
                    EventKind::FrameStart { frame: frame + 1 },
                )?;
            }
            Ok(())
        }
    }

    #[test]
    fn run_until_stops_at_end_and_includes_boundary() {
        let mut q = EventQueue::new();
        q.schedule(SimTime::ZERO, EventKind::FrameStart { frame: 0 }).unwrap();
        let mut r = Recorder { seen: Vec::new() };
        run_until(&mut q, at(3.0), &mut r).unwrap();
        let frames: Vec<_> = r.seen.iter().map(|(t, _)| t.as_secs_f64()).collect();
        assert_eq!(frames, vec![0.0, 1.0, 2.0, 3.0, 3.0]);
        assert_eq!(r.seen.last().unwrap().1, EventKind::SimEnd);
        assert_eq!(q.now(), at(3.0));
        // frame 4 was scheduled at t=4 but never ran
        assert_eq!(q.len(), 1);
    }

    #[test]
    fn rng_stream_is_reproducible_and_label_separated() {
        let mut a = RngStream::new(42, "radio");
        let mut b = RngStream::new(42, "radio");
        let mut c = RngStream::new(42, "tracegen");
        let xs: Vec<f64> = (0..16).map(|_| a.uniform()).collect();
        let ys: Vec<f64> = (0..16).map(|_| b.uniform()).collect();
        let zs: Vec<f64> = (0..16).map(|_| c.uniform()).collect();
        assert_eq!(xs, ys);
        assert_ne!(xs, zs);
        assert!(xs.iter().all(|u| (0.0..1.0).contains(u)));
    }

    #[test]
    fn run_seed_offsets_base() {
        assert_eq!(run_seed(100, 0), 100);
        assert_eq!(run_seed(100, 9), 109);
        assert_eq!(run_seed(u64::MAX, 1), 0);
    }
}
