//! Trace-driven traffic: each application emits one fixed-size message at
//! every timestamp of its trace file. There is no start time, stop time or
//! send interval; the trace alone decides when messages exist.

use std::fmt::Write as _;

use thiserror::Error;

use crate::engine::{EngineError, EventKind, EventQueue, SimTime};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrafficError {
    #[error("line {line}: `{token}` is not a timestamp")]
    NotANumber { line: usize, token: String },
    #[error("line {line}: timestamp {t} is negative or not finite")]
    InvalidTimestamp { line: usize, t: f64 },
    #[error("line {line}: timestamp {t} does not increase on {previous}")]
    NotIncreasing { line: usize, previous: f64, t: f64 },
    #[error("payload size must be at least one byte")]
    EmptyPayload,
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Strictly increasing message timestamps in seconds.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MessageTrace {
    timestamps: Vec<f64>,
}

impl MessageTrace {
    pub fn new(timestamps: Vec<f64>) -> Result<Self, TrafficError> {
        let mut previous = None;
        for (i, &t) in timestamps.iter().enumerate() {
            check_timestamp(i + 1, previous, t)?;
            previous = Some(t);
        }
        Ok(MessageTrace { timestamps })
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    /// One timestamp per line, formatted so that parsing returns the same values.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for t in &self.timestamps {
            let _ = writeln!(out, "{t}");
        }
        out
    }
}

fn check_timestamp(line: usize, previous: Option<f64>, t: f64) -> Result<(), TrafficError> {
    if !t.is_finite() || t < 0.0 {
        return Err(TrafficError::InvalidTimestamp { line, t });
    }
    match previous {
        Some(previous) if t <= previous => Err(TrafficError::NotIncreasing { line, previous, t }),
        _ => Ok(()),
    }
}

pub fn parse_message_trace(text: &str) -> Result<MessageTrace, TrafficError> {
    let mut timestamps = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let token = raw.trim();
        if token.is_empty() || token.starts_with('#') {
            continue;
        }
        let t: f64 = token.parse().map_err(|_| TrafficError::NotANumber {
            line,
            token: token.to_owned(),
        })?;
        check_timestamp(line, timestamps.last().copied(), t)?;
        timestamps.push(t);
    }
    Ok(MessageTrace { timestamps })
}

#[derive(Clone, Debug, PartialEq)]
pub struct AppConfig {
    pub destination: usize,
    pub payload_size: u32,
    pub trace: MessageTrace,
}

impl AppConfig {
    pub fn new(destination: usize, payload_size: u32, trace: MessageTrace) -> Result<Self, TrafficError> {
        if payload_size == 0 {
            return Err(TrafficError::EmptyPayload);
        }
        Ok(AppConfig {
            destination,
            payload_size,
            trace,
        })
    }
}

/// Default payload for the entry/exit report; the size is not published.
pub const DEFAULT_PAYLOAD_BYTES: u32 = 100;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Packet {
    pub source: usize,
    pub destination: usize,
    pub size: u32,
    pub created_at: SimTime,
    /// Per-source counter, shared by all apps on the node.
    pub sequence: u64,
    pub app: usize,
}

/// Schedules one `MessageDue` per timestamp in `[0, sim_end]` and returns how
/// many were scheduled. Later timestamps are dropped.
pub fn drive_app(
    app: &AppConfig,
    source: usize,
    app_index: usize,
    sim_end: SimTime,
    queue: &mut EventQueue,
) -> Result<usize, TrafficError> {
    let mut scheduled = 0;
    for (index, &t) in app.trace.timestamps().iter().enumerate() {
        let at = SimTime::from_secs_f64(t)?;
        if at > sim_end {
            break;
        }
        queue.schedule(
            at,
            EventKind::MessageDue {
                node: source,
                app: app_index,
                index,
            },
        )?;
        scheduled += 1;
    }
    Ok(scheduled)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn secs(t: f64) -> SimTime {
        SimTime::from_secs_f64(t).unwrap()
    }

    #[test]
    fn parse_examples() {
        assert_eq!(parse_message_trace("129.6\n870.4").unwrap().timestamps(), &[129.6, 870.4]);
        assert!(parse_message_trace("").unwrap().is_empty());
        assert!(matches!(
            parse_message_trace("5\n5"),
            Err(TrafficError::NotIncreasing { line: 2, .. })
        ));
        assert!(matches!(
            parse_message_trace("# t\n-1"),
            Err(TrafficError::InvalidTimestamp { line: 2, .. })
        ));
        assert!(matches!(
            parse_message_trace("1\nabc"),
            Err(TrafficError::NotANumber { line: 2, .. })
        ));
    }

    fn app(ts: Vec<f64>) -> AppConfig {
        AppConfig::new(1, DEFAULT_PAYLOAD_BYTES, MessageTrace::new(ts).unwrap()).unwrap()
    }

    fn due_times(q: &mut EventQueue) -> Vec<(SimTime, EventKind)> {
        std::iter::from_fn(|| q.pop()).map(|e| (e.time, e.kind)).collect()
    }

    #[test]
    fn drives_each_timestamp_once() {
        let mut q = EventQueue::new();
        assert_eq!(drive_app(&app(vec![100.0, 200.0]), 0, 0, secs(10000.0), &mut q).unwrap(), 2);
        let times: Vec<SimTime> = due_times(&mut q).into_iter().map(|e| e.0).collect();
        assert_eq!(times, vec![secs(100.0), secs(200.0)]);
    }

    #[test]
    fn truncates_at_sim_end_inclusive() {
        let mut q = EventQueue::new();
        assert_eq!(drive_app(&app(vec![100.0, 20000.0]), 0, 0, secs(10000.0), &mut q).unwrap(), 1);
        assert_eq!(drive_app(&app(vec![10000.0]), 0, 0, secs(10000.0), &mut q).unwrap(), 1);
    }

    #[test]
    fn two_apps_interleave_by_time() {
        let mut q = EventQueue::new();
        drive_app(&app(vec![10.0, 30.0]), 4, 0, secs(100.0), &mut q).unwrap();
        drive_app(&app(vec![20.0, 40.0]), 4, 1, secs(100.0), &mut q).unwrap();
        let apps: Vec<usize> = due_times(&mut q)
            .into_iter()
            .map(|(_, k)| match k {
                EventKind::MessageDue { app, .. } => app,
                other => panic!("{other:?}"),
            })
            .collect();
        assert_eq!(apps, vec![0, 1, 0, 1]);
    }

    #[test]
    fn zero_payload_rejected() {
        assert_eq!(
            AppConfig::new(0, 0, MessageTrace::default()),
            Err(TrafficError::EmptyPayload)
        );
    }

    proptest! {
        #[test]
        fn text_round_trip(steps in prop::collection::vec(1e-6f64..1e3, 0..30)) {
            let mut t = 0.0;
            let ts: Vec<f64> = steps.iter().map(|dt| { t += dt; t }).collect();
            let trace = MessageTrace::new(ts).unwrap();
            prop_assert_eq!(parse_message_trace(&trace.to_text()).unwrap(), trace);
        }
    }
}
