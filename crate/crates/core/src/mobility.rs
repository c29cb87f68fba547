//! Waypoint mobility traces in the BonnMotion text layout.
//!
//! One node per line, each line a run of `t x y z` quadruples. Times are in
//! seconds and coordinates in kilometres. Positions between waypoints are
//! linearly interpolated; outside the waypoint span a node stays at its first
//! or last waypoint.

use std::fmt::Write as _;
use std::ops::{Add, Mul, Sub};

use thiserror::Error;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Position {
    pub x: f64,
    pub y: f64,
    /// Altitude above the surface.
    pub z: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Position { x, y, z }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (*self - *other).norm()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dot(&self, other: &Position) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for Position {
    type Output = Position;
    fn add(self, rhs: Position) -> Position {
        Position::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl Sub for Position {
    type Output = Position;
    fn sub(self, rhs: Position) -> Position {
        Position::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl Mul<f64> for Position {
    type Output = Position;
    fn mul(self, k: f64) -> Position {
        Position::new(self.x * k, self.y * k, self.z * k)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Waypoint {
    /// Seconds.
    pub t: f64,
    pub pos: Position,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MobilityError {
    #[error("line {line}: {count} numbers is not a whole number of `t x y z` groups")]
    GroupCount { line: usize, count: usize },
    #[error("line {line}: `{token}` is not a number")]
    NotANumber { line: usize, token: String },
    #[error("line {line}: waypoint time {t} does not increase on {previous}")]
    NonIncreasingTime { line: usize, previous: f64, t: f64 },
    #[error("line {line}: invalid waypoint at t={t}: {reason}")]
    InvalidWaypoint {
        line: usize,
        t: f64,
        reason: &'static str,
    },
    #[error("node {node} out of range ({count} nodes in trace)")]
    NodeOutOfRange { node: usize, count: usize },
    #[error("node {node} has no waypoints")]
    EmptyNode { node: usize },
}

/// Per-node waypoint lists. Immutable once built.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MobilityTrace {
    nodes: Vec<Vec<Waypoint>>,
}

impl MobilityTrace {
    /// Validates the per-node invariants (non-empty, strictly increasing time,
    /// finite coordinates, non-negative altitude).
    pub fn from_nodes(nodes: Vec<Vec<Waypoint>>) -> Result<Self, MobilityError> {
        for (node, wps) in nodes.iter().enumerate() {
            if wps.is_empty() {
                return Err(MobilityError::EmptyNode { node });
            }
            check_waypoints(node + 1, wps)?;
        }
        Ok(MobilityTrace { nodes })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn waypoints(&self, node: usize) -> Result<&[Waypoint], MobilityError> {
        self.nodes
            .get(node)
            .map(Vec::as_slice)
            .ok_or(MobilityError::NodeOutOfRange {
                node,
                count: self.nodes.len(),
            })
    }

    pub fn position_at(&self, node: usize, t: f64) -> Result<Position, MobilityError> {
        Ok(interpolate(self.waypoints(node)?, t))
    }

    /// Serializes with shortest round-trip float formatting, so
    /// `parse_mobility_trace(&trace.to_text())` reproduces the trace exactly.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for wps in &self.nodes {
            for (i, wp) in wps.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                let _ = write!(out, "{} {} {} {}", wp.t, wp.pos.x, wp.pos.y, wp.pos.z);
            }
            out.push('\n');
        }
        out
    }
}

fn check_waypoints(line: usize, wps: &[Waypoint]) -> Result<(), MobilityError> {
    let mut previous: Option<f64> = None;
    for wp in wps {
        if !wp.t.is_finite() || wp.t < 0.0 {
            return Err(MobilityError::InvalidWaypoint {
                line,
                t: wp.t,
                reason: "time must be finite and non-negative",
            });
        }
        if !wp.pos.is_finite() {
            return Err(MobilityError::InvalidWaypoint {
                line,
                t: wp.t,
                reason: "coordinates must be finite",
            });
        }
        if wp.pos.z < 0.0 {
            return Err(MobilityError::InvalidWaypoint {
                line,
                t: wp.t,
                reason: "altitude must be non-negative",
            });
        }
        if let Some(previous) = previous {
            if wp.t <= previous {
                return Err(MobilityError::NonIncreasingTime {
                    line,
                    previous,
                    t: wp.t,
                });
            }
        }
        previous = Some(wp.t);
    }
    Ok(())
}

/// Parses a trace. Blank lines and lines starting with `#` are skipped; every
/// other line becomes the next node. Error line numbers are 1-based file lines.
pub fn parse_mobility_trace(text: &str) -> Result<MobilityTrace, MobilityError> {
    let mut nodes = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let numbers = trimmed
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>().map_err(|_| MobilityError::NotANumber {
                    line,
                    token: tok.to_owned(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        if numbers.len() % 4 != 0 {
            return Err(MobilityError::GroupCount {
                line,
                count: numbers.len(),
            });
        }
        let wps: Vec<Waypoint> = numbers
            .chunks_exact(4)
            .map(|q| Waypoint {
                t: q[0],
                pos: Position::new(q[1], q[2], q[3]),
            })
            .collect();
        check_waypoints(line, &wps)?;
        nodes.push(wps);
    }
    Ok(MobilityTrace { nodes })
}

fn interpolate(wps: &[Waypoint], t: f64) -> Position {
    let first = wps[0];
    let last = wps[wps.len() - 1];
    if t <= first.t {
        return first.pos;
    }
    if t >= last.t {
        return last.pos;
    }
    // first index with wp.t > t; 1..len-1 given the clamps above
    let hi = wps.partition_point(|wp| wp.t <= t);
    let (a, b) = (wps[hi - 1], wps[hi]);
    if t == a.t {
        return a.pos;
    }
    let s = (t - a.t) / (b.t - a.t);
    Position::new(
        a.pos.x + s * (b.pos.x - a.pos.x),
        a.pos.y + s * (b.pos.y - a.pos.y),
        a.pos.z + s * (b.pos.z - a.pos.z),
    )
}
