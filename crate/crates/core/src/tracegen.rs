//! Couples mobility to message generation.
//!
//! Each leg of a piecewise-linear flight path is intersected with the OCA
//! sphere in closed form. Crossing inward produces an `Entry`, crossing
//! outward an `Exit`, and both become message timestamps. Synthetic
//! straight-line flights stand in for recorded flight tracks.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::engine::RngStream;
use crate::mobility::{MobilityError, MobilityTrace, Position, Waypoint};
use crate::traffic::MessageTrace;

#[derive(Debug, Error)]
pub enum TracegenError {
    #[error("OCA range must be positive, got {0} km")]
    InvalidRange(f64),
    #[error("infeasible flight corridor: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Mobility(#[from] MobilityError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OcaSpec {
    /// Ground station position.
    pub center: Position,
    pub range_km: f64,
}

impl OcaSpec {
    pub fn new(center: Position, range_km: f64) -> Result<Self, TracegenError> {
        if !(range_km > 0.0) || !range_km.is_finite() {
            return Err(TracegenError::InvalidRange(range_km));
        }
        Ok(OcaSpec { center, range_km })
    }

    /// Membership is by 3D distance, boundary included.
    pub fn contains(&self, p: Position) -> bool {
        p.distance(&self.center) <= self.range_km
    }
}

impl Default for OcaSpec {
    /// 370.4 km around a ground station at 0.1 m altitude.
    fn default() -> Self {
        OcaSpec {
            center: Position::new(0.0, 0.0, 0.0001),
            range_km: 370.4,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Crossing {
    Entry,
    Exit,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrossingEvent {
    pub t: f64,
    pub kind: Crossing,
}

/// Entry/exit times of `node` through the OCA sphere.
///
/// Tangential touches (double roots) produce nothing, and neither does an
/// entry immediately undone at the same instant.
pub fn detect_crossings(
    trace: &MobilityTrace,
    node: usize,
    oca: &OcaSpec,
) -> Result<Vec<CrossingEvent>, MobilityError> {
    let wps = trace.waypoints(node)?;
    let r2 = oca.range_km * oca.range_km;
    let mut inside = oca.contains(wps[0].pos);
    let mut events: Vec<CrossingEvent> = Vec::new();
    for leg in wps.windows(2) {
        let (a, b) = (leg[0], leg[1]);
        let v = b.pos - a.pos;
        let w = a.pos - oca.center;
        // |w + s v|^2 - r^2 = qa s^2 + 2 qb s + qc for s in [0, 1]
        let qa = v.dot(&v);
        if qa == 0.0 {
            continue;
        }
        let qb = w.dot(&v);
        let qc = w.dot(&w) - r2;
        let disc = qb * qb - qa * qc;
        if disc <= 0.0 {
            continue;
        }
        let q = -(qb + qb.signum() * disc.sqrt());
        let q = if q == 0.0 { -disc.sqrt() } else { q };
        let (mut s1, mut s2) = (q / qa, qc / q);
        if s1 > s2 {
            std::mem::swap(&mut s1, &mut s2);
        }
        let at = |s: f64| a.t + s * (b.t - a.t);
        if !inside && s1 > 0.0 && s1 <= 1.0 {
            events.push(CrossingEvent {
                t: at(s1),
                kind: Crossing::Entry,
            });
            inside = true;
        }
        if inside && (0.0..1.0).contains(&s2) {
            let t = at(s2);
            match events.last() {
                Some(e) if e.kind == Crossing::Entry && e.t == t => {
                    events.pop();
                }
                _ => events.push(CrossingEvent {
                    t,
                    kind: Crossing::Exit,
                }),
            }
            inside = false;
        }
    }
    Ok(events)
}

/// One timestamp per crossing, in the message-trace file format.
pub fn write_message_trace(events: &[CrossingEvent]) -> String {
    let mut out = String::new();
    for e in events {
        let _ = writeln!(out, "{}", e.t);
    }
    out
}

pub fn crossings_to_trace(events: &[CrossingEvent]) -> MessageTrace {
    let mut ts: Vec<f64> = events.iter().map(|e| e.t).collect();
    ts.dedup();
    MessageTrace::new(ts).expect("crossing times are non-negative and increasing")
}

/// Geometry of generated straight-line flights.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlightCorridor {
    pub altitude_km: f64,
    pub speed_km_s: f64,
    /// Minimum distance between a flight's end points and the OCA boundary.
    pub margin_km: f64,
    /// Lateral offset from the center as a fraction of the OCA radius at
    /// flight level; below 1 so every track is a proper chord.
    pub max_offset_fraction: f64,
}

impl Default for FlightCorridor {
    fn default() -> Self {
        FlightCorridor {
            altitude_km: 10.0,
            speed_km_s: 0.25,
            margin_km: 100.0,
            max_offset_fraction: 0.9,
        }
    }
}

impl FlightCorridor {
    /// Longest flight the generator can produce, seconds.
    pub fn max_duration_s(&self, oca: &OcaSpec) -> f64 {
        2.0 * (oca.range_km + 2.0 * self.margin_km) / self.speed_km_s
    }

    pub fn check(&self, oca: &OcaSpec, sim_end_s: f64) -> Result<(), TracegenError> {
        let bad = |msg: String| Err(TracegenError::Infeasible(msg));
        if !(self.speed_km_s > 0.0) || !self.speed_km_s.is_finite() {
            return bad(format!("speed {} km/s must be positive", self.speed_km_s));
        }
        if !(self.altitude_km >= 0.0) || !self.altitude_km.is_finite() {
            return bad(format!("altitude {} km must be non-negative", self.altitude_km));
        }
        if !(self.margin_km >= 100.0) || !self.margin_km.is_finite() {
            return bad(format!("margin {} km must be at least 100 km", self.margin_km));
        }
        if !(self.max_offset_fraction >= 0.0 && self.max_offset_fraction < 1.0) {
            return bad(format!(
                "offset fraction {} must lie in [0, 1)",
                self.max_offset_fraction
            ));
        }
        if (self.altitude_km - oca.center.z).abs() >= oca.range_km {
            return bad(format!(
                "flight level {} km never intersects the OCA sphere",
                self.altitude_km
            ));
        }
        let longest = self.max_duration_s(oca);
        if longest > sim_end_s {
            return bad(format!(
                "flights may last {longest:.1} s but the simulation ends at {sim_end_s} s"
            ));
        }
        Ok(())
    }
}

/// `n` straight, constant-altitude flights whose tracks cut through the OCA.
///
/// Each flight has two waypoints, each at least `margin_km` outside the OCA,
/// and both fall within `[0, sim_end_s]`.
pub fn generate_synthetic_flights(
    n: usize,
    oca: &OcaSpec,
    corridor: &FlightCorridor,
    sim_end_s: f64,
    rng: &mut RngStream,
) -> Result<MobilityTrace, TracegenError> {
    corridor.check(oca, sim_end_s)?;
    let dz = corridor.altitude_km - oca.center.z;
    let r = oca.range_km;
    let radius_at_level = (r * r - dz * dz).sqrt();
    let mut nodes = Vec::with_capacity(n);
    for _ in 0..n {
        let heading = rng.uniform_range(0.0, TAU);
        let offset = rng.uniform_range(-1.0, 1.0) * corridor.max_offset_fraction * radius_at_level;
        let standoff = r + corridor.margin_km + rng.uniform_range(0.0, corridor.margin_km);
        let half_length = (standoff * standoff - offset * offset - dz * dz).sqrt();
        let duration = 2.0 * half_length / corridor.speed_km_s;
        let depart = rng.uniform_range(0.0, sim_end_s - duration);

        let along = Position::new(heading.cos(), heading.sin(), 0.0);
        let across = Position::new(-heading.sin(), heading.cos(), 0.0);
        let foot = Position::new(oca.center.x, oca.center.y, corridor.altitude_km) + across * offset;
        nodes.push(vec![
            Waypoint {
                t: depart,
                pos: foot - along * half_length,
            },
            Waypoint {
                t: depart + duration,
                pos: foot + along * half_length,
            },
        ]);
    }
    Ok(MobilityTrace::from_nodes(nodes)?)
}

/// Message traces derived from a mobility trace, one per aircraft.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceBundle {
    pub mobility: MobilityTrace,
    pub messages: Vec<MessageTrace>,
}

impl TraceBundle {
    pub fn from_mobility(mobility: MobilityTrace, oca: &OcaSpec) -> Result<Self, MobilityError> {
        let messages = (0..mobility.node_count())
            .map(|node| detect_crossings(&mobility, node, oca).map(|ev| crossings_to_trace(&ev)))
            .collect::<Result<_, _>>()?;
        Ok(TraceBundle { mobility, messages })
    }

    /// Writes `mobility.txt`, `traffic/nodeNNNN.csv` per aircraft and
    /// `manifest.csv` binding each aircraft's trace to `destination`.
    pub fn write_to_dir(&self, dir: &Path, destination: usize, payload_bytes: u32) -> Result<(), TracegenError> {
        let io_err = |path: &Path| {
            let path = path.to_path_buf();
            move |source| TracegenError::Io { path, source }
        };
        let traffic = dir.join("traffic");
        fs::create_dir_all(&traffic).map_err(io_err(&traffic))?;
        let mobility = dir.join(MOBILITY_FILE);
        fs::write(&mobility, self.mobility.to_text()).map_err(io_err(&mobility))?;
        let mut manifest = String::from("# node,message_trace,destination,payload_bytes\n");
        for (node, trace) in self.messages.iter().enumerate() {
            let rel = format!("traffic/node{node:04}.csv");
            let path = dir.join(&rel);
            fs::write(&path, trace.to_text()).map_err(io_err(&path))?;
            let _ = writeln!(manifest, "{node},{rel},{destination},{payload_bytes}");
        }
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, manifest).map_err(io_err(&path))
    }
}

pub const MOBILITY_FILE: &str = "mobility.txt";
pub const MANIFEST_FILE: &str = "manifest.csv";

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mobility::parse_mobility_trace;
    use crate::traffic::parse_message_trace;

    fn flight(text: &str) -> MobilityTrace {
        parse_mobility_trace(text).unwrap()
    }

    // inside/outside sampled every 1 ms; returns the first sample in each new state
    fn sampled(trace: &MobilityTrace, oca: &OcaSpec) -> Vec<(f64, Crossing)> {
        let wps = trace.waypoints(0).unwrap();
        let (t0, t1) = (wps[0].t, wps[wps.len() - 1].t);
        let steps = ((t1 - t0) / 1e-3).ceil() as u64;
        let mut inside = oca.contains(wps[0].pos);
        let mut out = Vec::new();
        for k in 1..=steps {
            let t = (t0 + k as f64 * 1e-3).min(t1);
            let now = oca.contains(trace.position_at(0, t).unwrap());
            if now != inside {
                out.push((t, if now { Crossing::Entry } else { Crossing::Exit }));
                inside = now;
            }
        }
        out
    }

    #[test]
    fn straight_pass_matches_sampling() {
        let oca = OcaSpec::default();
        let trace = flight("0 -500 0 10 1000 500 0 10");
        let ev = detect_crossings(&trace, 0, &oca).unwrap();
        assert_eq!(ev.len(), 2);
        assert_eq!((ev[0].kind, ev[1].kind), (Crossing::Entry, Crossing::Exit));
        assert!((ev[0].t - 129.7).abs() < 0.05, "{}", ev[0].t);
        assert!((ev[1].t - 870.3).abs() < 0.05, "{}", ev[1].t);
        let oracle = sampled(&trace, &oca);
        assert_eq!(oracle.len(), 2);
        for (e, (t, kind)) in ev.iter().zip(oracle) {
            assert_eq!(e.kind, kind);
            assert!((e.t - t).abs() <= 1e-3);
        }
    }

    #[test]
    fn path_outside_has_no_crossings() {
        let oca = OcaSpec::default();
        let trace = flight("0 -500 400 10 1000 500 400 10");
        assert!(detect_crossings(&trace, 0, &oca).unwrap().is_empty());
    }

    #[test]
    fn leaving_once_is_a_single_exit() {
        let oca = OcaSpec::default();
        let trace = flight("0 0 0 10 100 100 0 10 500 500 300 10");
        let ev = detect_crossings(&trace, 0, &oca).unwrap();
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].kind, Crossing::Exit);
        let oracle = sampled(&trace, &oca);
        assert_eq!(oracle.len(), 1);
        assert!((ev[0].t - oracle[0].0).abs() <= 1e-3);
    }

    #[test]
    fn tangent_touch_is_ignored() {
        let oca = OcaSpec::new(Position::new(0.0, 0.0, 0.0), 100.0).unwrap();
        let trace = flight("0 -300 100 0 600 300 100 0");
        assert!(detect_crossings(&trace, 0, &oca).unwrap().is_empty());
    }

    #[test]
    fn multi_leg_reentry_alternates() {
        let oca = OcaSpec::default();
        let trace = flight("0 -600 0 10 400 -200 0 10 800 -600 0 10 1400 600 0 10");
        let ev = detect_crossings(&trace, 0, &oca).unwrap();
        let kinds: Vec<Crossing> = ev.iter().map(|e| e.kind).collect();
        use Crossing::*;
        assert_eq!(kinds, vec![Entry, Exit, Entry, Exit]);
        assert!(ev.windows(2).all(|w| w[0].t < w[1].t));
    }

    #[test]
    fn write_and_parse_message_trace() {
        let ev = [
            CrossingEvent {
                t: 129.7,
                kind: Crossing::Entry,
            },
            CrossingEvent {
                t: 870.3,
                kind: Crossing::Exit,
            },
        ];
        assert_eq!(write_message_trace(&ev), "129.7\n870.3\n");
        assert_eq!(write_message_trace(&[]), "");
        assert_eq!(parse_message_trace(&write_message_trace(&ev)).unwrap().timestamps(), &[129.7, 870.3]);
    }

    #[test]
    fn synthetic_flights_each_cross_once() {
        let oca = OcaSpec::default();
        let corridor = FlightCorridor::default();
        let mut rng = RngStream::new(5, "tracegen");
        assert_eq!(
            generate_synthetic_flights(0, &oca, &corridor, 10_000.0, &mut rng).unwrap().node_count(),
            0
        );
        let trace = generate_synthetic_flights(40, &oca, &corridor, 10_000.0, &mut rng).unwrap();
        for node in 0..trace.node_count() {
            let wps = trace.waypoints(node).unwrap();
            assert!(wps[0].t >= 0.0 && wps[1].t <= 10_000.0);
            for wp in wps {
                assert!(wp.pos.distance(&oca.center) >= oca.range_km + 100.0 - 1e-9);
            }
            let kinds: Vec<Crossing> = detect_crossings(&trace, node, &oca).unwrap().iter().map(|e| e.kind).collect();
            assert_eq!(kinds, vec![Crossing::Entry, Crossing::Exit]);
        }
    }

    #[test]
    fn infeasible_corridors() {
        let oca = OcaSpec::default();
        let mut rng = RngStream::new(5, "tracegen");
        let high = FlightCorridor {
            altitude_km: 400.0,
            ..FlightCorridor::default()
        };
        assert!(matches!(
            generate_synthetic_flights(1, &oca, &high, 10_000.0, &mut rng),
            Err(TracegenError::Infeasible(_))
        ));
        assert!(matches!(
            generate_synthetic_flights(1, &oca, &FlightCorridor::default(), 1000.0, &mut rng),
            Err(TracegenError::Infeasible(_))
        ));
        assert!(OcaSpec::new(Position::default(), 0.0).is_err());
    }

    #[test]
    fn bundle_writes_manifest() {
        let dir = std::env::temp_dir().join(format!("aerosim-bundle-{}", std::process::id()));
        let trace = flight("0 -500 0 10 1000 500 0 10\n0 -500 400 10 1000 500 400 10");
        let bundle = TraceBundle::from_mobility(trace, &OcaSpec::default()).unwrap();
        assert_eq!(bundle.messages[0].len(), 2);
        assert!(bundle.messages[1].is_empty());
        bundle.write_to_dir(&dir, 2, 100).unwrap();
        let manifest = fs::read_to_string(dir.join(MANIFEST_FILE)).unwrap();
        assert!(manifest.contains("0,traffic/node0000.csv,2,100\n"));
        assert_eq!(fs::read_to_string(dir.join("traffic/node0001.csv")).unwrap(), "");
        fs::remove_dir_all(&dir).unwrap();
    }
}
