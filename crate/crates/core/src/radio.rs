//! Table-driven radio: SNR -> (PER, BER) nearest-match lookup on top of a
//! unit-disk range check, with one Bernoulli draw per reception.

use std::cmp::Ordering;

use thiserror::Error;

use crate::engine::RngStream;
use crate::linkbudget::{link_snr_db, LinkBudgetError, LinkBudgetParams};
use crate::mobility::Position;

/// The shipped 41-row staircase from -2 dB to 18 dB.
pub const DEFAULT_SNR_TABLE: &str = include_str!("../data/snr_per_default.csv");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RadioError {
    #[error("line {line}: expected `snr,per,ber`, found {found} field(s)")]
    FieldCount { line: usize, found: usize },
    #[error("line {line}: `{token}` is not a number")]
    NotANumber { line: usize, token: String },
    #[error("line {line}: {name} {value} outside [0, 1]")]
    ProbabilityOutOfRange {
        line: usize,
        name: &'static str,
        value: f64,
    },
    #[error("line {line}: SNR {snr} dB is not finite")]
    NonFiniteSnr { line: usize, snr: f64 },
    #[error("duplicate SNR {snr} dB on line {line}")]
    DuplicateSnr { line: usize, snr: f64 },
    #[error("SNR table has no rows")]
    EmptyTable,
    #[error("radio range must be positive, got {0} km")]
    InvalidRange(f64),
    #[error("packets per distance must be at least 1")]
    NoPackets,
    #[error(transparent)]
    Link(#[from] LinkBudgetError),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SnrRow {
    pub snr_db: f64,
    pub per: f64,
    /// Parsed and validated; reception decisions only use PER.
    pub ber: f64,
}

/// Rows sorted strictly ascending by SNR, never empty.
#[derive(Clone, Debug, PartialEq)]
pub struct SnrPerTable {
    rows: Vec<SnrRow>,
}

impl SnrPerTable {
    pub fn new(mut rows: Vec<SnrRow>) -> Result<Self, RadioError> {
        for (i, row) in rows.iter().enumerate() {
            check_row(i + 1, row)?;
        }
        sort_unique(&mut rows, |i| i + 1)?;
        Ok(SnrPerTable { rows })
    }

    pub fn rows(&self) -> &[SnrRow] {
        &self.rows
    }

    /// Row with the SNR closest to `snr_db`. Ties go to the lower SNR; no
    /// interpolation between rows.
    pub fn lookup(&self, snr_db: f64) -> SnrRow {
        let rows = &self.rows;
        let hi = rows.partition_point(|r| r.snr_db < snr_db);
        if hi == 0 {
            return rows[0];
        }
        if hi == rows.len() {
            return rows[rows.len() - 1];
        }
        let (below, above) = (rows[hi - 1], rows[hi]);
        if above.snr_db - snr_db < snr_db - below.snr_db {
            above
        } else {
            below
        }
    }

    pub fn per(&self, snr_db: f64) -> f64 {
        self.lookup(snr_db).per
    }
}

impl Default for SnrPerTable {
    fn default() -> Self {
        parse_snr_table(DEFAULT_SNR_TABLE).expect("built-in table is valid")
    }
}

fn check_row(line: usize, row: &SnrRow) -> Result<(), RadioError> {
    if !row.snr_db.is_finite() {
        return Err(RadioError::NonFiniteSnr {
            line,
            snr: row.snr_db,
        });
    }
    for (name, value) in [("PER", row.per), ("BER", row.ber)] {
        if !(0.0..=1.0).contains(&value) {
            return Err(RadioError::ProbabilityOutOfRange { line, name, value });
        }
    }
    Ok(())
}

// Sorts by SNR and rejects duplicates; `line_of` maps original index to a line.
fn sort_unique(rows: &mut Vec<SnrRow>, line_of: impl Fn(usize) -> usize) -> Result<(), RadioError> {
    if rows.is_empty() {
        return Err(RadioError::EmptyTable);
    }
    let mut indexed: Vec<(usize, SnrRow)> = rows.drain(..).enumerate().collect();
    indexed.sort_by(|a, b| a.1.snr_db.partial_cmp(&b.1.snr_db).unwrap_or(Ordering::Equal));
    for pair in indexed.windows(2) {
        if pair[0].1.snr_db == pair[1].1.snr_db {
            return Err(RadioError::DuplicateSnr {
                line: line_of(pair[0].0.max(pair[1].0)),
                snr: pair[1].1.snr_db,
            });
        }
    }
    rows.extend(indexed.into_iter().map(|(_, r)| r));
    Ok(())
}

/// Parses `snr_db,per,ber` lines. Blank lines and `#` comments are skipped.
pub fn parse_snr_table(text: &str) -> Result<SnrPerTable, RadioError> {
    let mut rows = Vec::new();
    let mut lines = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(RadioError::FieldCount {
                line,
                found: fields.len(),
            });
        }
        let mut values = [0.0; 3];
        for (slot, tok) in values.iter_mut().zip(&fields) {
            *slot = tok.parse().map_err(|_| RadioError::NotANumber {
                line,
                token: (*tok).to_owned(),
            })?;
        }
        let row = SnrRow {
            snr_db: values[0],
            per: values[1],
            ber: values[2],
        };
        check_row(line, &row)?;
        rows.push(row);
        lines.push(line);
    }
    sort_unique(&mut rows, |i| lines[i])?;
    Ok(SnrPerTable { rows })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RadioConfig {
    /// Unit-disk communication range, km.
    pub range_km: f64,
    pub table: SnrPerTable,
    pub link: LinkBudgetParams,
}

impl RadioConfig {
    pub fn new(range_km: f64, table: SnrPerTable, link: LinkBudgetParams) -> Result<Self, RadioError> {
        if !(range_km > 0.0) || !range_km.is_finite() {
            return Err(RadioError::InvalidRange(range_km));
        }
        link.validate()?;
        Ok(RadioConfig {
            range_km,
            table,
            link,
        })
    }

    /// Loss probability expected for `tx -> rx`: the table PER when
    /// reachable, 1 when out of range or beyond the horizon.
    pub fn expected_per(&self, tx: Position, rx: Position) -> Result<f64, RadioError> {
        Ok(match self.reachable_snr(tx, rx)? {
            Some(snr) => self.table.per(snr),
            None => 1.0,
        })
    }

    fn reachable_snr(&self, tx: Position, rx: Position) -> Result<Option<f64>, RadioError> {
        if tx.distance(&rx) > self.range_km {
            return Ok(None);
        }
        Ok(link_snr_db(&self.link, tx, rx)?)
    }
}

impl Default for RadioConfig {
    /// 400 km range, the shipped table, calibrated link parameters.
    fn default() -> Self {
        RadioConfig {
            range_km: 400.0,
            table: SnrPerTable::default(),
            link: LinkBudgetParams::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Reception {
    Delivered,
    LostChannel,
    OutOfRange,
}

/// One reception attempt. Draws from `rng` only when the receiver is reachable.
pub fn attempt_reception(
    config: &RadioConfig,
    tx: Position,
    rx: Position,
    rng: &mut RngStream,
) -> Result<Reception, RadioError> {
    let Some(snr) = config.reachable_snr(tx, rx)? else {
        return Ok(Reception::OutOfRange);
    };
    let per = config.table.per(snr);
    Ok(if rng.uniform() >= per {
        Reception::Delivered
    } else {
        Reception::LostChannel
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ValidationPoint {
    pub distance_km: f64,
    pub expected_per: f64,
    pub observed_per: f64,
}

/// Receiver altitude of the validation geometry; both ends fly at this height.
pub const VALIDATION_ALTITUDE_KM: f64 = 30.0;

/// Fires `packets_per_distance` attempts from `(d, 0, 30)` to `(0, 0, 30)` for
/// every `d`. Unreachable attempts count as losses, and their expected PER is 1.
pub fn validate_radio(
    config: &RadioConfig,
    distances_km: &[f64],
    packets_per_distance: u32,
    seed: u64,
) -> Result<Vec<ValidationPoint>, RadioError> {
    if packets_per_distance == 0 {
        return Err(RadioError::NoPackets);
    }
    let rx = Position::new(0.0, 0.0, VALIDATION_ALTITUDE_KM);
    let mut rng = RngStream::new(seed, "radio");
    distances_km
        .iter()
        .map(|&d| {
            let tx = Position::new(d, 0.0, VALIDATION_ALTITUDE_KM);
            let expected_per = config.expected_per(tx, rx)?;
            let mut lost = 0u32;
            for _ in 0..packets_per_distance {
                if attempt_reception(config, tx, rx, &mut rng)? != Reception::Delivered {
                    lost += 1;
                }
            }
            Ok(ValidationPoint {
                distance_km: d,
                expected_per,
                observed_per: f64::from(lost) / f64::from(packets_per_distance),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table(rows: &[(f64, f64)]) -> SnrPerTable {
        SnrPerTable::new(
            rows.iter()
                .map(|&(snr_db, per)| SnrRow {
                    snr_db,
                    per,
                    ber: 0.0,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn parses_examples() {
        let t = parse_snr_table("8.0,0.1,0.0001").unwrap();
        assert_eq!(
            t.rows(),
            &[SnrRow {
                snr_db: 8.0,
                per: 0.1,
                ber: 0.0001
            }]
        );
        let t = parse_snr_table("10,0,0\n5,1,0").unwrap();
        let snrs: Vec<f64> = t.rows().iter().map(|r| r.snr_db).collect();
        assert_eq!(snrs, vec![5.0, 10.0]);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(
            parse_snr_table("5,1.2,0"),
            Err(RadioError::ProbabilityOutOfRange { line: 1, name: "PER", .. })
        ));
        assert_eq!(parse_snr_table(""), Err(RadioError::EmptyTable));
        assert_eq!(parse_snr_table("# nothing\n"), Err(RadioError::EmptyTable));
        assert!(matches!(
            parse_snr_table("1,0,0\n2,x,0"),
            Err(RadioError::NotANumber { line: 2, .. })
        ));
        assert!(matches!(
            parse_snr_table("1,0,0\n# c\n1.0,0.5,0"),
            Err(RadioError::DuplicateSnr { line: 3, .. })
        ));
        assert!(matches!(
            parse_snr_table("1,0"),
            Err(RadioError::FieldCount { line: 1, found: 2 })
        ));
        assert!(matches!(
            parse_snr_table("1,0,-0.1"),
            Err(RadioError::ProbabilityOutOfRange { name: "BER", .. })
        ));
    }

    #[test]
    fn nearest_match_lookup() {
        let t = table(&[(7.0, 0.3), (8.0, 0.1)]);
        assert_eq!(t.per(7.9), 0.1);
        assert_eq!(t.per(8.0), 0.1);
        // 7.5 is exactly halfway between 7.0 and 8.0
        assert_eq!(8.0 - 7.5, 7.5 - 7.0);
        assert_eq!(t.per(7.5), 0.3);
        assert_eq!(t.per(-100.0), 0.3);
        assert_eq!(t.per(100.0), 0.1);
    }

    #[test]
    fn default_table_shape() {
        let t = SnrPerTable::default();
        let rows = t.rows();
        assert_eq!(rows.len(), 41);
        assert_eq!((rows[0].snr_db, rows[0].per), (-2.0, 1.0));
        assert_eq!((rows[40].snr_db, rows[40].per), (18.0, 0.0));
        assert_eq!(t.lookup(8.0).per, 0.1);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.snr_db, -2.0 + 0.5 * i as f64);
        }
        assert!(rows.windows(2).all(|w| w[1].per <= w[0].per));
    }

    fn fixed_geometry() -> (Position, Position) {
        (Position::new(370.4, 0.0, 10.0), Position::new(0.0, 0.0, 0.0001))
    }

    #[test]
    fn certain_outcomes() {
        let (tx, rx) = fixed_geometry();
        let mut rng = RngStream::new(1, "radio");
        let mut cfg = RadioConfig::default();
        cfg.table = table(&[(8.0, 0.0)]);
        assert!((0..500).all(|_| attempt_reception(&cfg, tx, rx, &mut rng).unwrap() == Reception::Delivered));
        cfg.table = table(&[(8.0, 1.0)]);
        assert!((0..500).all(|_| attempt_reception(&cfg, tx, rx, &mut rng).unwrap() == Reception::LostChannel));
    }

    #[test]
    fn out_of_range_and_beyond_horizon() {
        let cfg = RadioConfig::default();
        let mut rng = RngStream::new(1, "radio");
        let rx = Position::new(0.0, 0.0, 0.0001);
        let far = Position::new(401.0, 0.0, 10.0);
        assert_eq!(attempt_reception(&cfg, far, rx, &mut rng).unwrap(), Reception::OutOfRange);
        // within range but the ground station is barely above the surface
        let wide = RadioConfig {
            range_km: 5000.0,
            ..RadioConfig::default()
        };
        let low = Position::new(300.0, 0.0, 0.5);
        assert_eq!(attempt_reception(&wide, low, rx, &mut rng).unwrap(), Reception::OutOfRange);
        assert_eq!(wide.expected_per(low, rx).unwrap(), 1.0);
    }

    #[test]
    fn bernoulli_rate_at_fixed_geometry() {
        let (tx, rx) = fixed_geometry();
        let cfg = RadioConfig::default();
        let mut rng = RngStream::new(7, "radio");
        let n = 10_000;
        let delivered = (0..n)
            .filter(|_| attempt_reception(&cfg, tx, rx, &mut rng).unwrap() == Reception::Delivered)
            .count();
        let frac = delivered as f64 / n as f64;
        assert!((frac - 0.9).abs() <= 0.010, "{frac}");
    }

    #[test]
    fn validation_half_loss_and_zero_loss() {
        let cfg = RadioConfig {
            range_km: 2000.0,
            table: table(&[(-50.0, 0.5), (100.0, 0.0)]),
            link: LinkBudgetParams::default(),
        };
        // every distance here has SNR far below 100 dB, so PER 0.5
        let pts = validate_radio(&cfg, &[300.0], 10_000, 3).unwrap();
        assert_eq!(pts[0].expected_per, 0.5);
        assert!((pts[0].observed_per - 0.5).abs() <= 0.015);

        let cfg = RadioConfig {
            table: table(&[(0.0, 0.0)]),
            ..cfg
        };
        let pts = validate_radio(&cfg, &[300.0], 777, 3).unwrap();
        assert_eq!(pts[0].observed_per, 0.0);
        assert_eq!(validate_radio(&cfg, &[300.0], 0, 3), Err(RadioError::NoPackets));
    }

    #[test]
    fn range_must_be_positive() {
        assert_eq!(
            RadioConfig::new(0.0, SnrPerTable::default(), LinkBudgetParams::default()),
            Err(RadioError::InvalidRange(0.0))
        );
    }

    proptest! {
        #[test]
        fn lookup_returns_a_nearest_row(
            snrs in prop::collection::btree_set(-400i32..400, 1..20),
            q in -60.0f64..60.0,
        ) {
            let rows: Vec<(f64, f64)> = snrs.iter().map(|&s| (f64::from(s) / 8.0, 0.5)).collect();
            let t = table(&rows);
            let hit = t.lookup(q);
            let best = rows.iter().map(|r| (r.0 - q).abs()).fold(f64::INFINITY, f64::min);
            prop_assert_eq!((hit.snr_db - q).abs(), best);
            // idempotent and exact on grid points
            prop_assert_eq!(t.lookup(hit.snr_db), hit);
        }

        #[test]
        fn never_delivers_beyond_range(x in 400.001f64..3000.0, seed in any::<u64>()) {
            let cfg = RadioConfig { table: table(&[(0.0, 0.0)]), ..RadioConfig::default() };
            let mut rng = RngStream::new(seed, "radio");
            let r = attempt_reception(&cfg, Position::new(x, 0.0, 10.0), Position::new(0.0, 0.0, 10.0), &mut rng).unwrap();
            prop_assert_eq!(r, Reception::OutOfRange);
        }
    }
}
