//! Browser bindings for three interactive views of the simulator models:
//! the link-budget curve, a Monte Carlo radio sweep and a TDMA schedule
//! grid. Each view has a plain Rust function (tested natively) and a thin
//! `wasm_bindgen` wrapper that flattens the result into a typed array.

use aerosim::linkbudget::{fspl_db, radio_horizon_km, received_power_dbm, snr_db, LinkBudgetParams};
use aerosim::radio::{validate_radio, RadioConfig, SnrPerTable, ValidationPoint};
use aerosim::tdma::{BufferReport, TdmaScheduler};
use wasm_bindgen::prelude::*;

/// One point of the link-budget curve. Beyond the horizon `fspl_db` and
/// `snr_db` are `None` and the PER is 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub distance_km: f64,
    pub fspl_db: Option<f64>,
    pub snr_db: Option<f64>,
    pub per: f64,
}

/// `points` evenly spaced distances in `(0, max_km]` at frequency `f_mhz`,
/// with the transmit power of the default calibrated link.
pub fn link_curve(f_mhz: f64, h_tx_km: f64, h_rx_km: f64, max_km: f64, points: usize) -> Result<Vec<CurvePoint>, String> {
    if !(max_km > 0.0) || points == 0 {
        return Err("need a positive distance and at least one point".into());
    }
    let link = LinkBudgetParams {
        f_mhz,
        ..LinkBudgetParams::default()
    };
    link.validate().map_err(|e| e.to_string())?;
    let table = SnrPerTable::default();
    (1..=points)
        .map(|i| {
            let d = max_km * i as f64 / points as f64;
            let loss = fspl_db(d, f_mhz, h_tx_km, h_rx_km).map_err(|e| e.to_string())?;
            let snr = received_power_dbm(&link, loss).map(|p| snr_db(&link, p));
            Ok(CurvePoint {
                distance_km: d,
                fspl_db: loss.db(),
                snr_db: snr,
                per: snr.map_or(1.0, |s| table.per(s)),
            })
        })
        .collect()
}

/// Observed versus table PER for `points` distances in `[min_km, max_km]`,
/// both ends at the validation altitude. The unit-disk range is set to
/// `max_km` so the sweep shows the channel rather than the cutoff.
pub fn radio_sweep(min_km: f64, max_km: f64, points: usize, packets: u32, seed: u64) -> Result<Vec<ValidationPoint>, String> {
    if !(min_km > 0.0 && max_km > min_km) || points < 2 {
        return Err("need 0 < min < max and at least two points".into());
    }
    let config = RadioConfig::new(max_km, SnrPerTable::default(), LinkBudgetParams::default()).map_err(|e| e.to_string())?;
    let distances: Vec<f64> = (0..points)
        .map(|i| min_km + (max_km - min_km) * i as f64 / (points - 1) as f64)
        .collect();
    validate_radio(&config, &distances, packets, seed).map_err(|e| e.to_string())
}

/// Round-robin schedules for `frames` consecutive frames. Node `i` starts
/// with `backlog[i]` packets; each frame it reports what is left, so the
/// grid shows both fairness and draining. Entries are node indices.
pub fn tdma_frames(backlog: &[u32], slots: usize, frames: usize) -> Result<Vec<Vec<Option<usize>>>, String> {
    if slots == 0 {
        return Err("a frame needs at least one slot".into());
    }
    let mut scheduler = TdmaScheduler::new();
    for node in 0..backlog.len() {
        scheduler.register(node).map_err(|e| e.to_string())?;
    }
    let mut left = backlog.to_vec();
    let mut grid = Vec::with_capacity(frames);
    for frame in 0..frames {
        for (node, &queued) in left.iter().enumerate() {
            scheduler
                .report_buffer(BufferReport { node, queued })
                .map_err(|e| e.to_string())?;
        }
        let schedule = scheduler.compute_schedule(frame as u64, slots);
        for node in schedule.assignments.iter().flatten() {
            left[*node] -= 1;
        }
        grid.push(schedule.assignments);
    }
    Ok(grid)
}

fn js_err(msg: String) -> JsValue {
    JsValue::from_str(&msg)
}

#[wasm_bindgen(js_name = horizonKm)]
pub fn horizon_km(h_tx_km: f64, h_rx_km: f64) -> Result<f64, JsValue> {
    radio_horizon_km(h_tx_km, h_rx_km).map_err(|e| js_err(e.to_string()))
}

/// Flattened `[d, fspl, snr, per]` rows; NaN marks "beyond the horizon".
#[wasm_bindgen(js_name = linkCurve)]
pub fn link_curve_js(f_mhz: f64, h_tx_km: f64, h_rx_km: f64, max_km: f64, points: usize) -> Result<Vec<f64>, JsValue> {
    let curve = link_curve(f_mhz, h_tx_km, h_rx_km, max_km, points).map_err(js_err)?;
    Ok(curve
        .iter()
        .flat_map(|p| [p.distance_km, p.fspl_db.unwrap_or(f64::NAN), p.snr_db.unwrap_or(f64::NAN), p.per])
        .collect())
}

/// Flattened `[d, expected, observed]` rows.
#[wasm_bindgen(js_name = radioSweep)]
pub fn radio_sweep_js(min_km: f64, max_km: f64, points: usize, packets: u32, seed: u32) -> Result<Vec<f64>, JsValue> {
    let sweep = radio_sweep(min_km, max_km, points, packets, u64::from(seed)).map_err(js_err)?;
    Ok(sweep
        .iter()
        .flat_map(|p| [p.distance_km, p.expected_per, p.observed_per])
        .collect())
}

/// Row-major `frames x slots` grid of node indices, -1 for an idle slot.
#[wasm_bindgen(js_name = tdmaFrames)]
pub fn tdma_frames_js(backlog: Vec<u32>, slots: usize, frames: usize) -> Result<Vec<i32>, JsValue> {
    let grid = tdma_frames(&backlog, slots, frames).map_err(js_err)?;
    Ok(grid
        .iter()
        .flatten()
        .map(|slot| slot.map_or(-1, |n| n as i32))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_hits_calibration_point() {
        let curve = link_curve(968.0, 10.0, 0.0001, 370.4, 4).unwrap();
        let last = curve.last().unwrap();
        assert!((last.snr_db.unwrap() - 8.0).abs() < 1e-9);
        assert_eq!(last.per, 0.1);
        assert!(curve.windows(2).all(|w| w[0].snr_db > w[1].snr_db));
    }

    #[test]
    fn curve_goes_blank_past_horizon() {
        let curve = link_curve(968.0, 10.0, 0.0001, 1000.0, 10).unwrap();
        let horizon = radio_horizon_km(10.0, 0.0001).unwrap();
        for p in curve {
            assert_eq!(p.snr_db.is_none(), p.distance_km >= horizon, "{p:?}");
        }
    }

    #[test]
    fn sweep_is_monotone_in_expectation() {
        let sweep = radio_sweep(200.0, 800.0, 7, 500, 3).unwrap();
        assert_eq!(sweep.len(), 7);
        assert!(sweep.windows(2).all(|w| w[0].expected_per <= w[1].expected_per));
        assert!(radio_sweep(10.0, 5.0, 3, 10, 1).is_err());
    }

    #[test]
    fn frames_drain_fairly() {
        let grid = tdma_frames(&[4, 4, 4], 10, 2).unwrap();
        let f0: Vec<_> = grid[0].iter().map(|s| s.unwrap()).collect();
        assert_eq!(f0, [0, 1, 2, 0, 1, 2, 0, 1, 2, 0]);
        // 2 packets left in total: node 1 then node 2.
        assert_eq!(&grid[1][..3], &[Some(1), Some(2), None]);
    }

    #[test]
    fn zero_slots_rejected() {
        assert!(tdma_frames(&[1], 0, 1).is_err());
    }
}
