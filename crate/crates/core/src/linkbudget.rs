//! Link budget: radio horizon, free-space path loss, received power and SNR.
//!
//! Distances and heights are in kilometres, frequency in MHz, powers in dBm.

use thiserror::Error;

use crate::mobility::Position;

/// FSPL constant for km/MHz units, used as published rather than derived from c.
pub const FSPL_CONSTANT_DB: f64 = 32.4478;

/// Horizon coefficient for heights in km.
pub const HORIZON_COEFFICIENT_KM: f64 = 130.4;

/// The default transmit power is solved so that a link of this length ...
pub const CALIBRATION_DISTANCE_KM: f64 = 370.4;
/// ... sees exactly this SNR.
pub const CALIBRATION_SNR_DB: f64 = 8.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinkBudgetError {
    #[error("antenna height must be non-negative, got {0} km")]
    NegativeHeight(f64),
    #[error("distance must be positive, got {0} km")]
    NonPositiveDistance(f64),
    #[error("frequency must be positive, got {0} MHz")]
    NonPositiveFrequency(f64),
    #[error("transmitter and receiver share the same position")]
    CoincidentPositions,
    #[error("invalid link parameter {name}: {value}")]
    InvalidParam { name: &'static str, value: f64 },
}

/// RF constants of one link. Gains are dBi, losses dB.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkBudgetParams {
    pub p_tx_dbm: f64,
    pub g_tx_dbi: f64,
    pub l_tx_db: f64,
    pub g_rx_dbi: f64,
    pub l_rx_db: f64,
    pub f_mhz: f64,
    pub noise_figure_db: f64,
    /// Thermal noise density, dBm/Hz.
    pub n0_dbm_hz: f64,
    pub bandwidth_hz: f64,
}

impl LinkBudgetParams {
    /// 968 MHz, 6 dB noise figure, -174 dBm/Hz, 500 kHz, no gains or losses,
    /// and a transmit power of zero. Use [`Self::calibrated`] for a usable set.
    pub const fn uncalibrated() -> Self {
        LinkBudgetParams {
            p_tx_dbm: 0.0,
            g_tx_dbi: 0.0,
            l_tx_db: 0.0,
            g_rx_dbi: 0.0,
            l_rx_db: 0.0,
            f_mhz: 968.0,
            noise_figure_db: 6.0,
            n0_dbm_hz: -174.0,
            bandwidth_hz: 500_000.0,
        }
    }

    /// Replaces the transmit power with the one giving `snr_db` over a link of
    /// `distance_km`, inverting FSPL, received power and SNR in closed form.
    pub fn calibrated(self, distance_km: f64, snr_db: f64) -> Result<Self, LinkBudgetError> {
        self.validate()?;
        if !(distance_km > 0.0) {
            return Err(LinkBudgetError::NonPositiveDistance(distance_km));
        }
        let loss = free_space_loss(distance_km, self.f_mhz);
        let p_tx_dbm = snr_db + self.noise_floor_dbm() + loss - self.g_tx_dbi + self.l_tx_db
            - self.g_rx_dbi
            + self.l_rx_db;
        Ok(LinkBudgetParams { p_tx_dbm, ..self })
    }

    pub fn validate(&self) -> Result<(), LinkBudgetError> {
        let fields = [
            ("p_tx_dbm", self.p_tx_dbm),
            ("g_tx_dbi", self.g_tx_dbi),
            ("l_tx_db", self.l_tx_db),
            ("g_rx_dbi", self.g_rx_dbi),
            ("l_rx_db", self.l_rx_db),
            ("f_mhz", self.f_mhz),
            ("noise_figure_db", self.noise_figure_db),
            ("n0_dbm_hz", self.n0_dbm_hz),
            ("bandwidth_hz", self.bandwidth_hz),
        ];
        for (name, value) in fields {
            if !value.is_finite() {
                return Err(LinkBudgetError::InvalidParam { name, value });
            }
        }
        if self.f_mhz <= 0.0 {
            return Err(LinkBudgetError::NonPositiveFrequency(self.f_mhz));
        }
        if self.bandwidth_hz <= 0.0 {
            return Err(LinkBudgetError::InvalidParam {
                name: "bandwidth_hz",
                value: self.bandwidth_hz,
            });
        }
        Ok(())
    }

    /// F_N + N0 + 10 log10(B), in dBm.
    pub fn noise_floor_dbm(&self) -> f64 {
        self.noise_figure_db + self.n0_dbm_hz + 10.0 * self.bandwidth_hz.log10()
    }
}

impl Default for LinkBudgetParams {
    /// [`LinkBudgetParams::uncalibrated`] with the transmit power calibrated
    /// to 8 dB SNR at 370.4 km.
    fn default() -> Self {
        Self::uncalibrated()
            .calibrated(CALIBRATION_DISTANCE_KM, CALIBRATION_SNR_DB)
            .expect("built-in parameters are valid")
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PathLoss {
    Finite(f64),
    /// Beyond the radio horizon.
    Infinite,
}

impl PathLoss {
    pub fn db(self) -> Option<f64> {
        match self {
            PathLoss::Finite(db) => Some(db),
            PathLoss::Infinite => None,
        }
    }
}

pub fn radio_horizon_km(h_tx_km: f64, h_rx_km: f64) -> Result<f64, LinkBudgetError> {
    for h in [h_tx_km, h_rx_km] {
        if !(h >= 0.0) {
            return Err(LinkBudgetError::NegativeHeight(h));
        }
    }
    Ok(HORIZON_COEFFICIENT_KM * (h_tx_km.sqrt() + h_rx_km.sqrt()))
}

fn free_space_loss(d_km: f64, f_mhz: f64) -> f64 {
    20.0 * d_km.log10() + 20.0 * f_mhz.log10() + FSPL_CONSTANT_DB
}

/// Free-space path loss, infinite at or beyond the radio horizon.
pub fn fspl_db(d_km: f64, f_mhz: f64, h_tx_km: f64, h_rx_km: f64) -> Result<PathLoss, LinkBudgetError> {
    if !(d_km > 0.0) {
        return Err(LinkBudgetError::NonPositiveDistance(d_km));
    }
    if !(f_mhz > 0.0) {
        return Err(LinkBudgetError::NonPositiveFrequency(f_mhz));
    }
    if d_km < radio_horizon_km(h_tx_km, h_rx_km)? {
        Ok(PathLoss::Finite(free_space_loss(d_km, f_mhz)))
    } else {
        Ok(PathLoss::Infinite)
    }
}

/// Received power in dBm, `None` when the path loss is infinite.
pub fn received_power_dbm(params: &LinkBudgetParams, loss: PathLoss) -> Option<f64> {
    let loss = loss.db()?;
    Some(params.p_tx_dbm + params.g_tx_dbi - params.l_tx_db + params.g_rx_dbi - params.l_rx_db - loss)
}

pub fn snr_db(params: &LinkBudgetParams, p_rx_dbm: f64) -> f64 {
    p_rx_dbm - params.noise_floor_dbm()
}

/// SNR of the link `tx -> rx` using slant distance and the z coordinates as
/// antenna heights. `None` beyond the radio horizon.
pub fn link_snr_db(
    params: &LinkBudgetParams,
    tx: Position,
    rx: Position,
) -> Result<Option<f64>, LinkBudgetError> {
    let d = tx.distance(&rx);
    if d == 0.0 {
        return Err(LinkBudgetError::CoincidentPositions);
    }
    let loss = fspl_db(d, params.f_mhz, tx.z, rx.z)?;
    Ok(received_power_dbm(params, loss).map(|p_rx| snr_db(params, p_rx)))
}
