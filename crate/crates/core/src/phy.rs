//! Radio and clock error models.
//!
//! A reception's timestamp lags the true arrival by a detection delay made of
//! baseband sampling quantization (uniform over one sampling period), a
//! residual multipath excess left over after first-arrival correction, and
//! for some chipsets an extra bias at very short range. Receive power follows
//! the log-distance path-loss model and gates delivery against the
//! receiver's sensitivity.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::SimTime;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Speed of light in metres per picosecond.
pub const C_M_PER_PS: f64 = SPEED_OF_LIGHT * 1e-12;

pub const SUPPORTED_BANDWIDTHS_MHZ: [u32; 4] = [20, 40, 80, 160];
pub const MAX_DRIFT_PPM: f64 = 1000.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhyError {
    #[error("unsupported bandwidth {0} MHz (expected 20, 40, 80 or 160)")]
    UnsupportedBandwidth(u32),
    #[error("negative distance {0} m")]
    NegativeDistance(f64),
    #[error("distance must be positive for path loss, got {0} m")]
    NonPositiveDistance(f64),
    #[error("clock drift {0} ppm exceeds +/-{MAX_DRIFT_PPM} ppm")]
    DriftOutOfRange(f64),
    #[error("invalid device profile `{name}`: {reason}")]
    InvalidDevice { name: String, reason: String },
    #[error("invalid channel model: {0}")]
    InvalidChannel(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClockModel {
    #[serde(default)]
    pub offset_ps: i64,
    #[serde(default)]
    pub drift_ppm: f64,
}

impl ClockModel {
    pub fn validate(&self) -> Result<(), PhyError> {
        if !self.drift_ppm.is_finite() || self.drift_ppm.abs() > MAX_DRIFT_PPM {
            return Err(PhyError::DriftOutOfRange(self.drift_ppm));
        }
        Ok(())
    }

    /// What this clock reads at `true_time`.
    ///
    /// The drift term is rounded to the femtosecond before the integer offset
    /// is added, so offsets shift readings without touching any interval.
    pub fn read(&self, true_time: SimTime) -> SimTime {
        let drift_fs = (true_time.as_fs() as f64 * self.drift_ppm * 1e-6).round() as i64;
        true_time + SimTime::from_fs(drift_fs) + SimTime::from_ps(self.offset_ps)
    }
}

/// Picosecond-resolution clock reading.
pub fn clock_read_ps(true_time_ps: i64, clock: &ClockModel) -> i64 {
    clock.read(SimTime::from_ps(true_time_ps)).round_ps()
}

/// Whether a receiver's timestamps are quantized to its baseband sampling period.
///
/// `Disabled` models an unbounded sampling rate and exists for noiseless checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantization {
    #[default]
    Sampled,
    Disabled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceProfile {
    pub name: String,
    /// Channel centre frequency.
    pub band_mhz: u32,
    pub bandwidth_mhz: u32,
    pub antennas: u32,
    pub tx_power_dbm: f64,
    pub rx_sensitivity_dbm: f64,
    #[serde(default)]
    pub clock: ClockModel,
    /// Below this range the receiver picks up extra detection bias. 0 disables it.
    #[serde(default)]
    pub near_field_range_m: f64,
    /// Peak mean of the near-field bias.
    #[serde(default)]
    pub near_field_bias_ns: f64,
    /// The bias mean ramps linearly from zero at `near_field_ramp_start_m` to
    /// its peak at `near_field_ramp_end_m`. Equal values mean no ramp.
    #[serde(default)]
    pub near_field_ramp_start_m: f64,
    #[serde(default)]
    pub near_field_ramp_end_m: f64,
    #[serde(default)]
    pub quantization: Quantization,
}

impl DeviceProfile {
    pub fn validate(&self) -> Result<(), PhyError> {
        let bad = |reason: &str| PhyError::InvalidDevice {
            name: self.name.clone(),
            reason: reason.to_string(),
        };
        sampling_period_ns(self.bandwidth_mhz)?;
        if self.antennas == 0 {
            return Err(bad("antennas must be >= 1"));
        }
        if !(self.near_field_range_m >= 0.0) {
            return Err(bad("near_field_range_m must be >= 0"));
        }
        if !(self.near_field_bias_ns >= 0.0) {
            return Err(bad("near_field_bias_ns must be >= 0"));
        }
        if !(self.near_field_ramp_start_m >= 0.0)
            || !(self.near_field_ramp_end_m >= self.near_field_ramp_start_m)
        {
            return Err(bad("near-field ramp must satisfy 0 <= start <= end"));
        }
        if !self.tx_power_dbm.is_finite() || !self.rx_sensitivity_dbm.is_finite() {
            return Err(bad("power levels must be finite"));
        }
        self.clock.validate()
    }

    /// Sampling period in effect, zero when quantization is disabled.
    pub fn effective_sampling_period_ns(&self) -> f64 {
        match self.quantization {
            Quantization::Disabled => 0.0,
            Quantization::Sampled => sampling_period_ns(self.bandwidth_mhz).unwrap_or(0.0),
        }
    }

    /// Fixed receive latency the chipset removes from its own timestamps:
    /// the expected quantization delay, the mean of the minimum of
    /// `antennas` uniform draws over one sampling period.
    pub fn rx_timestamp_calibration(&self) -> SimTime {
        let ts_ps = self.effective_sampling_period_ns() * 1e3;
        SimTime::from_ps_f64(ts_ps / (self.antennas as f64 + 1.0))
    }

    /// Fraction of `near_field_bias_ns` applied at `distance_m`.
    pub fn near_field_weight(&self, distance_m: f64) -> f64 {
        if self.near_field_range_m <= 0.0 || distance_m >= self.near_field_range_m {
            return 0.0;
        }
        let (start, end) = (self.near_field_ramp_start_m, self.near_field_ramp_end_m);
        if end > start {
            ((distance_m - start) / (end - start)).clamp(0.0, 1.0)
        } else {
            1.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelModel {
    pub pathloss_exponent_n: f64,
    /// RSSI at 1 m when transmitting at `ref_tx_power_dbm`.
    pub rssi_ref_dbm_a: f64,
    pub ref_tx_power_dbm: f64,
    pub multipath_mean_excess_ns: f64,
    /// Share of the multipath excess that survives first-arrival correction.
    pub fac_residual: f64,
    pub rssi_noise_db_std: f64,
}

impl ChannelModel {
    pub fn validate(&self) -> Result<(), PhyError> {
        let bad = |s: &str| Err(PhyError::InvalidChannel(s.to_string()));
        if !(self.pathloss_exponent_n > 0.0) {
            return bad("pathloss_exponent_n must be > 0");
        }
        if !(self.multipath_mean_excess_ns >= 0.0) {
            return bad("multipath_mean_excess_ns must be >= 0");
        }
        if !(0.0..=1.0).contains(&self.fac_residual) {
            return bad("fac_residual must lie in [0, 1]");
        }
        if !(self.rssi_noise_db_std >= 0.0) {
            return bad("rssi_noise_db_std must be >= 0");
        }
        if !self.rssi_ref_dbm_a.is_finite() || !self.ref_tx_power_dbm.is_finite() {
            return bad("reference levels must be finite");
        }
        Ok(())
    }

    /// Mean multipath excess left after first-arrival correction.
    pub fn residual_excess_ns(&self) -> f64 {
        self.multipath_mean_excess_ns * self.fac_residual
    }
}

/// Seeded, platform-stable random stream.
#[derive(Debug, Clone)]
pub struct SimRng(ChaCha8Rng);

impl SimRng {
    pub fn new(seed: u64) -> Self {
        SimRng(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn uniform(&mut self, upper: f64) -> f64 {
        if upper > 0.0 {
            self.0.gen_range(0.0..upper)
        } else {
            0.0
        }
    }

    pub fn exponential(&mut self, mean: f64) -> f64 {
        if mean > 0.0 {
            Exp::new(1.0 / mean).expect("positive rate").sample(&mut self.0)
        } else {
            0.0
        }
    }

    pub fn gaussian(&mut self, std: f64) -> f64 {
        if std > 0.0 {
            Normal::new(0.0, std).expect("finite std").sample(&mut self.0)
        } else {
            0.0
        }
    }
}

impl RngCore for SimRng {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }
    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.0.fill_bytes(dest)
    }
    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.0.try_fill_bytes(dest)
    }
}

pub fn sampling_period_ns(bandwidth_mhz: u32) -> Result<f64, PhyError> {
    if SUPPORTED_BANDWIDTHS_MHZ.contains(&bandwidth_mhz) {
        Ok(1000.0 / bandwidth_mhz as f64)
    } else {
        Err(PhyError::UnsupportedBandwidth(bandwidth_mhz))
    }
}

/// One-way flight time over `distance_m`, in picoseconds.
pub fn propagation_delay_ps(distance_m: f64) -> Result<f64, PhyError> {
    if !(distance_m >= 0.0) {
        return Err(PhyError::NegativeDistance(distance_m));
    }
    Ok(distance_m / C_M_PER_PS)
}

pub fn rssi_at(
    distance_m: f64,
    channel: &ChannelModel,
    tx_power_dbm: f64,
    rng: &mut SimRng,
) -> Result<f64, PhyError> {
    if !(distance_m > 0.0) {
        return Err(PhyError::NonPositiveDistance(distance_m));
    }
    let mean = -10.0 * channel.pathloss_exponent_n * distance_m.log10()
        + channel.rssi_ref_dbm_a
        + (tx_power_dbm - channel.ref_tx_power_dbm);
    Ok(mean + rng.gaussian(channel.rssi_noise_db_std))
}

/// Delay between a frame's true arrival and the receiver's detection of it, in picoseconds.
pub fn detection_delay_ps(
    device: &DeviceProfile,
    channel: &ChannelModel,
    distance_m: f64,
    rng: &mut SimRng,
) -> f64 {
    let ts_ns = device.effective_sampling_period_ns();
    let excess_ns = channel.residual_excess_ns();
    let mut best_ns = f64::INFINITY;
    for _ in 0..device.antennas.max(1) {
        let branch = rng.uniform(ts_ns) + rng.exponential(excess_ns);
        best_ns = best_ns.min(branch);
    }
    let weight = device.near_field_weight(distance_m);
    if weight > 0.0 {
        best_ns += rng.exponential(device.near_field_bias_ns * weight);
    }
    (best_ns * 1e3).max(0.0)
}

/// Hard sensitivity threshold, inclusive.
pub fn frame_delivered(rssi_dbm: f64, device: &DeviceProfile) -> bool {
    rssi_dbm >= device.rx_sensitivity_dbm
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    pub fn device(bandwidth_mhz: u32, antennas: u32) -> DeviceProfile {
        DeviceProfile {
            name: format!("bw{bandwidth_mhz}x{antennas}"),
            band_mhz: 5745,
            bandwidth_mhz,
            antennas,
            tx_power_dbm: 20.0,
            rx_sensitivity_dbm: -90.0,
            clock: ClockModel::default(),
            near_field_range_m: 0.0,
            near_field_bias_ns: 0.0,
            near_field_ramp_start_m: 0.0,
            near_field_ramp_end_m: 0.0,
            quantization: Quantization::Sampled,
        }
    }

    pub fn quiet_channel() -> ChannelModel {
        ChannelModel {
            pathloss_exponent_n: 2.0,
            rssi_ref_dbm_a: -40.0,
            ref_tx_power_dbm: 20.0,
            multipath_mean_excess_ns: 0.0,
            fac_residual: 0.0,
            rssi_noise_db_std: 0.0,
        }
    }
}
