#![allow(dead_code)]

use ftmsim::phy::{ChannelModel, ClockModel, DeviceProfile, Quantization};

/// Single-antenna, perfectly clocked device with quantization turned off.
pub fn ideal_device() -> DeviceProfile {
    DeviceProfile {
        name: "ideal".into(),
        band_mhz: 5745,
        bandwidth_mhz: 80,
        antennas: 1,
        tx_power_dbm: 20.0,
        rx_sensitivity_dbm: -120.0,
        clock: ClockModel::default(),
        near_field_range_m: 0.0,
        near_field_bias_ns: 0.0,
        near_field_ramp_start_m: 0.0,
        near_field_ramp_end_m: 0.0,
        quantization: Quantization::Disabled,
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

pub fn population_std(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
}
