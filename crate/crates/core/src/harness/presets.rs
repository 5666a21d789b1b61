//! Built-in device profiles, environments and the three benchmark setups.
//!
//! Sensitivities, multipath means and near-field parameters are fitted so
//! the simulated setups land in the reported error bands; they are not
//! measurements of the named chipsets.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::phy::{ChannelModel, ClockModel, DeviceProfile, Quantization};
use crate::protocol::SessionConfig;

pub const INDOOR_DISTANCES_M: [f64; 3] = [0.5, 1.0, 1.5];
pub const OUTDOOR_DISTANCES_M: [f64; 3] = [3.0, 5.0, 10.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Environment {
    Indoor,
    Outdoor,
}

impl Environment {
    pub fn name(self) -> &'static str {
        match self {
            Environment::Indoor => "indoor",
            Environment::Outdoor => "outdoor",
        }
    }

    pub fn channel(self) -> ChannelModel {
        match self {
            Environment::Indoor => ChannelModel {
                pathloss_exponent_n: 3.0,
                rssi_ref_dbm_a: -40.0,
                ref_tx_power_dbm: 20.0,
                multipath_mean_excess_ns: 20.0,
                fac_residual: 0.05,
                rssi_noise_db_std: 3.0,
            },
            Environment::Outdoor => ChannelModel {
                pathloss_exponent_n: 2.0,
                rssi_ref_dbm_a: -40.0,
                ref_tx_power_dbm: 20.0,
                multipath_mean_excess_ns: 5.0,
                fac_residual: 0.05,
                rssi_noise_db_std: 2.0,
            },
        }
    }

    pub fn distances_m(self) -> Vec<f64> {
        match self {
            Environment::Indoor => INDOOR_DISTANCES_M.to_vec(),
            Environment::Outdoor => OUTDOOR_DISTANCES_M.to_vec(),
        }
    }
}

impl fmt::Display for Environment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Environment {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "indoor" => Ok(Environment::Indoor),
            "outdoor" => Ok(Environment::Outdoor),
            other => Err(other.to_string()),
        }
    }
}

pub const DEVICE_NAMES: [&str; 4] = ["wcn3990-vht80", "qca4019-vht80", "esp32s2-ht20", "wcn3990-ht20"];

#[allow(clippy::too_many_arguments)]
fn profile(
    name: &str,
    band_mhz: u32,
    bandwidth_mhz: u32,
    antennas: u32,
    tx_power_dbm: f64,
    rx_sensitivity_dbm: f64,
    clock: ClockModel,
) -> DeviceProfile {
    DeviceProfile {
        name: name.to_string(),
        band_mhz,
        bandwidth_mhz,
        antennas,
        tx_power_dbm,
        rx_sensitivity_dbm,
        clock,
        near_field_range_m: 0.0,
        near_field_bias_ns: 0.0,
        near_field_ramp_start_m: 0.0,
        near_field_ramp_end_m: 0.0,
        quantization: Quantization::Sampled,
    }
}

fn with_near_field(mut d: DeviceProfile, bias_ns: f64) -> DeviceProfile {
    d.near_field_range_m = 2.0;
    d.near_field_bias_ns = bias_ns;
    d.near_field_ramp_start_m = 0.25;
    d.near_field_ramp_end_m = 1.0;
    d
}

pub fn device_preset(name: &str) -> Option<DeviceProfile> {
    let clock = |offset_ps, drift_ppm| ClockModel { offset_ps, drift_ppm };
    let d = match name {
        // Pixel 4a station, 2x2, 5 GHz VHT80
        "wcn3990-vht80" => profile(name, 5745, 80, 2, 17.0, -82.0, clock(250_000, 2.0)),
        // mesh AP responder, 5 GHz VHT80
        "qca4019-vht80" => profile(name, 5745, 80, 2, 23.0, -88.0, clock(-1_200_000, -1.5)),
        // FeatherS2 NEO, single antenna, 2.4 GHz HT20
        "esp32s2-ht20" => with_near_field(
            profile(name, 2412, 20, 1, 19.5, -90.0, clock(3_000_000, 10.0)),
            7.5,
        ),
        // Pixel 4a ranging over Wi-Fi Aware, restricted to HT20
        "wcn3990-ht20" => with_near_field(
            profile(name, 2412, 20, 2, 17.0, -85.0, clock(-750_000, 2.0)),
            7.0,
        ),
        _ => return None,
    };
    Some(d)
}

pub fn channel_preset(name: &str) -> Option<ChannelModel> {
    name.parse::<Environment>().ok().map(Environment::channel)
}

/// One of the three benchmark pairings.
#[derive(Debug, Clone, PartialEq)]
pub struct SetupPreset {
    pub name: &'static str,
    pub description: &'static str,
    pub initiator: DeviceProfile,
    pub responder: DeviceProfile,
    pub session: SessionConfig,
}

pub const SETUP_NAMES: [&str; 3] = ["config1", "config2", "config3"];

pub fn setup_preset(name: &str) -> Option<SetupPreset> {
    let dev = |n| device_preset(n).expect("built-in device");
    let setup = match name {
        "config1" => SetupPreset {
            name: "config1",
            description: "VHT80 5745 MHz, native ranging, WCN3990 -> QCA4019, burst 8",
            initiator: dev("wcn3990-vht80"),
            responder: dev("qca4019-vht80"),
            session: SessionConfig::burst(8),
        },
        "config2" => SetupPreset {
            name: "config2",
            description: "HT20 2412 MHz, native ranging, ESP32-S2 pair, burst 2",
            initiator: dev("esp32s2-ht20"),
            responder: dev("esp32s2-ht20"),
            session: SessionConfig::burst(2),
        },
        "config3" => SetupPreset {
            name: "config3",
            description: "HT20 2412 MHz, Wi-Fi Aware ranging, WCN3990 pair, burst 8",
            initiator: dev("wcn3990-ht20"),
            responder: dev("wcn3990-ht20"),
            session: SessionConfig::burst(8),
        },
        _ => return None,
    };
    Some(setup)
}

/// Everything built in, for listing.
#[derive(Debug, Clone)]
pub struct Presets {
    pub devices: Vec<DeviceProfile>,
    pub environments: Vec<(Environment, ChannelModel)>,
    pub setups: Vec<SetupPreset>,
}

pub fn builtin_presets() -> Presets {
    Presets {
        devices: DEVICE_NAMES.iter().filter_map(|n| device_preset(n)).collect(),
        environments: [Environment::Indoor, Environment::Outdoor]
            .into_iter()
            .map(|e| (e, e.channel()))
            .collect(),
        setups: SETUP_NAMES.iter().filter_map(|n| setup_preset(n)).collect(),
    }
}

impl fmt::Display for Presets {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "scenarios:")?;
        for s in &self.setups {
            writeln!(f, "  {:<8} {}", s.name, s.description)?;
        }
        writeln!(f, "devices:")?;
        for d in &self.devices {
            writeln!(
                f,
                "  {:<14} {} MHz, {} MHz wide, {} antenna(s), tx {} dBm, sens {} dBm",
                d.name, d.band_mhz, d.bandwidth_mhz, d.antennas, d.tx_power_dbm, d.rx_sensitivity_dbm
            )?;
        }
        writeln!(f, "environments:")?;
        for (e, c) in &self.environments {
            writeln!(
                f,
                "  {:<8} n={} A={} dBm, multipath {} ns x {} residual, distances {:?} m",
                e.name(),
                c.pathloss_exponent_n,
                c.rssi_ref_dbm_a,
                c.multipath_mean_excess_ns,
                c.fac_residual,
                e.distances_m()
            )?;
        }
        Ok(())
    }
}
