//! Simulator for Wi-Fi fine timing measurement (802.11mc) round-trip ranging.
//!
//! - [`wire`]: FTM frames, the 24-octet codec, and the emulated integrity tag
//! - [`phy`]: clocks, timestamp quantization, multipath, path loss
//! - [`protocol`]: single and burst FTM exchanges producing t1..t4 and ranges
//! - [`estimators`]: RSSI ranging baseline and summary statistics
//! - [`adversary`]: sniffing, replay and rogue-responder attacks
//! - [`harness`]: presets, scenario files, batch runs and CSV export

pub mod adversary;
pub mod estimators;
pub mod harness;
pub mod phy;
pub mod protocol;
pub mod time;
pub mod wire;

pub use time::SimTime;
