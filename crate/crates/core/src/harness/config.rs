//! Scenario files.
//!
//! A scenario is a TOML document whose keys are the [`Scenario`] field names.
//! Devices and the channel may be given inline or by preset name, and a
//! `preset` key pulls in one of the benchmark setups:
//!
//! ```toml
//! name = "office"
//! preset = "config1"          # optional: devices + session of a setup
//! seed = 7                    # default 0
//! duration_s = 25.0           # default 25
//! sample_interval_ms = 380.0  # default 380
//! distances_m = [0.5, 1.0]    # default: the environment's distance set
//! channel = "indoor"          # or an inline [channel] table
//! initiator = "wcn3990-vht80" # or an inline [initiator] table
//!
//! [session]                   # any subset of the session fields
//! pn_check = true
//!
//! [attacker]
//! kind = "Replayer"
//! replay_delay_samples = 3
//! ```

use serde::Deserialize;
use thiserror::Error;

use super::presets::{device_preset, setup_preset, Environment};
use crate::adversary::AttackerConfig;
use crate::phy::{ChannelModel, DeviceProfile};
use crate::protocol::{BurstAverage, Mode, SessionConfig};
use crate::wire::AuthKey;

pub const DEFAULT_DURATION_S: f64 = 25.0;
pub const DEFAULT_SAMPLE_INTERVAL_MS: f64 = 380.0;
pub const DEFAULT_SEED: u64 = 0;
pub const MIN_DISTANCE_M: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    /// Setup preset the scenario was derived from, or `custom`.
    pub config_name: String,
    pub seed: u64,
    pub duration_s: f64,
    pub sample_interval_ms: f64,
    pub distances_m: Vec<f64>,
    pub initiator: DeviceProfile,
    pub responder: DeviceProfile,
    pub channel: ChannelModel,
    pub session: SessionConfig,
    pub attacker: Option<AttackerConfig>,
    /// `key=value` notes for every default that was filled in.
    pub defaults_applied: Vec<String>,
}

impl Scenario {
    /// A benchmark setup in one environment with the default sampling regime.
    pub fn from_setup(setup: &str, environment: Environment) -> Result<Self, ConfigError> {
        let preset = setup_preset(setup).ok_or_else(|| ConfigError::UnknownPreset(setup.to_string()))?;
        let s = Scenario {
            name: format!("{setup}-{environment}"),
            config_name: setup.to_string(),
            seed: DEFAULT_SEED,
            duration_s: DEFAULT_DURATION_S,
            sample_interval_ms: DEFAULT_SAMPLE_INTERVAL_MS,
            distances_m: environment.distances_m(),
            initiator: preset.initiator,
            responder: preset.responder,
            channel: environment.channel(),
            session: preset.session,
            attacker: None,
            defaults_applied: Vec::new(),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// floor(duration / interval) + 1, counting the sample at t = 0.
    pub fn samples_per_distance(&self) -> u32 {
        // tolerate binary noise such as 0.3 s / 100 ms = 2.9999999999999996
        ((self.duration_s * 1000.0 / self.sample_interval_ms) + 1e-9).floor() as u32 + 1
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |s: String| Err(ConfigError::Validation(s));
        if self.name.is_empty()
            || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c))
        {
            return bad(format!("name `{}` must be non-empty [A-Za-z0-9._-]", self.name));
        }
        if !(self.duration_s > 0.0) || !self.duration_s.is_finite() {
            return bad("duration_s must be > 0".into());
        }
        if !(self.sample_interval_ms > 0.0) || !self.sample_interval_ms.is_finite() {
            return bad("sample_interval_ms must be > 0".into());
        }
        if self.distances_m.is_empty() {
            return bad("distances_m must not be empty".into());
        }
        if let Some(d) = self.distances_m.iter().find(|d| !(**d >= MIN_DISTANCE_M) || !d.is_finite()) {
            return bad(format!("distance {d} m is below the {MIN_DISTANCE_M} m minimum"));
        }
        let mut seen = self.distances_m.clone();
        seen.sort_by(f64::total_cmp);
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return bad("distances_m must not repeat".into());
        }
        self.initiator.validate().map_err(|e| ConfigError::Validation(e.to_string()))?;
        self.responder.validate().map_err(|e| ConfigError::Validation(e.to_string()))?;
        self.channel.validate().map_err(|e| ConfigError::Validation(e.to_string()))?;
        self.session.validate().map_err(|e| ConfigError::Validation(e.to_string()))?;
        if let Some(a) = &self.attacker {
            a.validate().map_err(|e| ConfigError::Validation(e.to_string()))?;
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum DeviceSpec {
    Preset(String),
    Inline(DeviceProfile),
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ChannelSpec {
    Preset(String),
    Inline(ChannelModel),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SessionOverrides {
    mode: Option<Mode>,
    burst_size: Option<u32>,
    turnaround_ns: Option<u64>,
    inter_measurement_ns: Option<u64>,
    protected: Option<bool>,
    pn_check: Option<bool>,
    key: Option<AuthKey>,
    averaging: Option<BurstAverage>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: Option<String>,
    preset: Option<String>,
    seed: Option<u64>,
    duration_s: Option<f64>,
    sample_interval_ms: Option<f64>,
    distances_m: Option<Vec<f64>>,
    initiator: Option<DeviceSpec>,
    responder: Option<DeviceSpec>,
    channel: Option<ChannelSpec>,
    session: Option<SessionOverrides>,
    attacker: Option<AttackerConfig>,
}

fn resolve_device(spec: DeviceSpec) -> Result<DeviceProfile, ConfigError> {
    match spec {
        DeviceSpec::Preset(name) => device_preset(&name).ok_or(ConfigError::UnknownPreset(name)),
        DeviceSpec::Inline(d) => Ok(d),
    }
}

pub fn load_scenario(config_text: &str) -> Result<Scenario, ConfigError> {
    let file: ScenarioFile = toml::from_str(config_text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let mut defaults = Vec::new();

    let setup = match &file.preset {
        Some(p) => Some(setup_preset(p).ok_or_else(|| ConfigError::UnknownPreset(p.clone()))?),
        None => None,
    };

    let (channel, environment) = match file.channel {
        Some(ChannelSpec::Preset(name)) => {
            let env: Environment = name.parse().map_err(ConfigError::UnknownPreset)?;
            (env.channel(), Some(env))
        }
        Some(ChannelSpec::Inline(c)) => (c, None),
        None if setup.is_some() => {
            defaults.push("channel=indoor".to_string());
            (Environment::Indoor.channel(), Some(Environment::Indoor))
        }
        None => return Err(ConfigError::Validation("channel is required without a preset".into())),
    };

    let initiator = match (file.initiator, &setup) {
        (Some(spec), _) => resolve_device(spec)?,
        (None, Some(s)) => s.initiator.clone(),
        (None, None) => return Err(ConfigError::Validation("initiator is required without a preset".into())),
    };
    let responder = match (file.responder, &setup) {
        (Some(spec), _) => resolve_device(spec)?,
        (None, Some(s)) => s.responder.clone(),
        (None, None) => return Err(ConfigError::Validation("responder is required without a preset".into())),
    };

    let distances_m = match (file.distances_m, environment) {
        (Some(d), _) => d,
        (None, Some(env)) => {
            defaults.push(format!("distances_m={:?}", env.distances_m()));
            env.distances_m()
        }
        (None, None) => {
            return Err(ConfigError::Validation(
                "distances_m is required with an inline channel".into(),
            ))
        }
    };

    let mut session = setup.as_ref().map_or_else(SessionConfig::single, |s| s.session.clone());
    if let Some(o) = file.session {
        if let Some(b) = o.burst_size {
            session.burst_size = b;
            session.mode = if b == 1 { Mode::Single } else { Mode::Burst };
        }
        if let Some(m) = o.mode {
            session.mode = m;
        }
        if let Some(v) = o.turnaround_ns {
            session.turnaround_ns = v;
        }
        if let Some(v) = o.inter_measurement_ns {
            session.inter_measurement_ns = v;
        }
        if let Some(v) = o.protected {
            session.protected = v;
        }
        if let Some(v) = o.pn_check {
            session.pn_check = v;
        }
        if o.key.is_some() {
            session.key = o.key;
        }
        if let Some(v) = o.averaging {
            session.averaging = v;
        }
    }

    let seed = file.seed.unwrap_or_else(|| {
        defaults.push(format!("seed={DEFAULT_SEED}"));
        DEFAULT_SEED
    });
    let duration_s = file.duration_s.unwrap_or_else(|| {
        defaults.push(format!("duration_s={DEFAULT_DURATION_S}"));
        DEFAULT_DURATION_S
    });
    let sample_interval_ms = file.sample_interval_ms.unwrap_or_else(|| {
        defaults.push(format!("sample_interval_ms={DEFAULT_SAMPLE_INTERVAL_MS}"));
        DEFAULT_SAMPLE_INTERVAL_MS
    });
    let config_name = file.preset.clone().unwrap_or_else(|| "custom".to_string());
    let name = match file.name {
        Some(n) => n,
        None => {
            let n = match environment {
                Some(env) => format!("{config_name}-{env}"),
                None => config_name.clone(),
            };
            defaults.push(format!("name={n}"));
            n
        }
    };

    let scenario = Scenario {
        name,
        config_name,
        seed,
        duration_s,
        sample_interval_ms,
        distances_m,
        initiator,
        responder,
        channel,
        session,
        attacker: file.attacker,
        defaults_applied: defaults,
    };
    scenario.validate()?;
    Ok(scenario)
}
