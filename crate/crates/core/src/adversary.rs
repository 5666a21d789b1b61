//! Attacks on FTM ranging and the checks that stop them.
//!
//! | threat            | attack here        | mitigation enforced            |
//! |-------------------|--------------------|--------------------------------|
//! | location tracking | [`sniff`]          | frame protection (keyed tag)   |
//! | replay            | [`replay`]         | packet-number check            |
//! | forged timestamps | [`rogue_t1_bias`]  | none; the responder is trusted |
//!
//! Rogue-device detection via rekeying and privilege escalation are
//! application-layer concerns and are not simulated.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::phy::{ChannelModel, DeviceProfile, SimRng};
use crate::protocol::{rtt_to_distance_m, ProtocolError, ResponderFaults, Session, SessionConfig};
use crate::time::SimTime;
use crate::wire::{
    decode_frame, encode_frame, parse_frame_log, verify_auth_tag, AuthKey, CapturedFrame,
    FrameType, FtmFrame, WireError,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdversaryError {
    #[error("malformed frame log: {0}")]
    MalformedLog(String),
    #[error("invalid attacker config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

impl From<WireError> for AdversaryError {
    fn from(e: WireError) -> Self {
        AdversaryError::MalformedLog(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttackerKind {
    Sniffer,
    Replayer,
    RogueResponder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackerConfig {
    pub kind: AttackerKind,
    #[serde(default)]
    pub t1_bias_ps: i64,
    #[serde(default = "default_replay_delay")]
    pub replay_delay_samples: u32,
    /// Whether the attacker holds the session key.
    #[serde(default)]
    pub key_known: bool,
}

fn default_replay_delay() -> u32 {
    1
}

impl AttackerConfig {
    pub fn validate(&self) -> Result<(), AdversaryError> {
        if self.t1_bias_ps != 0 && self.kind != AttackerKind::RogueResponder {
            return Err(AdversaryError::InvalidConfig(
                "t1_bias_ps only applies to RogueResponder".into(),
            ));
        }
        if self.kind == AttackerKind::Replayer && self.replay_delay_samples == 0 {
            return Err(AdversaryError::InvalidConfig(
                "replay_delay_samples must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Mechanism {
    AcceptedPlaintext,
    AcceptedNoPnCheck,
    AcceptedForgedTag,
    AcceptedRogueT1,
    RejectedRedacted,
    RejectedDuplicatePn,
    RejectedBadTag,
}

impl Mechanism {
    pub fn code(self) -> &'static str {
        match self {
            Mechanism::AcceptedPlaintext => "ACCEPTED_PLAINTEXT",
            Mechanism::AcceptedNoPnCheck => "ACCEPTED_NO_PN_CHECK",
            Mechanism::AcceptedForgedTag => "ACCEPTED_FORGED_TAG",
            Mechanism::AcceptedRogueT1 => "ACCEPTED_ROGUE_T1",
            Mechanism::RejectedRedacted => "REJECTED_REDACTED",
            Mechanism::RejectedDuplicatePn => "REJECTED_DUPLICATE_PN",
            Mechanism::RejectedBadTag => "REJECTED_BAD_TAG",
        }
    }

    pub fn is_accepted(self) -> bool {
        self.code().starts_with("ACCEPTED_")
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AttackOutcome {
    pub succeeded: bool,
    pub mechanism: Mechanism,
    pub induced_distance_error_m: f64,
}

impl AttackOutcome {
    fn new(mechanism: Mechanism, induced_distance_error_m: f64) -> Self {
        AttackOutcome {
            succeeded: mechanism.is_accepted(),
            mechanism,
            induced_distance_error_m,
        }
    }
}

impl fmt::Display for AttackOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "succeeded={} mechanism={} induced_distance_error_m={:.4}",
            self.succeeded, self.mechanism, self.induced_distance_error_m
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TagStatus {
    /// Frame carries no tag.
    None,
    /// Protected, but the sniffer has no key.
    Unverified,
    Valid,
    Invalid,
}

impl TagStatus {
    pub fn code(self) -> &'static str {
        match self {
            TagStatus::None => "NONE",
            TagStatus::Unverified => "UNVERIFIED",
            TagStatus::Valid => "VALID",
            TagStatus::Invalid => "INVALID",
        }
    }
}

/// What a passive observer learns from one captured frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SniffedFrame {
    pub index: usize,
    pub capture_us: u64,
    pub frame_type: FrameType,
    pub packet_number: u32,
    pub protected: bool,
    /// `None` when redacted.
    pub dialog_token: Option<u8>,
    pub burst_size: Option<u8>,
    pub t1_ps: Option<u64>,
    pub tag: TagStatus,
}

impl SniffedFrame {
    pub fn report_line(&self) -> String {
        let t1 = self.t1_ps.map_or_else(|| "REDACTED".to_string(), |t| t.to_string());
        format!(
            "{} {} {} {} {} {}",
            self.index,
            self.frame_type,
            self.packet_number,
            self.protected,
            t1,
            self.tag.code()
        )
    }
}

pub fn sniff_frames(frames: &[CapturedFrame], key: Option<&AuthKey>) -> Result<Vec<SniffedFrame>, AdversaryError> {
    frames
        .iter()
        .enumerate()
        .map(|(index, captured)| {
            let frame = decode_frame(&captured.bytes)
                .map_err(|e| AdversaryError::MalformedLog(format!("frame {index}: {e}")))?;
            let tag = match (frame.protected, key) {
                (false, _) => TagStatus::None,
                (true, None) => TagStatus::Unverified,
                (true, Some(k)) if verify_auth_tag(&frame, k) => TagStatus::Valid,
                (true, Some(_)) => TagStatus::Invalid,
            };
            let readable = tag != TagStatus::Unverified;
            Ok(SniffedFrame {
                index,
                capture_us: captured.capture_us,
                frame_type: frame.frame_type,
                packet_number: frame.packet_number,
                protected: frame.protected,
                dialog_token: readable.then_some(frame.dialog_token),
                burst_size: readable.then_some(frame.burst_size),
                t1_ps: readable.then_some(frame.t1_ps),
                tag,
            })
        })
        .collect()
}

/// Reads a frame log the way a nearby monitor-mode receiver would.
pub fn sniff(frame_log: &str, key: Option<&AuthKey>) -> Result<Vec<SniffedFrame>, AdversaryError> {
    let frames = parse_frame_log(frame_log)?;
    sniff_frames(&frames, key)
}

pub fn sniff_report(frames: &[SniffedFrame]) -> String {
    let mut out = String::new();
    for f in frames {
        out.push_str(&f.report_line());
        out.push('\n');
    }
    out
}

/// Outcome of a passive capture: success when any FTM timestamp was readable.
pub fn sniff_outcome(frames: &[SniffedFrame]) -> AttackOutcome {
    let leaked = frames
        .iter()
        .any(|f| f.frame_type == FrameType::Ftm && f.t1_ps.is_some());
    AttackOutcome::new(
        if leaked { Mechanism::AcceptedPlaintext } else { Mechanism::RejectedRedacted },
        0.0,
    )
}

/// Re-injects a previously accepted FTM frame into the victim initiator.
///
/// The attacker first replays the frame verbatim. If the victim drops it as
/// a duplicate and the frame is protected, the attacker raises the packet
/// number past anything the victim can have seen, re-tagging only if it
/// holds `attacker_key`. `fresh_t1_ps` is the responder time at which the
/// replay lands; an accepted replay is ranged against that stale t1.
pub fn replay(
    captured: &FtmFrame,
    victim: &mut Session,
    attacker_key: Option<&AuthKey>,
    fresh_t1_ps: u64,
) -> Result<AttackOutcome, AdversaryError> {
    let stale_error = || {
        let lag = SimTime::from_ps(fresh_t1_ps as i64 - captured.t1_ps as i64);
        rtt_to_distance_m(lag)
    };

    let verbatim = encode_frame(captured)?;
    let first = match victim.receive_ftm(&verbatim) {
        Ok(_) => return Ok(AttackOutcome::new(Mechanism::AcceptedNoPnCheck, stale_error())),
        Err(e) => e,
    };
    match first {
        ProtocolError::ReplayRejected { .. } if captured.protected => {}
        ProtocolError::ReplayRejected { .. } => {
            return Ok(AttackOutcome::new(Mechanism::RejectedDuplicatePn, 0.0))
        }
        ProtocolError::BadTag(_) => return Ok(AttackOutcome::new(Mechanism::RejectedBadTag, 0.0)),
        other => return Err(other.into()),
    }

    let mut renumbered = *captured;
    renumbered.packet_number = u32::MAX;
    if let Some(key) = attacker_key {
        renumbered = renumbered.protect(key);
    }
    match victim.receive_ftm(&encode_frame(&renumbered)?) {
        Ok(_) => Ok(AttackOutcome::new(Mechanism::AcceptedForgedTag, stale_error())),
        Err(ProtocolError::BadTag(_)) => Ok(AttackOutcome::new(Mechanism::RejectedBadTag, 0.0)),
        Err(ProtocolError::ReplayRejected { .. }) => {
            Ok(AttackOutcome::new(Mechanism::RejectedDuplicatePn, 0.0))
        }
        Err(other) => Err(other.into()),
    }
}

/// Distance shift caused by a responder that reports `t1_bias_ps` late.
///
/// Runs the same exchange twice on identical random streams, once honest
/// and once with the biased t1, and returns the difference in estimates.
#[allow(clippy::too_many_arguments)]
pub fn rogue_t1_bias(
    session: &SessionConfig,
    initiator: &DeviceProfile,
    responder: &DeviceProfile,
    channel: &ChannelModel,
    distance_m: f64,
    start: SimTime,
    seed: u64,
    t1_bias_ps: i64,
) -> Result<AttackOutcome, AdversaryError> {
    let run = |bias| -> Result<f64, ProtocolError> {
        let mut s = Session::new(session.clone())?;
        let rec = s.exchange_with_faults(
            initiator,
            responder,
            channel,
            distance_m,
            start,
            0,
            &mut SimRng::new(seed),
            ResponderFaults { t1_bias_ps: bias },
        )?;
        Ok(rec.distance_m)
    };
    let shift = run(t1_bias_ps)? - run(0)?;
    Ok(AttackOutcome::new(Mechanism::AcceptedRogueT1, shift))
}
