//! FTM protocol frames and their fixed 24-octet wire layout.
//!
//! ```text
//!  0      frame_type (0x01 FTMR, 0x02 FTM, 0x03 ACK)
//!  1      dialog_token
//!  2      burst_size
//!  3..11  t1_ps          u64 LE
//! 11..15  packet_number  u32 LE
//! 15      flags          bit 0 = protected, other bits zero
//! 16..24  auth_tag
//! ```
//!
//! The auth tag is an HMAC-SHA256 over octets 0..15 truncated to 8 octets.
//! It stands in for management-frame protection: a receiver holding the
//! key can tell whether any header field, the packet number included, was
//! touched after tagging.

use std::fmt;
use std::str::FromStr;

use hmac::{Hmac, Mac};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::Sha256;
use thiserror::Error;

/// Encoded frame length in octets.
pub const FRAME_LEN: usize = 24;
/// Length of the tagged prefix (everything before the tag).
pub const TAGGED_LEN: usize = 15;
/// Auth tag length in octets.
pub const TAG_LEN: usize = 8;

const FLAG_PROTECTED: u8 = 0x01;

pub type FrameBytes = [u8; FRAME_LEN];
pub type AuthTag = [u8; TAG_LEN];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WireError {
    #[error("frame invariant violated: {0}")]
    InvariantViolation(&'static str),
    #[error("malformed frame: {0}")]
    MalformedFrame(String),
    #[error("malformed frame log at line {line}: {reason}")]
    MalformedLog { line: usize, reason: String },
}

/// 16-octet shared secret for the emulated integrity protection.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct AuthKey(pub [u8; 16]);

impl fmt::Debug for AuthKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("AuthKey(..)")
    }
}

impl Serialize for AuthKey {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(self.0))
    }
}

impl<'de> Deserialize<'de> for AuthKey {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl FromStr for AuthKey {
    type Err = String;

    /// Parses 32 hex characters.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bytes = hex::decode(s.trim()).map_err(|e| format!("invalid key hex: {e}"))?;
        let arr: [u8; 16] = bytes
            .try_into()
            .map_err(|v: Vec<u8>| format!("key must be 16 octets, got {}", v.len()))?;
        Ok(AuthKey(arr))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FrameType {
    FtmRequest,
    Ftm,
    Ack,
}

impl FrameType {
    pub fn code(self) -> u8 {
        match self {
            FrameType::FtmRequest => 0x01,
            FrameType::Ftm => 0x02,
            FrameType::Ack => 0x03,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0x01 => Some(FrameType::FtmRequest),
            0x02 => Some(FrameType::Ftm),
            0x03 => Some(FrameType::Ack),
            _ => None,
        }
    }

    /// Short on-air name used in reports.
    pub fn label(self) -> &'static str {
        match self {
            FrameType::FtmRequest => "FTMR",
            FrameType::Ftm => "FTM",
            FrameType::Ack => "ACK",
        }
    }
}

impl fmt::Display for FrameType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FtmFrame {
    pub frame_type: FrameType,
    pub dialog_token: u8,
    pub burst_size: u8,
    /// Responder departure time; only meaningful on `Ftm` frames.
    pub t1_ps: u64,
    pub packet_number: u32,
    pub protected: bool,
    pub auth_tag: AuthTag,
}

impl FtmFrame {
    pub fn request(dialog_token: u8, burst_size: u8, packet_number: u32) -> Self {
        FtmFrame {
            frame_type: FrameType::FtmRequest,
            dialog_token,
            burst_size,
            t1_ps: 0,
            packet_number,
            protected: false,
            auth_tag: [0; TAG_LEN],
        }
    }

    pub fn ftm(dialog_token: u8, burst_size: u8, t1_ps: u64, packet_number: u32) -> Self {
        FtmFrame {
            frame_type: FrameType::Ftm,
            dialog_token,
            burst_size,
            t1_ps,
            packet_number,
            protected: false,
            auth_tag: [0; TAG_LEN],
        }
    }

    pub fn ack(dialog_token: u8, packet_number: u32) -> Self {
        FtmFrame {
            frame_type: FrameType::Ack,
            dialog_token,
            burst_size: 0,
            t1_ps: 0,
            packet_number,
            protected: false,
            auth_tag: [0; TAG_LEN],
        }
    }

    pub fn validate(&self) -> Result<(), WireError> {
        if self.frame_type == FrameType::FtmRequest {
            if self.t1_ps != 0 {
                return Err(WireError::InvariantViolation("FTMR must carry t1_ps = 0"));
            }
            if self.burst_size == 0 {
                return Err(WireError::InvariantViolation("FTMR burst_size must be >= 1"));
            }
        }
        if !self.protected && self.auth_tag != [0; TAG_LEN] {
            return Err(WireError::InvariantViolation(
                "unprotected frame must carry an all-zero auth tag",
            ));
        }
        Ok(())
    }

    /// Octets covered by the auth tag.
    pub fn tagged_body(&self) -> [u8; TAGGED_LEN] {
        let mut body = [0u8; TAGGED_LEN];
        body[0] = self.frame_type.code();
        body[1] = self.dialog_token;
        body[2] = self.burst_size;
        body[3..11].copy_from_slice(&self.t1_ps.to_le_bytes());
        body[11..15].copy_from_slice(&self.packet_number.to_le_bytes());
        body
    }

    /// Marks the frame protected and fills in the tag for `key`.
    pub fn protect(mut self, key: &AuthKey) -> Self {
        self.protected = true;
        self.auth_tag = compute_auth_tag(&self.tagged_body(), key);
        self
    }
}

pub fn encode_frame(frame: &FtmFrame) -> Result<FrameBytes, WireError> {
    frame.validate()?;
    let mut out = [0u8; FRAME_LEN];
    out[..TAGGED_LEN].copy_from_slice(&frame.tagged_body());
    out[15] = if frame.protected { FLAG_PROTECTED } else { 0 };
    out[16..24].copy_from_slice(&frame.auth_tag);
    Ok(out)
}

pub fn decode_frame(bytes: &[u8]) -> Result<FtmFrame, WireError> {
    if bytes.len() != FRAME_LEN {
        return Err(WireError::MalformedFrame(format!(
            "expected {FRAME_LEN} octets, got {}",
            bytes.len()
        )));
    }
    let frame_type = FrameType::from_code(bytes[0])
        .ok_or_else(|| WireError::MalformedFrame(format!("unknown frame type 0x{:02x}", bytes[0])))?;
    let flags = bytes[15];
    if flags & !FLAG_PROTECTED != 0 {
        return Err(WireError::MalformedFrame(format!("reserved flag bits set: 0x{flags:02x}")));
    }
    let mut auth_tag = [0u8; TAG_LEN];
    auth_tag.copy_from_slice(&bytes[16..24]);
    let frame = FtmFrame {
        frame_type,
        dialog_token: bytes[1],
        burst_size: bytes[2],
        t1_ps: u64::from_le_bytes(bytes[3..11].try_into().expect("8 octets")),
        packet_number: u32::from_le_bytes(bytes[11..15].try_into().expect("4 octets")),
        protected: flags & FLAG_PROTECTED != 0,
        auth_tag,
    };
    frame
        .validate()
        .map_err(|e| WireError::MalformedFrame(e.to_string()))?;
    Ok(frame)
}

pub fn compute_auth_tag(frame_body: &[u8], key: &AuthKey) -> AuthTag {
    let mut mac = Hmac::<Sha256>::new_from_slice(&key.0).expect("HMAC accepts any key length");
    mac.update(frame_body);
    let digest = mac.finalize().into_bytes();
    let mut tag = [0u8; TAG_LEN];
    tag.copy_from_slice(&digest[..TAG_LEN]);
    tag
}

/// True iff the frame is protected and its tag matches `key`.
pub fn verify_auth_tag(frame: &FtmFrame, key: &AuthKey) -> bool {
    if !frame.protected {
        return false;
    }
    let expected = compute_auth_tag(&frame.tagged_body(), key);
    // constant-time compare is not a concern for a simulator
    expected == frame.auth_tag
}

/// One line of a frame log: capture time and the raw frame octets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CapturedFrame {
    pub capture_us: u64,
    pub bytes: FrameBytes,
}

impl CapturedFrame {
    pub fn to_log_line(&self) -> String {
        format!("{} {}", self.capture_us, hex::encode(self.bytes))
    }
}

/// Renders frames in the log format: `<capture_us> <48 lowercase hex chars>` per line.
pub fn write_frame_log(frames: &[CapturedFrame]) -> String {
    let mut out = String::with_capacity(frames.len() * 64);
    for f in frames {
        out.push_str(&f.to_log_line());
        out.push('\n');
    }
    out
}

/// Parses a frame log. Blank lines are skipped; the octets are not decoded here.
pub fn parse_frame_log(text: &str) -> Result<Vec<CapturedFrame>, WireError> {
    let mut frames = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let bad = |reason: String| WireError::MalformedLog { line: i + 1, reason };
        let (ts, hex_part) = line
            .split_once(' ')
            .ok_or_else(|| bad("expected `<capture_us> <hex>`".into()))?;
        let capture_us = ts
            .parse::<u64>()
            .map_err(|e| bad(format!("bad capture time: {e}")))?;
        let hex_part = hex_part.trim();
        if hex_part.len() != FRAME_LEN * 2 || hex_part.chars().any(|c| c.is_ascii_uppercase()) {
            return Err(bad(format!(
                "expected {} lowercase hex characters",
                FRAME_LEN * 2
            )));
        }
        let mut bytes = [0u8; FRAME_LEN];
        hex::decode_to_slice(hex_part, &mut bytes).map_err(|e| bad(e.to_string()))?;
        frames.push(CapturedFrame { capture_us, bytes });
    }
    Ok(frames)
}
