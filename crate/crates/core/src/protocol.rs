//! The FTM exchange between an initiator and a responder.
//!
//! One measurement:
//!
//! ```text
//!  responder                    initiator
//!     t1 |---- FTM (t1) ------->|
//!        |                      | t2  (detected arrival)
//!        |                      | t3  (ACK departure, t2 + turnaround)
//!     t4 |<------- ACK ---------|
//! ```
//!
//! `rtt = (t4 - t1) + (t2 - t3)`: each pair of timestamps comes from a single
//! clock, so constant clock offsets cancel and only drift leaks through.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::phy::{
    self, frame_delivered, ChannelModel, DeviceProfile, PhyError, SimRng, C_M_PER_PS,
};
use crate::time::SimTime;
use crate::wire::{
    decode_frame, encode_frame, verify_auth_tag, AuthKey, CapturedFrame, FrameType, FtmFrame,
    WireError,
};

pub const DEFAULT_TURNAROUND_NS: u64 = 16_000;
pub const DEFAULT_INTER_MEASUREMENT_NS: u64 = 500_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("invalid session config: {0}")]
    InvalidConfig(String),
    #[error("request rejected: {0:?}")]
    Rejected(RejectReason),
    #[error("no response: {0} frame not delivered")]
    NoResponse(FrameType),
    #[error("replay rejected: packet number {pn} not newer than {last}")]
    ReplayRejected { pn: u32, last: u32 },
    #[error("integrity check failed on {0} frame")]
    BadTag(FrameType),
    #[error("every exchange in the burst was dropped")]
    AllFramesDropped,
    #[error(transparent)]
    Phy(#[from] PhyError),
    #[error(transparent)]
    Wire(#[from] WireError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Single,
    Burst,
}

/// How a burst collapses to one range estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BurstAverage {
    #[default]
    Mean,
    Median,
}

fn default_turnaround() -> u64 {
    DEFAULT_TURNAROUND_NS
}

fn default_inter_measurement() -> u64 {
    DEFAULT_INTER_MEASUREMENT_NS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    pub mode: Mode,
    pub burst_size: u32,
    /// Initiator processing time between t2 and t3, in true nanoseconds.
    #[serde(default = "default_turnaround")]
    pub turnaround_ns: u64,
    #[serde(default = "default_inter_measurement")]
    pub inter_measurement_ns: u64,
    #[serde(default)]
    pub protected: bool,
    #[serde(default)]
    pub pn_check: bool,
    #[serde(default)]
    pub key: Option<AuthKey>,
    #[serde(default)]
    pub averaging: BurstAverage,
}

impl SessionConfig {
    pub fn single() -> Self {
        Self::burst(1).with_mode(Mode::Single)
    }

    pub fn burst(burst_size: u32) -> Self {
        SessionConfig {
            mode: Mode::Burst,
            burst_size,
            turnaround_ns: DEFAULT_TURNAROUND_NS,
            inter_measurement_ns: DEFAULT_INTER_MEASUREMENT_NS,
            protected: false,
            pn_check: false,
            key: None,
            averaging: BurstAverage::Mean,
        }
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_protection(mut self, key: AuthKey) -> Self {
        self.protected = true;
        self.key = Some(key);
        self
    }

    pub fn with_pn_check(mut self, on: bool) -> Self {
        self.pn_check = on;
        self
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        let bad = |s: &str| Err(ProtocolError::InvalidConfig(s.to_string()));
        if self.burst_size == 0 || self.burst_size > u8::MAX as u32 {
            return bad("burst_size must lie in 1..=255");
        }
        if self.mode == Mode::Single && self.burst_size != 1 {
            return bad("single mode requires burst_size = 1");
        }
        if self.protected && self.key.is_none() {
            return bad("protected sessions need a key");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementRecord {
    pub t1: SimTime,
    pub t2: SimTime,
    pub t3: SimTime,
    pub t4: SimTime,
    pub rtt: SimTime,
    pub distance_m: f64,
    /// Received power of the FTM frame at the initiator.
    pub rssi_dbm: f64,
    pub measurement_index: u32,
}

impl MeasurementRecord {
    pub fn from_timestamps(
        t1: SimTime,
        t2: SimTime,
        t3: SimTime,
        t4: SimTime,
        rssi_dbm: f64,
        measurement_index: u32,
    ) -> Self {
        let rtt = compute_rtt(t1, t2, t3, t4);
        MeasurementRecord {
            t1,
            t2,
            t3,
            t4,
            rtt,
            distance_m: rtt_to_distance_m(rtt),
            rssi_dbm,
            measurement_index,
        }
    }

    pub fn rtt_ps(&self) -> f64 {
        self.rtt.as_ps_f64()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BurstResult {
    pub records: Vec<MeasurementRecord>,
    pub mean_distance_m: f64,
    pub median_distance_m: f64,
    /// Population standard deviation over delivered records.
    pub std_distance_m: f64,
    pub dropped_count: u32,
}

impl BurstResult {
    fn from_records(records: Vec<MeasurementRecord>, dropped_count: u32) -> Self {
        let n = records.len() as f64;
        let mean = records.iter().map(|r| r.distance_m).sum::<f64>() / n;
        let var = records.iter().map(|r| (r.distance_m - mean).powi(2)).sum::<f64>() / n;
        let mut sorted: Vec<f64> = records.iter().map(|r| r.distance_m).collect();
        sorted.sort_by(f64::total_cmp);
        let mid = sorted.len() / 2;
        let median = if sorted.len().is_multiple_of(2) {
            (sorted[mid - 1] + sorted[mid]) / 2.0
        } else {
            sorted[mid]
        };
        BurstResult {
            records,
            mean_distance_m: mean,
            median_distance_m: median,
            std_distance_m: var.sqrt(),
            dropped_count,
        }
    }

    pub fn estimate_m(&self, averaging: BurstAverage) -> f64 {
        match averaging {
            BurstAverage::Mean => self.mean_distance_m,
            BurstAverage::Median => self.median_distance_m,
        }
    }

    pub fn mean_rtt_ps(&self) -> f64 {
        self.records.iter().map(|r| r.rtt_ps()).sum::<f64>() / self.records.len() as f64
    }

    pub fn mean_rssi_dbm(&self) -> f64 {
        self.records.iter().map(|r| r.rssi_dbm).sum::<f64>() / self.records.len() as f64
    }
}

pub fn compute_rtt(t1: SimTime, t2: SimTime, t3: SimTime, t4: SimTime) -> SimTime {
    (t4 - t1) + (t2 - t3)
}

/// Picosecond form of [`compute_rtt`].
pub fn compute_rtt_ps(t1: i64, t2: i64, t3: i64, t4: i64) -> i64 {
    (t4 - t1) + (t2 - t3)
}

/// Half the round trip at the speed of light. Negative RTTs give negative distances.
pub fn rtt_to_distance_m(rtt: SimTime) -> f64 {
    rtt.as_ps_f64() / 2.0 * C_M_PER_PS
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    ProtectionMismatch,
    BadTag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Negotiation {
    Accept { granted_burst: u8 },
    Reject(RejectReason),
}

/// Responder-side decision on an FTM request.
///
/// The granted burst is the smaller of the requested and allowed sizes.
pub fn negotiate(request: &FtmFrame, responder_limits: &SessionConfig) -> Result<Negotiation, ProtocolError> {
    if request.frame_type != FrameType::FtmRequest {
        return Err(ProtocolError::ProtocolViolation(format!(
            "expected FTMR, got {}",
            request.frame_type
        )));
    }
    if request.protected != responder_limits.protected {
        return Ok(Negotiation::Reject(RejectReason::ProtectionMismatch));
    }
    if responder_limits.protected {
        let key = responder_limits.key.as_ref().expect("validated: protected implies key");
        if !verify_auth_tag(request, key) {
            return Ok(Negotiation::Reject(RejectReason::BadTag));
        }
    }
    let limit = responder_limits.burst_size.min(u8::MAX as u32) as u8;
    Ok(Negotiation::Accept {
        granted_burst: request.burst_size.min(limit),
    })
}

/// Deviations a misbehaving responder applies to an otherwise honest exchange.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ResponderFaults {
    /// Added to the reported t1.
    pub t1_bias_ps: i64,
}

/// State of one ranging session: packet-number counters on both sides,
/// replay windows, and every frame put on the air.
#[derive(Debug, Clone)]
pub struct Session {
    config: SessionConfig,
    dialog_token: u8,
    granted_burst: u8,
    initiator_next_pn: u32,
    responder_next_pn: u32,
    initiator_last_rx: Option<u32>,
    responder_last_rx: Option<u32>,
    air: Vec<(CapturedFrame, FtmFrame)>,
}

impl Session {
    pub fn new(config: SessionConfig) -> Result<Self, ProtocolError> {
        config.validate()?;
        let granted_burst = config.burst_size as u8;
        Ok(Session {
            config,
            dialog_token: 1,
            granted_burst,
            initiator_next_pn: 0,
            responder_next_pn: 0,
            initiator_last_rx: None,
            responder_last_rx: None,
            air: Vec::new(),
        })
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn granted_burst(&self) -> u8 {
        self.granted_burst
    }

    /// Frames transmitted so far, in order, as a sniffer would capture them.
    pub fn captured(&self) -> impl Iterator<Item = &CapturedFrame> {
        self.air.iter().map(|(c, _)| c)
    }

    /// Frames transmitted so far, decoded.
    pub fn transmitted_frames(&self) -> impl Iterator<Item = &FtmFrame> {
        self.air.iter().map(|(_, f)| f)
    }

    pub fn frame_log(&self) -> Vec<CapturedFrame> {
        self.captured().copied().collect()
    }

    fn seal(&self, frame: FtmFrame) -> FtmFrame {
        match (&self.config.protected, &self.config.key) {
            (true, Some(key)) => frame.protect(key),
            _ => frame,
        }
    }

    fn transmit(&mut self, frame: FtmFrame, at: SimTime) -> Result<CapturedFrame, ProtocolError> {
        let bytes = encode_frame(&frame)?;
        let captured = CapturedFrame {
            capture_us: at.as_us().max(0) as u64,
            bytes,
        };
        self.air.push((captured, frame));
        Ok(captured)
    }

    fn take_initiator_pn(&mut self) -> u32 {
        let pn = self.initiator_next_pn;
        self.initiator_next_pn = pn.wrapping_add(1);
        pn
    }

    fn take_responder_pn(&mut self) -> u32 {
        let pn = self.responder_next_pn;
        self.responder_next_pn = pn.wrapping_add(1);
        pn
    }

    /// Sends the FTMR and lets the responder accept or reject it.
    pub fn open(&mut self, responder_limits: &SessionConfig, at: SimTime) -> Result<u8, ProtocolError> {
        responder_limits.validate()?;
        let pn = self.take_initiator_pn();
        let request = self.seal(FtmFrame::request(self.dialog_token, self.config.burst_size as u8, pn));
        self.transmit(request, at)?;
        match negotiate(&request, responder_limits)? {
            Negotiation::Accept { granted_burst } => {
                let pn = self.take_responder_pn();
                let ack = self.seal(FtmFrame::ack(self.dialog_token, pn));
                self.transmit(ack, at)?;
                self.granted_burst = granted_burst;
                Ok(granted_burst)
            }
            Negotiation::Reject(reason) => Err(ProtocolError::Rejected(reason)),
        }
    }

    fn admit(
        config: &SessionConfig,
        last_rx: &mut Option<u32>,
        frame: &FtmFrame,
    ) -> Result<(), ProtocolError> {
        if config.protected {
            let key = config.key.as_ref().expect("validated: protected implies key");
            if !verify_auth_tag(frame, key) {
                return Err(ProtocolError::BadTag(frame.frame_type));
            }
        }
        if config.pn_check {
            if let Some(last) = *last_rx {
                if frame.packet_number <= last {
                    return Err(ProtocolError::ReplayRejected { pn: frame.packet_number, last });
                }
            }
        }
        *last_rx = Some(last_rx.map_or(frame.packet_number, |l| l.max(frame.packet_number)));
        Ok(())
    }

    /// Initiator-side receive path for an FTM frame: decode, integrity, PN check.
    pub fn receive_ftm(&mut self, bytes: &[u8]) -> Result<FtmFrame, ProtocolError> {
        let frame = decode_frame(bytes)?;
        if frame.frame_type != FrameType::Ftm {
            return Err(ProtocolError::ProtocolViolation(format!(
                "initiator expected FTM, got {}",
                frame.frame_type
            )));
        }
        Self::admit(&self.config, &mut self.initiator_last_rx, &frame)?;
        Ok(frame)
    }

    fn receive_ack(&mut self, bytes: &[u8]) -> Result<FtmFrame, ProtocolError> {
        let frame = decode_frame(bytes)?;
        if frame.frame_type != FrameType::Ack {
            return Err(ProtocolError::ProtocolViolation(format!(
                "responder expected ACK, got {}",
                frame.frame_type
            )));
        }
        Self::admit(&self.config, &mut self.responder_last_rx, &frame)?;
        Ok(frame)
    }

    /// One FTM/ACK measurement whose FTM frame leaves the responder at true time `start`.
    #[allow(clippy::too_many_arguments)]
    pub fn run_single_exchange(
        &mut self,
        initiator: &DeviceProfile,
        responder: &DeviceProfile,
        channel: &ChannelModel,
        distance_m: f64,
        start: SimTime,
        measurement_index: u32,
        rng: &mut SimRng,
    ) -> Result<MeasurementRecord, ProtocolError> {
        self.exchange_with_faults(
            initiator,
            responder,
            channel,
            distance_m,
            start,
            measurement_index,
            rng,
            ResponderFaults::default(),
        )
    }

    #[allow(clippy::too_many_arguments)]
    pub fn exchange_with_faults(
        &mut self,
        initiator: &DeviceProfile,
        responder: &DeviceProfile,
        channel: &ChannelModel,
        distance_m: f64,
        start: SimTime,
        measurement_index: u32,
        rng: &mut SimRng,
        faults: ResponderFaults,
    ) -> Result<MeasurementRecord, ProtocolError> {
        let flight = SimTime::from_ps_f64(phy::propagation_delay_ps(distance_m)?);

        // responder -> initiator: FTM carrying t1
        let t1 = responder.clock.read(start) + SimTime::from_ps(faults.t1_bias_ps);
        let pn = self.take_responder_pn();
        // the wire field is a free-running unsigned counter
        let ftm = self.seal(FtmFrame::ftm(
            self.dialog_token,
            self.granted_burst,
            t1.round_ps() as u64,
            pn,
        ));
        let sent = self.transmit(ftm, start)?;

        let rssi_fwd = phy::rssi_at(distance_m, channel, responder.tx_power_dbm, rng)?;
        if !frame_delivered(rssi_fwd, initiator) {
            return Err(ProtocolError::NoResponse(FrameType::Ftm));
        }
        self.receive_ftm(&sent.bytes)?;
        let detected = start
            + flight
            + SimTime::from_ps_f64(phy::detection_delay_ps(initiator, channel, distance_m, rng));
        let t2 = initiator.clock.read(detected) - initiator.rx_timestamp_calibration();

        // initiator -> responder: ACK
        let ack_departure = detected + SimTime::from_ns(self.config.turnaround_ns as i64);
        let t3 = initiator.clock.read(ack_departure);
        let pn = self.take_initiator_pn();
        let ack = self.seal(FtmFrame::ack(self.dialog_token, pn));
        let sent = self.transmit(ack, ack_departure)?;

        let rssi_rev = phy::rssi_at(distance_m, channel, initiator.tx_power_dbm, rng)?;
        if !frame_delivered(rssi_rev, responder) {
            return Err(ProtocolError::NoResponse(FrameType::Ack));
        }
        self.receive_ack(&sent.bytes)?;
        let ack_detected = ack_departure
            + flight
            + SimTime::from_ps_f64(phy::detection_delay_ps(responder, channel, distance_m, rng));
        let t4 = responder.clock.read(ack_detected) - responder.rx_timestamp_calibration();

        Ok(MeasurementRecord::from_timestamps(
            t1,
            t2,
            t3,
            t4,
            rssi_fwd,
            measurement_index,
        ))
    }

    /// `granted_burst` back-to-back exchanges spaced by the inter-measurement gap.
    pub fn run_burst(
        &mut self,
        initiator: &DeviceProfile,
        responder: &DeviceProfile,
        channel: &ChannelModel,
        distance_m: f64,
        start: SimTime,
        rng: &mut SimRng,
    ) -> Result<BurstResult, ProtocolError> {
        let gap = SimTime::from_ns(self.config.inter_measurement_ns as i64);
        let mut records = Vec::with_capacity(self.granted_burst as usize);
        let mut dropped = 0;
        let mut at = start;
        for index in 0..self.granted_burst as u32 {
            match self.run_single_exchange(initiator, responder, channel, distance_m, at, index, rng) {
                Ok(record) => records.push(record),
                // frames the receiver discards count as lost
                Err(
                    ProtocolError::NoResponse(_)
                    | ProtocolError::ReplayRejected { .. }
                    | ProtocolError::BadTag(_),
                ) => dropped += 1,
                Err(e) => return Err(e),
            }
            at += gap;
        }
        if records.is_empty() {
            return Err(ProtocolError::AllFramesDropped);
        }
        Ok(BurstResult::from_records(records, dropped))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phy::test_support::{device, quiet_channel};
    use crate::phy::{ClockModel, Quantization};
    use crate::wire::AuthKey;
    use proptest::prelude::*;

    const EPOCH: SimTime = SimTime::from_ms(1_000);

    fn ideal(bw: u32) -> DeviceProfile {
        let mut d = device(bw, 1);
        d.quantization = Quantization::Disabled;
        d
    }

    fn noisy_channel() -> ChannelModel {
        ChannelModel {
            multipath_mean_excess_ns: 20.0,
            fac_residual: 0.2,
            rssi_noise_db_std: 2.0,
            ..quiet_channel()
        }
    }

    #[test]
    fn rtt_worked_example() {
        // 10 m round trip with a 16 us turnaround, picosecond timestamps
        let rtt = compute_rtt_ps(1_000_000, 1_033_356, 17_033_356, 17_066_712);
        assert_eq!(rtt, 66_712);
        let shifted = compute_rtt_ps(1_000_000, 1_533_356, 17_533_356, 17_066_712);
        assert_eq!(shifted, 66_712);
        assert_eq!(compute_rtt_ps(5, 5, 9, 9), 0);
    }

    #[test]
    fn rtt_to_distance_examples() {
        // 33_356 ps one way at c
        assert!((rtt_to_distance_m(SimTime::from_ps(66_712)) - 9.999_877).abs() < 1e-6);
        assert_eq!(rtt_to_distance_m(SimTime::ZERO), 0.0);
        assert!((rtt_to_distance_m(SimTime::from_ps_f64(6_671.2)) - 0.999_988).abs() < 1e-6);
        assert!(rtt_to_distance_m(SimTime::from_ps(-100)) < 0.0);
    }

    #[test]
    fn negotiation() {
        let limits = SessionConfig::burst(8);
        let req = FtmFrame::request(1, 8, 0);
        assert_eq!(negotiate(&req, &limits).unwrap(), Negotiation::Accept { granted_burst: 8 });
        let req = FtmFrame::request(1, 16, 0);
        assert_eq!(negotiate(&req, &limits).unwrap(), Negotiation::Accept { granted_burst: 8 });
        let key = AuthKey([1; 16]);
        let req = FtmFrame::request(1, 8, 0).protect(&key);
        assert_eq!(
            negotiate(&req, &limits).unwrap(),
            Negotiation::Reject(RejectReason::ProtectionMismatch)
        );
        let protected_limits = SessionConfig::burst(8).with_protection(key);
        assert_eq!(
            negotiate(&req, &protected_limits).unwrap(),
            Negotiation::Accept { granted_burst: 8 }
        );
        let forged = FtmFrame::request(1, 8, 0).protect(&AuthKey([2; 16]));
        assert_eq!(
            negotiate(&forged, &protected_limits).unwrap(),
            Negotiation::Reject(RejectReason::BadTag)
        );
        assert!(matches!(
            negotiate(&FtmFrame::ack(1, 0), &limits),
            Err(ProtocolError::ProtocolViolation(_))
        ));
    }

    #[test]
    fn session_config_validation() {
        assert!(SessionConfig::single().validate().is_ok());
        assert!(SessionConfig::burst(4).with_mode(Mode::Single).validate().is_err());
        assert!(SessionConfig::burst(0).validate().is_err());
        assert!(SessionConfig::burst(256).validate().is_err());
        let mut c = SessionConfig::burst(2);
        c.protected = true;
        assert!(c.validate().is_err());
    }

    #[test]
    fn open_logs_request_and_ack() {
        let mut s = Session::new(SessionConfig::burst(16)).unwrap();
        assert_eq!(s.open(&SessionConfig::burst(8), EPOCH).unwrap(), 8);
        let frames: Vec<_> = s.transmitted_frames().map(|f| f.frame_type).collect();
        assert_eq!(frames, vec![FrameType::FtmRequest, FrameType::Ack]);
        let key = AuthKey([3; 16]);
        let mut s = Session::new(SessionConfig::burst(8).with_protection(key)).unwrap();
        assert_eq!(
            s.open(&SessionConfig::burst(8), EPOCH),
            Err(ProtocolError::Rejected(RejectReason::ProtectionMismatch))
        );
    }

    #[test]
    fn noiseless_exchange_recovers_distance() {
        let dev = ideal(80);
        for &d in &[0.5, 1.0, 1.5, 3.0, 5.0, 10.0] {
            let mut s = Session::new(SessionConfig::single()).unwrap();
            let rec = s
                .run_single_exchange(&dev, &dev, &quiet_channel(), d, EPOCH, 0, &mut SimRng::new(0))
                .unwrap();
            assert!((rec.distance_m - d).abs() < 1e-6, "d={d} est={}", rec.distance_m);
        }
    }

    #[test]
    fn record_invariants_hold() {
        let mut s = Session::new(SessionConfig::burst(8)).unwrap();
        let mut rng = SimRng::new(9);
        let dev = device(20, 1);
        for k in 0..50 {
            let b = s
                .run_burst(&dev, &dev, &noisy_channel(), 4.0, EPOCH + SimTime::from_ms(k), &mut rng)
                .unwrap();
            for r in &b.records {
                assert_eq!(r.rtt, (r.t4 - r.t1) + (r.t2 - r.t3));
                assert_eq!(r.distance_m, rtt_to_distance_m(r.rtt));
            }
            assert_eq!(b.records.len() as u32 + b.dropped_count, 8);
        }
    }

    #[test]
    fn out_of_range_is_no_response() {
        let mut deaf = device(20, 1);
        deaf.rx_sensitivity_dbm = -50.0;
        let mut s = Session::new(SessionConfig::single()).unwrap();
        let r = s.run_single_exchange(&deaf, &device(20, 1), &quiet_channel(), 10.0, EPOCH, 0, &mut SimRng::new(0));
        assert_eq!(r, Err(ProtocolError::NoResponse(FrameType::Ftm)));
        let r = s.run_single_exchange(&device(20, 1), &deaf, &quiet_channel(), 10.0, EPOCH, 0, &mut SimRng::new(0));
        assert_eq!(r, Err(ProtocolError::NoResponse(FrameType::Ack)));
        let mut s = Session::new(SessionConfig::burst(4)).unwrap();
        let r = s.run_burst(&deaf, &deaf, &quiet_channel(), 10.0, EPOCH, &mut SimRng::new(0));
        assert_eq!(r, Err(ProtocolError::AllFramesDropped));
    }

    #[test]
    fn degenerate_burst_matches_single_exchange() {
        let dev = device(20, 2);
        let mut a = Session::new(SessionConfig::burst(1)).unwrap();
        let mut b = a.clone();
        let burst = a.run_burst(&dev, &dev, &noisy_channel(), 3.0, EPOCH, &mut SimRng::new(5)).unwrap();
        let single = b
            .run_single_exchange(&dev, &dev, &noisy_channel(), 3.0, EPOCH, 0, &mut SimRng::new(5))
            .unwrap();
        assert_eq!(burst.records, vec![single]);
        assert_eq!(burst.mean_distance_m, single.distance_m);
        assert_eq!(burst.std_distance_m, 0.0);
    }

    #[test]
    fn drift_law() {
        // (delta * T) / 2 * c with delta = 20 ppm, T = 16 us
        let mut initiator = ideal(80);
        initiator.clock.drift_ppm = 20.0;
        let responder = ideal(80);
        let mut s = Session::new(SessionConfig::single()).unwrap();
        let rec = s
            .run_single_exchange(&initiator, &responder, &quiet_channel(), 10.0, EPOCH, 0, &mut SimRng::new(0))
            .unwrap();
        let expected = 20e-6 * 16_000e3 / 2.0 * C_M_PER_PS;
        let err = rec.distance_m - 10.0;
        assert!((err.abs() - expected).abs() < 1.0 * C_M_PER_PS / 2.0, "err {err} expected {expected}");
        assert!(err < 0.0, "a fast initiator clock overstates the turnaround");
    }

    #[test]
    fn burst_std_shrinks_with_averaging() {
        let dev = device(20, 1);
        let ch = quiet_channel();
        let spread = |burst: u32| {
            let mut rng = SimRng::new(burst as u64);
            let mut s = Session::new(SessionConfig::burst(burst)).unwrap();
            let est: Vec<f64> = (0..500)
                .map(|k| {
                    s.run_burst(&dev, &dev, &ch, 5.0, EPOCH + SimTime::from_ms(k), &mut rng)
                        .unwrap()
                        .mean_distance_m
                })
                .collect();
            crate::estimators::summarize(&est, 5.0).unwrap().std_est_m
        };
        let ratio = spread(8) / spread(1);
        let target = 1.0 / 8f64.sqrt();
        assert!(ratio > 0.75 * target && ratio < 1.25 * target, "ratio {ratio}");
    }

    #[test]
    fn median_averaging() {
        let dev = device(20, 1);
        let mut s = Session::new(SessionConfig::burst(3)).unwrap();
        let b = s.run_burst(&dev, &dev, &quiet_channel(), 5.0, EPOCH, &mut SimRng::new(1)).unwrap();
        let mut d: Vec<f64> = b.records.iter().map(|r| r.distance_m).collect();
        d.sort_by(f64::total_cmp);
        assert_eq!(b.estimate_m(BurstAverage::Median), d[1]);
        assert_eq!(b.estimate_m(BurstAverage::Mean), b.mean_distance_m);
    }

    #[test]
    fn packet_numbers_increment_per_transmitter() {
        let dev = device(80, 2);
        let mut s = Session::new(SessionConfig::burst(4)).unwrap();
        s.open(&SessionConfig::burst(4), EPOCH).unwrap();
        s.run_burst(&dev, &dev, &quiet_channel(), 2.0, EPOCH, &mut SimRng::new(0)).unwrap();
        let ftm_pns: Vec<u32> = s
            .transmitted_frames()
            .filter(|f| f.frame_type == FrameType::Ftm)
            .map(|f| f.packet_number)
            .collect();
        // responder already sent the negotiation ACK with pn 0
        assert_eq!(ftm_pns, vec![1, 2, 3, 4]);
    }

    #[test]
    fn protected_pn_checked_session_runs_clean() {
        let key = AuthKey([9; 16]);
        let cfg = SessionConfig::burst(8).with_protection(key).with_pn_check(true);
        let mut s = Session::new(cfg.clone()).unwrap();
        s.open(&cfg, EPOCH).unwrap();
        let dev = device(80, 2);
        let b = s.run_burst(&dev, &dev, &noisy_channel(), 3.0, EPOCH, &mut SimRng::new(2)).unwrap();
        assert_eq!(b.records.len(), 8);
        assert!(s.transmitted_frames().all(|f| verify_auth_tag(f, &key)));
    }

    #[test]
    fn burst_is_deterministic() {
        let dev = device(20, 1);
        let run = || {
            let mut s = Session::new(SessionConfig::burst(8)).unwrap();
            s.run_burst(&dev, &dev, &noisy_channel(), 1.0, EPOCH, &mut SimRng::new(77)).unwrap()
        };
        assert_eq!(run(), run());
    }

    proptest! {
        #[test]
        fn clock_offsets_cancel(
            seed in any::<u64>(),
            off_i in -1_000_000_000i64..=1_000_000_000,
            off_r in -1_000_000_000i64..=1_000_000_000,
            drift_i in -50.0f64..50.0,
            drift_r in -50.0f64..50.0,
            d in 0.5f64..30.0,
        ) {
            let mut init = device(20, 1);
            let mut resp = device(80, 2);
            init.clock.drift_ppm = drift_i;
            resp.clock.drift_ppm = drift_r;
            let ch = noisy_channel();
            let base = Session::new(SessionConfig::single()).unwrap()
                .run_single_exchange(&init, &resp, &ch, d, EPOCH, 0, &mut SimRng::new(seed)).unwrap();
            init.clock = ClockModel { offset_ps: off_i, ..init.clock };
            resp.clock = ClockModel { offset_ps: off_r, ..resp.clock };
            let shifted = Session::new(SessionConfig::single()).unwrap()
                .run_single_exchange(&init, &resp, &ch, d, EPOCH, 0, &mut SimRng::new(seed)).unwrap();
            prop_assert_eq!(base.rtt, shifted.rtt);
            prop_assert_eq!(base.distance_m.to_bits(), shifted.distance_m.to_bits());
        }
    }
}
