//! Executes a [`Scenario`]: one ranging session per distance, sampled at a
//! fixed interval, plus the optional attack.

use thiserror::Error;

use super::config::Scenario;
use crate::adversary::{self, AdversaryError, AttackOutcome, AttackerKind, SniffedFrame};
use crate::estimators::{self, RangingStats};
use crate::protocol::{ProtocolError, Session};
use crate::phy::SimRng;
use crate::time::SimTime;
use crate::wire::{CapturedFrame, FrameType, FtmFrame};

/// True time at which every session is opened.
pub const EPOCH: SimTime = SimTime::from_ms(1_000);

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Adversary(#[from] AdversaryError),
}

/// One sampling instant. A sample whose whole burst was lost has no estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRow {
    pub sample_index: u32,
    pub elapsed_ms: f64,
    pub est_distance_m: Option<f64>,
    pub rtt_ps: Option<f64>,
    pub rssi_dbm: Option<f64>,
    pub burst_std_m: Option<f64>,
    /// Exchanges lost within the burst.
    pub dropped: u32,
}

#[derive(Debug, Clone)]
pub struct DistanceResult {
    pub true_distance_m: f64,
    pub rows: Vec<SampleRow>,
    /// `None` when nothing got through.
    pub stats: Option<RangingStats>,
    pub dropped_samples: u32,
    pub frame_log: Vec<CapturedFrame>,
}

impl DistanceResult {
    pub fn all_dropped(&self) -> bool {
        self.stats.is_none()
    }

    pub fn estimates(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.est_distance_m).collect()
    }
}

#[derive(Debug, Clone)]
pub struct AttackReport {
    pub outcome: AttackOutcome,
    /// What the sniffer decoded; empty for the active attacks.
    pub sniffed: Vec<SniffedFrame>,
}

#[derive(Debug, Clone)]
pub struct ResultSet {
    pub scenario: Scenario,
    pub distances: Vec<DistanceResult>,
    pub attack: Option<AttackReport>,
}

impl ResultSet {
    pub fn distance(&self, d: f64) -> Option<&DistanceResult> {
        self.distances.iter().find(|r| r.true_distance_m == d)
    }
}

/// Independent stream per (seed, distance, sample), so results do not depend
/// on the order distances are listed or run in.
pub fn sample_seed(seed: u64, distance_m: f64, sample_index: u32) -> u64 {
    let um = (distance_m * 1e6).round() as u64;
    let mut z = seed
        ^ um.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (sample_index as u64 + 1).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    // splitmix64 finalizer
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn sample_start(scenario: &Scenario, sample_index: u32) -> SimTime {
    EPOCH + SimTime::from_ps_f64(sample_index as f64 * scenario.sample_interval_ms * 1e9)
}

struct ReplayPlan {
    at_sample: u32,
    key_known: bool,
    captured: Option<FtmFrame>,
    outcome: Option<AttackOutcome>,
}

fn run_distance(
    scenario: &Scenario,
    distance_m: f64,
    mut replay: Option<&mut ReplayPlan>,
) -> Result<DistanceResult, RunError> {
    let mut session = Session::new(scenario.session.clone())?;
    session.open(&scenario.session, EPOCH)?;
    let averaging = scenario.session.averaging;
    let n = scenario.samples_per_distance();
    let mut rows = Vec::with_capacity(n as usize);

    for k in 0..n {
        let start = sample_start(scenario, k);
        if let Some(plan) = replay.as_deref_mut() {
            if k == plan.at_sample {
                inject_replay(scenario, &mut session, plan, start)?;
            }
        }
        let mut rng = SimRng::new(sample_seed(scenario.seed, distance_m, k));
        let elapsed_ms = k as f64 * scenario.sample_interval_ms;
        let row = match session.run_burst(
            &scenario.initiator,
            &scenario.responder,
            &scenario.channel,
            distance_m,
            start,
            &mut rng,
        ) {
            Ok(b) => SampleRow {
                sample_index: k,
                elapsed_ms,
                est_distance_m: Some(b.estimate_m(averaging)),
                rtt_ps: Some(b.mean_rtt_ps()),
                rssi_dbm: Some(b.mean_rssi_dbm()),
                burst_std_m: Some(b.std_distance_m),
                dropped: b.dropped_count,
            },
            Err(ProtocolError::AllFramesDropped) => SampleRow {
                sample_index: k,
                elapsed_ms,
                est_distance_m: None,
                rtt_ps: None,
                rssi_dbm: None,
                burst_std_m: None,
                dropped: session.granted_burst() as u32,
            },
            Err(e) => return Err(e.into()),
        };
        rows.push(row);

        if let Some(plan) = replay.as_deref_mut() {
            if plan.captured.is_none() {
                plan.captured = session.transmitted_frames().find(|f| f.frame_type == FrameType::Ftm).copied();
            }
        }
    }
    if let Some(plan) = replay {
        if plan.outcome.is_none() {
            inject_replay(scenario, &mut session, plan, sample_start(scenario, n))?;
        }
    }

    let estimates: Vec<f64> = rows.iter().filter_map(|r| r.est_distance_m).collect();
    let dropped_samples = rows.iter().filter(|r| r.est_distance_m.is_none()).count() as u32;
    let stats = estimators::summarize(&estimates, distance_m).ok();
    Ok(DistanceResult {
        true_distance_m: distance_m,
        rows,
        stats,
        dropped_samples,
        frame_log: session.frame_log(),
    })
}

fn inject_replay(
    scenario: &Scenario,
    session: &mut Session,
    plan: &mut ReplayPlan,
    at: SimTime,
) -> Result<(), RunError> {
    let Some(frame) = plan.captured else {
        return Ok(());
    };
    let key = if plan.key_known { scenario.session.key.as_ref() } else { None };
    let fresh_t1 = scenario.responder.clock.read(at).round_ps().max(0) as u64;
    plan.outcome = Some(adversary::replay(&frame, session, key, fresh_t1)?);
    Ok(())
}

pub fn run_scenario(scenario: &Scenario) -> Result<ResultSet, RunError> {
    let attacker = scenario.attacker;
    let mut plan = match attacker {
        Some(a) if a.kind == AttackerKind::Replayer => Some(ReplayPlan {
            at_sample: a.replay_delay_samples,
            key_known: a.key_known,
            captured: None,
            outcome: None,
        }),
        _ => None,
    };

    // the replay victim is the first distance's session; it runs on this thread
    let (first, rest) = scenario.distances_m.split_first().expect("validated: non-empty");
    let results: Result<Vec<DistanceResult>, RunError> = std::thread::scope(|s| {
        let handles: Vec<_> = rest
            .iter()
            .map(|&d| s.spawn(move || run_distance(scenario, d, None)))
            .collect();
        let mut out = vec![run_distance(scenario, *first, plan.as_mut())?];
        for h in handles {
            out.push(h.join().expect("distance worker panicked")?);
        }
        Ok(out)
    });
    let distances = results?;

    let attack = match attacker {
        None => None,
        Some(a) => Some(match a.kind {
            AttackerKind::Sniffer => {
                let key = if a.key_known { scenario.session.key.as_ref() } else { None };
                let sniffed = adversary::sniff_frames(&distances[0].frame_log, key)?;
                AttackReport { outcome: adversary::sniff_outcome(&sniffed), sniffed }
            }
            AttackerKind::Replayer => {
                let outcome = plan
                    .and_then(|p| p.outcome)
                    .ok_or(RunError::Protocol(ProtocolError::AllFramesDropped))?;
                AttackReport { outcome, sniffed: Vec::new() }
            }
            AttackerKind::RogueResponder => {
                let outcome = adversary::rogue_t1_bias(
                    &scenario.session,
                    &scenario.initiator,
                    &scenario.responder,
                    &scenario.channel,
                    *first,
                    EPOCH,
                    sample_seed(scenario.seed, *first, 0),
                    a.t1_bias_ps,
                )?;
                AttackReport { outcome, sniffed: Vec::new() }
            }
        }),
    };

    Ok(ResultSet { scenario: scenario.clone(), distances, attack })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::{AttackerConfig, Mechanism};
    use crate::harness::presets::Environment;

    fn short(setup: &str, env: Environment) -> Scenario {
        let mut s = Scenario::from_setup(setup, env).unwrap();
        s.duration_s = 2.0;
        s
    }

    #[test]
    fn sample_seed_spreads() {
        let a = sample_seed(0, 1.0, 0);
        assert_ne!(a, sample_seed(0, 1.0, 1));
        assert_ne!(a, sample_seed(0, 1.5, 0));
        assert_ne!(a, sample_seed(1, 1.0, 0));
        assert_eq!(a, sample_seed(0, 1.0, 0));
    }

    #[test]
    fn runs_every_sample() {
        let s = short("config1", Environment::Indoor);
        let r = run_scenario(&s).unwrap();
        assert_eq!(r.distances.len(), 3);
        for d in &r.distances {
            assert_eq!(d.rows.len(), s.samples_per_distance() as usize);
            assert_eq!(d.rows[1].elapsed_ms, 380.0);
            assert!(!d.all_dropped());
        }
    }

    #[test]
    fn deterministic_and_order_independent() {
        let s = short("config3", Environment::Outdoor);
        let a = run_scenario(&s).unwrap();
        let mut rev = s.clone();
        rev.distances_m.reverse();
        let b = run_scenario(&rev).unwrap();
        for d in &s.distances_m {
            assert_eq!(a.distance(*d).unwrap().rows, b.distance(*d).unwrap().rows);
        }
    }

    #[test]
    fn out_of_range_link_drops_everything() {
        let mut s = short("config1", Environment::Outdoor);
        s.distances_m = vec![5000.0];
        let r = run_scenario(&s).unwrap();
        let d = &r.distances[0];
        assert!(d.all_dropped());
        assert_eq!(d.dropped_samples, s.samples_per_distance());
        assert!(d.rows.iter().all(|row| row.dropped == 8));
    }

    #[test]
    fn attacks_run() {
        let mut s = short("config1", Environment::Indoor);
        s.attacker = Some(AttackerConfig {
            kind: AttackerKind::Sniffer,
            t1_bias_ps: 0,
            replay_delay_samples: 1,
            key_known: false,
        });
        let r = run_scenario(&s).unwrap();
        let a = r.attack.unwrap();
        assert_eq!(a.outcome.mechanism, Mechanism::AcceptedPlaintext);
        assert!(!a.sniffed.is_empty());

        s.attacker = Some(AttackerConfig {
            kind: AttackerKind::Replayer,
            t1_bias_ps: 0,
            replay_delay_samples: 2,
            key_known: false,
        });
        let a = run_scenario(&s).unwrap().attack.unwrap();
        assert_eq!(a.outcome.mechanism, Mechanism::AcceptedNoPnCheck);
        // two samples of stale t1 is roughly 0.76 s of lag
        assert!(a.outcome.induced_distance_error_m > 1e7);

        s.session.pn_check = true;
        let a = run_scenario(&s).unwrap().attack.unwrap();
        assert_eq!(a.outcome.mechanism, Mechanism::RejectedDuplicatePn);

        // a forged packet number locks the victim out for the rest of the run
        s.session = s.session.clone().with_protection(crate::wire::AuthKey([7; 16]));
        s.attacker = Some(AttackerConfig { key_known: true, ..s.attacker.unwrap() });
        let r = run_scenario(&s).unwrap();
        assert_eq!(r.attack.as_ref().unwrap().outcome.mechanism, Mechanism::AcceptedForgedTag);
        let victim = &r.distances[0];
        assert!(victim.rows[2..].iter().all(|row| row.est_distance_m.is_none()));
        assert!(!r.distances[1].all_dropped());
        s.attacker = Some(AttackerConfig { key_known: false, ..s.attacker.unwrap() });
        let a = run_scenario(&s).unwrap().attack.unwrap();
        assert_eq!(a.outcome.mechanism, Mechanism::RejectedBadTag);

        s.attacker = Some(AttackerConfig {
            kind: AttackerKind::RogueResponder,
            t1_bias_ps: -10_000,
            replay_delay_samples: 1,
            key_known: false,
        });
        let a = run_scenario(&s).unwrap().attack.unwrap();
        assert_eq!(a.outcome.mechanism, Mechanism::AcceptedRogueT1);
        assert!((a.outcome.induced_distance_error_m - 1.499).abs() < 1e-2);
    }
}
