//! Fixed-point simulation time.

use std::fmt;
use std::ops::{Add, AddAssign, Neg, Sub};

const FS_PER_PS: i64 = 1_000;

/// A signed instant or interval, counted in femtoseconds.
///
/// Timestamps are nominally picoseconds; the extra three digits keep
/// sub-millimetre distances representable without giving up exact integer
/// arithmetic, so constant clock offsets cancel bit-for-bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimTime(i64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub const fn from_fs(fs: i64) -> Self {
        SimTime(fs)
    }

    pub const fn from_ps(ps: i64) -> Self {
        SimTime(ps * FS_PER_PS)
    }

    pub const fn from_ns(ns: i64) -> Self {
        SimTime(ns * 1_000 * FS_PER_PS)
    }

    pub const fn from_ms(ms: i64) -> Self {
        SimTime(ms * 1_000_000_000 * FS_PER_PS)
    }

    /// Rounds to the nearest femtosecond, ties away from zero.
    pub fn from_ps_f64(ps: f64) -> Self {
        SimTime((ps * FS_PER_PS as f64).round() as i64)
    }

    pub const fn as_fs(self) -> i64 {
        self.0
    }

    pub fn as_ps_f64(self) -> f64 {
        self.0 as f64 / FS_PER_PS as f64
    }

    /// Nearest whole picosecond, ties away from zero.
    pub fn round_ps(self) -> i64 {
        let half = FS_PER_PS / 2;
        if self.0 >= 0 {
            (self.0 + half) / FS_PER_PS
        } else {
            (self.0 - half) / FS_PER_PS
        }
    }

    /// Whole microseconds, truncated toward zero.
    pub fn as_us(self) -> i64 {
        self.0 / (FS_PER_PS * 1_000_000)
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl AddAssign for SimTime {
    fn add_assign(&mut self, rhs: SimTime) {
        self.0 += rhs.0;
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 - rhs.0)
    }
}

impl Neg for SimTime {
    type Output = SimTime;
    fn neg(self) -> SimTime {
        SimTime(-self.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3} ps", self.as_ps_f64())
    }
}
