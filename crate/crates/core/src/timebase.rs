//! Canonical time, frequency and series representations.
//!
//! Raw event timestamps are integer femtoseconds so that a multi-second
//! capture at 80 MHz accumulates no floating-point error; phase data is
//! double-precision picoseconds, which keeps sub-0.001 ps resolution over
//! +/-1e7 ps excursions.

use num_rational::Ratio;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// Femtoseconds per second.
pub const FS_PER_S: i128 = 1_000_000_000_000_000;
/// Femtoseconds per picosecond.
pub const FS_PER_PS: i128 = 1_000;

/// An event time in integer femtoseconds since capture start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Timestamp(pub i128);

impl Timestamp {
    pub fn from_fs(fs: i128) -> Self {
        Timestamp(fs)
    }

    pub fn as_fs(self) -> i128 {
        self.0
    }

    /// Lossy conversion to picoseconds.
    pub fn as_ps(self) -> f64 {
        self.0 as f64 / FS_PER_PS as f64
    }
}

/// An exact rational frequency in hertz.
///
/// Keeping rates exact lets tag pipelines place nominal ticks on an integer
/// femtosecond grid with no drift (80 MHz / 10 MHz is exactly 8/1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Frequency(Ratio<u64>);

impl Frequency {
    /// Integer hertz.
    pub fn from_hz(hz: u64) -> Result<Self> {
        Self::from_ratio(hz, 1)
    }

    /// `numer/denom` hertz.
    pub fn from_ratio(numer: u64, denom: u64) -> Result<Self> {
        if numer == 0 || denom == 0 {
            return Err(Error::InvalidValue {
                what: "frequency",
                detail: format!("{numer}/{denom} Hz is not positive"),
            });
        }
        Ok(Frequency(Ratio::new(numer, denom)))
    }

    /// Parse a decimal string (`"10000000"`, `"12.5e6"`, `"0.5"`) into an
    /// exact rational frequency.
    pub fn parse(text: &str) -> Result<Self> {
        let bad = |detail: String| Error::InvalidValue {
            what: "frequency",
            detail,
        };
        let t = text.trim();
        let (mant, exp) = match t.split_once(['e', 'E']) {
            Some((m, e)) => {
                let exp: i32 = e
                    .parse()
                    .map_err(|_| bad(format!("bad exponent in '{t}'")))?;
                (m, exp)
            }
            None => (t, 0),
        };
        let (int_part, frac_part) = match mant.split_once('.') {
            Some((i, f)) => (i, f),
            None => (mant, ""),
        };
        if int_part.starts_with('-') {
            return Err(bad(format!("'{t}' is not positive")));
        }
        let digits = format!("{int_part}{frac_part}");
        let numer: u128 = digits
            .parse()
            .map_err(|_| bad(format!("cannot parse '{t}'")))?;
        let ten = |p: u32| -> Option<u128> { 10u128.checked_pow(p) };
        let shift = exp - frac_part.len() as i32;
        let (mut num, mut den) = if shift >= 0 {
            (
                numer
                    .checked_mul(ten(shift as u32).ok_or_else(|| bad("exponent overflow".into()))?)
                    .ok_or_else(|| bad("overflow".into()))?,
                1u128,
            )
        } else {
            (
                numer,
                ten((-shift) as u32).ok_or_else(|| bad("exponent overflow".into()))?,
            )
        };
        let g = gcd_u128(num, den);
        if g > 0 {
            num /= g;
            den /= g;
        }
        let (num, den) = (
            u64::try_from(num).map_err(|_| bad(format!("'{t}' out of range")))?,
            u64::try_from(den).map_err(|_| bad(format!("'{t}' out of range")))?,
        );
        Self::from_ratio(num, den)
    }

    pub fn as_hz_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// Period in seconds.
    pub fn period_s(&self) -> f64 {
        1.0 / self.as_hz_f64()
    }

    /// Nominal time of tick `i` in femtoseconds, rounded to nearest.
    /// Exact (no rounding) whenever the period is an integer number of fs,
    /// which holds for every rate used in the measurement chain.
    pub fn nominal_tick_fs(&self, i: u64) -> i128 {
        let num = *self.0.numer() as i128;
        let den = *self.0.denom() as i128;
        let t2 = 2 * (i as i128) * FS_PER_S * den; // 2*i*den*1e15 <= ~1e45? guarded by sample caps
        div_round_nearest(t2, 2 * num)
    }

    /// Nearest nominal tick index for a femtosecond time.
    pub fn nearest_tick_index(&self, t_fs: i128) -> i64 {
        let num = *self.0.numer() as i128;
        let den = *self.0.denom() as i128;
        div_round_nearest(t_fs * num, den * FS_PER_S) as i64
    }

    /// `self / other` if it is an exact positive integer.
    pub fn integer_ratio_to(&self, other: &Frequency) -> Option<u64> {
        let r = self.0 / other.0;
        if r.is_integer() {
            Some(*r.numer())
        } else {
            None
        }
    }

    pub fn numer(&self) -> u64 {
        *self.0.numer()
    }

    pub fn denom(&self) -> u64 {
        *self.0.denom()
    }
}

impl std::fmt::Display for Frequency {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.0.is_integer() {
            write!(f, "{} Hz", self.0.numer())
        } else {
            write!(f, "{}/{} Hz", self.0.numer(), self.0.denom())
        }
    }
}

// JSON form: a plain integer for whole-hertz rates, "numer/denom" otherwise.
impl Serialize for Frequency {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_integer() {
            s.serialize_u64(*self.0.numer())
        } else {
            s.serialize_str(&format!("{}/{}", self.0.numer(), self.0.denom()))
        }
    }
}

impl<'de> Deserialize<'de> for Frequency {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Hz(u64),
            Text(String),
        }
        let repr = Repr::deserialize(d)?;
        let parsed = match repr {
            Repr::Hz(hz) => Frequency::from_hz(hz),
            Repr::Text(t) => match t.split_once('/') {
                Some((n, d)) => {
                    let numer = n.trim().parse().map_err(serde::de::Error::custom)?;
                    let denom = d.trim().parse().map_err(serde::de::Error::custom)?;
                    Frequency::from_ratio(numer, denom)
                }
                None => Frequency::parse(&t),
            },
        };
        parsed.map_err(serde::de::Error::custom)
    }
}

fn gcd_u128(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Round-half-away-from-zero integer division.
fn div_round_nearest(num: i128, den: i128) -> i128 {
    debug_assert!(den > 0);
    if num >= 0 {
        (num + den / 2) / den
    } else {
        -((-num + den / 2) / den)
    }
}

/// Uniformly sampled time-error sequence in picoseconds.
///
/// Immutable after construction; all samples are finite and `tau0 > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSeries {
    tau0_s: f64,
    samples: Vec<f64>,
    label: String,
}

impl PhaseSeries {
    pub fn new(tau0_s: f64, samples: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if !(tau0_s.is_finite() && tau0_s > 0.0) {
            return Err(Error::InvalidValue {
                what: "tau0",
                detail: format!("{tau0_s} s"),
            });
        }
        if samples.is_empty() {
            return Err(Error::EmptySeries);
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidValue {
                what: "phase sample",
                detail: format!("non-finite value at index {i}"),
            });
        }
        Ok(PhaseSeries {
            tau0_s,
            samples,
            label: label.into(),
        })
    }

    pub fn zeros(tau0_s: f64, n: usize, label: impl Into<String>) -> Result<Self> {
        Self::new(tau0_s, vec![0.0; n], label)
    }

    pub fn tau0_s(&self) -> f64 {
        self.tau0_s
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    /// Same data under a new label.
    pub fn relabel(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }
}

/// One tagger channel's event timestamps, sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeTagSeries {
    channel: u32,
    tags: Vec<Timestamp>,
}

impl TimeTagSeries {
    /// Wrap a sorted tag list. Fails on out-of-order timestamps.
    pub fn new(channel: u32, tags: Vec<Timestamp>) -> Result<Self> {
        if let Some(i) = first_unsorted(&tags) {
            return Err(Error::UnsortedInput { index: i });
        }
        Ok(TimeTagSeries { channel, tags })
    }

    /// Wrap tags known to be sorted (producer guarantees order).
    pub(crate) fn from_sorted_unchecked(channel: u32, tags: Vec<Timestamp>) -> Self {
        debug_assert!(first_unsorted(&tags).is_none());
        TimeTagSeries { channel, tags }
    }

    pub fn channel(&self) -> u32 {
        self.channel
    }

    pub fn tags(&self) -> &[Timestamp] {
        &self.tags
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }
}

fn first_unsorted(tags: &[Timestamp]) -> Option<usize> {
    tags.windows(2).position(|w| w[1] < w[0]).map(|i| i + 1)
}

/// Convert one channel's tags to a phase series against its nominal rate:
/// `x[i] = t[i] - i/nominal - t[0]` in picoseconds, `tau0 = 1/nominal`.
///
/// The linear best-fit frequency offset is intentionally not removed; the
/// second difference inside TDEV annihilates it anyway, and keeping it means
/// fewer silent transformations of the data.
pub fn series_from_tags(tags: &TimeTagSeries, nominal: Frequency) -> Result<PhaseSeries> {
    if tags.is_empty() {
        return Err(Error::EmptySeries);
    }
    let t0 = tags.tags()[0].as_fs();
    let samples: Vec<f64> = tags
        .tags()
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let nominal_fs = nominal.nominal_tick_fs(i as u64);
            (t.as_fs() - t0 - nominal_fs) as f64 / FS_PER_PS as f64
        })
        .collect();
    PhaseSeries::new(
        nominal.period_s(),
        samples,
        format!("ch{}@{}", tags.channel(), nominal),
    )
}
