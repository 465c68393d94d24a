//! Measurement chain: photodiode/tagger channel model (IRF jitter plus RF
//! conditioning jitter in quadrature, dead-time gating), the pulse-count
//! frequency divider, and nearest-neighbor pairing of two tag streams into
//! a phase-difference series.
//!
//! The dead-time gate re-arms on a fixed cadence anchored at the first
//! retained event, so a saturating input is throttled to exactly one event
//! per dead-time interval (the instrument's advertised maximum count rate).

use serde::{Deserialize, Serialize};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Error;
use crate::timebase::{Frequency, PhaseSeries, TimeTagSeries, Timestamp, FS_PER_PS, FS_PER_S};
use crate::Result;

/// Two-channel time-tagger front end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaggerConfig {
    /// Intrinsic instrument response, RMS picoseconds per channel.
    pub irf_rms_ps: f64,
    /// Channel dead time in nanoseconds.
    pub deadtime_ns: f64,
    /// RF-conditioning jitter per channel (inverter, DC block, attenuator),
    /// added to the IRF in quadrature.
    pub per_channel_extra_jitter_ps: f64,
}

impl Default for TaggerConfig {
    fn default() -> Self {
        TaggerConfig {
            irf_rms_ps: 1.6,
            deadtime_ns: 80.0,
            per_channel_extra_jitter_ps: 0.0,
        }
    }
}

impl TaggerConfig {
    pub fn validate(&self) -> Result<()> {
        for (what, v) in [
            ("tagger IRF", self.irf_rms_ps),
            ("tagger dead time", self.deadtime_ns),
            ("channel extra jitter", self.per_channel_extra_jitter_ps),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidValue {
                    what,
                    detail: format!("{v}"),
                });
            }
        }
        Ok(())
    }

    /// Total per-channel jitter: IRF and RF chain in quadrature.
    pub fn channel_jitter_ps(&self) -> f64 {
        self.irf_rms_ps.hypot(self.per_channel_extra_jitter_ps)
    }

    /// Same tagger with the RF-chain term replaced.
    pub fn with_extra_jitter(&self, extra_ps: f64) -> Self {
        TaggerConfig {
            per_channel_extra_jitter_ps: extra_ps,
            ..*self
        }
    }
}

/// Pulse-count frequency divider inserted ahead of a tagger channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DividerConfig {
    pub ratio: u32,
    pub added_jitter_ps: f64,
}

impl Default for DividerConfig {
    fn default() -> Self {
        DividerConfig {
            ratio: 8,
            added_jitter_ps: 0.0,
        }
    }
}

impl DividerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ratio < 1 {
            return Err(Error::InvalidValue {
                what: "divider ratio",
                detail: "0".into(),
            });
        }
        if !(self.added_jitter_ps.is_finite() && self.added_jitter_ps >= 0.0) {
            return Err(Error::InvalidValue {
                what: "divider jitter",
                detail: format!("{} ps", self.added_jitter_ps),
            });
        }
        Ok(())
    }
}

/// Ideal event stream for a pulse train: `tag[i] = i/rate + x[i]`, no
/// jitter, no dead time. `rate` must match the series grid.
pub fn events_from_series(
    pulse_timing: &PhaseSeries,
    rate: Frequency,
    channel: u32,
) -> Result<TimeTagSeries> {
    let expect = 1.0 / pulse_timing.tau0_s();
    let got = rate.as_hz_f64();
    if ((got - expect) / expect).abs() > 1e-9 {
        return Err(Error::InvalidValue {
            what: "emission rate",
            detail: format!("{rate} does not match series grid of {expect} Hz"),
        });
    }
    let tags: Vec<Timestamp> = pulse_timing
        .samples()
        .iter()
        .enumerate()
        .map(|(i, &x_ps)| {
            Timestamp(rate.nominal_tick_fs(i as u64) + ps_to_fs_rounded(x_ps))
        })
        .collect();
    let mut tags = tags;
    tags.sort_unstable();
    Ok(TimeTagSeries::from_sorted_unchecked(channel, tags))
}

#[inline]
fn ps_to_fs_rounded(ps: f64) -> i128 {
    (ps * FS_PER_PS as f64).round() as i128
}

/// Cadence-anchored dead-time gate.
struct DeadtimeGate {
    deadtime_fs: i128,
    next_ready: Option<i128>,
}

impl DeadtimeGate {
    fn new(deadtime_ns: f64) -> Self {
        DeadtimeGate {
            deadtime_fs: (deadtime_ns * 1e6).round() as i128,
            next_ready: None,
        }
    }

    #[inline]
    fn admit(&mut self, t: i128) -> bool {
        if self.deadtime_fs == 0 {
            return true;
        }
        match self.next_ready {
            None => {
                self.next_ready = Some(t + self.deadtime_fs);
                true
            }
            Some(r) if t < r => false,
            Some(r) => {
                let skipped = (t - r) / self.deadtime_fs;
                self.next_ready = Some(r + (skipped + 1) * self.deadtime_fs);
                true
            }
        }
    }
}

/// Pass an event stream through a tagger channel: add the per-channel
/// Gaussian jitter, sort, and apply dead-time gating.
pub fn tagger_channel(
    events: &TimeTagSeries,
    tagger: &TaggerConfig,
    seed: u64,
) -> Result<TimeTagSeries> {
    tagger.validate()?;
    let sigma = tagger.channel_jitter_ps();
    let mut tags: Vec<Timestamp> = if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        events
            .tags()
            .iter()
            .map(|t| Timestamp(t.as_fs() + ps_to_fs_rounded(normal.sample(&mut rng))))
            .collect()
    } else {
        events.tags().to_vec()
    };
    tags.sort_unstable();
    let mut gate = DeadtimeGate::new(tagger.deadtime_ns);
    tags.retain(|t| gate.admit(t.as_fs()));
    Ok(TimeTagSeries::from_sorted_unchecked(events.channel(), tags))
}

/// Detect a pulse train and tag it: ideal events, channel jitter, dead time.
pub fn emit_tags(
    pulse_timing: &PhaseSeries,
    rate: Frequency,
    tagger: &TaggerConfig,
    channel: u32,
    seed: u64,
) -> Result<TimeTagSeries> {
    let events = events_from_series(pulse_timing, rate, channel)?;
    tagger_channel(&events, tagger, seed)
}

/// Keep every `ratio`-th tag starting at index 0, adding the divider's own
/// white jitter to each kept tag.
pub fn divide(tags: &TimeTagSeries, div: &DividerConfig, seed: u64) -> Result<TimeTagSeries> {
    div.validate()?;
    let kept = tags.tags().iter().step_by(div.ratio as usize);
    let mut out: Vec<Timestamp> = if div.added_jitter_ps > 0.0 {
        let normal = Normal::new(0.0, div.added_jitter_ps).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        kept.map(|t| Timestamp(t.as_fs() + ps_to_fs_rounded(normal.sample(&mut rng))))
            .collect()
    } else {
        kept.copied().collect()
    };
    out.sort_unstable();
    Ok(TimeTagSeries::from_sorted_unchecked(tags.channel(), out))
}

/// Pair two tag streams into a phase-difference series (`B - A`,
/// picoseconds) on the slower channel's grid.
///
/// For each slow-channel tag the nearest fast-channel tag forms the raw
/// difference; deterministic grid offsets between commensurate rates are
/// subtracted, and jumps larger than half a fast period (dead-time drops,
/// ramps across a period boundary) are unwrapped by whole periods. Slow
/// tags with no partner within 1.5 slow periods hold the previous value;
/// more than 10 % of those makes the channels unpairable.
pub fn pair_tags(
    chan_a: &TimeTagSeries,
    chan_b: &TimeTagSeries,
    nominal_a: Frequency,
    nominal_b: Frequency,
) -> Result<PhaseSeries> {
    if chan_a.is_empty() || chan_b.is_empty() {
        return Err(Error::EmptySeries);
    }
    // slower channel provides the output grid; ties keep A as reference
    let a_slow = nominal_a.as_hz_f64() <= nominal_b.as_hz_f64();
    let (slow, fast, slow_rate, fast_rate) = if a_slow {
        (chan_a, chan_b, nominal_a, nominal_b)
    } else {
        (chan_b, chan_a, nominal_b, nominal_a)
    };
    let sign = if a_slow { 1.0 } else { -1.0 }; // output is B - A
    let slow_period_fs = slow_rate.nominal_tick_fs(1);
    let fast_period_fs = fast_rate.nominal_tick_fs(1);
    let unmatched_limit_fs = slow_period_fs + slow_period_fs / 2;

    let fast_tags = fast.tags();
    let slow_tags = slow.tags();
    let t0 = slow_tags[0].as_fs();

    // grid length from the last slow tag's inferred index
    let last_k = slow_rate.nearest_tick_index(slow_tags[slow_tags.len() - 1].as_fs() - t0);
    if last_k < 0 {
        return Err(Error::UnsortedInput { index: 0 });
    }
    let grid_len = last_k as usize + 1;
    let mut values = vec![f64::NAN; grid_len];
    let mut unpaired = 0usize;

    for s in slow_tags {
        let ts = s.as_fs();
        let k = slow_rate.nearest_tick_index(ts - t0);
        if k < 0 || k as usize >= grid_len {
            continue;
        }
        let j = nearest_index(fast_tags, ts);
        let tf = fast_tags[j].as_fs();
        if (tf - ts).abs() > unmatched_limit_fs {
            unpaired += 1;
            continue;
        }
        // deterministic sub-period offset of the matched nominal grids
        let fast_k = fast_rate.nearest_tick_index(tf - t0);
        let grid_offset =
            fast_rate.nominal_tick_fs(fast_k.max(0) as u64) - slow_rate.nominal_tick_fs(k as u64);
        values[k as usize] = sign * (tf - ts - grid_offset) as f64 / FS_PER_PS as f64;
    }

    // unwrap by whole fast periods and fill holes with the previous value
    let period_ps = fast_period_fs as f64 / FS_PER_PS as f64;
    let mut prev: Option<f64> = None;
    for v in values.iter_mut() {
        if v.is_nan() {
            unpaired += 1;
            *v = prev.unwrap_or(0.0);
            continue;
        }
        if let Some(p) = prev {
            let wraps = ((*v - p) / period_ps).round();
            *v -= wraps * period_ps;
        }
        prev = Some(*v);
    }

    if unpaired * 10 > grid_len {
        return Err(Error::ChannelsUnpairable {
            unpaired,
            total: grid_len,
        });
    }
    PhaseSeries::new(
        slow_period_fs as f64 / FS_PER_S as f64,
        values,
        format!("ch{}-vs-ch{}", chan_b.channel(), chan_a.channel()),
    )
}

fn nearest_index(tags: &[Timestamp], t: i128) -> usize {
    let i = tags.partition_point(|x| x.as_fs() < t);
    if i == 0 {
        return 0;
    }
    if i >= tags.len() {
        return tags.len() - 1;
    }
    if (tags[i].as_fs() - t) < (t - tags[i - 1].as_fs()) {
        i
    } else {
        i - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stability::adjacent_jitter;

    fn f(hz: u64) -> Frequency {
        Frequency::from_hz(hz).unwrap()
    }

    fn quiet_tagger() -> TaggerConfig {
        TaggerConfig {
            irf_rms_ps: 0.0,
            deadtime_ns: 0.0,
            per_channel_extra_jitter_ps: 0.0,
        }
    }

    #[test]
    fn zero_jitter_tags_reproduce_series_exactly() {
        let series = PhaseSeries::new(1e-7, vec![0.0, 1.5, -2.25, 7.125], "x").unwrap();
        let tags = emit_tags(&series, f(10_000_000), &quiet_tagger(), 0, 1).unwrap();
        for (i, t) in tags.tags().iter().enumerate() {
            let expect = f(10_000_000).nominal_tick_fs(i as u64)
                + (series.samples()[i] * 1000.0).round() as i128;
            assert_eq!(t.as_fs(), expect);
        }
    }

    #[test]
    fn saturated_train_is_throttled_to_deadtime_cadence() {
        // 0.01 s of an ideal 80 MHz train through an 80 ns dead time:
        // one retained tag per dead-time interval
        let n = 800_000;
        let series = PhaseSeries::zeros(1.25e-8, n, "pulses").unwrap();
        let tagger = TaggerConfig {
            deadtime_ns: 80.0,
            ..quiet_tagger()
        };
        let tags = emit_tags(&series, f(80_000_000), &tagger, 0, 1).unwrap();
        let expected = 125_000; // 0.01 s / 80 ns
        assert!(
            (tags.len() as i64 - expected).abs() <= 1,
            "retained {}",
            tags.len()
        );
    }

    #[test]
    fn slow_train_suffers_no_drops() {
        let series = PhaseSeries::zeros(1e-7, 100_000, "pulses").unwrap();
        let tagger = TaggerConfig {
            deadtime_ns: 80.0,
            ..quiet_tagger()
        };
        let tags = emit_tags(&series, f(10_000_000), &tagger, 0, 1).unwrap();
        assert_eq!(tags.len(), 100_000);
    }

    #[test]
    fn deadtime_monotonicity() {
        let series = PhaseSeries::zeros(1.25e-8, 100_000, "pulses").unwrap();
        let mut prev = usize::MAX;
        for deadtime in [0.0, 20.0, 40.0, 80.0, 160.0, 320.0] {
            let tagger = TaggerConfig {
                deadtime_ns: deadtime,
                ..quiet_tagger()
            };
            let count = emit_tags(&series, f(80_000_000), &tagger, 0, 1)
                .unwrap()
                .len();
            assert!(count <= prev, "dead time {deadtime} ns raised count");
            prev = count;
        }
    }

    #[test]
    fn divider_identity_and_rate_conversion() {
        let series = PhaseSeries::zeros(1.25e-8, 8000, "pulses").unwrap();
        let tags = events_from_series(&series, f(80_000_000), 0).unwrap();

        let identity = divide(
            &tags,
            &DividerConfig {
                ratio: 1,
                added_jitter_ps: 0.0,
            },
            0,
        )
        .unwrap();
        assert_eq!(identity.tags(), tags.tags());

        let by8 = divide(&tags, &DividerConfig::default(), 0).unwrap();
        assert_eq!(by8.len(), 1000);
        // kept tags sit on the 10 MHz grid
        for (k, t) in by8.tags().iter().enumerate() {
            assert_eq!(t.as_fs(), f(10_000_000).nominal_tick_fs(k as u64));
        }
    }

    #[test]
    fn pairing_identical_streams_gives_zero() {
        let series = PhaseSeries::zeros(1e-7, 1000, "x").unwrap();
        let tags = events_from_series(&series, f(10_000_000), 0).unwrap();
        let pair = pair_tags(&tags, &tags, f(10_000_000), f(10_000_000)).unwrap();
        assert!(pair.samples().iter().all(|&v| v == 0.0));
        assert_eq!(pair.tau0_s(), 1e-7);
    }

    #[test]
    fn constant_delay_appears_as_constant_series() {
        let a = events_from_series(&PhaseSeries::zeros(1e-7, 1000, "a").unwrap(), f(10_000_000), 0)
            .unwrap();
        let b_series = PhaseSeries::new(1e-7, vec![30.0; 1000], "b").unwrap();
        let b = events_from_series(&b_series, f(10_000_000), 1).unwrap();
        let pair = pair_tags(&a, &b, f(10_000_000), f(10_000_000)).unwrap();
        assert!(pair.samples().iter().all(|&v| (v - 30.0).abs() < 1e-9));
        // antisymmetry up to role swap
        let swapped = pair_tags(&b, &a, f(10_000_000), f(10_000_000)).unwrap();
        assert!(swapped.samples().iter().all(|&v| (v + 30.0).abs() < 1e-9));
    }

    #[test]
    fn ramp_across_period_boundary_is_unwrapped() {
        // B ramps 0.2 ns per tick: crosses the 100 ns period boundary
        let n = 1000;
        let ramp: Vec<f64> = (0..n).map(|i| 200.0 * i as f64).collect();
        let a = events_from_series(&PhaseSeries::zeros(1e-7, n, "a").unwrap(), f(10_000_000), 0)
            .unwrap();
        let b = events_from_series(
            &PhaseSeries::new(1e-7, ramp, "b").unwrap(),
            f(10_000_000),
            1,
        )
        .unwrap();
        let pair = pair_tags(&a, &b, f(10_000_000), f(10_000_000)).unwrap();
        let max_step = pair
            .samples()
            .windows(2)
            .map(|w| (w[1] - w[0]).abs())
            .fold(0.0f64, f64::max);
        assert!(max_step < 1000.0, "max step {max_step} ps");
        // nearest matching reads the phase of the closest physical pulse, so
        // the recovered ramp may lag the per-index truth by a step or two
        let total = pair.samples().last().unwrap() - pair.samples()[0];
        assert!((total - 200.0 * (n as f64 - 1.0)).abs() < 1000.0, "total {total}");
    }

    #[test]
    fn mixed_rate_pairing_uses_slow_grid() {
        let fast_series = PhaseSeries::new(1.25e-8, vec![5.0; 8000], "fast").unwrap();
        let fast = events_from_series(&fast_series, f(80_000_000), 1).unwrap();
        let slow = events_from_series(
            &PhaseSeries::zeros(1e-7, 1000, "slow").unwrap(),
            f(10_000_000),
            0,
        )
        .unwrap();
        let pair = pair_tags(&slow, &fast, f(10_000_000), f(80_000_000)).unwrap();
        assert_eq!(pair.len(), 1000);
        assert_eq!(pair.tau0_s(), 1e-7);
        assert!(pair.samples().iter().all(|&v| (v - 5.0).abs() < 1e-9));
    }

    #[test]
    fn jitter_budget_composes_in_quadrature() {
        // per-channel jitters a and b: first-difference RMS of the pair
        // series (per-event-pair convention) is sqrt(a^2 + b^2)
        let n = 1_000_000;
        let zero = PhaseSeries::zeros(1e-7, n, "z").unwrap();
        let rate = f(10_000_000);
        let a = emit_tags(
            &zero,
            rate,
            &TaggerConfig {
                irf_rms_ps: 1.7,
                ..quiet_tagger()
            },
            0,
            11,
        )
        .unwrap();
        let b = emit_tags(
            &zero,
            rate,
            &TaggerConfig {
                irf_rms_ps: 1.55,
                ..quiet_tagger()
            },
            1,
            12,
        )
        .unwrap();
        let pair = pair_tags(&a, &b, rate, rate).unwrap();
        let measured = adjacent_jitter(&pair).unwrap().rms_ps;
        let expect = (1.7f64 * 1.7 + 1.55 * 1.55).sqrt();
        assert!(
            (measured - expect).abs() / expect < 0.02,
            "{measured} vs {expect}"
        );
    }

    #[test]
    fn unpairable_channels_are_detected() {
        let slow = events_from_series(
            &PhaseSeries::zeros(1e-7, 1000, "slow").unwrap(),
            f(10_000_000),
            0,
        )
        .unwrap();
        // fast channel that stops a fifth of the way in
        let stub = TimeTagSeries::new(1, slow.tags()[..200].to_vec()).unwrap();
        let err = pair_tags(&slow, &stub, f(10_000_000), f(10_000_000)).unwrap_err();
        assert!(err.to_string().contains("channels unpairable"), "{err}");
    }
}
