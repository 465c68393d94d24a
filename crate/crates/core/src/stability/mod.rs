//! Time-deviation statistics: overlapping TDEV/MDEV/ADEV estimators,
//! lag-1-autocorrelation noise identification, and 1-sigma confidence
//! intervals via equivalent degrees of freedom.
//!
//! The overlapping estimators share one O(N) pass per averaging factor:
//! windowed second-difference sums are formed from compensated prefix sums,
//! so the fast path agrees with the naive definitional triple loop to
//! better than 1e-12 relative error (asserted by the acceptance suite).

pub mod edf;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::timebase::PhaseSeries;
use crate::Result;

/// Which statistic a [`StabilityResult`] carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EstimatorKind {
    /// Time deviation, picoseconds.
    Tdev,
    /// Modified Allan deviation, fractional frequency.
    Mdev,
    /// Overlapping Allan deviation, fractional frequency.
    Adev,
}

impl EstimatorKind {
    pub fn label(&self) -> &'static str {
        match self {
            EstimatorKind::Tdev => "tdev",
            EstimatorKind::Mdev => "mdev",
            EstimatorKind::Adev => "adev",
        }
    }
}

/// One averaging time's estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityPoint {
    pub tau_s: f64,
    /// Picoseconds for TDEV, fractional frequency for ADEV/MDEV.
    pub value: f64,
    /// Number of squared summands averaged at this tau.
    pub n_used: usize,
    /// 1-sigma bounds (low, high); `None` when not yet computed or when too
    /// few summands make the chi-square model unreliable.
    pub ci: Option<(f64, f64)>,
    /// Identified phase-PSD exponent used for the bounds, when computed.
    pub alpha: Option<i32>,
}

/// A deviation-vs-averaging-time curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityResult {
    pub estimator: EstimatorKind,
    pub points: Vec<StabilityPoint>,
}

impl StabilityResult {
    /// Largest value over taus within `[tau_lo, tau_hi]`.
    pub fn peak_in(&self, tau_lo: f64, tau_hi: f64) -> Option<f64> {
        self.points
            .iter()
            .filter(|p| p.tau_s >= tau_lo && p.tau_s <= tau_hi)
            .map(|p| p.value)
            .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.max(v))))
    }

    /// True if some interior point within `[tau_lo, tau_hi]` exceeds both its
    /// ladder neighbors (a local maximum of the curve).
    pub fn has_local_max_in(&self, tau_lo: f64, tau_hi: f64) -> bool {
        self.points.windows(3).any(|w| {
            w[1].tau_s >= tau_lo
                && w[1].tau_s <= tau_hi
                && w[1].value > w[0].value
                && w[1].value > w[2].value
        })
    }

    pub fn value_at_tau(&self, tau_s: f64) -> Option<f64> {
        self.points
            .iter()
            .min_by(|a, b| {
                let da = (a.tau_s - tau_s).abs();
                let db = (b.tau_s - tau_s).abs();
                da.partial_cmp(&db).unwrap()
            })
            .filter(|p| (p.tau_s - tau_s).abs() / tau_s < 0.5)
            .map(|p| p.value)
    }
}

/// Quasi-logarithmic (octave) ladder of averaging factors, capped at N/3.
pub fn default_factors(n: usize) -> Vec<usize> {
    let max = n / 3;
    let mut out = Vec::new();
    let mut m = 1usize;
    while m <= max {
        out.push(m);
        m = m.saturating_mul(2);
    }
    out
}

fn clean_factors(factors: &[usize], n: usize) -> Result<Vec<usize>> {
    if n < 3 {
        return Err(Error::SeriesTooShort { n, min: 3 });
    }
    let max = n / 3;
    let mut fs: Vec<usize> = factors.to_vec();
    fs.sort_unstable();
    fs.dedup();
    for &m in &fs {
        if m < 1 || m > max {
            return Err(Error::FactorOutOfRange { m, max, n });
        }
    }
    if fs.is_empty() {
        return Err(Error::InvalidValue {
            what: "averaging factors",
            detail: "empty list".into(),
        });
    }
    Ok(fs)
}

/// Neumaier-compensated running sum.
#[derive(Default, Clone, Copy)]
struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    #[inline]
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Shared per-factor sums over second differences.
struct DiffSums {
    /// Sum over j of (sum_{i=j}^{j+m-1} D_i)^2 -- modified-family numerator.
    windowed_ssq: f64,
    /// Number of windowed summands: N - 3m + 1.
    windowed_count: usize,
    /// Sum over i of D_i^2 -- overlapping-Allan numerator.
    plain_ssq: f64,
    /// Number of plain summands: N - 2m.
    plain_count: usize,
}

#[inline]
fn second_diff(x: &[f64], i: usize, m: usize) -> f64 {
    x[i + 2 * m] - 2.0 * x[i + m] + x[i]
}

fn diff_sums(x: &[f64], m: usize) -> DiffSums {
    let n = x.len();
    let nd = n - 2 * m;
    let wcount = n - 3 * m + 1;
    let mut plain = CompensatedSum::default();
    let mut windowed = CompensatedSum::default();
    if m == 1 {
        // window of one: both sums run over the same squared differences
        for i in 0..nd {
            let d = second_diff(x, i, 1);
            plain.add(d * d);
            if i < wcount {
                windowed.add(d * d);
            }
        }
    } else {
        // prefix sums of D let each windowed sum be formed in O(1) without
        // the drift of a running-window recurrence
        let mut prefix = Vec::with_capacity(nd + 1);
        let mut acc = CompensatedSum::default();
        prefix.push(0.0);
        for i in 0..nd {
            let d = second_diff(x, i, m);
            plain.add(d * d);
            acc.add(d);
            prefix.push(acc.value());
        }
        for j in 0..wcount {
            let s = prefix[j + m] - prefix[j];
            windowed.add(s * s);
        }
    }
    DiffSums {
        windowed_ssq: windowed.value(),
        windowed_count: wcount,
        plain_ssq: plain.value(),
        plain_count: nd,
    }
}

const PS_PER_S: f64 = 1e12;

/// Overlapping time deviation in picoseconds at `tau = m * tau0`:
/// `TDEV^2(m tau0) = (1/(6 m^2 (N-3m+1))) * sum_j [ sum_{i=j}^{j+m-1}
/// (x_{i+2m} - 2 x_{i+m} + x_i) ]^2`.
pub fn tdev(x: &PhaseSeries, factors: &[usize]) -> Result<StabilityResult> {
    estimate(x, factors, EstimatorKind::Tdev)
}

/// Overlapping modified Allan deviation (fractional frequency).
pub fn mdev(x: &PhaseSeries, factors: &[usize]) -> Result<StabilityResult> {
    estimate(x, factors, EstimatorKind::Mdev)
}

/// Overlapping Allan deviation (fractional frequency).
pub fn adev(x: &PhaseSeries, factors: &[usize]) -> Result<StabilityResult> {
    estimate(x, factors, EstimatorKind::Adev)
}

fn estimate(x: &PhaseSeries, factors: &[usize], kind: EstimatorKind) -> Result<StabilityResult> {
    let fs = clean_factors(factors, x.len())?;
    let tau0 = x.tau0_s();
    let points = fs
        .iter()
        .map(|&m| {
            let sums = diff_sums(x.samples(), m);
            let mf = m as f64;
            let (value, n_used) = match kind {
                EstimatorKind::Tdev => {
                    let v = (sums.windowed_ssq / (6.0 * mf * mf * sums.windowed_count as f64))
                        .sqrt();
                    (v, sums.windowed_count)
                }
                EstimatorKind::Mdev => {
                    let ssq_s2 = sums.windowed_ssq / (PS_PER_S * PS_PER_S);
                    let v = (ssq_s2
                        / (2.0 * mf.powi(4) * tau0 * tau0 * sums.windowed_count as f64))
                        .sqrt();
                    (v, sums.windowed_count)
                }
                EstimatorKind::Adev => {
                    let ssq_s2 = sums.plain_ssq / (PS_PER_S * PS_PER_S);
                    let v = (ssq_s2 / (2.0 * mf * mf * tau0 * tau0 * sums.plain_count as f64))
                        .sqrt();
                    (v, sums.plain_count)
                }
            };
            StabilityPoint {
                tau_s: mf * tau0,
                value,
                n_used,
                ci: None,
                alpha: None,
            }
        })
        .collect();
    Ok(StabilityResult {
        estimator: kind,
        points,
    })
}

/// Jitter between adjacent samples, both conventions: the first-difference
/// RMS divided by sqrt(2) (per-event-pair convention) and the raw TDEV at
/// tau0 when enough samples exist. For white phase noise the two coincide.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdjacentJitter {
    pub rms_ps: f64,
    pub tdev_tau0_ps: Option<f64>,
}

pub fn adjacent_jitter(x: &PhaseSeries) -> Result<AdjacentJitter> {
    let s = x.samples();
    if s.len() < 2 {
        return Err(Error::SeriesTooShort {
            n: s.len(),
            min: 2,
        });
    }
    let diffs: Vec<f64> = s.windows(2).map(|w| w[1] - w[0]).collect();
    let rms_ps = crate::noisegen::sample_std(&diffs) / std::f64::consts::SQRT_2;
    let tdev_tau0_ps = if s.len() >= 3 {
        Some(tdev(x, &[1])?.points[0].value)
    } else {
        None
    };
    Ok(AdjacentJitter {
        rms_ps,
        tdev_tau0_ps,
    })
}

/// Identify the dominant phase-PSD exponent (`S_x(f) ~ f^alpha`, integer in
/// -4..=0) at averaging factor `m` with the lag-1 autocorrelation method:
/// difference the m-averaged phase until the lag-1 statistic settles, then
/// map it to the nearest power-law class.
pub fn noise_id(x: &PhaseSeries, m: usize) -> Result<i32> {
    if m == 0 {
        return Err(Error::FactorOutOfRange {
            m,
            max: x.len() / 3,
            n: x.len(),
        });
    }
    let mut z: Vec<f64> = if m == 1 {
        x.samples().to_vec()
    } else {
        x.samples()
            .chunks_exact(m)
            .map(|c| c.iter().sum::<f64>() / m as f64)
            .collect()
    };
    if z.len() < 32 {
        return Err(Error::SeriesTooShort {
            n: z.len(),
            min: 32,
        });
    }
    let mut d = 0i32;
    loop {
        let rho = {
            let r1 = lag1_acf(&z)?;
            let denom = 1.0 + r1;
            if denom.abs() < 1e-12 {
                -0.5
            } else {
                r1 / denom
            }
        };
        if rho < 0.25 || d >= 2 {
            let alpha_y = (-(2.0 * rho).round() as i32 - 2 * d + 2).clamp(-2, 2);
            return Ok(alpha_y - 2); // frequency-PSD exponent -> phase-PSD
        }
        z = z.windows(2).map(|w| w[1] - w[0]).collect();
        d += 1;
        if z.len() < 8 {
            return Err(Error::SeriesTooShort { n: z.len(), min: 8 });
        }
    }
}

fn lag1_acf(z: &[f64]) -> Result<f64> {
    let n = z.len() as f64;
    let mean = z.iter().sum::<f64>() / n;
    let var: f64 = z.iter().map(|v| (v - mean) * (v - mean)).sum();
    if var <= 0.0 {
        return Err(Error::DegenerateSeries);
    }
    let cov: f64 = z.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
    Ok(cov / var)
}

/// Minimum summand count below which chi-square bounds are not reported.
pub const MIN_SUMMANDS_FOR_CI: usize = 8;

const P_LOW: f64 = (1.0 - 0.6827) / 2.0;
const P_HIGH: f64 = (1.0 + 0.6827) / 2.0;

/// Fill 1-sigma confidence bounds on a result computed from `x`: identify
/// the noise class per tau, look up the equivalent degrees of freedom for
/// this estimator, and invert the chi-square distribution at the 1-sigma
/// quantiles. Points with fewer than [`MIN_SUMMANDS_FOR_CI`] summands keep
/// `ci = None` (unreliable, not an error).
pub fn confidence(result: &StabilityResult, x: &PhaseSeries) -> Result<StabilityResult> {
    let n = x.len();
    let tau0 = x.tau0_s();
    let modified = matches!(result.estimator, EstimatorKind::Tdev | EstimatorKind::Mdev);
    let mut out = result.clone();
    let mut last_alpha: Option<i32> = None;
    for p in &mut out.points {
        let m = (p.tau_s / tau0).round().max(1.0) as usize;
        if p.n_used < MIN_SUMMANDS_FOR_CI {
            p.ci = None;
            continue;
        }
        // fall back to the last identifiable exponent when the averaged
        // series gets too short for the lag-1 discriminator
        let alpha = match noise_id(x, m) {
            Ok(a) => {
                last_alpha = Some(a);
                a
            }
            Err(Error::DegenerateSeries) => {
                p.ci = Some((p.value, p.value));
                p.alpha = Some(0);
                continue;
            }
            Err(_) => last_alpha.unwrap_or(0),
        };
        p.alpha = Some(alpha);
        let nu = edf::edf_greenhall(alpha + 2, 2, m, n, true, modified);
        if !nu.is_finite() {
            p.ci = None;
            continue;
        }
        let chi_hi = edf::chi_squared_quantile(P_HIGH, nu);
        let chi_lo = edf::chi_squared_quantile(P_LOW, nu);
        if chi_hi <= 0.0 || chi_lo <= 0.0 {
            p.ci = None;
            continue;
        }
        let low = p.value * (nu / chi_hi).sqrt();
        let high = p.value * (nu / chi_lo).sqrt();
        p.ci = Some((low, high));
    }
    Ok(out)
}

/// Convenience pipeline: estimate, then fill confidence bounds.
pub fn tdev_with_confidence(x: &PhaseSeries, factors: &[usize]) -> Result<StabilityResult> {
    let r = tdev(x, factors)?;
    confidence(&r, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noisegen::{gen_power_law, PowerLawTerm};

    fn series(tau0: f64, samples: Vec<f64>) -> PhaseSeries {
        PhaseSeries::new(tau0, samples, "test").unwrap()
    }

    #[test]
    fn constant_and_ramp_give_zero_tdev() {
        let n = 500;
        let constant = series(1e-7, vec![4.2; n]);
        let ramp = series(1e-7, (0..n).map(|i| 0.37 * i as f64).collect());
        let factors = default_factors(n);
        for s in [&constant, &ramp] {
            let r = tdev(s, &factors).unwrap();
            for p in &r.points {
                assert!(p.value.abs() <= 1e-9, "tau {}: {}", p.tau_s, p.value);
            }
        }
    }

    #[test]
    fn tdev_equals_tau_mdev_over_sqrt3() {
        let x = gen_power_law(&PowerLawTerm::white(1.3), 4096, 1e-7, 11).unwrap();
        let factors = default_factors(4096);
        let t = tdev(&x, &factors).unwrap();
        let m = mdev(&x, &factors).unwrap();
        for (tp, mp) in t.points.iter().zip(&m.points) {
            let from_mdev = tp.tau_s * mp.value / 3.0f64.sqrt() * 1e12;
            assert!(
                (tp.value - from_mdev).abs() <= 1e-12 * tp.value.abs().max(1e-300),
                "tau {}: {} vs {}",
                tp.tau_s,
                tp.value,
                from_mdev
            );
        }
    }

    #[test]
    fn mdev_equals_adev_at_m1() {
        let x = gen_power_law(&PowerLawTerm::white(2.0), 1000, 1e-6, 3).unwrap();
        let m = mdev(&x, &[1]).unwrap();
        let a = adev(&x, &[1]).unwrap();
        assert_eq!(m.points[0].value, a.points[0].value);
    }

    #[test]
    fn white_fm_adev_slope() {
        // white FM phase (alpha = -2) has ADEV ~ tau^(-1/2)
        let mut slopes = Vec::new();
        for seed in 0..10 {
            let term = PowerLawTerm {
                alpha: -2,
                rms_at_tau0_ps: 1.0,
            };
            let x = gen_power_law(&term, 65_536, 1.0, seed).unwrap();
            let factors = [1usize, 2, 4, 8, 16];
            let r = adev(&x, &factors).unwrap();
            slopes.push(fit_loglog_slope(&r));
        }
        let mean = slopes.iter().sum::<f64>() / slopes.len() as f64;
        assert!((mean + 0.5).abs() < 0.05, "slope {mean}");
    }

    pub(crate) fn fit_loglog_slope(r: &StabilityResult) -> f64 {
        let pts: Vec<(f64, f64)> = r
            .points
            .iter()
            .filter(|p| p.value > 0.0)
            .map(|p| (p.tau_s.ln(), p.value.ln()))
            .collect();
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        (n * sxy - sx * sy) / (n * sxx - sx * sx)
    }

    #[test]
    fn factor_validation() {
        let x = series(1e-7, vec![0.0; 30]);
        let err = tdev(&x, &[11]).unwrap_err();
        assert!(err.to_string().contains("m = 11"), "{err}");
        assert!(tdev(&x, &[10]).is_ok());
        assert!(tdev(&x, &[0]).is_err());
        assert!(tdev(&x, &[]).is_err());
    }

    #[test]
    fn adjacent_jitter_conventions() {
        let x = gen_power_law(&PowerLawTerm::white(1.0), 1_000_000, 1e-7, 5).unwrap();
        let aj = adjacent_jitter(&x).unwrap();
        assert!((aj.rms_ps - 1.0).abs() < 0.02, "rms {}", aj.rms_ps);
        let t0 = aj.tdev_tau0_ps.unwrap();
        assert!((t0 - 1.0).abs() < 0.02, "tdev(tau0) {t0}");

        let flat = series(1e-7, vec![7.7; 100]);
        let aj = adjacent_jitter(&flat).unwrap();
        assert_eq!(aj.rms_ps, 0.0);
        assert_eq!(aj.tdev_tau0_ps, Some(0.0));
    }

    #[test]
    fn noise_id_white_pm() {
        let mut hits = 0;
        for seed in 0..200 {
            let x = gen_power_law(&PowerLawTerm::white(1.0), 4096, 1e-7, seed).unwrap();
            if noise_id(&x, 1).unwrap() == 0 {
                hits += 1;
            }
        }
        assert!(hits >= 190, "{hits}/200");
    }

    #[test]
    fn noise_id_random_walk_fm() {
        let mut hits = 0;
        for seed in 0..200 {
            let term = PowerLawTerm {
                alpha: -4,
                rms_at_tau0_ps: 1.0,
            };
            let x = gen_power_law(&term, 4096, 1e-7, seed).unwrap();
            if noise_id(&x, 1).unwrap() == -4 {
                hits += 1;
            }
        }
        assert!(hits >= 180, "{hits}/200");
    }

    #[test]
    fn noise_id_degenerate_and_short() {
        let flat = series(1e-7, vec![1.0; 100]);
        assert!(matches!(noise_id(&flat, 1), Err(Error::DegenerateSeries)));
        let short = series(1e-7, vec![0.0, 1.0, 0.5]);
        assert!(matches!(
            noise_id(&short, 1),
            Err(Error::SeriesTooShort { .. })
        ));
    }

    #[test]
    fn confidence_interval_properties() {
        let x = gen_power_law(&PowerLawTerm::white(1.0), 4096, 1e-7, 21).unwrap();
        let factors = default_factors(4096);
        let r = tdev_with_confidence(&x, &factors).unwrap();
        let mut rel_widths = Vec::new();
        for p in &r.points {
            if let Some((lo, hi)) = p.ci {
                assert!(lo <= p.value && p.value <= hi, "tau {}", p.tau_s);
                assert!(lo >= 0.0);
                rel_widths.push((p.tau_s, (hi - lo) / p.value));
            }
        }
        // widest interval sits at the largest tau (fewest windows)
        let max_tau_width = rel_widths.last().unwrap().1;
        for (tau, w) in &rel_widths[..rel_widths.len() - 1] {
            assert!(*w <= max_tau_width + 1e-12, "tau {tau} wider than last");
        }
    }

    #[test]
    fn confidence_narrows_with_more_data() {
        let term = PowerLawTerm::white(1.0);
        let widths: Vec<f64> = [1024usize, 4096, 16384]
            .iter()
            .map(|&n| {
                let x = gen_power_law(&term, n, 1e-7, 9).unwrap();
                let r = tdev_with_confidence(&x, &[4]).unwrap();
                let (lo, hi) = r.points[0].ci.unwrap();
                (hi - lo) / r.points[0].value
            })
            .collect();
        assert!(widths[0] > widths[1] && widths[1] > widths[2], "{widths:?}");
    }

    #[test]
    fn unreliable_points_have_no_bounds() {
        let x = gen_power_law(&PowerLawTerm::white(1.0), 64, 1e-7, 2).unwrap();
        // m = 20: N - 3m + 1 = 5 < 8 summands
        let r = tdev_with_confidence(&x, &[1, 20]).unwrap();
        assert!(r.points[0].ci.is_some());
        assert!(r.points[1].ci.is_none());
    }

    #[test]
    fn scale_equivariance_and_reversal() {
        let x = gen_power_law(&PowerLawTerm::white(1.0), 512, 1e-7, 4).unwrap();
        let factors = default_factors(512);
        let base = tdev(&x, &factors).unwrap();

        let scaled = series(1e-7, x.samples().iter().map(|v| -2.5 * v).collect());
        let r2 = tdev(&scaled, &factors).unwrap();
        for (a, b) in base.points.iter().zip(&r2.points) {
            assert!((b.value - 2.5 * a.value).abs() < 1e-12 * b.value.max(1e-300));
        }

        let reversed = series(1e-7, x.samples().iter().rev().cloned().collect());
        let r3 = tdev(&reversed, &factors).unwrap();
        for (a, b) in base.points.iter().zip(&r3.points) {
            assert!((b.value - a.value).abs() < 1e-9 * a.value.max(1e-300));
        }
    }
}
