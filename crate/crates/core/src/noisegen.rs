//! Synthesis of every stochastic ingredient the simulation needs:
//! power-law phase noise, band-limited "bump" noise, environmental delay
//! drift, and the attenuation-dependent jitter scaling of a marginal
//! optical link.
//!
//! All generators are pure functions of `(term, n, tau0, seed)` and are
//! bit-identical across runs for the same inputs. Colored terms are shaped
//! in the frequency domain (transform, scale by `f^(alpha/2)` or a Gaussian
//! band window, inverse transform) and then calibrated to a target sample
//! standard deviation, because jitter budgets are quoted as ps-RMS numbers,
//! never as PSD coefficients.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::timebase::PhaseSeries;
use crate::Result;

/// Power-law phase-noise term: `S_x(f) ~ f^alpha`.
///
/// `alpha = 0` is white PM, `-2` white FM, `-4` random-walk FM; odd values
/// are the flicker classes. For `alpha = 0` the amplitude is the per-sample
/// standard deviation; for colored terms it is the sample standard deviation
/// of the generated series over the requested length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawTerm {
    pub alpha: i32,
    pub rms_at_tau0_ps: f64,
}

impl PowerLawTerm {
    pub fn white(rms_ps: f64) -> Self {
        PowerLawTerm {
            alpha: 0,
            rms_at_tau0_ps: rms_ps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(-4..=0).contains(&self.alpha) {
            return Err(Error::UnsupportedExponent(self.alpha));
        }
        if !(self.rms_at_tau0_ps.is_finite() && self.rms_at_tau0_ps >= 0.0) {
            return Err(Error::InvalidValue {
                what: "power-law rms",
                detail: format!("{} ps", self.rms_at_tau0_ps),
            });
        }
        Ok(())
    }
}

/// Band-limited phase-noise term centered at `center_frequency_hz` with a
/// Gaussian band shape of fractional width `relative_bandwidth`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpTerm {
    pub center_frequency_hz: f64,
    pub relative_bandwidth: f64,
    pub rms_ps: f64,
}

impl BumpTerm {
    pub fn validate(&self) -> Result<()> {
        if !(self.center_frequency_hz.is_finite() && self.center_frequency_hz > 0.0) {
            return Err(Error::InvalidValue {
                what: "bump center frequency",
                detail: format!("{} Hz", self.center_frequency_hz),
            });
        }
        if !(self.relative_bandwidth > 0.0 && self.relative_bandwidth <= 2.0) {
            return Err(Error::InvalidValue {
                what: "bump relative bandwidth",
                detail: format!("{}", self.relative_bandwidth),
            });
        }
        if !(self.rms_ps.is_finite() && self.rms_ps >= 0.0) {
            return Err(Error::InvalidValue {
                what: "bump rms",
                detail: format!("{} ps", self.rms_ps),
            });
        }
        Ok(())
    }
}

/// Environmental delay drift: a sinusoid plus a random walk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct DriftTerm {
    pub peak_to_peak_ps: f64,
    pub period_s: f64,
    pub random_walk_rms_ps_per_sqrt_s: f64,
}

impl DriftTerm {
    pub fn validate(&self) -> Result<()> {
        for (what, v) in [
            ("drift peak-to-peak", self.peak_to_peak_ps),
            ("drift period", self.period_s),
            ("drift random-walk rms", self.random_walk_rms_ps_per_sqrt_s),
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

    pub fn is_zero(&self) -> bool {
        self.peak_to_peak_ps == 0.0 && self.random_walk_rms_ps_per_sqrt_s == 0.0
    }
}

/// Composite noise description. An all-empty spec generates exact zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct NoiseSpec {
    #[serde(default)]
    pub power_law: Vec<PowerLawTerm>,
    #[serde(default)]
    pub bumps: Vec<BumpTerm>,
    #[serde(default)]
    pub drifts: Vec<DriftTerm>,
}

impl NoiseSpec {
    pub fn empty() -> Self {
        NoiseSpec::default()
    }

    pub fn white(rms_ps: f64) -> Self {
        NoiseSpec {
            power_law: vec![PowerLawTerm::white(rms_ps)],
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for t in &self.power_law {
            t.validate()?;
        }
        for t in &self.bumps {
            t.validate()?;
        }
        for t in &self.drifts {
            t.validate()?;
        }
        Ok(())
    }

    /// Largest band-limited center frequency, for Nyquist validation.
    pub fn max_bump_frequency_hz(&self) -> Option<f64> {
        self.bumps
            .iter()
            .map(|b| b.center_frequency_hz)
            .fold(None, |acc, f| Some(acc.map_or(f, |a: f64| a.max(f))))
    }

    /// Generate the composite realization: the elementwise sum of all terms,
    /// each generated with a child seed derived from `(seed, term index)`.
    /// Bump amplitudes are multiplied by `bump_scale` (link-margin coupling).
    pub fn generate_scaled(
        &self,
        n: usize,
        tau0_s: f64,
        seed: u64,
        bump_scale: f64,
        label: &str,
    ) -> Result<PhaseSeries> {
        let mut sum = vec![0.0f64; n];
        let mut term_index = 0u64;
        for t in &self.power_law {
            let part = gen_power_law(t, n, tau0_s, derive_seed(seed, term_index))?;
            add_assign(&mut sum, part.samples());
            term_index += 1;
        }
        for t in &self.bumps {
            let scaled = BumpTerm {
                rms_ps: t.rms_ps * bump_scale,
                ..*t
            };
            let part = gen_bump(&scaled, n, tau0_s, derive_seed(seed, term_index))?;
            add_assign(&mut sum, part.samples());
            term_index += 1;
        }
        for t in &self.drifts {
            let part = gen_drift(t, n, tau0_s, derive_seed(seed, term_index))?;
            add_assign(&mut sum, part.samples());
            term_index += 1;
        }
        PhaseSeries::new(tau0_s, sum, label)
    }

    pub fn generate(&self, n: usize, tau0_s: f64, seed: u64, label: &str) -> Result<PhaseSeries> {
        self.generate_scaled(n, tau0_s, seed, 1.0, label)
    }
}

fn add_assign(acc: &mut [f64], part: &[f64]) {
    for (a, p) in acc.iter_mut().zip(part) {
        *a += p;
    }
}

/// Fixed public seed-mixing function (splitmix64 finalizer over the parent
/// seed advanced by the child index). Scenario outputs stay reproducible
/// across runs and platforms because every sub-stream derives its seed
/// through this function.
pub fn derive_seed(parent: u64, index: u64) -> u64 {
    let mut z = parent ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn check_n(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::SeriesTooShort { n, min: 2 });
    }
    Ok(())
}

fn check_tau0(tau0_s: f64) -> Result<()> {
    if !(tau0_s.is_finite() && tau0_s > 0.0) {
        return Err(Error::InvalidValue {
            what: "tau0",
            detail: format!("{tau0_s} s"),
        });
    }
    Ok(())
}

/// Generate a power-law phase-noise realization.
///
/// `alpha = 0` draws i.i.d. Gaussians directly; colored terms shape a white
/// spectrum by `f^(alpha/2)` (DC removed) and rescale the result to the
/// requested sample standard deviation.
pub fn gen_power_law(term: &PowerLawTerm, n: usize, tau0_s: f64, seed: u64) -> Result<PhaseSeries> {
    term.validate()?;
    check_n(n)?;
    check_tau0(tau0_s)?;
    let label = format!("powerlaw(alpha={})", term.alpha);
    if term.rms_at_tau0_ps == 0.0 {
        return PhaseSeries::zeros(tau0_s, n, label);
    }
    if term.alpha == 0 {
        let normal = Normal::new(0.0, term.rms_at_tau0_ps).unwrap();
        let mut rng = rng_for(seed);
        let samples: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
        return PhaseSeries::new(tau0_s, samples, label);
    }
    // discrete fractional-integrator kernel: |2 sin(pi f)|^(alpha/2) is the
    // grid-exact counterpart of f^(alpha/2) and keeps the deviation-(tau)
    // slope laws valid down to the shortest averaging times
    let half_power = term.alpha as f64 / 2.0;
    let mut samples = shaped_noise(n, seed, |f_rel| {
        (2.0 * (std::f64::consts::PI * f_rel).sin()).powf(half_power)
    })?;
    rescale_to_rms(&mut samples, term.rms_at_tau0_ps)?;
    PhaseSeries::new(tau0_s, samples, label)
}

/// Generate a band-limited Gaussian-band phase-noise realization around
/// `center_frequency_hz`; the sample standard deviation equals `rms_ps`.
pub fn gen_bump(term: &BumpTerm, n: usize, tau0_s: f64, seed: u64) -> Result<PhaseSeries> {
    term.validate()?;
    check_n(n)?;
    check_tau0(tau0_s)?;
    let nyquist = 0.5 / tau0_s;
    if term.center_frequency_hz >= nyquist {
        return Err(Error::AboveNyquist {
            center_hz: term.center_frequency_hz,
            nyquist_hz: nyquist,
        });
    }
    let label = format!("bump({} Hz)", term.center_frequency_hz);
    if term.rms_ps == 0.0 {
        return PhaseSeries::zeros(tau0_s, n, label);
    }
    let fc = term.center_frequency_hz;
    let sigma_f = 0.5 * term.relative_bandwidth * fc;
    let span = n as f64 * tau0_s;
    let mut samples = shaped_noise(n, seed, |f_rel| {
        let f_hz = f_rel / tau0_s;
        let d = (f_hz - fc) / sigma_f;
        (-0.5 * d * d).exp()
    })?;
    // With very narrow bands and short spans the window can miss every bin;
    // widen the check rather than emit zeros silently.
    if samples.iter().all(|&v| v == 0.0) {
        return Err(Error::InvalidValue {
            what: "bump term",
            detail: format!(
                "band {fc} Hz +/- {sigma_f} Hz unresolvable with {n} samples over {span} s"
            ),
        });
    }
    rescale_to_rms(&mut samples, term.rms_ps)?;
    PhaseSeries::new(tau0_s, samples, label)
}

/// Generate a drift realization: sinusoid of amplitude `peak_to_peak/2` plus
/// a random walk with per-step deviation `rms_per_sqrt_s * sqrt(tau0)`.
pub fn gen_drift(term: &DriftTerm, n: usize, tau0_s: f64, seed: u64) -> Result<PhaseSeries> {
    term.validate()?;
    check_n(n)?;
    check_tau0(tau0_s)?;
    let mut samples = vec![0.0f64; n];
    if term.peak_to_peak_ps > 0.0 && term.period_s > 0.0 {
        let amp = 0.5 * term.peak_to_peak_ps;
        let w = std::f64::consts::TAU / term.period_s;
        for (i, s) in samples.iter_mut().enumerate() {
            *s += amp * (w * (i as f64) * tau0_s).sin();
        }
    }
    if term.random_walk_rms_ps_per_sqrt_s > 0.0 {
        let step = Normal::new(0.0, term.random_walk_rms_ps_per_sqrt_s * tau0_s.sqrt()).unwrap();
        let mut rng = rng_for(seed);
        let mut acc = 0.0;
        for s in samples.iter_mut().skip(1) {
            acc += step.sample(&mut rng);
            *s += acc;
        }
    }
    PhaseSeries::new(tau0_s, samples, "drift")
}

/// Bump-amplitude level (rms picoseconds) as a function of optical link
/// margin above the receiver's locking threshold. Piecewise-linear in dB:
/// 0.3 ps on the >= 20 dB plateau, 1.0 ps at zero margin. Negative margin
/// means the receiver cannot lock at all.
pub fn attenuation_jitter(received_power_margin_db: f64) -> Result<f64> {
    if !received_power_margin_db.is_finite() {
        return Err(Error::InvalidValue {
            what: "link margin",
            detail: format!("{received_power_margin_db} dB"),
        });
    }
    if received_power_margin_db < 0.0 {
        return Err(Error::LinkBelowThreshold {
            context: "attenuation margin".into(),
            margin_db: received_power_margin_db,
        });
    }
    Ok(if received_power_margin_db >= ATTENUATION_KNEE_DB {
        ATTENUATION_PLATEAU_PS
    } else {
        ATTENUATION_THRESHOLD_PS
            + (ATTENUATION_PLATEAU_PS - ATTENUATION_THRESHOLD_PS)
                * (received_power_margin_db / ATTENUATION_KNEE_DB)
    })
}

/// Plateau bump level for a comfortable link margin.
pub const ATTENUATION_PLATEAU_PS: f64 = 0.3;
/// Bump level right at the locking threshold.
pub const ATTENUATION_THRESHOLD_PS: f64 = 1.0;
/// Margin above which more optical power no longer helps.
pub const ATTENUATION_KNEE_DB: f64 = 20.0;

/// Multiplier applied to configured bump amplitudes at a given link margin,
/// normalized so a comfortable margin leaves them unchanged.
pub fn attenuation_bump_scale(margin_db: f64) -> Result<f64> {
    Ok(attenuation_jitter(margin_db)? / ATTENUATION_PLATEAU_PS)
}

/// White-spectrum synthesis shaped by `gain(f_rel)` where `f_rel` is in
/// cycles per sample, evaluated for `0 < f_rel <= 1/2`. DC is removed.
fn shaped_noise(n: usize, seed: u64, gain: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut rng = rng_for(seed);
    let mut buf: Vec<Complex<f64>> = (0..n)
        .map(|_| Complex::new(normal.sample(&mut rng), 0.0))
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    buf[0] = Complex::new(0.0, 0.0);
    for k in 1..n {
        let f_rel = (k.min(n - k)) as f64 / n as f64;
        let g = gain(f_rel);
        debug_assert!(g.is_finite());
        buf[k] *= g;
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    Ok(buf.into_iter().map(|c| c.re * scale).collect())
}

/// Scale a zero-mean realization so its sample standard deviation equals
/// `target` exactly.
fn rescale_to_rms(samples: &mut [f64], target: f64) -> Result<()> {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    if var <= 0.0 {
        return Err(Error::DegenerateSeries);
    }
    let scale = target / var.sqrt();
    for v in samples.iter_mut() {
        *v *= scale;
    }
    Ok(())
}

pub(crate) fn sample_std(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    (samples.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
}
