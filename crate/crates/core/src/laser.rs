//! Mode-locked-laser discipline model: the 10 MHz reference is converted to
//! 80 MHz by a signal generator (adding a little white jitter) and drives a
//! type-2 PLL that steers the laser cavity. The laser's pulse timing tracks
//! the reference below the loop bandwidth and free-runs on its own cavity
//! noise above it. An ideal x8 frequency multiplication preserves time
//! error, so the output series stays on the reference sample grid.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::filter::{pll_analog_response, pll_natural_hz, PllLowPass};
use crate::noisegen::{derive_seed, gen_power_law, NoiseSpec, PowerLawTerm};
use crate::timebase::{Frequency, PhaseSeries};
use crate::Result;

/// Type-2 loop configuration. `loop_bandwidth_hz` is the -3 dB point of the
/// closed-loop low-pass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PLLConfig {
    pub loop_bandwidth_hz: f64,
    pub damping: f64,
    pub reference_rate: Frequency,
    pub output_rate: Frequency,
}

impl Default for PLLConfig {
    fn default() -> Self {
        PLLConfig {
            loop_bandwidth_hz: 10_000.0,
            damping: 0.7,
            reference_rate: Frequency::from_hz(10_000_000).unwrap(),
            output_rate: Frequency::from_hz(80_000_000).unwrap(),
        }
    }
}

impl PLLConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.loop_bandwidth_hz.is_finite() && self.loop_bandwidth_hz > 0.0) {
            return Err(Error::InvalidValue {
                what: "loop bandwidth",
                detail: format!("{} Hz", self.loop_bandwidth_hz),
            });
        }
        if !(self.damping.is_finite() && self.damping > 0.0) {
            return Err(Error::InvalidValue {
                what: "damping",
                detail: format!("{}", self.damping),
            });
        }
        if self.output_rate.integer_ratio_to(&self.reference_rate).is_none() {
            return Err(Error::InvalidValue {
                what: "rate ratio",
                detail: format!(
                    "output {} not an integer multiple of reference {}",
                    self.output_rate, self.reference_rate
                ),
            });
        }
        Ok(())
    }
}

/// A mode-locked laser with its locking electronics and signal generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MLLNode {
    pub name: String,
    pub pll: PLLConfig,
    /// Free-running cavity timing noise (enters through the loop high-pass).
    pub cavity_noise: NoiseSpec,
    /// White PM added by the 10 -> 80 MHz signal generator.
    pub sg_jitter_ps: f64,
}

impl MLLNode {
    pub fn validate(&self) -> Result<()> {
        self.pll.validate()?;
        self.cavity_noise.validate()?;
        if !(self.sg_jitter_ps.is_finite() && self.sg_jitter_ps >= 0.0) {
            return Err(Error::InvalidValue {
                what: "signal-generator jitter",
                detail: format!("{} ps", self.sg_jitter_ps),
            });
        }
        Ok(())
    }
}

/// Closed-loop transfer magnitudes `(|LP|, |HP|)` of the analog prototype at
/// `f_hz`. LP -> 1 and HP -> 0 toward DC; the reverse toward infinity.
pub fn loop_response(pll: &PLLConfig, f_hz: f64) -> Result<(f64, f64)> {
    pll.validate()?;
    if !(f_hz.is_finite() && f_hz > 0.0) {
        return Err(Error::InvalidValue {
            what: "probe frequency",
            detail: format!("{f_hz} Hz"),
        });
    }
    let natural = pll_natural_hz(pll.loop_bandwidth_hz, pll.damping);
    Ok(pll_analog_response(natural, pll.damping, f_hz))
}

/// Pulse-timing error of the disciplined laser, sampled on the reference
/// grid: `LP(reference + SG white PM) + HP(cavity noise)` with the
/// complementary second-order loop responses.
pub fn discipline(reference: &PhaseSeries, node: &MLLNode, seed: u64) -> Result<PhaseSeries> {
    node.validate()?;
    let tau0 = reference.tau0_s();
    // The sample grid must sit on the reference tick grid (possibly
    // decimated): tau0 * reference_rate is a positive integer.
    let ticks_per_sample = tau0 * node.pll.reference_rate.as_hz_f64();
    if ticks_per_sample < 0.999_999 || (ticks_per_sample - ticks_per_sample.round()).abs() > 1e-6 {
        return Err(Error::InvalidValue {
            what: "reference grid",
            detail: format!(
                "tau0 {tau0} s is not a whole number of {} periods",
                node.pll.reference_rate
            ),
        });
    }
    let natural = pll_natural_hz(node.pll.loop_bandwidth_hz, node.pll.damping);
    if natural >= 0.45 / tau0 {
        return Err(Error::InvalidValue {
            what: "loop bandwidth",
            detail: format!(
                "natural frequency {natural:.1} Hz too close to the {:.1} Hz Nyquist limit",
                0.5 / tau0
            ),
        });
    }
    let n = reference.len();
    let damping = node.pll.damping;

    let mut input = reference.samples().to_vec();
    if node.sg_jitter_ps > 0.0 {
        let sg = gen_power_law(
            &PowerLawTerm::white(node.sg_jitter_ps),
            n,
            tau0,
            derive_seed(seed, 0),
        )?;
        for (v, j) in input.iter_mut().zip(sg.samples()) {
            *v += j;
        }
    }
    let mut out = PllLowPass::new(natural, damping, tau0).run(&input);

    let cavity = node
        .cavity_noise
        .generate(n, tau0, derive_seed(seed, 1), "cavity")?;
    if cavity.samples().iter().any(|&v| v != 0.0) {
        let cav_lp = PllLowPass::new(natural, damping, tau0).run(cavity.samples());
        for i in 0..n {
            out[i] += cavity.samples()[i] - cav_lp[i];
        }
    }
    PhaseSeries::new(tau0, out, format!("{}-pulse-timing", node.name))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noisegen::BumpTerm;
    use crate::stability::{tdev, default_factors};

    fn node(name: &str, cavity: NoiseSpec, sg: f64) -> MLLNode {
        MLLNode {
            name: name.into(),
            pll: PLLConfig::default(),
            cavity_noise: cavity,
            sg_jitter_ps: sg,
        }
    }

    #[test]
    fn all_zero_inputs_give_zero_output() {
        let reference = PhaseSeries::zeros(1e-7, 10_000, "ref").unwrap();
        let out = discipline(&reference, &node("mll", NoiseSpec::empty(), 0.0), 1).unwrap();
        assert!(out.samples().iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn slow_reference_modulation_is_tracked() {
        // 100 Hz tone, 10 kHz loop: amplitude ratio >= 0.99
        let tau0 = 1e-6;
        let n = 200_000;
        let reference = PhaseSeries::new(
            tau0,
            (0..n)
                .map(|i| 5.0 * (std::f64::consts::TAU * 100.0 * i as f64 * tau0).sin())
                .collect::<Vec<_>>(),
            "ref",
        )
        .unwrap();
        let out = discipline(&reference, &node("mll", NoiseSpec::empty(), 0.0), 1).unwrap();
        let amp = out.samples()[n / 2..]
            .iter()
            .cloned()
            .fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(amp / 5.0 >= 0.99, "ratio {}", amp / 5.0);
    }

    #[test]
    fn dc_component_is_preserved() {
        let reference = PhaseSeries::new(1e-7, vec![3.25; 50_000], "ref").unwrap();
        let out = discipline(&reference, &node("mll", NoiseSpec::empty(), 0.0), 1).unwrap();
        let mean = out.samples().iter().sum::<f64>() / out.len() as f64;
        assert!((mean - 3.25).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn loop_response_crossover_and_asymptotes() {
        let pll = PLLConfig::default();
        let bw = pll.loop_bandwidth_hz;
        let (lp, _) = loop_response(&pll, bw).unwrap();
        assert!((0.4..=0.9).contains(&lp), "|LP(bw)| = {lp}");
        let (lp, _) = loop_response(&pll, bw / 1000.0).unwrap();
        assert!(lp >= 0.999);
        let (_, hp) = loop_response(&pll, bw * 1000.0).unwrap();
        assert!(hp >= 0.999);
        assert!(loop_response(&pll, 0.0).is_err());
    }

    #[test]
    fn fast_reference_noise_is_rejected_at_laser_output() {
        // band-limited reference noise near 100 kHz, 10 kHz loop: TDEV at
        // microsecond-scale tau is strongly reduced at the laser output
        let tau0 = 1e-7;
        let n = 500_000;
        let bump = BumpTerm {
            center_frequency_hz: 100_000.0,
            relative_bandwidth: 0.4,
            rms_ps: 5.0,
        };
        let reference = crate::noisegen::gen_bump(&bump, n, tau0, 77).unwrap();
        let out = discipline(&reference, &node("mll", NoiseSpec::empty(), 0.0), 2).unwrap();
        let factors = [30usize];
        let t_ref = tdev(&reference, &factors).unwrap().points[0].value;
        let t_out = tdev(&out, &factors).unwrap().points[0].value;
        assert!(
            t_out * 2.0 <= t_ref,
            "tau 3e-6: ref {t_ref} ps vs laser {t_out} ps"
        );
    }

    #[test]
    fn high_frequency_attenuation_is_monotone() {
        let pll = PLLConfig::default();
        let mut prev = f64::INFINITY;
        for f in [1e4, 3e4, 1e5, 3e5, 1e6] {
            let (lp, _) = loop_response(&pll, f).unwrap();
            assert!(lp < prev, "|LP({f})| = {lp} not decreasing");
            prev = lp;
        }
    }

    #[test]
    fn noisier_cavity_raises_own_tdev_only() {
        let tau0 = 1e-6;
        let n = 400_000;
        let reference = PhaseSeries::zeros(tau0, n, "ref").unwrap();
        let quiet_cavity = NoiseSpec {
            bumps: vec![BumpTerm {
                center_frequency_hz: 1000.0,
                relative_bandwidth: 0.5,
                rms_ps: 5.0,
            }],
            ..Default::default()
        };
        let mut loud_cavity = quiet_cavity.clone();
        loud_cavity.bumps[0].rms_ps = 50.0;

        let partner = discipline(&reference, &node("mll1", quiet_cavity.clone(), 0.0), 10).unwrap();
        let quiet = discipline(&reference, &node("mll2", quiet_cavity, 0.0), 20).unwrap();
        let loud = discipline(&reference, &node("mll2", loud_cavity, 0.0), 20).unwrap();

        let factors: Vec<usize> = default_factors(n)
            .into_iter()
            .filter(|&m| (1e-4..=1e-2).contains(&(m as f64 * tau0)))
            .collect();
        let peak = |s: &PhaseSeries| {
            tdev(s, &factors)
                .unwrap()
                .points
                .iter()
                .map(|p| p.value)
                .fold(0.0f64, f64::max)
        };
        assert!(peak(&loud) > 5.0 * peak(&quiet), "cavity noise not raising TDEV");
        // partner statistics depend only on its own seed and noise
        let partner_again =
            discipline(&reference, &node("mll1", NoiseSpec::empty(), 0.0), 10).unwrap();
        let _ = partner_again;
        assert_eq!(
            partner.samples(),
            discipline(
                &reference,
                &node(
                    "mll1",
                    NoiseSpec {
                        bumps: vec![BumpTerm {
                            center_frequency_hz: 1000.0,
                            relative_bandwidth: 0.5,
                            rms_ps: 5.0,
                        }],
                        ..Default::default()
                    },
                    0.0
                ),
                10
            )
            .unwrap()
            .samples()
        );
    }

    #[test]
    fn deterministic_given_seed() {
        let reference = crate::noisegen::gen_power_law(
            &PowerLawTerm::white(1.0),
            10_000,
            1e-7,
            3,
        )
        .unwrap();
        let n = node("mll", NoiseSpec::white(0.5), 0.1);
        let a = discipline(&reference, &n, 42).unwrap();
        let b = discipline(&reference, &n, 42).unwrap();
        assert_eq!(a.samples(), b.samples());
    }

    #[test]
    fn grid_must_align_with_reference_rate() {
        let reference = PhaseSeries::zeros(1.5e-7, 100, "ref").unwrap();
        let err = discipline(&reference, &node("mll", NoiseSpec::empty(), 0.0), 0).unwrap_err();
        assert!(err.to_string().contains("reference grid"), "{err}");
    }
}
