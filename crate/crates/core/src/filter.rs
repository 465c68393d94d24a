//! Discrete-time filters used by the discipline models: a first-order
//! low-pass for switch servos and a second-order type-2 loop low-pass for
//! the laser PLLs. Both are bilinear transforms of the analog prototypes
//! with unity DC gain, primed to steady state at the first input sample so
//! captures carry no start-up transient.

/// First-order low-pass, bilinear transform of `wc/(s + wc)`.
pub(crate) struct OnePoleLowPass {
    b: f64,
    a1: f64,
    prev_x: f64,
    prev_y: f64,
}

impl OnePoleLowPass {
    /// `cutoff_hz` must sit below Nyquist.
    pub fn new(cutoff_hz: f64, tau0_s: f64) -> Self {
        debug_assert!(cutoff_hz > 0.0 && cutoff_hz < 0.5 / tau0_s);
        let k = (std::f64::consts::PI * cutoff_hz * tau0_s).tan();
        OnePoleLowPass {
            b: k / (1.0 + k),
            a1: (k - 1.0) / (1.0 + k),
            prev_x: 0.0,
            prev_y: 0.0,
        }
    }

    /// Set internal state to the steady-state response for constant `x0`.
    pub fn prime(&mut self, x0: f64) {
        self.prev_x = x0;
        self.prev_y = x0;
    }

    #[inline]
    pub fn step(&mut self, x: f64) -> f64 {
        let y = self.b * (x + self.prev_x) - self.a1 * self.prev_y;
        self.prev_x = x;
        self.prev_y = y;
        y
    }

    pub fn run(mut self, input: &[f64]) -> Vec<f64> {
        if let Some(&x0) = input.first() {
            self.prime(x0);
        }
        input.iter().map(|&x| self.step(x)).collect()
    }
}

/// Second-order type-2 PLL closed-loop low-pass,
/// `H(s) = (2 zeta wn s + wn^2) / (s^2 + 2 zeta wn s + wn^2)`,
/// discretized by the bilinear transform with prewarping at `wn`.
/// The complementary high-pass is formed exactly as `x - LP(x)`.
pub(crate) struct PllLowPass {
    b0: f64,
    b1: f64,
    b2: f64,
    a1: f64,
    a2: f64,
    s1: f64,
    s2: f64,
}

impl PllLowPass {
    pub fn new(natural_hz: f64, damping: f64, tau0_s: f64) -> Self {
        debug_assert!(natural_hz > 0.0 && natural_hz < 0.5 / tau0_s);
        debug_assert!(damping > 0.0);
        let c = (std::f64::consts::PI * natural_hz * tau0_s).tan();
        let zc = 2.0 * damping * c;
        let a0 = 1.0 + zc + c * c;
        PllLowPass {
            b0: (c * c + zc) / a0,
            b1: 2.0 * c * c / a0,
            b2: (c * c - zc) / a0,
            a1: 2.0 * (c * c - 1.0) / a0,
            a2: (1.0 - zc + c * c) / a0,
            s1: 0.0,
            s2: 0.0,
        }
    }

    /// Set internal state so a constant `x0` input already produces `x0`.
    pub fn prime(&mut self, x0: f64) {
        // transposed direct form II steady state at unity DC gain
        self.s2 = (self.b2 - self.a2) * x0;
        self.s1 = (self.b1 - self.a1) * x0 + self.s2;
    }

    #[inline]
    pub fn step(&mut self, x: f64) -> f64 {
        let y = self.b0 * x + self.s1;
        self.s1 = self.b1 * x - self.a1 * y + self.s2;
        self.s2 = self.b2 * x - self.a2 * y;
        y
    }

    pub fn run(mut self, input: &[f64]) -> Vec<f64> {
        if let Some(&x0) = input.first() {
            self.prime(x0);
        }
        input.iter().map(|&x| self.step(x)).collect()
    }
}

/// Natural frequency such that the closed-loop low-pass has its -3 dB point
/// at `bandwidth_hz` for the given damping.
pub(crate) fn pll_natural_hz(bandwidth_hz: f64, damping: f64) -> f64 {
    bandwidth_hz / bandwidth_ratio(damping)
}

/// `f_3dB / f_n` for the type-2 closed-loop low-pass.
pub(crate) fn bandwidth_ratio(damping: f64) -> f64 {
    let q = 2.0 + 4.0 * damping * damping;
    ((q + (q * q + 4.0).sqrt()) / 2.0).sqrt()
}

/// Analog prototype magnitudes `(|LP|, |HP|)` at `f_hz`.
pub(crate) fn pll_analog_response(natural_hz: f64, damping: f64, f_hz: f64) -> (f64, f64) {
    let u = (f_hz / natural_hz).powi(2);
    let denom = (1.0 - u).powi(2) + 4.0 * damping * damping * u;
    let lp = ((1.0 + 4.0 * damping * damping * u) / denom).sqrt();
    let hp = (u * u / denom).sqrt();
    (lp, hp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_pole_dc_gain_and_attenuation() {
        let tau0 = 1e-5;
        let n = 200_000;
        // constant passes exactly
        let c = OnePoleLowPass::new(100.0, tau0).run(&vec![3.5; n]);
        assert!(c.iter().all(|&y| (y - 3.5).abs() < 1e-9));
        // a tone a decade above cutoff is attenuated by ~20 dB
        let f = 1000.0;
        let tone: Vec<f64> =
            (0..n).map(|i| (std::f64::consts::TAU * f * i as f64 * tau0).sin()).collect();
        let y = OnePoleLowPass::new(100.0, tau0).run(&tone);
        let amp = y[n / 2..].iter().cloned().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!((0.07..0.13).contains(&amp), "amp {amp}");
    }

    #[test]
    fn pll_lowpass_tracks_dc_exactly() {
        let y = PllLowPass::new(1000.0, 0.7, 1e-6).run(&vec![-2.25; 10_000]);
        assert!(y.iter().all(|&v| (v + 2.25).abs() < 1e-9));
    }

    #[test]
    fn discretized_response_matches_analog_below_nyquist() {
        let tau0 = 1e-6;
        let fn_hz = 4878.0;
        let n = 400_000;
        for f in [500.0, 2000.0, 10_000.0] {
            let tone: Vec<f64> =
                (0..n).map(|i| (std::f64::consts::TAU * f * i as f64 * tau0).sin()).collect();
            let y = PllLowPass::new(fn_hz, 0.7, tau0).run(&tone);
            let amp = y[n / 2..].iter().cloned().fold(0.0f64, |a, v| a.max(v.abs()));
            let (lp, _) = pll_analog_response(fn_hz, 0.7, f);
            assert!((amp - lp).abs() / lp < 0.02, "f={f}: {amp} vs {lp}");
        }
    }

    #[test]
    fn bandwidth_definition_is_minus_3db() {
        let damping = 0.7;
        let bw = 10_000.0;
        let fn_hz = pll_natural_hz(bw, damping);
        let (lp, _) = pll_analog_response(fn_hz, damping, bw);
        assert!((lp - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    }
}
