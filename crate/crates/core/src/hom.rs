//! Temporal indistinguishability of single photons from independently
//! synchronized sources: `I = (1 + dt^2/sigma^2)^(-1/2)` for Gaussian
//! wavepackets of RMS width `sigma` under relative timing jitter `dt`,
//! plus the FWHM<->sigma conversion and sampled overlap curves.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// `FWHM / sigma` for a Gaussian: `2 sqrt(2 ln 2)`.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

/// Gaussian single-photon wavepacket width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WavepacketSpec {
    pub sigma_ps: f64,
}

impl WavepacketSpec {
    pub fn from_sigma(sigma_ps: f64) -> Result<Self> {
        if !(sigma_ps.is_finite() && sigma_ps > 0.0) {
            return Err(Error::InvalidValue {
                what: "wavepacket sigma",
                detail: format!("{sigma_ps} ps"),
            });
        }
        Ok(WavepacketSpec { sigma_ps })
    }

    pub fn from_fwhm(fwhm_ps: f64) -> Result<Self> {
        Ok(WavepacketSpec {
            sigma_ps: sigma_from_fwhm(fwhm_ps)?,
        })
    }

    pub fn fwhm_ps(&self) -> f64 {
        self.sigma_ps * FWHM_PER_SIGMA
    }
}

/// RMS timing jitter between the two sources.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JitterSpec {
    pub delta_t_ps: f64,
}

impl JitterSpec {
    pub fn new(delta_t_ps: f64) -> Result<Self> {
        if !(delta_t_ps.is_finite() && delta_t_ps >= 0.0) {
            return Err(Error::InvalidValue {
                what: "timing jitter",
                detail: format!("{delta_t_ps} ps"),
            });
        }
        Ok(JitterSpec { delta_t_ps })
    }
}

/// Indistinguishability of the two wavepackets: depends on `dt` and `sigma`
/// only through their ratio, equals 1 at zero jitter and falls off as
/// `sigma/dt` for large jitter.
pub fn indistinguishability(j: &JitterSpec, w: &WavepacketSpec) -> Result<f64> {
    if !(w.sigma_ps > 0.0) {
        return Err(Error::InvalidValue {
            what: "wavepacket sigma",
            detail: format!("{} ps", w.sigma_ps),
        });
    }
    let r = j.delta_t_ps / w.sigma_ps;
    Ok(1.0 / (1.0 + r * r).sqrt())
}

/// RMS width from the coherence-time FWHM.
pub fn sigma_from_fwhm(fwhm_ps: f64) -> Result<f64> {
    if !(fwhm_ps.is_finite() && fwhm_ps > 0.0) {
        return Err(Error::InvalidValue {
            what: "wavepacket fwhm",
            detail: format!("{fwhm_ps} ps"),
        });
    }
    Ok(fwhm_ps / FWHM_PER_SIGMA)
}

/// Jitter budget that still achieves a target indistinguishability:
/// inverse of [`indistinguishability`] in `dt`.
pub fn required_jitter(target: f64, w: &WavepacketSpec) -> Result<f64> {
    if !(target > 0.0 && target <= 1.0) {
        return Err(Error::InvalidValue {
            what: "target indistinguishability",
            detail: format!("{target} not in (0, 1]"),
        });
    }
    Ok(w.sigma_ps * (1.0 / (target * target) - 1.0).max(0.0).sqrt())
}

/// One sample of the overlap picture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapSample {
    pub t_ps: f64,
    /// Unit-peak wavepacket envelope centered at zero.
    pub envelope0: f64,
    /// Unit-peak envelope delayed by `dt`.
    pub envelope_dt: f64,
    /// Normalized Gaussian distribution of relative delays (std `dt`);
    /// identically zero in the degenerate `dt = 0` case.
    pub delay_pdf: f64,
}

/// Sampled wavepacket-overlap curves on an ascending time grid.
pub fn overlap_curve(
    j: &JitterSpec,
    w: &WavepacketSpec,
    grid_ps: &[f64],
) -> Result<Vec<OverlapSample>> {
    if grid_ps.is_empty() {
        return Err(Error::EmptySeries);
    }
    if grid_ps.windows(2).any(|g| g[1] <= g[0]) {
        return Err(Error::InvalidValue {
            what: "delay grid",
            detail: "must be strictly ascending".into(),
        });
    }
    let s = w.sigma_ps;
    let dt = j.delta_t_ps;
    let pdf_norm = if dt > 0.0 {
        1.0 / (dt * (2.0 * std::f64::consts::PI).sqrt())
    } else {
        0.0
    };
    Ok(grid_ps
        .iter()
        .map(|&t| OverlapSample {
            t_ps: t,
            envelope0: (-0.5 * (t / s).powi(2)).exp(),
            envelope_dt: (-0.5 * ((t - dt) / s).powi(2)).exp(),
            delay_pdf: if dt > 0.0 {
                pdf_norm * (-0.5 * (t / dt).powi(2)).exp()
            } else {
                0.0
            },
        })
        .collect())
}
