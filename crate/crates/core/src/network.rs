//! Clock-distribution chain: a grandmaster feeding disciplined switches over
//! lossy fiber links. A hop is modeled by its output noise signature: the
//! downstream node low-passes the upstream clock through its servo and adds
//! an independent realization of its residual discipline noise, with
//! band-limited ("bump") amplitudes inflated when the link margin is thin,
//! plus any uncompensated link delay drift.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::filter::OnePoleLowPass;
use crate::noisegen::{attenuation_bump_scale, derive_seed, gen_drift, DriftTerm, NoiseSpec};
use crate::timebase::PhaseSeries;
use crate::Result;

fn default_launch_margin() -> f64 {
    46.0
}

/// A fiber link and its power budget. `launch_margin_db` is the margin above
/// the receiver's locking threshold at zero length; fiber and component
/// losses eat into it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkSpec {
    pub length_km: f64,
    pub loss_db_per_km: f64,
    #[serde(default)]
    pub extra_loss_db: f64,
    #[serde(default = "default_launch_margin")]
    pub launch_margin_db: f64,
    /// Environmental one-way delay drift of the fiber.
    #[serde(default)]
    pub drift: DriftTerm,
    /// Fraction of the delay drift the two-way transfer fails to cancel.
    /// Zero by default: within a capture the protocol compensates it.
    #[serde(default)]
    pub uncompensated_drift_fraction: f64,
}

impl Default for LinkSpec {
    fn default() -> Self {
        LinkSpec {
            length_km: 0.0,
            loss_db_per_km: 0.0,
            extra_loss_db: 0.0,
            launch_margin_db: default_launch_margin(),
            drift: DriftTerm::default(),
            uncompensated_drift_fraction: 0.0,
        }
    }
}

impl LinkSpec {
    pub fn validate(&self) -> Result<()> {
        for (what, v) in [
            ("link length", self.length_km),
            ("fiber loss", self.loss_db_per_km),
            ("extra loss", self.extra_loss_db),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidValue {
                    what,
                    detail: format!("{v}"),
                });
            }
        }
        if !self.launch_margin_db.is_finite() {
            return Err(Error::InvalidValue {
                what: "launch margin",
                detail: format!("{} dB", self.launch_margin_db),
            });
        }
        if !(0.0..=1.0).contains(&self.uncompensated_drift_fraction) {
            return Err(Error::InvalidValue {
                what: "uncompensated drift fraction",
                detail: format!("{}", self.uncompensated_drift_fraction),
            });
        }
        self.drift.validate()
    }
}

/// Received-power margin of the link in dB. Negative margins are legal
/// outputs here; the chain simulation rejects them.
pub fn link_margin(link: &LinkSpec) -> f64 {
    link.launch_margin_db - (link.length_km * link.loss_db_per_km + link.extra_loss_db)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeRole {
    Grandmaster,
    Switch,
}

fn default_servo_bandwidth() -> f64 {
    5000.0
}

/// One clock in the chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClockNode {
    pub name: String,
    pub role: NodeRole,
    /// Residual discipline noise added at this node's output (including the
    /// band-limited clock-recovery bumps).
    #[serde(default)]
    pub local_noise: NoiseSpec,
    /// Servo low-pass applied to the upstream clock. Wide enough by default
    /// that recovered-clock noise propagates down the chain, as hop-noise
    /// accumulation measurements require.
    #[serde(default = "default_servo_bandwidth")]
    pub servo_bandwidth_hz: f64,
}

impl ClockNode {
    pub fn grandmaster(name: impl Into<String>, local_noise: NoiseSpec) -> Self {
        ClockNode {
            name: name.into(),
            role: NodeRole::Grandmaster,
            local_noise,
            servo_bandwidth_hz: default_servo_bandwidth(),
        }
    }

    pub fn switch(name: impl Into<String>, local_noise: NoiseSpec) -> Self {
        ClockNode {
            name: name.into(),
            role: NodeRole::Switch,
            local_noise,
            servo_bandwidth_hz: default_servo_bandwidth(),
        }
    }
}

/// An ordered chain grandmaster -> ... -> follower; acyclic by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub nodes: Vec<ClockNode>,
    pub links: Vec<LinkSpec>,
}

impl Topology {
    /// All structural violations, for configuration-time reporting.
    pub fn violations(&self, tau0_s: f64) -> Vec<String> {
        let mut v = Vec::new();
        if self.nodes.len() < 2 {
            v.push("topology needs at least two clock nodes".into());
        }
        if self.links.len() + 1 != self.nodes.len() && !self.nodes.is_empty() {
            v.push(format!(
                "chain of {} nodes needs {} links, got {}",
                self.nodes.len(),
                self.nodes.len().saturating_sub(1),
                self.links.len()
            ));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            let is_first = i == 0;
            match node.role {
                NodeRole::Grandmaster if !is_first => {
                    v.push(format!("node '{}': grandmaster must head the chain", node.name))
                }
                NodeRole::Switch if is_first => {
                    v.push(format!("node '{}': chain must start at a grandmaster", node.name))
                }
                _ => {}
            }
            if node.role == NodeRole::Switch {
                if !(node.servo_bandwidth_hz > 0.0) {
                    v.push(format!(
                        "node '{}': servo bandwidth must be positive",
                        node.name
                    ));
                } else if node.servo_bandwidth_hz >= 0.5 / tau0_s {
                    v.push(format!(
                        "node '{}': servo bandwidth {} Hz at or above Nyquist {} Hz",
                        node.name,
                        node.servo_bandwidth_hz,
                        0.5 / tau0_s
                    ));
                }
            }
            if let Err(e) = node.local_noise.validate() {
                v.push(format!("node '{}': {e}", node.name));
            }
            if let Some(f) = node.local_noise.max_bump_frequency_hz() {
                if f >= 0.5 / tau0_s {
                    v.push(format!(
                        "node '{}': bump at {f} Hz unresolvable at tau0 {tau0_s} s",
                        node.name
                    ));
                }
            }
        }
        for (i, link) in self.links.iter().enumerate() {
            if let Err(e) = link.validate() {
                v.push(format!("link {i}: {e}"));
            }
        }
        let mut names: Vec<&str> = self.nodes.iter().map(|n| n.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != self.nodes.len() {
            v.push("duplicate node names".into());
        }
        v
    }

    pub fn node_names(&self) -> Vec<&str> {
        self.nodes.iter().map(|n| n.name.as_str()).collect()
    }
}

/// Per-node clock-error series against ideal time, keyed by node name,
/// plus the chain order.
#[derive(Debug)]
pub struct ChainOutput {
    pub series: BTreeMap<String, PhaseSeries>,
    pub order: Vec<String>,
}

impl ChainOutput {
    pub fn get(&self, name: &str) -> Option<&PhaseSeries> {
        self.series.get(name)
    }
}

/// Simulate the chain on a uniform grid of `n` samples at `tau0_s`.
///
/// The grandmaster's series is a realization of its own residual noise;
/// each downstream node low-passes its upstream clock at the servo
/// bandwidth and adds an independent local-noise realization whose bump
/// amplitudes are scaled by the link-margin law, plus the link's
/// uncompensated drift. Deterministic given the seed.
pub fn simulate_chain(
    topology: &Topology,
    n: usize,
    tau0_s: f64,
    seed: u64,
) -> Result<ChainOutput> {
    let violations = topology.violations(tau0_s);
    if !violations.is_empty() {
        return Err(Error::InvalidConfig(violations));
    }
    if n < 2 {
        return Err(Error::SeriesTooShort { n, min: 2 });
    }
    let mut series = BTreeMap::new();
    let mut order = Vec::new();
    let mut upstream: Option<Vec<f64>> = None;
    for (k, node) in topology.nodes.iter().enumerate() {
        let local = node.local_noise.generate_scaled(
            n,
            tau0_s,
            derive_seed(seed, 2 * k as u64),
            match k {
                0 => 1.0,
                _ => {
                    let link = &topology.links[k - 1];
                    let margin = link_margin(link);
                    attenuation_bump_scale(margin).map_err(|_| Error::LinkBelowThreshold {
                        context: format!(
                            "link {} ({} -> {})",
                            k - 1,
                            topology.nodes[k - 1].name,
                            node.name
                        ),
                        margin_db: margin,
                    })?
                }
            },
            &node.name,
        )?;
        let mut out = local.into_samples();
        if let Some(up) = &upstream {
            let filtered = OnePoleLowPass::new(node.servo_bandwidth_hz, tau0_s).run(up);
            for (o, f) in out.iter_mut().zip(&filtered) {
                *o += f;
            }
            let link = &topology.links[k - 1];
            if link.uncompensated_drift_fraction > 0.0 && !link.drift.is_zero() {
                let drift = gen_drift(
                    &link.drift,
                    n,
                    tau0_s,
                    derive_seed(seed, 2 * k as u64 - 1),
                )?;
                let f = link.uncompensated_drift_fraction;
                for (o, d) in out.iter_mut().zip(drift.samples()) {
                    *o += f * d;
                }
            }
        }
        let s = PhaseSeries::new(tau0_s, out, node.name.clone())?;
        upstream = Some(s.samples().to_vec());
        series.insert(node.name.clone(), s);
        order.push(node.name.clone());
    }
    Ok(ChainOutput { series, order })
}

/// Elementwise clock error between two nodes: `A - B`.
pub fn pairwise_error(a: &PhaseSeries, b: &PhaseSeries) -> Result<PhaseSeries> {
    if a.len() != b.len() {
        return Err(Error::MismatchedSeries(format!(
            "lengths {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let rel = (a.tau0_s() - b.tau0_s()).abs() / a.tau0_s();
    if rel > 1e-12 {
        return Err(Error::MismatchedSeries(format!(
            "tau0 {} s vs {} s",
            a.tau0_s(),
            b.tau0_s()
        )));
    }
    PhaseSeries::new(
        a.tau0_s(),
        a.samples()
            .iter()
            .zip(b.samples())
            .map(|(x, y)| x - y)
            .collect::<Vec<_>>(),
        format!("{}-vs-{}", a.label(), b.label()),
    )
}
