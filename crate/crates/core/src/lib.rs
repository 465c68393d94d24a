//! Simulation and analysis of a fiber-distributed laser timing chain.
//!
//! The library models a clock-distribution network (a grandmaster feeding a
//! chain of disciplined switches over lossy fiber links), mode-locked lasers
//! phase-locked to the distributed 10 MHz references, and the two-channel
//! time-tagger measurement chain used to compare any pair of signals. On the
//! analysis side it provides time-deviation statistics (TDEV/MDEV/ADEV) with
//! noise identification and 1-sigma confidence intervals, and the
//! Hong-Ou-Mandel indistinguishability math that turns timing jitter into an
//! interference-visibility budget.
//!
//! Everything is deterministic given a seed: the same scenario re-run with
//! the same seed produces byte-identical output files.
//!
//! Data flows through two currencies:
//! * [`PhaseSeries`] -- uniformly sampled time error in picoseconds,
//! * [`TimeTagSeries`] -- integer-femtosecond event timestamps per channel.

pub mod detection;
pub mod error;
pub mod hom;
pub mod io;
pub mod laser;
pub mod network;
pub mod noisegen;
pub mod scenario;
pub mod stability;
pub mod timebase;

mod filter;

pub use error::Error;
pub use timebase::{Frequency, PhaseSeries, TimeTagSeries, Timestamp};

/// Crate result alias.
pub type Result<T> = std::result::Result<T, Error>;
