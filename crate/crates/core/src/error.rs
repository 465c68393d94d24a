//! Error type shared by all modules.

use thiserror::Error;

/// Errors produced by simulation, detection and analysis operations.
#[derive(Debug, Error)]
pub enum Error {
    /// A tag stream or sample sequence was empty where data is required.
    #[error("empty series")]
    EmptySeries,

    /// Timestamps were not monotone non-decreasing.
    #[error("unsorted input: tag {index} precedes tag {}", index.saturating_sub(1))]
    UnsortedInput { index: usize },

    /// A value failed a domain invariant (finite, positive, in range...).
    #[error("invalid {what}: {detail}")]
    InvalidValue { what: &'static str, detail: String },

    /// Power-law exponent outside the supported set {0,-1,-2,-3,-4}.
    #[error("unsupported exponent: alpha = {0} (supported: 0..=-4)")]
    UnsupportedExponent(i32),

    /// Band-limited term centered at or above the Nyquist frequency.
    #[error("center frequency {center_hz} Hz not resolvable below Nyquist {nyquist_hz} Hz")]
    AboveNyquist { center_hz: f64, nyquist_hz: f64 },

    /// Optical link margin is negative: the receiver cannot lock.
    #[error("link below sensitivity threshold: {context} (margin {margin_db:.2} dB)")]
    LinkBelowThreshold { context: String, margin_db: f64 },

    /// Two series that must share tau0 and length do not.
    #[error("mismatched series: {0}")]
    MismatchedSeries(String),

    /// Averaging factor outside 1..=N/3.
    #[error("averaging factor m = {m} out of range 1..={max} for {n} samples")]
    FactorOutOfRange { m: usize, max: usize, n: usize },

    /// Nearest-neighbor pairing failed for too many slow-channel tags.
    #[error("channels unpairable: {unpaired} of {total} slow-channel tags had no partner")]
    ChannelsUnpairable { unpaired: usize, total: usize },

    /// Requested tagger channel absent from the capture.
    #[error("channel {0} not found in tag data")]
    ChannelNotFound(u32),

    /// Zero-variance input where a noise statistic is required.
    #[error("degenerate series: zero variance")]
    DegenerateSeries,

    /// Series too short for the requested statistic.
    #[error("series too short: {n} samples, need at least {min}")]
    SeriesTooShort { n: usize, min: usize },

    /// Scenario configuration violations, all of them.
    #[error("invalid configuration:\n{}", .0.iter().map(|v| format!("  - {v}")).collect::<Vec<_>>().join("\n"))]
    InvalidConfig(Vec<String>),

    /// Unknown built-in scenario name.
    #[error("unknown scenario '{name}' (built-ins: {available})")]
    UnknownScenario { name: String, available: String },

    /// Malformed input file with position information.
    #[error("{path}:{line}: {detail}")]
    MalformedFile {
        path: String,
        line: usize,
        detail: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors that indicate bad inputs/configuration rather than a
    /// failure while running. The CLI maps these to exit code 2.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::Io(_) | Error::LinkBelowThreshold { .. } | Error::ChannelsUnpairable { .. }
        )
    }
}
