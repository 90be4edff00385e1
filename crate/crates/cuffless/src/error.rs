use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed record in {path} (line {line}): {message}")]
    MalformedRecord {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("record {subject_id}/{visit_day}: {message}")]
    InvalidRecord {
        subject_id: String,
        visit_day: String,
        message: String,
    },

    #[error("invalid synthetic config: {0}")]
    InvalidSyntheticConfig(String),

    #[error("record shorter than {min_s} s ({got_s:.2} s); too short for feature extraction")]
    RecordTooShort { min_s: f64, got_s: f64 },

    #[error("cutoff {cutoff_hz} Hz must lie below the Nyquist frequency {nyquist_hz} Hz")]
    CutoffAboveNyquist { cutoff_hz: f64, nyquist_hz: f64 },

    #[error("input of {got} samples is too short (need at least {need})")]
    InputTooShort { need: usize, got: usize },

    #[error("no R peaks found in ECG signal")]
    NoPeaksFound,

    #[error("need at least {need} R peaks, found {got}")]
    TooFewPeaks { need: usize, got: usize },

    #[error("cannot aggregate an empty beat list")]
    EmptyBeatList,

    #[error("beat rejected: {0}")]
    DegenerateBeat(String),

    #[error("feature grouping is not a partition of 1..=31: {0}")]
    InvalidGrouping(String),

    #[error("feature list is empty")]
    EmptyFeatureList,

    #[error("non-finite value at position {0} in feature list")]
    NonFiniteFeature(usize),

    #[error("user profile required for the knowledge+user context level")]
    MissingProfile,

    #[error("invalid user profile: {0}")]
    InvalidProfile(String),

    #[error("cannot parse MAP/PP estimate from response: {raw:?}")]
    ResponseParse { raw: String },

    #[error("invalid BP reading: sbp {sbp} must exceed dbp {dbp} and both must be positive")]
    InvalidReading { sbp: f64, dbp: f64 },

    #[error("invalid MAP/PP pair (map {map}, pp {pp}): {message}")]
    InvalidMapPp { map: f64, pp: f64, message: String },

    #[error("alpha {0} outside [0, 1]")]
    AlphaOutOfRange(f64),

    #[error("no readings to average")]
    EmptyReadings,

    #[error("need at least {need} training rows, got {got}")]
    TooFewRows { need: usize, got: usize },

    #[error("all feature columns are constant; nothing to learn")]
    ConstantFeatures,

    #[error("model expects feature schema {expected}, got {got}")]
    SchemaMismatch { expected: String, got: String },

    #[error("unsupported model file (version {0})")]
    UnsupportedModelVersion(u32),

    #[error("endpoint transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },

    #[error("endpoint returned HTTP {status}: {message}")]
    EndpointStatus { status: u16, message: String },

    #[error("endpoint reply had no choices")]
    EmptyCompletion,

    #[error("metric input length mismatch: {refs} references vs {ests} estimates")]
    MetricLengthMismatch { refs: usize, ests: usize },

    #[error("metrics need at least 2 samples, got {0}")]
    TooFewSamples(usize),

    #[error("cannot split {subjects} subject(s) into {k} fold(s)")]
    BadFoldCount { subjects: usize, k: usize },

    #[error("training fraction {fraction} leaves {rows} rows (< {min_rows})")]
    TrainingTooSmall {
        fraction: f64,
        rows: usize,
        min_rows: usize,
    },

    #[error("serialization failed: {0}")]
    Serde(#[from] serde_json::Error),

    #[error("csv error in {path}: {message}")]
    Csv { path: PathBuf, message: String },
}
