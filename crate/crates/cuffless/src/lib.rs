//! Cuffless blood pressure estimation from synchronized ECG/PPG recordings.
//!
//! The crate implements the full desk-side pipeline:
//!
//! 1. [`ingest`] — load measurement records (NDJSON or a CSV directory tree),
//!    synthesize ground-truth-bearing test records, screen signal quality.
//! 2. [`waveform`] — zero-phase low-pass filtering, PPG derivatives, and
//!    beat-by-beat fiducial detection (ECG R; PPG s/m/p/n/v; VPPG and APPG
//!    s/p/v).
//! 3. [`features`] — the 31 per-beat morphology features, beat averaging,
//!    and physiological grouping (arterial stiffness / cardiac output /
//!    peripheral resistance).
//! 4. [`prompting`] — context-enhanced prompt rendering, instruction-tuning
//!    export, and estimate parsing.
//! 5. [`estimation`] — MAP/PP conversions, basal-BP calibration, native
//!    baselines (CART regression tree, AdaBoost.R2), and a chat-completions
//!    client for external inference endpoints.
//! 6. [`evaluation`] — MAE/ME/SDE metrics, subject-level k-fold plans,
//!    experiment runner, alpha and training-size sweeps, Bland-Altman and
//!    correlation exports.
//!
//! Batch stages are data-parallel over records. The `parallel` feature
//! (default) runs them on rayon; without it the same code paths run
//! sequentially.

pub mod error;
pub mod estimation;
pub mod evaluation;
pub mod features;
pub mod ingest;
pub mod pipeline;
pub mod prompting;
pub mod waveform;

pub(crate) mod parallel;

pub use error::{Error, Result};

/// Crate version as embedded in reports and serialized artifacts.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const TOOL_NAME: &str = "cuffless";
