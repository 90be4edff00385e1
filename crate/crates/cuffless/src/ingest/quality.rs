//! Quality screening: reject degenerate measurements before feature
//! extraction. Screening never fails — it reports.

use serde::{Deserialize, Serialize};

use super::SignalRecord;
use crate::waveform::BeatFiducials;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    Flatline,
    Clipping,
    BeatCountTooLow,
    FiducialOrderViolation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QualityReport {
    pub accepted: bool,
    pub reasons: Vec<RejectReason>,
}

/// Screening thresholds. Defaults are permissive on clean signals and only
/// reject degenerate inputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QualityConfig {
    /// Minimum retained beats per record.
    pub min_beats: usize,
    /// Longest tolerated constant stretch in seconds.
    pub max_flatline_s: f64,
    /// Maximum fraction of samples pinned at the signal extremes.
    pub max_clipped_fraction: f64,
    /// Absolute sample-to-sample difference treated as "no change".
    pub flatline_epsilon: f64,
}

impl Default for QualityConfig {
    fn default() -> Self {
        Self {
            min_beats: 10,
            max_flatline_s: 2.0,
            max_clipped_fraction: 0.01,
            flatline_epsilon: 1e-9,
        }
    }
}

/// Screen one record given the beats detected from it.
pub fn screen_quality(
    record: &SignalRecord,
    fiducials: &[BeatFiducials],
    config: &QualityConfig,
) -> QualityReport {
    let mut reasons = Vec::new();
    let fs = record.sampling_rate_hz;

    if fiducials.len() < config.min_beats {
        reasons.push(RejectReason::BeatCountTooLow);
    }

    let flatline_limit = (config.max_flatline_s * fs) as usize;
    if longest_flat_run(&record.ecg, config.flatline_epsilon) > flatline_limit
        || longest_flat_run(&record.ppg, config.flatline_epsilon) > flatline_limit
    {
        reasons.push(RejectReason::Flatline);
    }

    if clipped_fraction(&record.ecg) > config.max_clipped_fraction
        || clipped_fraction(&record.ppg) > config.max_clipped_fraction
    {
        reasons.push(RejectReason::Clipping);
    }

    let len = record.ecg.len();
    if fiducials.iter().any(|b| b.validate(len).is_err()) {
        reasons.push(RejectReason::FiducialOrderViolation);
    }

    QualityReport {
        accepted: reasons.is_empty(),
        reasons,
    }
}

/// Length in samples of the longest run with near-zero first difference.
fn longest_flat_run(x: &[f64], epsilon: f64) -> usize {
    let mut longest = 0usize;
    let mut run = 1usize;
    for pair in x.windows(2) {
        if (pair[1] - pair[0]).abs() <= epsilon {
            run += 1;
        } else {
            longest = longest.max(run);
            run = 1;
        }
    }
    longest.max(run)
}

/// Fraction of samples sitting in pinned runs at the signal extremes.
/// Digitally clipped segments repeat the rail value exactly, so only runs
/// of `MIN_CLIP_RUN` or more count. A rail holding a large share of all
/// samples is a resting baseline (an ECG sits at its minimum between
/// beats), not saturation, and is ignored.
fn clipped_fraction(x: &[f64]) -> f64 {
    const MIN_CLIP_RUN: usize = 3;
    const BASELINE_MASS: f64 = 0.25;
    if x.is_empty() {
        return 0.0;
    }
    let (mut lo, mut hi) = (f64::MAX, f64::MIN);
    for &v in x {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if hi <= lo {
        // Constant signal: flatline screening handles it.
        return 0.0;
    }
    let tol = 1e-9 * (hi - lo);
    let mut pinned = 0usize;
    for rail in [lo, hi] {
        let at_rail = |v: f64| (v - rail).abs() <= tol;
        let mass = x.iter().filter(|&&v| at_rail(v)).count();
        if mass as f64 / x.len() as f64 > BASELINE_MASS {
            continue;
        }
        let mut run = 0usize;
        for &v in x.iter().chain(std::iter::once(&f64::NAN)) {
            if at_rail(v) {
                run += 1;
            } else {
                if run >= MIN_CLIP_RUN {
                    pinned += run;
                }
                run = 0;
            }
        }
    }
    pinned as f64 / x.len() as f64
}
