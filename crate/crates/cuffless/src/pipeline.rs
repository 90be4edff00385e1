//! Record-to-features orchestration: filter, detect, screen, average.
//!
//! Batch entry points fan out across records (rayon under the `parallel`
//! feature, sequential otherwise); per-record work is pure, and outputs are
//! index-aligned with inputs either way.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{
    aggregate_features, compute_beat_features, BeatFeatureVector, FeatureVector, RecordMeta,
};
use crate::ingest::{screen_quality, QualityConfig, QualityReport, SignalRecord, UserProfile};
use crate::parallel;
use crate::waveform::{
    detect_beat_fiducials, detect_r_peaks, FiducialDetection, FilteredBundle, ECG_CUTOFF_HZ,
    PPG_CUTOFF_HZ,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtractOptions {
    pub ecg_cutoff_hz: f64,
    pub ppg_cutoff_hz: f64,
    pub min_duration_s: f64,
    pub quality: QualityConfig,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        Self {
            ecg_cutoff_hz: ECG_CUTOFF_HZ,
            ppg_cutoff_hz: PPG_CUTOFF_HZ,
            min_duration_s: 10.0,
            quality: QualityConfig::default(),
        }
    }
}

/// Outcome of extracting one record.
#[derive(Debug, Clone)]
pub enum RecordOutcome {
    Features(Box<FeatureVector>),
    Rejected {
        report: QualityReport,
        dropped_beats: usize,
    },
}

/// Run the full per-record pipeline. Detection failures (flat ECG, too few
/// peaks) surface as screening rejections; hard errors are reserved for
/// invalid inputs.
pub fn extract_record(
    record: &SignalRecord,
    profile: Option<&UserProfile>,
    opts: &ExtractOptions,
) -> Result<RecordOutcome> {
    record.validate()?;
    if record.duration_s() < opts.min_duration_s {
        return Err(Error::RecordTooShort {
            min_s: opts.min_duration_s,
            got_s: record.duration_s(),
        });
    }

    let bundle = FilteredBundle::from_record(record, opts.ecg_cutoff_hz, opts.ppg_cutoff_hz)?;
    let detection = match detect_r_peaks(&bundle.ecg_f, record.sampling_rate_hz) {
        Ok(peaks) => detect_beat_fiducials(&bundle, &peaks).unwrap_or_default(),
        Err(Error::NoPeaksFound) | Err(Error::TooFewPeaks { .. }) => FiducialDetection::default(),
        Err(e) => return Err(e),
    };

    let report = screen_quality(record, &detection.beats, &opts.quality);
    if !report.accepted {
        return Ok(RecordOutcome::Rejected {
            report,
            dropped_beats: detection.dropped_beats,
        });
    }

    let mut beats: Vec<BeatFeatureVector> = Vec::with_capacity(detection.beats.len());
    let mut degenerate = detection.dropped_beats;
    for beat in &detection.beats {
        match compute_beat_features(&bundle, beat) {
            Ok(bf) => beats.push(bf),
            Err(Error::DegenerateBeat(_)) => degenerate += 1,
            Err(e) => return Err(e),
        }
    }
    if beats.len() < opts.quality.min_beats {
        let report = QualityReport {
            accepted: false,
            reasons: vec![crate::ingest::RejectReason::BeatCountTooLow],
        };
        return Ok(RecordOutcome::Rejected {
            report,
            dropped_beats: degenerate,
        });
    }

    let fv = aggregate_features(
        &beats,
        RecordMeta {
            subject_id: record.subject_id.clone(),
            visit_day: record.visit_day,
            ref_sbp_mmhg: record.ref_sbp_mmhg,
            ref_dbp_mmhg: record.ref_dbp_mmhg,
            user: profile.cloned(),
        },
    )?;
    Ok(RecordOutcome::Features(Box::new(fv)))
}

/// Batch summary: extracted vectors plus per-record rejections/failures.
#[derive(Debug, Default)]
pub struct ExtractSummary {
    pub features: Vec<FeatureVector>,
    pub rejected: Vec<(String, String, QualityReport)>,
    pub failed: Vec<(String, String, String)>,
}

fn summarize(records: &[SignalRecord], outcomes: Vec<Result<RecordOutcome>>) -> ExtractSummary {
    let mut summary = ExtractSummary::default();
    for (record, outcome) in records.iter().zip(outcomes) {
        match outcome {
            Ok(RecordOutcome::Features(fv)) => summary.features.push(*fv),
            Ok(RecordOutcome::Rejected { report, .. }) => summary.rejected.push((
                record.subject_id.clone(),
                record.visit_day.to_string(),
                report,
            )),
            Err(e) => summary.failed.push((
                record.subject_id.clone(),
                record.visit_day.to_string(),
                e.to_string(),
            )),
        }
    }
    summary
}

/// Extract a batch, data-parallel when the `parallel` feature is enabled.
pub fn extract_batch(
    records: &[SignalRecord],
    profiles: &BTreeMap<String, UserProfile>,
    opts: &ExtractOptions,
) -> ExtractSummary {
    let outcomes = parallel::map_slice(records, |record| {
        extract_record(record, profiles.get(&record.subject_id), opts)
    });
    summarize(records, outcomes)
}

/// Sequential reference path for the benchmark comparison.
pub fn extract_batch_sequential(
    records: &[SignalRecord],
    profiles: &BTreeMap<String, UserProfile>,
    opts: &ExtractOptions,
) -> ExtractSummary {
    let outcomes = parallel::map_slice_sequential(records, |record| {
        extract_record(record, profiles.get(&record.subject_id), opts)
    });
    summarize(records, outcomes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{synthesize_cohort, synthesize_record, CohortConfig, SyntheticConfig};

    #[test]
    fn clean_record_extracts_averaged_features() {
        let (record, _) = synthesize_record(&SyntheticConfig {
            heart_rate_bpm: 66.0,
            duration_s: 20.0,
            sampling_rate_hz: 500.0,
            ptt_ms: 180.0,
            noise_std: 0.0,
            seed: 1,
        })
        .unwrap();
        match extract_record(&record, None, &ExtractOptions::default()).unwrap() {
            RecordOutcome::Features(fv) => {
                assert!(fv.beat_count >= 10);
                // PTT feature should sit on the configured transit time.
                assert!((fv.values[0] - 0.180).abs() < 0.01, "ptt {}", fv.values[0]);
                assert!(fv.values.iter().all(|v| v.is_finite()));
            }
            other => panic!("unexpected outcome {other:?}"),
        }
    }

    #[test]
    fn short_record_is_a_hard_error() {
        let (record, _) = synthesize_record(&SyntheticConfig {
            heart_rate_bpm: 66.0,
            duration_s: 6.0,
            sampling_rate_hz: 500.0,
            ptt_ms: 180.0,
            noise_std: 0.0,
            seed: 1,
        })
        .unwrap();
        assert!(matches!(
            extract_record(&record, None, &ExtractOptions::default()),
            Err(Error::RecordTooShort { .. })
        ));
    }

    #[test]
    fn flat_record_is_rejected_not_fatal() {
        let (mut record, _) = synthesize_record(&SyntheticConfig {
            heart_rate_bpm: 66.0,
            duration_s: 12.0,
            sampling_rate_hz: 500.0,
            ptt_ms: 180.0,
            noise_std: 0.0,
            seed: 1,
        })
        .unwrap();
        record.ecg = vec![0.0; record.ecg.len()];
        record.ppg = vec![0.0; record.ppg.len()];
        match extract_record(&record, None, &ExtractOptions::default()).unwrap() {
            RecordOutcome::Rejected { report, .. } => {
                assert!(!report.accepted);
                assert!(!report.reasons.is_empty());
            }
            other => panic!("unexpected outcome {other:?}"),
        }
    }

    #[test]
    fn batch_and_sequential_agree() {
        let (records, profiles) = synthesize_cohort(&CohortConfig {
            subjects: 3,
            duration_s: 15.0,
            sampling_rate_hz: 250.0,
            noise_std: 0.01,
            seed: 11,
            ..CohortConfig::default()
        })
        .unwrap();
        let opts = ExtractOptions::default();
        let a = extract_batch(&records, &profiles, &opts);
        let b = extract_batch_sequential(&records, &profiles, &opts);
        assert_eq!(a.features, b.features);
        assert_eq!(a.rejected.len(), b.rejected.len());
        assert_eq!(a.failed.len(), b.failed.len());
        assert_eq!(a.features.len() + a.rejected.len() + a.failed.len(), records.len());
        // Profiles are attached by subject.
        assert!(a.features.iter().all(|fv| fv.user.is_some()));
    }
}
