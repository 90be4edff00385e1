//! Synthetic ECG/PPG records with exact landmark ground truth.
//!
//! The ECG is a periodic train of narrow Gaussian spikes; the PPG tiles a
//! four-segment pulse (ascent, descent to the notch, dicrotic rise, final
//! descent) whose onset lags each R spike by the configured transit time.
//! Every segment is a quintic smoothstep, so the waveform is C2-continuous
//! and each landmark sits at a closed-form interior extremum:
//!
//! - `m` (max slope) at the ascent midpoint,
//! - `n` (first VPPG minimum after the peak) at the notch-descent midpoint,
//! - APPG peak/valley at the smoothstep curvature extrema `(3 ± sqrt(3))/6`.
//!
//! Ground truth therefore never depends on the detector being tested.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Gender, SignalRecord, UserProfile, VisitDay};
use crate::error::{Error, Result};
use crate::waveform::BeatFiducials;

/// Pulse baseline amplitude.
const V_BASE: f64 = 0.1;
/// Systolic peak amplitude.
const V_PEAK: f64 = 1.0;
/// Notch-bottom amplitude.
const V_NOTCH: f64 = 0.45;
/// Dicrotic-bump amplitude.
const V_DICROTIC: f64 = 0.58;

/// Segment lengths as fractions of one beat period.
const F_ASCENT: f64 = 0.22;
const F_NOTCH_DESCENT: f64 = 0.14;
const F_DICROTIC_RISE: f64 = 0.12;

/// ECG spike standard deviation in seconds.
const ECG_SIGMA_S: f64 = 0.010;

/// Location of the curvature extrema of the quintic smoothstep.
const CURVATURE_EXTREMUM: f64 = 0.211_324_865_405_187_1; // (3 - sqrt(3)) / 6

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub heart_rate_bpm: f64,
    pub duration_s: f64,
    pub sampling_rate_hz: f64,
    /// Delay from each R spike to the pulse onset.
    pub ptt_ms: f64,
    /// Standard deviation of additive Gaussian noise (amplitude units).
    pub noise_std: f64,
    pub seed: u64,
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidSyntheticConfig(msg));
        if !(30.0..=220.0).contains(&self.heart_rate_bpm) {
            return fail(format!(
                "heart_rate_bpm {} outside [30, 220]",
                self.heart_rate_bpm
            ));
        }
        if !(self.duration_s > 0.0) || !self.duration_s.is_finite() {
            return fail(format!("duration_s {} must be positive", self.duration_s));
        }
        if !(self.sampling_rate_hz > 0.0) || !self.sampling_rate_hz.is_finite() {
            return fail(format!(
                "sampling_rate_hz {} must be positive",
                self.sampling_rate_hz
            ));
        }
        let period_ms = 60_000.0 / self.heart_rate_bpm;
        if !(self.ptt_ms > 0.0) || self.ptt_ms >= period_ms {
            return fail(format!(
                "ptt_ms {} must lie in (0, beat period {period_ms:.1} ms)",
                self.ptt_ms
            ));
        }
        if self.noise_std < 0.0 || !self.noise_std.is_finite() {
            return fail(format!("noise_std {} must be >= 0", self.noise_std));
        }
        let period = (60.0 / self.heart_rate_bpm * self.sampling_rate_hz).round() as usize;
        if period < 50 {
            return fail(format!(
                "beat period of {period} samples is too coarse; raise the sampling rate"
            ));
        }
        Ok(())
    }
}

/// Exact landmark indices for a generated record.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    /// Every R spike center inside the record.
    pub r_peaks: Vec<usize>,
    /// One full fiducial set per complete R-to-R interval.
    pub beats: Vec<BeatFiducials>,
}

/// Quintic smoothstep: zero first and second derivative at both ends.
fn smoothstep(u: f64) -> f64 {
    u * u * u * (10.0 - 15.0 * u + 6.0 * u * u)
}

struct PulseShape {
    period: usize,
    ascent: usize,
    notch_descent: usize,
    dicrotic_rise: usize,
    final_descent: usize,
}

impl PulseShape {
    fn new(period: usize) -> Self {
        let ascent = (F_ASCENT * period as f64).round() as usize;
        let notch_descent = (F_NOTCH_DESCENT * period as f64).round() as usize;
        let dicrotic_rise = (F_DICROTIC_RISE * period as f64).round() as usize;
        let final_descent = period - ascent - notch_descent - dicrotic_rise;
        Self {
            period,
            ascent,
            notch_descent,
            dicrotic_rise,
            final_descent,
        }
    }

    /// Pulse amplitude at `phase` samples past the onset.
    fn value(&self, phase: usize) -> f64 {
        debug_assert!(phase < self.period);
        let (start, len, from, to) = if phase < self.ascent {
            (0, self.ascent, V_BASE, V_PEAK)
        } else if phase < self.ascent + self.notch_descent {
            (self.ascent, self.notch_descent, V_PEAK, V_NOTCH)
        } else if phase < self.ascent + self.notch_descent + self.dicrotic_rise {
            (
                self.ascent + self.notch_descent,
                self.dicrotic_rise,
                V_NOTCH,
                V_DICROTIC,
            )
        } else {
            (
                self.ascent + self.notch_descent + self.dicrotic_rise,
                self.final_descent,
                V_DICROTIC,
                V_BASE,
            )
        };
        let u = (phase - start) as f64 / len as f64;
        from + (to - from) * smoothstep(u)
    }
}

/// Generate one record plus its landmark ground truth.
pub fn synthesize_record(config: &SyntheticConfig) -> Result<(SignalRecord, GroundTruth)> {
    config.validate()?;
    let fs = config.sampling_rate_hz;
    let n = (config.duration_s * fs).round() as usize;
    let period = (60.0 / config.heart_rate_bpm * fs).round() as usize;
    let ptt = (config.ptt_ms / 1000.0 * fs).round() as usize;
    let first_r = period / 2;
    let first_onset = first_r + ptt;
    let shape = PulseShape::new(period);

    // ECG: Gaussian spike at each R center, evaluated by circular phase.
    let sigma_samples = ECG_SIGMA_S * fs;
    let mut ecg: Vec<f64> = Vec::with_capacity(n);
    for i in 0..n {
        let phase = (i as i64 - first_r as i64).rem_euclid(period as i64) as f64;
        let d = phase.min(period as f64 - phase);
        ecg.push((-d * d / (2.0 * sigma_samples * sigma_samples)).exp());
    }

    // PPG: before the first onset, the tail of a virtual preceding pulse.
    let mut ppg: Vec<f64> = Vec::with_capacity(n);
    for i in 0..n {
        let phase = (i as i64 - first_onset as i64).rem_euclid(period as i64) as usize;
        ppg.push(shape.value(phase));
    }

    if config.noise_std > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let normal = Normal::new(0.0, config.noise_std).expect("validated noise_std");
        for v in ecg.iter_mut() {
            *v += normal.sample(&mut rng);
        }
        for v in ppg.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }

    let r_peaks: Vec<usize> = (0..)
        .map(|k| first_r + k * period)
        .take_while(|&r| r < n)
        .collect();

    // A beat is complete only when its end valley clears the tail guard
    // band that downstream filtering cannot be trusted in.
    let tail_guard = (crate::waveform::TAIL_GUARD_S * fs).round() as usize;
    let mut beats = Vec::new();
    for k in 0.. {
        let s = first_onset + k * period;
        let v = s + period;
        if v + tail_guard >= n {
            break;
        }
        let r = first_r + k * period;
        let p = s + shape.ascent;
        let m = s + (shape.ascent + 1) / 2;
        let notch = p + (shape.notch_descent + 1) / 2;
        let appg_p = s + (CURVATURE_EXTREMUM * shape.ascent as f64).round() as usize;
        let appg_v = p + (CURVATURE_EXTREMUM * shape.notch_descent as f64).round() as usize;
        beats.push(BeatFiducials {
            r,
            ppg_s: s,
            ppg_m: m,
            ppg_p: p,
            ppg_n: notch,
            ppg_v: v,
            vppg_s: s,
            vppg_p: m,
            vppg_v: notch,
            appg_s: s,
            appg_p,
            appg_v,
        });
    }

    let ptt_s = config.ptt_ms / 1000.0;
    let record = SignalRecord {
        subject_id: "synth".to_owned(),
        visit_day: VisitDay::D,
        sampling_rate_hz: fs,
        ecg,
        ppg,
        ref_sbp_mmhg: reference_sbp(ptt_s),
        ref_dbp_mmhg: reference_dbp(ptt_s),
    };
    record.validate()?;
    Ok((record, GroundTruth { r_peaks, beats }))
}

/// Reference SBP implied by a transit time (inverse PTT-BP relation).
pub fn reference_sbp(ptt_s: f64) -> f64 {
    160.0 - 160.0 * ptt_s
}

/// Reference DBP implied by a transit time.
pub fn reference_dbp(ptt_s: f64) -> f64 {
    reference_sbp(ptt_s) - (50.0 - 60.0 * ptt_s)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CohortConfig {
    pub subjects: usize,
    pub visits: Vec<VisitDay>,
    pub duration_s: f64,
    pub sampling_rate_hz: f64,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for CohortConfig {
    fn default() -> Self {
        Self {
            subjects: 20,
            visits: vec![VisitDay::D, VisitDay::D7, VisitDay::D14, VisitDay::D21],
            duration_s: 120.0,
            sampling_rate_hz: 1000.0,
            noise_std: 0.005,
            seed: 7,
        }
    }
}

/// Generate a multi-subject cohort: one record per subject and visit, plus
/// a profile per subject. Heart rate and transit time vary per subject and
/// drift across visits, so references move between visits.
pub fn synthesize_cohort(
    config: &CohortConfig,
) -> Result<(Vec<SignalRecord>, BTreeMap<String, UserProfile>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut records = Vec::with_capacity(config.subjects * config.visits.len());
    let mut profiles = BTreeMap::new();

    for s in 0..config.subjects {
        let subject_id = format!("S{:04}", s + 1);
        let heart_rate: f64 = rng.random_range(55.0..95.0);
        let base_ptt: f64 = rng.random_range(0.15..0.26);
        let gender = if rng.random_bool(0.5) {
            Gender::Female
        } else {
            Gender::Male
        };
        profiles.insert(
            subject_id.clone(),
            UserProfile {
                age_years: rng.random_range(25..=78) as f64,
                gender,
                height_cm: (rng.random_range(150.0..190.0_f64) * 10.0).round() / 10.0,
                weight_kg: (rng.random_range(48.0..95.0_f64) * 10.0).round() / 10.0,
                hypertension_history: rng.random_bool(0.25),
            },
        );

        for visit in &config.visits {
            let drift: f64 = rng.random_range(-0.02..0.02);
            let ptt_s = (base_ptt + drift).clamp(0.12, 0.30);
            let (record, _) = synthesize_record(&SyntheticConfig {
                heart_rate_bpm: heart_rate,
                duration_s: config.duration_s,
                sampling_rate_hz: config.sampling_rate_hz,
                ptt_ms: ptt_s * 1000.0,
                noise_std: config.noise_std,
                seed: rng.random(),
            })?;
            records.push(SignalRecord {
                subject_id: subject_id.clone(),
                visit_day: *visit,
                ..record
            });
        }
    }
    Ok((records, profiles))
}
