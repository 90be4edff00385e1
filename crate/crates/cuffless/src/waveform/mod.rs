//! Filtering and beat-by-beat fiducial detection.

mod fiducial;
mod filter;
mod rpeak;

pub use fiducial::{detect_beat_fiducials, FiducialDetection, TAIL_GUARD_S};
pub use filter::{
    butterworth_lowpass_sos, derive, filtfilt, lowpass_filter, min_input_len, Biquad,
    DerivativeOrder, FILTER_ORDER,
};
pub use rpeak::detect_r_peaks;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::ingest::SignalRecord;

/// Default ECG low-pass cutoff (Hz).
pub const ECG_CUTOFF_HZ: f64 = 40.0;
/// Default PPG low-pass cutoff (Hz).
pub const PPG_CUTOFF_HZ: f64 = 20.0;

/// Filtered signals plus PPG derivatives, all sampled on the same grid.
#[derive(Debug, Clone)]
pub struct FilteredBundle {
    pub ecg_f: Vec<f64>,
    pub ppg_f: Vec<f64>,
    /// First derivative of the filtered PPG (per second).
    pub vppg: Vec<f64>,
    /// Second derivative of the filtered PPG (per second squared).
    pub appg: Vec<f64>,
    pub sampling_rate_hz: f64,
}

impl FilteredBundle {
    /// Filter a record and derive VPPG/APPG from the filtered PPG.
    pub fn from_record(record: &SignalRecord, ecg_cutoff_hz: f64, ppg_cutoff_hz: f64) -> Result<Self> {
        let fs = record.sampling_rate_hz;
        let ecg_f = lowpass_filter(&record.ecg, fs, ecg_cutoff_hz)?;
        let ppg_f = lowpass_filter(&record.ppg, fs, ppg_cutoff_hz)?;
        let vppg = derive(&ppg_f, fs, DerivativeOrder::First)?;
        let appg = derive(&ppg_f, fs, DerivativeOrder::Second)?;
        Ok(Self {
            ecg_f,
            ppg_f,
            vppg,
            appg,
            sampling_rate_hz: fs,
        })
    }

    pub fn len(&self) -> usize {
        self.ppg_f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ppg_f.is_empty()
    }
}

/// Landmark sample indices for one beat.
///
/// PPG landmarks: onset `s`, maximum-slope point `m`, systolic peak `p`,
/// descending-limb inflection `n` (the dicrotic-notch marker), end valley
/// `v`. VPPG and APPG carry their own onset/peak/valley triplets inside the
/// same beat window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeatFiducials {
    pub r: usize,
    pub ppg_s: usize,
    pub ppg_m: usize,
    pub ppg_p: usize,
    pub ppg_n: usize,
    pub ppg_v: usize,
    pub vppg_s: usize,
    pub vppg_p: usize,
    pub vppg_v: usize,
    pub appg_s: usize,
    pub appg_p: usize,
    pub appg_v: usize,
}

impl BeatFiducials {
    /// Check the temporal ordering chain and array bounds.
    pub fn validate(&self, signal_len: usize) -> std::result::Result<(), String> {
        let chain = [
            ("r < ppg_s", self.r < self.ppg_s),
            ("ppg_s <= ppg_m", self.ppg_s <= self.ppg_m),
            ("ppg_m < ppg_p", self.ppg_m < self.ppg_p),
            ("ppg_p < ppg_n", self.ppg_p < self.ppg_n),
            ("ppg_n < ppg_v", self.ppg_n < self.ppg_v),
            ("vppg_s < vppg_p", self.vppg_s < self.vppg_p),
            ("vppg_p < vppg_v", self.vppg_p < self.vppg_v),
            ("appg_s < appg_p", self.appg_s < self.appg_p),
            ("appg_p < appg_v", self.appg_p < self.appg_v),
        ];
        for (label, ok) in chain {
            if !ok {
                return Err(format!("ordering violated: {label}"));
            }
        }
        let max_idx = [
            self.r,
            self.ppg_s,
            self.ppg_m,
            self.ppg_p,
            self.ppg_n,
            self.ppg_v,
            self.vppg_s,
            self.vppg_p,
            self.vppg_v,
            self.appg_s,
            self.appg_p,
            self.appg_v,
        ]
        .into_iter()
        .max()
        .unwrap();
        if max_idx >= signal_len {
            return Err(format!("index {max_idx} out of bounds (len {signal_len})"));
        }
        Ok(())
    }
}
