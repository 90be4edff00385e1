//! Adaptive-threshold R-peak detection on the squared ECG derivative.
//!
//! The stages follow the Pan-Tompkins recipe: slope, squaring, moving-window
//! integration, then dual running signal/noise level estimates with a 250 ms
//! refractory period. Every decision scales linearly with the input
//! amplitude, so detected indices are invariant to positive rescaling.

use crate::error::{Error, Result};

const REFRACTORY_S: f64 = 0.250;
const INTEGRATION_WINDOW_S: f64 = 0.150;
const SNAP_WINDOW_S: f64 = 0.050;
/// Minimum input length: two beats at 30 bpm.
const MIN_DURATION_S: f64 = 4.0;

/// Detect R peaks in a filtered ECG. Returns strictly increasing sample
/// indices, each a local maximum of `ecg_f` within +-50 ms, at least 250 ms
/// apart.
pub fn detect_r_peaks(ecg_f: &[f64], fs: f64) -> Result<Vec<usize>> {
    let n = ecg_f.len();
    let min_len = (MIN_DURATION_S * fs).round() as usize;
    if n < min_len {
        return Err(Error::InputTooShort {
            need: min_len,
            got: n,
        });
    }

    // Squared central-difference slope.
    let mut energy = vec![0.0; n];
    for i in 1..n - 1 {
        let d = ecg_f[i + 1] - ecg_f[i - 1];
        energy[i] = d * d;
    }

    // Centered moving-window integration keeps the peak of the integrated
    // trace aligned with the R wave.
    let w = ((INTEGRATION_WINDOW_S * fs).round() as usize).max(1);
    let integ = centered_moving_average(&energy, w);

    // Seed the running levels from the first two seconds.
    let head = ((2.0 * fs) as usize).min(n);
    let head_max = integ[..head].iter().cloned().fold(f64::MIN, f64::max);
    let head_mean = integ[..head].iter().sum::<f64>() / head as f64;
    if head_max <= 0.0 && integ.iter().all(|&v| v <= 0.0) {
        return Err(Error::NoPeaksFound);
    }
    let mut signal_level = 0.5 * head_max;
    let mut noise_level = 0.5 * head_mean;
    let refractory = (REFRACTORY_S * fs).round() as usize;
    let snap = (SNAP_WINDOW_S * fs).round() as usize;

    let mut accepted: Vec<usize> = Vec::new();
    let mut last_accept: Option<usize> = None;
    for i in candidate_peaks(&integ, refractory / 2) {
        let threshold = noise_level + 0.25 * (signal_level - noise_level);
        let in_refractory = last_accept.is_some_and(|p| i - p < refractory);
        if integ[i] > threshold && integ[i] > 0.0 && !in_refractory {
            signal_level = 0.125 * integ[i] + 0.875 * signal_level;
            last_accept = Some(i);
            accepted.push(i);
        } else {
            noise_level = 0.125 * integ[i] + 0.875 * noise_level;
        }
    }

    // Snap each accepted position to the ECG maximum nearby.
    let mut peaks: Vec<usize> = Vec::with_capacity(accepted.len());
    for i in accepted {
        let lo = i.saturating_sub(snap);
        let hi = (i + snap + 1).min(n);
        let r = argmax(&ecg_f[lo..hi]) + lo;
        match peaks.last() {
            Some(&prev) if r <= prev || r - prev < refractory => {}
            _ => peaks.push(r),
        }
    }

    if peaks.is_empty() {
        return Err(Error::NoPeaksFound);
    }
    Ok(peaks)
}

fn centered_moving_average(x: &[f64], w: usize) -> Vec<f64> {
    let n = x.len();
    let half = w / 2;
    let mut prefix = vec![0.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + x[i];
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

/// Local maxima that survive non-maximum suppression over a half-
/// refractory window. The integrated trace of one QRS complex tops out
/// nearly flat and grows shoulder bumps where the averaging window slides
/// off the energy burst; suppression keeps one candidate per complex.
fn candidate_peaks(integ: &[f64], half_window: usize) -> Vec<usize> {
    let n = integ.len();
    local_maxima(integ)
        .into_iter()
        .filter(|&i| {
            let lo = i.saturating_sub(half_window);
            let hi = (i + half_window + 1).min(n);
            let mut best = lo;
            for j in lo + 1..hi {
                if integ[j] > integ[best] {
                    best = j;
                }
            }
            best == i
        })
        .collect()
}

/// Indices of strict local maxima; plateaus yield their first sample.
fn local_maxima(x: &[f64]) -> Vec<usize> {
    let n = x.len();
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if x[i] > x[i - 1] {
            // Walk over a possible plateau.
            let start = i;
            while i + 1 < n && x[i + 1] == x[i] {
                i += 1;
            }
            if i + 1 < n && x[i + 1] < x[i] {
                out.push(start);
            }
        }
        i += 1;
    }
    out
}

fn argmax(x: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in x.iter().enumerate() {
        if *v > x[best] {
            best = i;
        }
    }
    best
}
