//! Beat-by-beat landmark detection on the filtered bundle.
//!
//! Landmark rules, per R-to-R interval:
//!
//! - `s`: minimum of the filtered PPG in `(r, r + RR/2]`
//! - `p`: maximum of the filtered PPG in `(s, next r)`
//! - `m`: maximum of VPPG in `(s, p)` — the steepest ascent
//! - `n`: first prominent local minimum of VPPG in `(p, next s)`, i.e. the
//!   inflection of the descending limb that marks the dicrotic notch
//! - `v`: the `s` of the next beat
//!
//! VPPG and APPG get onset/peak/valley triplets inside the same window:
//! onset at `s`, peak as the waveform maximum in `(s, p)`, valley as the
//! waveform minimum after its peak and before `v`. Beats that violate the
//! ordering chain, have no pulse, or lack a usable notch are dropped and
//! counted; ties pick the earliest index.

use super::{BeatFiducials, FilteredBundle};
use crate::error::{Error, Result};

/// Fraction of the window's deepest VPPG trough a local minimum must reach
/// to count as the notch marker. Filters out noise wiggles near zero.
const NOTCH_PROMINENCE: f64 = 0.5;

/// Guard band at the record tail, in seconds. Zero-phase filtering warps
/// the last few tens of milliseconds, so onsets landing there are not
/// trusted and the trailing partial beat is discarded.
pub const TAIL_GUARD_S: f64 = 0.1;

/// Detection output: retained beats plus the number dropped by the
/// degeneracy checks (the quality screen counts those against the record).
#[derive(Debug, Clone, Default)]
pub struct FiducialDetection {
    pub beats: Vec<BeatFiducials>,
    pub dropped_beats: usize,
}

pub fn detect_beat_fiducials(
    bundle: &FilteredBundle,
    r_peaks: &[usize],
) -> Result<FiducialDetection> {
    if r_peaks.len() < 2 {
        return Err(Error::TooFewPeaks {
            need: 2,
            got: r_peaks.len(),
        });
    }
    let n = bundle.len();
    let nr = r_peaks.len();

    // Pulse onset after each R peak. The last peak reuses the preceding
    // R-R interval as its search span. When the search window is cut short
    // by the record end and the minimum sits on its final sample, the
    // waveform is still falling there — the onset lies beyond the record,
    // so the trailing partial beat is discarded.
    let tail_guard = (TAIL_GUARD_S * bundle.sampling_rate_hz).round() as usize;
    let mut onsets: Vec<Option<usize>> = Vec::with_capacity(nr);
    for j in 0..nr {
        let rr = if j + 1 < nr {
            r_peaks[j + 1] - r_peaks[j]
        } else {
            r_peaks[j] - r_peaks[j - 1]
        };
        let lo = r_peaks[j] + 1;
        let full = r_peaks[j] + rr / 2 + 1;
        let hi = full.min(n);
        let onset = argmin_range(&bundle.ppg_f, lo, hi)
            .filter(|&s| hi == full || s + 1 < hi)
            .filter(|&s| s + tail_guard < n);
        onsets.push(onset);
    }

    let mut out = FiducialDetection::default();
    for k in 0..nr - 1 {
        match detect_one_beat(bundle, r_peaks[k], r_peaks[k + 1], onsets[k], onsets[k + 1]) {
            Some(beat) if beat.validate(n).is_ok() => out.beats.push(beat),
            _ => out.dropped_beats += 1,
        }
    }
    Ok(out)
}

fn detect_one_beat(
    bundle: &FilteredBundle,
    _r: usize,
    next_r: usize,
    onset: Option<usize>,
    next_onset: Option<usize>,
) -> Option<BeatFiducials> {
    let s = onset?;
    let v = next_onset?;
    if v <= s {
        return None;
    }

    let ppg = &bundle.ppg_f;
    let p = argmax_range(ppg, s + 1, next_r)?;
    // No measurable pulse — constant or inverted segment. The relative
    // threshold keeps filter ripple on a flat stretch from counting.
    let scale = ppg[p].abs().max(ppg[s].abs()).max(f64::MIN_POSITIVE);
    if ppg[p] - ppg[s] <= 1e-3 * scale {
        return None;
    }

    let m = argmax_range(&bundle.vppg, s + 1, p)?;
    let notch = first_prominent_minimum(&bundle.vppg, p + 1, v)?;

    let appg_p = argmax_range(&bundle.appg, s + 1, p)?;
    let appg_v = argmin_range(&bundle.appg, appg_p + 1, v)?;

    Some(BeatFiducials {
        r: _r,
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
    })
}

/// Earliest maximum over `[lo, hi)`, `None` when the window is empty.
fn argmax_range(x: &[f64], lo: usize, hi: usize) -> Option<usize> {
    let hi = hi.min(x.len());
    if lo >= hi {
        return None;
    }
    let mut best = lo;
    for i in lo + 1..hi {
        if x[i] > x[best] {
            best = i;
        }
    }
    Some(best)
}

/// Earliest minimum over `[lo, hi)`, `None` when the window is empty.
fn argmin_range(x: &[f64], lo: usize, hi: usize) -> Option<usize> {
    let hi = hi.min(x.len());
    if lo >= hi {
        return None;
    }
    let mut best = lo;
    for i in lo + 1..hi {
        if x[i] < x[best] {
            best = i;
        }
    }
    Some(best)
}

/// First local minimum in `[lo, hi)` that is negative and reaches at least
/// `NOTCH_PROMINENCE` of the window's deepest value.
fn first_prominent_minimum(x: &[f64], lo: usize, hi: usize) -> Option<usize> {
    let hi = hi.min(x.len());
    if lo >= hi {
        return None;
    }
    let deepest = x[lo..hi].iter().cloned().fold(f64::MAX, f64::min);
    if deepest >= 0.0 {
        return None;
    }
    let floor = NOTCH_PROMINENCE * deepest;
    for i in lo.max(1)..hi.min(x.len() - 1) {
        if x[i] < x[i - 1] && x[i] <= x[i + 1] && x[i] < 0.0 && x[i] <= floor {
            return Some(i);
        }
    }
    None
}
