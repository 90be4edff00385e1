//! Zero-phase low-pass filtering and finite-difference derivatives.
//!
//! The filter is a 4th-order Butterworth low-pass realized as cascaded
//! biquad sections and applied forward-backward, which squares the
//! magnitude response and cancels the phase. Zero phase matters here:
//! every pulse-transit-time feature is a timing difference between two
//! waveforms, so the filter must not shift either of them.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Order of the low-pass prototype. Forward-backward application doubles
/// the effective roll-off.
pub const FILTER_ORDER: usize = 4;

/// One second-order section, denominator normalized (a0 = 1).
#[derive(Debug, Clone, Copy)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    pub fn dc_gain(&self) -> f64 {
        (self.b0 + self.b1 + self.b2) / (1.0 + self.a1 + self.a2)
    }

    /// Internal DF2T state after an infinitely long constant input `x0`.
    /// Seeding the state this way removes the start-up transient.
    fn settled_state(&self, x0: f64) -> (f64, f64) {
        let y = self.dc_gain() * x0;
        let z2 = self.b2 * x0 - self.a2 * y;
        let z1 = self.b1 * x0 - self.a1 * y + z2;
        (z1, z2)
    }

    fn run_in_place(&self, x: &mut [f64]) {
        let (mut z1, mut z2) = self.settled_state(x[0]);
        for v in x.iter_mut() {
            let xi = *v;
            let y = self.b0 * xi + z1;
            z1 = self.b1 * xi - self.a1 * y + z2;
            z2 = self.b2 * xi - self.a2 * y;
            *v = y;
        }
    }
}

/// Butterworth low-pass of even `order` as second-order sections, designed
/// by bilinear transform with frequency prewarping. Each section has unity
/// DC gain by construction.
pub fn butterworth_lowpass_sos(order: usize, cutoff_hz: f64, fs: f64) -> Vec<Biquad> {
    assert!(order >= 2 && order % 2 == 0, "even filter order required");
    let w = (PI * cutoff_hz / fs).tan();
    (0..order / 2)
        .map(|k| {
            // Pole-pair angle of the analog prototype, measured from the
            // negative real axis.
            let theta = PI * (2.0 * k as f64 + 1.0) / (2.0 * order as f64);
            let c = 2.0 * theta.cos();
            let a0 = 1.0 + c * w + w * w;
            Biquad {
                b0: w * w / a0,
                b1: 2.0 * w * w / a0,
                b2: w * w / a0,
                a1: (2.0 * w * w - 2.0) / a0,
                a2: (1.0 - c * w + w * w) / a0,
            }
        })
        .collect()
}

fn pad_len(n: usize) -> usize {
    (9 * FILTER_ORDER).min(n.saturating_sub(1))
}

/// Minimum input length accepted by [`lowpass_filter`].
pub fn min_input_len() -> usize {
    9 * FILTER_ORDER + 1
}

/// Zero-phase Butterworth low-pass. Output has the same length as the
/// input, unity DC gain, and no group delay.
pub fn lowpass_filter(samples: &[f64], fs: f64, cutoff_hz: f64) -> Result<Vec<f64>> {
    let nyquist = fs / 2.0;
    if !(cutoff_hz > 0.0) || cutoff_hz >= nyquist {
        return Err(Error::CutoffAboveNyquist {
            cutoff_hz,
            nyquist_hz: nyquist,
        });
    }
    if samples.len() < min_input_len() {
        return Err(Error::InputTooShort {
            need: min_input_len(),
            got: samples.len(),
        });
    }
    let sections = butterworth_lowpass_sos(FILTER_ORDER, cutoff_hz, fs);
    Ok(filtfilt(&sections, samples))
}

/// Forward-backward application of a biquad cascade with odd (point-
/// reflected) end extension, so edge transients land in the padding.
pub fn filtfilt(sections: &[Biquad], x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let pad = pad_len(n);
    let mut ext = Vec::with_capacity(n + 2 * pad);
    for i in (1..=pad).rev() {
        ext.push(2.0 * x[0] - x[i]);
    }
    ext.extend_from_slice(x);
    for i in (n - pad - 1..n - 1).rev() {
        ext.push(2.0 * x[n - 1] - x[i]);
    }

    for s in sections {
        s.run_in_place(&mut ext);
    }
    ext.reverse();
    for s in sections {
        s.run_in_place(&mut ext);
    }
    ext.reverse();

    ext[pad..pad + n].to_vec()
}

/// Derivative order for [`derive`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeOrder {
    First,
    Second,
}

/// Central-difference derivative scaled to per-second units. Length is
/// preserved by replicating the first and last interior values.
pub fn derive(samples: &[f64], fs: f64, order: DerivativeOrder) -> Result<Vec<f64>> {
    let n = samples.len();
    if n < 5 {
        return Err(Error::InputTooShort { need: 5, got: n });
    }
    let mut out = vec![0.0; n];
    match order {
        DerivativeOrder::First => {
            let scale = fs / 2.0;
            for i in 1..n - 1 {
                out[i] = (samples[i + 1] - samples[i - 1]) * scale;
            }
        }
        DerivativeOrder::Second => {
            let scale = fs * fs;
            for i in 1..n - 1 {
                out[i] = (samples[i + 1] - 2.0 * samples[i] + samples[i - 1]) * scale;
            }
        }
    }
    out[0] = out[1];
    out[n - 1] = out[n - 2];
    Ok(out)
}
