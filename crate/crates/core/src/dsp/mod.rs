//! EMG preprocessing chain: band-pass, power-line notch, rectification,
//! fixed-length windowing, per-window min-max scaling and SNR.

pub mod butter;

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::muscle::{Class, Muscle};
use crate::trace::EmgTrace;
use butter::{Band, Sos};

pub const DEFAULT_WINDOW_MS: f64 = 1000.0;
pub const DEFAULT_STRIDE_MS: f64 = 250.0;

#[derive(Debug, Error, PartialEq)]
pub enum DspError {
    #[error("sampling rate {fs} Hz is below twice the {cutoff} Hz band-pass cutoff")]
    SamplingRateTooLow { fs: f64, cutoff: f64 },
    #[error("invalid filter spec: {0}")]
    InvalidSpec(String),
    #[error("noise amplitude is zero; SNR is undefined")]
    ZeroNoise,
    #[error("empty segment")]
    EmptySegment,
    #[error("window and stride must be positive and span at least one sample")]
    InvalidWindow,
}

/// Cutoffs of the preprocessing filters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub bandpass_lo_hz: f64,
    pub bandpass_hi_hz: f64,
    pub notch_lo_hz: f64,
    pub notch_hi_hz: f64,
    /// Butterworth prototype order of the band-pass stage.
    pub order: usize,
}

impl Default for FilterSpec {
    fn default() -> Self {
        Self {
            bandpass_lo_hz: 10.0,
            bandpass_hi_hz: 250.0,
            notch_lo_hz: 59.0,
            notch_hi_hz: 61.0,
            order: 4,
        }
    }
}

impl FilterSpec {
    pub fn validate(&self) -> Result<(), DspError> {
        if !(self.bandpass_lo_hz > 0.0 && self.bandpass_lo_hz < self.bandpass_hi_hz) {
            return Err(DspError::InvalidSpec("band-pass low cutoff must be in (0, high)".into()));
        }
        if !(self.notch_lo_hz > self.bandpass_lo_hz
            && self.notch_lo_hz < self.notch_hi_hz
            && self.notch_hi_hz < self.bandpass_hi_hz)
        {
            return Err(DspError::InvalidSpec("notch band must lie strictly inside the pass band".into()));
        }
        if self.order == 0 {
            return Err(DspError::InvalidSpec("order must be positive".into()));
        }
        Ok(())
    }

    fn check_rate(&self, fs: f64) -> Result<(), DspError> {
        self.validate()?;
        if fs < 2.0 * self.bandpass_hi_hz {
            return Err(DspError::SamplingRateTooLow {
                fs,
                cutoff: self.bandpass_hi_hz,
            });
        }
        Ok(())
    }

    /// Band-pass sections for `fs`. When the upper cutoff sits at Nyquist
    /// the upper edge vanishes and the stage is a high-pass at the lower
    /// cutoff.
    pub fn bandpass_sos(&self, fs: f64) -> Result<Sos, DspError> {
        self.check_rate(fs)?;
        let nyquist = fs / 2.0;
        let band = if self.bandpass_hi_hz >= 0.99 * nyquist {
            Band::Highpass(self.bandpass_lo_hz)
        } else {
            Band::Bandpass(self.bandpass_lo_hz, self.bandpass_hi_hz)
        };
        Ok(Sos::butterworth(self.order, band, fs))
    }

    /// Second-order band-stop around the power-line frequency.
    pub fn notch_sos(&self, fs: f64) -> Result<Sos, DspError> {
        self.check_rate(fs)?;
        Ok(Sos::butterworth(1, Band::Bandstop(self.notch_lo_hz, self.notch_hi_hz), fs))
    }
}

/// Zero-phase band-pass.
pub fn bandpass(trace: &EmgTrace, spec: &FilterSpec) -> Result<EmgTrace, DspError> {
    let sos = spec.bandpass_sos(trace.fs)?;
    Ok(trace.with_samples(sos.filtfilt(&trace.samples)))
}

/// Zero-phase power-line notch.
pub fn notch(trace: &EmgTrace, spec: &FilterSpec) -> Result<EmgTrace, DspError> {
    let sos = spec.notch_sos(trace.fs)?;
    Ok(trace.with_samples(sos.filtfilt(&trace.samples)))
}

pub fn rectify(trace: &EmgTrace) -> EmgTrace {
    trace.with_samples(trace.samples.iter().map(|x| x.abs()).collect())
}

/// Band-pass, notch and rectify.
pub fn condition(trace: &EmgTrace, spec: &FilterSpec) -> Result<EmgTrace, DspError> {
    let bp = bandpass(trace, spec)?;
    let nt = notch(&bp, spec)?;
    Ok(rectify(&nt))
}

/// One fixed-length analysis window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Epoch {
    pub muscle: Muscle,
    pub values: Vec<f64>,
    pub label: Option<Class>,
    /// Time of the window's first sample, ms.
    pub source_t0: f64,
}

/// Window geometry in samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowPlan {
    pub len: usize,
    pub stride: usize,
}

impl WindowPlan {
    pub fn new(fs: f64, window_ms: f64, stride_ms: f64) -> Result<Self, DspError> {
        let len = (window_ms * fs / 1000.0).round();
        let stride = (stride_ms * fs / 1000.0).round();
        if !(window_ms > 0.0 && stride_ms > 0.0 && len >= 1.0 && stride >= 1.0) {
            return Err(DspError::InvalidWindow);
        }
        Ok(Self {
            len: len as usize,
            stride: stride as usize,
        })
    }

    /// Number of complete windows in `n` samples.
    pub fn count(&self, n: usize) -> usize {
        if n < self.len {
            0
        } else {
            (n - self.len) / self.stride + 1
        }
    }

    pub fn starts(&self, n: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.count(n)).map(move |k| k * self.stride)
    }
}

/// Slices the trace into scaled epochs starting at 0, stride, 2·stride, …;
/// a trailing partial window is dropped.
pub fn window(trace: &EmgTrace, window_ms: f64, stride_ms: f64) -> Result<Vec<Epoch>, DspError> {
    let plan = WindowPlan::new(trace.fs, window_ms, stride_ms)?;
    Ok(plan
        .starts(trace.len())
        .map(|s| Epoch {
            muscle: trace.muscle,
            values: scale(&trace.samples[s..s + plan.len]),
            label: None,
            source_t0: trace.time_ms(s),
        })
        .collect())
}

/// Per-epoch min-max scaling into [0, 1]; a constant epoch maps to zeros.
pub fn scale(values: &[f64]) -> Vec<f64> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = hi - lo;
    if !(span > 0.0) {
        return vec![0.0; values.len()];
    }
    values
        .iter()
        .map(|v| ((v - lo) / span).clamp(0.0, 1.0))
        .collect()
}

/// Peak rectified amplitude.
pub fn peak_amplitude(segment: &[f64]) -> f64 {
    segment.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// 20·log10(A_signal / A_noise) with A the peak rectified amplitude.
pub fn snr_db(signal: &[f64], noise: &[f64]) -> Result<f64, DspError> {
    if signal.is_empty() || noise.is_empty() {
        return Err(DspError::EmptySegment);
    }
    let a_noise = peak_amplitude(noise);
    if a_noise == 0.0 {
        return Err(DspError::ZeroNoise);
    }
    Ok(20.0 * (peak_amplitude(signal) / a_noise).log10())
}

/// Full chain from raw trace to scaled epochs.
pub fn preprocess(
    trace: &EmgTrace,
    spec: &FilterSpec,
    window_ms: f64,
    stride_ms: f64,
) -> Result<Vec<Epoch>, DspError> {
    window(&condition(trace, spec)?, window_ms, stride_ms)
}

/// Zero-phase magnitude response in dB of the band-pass and notch chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResponsePoint {
    pub freq_hz: f64,
    pub bandpass_db: f64,
    pub notch_db: f64,
    pub chain_db: f64,
}

pub fn filter_response(spec: &FilterSpec, fs: f64, step_hz: f64) -> Result<Vec<ResponsePoint>, DspError> {
    let bp = spec.bandpass_sos(fs)?;
    let nt = spec.notch_sos(fs)?;
    let zero_phase_db = |sos: &Sos, f: f64| 40.0 * sos.response(f, fs).norm().max(1e-300).log10();
    let n = (fs / 2.0 / step_hz).floor() as usize;
    Ok((0..=n)
        .map(|i| {
            let f = i as f64 * step_hz;
            let b = zero_phase_db(&bp, f);
            let t = zero_phase_db(&nt, f);
            ResponsePoint {
                freq_hz: f,
                bandpass_db: b,
                notch_db: t,
                chain_db: b + t,
            }
        })
        .collect())
}

pub fn write_response_csv<W: Write>(points: &[ResponsePoint], mut out: W) -> std::io::Result<()> {
    writeln!(out, "freq_hz,bandpass_db,notch_db,chain_db")?;
    for p in points {
        writeln!(out, "{},{},{},{}", p.freq_hz, p.bandpass_db, p.notch_db, p.chain_db)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(samples: Vec<f64>) -> EmgTrace {
        EmgTrace::new(Muscle::Biceps, 500.0, samples, 0.0)
    }

    #[test]
    fn rectify_examples() {
        let t = trace(vec![-1.0, 2.0, -3.0]);
        assert_eq!(rectify(&t).samples, vec![1.0, 2.0, 3.0]);
        let pos = trace(vec![0.0, 1.5, 2.0]);
        assert_eq!(rectify(&pos), pos);
        let r = rectify(&t);
        assert_eq!(rectify(&r), r);
    }

    #[test]
    fn window_counts() {
        let mk = |ms: usize| trace(vec![0.0; ms / 2]);
        assert_eq!(window(&mk(3000), 1000.0, 250.0).unwrap().len(), 9);
        assert_eq!(window(&mk(1000), 1000.0, 250.0).unwrap().len(), 1);
        assert_eq!(window(&trace(vec![0.0; 499]), 1000.0, 250.0).unwrap().len(), 0);
        let e = window(&mk(3000), 1000.0, 250.0).unwrap();
        assert!(e.iter().all(|e| e.values.len() == 500));
        assert_eq!(e[1].source_t0, 250.0);
        assert_eq!(window(&mk(3000), 0.0, 250.0), Err(DspError::InvalidWindow));
    }

    #[test]
    fn scale_examples() {
        assert_eq!(scale(&[0.0, 5.0, 10.0]), vec![0.0, 0.5, 1.0]);
        assert_eq!(scale(&[7.0, 7.0, 7.0]), vec![0.0, 0.0, 0.0]);
        assert!(scale(&[]).is_empty());
    }

    #[test]
    fn snr_examples() {
        let noise = [0.1, -0.2, 0.15];
        let s10: Vec<f64> = noise.iter().map(|v| v * 10.0).collect();
        let s100: Vec<f64> = noise.iter().map(|v| v * 100.0).collect();
        assert!((snr_db(&s10, &noise).unwrap() - 20.0).abs() < 1e-12);
        assert!(snr_db(&noise, &noise).unwrap().abs() < 1e-12);
        assert!((snr_db(&s100, &noise).unwrap() - 40.0).abs() < 1e-12);
        assert_eq!(snr_db(&s10, &[0.0, 0.0]), Err(DspError::ZeroNoise));
        assert_eq!(snr_db(&[], &noise), Err(DspError::EmptySegment));
    }

    #[test]
    fn filters_reject_low_rate() {
        let t = EmgTrace::new(Muscle::Biceps, 400.0, vec![0.0; 100], 0.0);
        assert!(matches!(
            bandpass(&t, &FilterSpec::default()),
            Err(DspError::SamplingRateTooLow { .. })
        ));
        assert!(notch(&t, &FilterSpec::default()).is_err());
    }

    #[test]
    fn zero_in_zero_out() {
        let t = trace(vec![0.0; 500]);
        let spec = FilterSpec::default();
        assert!(bandpass(&t, &spec).unwrap().samples.iter().all(|v| *v == 0.0));
        assert!(notch(&t, &spec).unwrap().samples.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut s = FilterSpec::default();
        s.notch_hi_hz = 300.0;
        assert!(s.validate().is_err());
        let mut s = FilterSpec::default();
        s.bandpass_lo_hz = 300.0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn response_dump_has_notch_dip() {
        let pts = filter_response(&FilterSpec::default(), 500.0, 1.0).unwrap();
        assert_eq!(pts.len(), 251);
        assert!(pts[60].chain_db < -30.0);
        assert!(pts[100].chain_db.abs() < 1.0);
        let mut buf = Vec::new();
        write_response_csv(&pts, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("freq_hz,"));
    }
}
