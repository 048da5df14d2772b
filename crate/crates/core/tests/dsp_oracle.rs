use std::f64::consts::PI;

use exo_core::dsp::{self, FilterSpec, WindowPlan};
use exo_core::synth::{synth_trace, ActivationProfile, NoiseConfig};
use exo_core::{EmgTrace, Muscle};
use proptest::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

const FS: f64 = 500.0;

fn sine(f: f64, secs: f64) -> EmgTrace {
    let n = (secs * FS) as usize;
    let s = (0..n).map(|i| (2.0 * PI * f * i as f64 / FS).sin()).collect();
    EmgTrace::new(Muscle::Biceps, FS, s, 0.0)
}

fn spectrum(x: &[f64]) -> Vec<f64> {
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    let n = x.len() as f64;
    buf.iter().map(|c| 2.0 * c.norm() / n).collect()
}

/// Amplitude at `f` over the middle two seconds of a six-second run,
/// away from the edge transients.
fn amplitude_at(samples: &[f64], f: f64) -> f64 {
    let mid = &samples[1000..2000];
    spectrum(mid)[(f * 2.0).round() as usize]
}

fn gain_db(out: &EmgTrace, input: &EmgTrace, f: f64) -> f64 {
    20.0 * (amplitude_at(&out.samples, f) / amplitude_at(&input.samples, f)).log10()
}

#[test]
fn bandpass_passes_100hz() {
    let x = sine(100.0, 6.0);
    let y = dsp::bandpass(&x, &FilterSpec::default()).unwrap();
    assert!(gain_db(&y, &x, 100.0).abs() <= 1.0);
}

#[test]
fn bandpass_rejects_2hz() {
    let x = sine(2.0, 6.0);
    let y = dsp::bandpass(&x, &FilterSpec::default()).unwrap();
    assert!(gain_db(&y, &x, 2.0) <= -20.0);
}

#[test]
fn notch_rejects_60hz() {
    let x = sine(60.0, 6.0);
    let y = dsp::notch(&x, &FilterSpec::default()).unwrap();
    let ratio = amplitude_at(&y.samples, 60.0) / amplitude_at(&x.samples, 60.0);
    assert!(ratio <= 1.0 / 31.6, "residual ratio {ratio}");
}

#[test]
fn notch_passes_100hz() {
    let x = sine(100.0, 6.0);
    let y = dsp::notch(&x, &FilterSpec::default()).unwrap();
    assert!(gain_db(&y, &x, 100.0).abs() <= 1.0);
}

#[test]
fn rest_segment_peaks_at_powerline() {
    let noise = NoiseConfig {
        baseline_sigma_mv: 0.02,
        powerline_amp_mv: 0.05,
        seed: 9,
    };
    let t = synth_trace(&ActivationProfile::rest(), Muscle::Triceps, 2000.0, FS, &noise).unwrap();
    let spec = spectrum(&t.samples);
    let bin_hz = FS / t.len() as f64;
    let (peak, _) = spec[1..spec.len() / 2]
        .iter()
        .enumerate()
        .fold((0, 0.0), |b, (i, &v)| if v > b.1 { (i + 1, v) } else { b });
    assert!((peak as f64 * bin_hz - 60.0).abs() <= bin_hz, "peak at {} Hz", peak as f64 * bin_hz);
}

fn samples(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn filters_are_linear(x in samples(500), y in samples(500), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let spec = FilterSpec::default();
        let tr = |v: Vec<f64>| EmgTrace::new(Muscle::Biceps, FS, v, 0.0);
        let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        for f in [dsp::bandpass, dsp::notch] {
            let fx = f(&tr(x.clone()), &spec).unwrap().samples;
            let fy = f(&tr(y.clone()), &spec).unwrap().samples;
            let fm = f(&tr(mix.clone()), &spec).unwrap().samples;
            for i in 0..500 {
                prop_assert!((fm[i] - (a * fx[i] + b * fy[i])).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn window_count_and_coverage(len_ms in 0usize..12_000) {
        let n = len_ms * FS as usize / 1000;
        let t = EmgTrace::new(Muscle::Biceps, FS, (0..n).map(|i| i as f64).collect(), 0.0);
        let epochs = dsp::window(&t, 1000.0, 250.0).unwrap();
        let expected = if len_ms < 1000 { 0 } else { (len_ms - 1000) / 250 + 1 };
        prop_assert_eq!(epochs.len(), expected);
        let plan = WindowPlan::new(FS, 1000.0, 250.0).unwrap();
        for (k, start) in plan.starts(n).enumerate() {
            prop_assert_eq!(epochs[k].values.len(), 500);
            prop_assert!(epochs[k].values.iter().all(|v| (0.0..=1.0).contains(v)));
            prop_assert_eq!(epochs[k].source_t0, start as f64 * 2.0);
            // Ramp input: sample start + j lands at position j of epoch k.
            for (j, v) in epochs[k].values.iter().enumerate() {
                prop_assert!((v - j as f64 / 499.0).abs() < 1e-12);
            }
        }
    }
}
