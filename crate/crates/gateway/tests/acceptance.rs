//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Positional arguments filter criteria by name:
//!
//! ```text
//! cargo test -p exo-gateway --test acceptance
//! cargo test -p exo-gateway --test acceptance -- latency strength
//! ```

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use exo_core::dsp::{self, FilterSpec};
use exo_core::fsm::{self, FsmState, InputClass, ManualCommand, MotionCommand, MotionFsm, MuscleClassVector};
use exo_core::pam::{self, PamConfig, PamState, Valve, RELIEF_PSI};
use exo_core::plant::PlantConfig;
use exo_core::synth::{DatasetSpec, LabeledDataset, DEFAULT_FS};
use exo_core::{Class, EmgTrace, Motion, Muscle};
use exo_gateway::cli::{REFERENCE_MEAN_ACCURACY, REFERENCE_PAIR_ACCURACY};
use exo_intent::data::DataConfig;
use exo_intent::{gradcheck, pipeline, Arch, Checkpoint, DropoutMask, Hyperparams, ModelParams};
use exo_rt::measure::{latency_trials, TrialConfig};
use exo_rt::{replay_motions_1_to_4, run_comparison, run_scenario, ClassifierSource, CompareConfig, Scenario};

type Outcome = Result<String, String>;

#[derive(Default)]
struct Ctx {
    checkpoint: Option<Arc<Checkpoint>>,
}

struct Criterion {
    name: &'static str,
    budget: Duration,
    run: fn(&mut Ctx) -> Outcome,
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn pam_anchors(_: &mut Ctx) -> Outcome {
    let cfg = PamConfig::default();
    let f = pam::static_force(80.0, 0.0, &cfg).map_err(|e| e.to_string())?;
    let x = pam::max_contraction(80.0, &cfg).map_err(|e| e.to_string())?;
    ensure(f == 897.0, || format!("static_force(80, 0) = {f}"))?;
    ensure(x == 87.0, || format!("max_contraction(80) = {x}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut peak: f64 = 0.0;
    for _ in 0..200 {
        let mut s = PamState::default();
        for _ in 0..1000 {
            let valve = [Valve::Fill, Valve::Vent, Valve::Closed][rng.random_range(0..3)];
            let supply = rng.random_range(0.0..200.0);
            let load = rng.random_range(0.0..1200.0);
            s = pam::update(&s, valve, supply, load, rng.random_range(0.1..50.0), &cfg);
            peak = peak.max(s.pressure_psi);
            ensure(s.pressure_psi <= RELIEF_PSI, || format!("pressure {} above relief", s.pressure_psi))?;
        }
    }
    let mut s = PamState::default();
    for _ in 0..200 {
        s = pam::update(&s, Valve::Fill, 150.0, 0.0, 50.0, &cfg);
        peak = peak.max(s.pressure_psi);
        ensure(s.pressure_psi <= RELIEF_PSI, || format!("pressure {} above relief", s.pressure_psi))?;
    }
    ensure(s.pressure_psi > RELIEF_PSI - 1e-6, || format!("sustained fill settled at {}", s.pressure_psi))?;

    let curves = pam::characterize(&cfg, &pam::default_characterization_pressures(), 50).map_err(|e| e.to_string())?;
    let pressures: Vec<f64> = curves.iter().map(|c| c.pressure_psi).collect();
    ensure(pressures == [10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0], || format!("pressures {pressures:?}"))?;
    for c in &curves {
        ensure(c.points.windows(2).all(|w| w[1].1 < w[0].1), || {
            format!("curve at {} psi not decreasing", c.pressure_psi)
        })?;
    }
    Ok(format!("897 N, 87 mm, peak pressure {peak:.2} psi, 8 curves"))
}

fn amplitude(x: &[f64], f: f64, fs: f64) -> f64 {
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    let bin = (f * x.len() as f64 / fs).round() as usize;
    2.0 * buf[bin].norm() / x.len() as f64
}

/// Gain of the band-pass and notch stages in cascade, measured on the
/// middle two seconds of a six-second sinusoid.
fn filter_gain_db(f: f64) -> Result<f64, String> {
    let fs = DEFAULT_FS;
    let n = (6.0 * fs) as usize;
    let x: Vec<f64> = (0..n).map(|i| (2.0 * PI * f * i as f64 / fs).sin()).collect();
    let trace = EmgTrace::new(Muscle::Biceps, fs, x.clone(), 0.0);
    let spec = FilterSpec::default();
    let y = dsp::bandpass(&trace, &spec).and_then(|b| dsp::notch(&b, &spec)).map_err(|e| e.to_string())?;
    let mid = (2.0 * fs) as usize..(4.0 * fs) as usize;
    Ok(20.0 * (amplitude(&y.samples[mid.clone()], f, fs) / amplitude(&x[mid], f, fs)).log10())
}

fn dsp_responses(_: &mut Ctx) -> Outcome {
    let g60 = filter_gain_db(60.0)?;
    let g100 = filter_gain_db(100.0)?;
    let g2 = filter_gain_db(2.0)?;
    ensure(g60 <= -30.0, || format!("60 Hz gain {g60:.2} dB"))?;
    ensure(g100.abs() <= 1.0, || format!("100 Hz gain {g100:.3} dB"))?;
    ensure(g2 <= -20.0, || format!("2 Hz gain {g2:.2} dB"))?;
    Ok(format!("60 Hz {g60:.1} dB, 100 Hz {g100:+.3} dB, 2 Hz {g2:.1} dB"))
}

fn windowing(_: &mut Ctx) -> Outcome {
    let fs = DEFAULT_FS;
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..1000 {
        let n: usize = rng.random_range(0..15_000);
        let l_ms = n as f64 * 1000.0 / fs;
        let expected = if l_ms >= 1000.0 { ((l_ms - 1000.0) / 250.0).floor() as usize + 1 } else { 0 };
        let trace = EmgTrace::new(Muscle::Triceps, fs, vec![0.0; n], 0.0);
        let epochs = dsp::window(&trace, 1000.0, 250.0).map_err(|e| e.to_string())?;
        ensure(epochs.len() == expected, || format!("L = {l_ms} ms: {} epochs, want {expected}", epochs.len()))?;
        ensure(epochs.iter().all(|e| e.values.len() == 500), || format!("L = {l_ms} ms: short epoch"))?;
    }
    Ok("1000 lengths".into())
}

fn gradient_check(_: &mut Ctx) -> Outcome {
    let arch = Arch {
        input_len: 8,
        filters: [2, 2],
        kernel: 3,
        pool: 2,
        hidden: 4,
        classes: 3,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let params = ModelParams::init(arch, &mut rng).map_err(|e| e.to_string())?;
    let n = 6;
    let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..arch.input_len).map(|_| rng.random::<f64>()).collect()).collect();
    let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
    let labels: Vec<Class> = (0..n).map(|i| Class::from_index(i % 3).unwrap()).collect();
    let mask = DropoutMask::sample(n, arch.hidden, 0.3, &mut rng);
    let r = gradcheck::check(&params, &refs, &labels, &mask, 1e-3).map_err(|e| e.to_string())?;
    ensure(r.max_error < 1e-4, || format!("max relative error {:.3e} at {}", r.max_error, r.worst))?;
    ensure(r.checked == params.param_count(), || format!("checked {} of {}", r.checked, params.param_count()))?;
    Ok(format!("{} parameters, max relative error {:.2e}", r.checked, r.max_error))
}

fn training(ctx: &mut Ctx) -> Outcome {
    let spec = DatasetSpec::default();
    ensure(spec.repetitions == 50 && spec.seed == 42 && spec.motions.len() == 4, || format!("{spec:?}"))?;
    let ds = LabeledDataset::generate(&spec).map_err(|e| e.to_string())?;
    let (ck, report) = pipeline::train_all(&ds, &Muscle::ALL, &Hyperparams::default(), &DataConfig::default(), |_, _| {})
        .map_err(|e| e.to_string())?;
    let mut detail = Vec::new();
    for p in &report.per_pair {
        let reference = REFERENCE_PAIR_ACCURACY.iter().find(|(k, _)| *k == p.pair.name()).map(|(_, v)| *v);
        println!("{} (test split)\n{}", p.pair.name(), p.confusion);
        if let Some(r) = reference {
            println!("reference human-data accuracy {r:.4}");
        }
        println!();
        detail.push(format!("{} {:.4}", p.pair.name(), p.accuracy));
    }
    let mean = report.per_pair.iter().map(|p| p.accuracy).sum::<f64>() / report.per_pair.len().max(1) as f64;
    println!("mean {mean:.4}, reference human-data mean {REFERENCE_MEAN_ACCURACY:.3}");
    ctx.checkpoint = Some(Arc::new(ck));
    ensure(report.per_pair.len() == 2, || "missing pair models".into())?;
    for p in &report.per_pair {
        ensure(p.accuracy >= 0.90, || format!("{} accuracy {:.4}", p.pair.name(), p.accuracy))?;
    }
    Ok(detail.join(", "))
}

fn fsm_criterion(_: &mut Ctx) -> Outcome {
    use FsmState as S;
    let f = MotionFsm::default();
    let rows = f.transition_table();
    let inputs = InputClass::all();
    for s in FsmState::ALL {
        for i in &inputs {
            let n = rows.iter().filter(|r| r.state == s && r.input == *i).count();
            ensure(n == 1, || format!("({s}, {}) has {n} rows", i.label()))?;
        }
    }
    ensure(rows.len() == FsmState::ALL.len() * inputs.len(), || format!("{} rows", rows.len()))?;

    let v = |m: Muscle, c: Class| MuscleClassVector::rest(0).with(m, c);
    let (bi, tri, del, lat) = (Muscle::Biceps, Muscle::Triceps, Muscle::MedialDeltoid, Muscle::LatissimusDorsi);
    let cases = [
        (S::Rest, v(bi, Class::Onset), S::ElbowFlexAssist),
        (S::ElbowFlexAssist, v(tri, Class::Activation), S::ElbowPaused),
        (S::ElbowPaused, v(tri, Class::Activation), S::ElbowVenting),
        (S::ElbowFlexAssist, MuscleClassVector::rest(0), S::ElbowFlexAssist),
        (S::Rest, v(tri, Class::Activation), S::ElbowExtAssist),
        (S::Rest, v(del, Class::Onset), S::ShoulderFlexAssist),
        (S::ShoulderFlexAssist, v(lat, Class::Activation), S::ShoulderPaused),
        (S::ShoulderPaused, v(lat, Class::Activation), S::ShoulderVenting),
        (S::Rest, v(lat, Class::Activation), S::ShoulderExtAssist),
        (S::ElbowPaused, v(del, Class::Onset), S::CombinedElbowPausedShoulderFlex),
        (S::ShoulderPaused, v(bi, Class::Onset), S::CombinedShoulderPausedElbowFlex),
    ];
    for (from, input, to) in &cases {
        let got = f.step(*from, input).0;
        ensure(got == *to, || format!("{from} + {}: {got}, want {to}", input.input_class().label()))?;
    }

    for s in FsmState::ALL {
        let (n, c) = f.manual_override(s, ManualCommand::VentAll).map_err(|e| e.to_string())?;
        ensure(n == S::EmergencyVent && c == MotionCommand::vent_all(), || format!("vent_all from {s} gave {n}"))?;
    }

    for m in Motion::ALL {
        let script = fsm::motion_script(m);
        let got: Vec<FsmState> = fsm::replay(&f, S::Rest, &script.steps).into_iter().map(|(s, _)| s).collect();
        ensure(got == script.expected, || format!("{} script: {got:?}", m.name()))?;
    }
    let replays = replay_motions_1_to_4(&ClassifierSource::Oracle, &PlantConfig::default()).map_err(|e| e.to_string())?;
    for r in &replays {
        ensure(r.passed, || format!("{} closed loop: {:?} at {:?} psi", r.motion.name(), r.observed, r.final_psi))?;
    }
    Ok(format!("{} rows total, {} scripted transitions, motions 1-4 replay", rows.len(), cases.len()))
}

fn latency(_: &mut Ctx) -> Outcome {
    let cfg = TrialConfig::default();
    let r = latency_trials(&cfg, &ClassifierSource::Oracle, &PlantConfig::default()).map_err(|e| e.to_string())?;
    ensure(r.unmatched == 0, || format!("{} onsets without a valve command", r.unmatched))?;
    ensure(r.samples.len() == cfg.trials, || format!("{} samples", r.samples.len()))?;
    for s in &r.samples {
        let us = |ms: f64| (ms * 1000.0).round() as i64;
        let sum: i64 = s.hops().iter().map(|&h| us(h)).sum();
        ensure(sum == us(s.total_ms), || format!("hops sum to {sum} us, total {} us", us(s.total_ms)))?;
    }
    let (lo, hi) = r.accept_band_ms;
    ensure((lo..=hi).contains(&r.total.mean), || format!("mean {:.1} ms outside [{lo}, {hi}]", r.total.mean))?;
    let (tlo, thi) = r.target_band_ms;
    let flag = if r.mean_in_target { "pass" } else { "WARN" };
    Ok(format!(
        "mean {:.1} ms (std {:.1}, n {}); {tlo}-{thi} ms band: {flag}",
        r.total.mean, r.total.std, r.total.n
    ))
}

fn strength(_: &mut Ctx) -> Outcome {
    let cases = [
        (Motion::ElbowFlexion, 0.0, 3.9, 0.15),
        (Motion::ShoulderFlexion, 0.0, 3.5, 0.15),
        (Motion::ElbowFlexion, 6.8, 1.4, 0.20),
        (Motion::ShoulderFlexion, 6.8, 1.6, 0.20),
    ];
    let mut detail = Vec::new();
    let mut failures = Vec::new();
    for (motion, load_kg, target, tol) in cases {
        let cfg = CompareConfig {
            load_kg,
            ..CompareConfig::default()
        };
        let r = run_comparison(motion, &cfg).map_err(|e| e.to_string())?;
        let ok = (r.ratio - target).abs() <= tol * target;
        detail.push(format!("{} {load_kg} kg {:.2}", motion.name(), r.ratio));
        if !ok {
            failures.push(format!("{} {load_kg} kg ratio {:.3}, want {target} ± {:.0}%", motion.name(), r.ratio, tol * 100.0));
        }
    }
    for motion in [Motion::ElbowFlexion, Motion::ShoulderFlexion] {
        let cfg = CompareConfig {
            zero_assist: true,
            ..CompareConfig::default()
        };
        let r = run_comparison(motion, &cfg).map_err(|e| e.to_string())?;
        if (r.ratio - 1.0).abs() > 0.02 {
            failures.push(format!("{} zero-assist ratio {:.3}", motion.name(), r.ratio));
        }
        detail.push(format!("{} zero-assist {:.2}", motion.name(), r.ratio));
    }
    ensure(failures.is_empty(), || failures.join("; "))?;
    Ok(detail.join(", "))
}

fn determinism(ctx: &mut Ctx) -> Outcome {
    let plant = PlantConfig::default();
    let mut sources = vec![("oracle", ClassifierSource::Oracle)];
    if let Some(ck) = &ctx.checkpoint {
        sources.push(("trained", ClassifierSource::Model(ck.clone())));
    }
    let mut runs = 0;
    for (label, source) in &sources {
        for name in ["idle", "motion1", "motion2", "motion3", "motion4", "demo"] {
            let s = Scenario::builtin(name).ok_or_else(|| format!("no scenario {name}"))?;
            let a = run_scenario(&s, source, &plant).and_then(|t| t.to_jsonl()).map_err(|e| e.to_string())?;
            let b = run_scenario(&s, source, &plant).and_then(|t| t.to_jsonl()).map_err(|e| e.to_string())?;
            ensure(a.as_bytes() == b.as_bytes(), || format!("{name} with {label} classifier differs between runs"))?;
            runs += 1;
        }
    }
    let labels: Vec<&str> = sources.iter().map(|(l, _)| *l).collect();
    Ok(format!("{runs} scenarios byte-identical ({})", labels.join(", ")))
}

const CRITERIA: &[Criterion] = &[
    Criterion {
        name: "pam_anchors",
        budget: Duration::from_secs(1),
        run: pam_anchors,
    },
    Criterion {
        name: "dsp_responses",
        budget: Duration::from_secs(5),
        run: dsp_responses,
    },
    Criterion {
        name: "windowing",
        budget: Duration::from_secs(1),
        run: windowing,
    },
    Criterion {
        name: "gradient_check",
        budget: Duration::from_secs(30),
        run: gradient_check,
    },
    Criterion {
        name: "training",
        budget: Duration::from_secs(600),
        run: training,
    },
    Criterion {
        name: "fsm",
        budget: Duration::from_secs(1),
        run: fsm_criterion,
    },
    Criterion {
        name: "latency",
        budget: Duration::from_secs(10),
        run: latency,
    },
    Criterion {
        name: "strength",
        budget: Duration::from_secs(120),
        run: strength,
    },
    Criterion {
        name: "determinism",
        budget: Duration::from_secs(120),
        run: determinism,
    },
];

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let selected: Vec<&Criterion> = CRITERIA
        .iter()
        .filter(|c| filters.is_empty() || filters.iter().any(|f| c.name.contains(f.as_str())))
        .collect();
    let mut ctx = Ctx::default();
    let mut failed = 0;
    for c in &selected {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(|| (c.run)(&mut ctx)))
            .unwrap_or_else(|_| Err("panicked".into()))
            .and_then(|detail| {
                let t = start.elapsed();
                ensure(t <= c.budget, || format!("took {:.2} s, budget {} s", t.as_secs_f64(), c.budget.as_secs()))
                    .map(|_| detail)
            });
        let secs = start.elapsed().as_secs_f64();
        let line = match result {
            Ok(d) => format!("PASS  {:<15} {secs:>8.2} s  {d}", c.name),
            Err(e) => {
                failed += 1;
                format!("FAIL  {:<15} {secs:>8.2} s  {e}", c.name)
            }
        };
        println!("{line}");
    }
    println!("{} passed, {failed} failed", selected.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
