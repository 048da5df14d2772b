//! On-disk dataset layout:
//!
//! ```text
//! <root>/dataset.json                 generation spec
//! <root>/<motion>/rep_<k>.json        seed, fs, t0 and per-channel events
//! <root>/<motion>/rep_<k>_<muscle>.csv   `t_ms,mv`
//! ```
//!
//! Samples are written with the shortest round-trip float formatting, so a
//! save/load cycle reproduces every sample bit for bit.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dataset::{DatasetSpec, LabeledDataset, Repetition};
use super::{ActivationProfile, SynthError};
use crate::muscle::{Motion, Muscle};
use crate::trace::EmgTrace;

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    motion: Motion,
    index: usize,
    seed: u64,
    fs: f64,
    t0_ms: f64,
    profiles: BTreeMap<String, ActivationProfile>,
}

fn io_err(e: impl std::fmt::Display) -> SynthError {
    SynthError::Store(e.to_string())
}

pub fn write_trace_csv<W: Write>(trace: &EmgTrace, out: W) -> std::io::Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(out, "t_ms,mv")?;
    for (i, v) in trace.samples.iter().enumerate() {
        writeln!(out, "{},{}", trace.time_ms(i), v)?;
    }
    out.flush()
}

pub fn read_trace_csv<R: BufRead>(muscle: Muscle, fs: f64, t0_ms: f64, input: R) -> Result<EmgTrace, SynthError> {
    let mut samples = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line.map_err(io_err)?;
        if n == 0 {
            if line.trim() != "t_ms,mv" {
                return Err(SynthError::Store(format!("unexpected header `{line}`")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let (_, mv) = line
            .split_once(',')
            .ok_or_else(|| SynthError::Store(format!("line {}: expected two columns", n + 1)))?;
        samples.push(mv.trim().parse::<f64>().map_err(io_err)?);
    }
    Ok(EmgTrace::new(muscle, fs, samples, t0_ms))
}

pub fn save(dataset: &LabeledDataset, root: &Path) -> Result<(), SynthError> {
    fs::create_dir_all(root).map_err(io_err)?;
    let spec = serde_json::to_string_pretty(&dataset.spec).map_err(io_err)?;
    fs::write(root.join("dataset.json"), spec).map_err(io_err)?;
    for rep in &dataset.repetitions {
        let dir = root.join(rep.motion.name());
        fs::create_dir_all(&dir).map_err(io_err)?;
        let first = &rep.traces[0];
        let sidecar = Sidecar {
            motion: rep.motion,
            index: rep.index,
            seed: rep.seed,
            fs: first.fs,
            t0_ms: first.t0_ms,
            profiles: Muscle::ALL
                .iter()
                .map(|m| (m.name().to_string(), rep.profile(*m).clone()))
                .collect(),
        };
        let json = serde_json::to_string_pretty(&sidecar).map_err(io_err)?;
        fs::write(dir.join(format!("rep_{}.json", rep.index)), json).map_err(io_err)?;
        for trace in &rep.traces {
            let f = fs::File::create(dir.join(format!("rep_{}_{}.csv", rep.index, trace.muscle)))
                .map_err(io_err)?;
            write_trace_csv(trace, f).map_err(io_err)?;
        }
    }
    Ok(())
}

pub fn load(root: &Path) -> Result<LabeledDataset, SynthError> {
    let spec: DatasetSpec =
        serde_json::from_str(&fs::read_to_string(root.join("dataset.json")).map_err(io_err)?)
            .map_err(io_err)?;
    let mut repetitions = Vec::new();
    for &motion in &spec.motions {
        let dir = root.join(motion.name());
        for index in 0..spec.repetitions {
            let sidecar: Sidecar = serde_json::from_str(
                &fs::read_to_string(dir.join(format!("rep_{index}.json"))).map_err(io_err)?,
            )
            .map_err(io_err)?;
            let mut profiles = Vec::with_capacity(4);
            let mut traces = Vec::with_capacity(4);
            for m in Muscle::ALL {
                let profile = sidecar
                    .profiles
                    .get(m.name())
                    .cloned()
                    .ok_or_else(|| SynthError::Store(format!("rep {index}: no profile for {m}")))?;
                profiles.push(profile);
                let f = fs::File::open(dir.join(format!("rep_{index}_{m}.csv"))).map_err(io_err)?;
                traces.push(read_trace_csv(m, sidecar.fs, sidecar.t0_ms, BufReader::new(f))?);
            }
            repetitions.push(Repetition {
                motion: sidecar.motion,
                index: sidecar.index,
                seed: sidecar.seed,
                profiles,
                traces,
            });
        }
    }
    Ok(LabeledDataset { spec, repetitions })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn save_load_is_bit_exact() {
        let spec = DatasetSpec {
            motions: vec![Motion::ElbowFlexion, Motion::ShoulderExtension],
            repetitions: 2,
            duration_ms: 1500.0,
            ..DatasetSpec::default()
        };
        let ds = LabeledDataset::generate(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save(&ds, dir.path()).unwrap();
        let back = load(dir.path()).unwrap();
        assert_eq!(back, ds);
        assert!(dir.path().join("elbow_flexion/rep_1_biceps.csv").exists());
    }

    #[test]
    fn rejects_bad_header() {
        let err = read_trace_csv(Muscle::Biceps, 500.0, 0.0, "time,value\n0,1\n".as_bytes());
        assert!(matches!(err, Err(SynthError::Store(_))));
    }
}
