//! The `exo` command line.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use exo_core::fsm::{self, MotionFsm};
use exo_core::pam;
use exo_core::plant::PlantConfig;
use exo_core::synth::{store, DatasetSpec, LabeledDataset};
use exo_core::{Motion, Muscle};
use exo_intent::data::DataConfig;
use exo_intent::{pipeline, Checkpoint, Hyperparams};
use exo_rt::compare::{run_comparison, CompareConfig};
use exo_rt::measure::{latency_trials, measure_latency, TrialConfig};
use exo_rt::{run_scenario, ClassifierSource, LatencyConfig, Scenario};

use crate::server::{serve, ServeConfig};

/// Accuracy reported for recordings from human subjects, per pair.
pub const REFERENCE_PAIR_ACCURACY: [(&str, f64); 2] = [("biceps_triceps", 0.9538), ("deltoid_latissimus", 0.9701)];
pub const REFERENCE_MEAN_ACCURACY: f64 = 0.962;

/// Settings shared by the subcommands; every section is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub dataset: DatasetSpec,
    pub data: DataConfig,
    pub hyper: Hyperparams,
    pub latency: LatencyConfig,
    pub plant: PlantConfig,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let Some(s) = seed {
            self.dataset.seed = s;
            self.hyper.seed = s;
        }
        self
    }
}

#[derive(Debug, Parser)]
#[command(name = "exo", version, about = "Intent-driven upper-limb exoskeleton simulator")]
pub struct Cli {
    /// Master seed (default 42).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Machine-readable JSON output.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthetic EMG datasets.
    #[command(subcommand)]
    Dataset(DatasetCmd),
    /// Train the four per-muscle classifiers.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a test split.
    Eval(EvalArgs),
    /// PAM models.
    #[command(subcommand)]
    Pam(PamCmd),
    /// Motion state machine.
    #[command(subcommand)]
    Fsm(FsmCmd),
    /// Closed-loop scenarios.
    #[command(subcommand)]
    Scenario(ScenarioCmd),
    /// Intention-to-assistance latency over repeated trials.
    Latency(LatencyArgs),
    /// Assisted versus unassisted muscle activation.
    Compare(CompareArgs),
    /// Stream telemetry and accept operator commands over TCP.
    Serve(ServeArgs),
}

#[derive(Debug, Subcommand)]
pub enum DatasetCmd {
    /// Generate and store a labeled dataset.
    Gen {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        reps: Option<usize>,
    },
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Stored dataset; generated from the config when omitted.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Comma-separated subset of muscles.
    #[arg(long, value_delimiter = ',')]
    pub muscles: Vec<String>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Stored dataset whose test split is used; generated when omitted.
    #[arg(long)]
    pub test: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum PamCmd {
    /// Force-contraction curves at 10..80 psi as CSV.
    Characterize {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 50)]
        points: usize,
    },
}

#[derive(Debug, Subcommand)]
pub enum FsmCmd {
    /// Full transition table as CSV.
    Table {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum ScenarioCmd {
    /// Run a scenario and export its timeline as JSON lines.
    Run {
        /// Built-in scenario: idle, motion1..motion4, demo.
        #[arg(long, conflicts_with = "file")]
        name: Option<String>,
        #[arg(long)]
        file: Option<PathBuf>,
        /// Classify with a trained checkpoint instead of the script oracle.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct LatencyArgs {
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// elbow_flexion or shoulder_flexion.
    #[arg(long)]
    pub motion: String,
    #[arg(long, default_value_t = 0.0)]
    pub load_kg: f64,
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    /// Keep every PAM vented in the assisted run.
    #[arg(long)]
    pub zero_assist: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:7878")]
    pub bind: String,
    #[arg(long, default_value = "demo")]
    pub scenario: String,
    /// Simulated seconds per wall-clock second.
    #[arg(long, default_value_t = 1.0)]
    pub speed: f64,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

fn parse_motion(name: &str) -> Result<Motion> {
    Motion::ALL
        .into_iter()
        .find(|m| m.name() == name)
        .with_context(|| format!("unknown motion {name}"))
}

fn parse_muscle(name: &str) -> Result<Muscle> {
    Muscle::ALL
        .into_iter()
        .find(|m| m.name() == name)
        .with_context(|| format!("unknown muscle {name}"))
}

fn source(checkpoint: &Option<PathBuf>) -> Result<ClassifierSource> {
    Ok(match checkpoint {
        Some(p) => ClassifierSource::Model(Arc::new(Checkpoint::load(p)?)),
        None => ClassifierSource::Oracle,
    })
}

fn emit_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

fn dataset_for(cfg: &Config, path: &Option<PathBuf>) -> Result<LabeledDataset> {
    Ok(match path {
        Some(p) => store::load(p)?,
        None => LabeledDataset::generate(&cfg.dataset)?,
    })
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    execute(cli, out)
}

pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    }
    .with_seed(cli.seed);
    let seed = cli.seed.unwrap_or(42);
    match cli.command {
        Command::Dataset(DatasetCmd::Gen { out: dir, reps }) => {
            let mut spec = cfg.dataset.clone();
            if let Some(r) = reps {
                spec.repetitions = r;
            }
            let ds = LabeledDataset::generate(&spec)?;
            store::save(&ds, &dir)?;
            if cli.json {
                emit_json(out, &serde_json::json!({"path": dir, "repetitions": ds.len(), "seed": spec.seed}))?;
            } else {
                writeln!(out, "wrote {} repetitions to {}", ds.len(), dir.display())?;
            }
        }
        Command::Train(a) => {
            let ds = dataset_for(&cfg, &a.dataset)?;
            let mut hyper = cfg.hyper;
            if let Some(e) = a.epochs {
                hyper.max_epochs = e;
            }
            let muscles = if a.muscles.is_empty() {
                Muscle::ALL.to_vec()
            } else {
                a.muscles.iter().map(|m| parse_muscle(m)).collect::<Result<Vec<_>>>()?
            };
            let json = cli.json;
            let (ck, report) = pipeline::train_all(&ds, &muscles, &hyper, &cfg.data, |m, r| {
                if !json {
                    log::info!(
                        "{} epoch {} lr {:.1e} train {:.4} val {:.4} acc {:.4}",
                        m.name(),
                        r.epoch,
                        r.lr,
                        r.train_loss,
                        r.val_loss,
                        r.val_accuracy
                    );
                }
            })?;
            ck.save(&a.out)?;
            if cli.json {
                emit_json(out, &report)?;
            } else {
                for p in &report.per_pair {
                    writeln!(out, "{}\n{}\n", p.pair.name(), p.confusion)?;
                }
                writeln!(out, "saved {} in {:.1} s", a.out.display(), report.seconds)?;
            }
        }
        Command::Eval(a) => {
            let ck = Checkpoint::load(&a.checkpoint)?;
            let ds = dataset_for(&cfg, &a.test)?;
            let (per_muscle, per_pair) = pipeline::evaluate_checkpoint(&ck, &ds)?;
            if cli.json {
                emit_json(
                    out,
                    &serde_json::json!({
                        "per_muscle": per_muscle,
                        "per_pair": per_pair,
                        "reference_pair_accuracy": REFERENCE_PAIR_ACCURACY
                            .iter()
                            .map(|(k, v)| (k.to_string(), *v))
                            .collect::<std::collections::BTreeMap<_, _>>(),
                    }),
                )?;
            } else {
                for m in &per_muscle {
                    writeln!(out, "{}\n{}\n", m.muscle.name(), m.confusion)?;
                }
                for p in &per_pair {
                    let reference = REFERENCE_PAIR_ACCURACY
                        .iter()
                        .find(|(k, _)| *k == p.pair.name())
                        .map(|(_, v)| *v);
                    writeln!(out, "{}\n{}", p.pair.name(), p.confusion)?;
                    if let Some(r) = reference {
                        writeln!(out, "reference human-data accuracy {r:.4}")?;
                    }
                    writeln!(out)?;
                }
            }
        }
        Command::Pam(PamCmd::Characterize { out: path, points }) => {
            let curves = pam::characterize(&cfg.plant.pam, &pam::default_characterization_pressures(), points)?;
            match path {
                Some(p) => pam::write_characterization_csv(&curves, fs::File::create(&p)?)?,
                None if cli.json => emit_json(out, &curves)?,
                None => pam::write_characterization_csv(&curves, &mut *out)?,
            }
        }
        Command::Fsm(FsmCmd::Table { out: path }) => {
            let rows = MotionFsm::default().transition_table();
            match path {
                Some(p) => fsm::write_table_csv(&rows, fs::File::create(&p)?)?,
                None if cli.json => emit_json(out, &rows)?,
                None => fsm::write_table_csv(&rows, &mut *out)?,
            }
        }
        Command::Scenario(ScenarioCmd::Run {
            name,
            file,
            checkpoint,
            out: path,
        }) => {
            let mut s = match (name, file) {
                (_, Some(f)) => Scenario::load(&f)?,
                (Some(n), None) => Scenario::builtin(&n).with_context(|| format!("unknown scenario {n}"))?,
                (None, None) => bail!("give --name or --file"),
            };
            if let Some(sd) = cli.seed {
                s.seed = sd;
            }
            let timeline = run_scenario(&s, &source(&checkpoint)?, &cfg.plant)?;
            if let Some(p) = &path {
                timeline.write_jsonl(std::io::BufWriter::new(fs::File::create(p)?))?;
            }
            let states: Vec<String> = timeline.state_trajectory().iter().map(|s| s.name().to_string()).collect();
            let latency = measure_latency(&timeline).ok();
            if cli.json {
                emit_json(
                    out,
                    &serde_json::json!({
                        "scenario": s.name,
                        "seed": s.seed,
                        "events": timeline.events.len(),
                        "states": states,
                        "latency": latency,
                    }),
                )?;
            } else {
                writeln!(out, "{}: {} events, states {}", s.name, timeline.events.len(), states.join(" -> "))?;
                if let Some(l) = latency {
                    writeln!(out, "{}", l.summary())?;
                }
                if let Some(p) = path {
                    writeln!(out, "timeline written to {}", p.display())?;
                }
            }
        }
        Command::Latency(a) => {
            let trials = TrialConfig {
                trials: a.trials,
                latency: cfg.latency,
                seed,
                ..TrialConfig::default()
            };
            let report = latency_trials(&trials, &source(&a.checkpoint)?, &cfg.plant)?;
            if cli.json {
                emit_json(out, &report)?;
            } else {
                writeln!(out, "{}", report.summary())?;
            }
        }
        Command::Compare(a) => {
            let motion = parse_motion(&a.motion)?;
            let c = CompareConfig {
                reps: a.reps,
                load_kg: a.load_kg,
                seed,
                latency: cfg.latency,
                plant: cfg.plant.clone(),
                zero_assist: a.zero_assist,
                ..CompareConfig::default()
            };
            let r = run_comparison(motion, &c)?;
            if cli.json {
                emit_json(out, &r)?;
            } else {
                writeln!(
                    out,
                    "{} load {} kg: unassisted {:.2} ± {:.2} %MVC, assisted {:.2} ± {:.2} %MVC, ratio {:.3}",
                    motion.name(),
                    r.load_kg,
                    r.unassisted.mean,
                    r.unassisted.std,
                    r.assisted.mean,
                    r.assisted.std,
                    r.ratio
                )?;
            }
        }
        Command::Serve(a) => {
            let mut scenario = Scenario::builtin(&a.scenario).with_context(|| format!("unknown scenario {}", a.scenario))?;
            scenario.seed = seed;
            scenario.latency = cfg.latency;
            let handle = serve(ServeConfig {
                bind: a.bind,
                scenario,
                plant: cfg.plant.clone(),
                source: source(&a.checkpoint)?,
                speed: a.speed,
                ..ServeConfig::default()
            })?;
            writeln!(out, "listening on {}", handle.local_addr())?;
            out.flush()?;
            handle.wait()?;
        }
    }
    Ok(())
}
