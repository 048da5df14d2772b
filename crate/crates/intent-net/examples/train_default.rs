//! Trains the four per-muscle models on the default synthetic dataset and
//! prints the per-pair confusion matrices.

use exo_core::synth::{DatasetSpec, LabeledDataset};
use exo_core::Muscle;
use exo_intent::data::DataConfig;
use exo_intent::pipeline;
use exo_intent::Hyperparams;

fn main() {
    let max_epochs = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(40);
    let ds = LabeledDataset::generate(&DatasetSpec::default()).expect("dataset");
    let hyper = Hyperparams {
        max_epochs,
        ..Hyperparams::default()
    };
    let (_, report) = pipeline::train_all(&ds, &Muscle::ALL, &hyper, &DataConfig::default(), |m, r| {
        println!(
            "{:<10} epoch {:>3} lr {:.1e} train {:.4} val {:.4} acc {:.4}",
            m.name(),
            r.epoch,
            r.lr,
            r.train_loss,
            r.val_loss,
            r.val_accuracy
        );
    })
    .expect("training");
    for m in &report.per_muscle {
        println!("{} {:.4}\n{}", m.muscle.name(), m.accuracy, m.confusion);
    }
    for p in &report.per_pair {
        println!("{} {:.4}\n{}", p.pair.name(), p.accuracy, p.confusion);
    }
    println!("total {:.1}s", report.seconds);
}
