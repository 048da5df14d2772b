use std::fmt;

use serde::{Deserialize, Serialize};

use exo_core::{Class, Muscle, MusclePair};

use crate::data::Sample;
use crate::model;
use crate::params::ModelParams;
use crate::IntentError;

/// `counts[true][predicted]` over rest / onset / activation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 3]; 3],
}

impl ConfusionMatrix {
    pub fn record(&mut self, truth: Class, predicted: Class) {
        self.counts[truth.index()][predicted.index()] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..3).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        let t = self.total();
        if t == 0 {
            return 0.0;
        }
        self.correct() as f64 / t as f64
    }

    pub fn merge(&self, other: &ConfusionMatrix) -> ConfusionMatrix {
        let mut out = *self;
        for i in 0..3 {
            for j in 0..3 {
                out.counts[i][j] += other.counts[i][j];
            }
        }
        out
    }
}

impl fmt::Display for ConfusionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:>12} {:>8} {:>8} {:>10}", "true\\pred", "rest", "onset", "activation")?;
        for (i, row) in self.counts.iter().enumerate() {
            let name = Class::from_index(i).map(|c| c.name()).unwrap_or("?");
            writeln!(f, "{:>12} {:>8} {:>8} {:>10}", name, row[0], row[1], row[2])?;
        }
        write!(f, "accuracy {:.4} ({}/{})", self.accuracy(), self.correct(), self.total())
    }
}

pub fn evaluate(params: &ModelParams, test: &[Sample]) -> Result<ConfusionMatrix, IntentError> {
    if test.is_empty() {
        return Err(IntentError::EmptyTestSet);
    }
    let xs: Vec<&[f64]> = test.iter().map(|s| s.values.as_slice()).collect();
    let probs = model::predict(params, &xs)?;
    let mut cm = ConfusionMatrix::default();
    for (p, s) in probs.iter().zip(test) {
        cm.record(s.label, p.argmax());
    }
    Ok(cm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuscleEval {
    pub muscle: Muscle,
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairEval {
    pub pair: MusclePair,
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
}

/// Sums the per-muscle matrices of each agonist/antagonist pair.
pub fn pair_view(per_muscle: &[MuscleEval]) -> Vec<PairEval> {
    MusclePair::ALL
        .iter()
        .filter_map(|&pair| {
            let parts: Vec<_> = per_muscle
                .iter()
                .filter(|m| pair.muscles().contains(&m.muscle))
                .collect();
            if parts.is_empty() {
                return None;
            }
            let confusion = parts
                .iter()
                .fold(ConfusionMatrix::default(), |acc, m| acc.merge(&m.confusion));
            Some(PairEval {
                pair,
                accuracy: confusion.accuracy(),
                confusion,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use exo_core::Motion;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::params::Arch;

    #[test]
    fn always_rest_on_rest_set() {
        let mut p = ModelParams::init(Arch::default(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        p.dense.w.data.fill(0.0);
        p.dense.b.data = vec![10.0, 0.0, 0.0];
        let test: Vec<Sample> = (0..7)
            .map(|i| Sample {
                values: vec![0.1 * i as f64; 500],
                label: Class::Rest,
                motion: Motion::ElbowFlexion,
                rep: i,
            })
            .collect();
        let cm = evaluate(&p, &test).unwrap();
        assert_eq!(cm.accuracy(), 1.0);
        assert_eq!(cm.total(), 7);
        assert_eq!(evaluate(&p, &[]), Err(IntentError::EmptyTestSet));
    }

    #[test]
    fn pair_view_sums() {
        let mut a = ConfusionMatrix::default();
        a.record(Class::Rest, Class::Rest);
        a.record(Class::Onset, Class::Rest);
        let mut b = ConfusionMatrix::default();
        b.record(Class::Activation, Class::Activation);
        let per = vec![
            MuscleEval {
                muscle: Muscle::Biceps,
                confusion: a,
                accuracy: a.accuracy(),
            },
            MuscleEval {
                muscle: Muscle::Triceps,
                confusion: b,
                accuracy: b.accuracy(),
            },
        ];
        let pairs = pair_view(&per);
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].confusion.total(), 3);
        assert!((pairs[0].accuracy - 2.0 / 3.0).abs() < 1e-12);
    }
}
