//! Window classifiers the cloud stage can run.

use std::sync::Arc;

use exo_core::synth::ActivationProfile;
use exo_core::{Class, Muscle};
use exo_intent::{model, Checkpoint, ClassProbs};

use crate::RtError;

/// One conditioned, scaled window of a channel.
#[derive(Debug, Clone, Copy)]
pub struct WindowInput<'a> {
    pub muscle: Muscle,
    pub values: &'a [f64],
    pub start_ms: f64,
    pub end_ms: f64,
}

pub trait Classifier: Send {
    fn classify(&mut self, input: &WindowInput<'_>) -> Result<ClassProbs, RtError>;
}

fn one_hot(c: Class) -> ClassProbs {
    let mut p = [0.0; 3];
    p[c.index()] = 1.0;
    ClassProbs::from_slice(&p)
}

/// Labels windows from the scripted activation profiles, exactly as the
/// training labels are defined.
#[derive(Debug, Clone)]
pub struct OracleClassifier {
    profiles: [ActivationProfile; 4],
}

impl OracleClassifier {
    pub fn new(profiles: [ActivationProfile; 4]) -> Self {
        Self { profiles }
    }
}

impl Classifier for OracleClassifier {
    fn classify(&mut self, input: &WindowInput<'_>) -> Result<ClassProbs, RtError> {
        let class = self.profiles[input.muscle.index()].class_of_window(input.start_ms, input.end_ms);
        Ok(one_hot(class))
    }
}

/// Trained per-muscle networks.
#[derive(Debug, Clone)]
pub struct NetClassifier {
    checkpoint: Arc<Checkpoint>,
}

impl NetClassifier {
    pub fn new(checkpoint: Arc<Checkpoint>) -> Result<Self, RtError> {
        if let Some(m) = Muscle::ALL.iter().find(|m| checkpoint.model(**m).is_none()) {
            return Err(RtError::MissingModel(m.name().into()));
        }
        Ok(Self { checkpoint })
    }
}

impl Classifier for NetClassifier {
    fn classify(&mut self, input: &WindowInput<'_>) -> Result<ClassProbs, RtError> {
        let params = self
            .checkpoint
            .model(input.muscle)
            .ok_or_else(|| RtError::MissingModel(input.muscle.name().into()))?;
        let probs = model::predict(params, &[input.values])?;
        Ok(probs[0])
    }
}

/// How the engine should classify windows.
#[derive(Debug, Clone, Default)]
pub enum ClassifierSource {
    #[default]
    Oracle,
    Model(Arc<Checkpoint>),
}

impl ClassifierSource {
    pub fn build(&self, profiles: [ActivationProfile; 4]) -> Result<Box<dyn Classifier>, RtError> {
        Ok(match self {
            ClassifierSource::Oracle => Box::new(OracleClassifier::new(profiles)),
            ClassifierSource::Model(ck) => Box::new(NetClassifier::new(ck.clone())?),
        })
    }

    /// Short name for reports.
    pub fn label(&self) -> &'static str {
        match self {
            ClassifierSource::Oracle => "oracle",
            ClassifierSource::Model(_) => "model",
        }
    }
}
