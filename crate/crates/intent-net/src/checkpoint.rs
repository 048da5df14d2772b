//! JSON checkpoints holding one trained network per muscle channel, the
//! hyperparameters they were trained with and the epoching configuration
//! they expect.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use exo_core::Muscle;

use crate::data::DataConfig;
use crate::params::ModelParams;
use crate::train::Hyperparams;
use crate::IntentError;

pub const FORMAT: &str = "exo-intent";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuscleModel {
    pub muscle: Muscle,
    pub params: ModelParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub hyper: Hyperparams,
    pub data: DataConfig,
    pub models: Vec<MuscleModel>,
}

impl Checkpoint {
    pub fn new(hyper: Hyperparams, data: DataConfig, models: Vec<MuscleModel>) -> Self {
        Self {
            format: FORMAT.into(),
            version: VERSION,
            hyper,
            data,
            models,
        }
    }

    pub fn model(&self, muscle: Muscle) -> Option<&ModelParams> {
        self.models.iter().find(|m| m.muscle == muscle).map(|m| &m.params)
    }

    pub fn to_json(&self) -> Result<String, IntentError> {
        serde_json::to_string(self).map_err(|e| IntentError::Format(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, IntentError> {
        let ck: Checkpoint = serde_json::from_str(text).map_err(|e| IntentError::Format(e.to_string()))?;
        if ck.format != FORMAT || ck.version != VERSION {
            return Err(IntentError::Format(format!(
                "expected {FORMAT} v{VERSION}, found {} v{}",
                ck.format, ck.version
            )));
        }
        for m in &ck.models {
            m.params.check()?;
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<(), IntentError> {
        fs::write(path, self.to_json()?).map_err(|e| IntentError::Io(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, IntentError> {
        let text = fs::read_to_string(path).map_err(|e| IntentError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}
