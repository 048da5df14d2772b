//! Muscles, joints, motions and the three-way activity class shared by every
//! stage of the pipeline.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// One of the four monitored surface-EMG channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Muscle {
    Biceps,
    Triceps,
    MedialDeltoid,
    LatissimusDorsi,
}

impl Muscle {
    pub const ALL: [Muscle; 4] = [
        Muscle::Biceps,
        Muscle::Triceps,
        Muscle::MedialDeltoid,
        Muscle::LatissimusDorsi,
    ];

    pub fn index(self) -> usize {
        match self {
            Muscle::Biceps => 0,
            Muscle::Triceps => 1,
            Muscle::MedialDeltoid => 2,
            Muscle::LatissimusDorsi => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Muscle::Biceps => "biceps",
            Muscle::Triceps => "triceps",
            Muscle::MedialDeltoid => "medial_deltoid",
            Muscle::LatissimusDorsi => "latissimus_dorsi",
        }
    }

    pub fn joint(self) -> Joint {
        match self {
            Muscle::Biceps | Muscle::Triceps => Joint::Elbow,
            Muscle::MedialDeltoid | Muscle::LatissimusDorsi => Joint::Shoulder,
        }
    }

    /// Channel pair reported together in the per-pair evaluation view.
    pub fn pair(self) -> MusclePair {
        match self.joint() {
            Joint::Elbow => MusclePair::BicepsTriceps,
            Joint::Shoulder => MusclePair::DeltoidLatissimus,
        }
    }
}

impl fmt::Display for Muscle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Muscle {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Muscle::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown muscle `{s}`"))
    }
}

/// Agonist/antagonist channel pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MusclePair {
    BicepsTriceps,
    DeltoidLatissimus,
}

impl MusclePair {
    pub const ALL: [MusclePair; 2] = [MusclePair::BicepsTriceps, MusclePair::DeltoidLatissimus];

    pub fn muscles(self) -> [Muscle; 2] {
        match self {
            MusclePair::BicepsTriceps => [Muscle::Biceps, Muscle::Triceps],
            MusclePair::DeltoidLatissimus => [Muscle::MedialDeltoid, Muscle::LatissimusDorsi],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MusclePair::BicepsTriceps => "biceps_triceps",
            MusclePair::DeltoidLatissimus => "deltoid_latissimus",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Joint {
    Elbow,
    Shoulder,
}

impl Joint {
    pub fn name(self) -> &'static str {
        match self {
            Joint::Elbow => "elbow",
            Joint::Shoulder => "shoulder",
        }
    }
}

/// The four assisted upper-limb motions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Motion {
    ElbowFlexion,
    ElbowExtension,
    ShoulderFlexion,
    ShoulderExtension,
}

impl Motion {
    pub const ALL: [Motion; 4] = [
        Motion::ElbowFlexion,
        Motion::ElbowExtension,
        Motion::ShoulderFlexion,
        Motion::ShoulderExtension,
    ];

    /// Muscle whose contraction expresses the intent for this motion.
    pub fn agonist(self) -> Muscle {
        match self {
            Motion::ElbowFlexion => Muscle::Biceps,
            Motion::ElbowExtension => Muscle::Triceps,
            Motion::ShoulderFlexion => Muscle::MedialDeltoid,
            Motion::ShoulderExtension => Muscle::LatissimusDorsi,
        }
    }

    pub fn joint(self) -> Joint {
        self.agonist().joint()
    }

    pub fn name(self) -> &'static str {
        match self {
            Motion::ElbowFlexion => "elbow_flexion",
            Motion::ElbowExtension => "elbow_extension",
            Motion::ShoulderFlexion => "shoulder_flexion",
            Motion::ShoulderExtension => "shoulder_extension",
        }
    }
}

impl fmt::Display for Motion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Motion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Motion::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown motion `{s}`"))
    }
}

/// Per-window muscle activity class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Class {
    Rest,
    Onset,
    Activation,
}

impl Class {
    pub const ALL: [Class; 3] = [Class::Rest, Class::Onset, Class::Activation];

    pub fn index(self) -> usize {
        match self {
            Class::Rest => 0,
            Class::Onset => 1,
            Class::Activation => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Class> {
        Class::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Class::Rest => "rest",
            Class::Onset => "onset",
            Class::Activation => "activation",
        }
    }
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
