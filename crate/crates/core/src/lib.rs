//! Signal, actuator and control models for the intent-driven exoskeleton
//! simulator: synthetic EMG, the preprocessing chain, PAM physics, joint
//! biomechanics and the motion state machine.

pub mod dsp;
pub mod fsm;
pub mod muscle;
pub mod pam;
pub mod plant;
pub mod synth;
pub mod trace;

pub use muscle::{Class, Joint, Motion, Muscle, MusclePair};
pub use trace::EmgTrace;
