//! Pneumatic artificial muscle.
//!
//! Quasistatic force law: at pressure `p` the blocked force is
//! `F0(p) = f_max_ref · p / p_ref` and the free contraction is
//! `x_max(p) = x_max_ref · p / p_ref`; force falls linearly with
//! contraction, `F(p, x) = F0(p) · (1 − x / x_max(p))`.
//!
//! Pressure follows first-order fill/vent dynamics through the solenoid
//! valves and is capped by the relief valve.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::muscle::Joint;

/// Relief valve setting.
pub const RELIEF_PSI: f64 = 70.0;
/// Upper bound of the automatic operating envelope.
pub const AUTO_MAX_PSI: f64 = 60.0;
/// Upper bound accepted in characterization mode.
pub const CHARACTERIZE_MAX_PSI: f64 = 80.0;

#[derive(Debug, Error, PartialEq)]
pub enum PamError {
    #[error("pressure {0} psi outside the accepted range")]
    PressureOutOfRange(f64),
    #[error("contraction {contraction} mm exceeds x_max {max} mm at this pressure")]
    OverContraction { contraction: f64, max: f64 },
    #[error("negative contraction {0} mm")]
    NegativeContraction(f64),
}

/// The three actuators on the suit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PamId {
    Elbow,
    Shoulder,
    ShoulderAux,
}

impl PamId {
    pub const ALL: [PamId; 3] = [PamId::Elbow, PamId::Shoulder, PamId::ShoulderAux];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            PamId::Elbow => "elbow",
            PamId::Shoulder => "shoulder",
            PamId::ShoulderAux => "shoulder_aux",
        }
    }

    pub fn joint(self) -> Joint {
        match self {
            PamId::Elbow => Joint::Elbow,
            PamId::Shoulder | PamId::ShoulderAux => Joint::Shoulder,
        }
    }
}

impl fmt::Display for PamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PamId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PamId::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown pam `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Valve {
    Fill,
    Vent,
    Closed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PamConfig {
    /// Blocked force at `p_ref_psi`, N.
    pub f_max_ref_n: f64,
    pub p_ref_psi: f64,
    /// Free contraction at `p_ref_psi`, mm.
    pub x_max_ref_mm: f64,
    pub bladder_length_mm: f64,
    pub mass_g: f64,
    pub fill_time_constant_ms: f64,
    pub vent_time_constant_ms: f64,
    /// Lag between a valve change and the mechanical response.
    pub actuation_delay_ms: f64,
}

impl Default for PamConfig {
    fn default() -> Self {
        Self {
            f_max_ref_n: 897.0,
            p_ref_psi: 80.0,
            x_max_ref_mm: 87.0,
            bladder_length_mm: 340.0,
            mass_g: 104.0,
            fill_time_constant_ms: 200.0,
            vent_time_constant_ms: 150.0,
            actuation_delay_ms: 100.0,
        }
    }
}

impl PamConfig {
    pub fn blocked_force(&self, pressure_psi: f64) -> f64 {
        self.f_max_ref_n * pressure_psi / self.p_ref_psi
    }
}

fn check_pressure(pressure_psi: f64, max: f64) -> Result<(), PamError> {
    if !(0.0..=max).contains(&pressure_psi) {
        return Err(PamError::PressureOutOfRange(pressure_psi));
    }
    Ok(())
}

/// Free (zero-force) contraction at `pressure_psi`, mm. Pressures up to
/// 80 psi are accepted for characterization.
pub fn max_contraction(pressure_psi: f64, cfg: &PamConfig) -> Result<f64, PamError> {
    check_pressure(pressure_psi, CHARACTERIZE_MAX_PSI)?;
    Ok(cfg.x_max_ref_mm * pressure_psi / cfg.p_ref_psi)
}

/// Quasistatic force at the given pressure and contraction, N.
pub fn static_force(pressure_psi: f64, contraction_mm: f64, cfg: &PamConfig) -> Result<f64, PamError> {
    let x_max = max_contraction(pressure_psi, cfg)?;
    if contraction_mm < 0.0 {
        return Err(PamError::NegativeContraction(contraction_mm));
    }
    if contraction_mm > x_max {
        return Err(PamError::OverContraction {
            contraction: contraction_mm,
            max: x_max,
        });
    }
    if x_max == 0.0 {
        return Ok(0.0);
    }
    Ok(cfg.blocked_force(pressure_psi) * (1.0 - contraction_mm / x_max))
}

/// Cable tension delivered at a geometrically imposed contraction; zero once
/// the muscle would have to shorten past its free contraction (slack cable).
pub fn tension_at(pressure_psi: f64, contraction_mm: f64, cfg: &PamConfig) -> f64 {
    let p = pressure_psi.clamp(0.0, RELIEF_PSI);
    let x_max = cfg.x_max_ref_mm * p / cfg.p_ref_psi;
    if x_max <= 0.0 || contraction_mm >= x_max {
        return 0.0;
    }
    cfg.blocked_force(p) * (1.0 - contraction_mm.max(0.0) / x_max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PamState {
    pub pressure_psi: f64,
    pub contraction_mm: f64,
    pub force_n: f64,
    pub valve: Valve,
    /// Time left before the mechanics follow the current valve state.
    pub actuation_pending_ms: f64,
}

impl Default for PamState {
    fn default() -> Self {
        Self {
            pressure_psi: 0.0,
            contraction_mm: 0.0,
            force_n: 0.0,
            valve: Valve::Closed,
            actuation_pending_ms: 0.0,
        }
    }
}

/// Contraction where the muscle force balances `load_n`, with the force it
/// then carries. A load above the blocked force leaves the muscle at full
/// length carrying its blocked force.
pub fn equilibrium(pressure_psi: f64, load_n: f64, cfg: &PamConfig) -> (f64, f64) {
    let p = pressure_psi.clamp(0.0, RELIEF_PSI);
    let f0 = cfg.blocked_force(p);
    let x_max = cfg.x_max_ref_mm * p / cfg.p_ref_psi;
    if f0 <= 0.0 {
        return (0.0, 0.0);
    }
    let load = load_n.max(0.0);
    if load >= f0 {
        return (0.0, f0);
    }
    (x_max * (1.0 - load / f0), load)
}

/// Pressure after `dt_ms` of first-order flow toward `target` with time
/// constant `tau_ms` (exact exponential step).
pub fn relax(pressure: f64, target: f64, tau_ms: f64, dt_ms: f64) -> f64 {
    if tau_ms <= 0.0 {
        return target;
    }
    target + (pressure - target) * (-dt_ms / tau_ms).exp()
}

/// Advances one muscle by `dt_ms`.
pub fn update(
    state: &PamState,
    valve: Valve,
    supply_psi: f64,
    load_n: f64,
    dt_ms: f64,
    cfg: &PamConfig,
) -> PamState {
    let dt = dt_ms.max(0.0);
    let pressure = match valve {
        Valve::Closed => state.pressure_psi,
        Valve::Fill => relax(
            state.pressure_psi,
            supply_psi.clamp(0.0, RELIEF_PSI),
            cfg.fill_time_constant_ms,
            dt,
        ),
        Valve::Vent => relax(state.pressure_psi, 0.0, cfg.vent_time_constant_ms, dt),
    }
    .clamp(0.0, RELIEF_PSI);

    let mut pending = if valve != state.valve {
        cfg.actuation_delay_ms
    } else {
        state.actuation_pending_ms
    };
    pending = (pending - dt).max(0.0);

    let (contraction_mm, force_n) = if pending > 0.0 {
        (state.contraction_mm, state.force_n)
    } else {
        equilibrium(pressure, load_n, cfg)
    };

    PamState {
        pressure_psi: pressure,
        contraction_mm,
        force_n,
        valve,
        actuation_pending_ms: pending,
    }
}

/// One characterization sweep at fixed pressure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForceCurve {
    pub pressure_psi: f64,
    /// `(contraction_mm, force_n)` from full length to free contraction.
    pub points: Vec<(f64, f64)>,
}

/// Emulates the unloading ramp of a motorized test stand at each pressure:
/// contraction swept from 0 to x_max, force recorded at `points` steps.
pub fn characterize(cfg: &PamConfig, pressures: &[f64], points: usize) -> Result<Vec<ForceCurve>, PamError> {
    let points = points.max(2);
    pressures
        .iter()
        .map(|&p| {
            let x_max = max_contraction(p, cfg)?;
            let pts = (0..points)
                .map(|i| {
                    let x = x_max * i as f64 / (points - 1) as f64;
                    static_force(p, x, cfg).map(|f| (x, f))
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(ForceCurve {
                pressure_psi: p,
                points: pts,
            })
        })
        .collect()
}

/// 10, 20, …, 80 psi.
pub fn default_characterization_pressures() -> Vec<f64> {
    (1..=8).map(|k| 10.0 * k as f64).collect()
}

pub fn write_characterization_csv<W: Write>(curves: &[ForceCurve], mut out: W) -> std::io::Result<()> {
    writeln!(out, "pressure_psi,contraction_mm,force_n")?;
    for c in curves {
        for (x, f) in &c.points {
            writeln!(out, "{},{},{}", c.pressure_psi, x, f)?;
        }
    }
    Ok(())
}
