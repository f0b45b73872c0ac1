//! Closed-loop multi-step simulation and the experiment protocols built on it.

pub mod bench;
pub mod falls;
pub mod map;
pub mod patient;
pub mod trace;
mod walk;

pub use falls::{detect_fall, FallMonitor, FallReason, FallThresholds};
pub use patient::{PatientModel, StepProfiles, SwingPlant, VelocityProfile};
pub use trace::{write_trace, TickRecord};
pub use walk::{run_step, run_walk, PlannerTick, StepOutcome, WalkResult};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gait::{build_swing_path, GaitError, NominalGait, SwingPath, DEFAULT_KNOTS};
use crate::guides::{GuideError, SwingGains, VelocityLimits, DEFAULT_MAX_FRACTION, DEFAULT_MIN_FRACTION};
use crate::lip::{PendulumParams, SupportPolygon};
use crate::replanner::PlannerSettings;
use crate::stabilizer::{DcmGains, StabilizerError, DEFAULT_WINDUP_BOUND};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Gait(#[from] GaitError),
    #[error(transparent)]
    Guide(#[from] GuideError),
    #[error(transparent)]
    Stabilizer(#[from] StabilizerError),
    #[error("invalid simulation setup: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Time rescaling of the nominal gait.
    #[serde(rename = "tr")]
    TimeRescaling,
    /// Online planning (Problem 1 every tick).
    #[serde(rename = "op")]
    OnlinePlanning,
}

impl Strategy {
    pub fn label(&self) -> &'static str {
        match self {
            Strategy::TimeRescaling => "tr",
            Strategy::OnlinePlanning => "op",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tr" => Some(Strategy::TimeRescaling),
            "op" => Some(Strategy::OnlinePlanning),
            _ => None,
        }
    }
}

/// Everything a simulation run depends on besides the gait and the wearer.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub params: PendulumParams,
    pub foot: SupportPolygon,
    /// Control tick, s.
    pub dt: f64,
    pub planner: PlannerSettings,
    pub dcm_gains: DcmGains,
    pub windup_bound: f64,
    /// Time constant of the first-order CoP actuation lag, s (0 = none).
    pub actuation_lag: f64,
    pub swing_gains: SwingGains,
    /// Target-velocity saturation as fractions of the nominal path rate.
    pub velocity_min_fraction: f64,
    pub velocity_max_fraction: f64,
    /// Optional low-pass time constant on the estimated target velocity, s.
    pub velocity_filter: Option<f64>,
    pub swing_inertia: f64,
    pub falls: FallThresholds,
    /// Below this planned remaining time the last plan is played out
    /// instead of replanning.
    pub lock_time: f64,
    /// Commit to the current plan once the feasible interval around `T^opt`
    /// is narrower than this, s.
    pub lock_width: f64,
    /// Online planning first plans inside the foot shrunk by this fraction of
    /// its half extents, leaving the stabilizer authority; the full foot is
    /// the fallback when the shrunk problem is infeasible.
    pub planning_margin: f64,
    /// Single-support time limit, s.
    pub max_step_time: f64,
    /// Keep per-tick records.
    pub record_trace: bool,
    /// Keep the boundary conditions of every planner call.
    pub record_planner: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            params: PendulumParams::default(),
            foot: SupportPolygon::default(),
            dt: 1e-3,
            planner: PlannerSettings::default(),
            dcm_gains: DcmGains::default(),
            windup_bound: DEFAULT_WINDUP_BOUND,
            actuation_lag: 0.0,
            swing_gains: SwingGains::default(),
            velocity_min_fraction: DEFAULT_MIN_FRACTION,
            velocity_max_fraction: DEFAULT_MAX_FRACTION,
            velocity_filter: None,
            swing_inertia: 1.0,
            falls: FallThresholds::default(),
            lock_time: 0.1,
            lock_width: 0.02,
            planning_margin: 0.1,
            max_step_time: 20.0,
            record_trace: false,
            record_planner: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::Invalid(m.to_string()));
        if !(self.dt > 0.0 && self.dt <= 0.01) {
            return bad("dt must be in (0, 0.01] s");
        }
        if !(0.0..=0.05).contains(&self.actuation_lag) {
            return bad("actuation lag must be in [0, 0.05] s");
        }
        if !(self.windup_bound > 0.0) {
            return bad("windup bound must be positive");
        }
        if !(self.swing_inertia > 0.0 && self.swing_inertia.is_finite()) {
            return bad("swing inertia must be positive");
        }
        if !(self.falls.saturation_timeout > 0.0 && self.falls.terminal_error > 0.0) {
            return bad("fall thresholds must be positive");
        }
        if !(self.lock_time > self.planner.t_min && self.lock_time < self.planner.t_max) {
            return bad("lock time must lie inside the planner search window");
        }
        if !(self.lock_width >= 0.0) {
            return bad("lock width must be non-negative");
        }
        if !(0.0..1.0).contains(&self.planning_margin) {
            return bad("planning margin must lie in [0, 1)");
        }
        if !(self.max_step_time > 0.0) {
            return bad("max step time must be positive");
        }
        if let Some(tc) = self.velocity_filter {
            if !(tc > 0.0) {
                return bad("velocity filter time constant must be positive");
            }
        }
        self.planner.validate().map_err(|e| SimError::Invalid(e.to_string()))?;
        Ok(())
    }
}

/// A gait prepared for simulation: its swing path and velocity limits.
#[derive(Debug, Clone)]
pub struct PreparedGait {
    pub gait: NominalGait,
    pub path: SwingPath,
    pub limits: VelocityLimits,
}

impl PreparedGait {
    pub fn new(gait: NominalGait, config: &SimConfig) -> Result<Self, SimError> {
        if !gait.matches_params(&config.params) {
            return Err(SimError::Invalid(format!(
                "gait CoM height {} does not match pendulum height {}",
                gait.com_height(),
                config.params.com_height()
            )));
        }
        if gait.double_support().is_none() {
            return Err(SimError::Invalid(
                "gait needs a double-support phase to chain steps".into(),
            ));
        }
        let path = build_swing_path(&gait, DEFAULT_KNOTS)?;
        let limits = VelocityLimits::for_path(&path, config.velocity_min_fraction, config.velocity_max_fraction)?;
        Ok(Self { gait, path, limits })
    }

    pub fn single_support_duration(&self) -> f64 {
        self.gait.single_support().duration()
    }
}
