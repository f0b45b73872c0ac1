//! Fall classification.

use serde::Serialize;

use crate::lip::{SupportPolygon, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FallReason {
    None,
    CopSaturationTimeout,
    TerminalError,
    PlannerInfeasible,
}

impl FallReason {
    pub fn label(&self) -> &'static str {
        match self {
            FallReason::None => "none",
            FallReason::CopSaturationTimeout => "cop-saturation-timeout",
            FallReason::TerminalError => "terminal-error",
            FallReason::PlannerInfeasible => "planner-infeasible",
        }
    }

    pub fn is_fall(&self) -> bool {
        !matches!(self, FallReason::None)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FallThresholds {
    /// Continuous time the pre-clamp command may stay outside the polygon.
    pub saturation_timeout: f64,
    /// Largest admissible end-of-step CoM position error, m.
    pub terminal_error: f64,
}

impl Default for FallThresholds {
    fn default() -> Self {
        Self {
            saturation_timeout: 0.2,
            terminal_error: 0.08,
        }
    }
}

/// Online tracker of the saturation window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FallMonitor {
    thresholds: FallThresholds,
    outside_since: Option<f64>,
}

impl FallMonitor {
    pub fn new(thresholds: FallThresholds) -> Self {
        Self {
            thresholds,
            outside_since: None,
        }
    }

    /// Feed one tick; returns true once the command has been outside the
    /// polygon continuously for the timeout. A tick at time `t` covers
    /// `[t, t + dt)`.
    pub fn observe(&mut self, t: f64, dt: f64, command: &Vec2, polygon: &SupportPolygon) -> bool {
        if polygon.contains(command) {
            self.outside_since = None;
            return false;
        }
        let start = *self.outside_since.get_or_insert(t);
        // Small slack so that accumulated tick times hit the threshold.
        t + dt - start >= self.thresholds.saturation_timeout - 1e-9
    }

    pub fn terminal(&self, error: f64) -> bool {
        error > self.thresholds.terminal_error
    }
}

/// Classify a completed single-support step from its commanded CoP history
/// (`(t, u^d)` pairs before clamping), the end-of-step error and whether the
/// planner failed. Priority: planner failure, saturation, terminal error.
pub fn detect_fall(
    commands: &[(f64, Vec2)],
    dt: f64,
    polygon: &SupportPolygon,
    terminal_error: f64,
    planner_failed: bool,
    thresholds: &FallThresholds,
) -> FallReason {
    if planner_failed {
        return FallReason::PlannerInfeasible;
    }
    let mut monitor = FallMonitor::new(*thresholds);
    if commands.iter().any(|(t, u)| monitor.observe(*t, dt, u, polygon)) {
        return FallReason::CopSaturationTimeout;
    }
    if monitor.terminal(terminal_error) {
        return FallReason::TerminalError;
    }
    FallReason::None
}
