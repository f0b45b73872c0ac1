//! DCM admittance feedback:
//! `u^d = u* − (1 + k_p/ω)(ξ* − ξ) − (k_i/ω) ∫(ξ* − ξ) + k_d(ξ̇* − ξ̇)`,
//! clamped to the support polygon with conditional anti-windup.

use thiserror::Error;

use crate::lip::{LipState, PendulumParams, SupportPolygon, Vec2};

#[derive(Debug, Error, PartialEq)]
pub enum StabilizerError {
    #[error("gain diagonals must be strictly positive and finite")]
    NonPositiveGain,
    #[error("windup bound must be positive, got {0}")]
    InvalidWindupBound(f64),
}

/// Diagonal gains, stored as the diagonals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcmGains {
    kp: Vec2,
    ki: Vec2,
    kd: Vec2,
}

impl DcmGains {
    pub fn new(kp: Vec2, ki: Vec2, kd: Vec2) -> Result<Self, StabilizerError> {
        let ok = |v: &Vec2| v.iter().all(|x| x.is_finite() && *x > 0.0);
        if !(ok(&kp) && ok(&ki) && ok(&kd)) {
            return Err(StabilizerError::NonPositiveGain);
        }
        Ok(Self { kp, ki, kd })
    }

    pub fn uniform(kp: f64, ki: f64, kd: f64) -> Result<Self, StabilizerError> {
        Self::new(Vec2::repeat(kp), Vec2::repeat(ki), Vec2::repeat(kd))
    }

    pub fn kp(&self) -> Vec2 {
        self.kp
    }

    pub fn ki(&self) -> Vec2 {
        self.ki
    }

    pub fn kd(&self) -> Vec2 {
        self.kd
    }
}

impl Default for DcmGains {
    fn default() -> Self {
        Self {
            kp: Vec2::repeat(2.0),
            ki: Vec2::repeat(0.5),
            kd: Vec2::repeat(0.2),
        }
    }
}

pub const DEFAULT_WINDUP_BOUND: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilizerState {
    /// Running `∫(ξ* − ξ)`, m·s.
    pub integral: Vec2,
    /// Whether the last output was clamped.
    pub saturated: bool,
    /// CoP actually applied on the previous tick, used for `ξ̇ = ω(ξ − u)`.
    pub applied: Option<Vec2>,
    windup_bound: f64,
}

impl StabilizerState {
    pub fn new(windup_bound: f64) -> Result<Self, StabilizerError> {
        if !(windup_bound > 0.0) {
            return Err(StabilizerError::InvalidWindupBound(windup_bound));
        }
        Ok(Self {
            integral: Vec2::zeros(),
            saturated: false,
            applied: None,
            windup_bound,
        })
    }

    pub fn windup_bound(&self) -> f64 {
        self.windup_bound
    }

    /// Record the CoP the plant applied this tick.
    pub fn record_applied(&mut self, cop: Vec2) {
        self.applied = Some(cop);
    }

    /// Re-express the integral after a change of support frame that mirrors
    /// the lateral axis.
    pub fn mirror_lateral(&mut self) {
        self.integral[1] = -self.integral[1];
        if let Some(u) = self.applied.as_mut() {
            u[1] = -u[1];
        }
    }
}

impl Default for StabilizerState {
    fn default() -> Self {
        Self::new(DEFAULT_WINDUP_BOUND).expect("valid default bound")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilizerOutput {
    /// Eq. 7 before clamping.
    pub raw: Vec2,
    /// Command clamped to the polygon.
    pub command: Vec2,
    pub saturated: bool,
}

/// Componentwise clamp; the flag reports whether the point moved.
pub fn clamp_to_polygon(u: &Vec2, polygon: &SupportPolygon) -> (Vec2, bool) {
    let c = polygon.clamp(u);
    (c, c != *u)
}

/// One tick of the stabilizer. The integral is advanced by explicit Euler
/// over `dt` unless the output saturates.
#[allow(clippy::too_many_arguments)]
pub fn dcm_control(
    x: &LipState,
    x_ref: &LipState,
    u_ref: &Vec2,
    state: &mut StabilizerState,
    gains: &DcmGains,
    params: &PendulumParams,
    polygon: &SupportPolygon,
    dt: f64,
) -> StabilizerOutput {
    let w = params.omega();
    let xi = x.to_dcm(params).dcm;
    let xi_ref = x_ref.to_dcm(params).dcm;
    let applied = state.applied.unwrap_or(*u_ref);
    let xi_rate = (xi - applied) * w;
    let xi_ref_rate = (xi_ref - u_ref) * w;
    let err = xi_ref - xi;
    let raw =
        u_ref - (Vec2::repeat(1.0) + gains.kp / w).component_mul(&err) - (gains.ki / w).component_mul(&state.integral)
            + gains.kd.component_mul(&(xi_ref_rate - xi_rate));
    let (command, saturated) = clamp_to_polygon(&raw, polygon);
    if !saturated {
        state.integral += err * dt;
        let n = state.integral.norm();
        if n > state.windup_bound {
            state.integral *= state.windup_bound / n;
        }
    }
    state.saturated = saturated;
    StabilizerOutput {
        raw,
        command,
        saturated,
    }
}
