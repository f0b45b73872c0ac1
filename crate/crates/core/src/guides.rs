//! Virtual guides: swing-leg PD control constrained to the path, and the
//! estimate of the velocity the wearer wants to move along it.

use thiserror::Error;

use crate::gait::{JointVec, SwingPath};

#[derive(Debug, Error, PartialEq)]
pub enum GuideError {
    #[error("gain diagonals must be strictly positive and finite")]
    NonPositiveGain,
    #[error("velocity limits must satisfy 0 < min < max, got [{0}, {1}]")]
    InvalidLimits(f64, f64),
    #[error("filter time constant must be positive and finite, got {0}")]
    InvalidTimeConstant(f64),
}

/// Diagonal PD gains of the swing leg.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwingGains {
    kp: JointVec,
    kd: JointVec,
}

impl SwingGains {
    pub fn new(kp: JointVec, kd: JointVec) -> Result<Self, GuideError> {
        let ok = |v: &JointVec| v.iter().all(|x| x.is_finite() && *x > 0.0);
        if !ok(&kp) || !ok(&kd) {
            return Err(GuideError::NonPositiveGain);
        }
        Ok(Self { kp, kd })
    }

    pub fn uniform(kp: f64, kd: f64) -> Result<Self, GuideError> {
        Self::new(JointVec::repeat(kp), JointVec::repeat(kd))
    }

    pub fn kp(&self) -> &JointVec {
        &self.kp
    }

    pub fn kd(&self) -> &JointVec {
        &self.kd
    }
}

impl Default for SwingGains {
    fn default() -> Self {
        Self {
            kp: JointVec::repeat(400.0),
            kd: JointVec::repeat(40.0),
        }
    }
}

/// Measured swing-leg joint state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwingJointState {
    pub q: JointVec,
    pub qd: JointVec,
}

/// Saturation bounds of the target velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityLimits {
    min: f64,
    max: f64,
}

impl VelocityLimits {
    pub fn new(min: f64, max: f64) -> Result<Self, GuideError> {
        if !(min > 0.0 && max > min && max.is_finite()) {
            return Err(GuideError::InvalidLimits(min, max));
        }
        Ok(Self { min, max })
    }

    /// Fractions of the nominal mean path speed `L_max / T_f`.
    pub fn for_path(path: &SwingPath, min_fraction: f64, max_fraction: f64) -> Result<Self, GuideError> {
        let rate = path.nominal_rate();
        Self::new(min_fraction * rate, max_fraction * rate)
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn saturate(&self, v: f64) -> f64 {
        v.clamp(self.min, self.max)
    }
}

pub const DEFAULT_MIN_FRACTION: f64 = 0.1;
pub const DEFAULT_MAX_FRACTION: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetVelocity {
    /// Unsaturated estimate.
    pub raw: f64,
    /// Estimate clamped to the velocity limits.
    pub saturated: f64,
}

/// `τ = K_p (P(σ) − q) + K_d (T(σ) σ̇ − q̇)`.
pub fn swing_torque(
    path: &SwingPath,
    sigma: f64,
    sigma_rate: f64,
    state: &SwingJointState,
    gains: &SwingGains,
) -> JointVec {
    let p = path.eval(sigma);
    gains.kp.component_mul(&(p.position - state.q)) + gains.kd.component_mul(&(p.tangent * sigma_rate - state.qd))
}

/// Path velocity that nullifies the guide torque along the tangent:
/// `σ̇ᵗ = Tᵀ [K_p (q − P) + K_d q̇] / (Tᵀ K_d T)`.
pub fn target_velocity(
    path: &SwingPath,
    sigma: f64,
    state: &SwingJointState,
    gains: &SwingGains,
    limits: &VelocityLimits,
) -> TargetVelocity {
    let p = path.eval(sigma);
    let t = p.tangent;
    let num = t.dot(&(gains.kp.component_mul(&(state.q - p.position)) + gains.kd.component_mul(&state.qd)));
    let den = t.dot(&gains.kd.component_mul(&t));
    let raw = num / den;
    TargetVelocity {
        raw,
        saturated: limits.saturate(raw),
    }
}

/// Optional first-order low-pass filter on the target velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityFilter {
    time_constant: f64,
    state: Option<f64>,
}

impl VelocityFilter {
    pub fn new(time_constant: f64) -> Result<Self, GuideError> {
        if !(time_constant > 0.0 && time_constant.is_finite()) {
            return Err(GuideError::InvalidTimeConstant(time_constant));
        }
        Ok(Self {
            time_constant,
            state: None,
        })
    }

    /// Exact discretization of `τ ẏ = x − y` with `x` held over `dt`.
    pub fn update(&mut self, input: f64, dt: f64) -> f64 {
        let y = match self.state {
            None => input,
            Some(y) => {
                let a = (-dt / self.time_constant).exp();
                a * y + (1.0 - a) * input
            }
        };
        self.state = Some(y);
        y
    }

    pub fn reset(&mut self) {
        self.state = None;
    }
}
