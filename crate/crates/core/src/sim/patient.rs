//! Wearer models and the surrogate swing-leg plant.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::gait::JointVec;
use crate::guides::SwingJointState;

/// Desired path velocity as a fraction of the nominal rate, as a function of
/// time since the start of single support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VelocityProfile {
    Nominal,
    Constant {
        fraction: f64,
    },
    /// Square wave starting at `onset`: `magnitude` for `duration` seconds,
    /// then nominal for `duration` seconds, repeated. Nominal before `onset`.
    Square {
        magnitude: f64,
        duration: f64,
        onset: f64,
    },
}

impl VelocityProfile {
    pub fn square(magnitude: f64, duration: f64) -> Self {
        VelocityProfile::Square {
            magnitude,
            duration,
            onset: 0.0,
        }
    }

    /// Fraction of the nominal rate at step-local time `t`.
    pub fn fraction_at(&self, t: f64) -> f64 {
        match *self {
            VelocityProfile::Nominal => 1.0,
            VelocityProfile::Constant { fraction } => fraction,
            VelocityProfile::Square {
                magnitude,
                duration,
                onset,
            } => {
                if t >= onset && duration > 0.0 && (((t - onset) / duration).floor() as u64).is_multiple_of(2) {
                    magnitude
                } else {
                    1.0
                }
            }
        }
    }

    pub fn is_valid(&self) -> bool {
        match *self {
            VelocityProfile::Nominal => true,
            VelocityProfile::Constant { fraction } => fraction > 0.0 && fraction.is_finite(),
            VelocityProfile::Square {
                magnitude,
                duration,
                onset,
            } => magnitude > 0.0 && magnitude.is_finite() && duration >= 0.0 && onset >= 0.0,
        }
    }

    /// Whether the abscissa imposed by the profile overshoots `L_max` before
    /// the square wave ends: `m·d > T_ss` (in nominal-rate units).
    pub fn overshoots(&self, single_support_duration: f64) -> bool {
        match *self {
            VelocityProfile::Square {
                magnitude,
                duration,
                onset,
            } => onset + magnitude * duration > single_support_duration,
            VelocityProfile::Constant { .. } | VelocityProfile::Nominal => false,
        }
    }
}

/// Compact text form: `nominal`, `constant:F`, `square:M,D` or
/// `square:M,D,ONSET`.
impl FromStr for VelocityProfile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (kind, args) = s.split_once(':').unwrap_or((s, ""));
        let nums = if args.trim().is_empty() {
            Vec::new()
        } else {
            args.split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|e| format!("bad number '{v}' in profile '{s}': {e}"))
                })
                .collect::<Result<Vec<_>, _>>()?
        };
        let p = match (kind.trim(), nums.as_slice()) {
            ("nominal", []) => VelocityProfile::Nominal,
            ("constant", [f]) => VelocityProfile::Constant { fraction: *f },
            ("square", [m, d]) => VelocityProfile::square(*m, *d),
            ("square", [m, d, o]) => VelocityProfile::Square {
                magnitude: *m,
                duration: *d,
                onset: *o,
            },
            _ => {
                return Err(format!(
                    "unrecognized profile '{s}' (expected nominal, constant:F, square:M,D or square:M,D,ONSET)"
                ))
            }
        };
        if p.is_valid() {
            Ok(p)
        } else {
            Err(format!("profile '{s}' has non-positive or non-finite values"))
        }
    }
}

impl fmt::Display for VelocityProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            VelocityProfile::Nominal => write!(f, "nominal"),
            VelocityProfile::Constant { fraction } => write!(f, "constant:{fraction}"),
            VelocityProfile::Square {
                magnitude,
                duration,
                onset: 0.0,
            } => {
                write!(f, "square:{magnitude},{duration}")
            }
            VelocityProfile::Square {
                magnitude,
                duration,
                onset,
            } => write!(f, "square:{magnitude},{duration},{onset}"),
        }
    }
}

/// Per-step velocity profiles: step `k` uses `profiles[k % len]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepProfiles(pub Vec<VelocityProfile>);

impl StepProfiles {
    pub fn uniform(p: VelocityProfile) -> Self {
        Self(vec![p])
    }

    pub fn is_valid(&self) -> bool {
        self.0.iter().all(VelocityProfile::is_valid)
    }

    pub fn for_step(&self, k: usize) -> VelocityProfile {
        if self.0.is_empty() {
            VelocityProfile::Nominal
        } else {
            self.0[k % self.0.len()]
        }
    }
}

/// Profiles separated by `/`, cycled over steps.
impl FromStr for StepProfiles {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.split('/')
            .map(str::parse)
            .collect::<Result<Vec<_>, _>>()
            .map(StepProfiles)
    }
}

impl fmt::Display for StepProfiles {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, "/")?;
            }
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

/// How the wearer expresses the desired velocity.
#[derive(Debug, Clone, PartialEq)]
pub enum PatientModel {
    /// The target velocity is imposed directly, bypassing the guides.
    Scripted(StepProfiles),
    /// The wearer pushes the swing leg along the path tangent,
    /// `τ_u = α T(σ) (v_des − σ̇)`, and the guides estimate the intent.
    TangentTorque { profiles: StepProfiles, stiffness: f64 },
}

impl PatientModel {
    pub fn profiles(&self) -> &StepProfiles {
        match self {
            PatientModel::Scripted(p) => p,
            PatientModel::TangentTorque { profiles, .. } => profiles,
        }
    }

    pub fn is_valid(&self) -> bool {
        let ok = self.profiles().is_valid();
        match self {
            PatientModel::Scripted(_) => ok,
            PatientModel::TangentTorque { stiffness, .. } => ok && *stiffness >= 0.0 && stiffness.is_finite(),
        }
    }
}

/// Decoupled swing-leg surrogate `J q̈ = τ`, integrated with semi-implicit Euler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwingPlant {
    pub inertia: JointVec,
    pub state: SwingJointState,
}

impl SwingPlant {
    pub fn new(inertia: JointVec, state: SwingJointState) -> Option<Self> {
        inertia
            .iter()
            .all(|j| *j > 0.0 && j.is_finite())
            .then_some(Self { inertia, state })
    }

    pub fn step(&mut self, torque: &JointVec, dt: f64) {
        self.state.qd += torque.component_div(&self.inertia) * dt;
        self.state.q += self.state.qd * dt;
    }
}
