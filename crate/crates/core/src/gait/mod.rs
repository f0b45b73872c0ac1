//! Nominal gait: one canonical step (single support followed by double
//! support) sampled on a uniform time grid, expressed in the frame of the
//! single-support foot.
//!
//! Steps are chained by re-expressing states in the next foot frame with the
//! lateral axis mirrored, so a single canonical step describes a periodic
//! walk.

mod io;
mod path;
mod synth;

pub use io::{load_gait, read_gait, save_gait, write_gait};
pub use path::{build_swing_path, PathPoint, SwingPath, DEFAULT_KNOTS, DEFAULT_MIN_SPEED};
pub use synth::{generate_synthetic_gait, GaitDesign};

use nalgebra::{SVector, Vector3};
use thiserror::Error;

use crate::interp;
use crate::lip::{LipState, PendulumParams, SupportPolygon, Vec2};

pub const N_JOINTS: usize = 12;
pub const LEG_JOINTS: usize = 6;
pub type JointVec = SVector<f64, LEG_JOINTS>;

/// Minimum number of samples in the single-support phase.
pub const MIN_SAMPLES_PER_STEP: usize = 100;

#[derive(Debug, Error)]
pub enum GaitError {
    #[error("row {row}: {msg}")]
    Parse { row: usize, msg: String },
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("gait file is empty")]
    Empty,
    #[error("row {row}: time grid is not uniform")]
    NonUniform { row: usize },
    #[error("row {row}: time is not increasing")]
    NonMonotone { row: usize },
    #[error("invalid gait: {0}")]
    Invalid(String),
    #[error("infeasible gait: {0}")]
    Infeasible(String),
    #[error("degenerate swing path: joint speed {speed:.3e} below threshold at t = {t:.4} s")]
    DegeneratePath { t: f64, speed: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Contact phase of a sample. The side names the support foot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    SingleLeft,
    SingleRight,
    Double,
}

impl Phase {
    pub fn label(&self) -> &'static str {
        match self {
            Phase::SingleLeft => "SS_LEFT",
            Phase::SingleRight => "SS_RIGHT",
            Phase::Double => "DS",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "SS_LEFT" => Some(Phase::SingleLeft),
            "SS_RIGHT" => Some(Phase::SingleRight),
            "DS" => Some(Phase::Double),
            _ => None,
        }
    }

    pub fn is_single(&self) -> bool {
        !matches!(self, Phase::Double)
    }

    pub fn mirrored(&self) -> Self {
        match self {
            Phase::SingleLeft => Phase::SingleRight,
            Phase::SingleRight => Phase::SingleLeft,
            Phase::Double => Phase::Double,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaitSample {
    pub t: f64,
    /// Left leg q1..q6 then right leg q7..q12, each ordered
    /// hip yaw, hip roll, hip pitch, knee, ankle pitch, ankle roll.
    pub q: [f64; N_JOINTS],
    pub com: Vector3<f64>,
    pub cop: Vec2,
    pub phase: Phase,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSpan {
    pub start: f64,
    pub end: f64,
    pub kind: Phase,
    /// Sample indices covered, inclusive.
    pub first: usize,
    pub last: usize,
}

impl PhaseSpan {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// Joint indices (within a leg) that flip sign under a sagittal mirror.
const LATERAL_JOINTS: [usize; 3] = [0, 1, 5];

#[derive(Debug, Clone, PartialEq)]
pub struct NominalGait {
    sample_period: f64,
    samples: Vec<GaitSample>,
    single: PhaseSpan,
    double: Option<PhaseSpan>,
    com_vel: Vec<Vec2>,
    com_acc: Vec<Vec2>,
}

impl NominalGait {
    /// Validate samples and build the gait.
    ///
    /// Requires a uniform, increasing time grid starting at zero, a constant
    /// CoM height and the phase layout single support then (optionally)
    /// double support.
    pub fn new(samples: Vec<GaitSample>) -> Result<Self, GaitError> {
        if samples.is_empty() {
            return Err(GaitError::Empty);
        }
        if samples.len() < 2 {
            return Err(GaitError::Invalid("need at least two samples".into()));
        }
        let h = samples[1].t - samples[0].t;
        if !(h > 0.0) {
            return Err(GaitError::NonMonotone { row: 2 });
        }
        if samples[0].t.abs() > 1e-9 {
            return Err(GaitError::Invalid("time grid must start at t = 0".into()));
        }
        for (i, w) in samples.windows(2).enumerate() {
            let dt = w[1].t - w[0].t;
            if !(dt > 0.0) {
                return Err(GaitError::NonMonotone { row: i + 2 });
            }
            if (dt - h).abs() > 1e-6 * h.max(1e-3) {
                return Err(GaitError::NonUniform { row: i + 2 });
            }
        }
        for (i, s) in samples.iter().enumerate() {
            let finite = s.q.iter().all(|v| v.is_finite())
                && s.com.iter().all(|v| v.is_finite())
                && s.cop.iter().all(|v| v.is_finite());
            if !finite {
                return Err(GaitError::Parse {
                    row: i + 1,
                    msg: "non-finite value".into(),
                });
            }
        }
        let cz = samples[0].com[2];
        if samples.iter().any(|s| (s.com[2] - cz).abs() > 1e-6) {
            return Err(GaitError::Invalid("CoM height must be constant".into()));
        }

        let n = samples.len();
        let ss_len = samples.iter().take_while(|s| s.phase.is_single()).count();
        if ss_len == 0 {
            return Err(GaitError::Invalid("gait must start with single support".into()));
        }
        let side = samples[0].phase;
        if samples[..ss_len].iter().any(|s| s.phase != side) {
            return Err(GaitError::Invalid("single support must keep one support foot".into()));
        }
        if samples[ss_len..].iter().any(|s| s.phase != Phase::Double) {
            return Err(GaitError::Invalid(
                "expected one single-support phase followed by double support".into(),
            ));
        }
        if ss_len < MIN_SAMPLES_PER_STEP {
            return Err(GaitError::Invalid(format!(
                "single support has {ss_len} samples, need at least {MIN_SAMPLES_PER_STEP}"
            )));
        }
        let single = PhaseSpan {
            start: samples[0].t,
            end: samples[ss_len - 1].t,
            kind: side,
            first: 0,
            last: ss_len - 1,
        };
        let double = (ss_len < n).then(|| PhaseSpan {
            start: samples[ss_len - 1].t,
            end: samples[n - 1].t,
            kind: Phase::Double,
            first: ss_len - 1,
            last: n - 1,
        });

        let com: Vec<Vec2> = samples.iter().map(|s| Vec2::new(s.com[0], s.com[1])).collect();
        let com_vel = interp::derivative(&com, h);
        let com_acc = interp::derivative(&com_vel, h);
        Ok(Self {
            sample_period: h,
            samples,
            single,
            double,
            com_vel,
            com_acc,
        })
    }

    pub fn samples(&self) -> &[GaitSample] {
        &self.samples
    }

    pub fn sample_period(&self) -> f64 {
        self.sample_period
    }

    pub fn duration(&self) -> f64 {
        self.samples.last().map(|s| s.t).unwrap_or(0.0)
    }

    pub fn single_support(&self) -> PhaseSpan {
        self.single
    }

    pub fn double_support(&self) -> Option<PhaseSpan> {
        self.double
    }

    pub fn com_height(&self) -> f64 {
        self.samples[0].com[2]
    }

    /// Joint index range of the swing leg during single support.
    pub fn swing_joint_offset(&self) -> usize {
        match self.single.kind {
            Phase::SingleRight => 0,
            _ => LEG_JOINTS,
        }
    }

    pub fn swing_joints(&self, index: usize) -> JointVec {
        let o = self.swing_joint_offset();
        JointVec::from_iterator(self.samples[index].q[o..o + LEG_JOINTS].iter().copied())
    }

    pub fn state_at_index(&self, index: usize) -> LipState {
        let s = &self.samples[index];
        LipState::new(Vec2::new(s.com[0], s.com[1]), self.com_vel[index])
    }

    pub fn initial_state(&self) -> LipState {
        self.state_at_index(0)
    }

    /// CoM state at the end of single support: the replanning target.
    pub fn final_state(&self) -> LipState {
        self.state_at_index(self.single.last)
    }

    /// CoM state at the end of the full step.
    pub fn terminal_state(&self) -> LipState {
        self.state_at_index(self.samples.len() - 1)
    }

    /// Position of the next support foot in this step's frame, recovered from
    /// periodicity of the CoM channel (`x₀ = mirror(x_end)`).
    pub fn next_foot_offset(&self) -> Vec2 {
        let c0 = self.samples[0].com;
        let c1 = self.samples[self.samples.len() - 1].com;
        Vec2::new(c1[0] - c0[0], c1[1] + c0[1])
    }

    /// CoM position, velocity and acceleration at time `t` (clamped to the
    /// gait duration).
    pub fn com_at(&self, t: f64) -> (Vec2, Vec2, Vec2) {
        let t = t.clamp(0.0, self.duration());
        let n = self.samples.len();
        let (i, u) = interp::locate_uniform(t, 0.0, self.sample_period, n);
        let (w, dw) = interp::hermite_weights(u, self.sample_period);
        let c0 = Vec2::new(self.samples[i].com[0], self.samples[i].com[1]);
        let c1 = Vec2::new(self.samples[i + 1].com[0], self.samples[i + 1].com[1]);
        let (v0, v1) = (self.com_vel[i], self.com_vel[i + 1]);
        let pos = c0 * w[0] + v0 * w[1] + c1 * w[2] + v1 * w[3];
        let vel = c0 * dw[0] + v0 * dw[1] + c1 * dw[2] + v1 * dw[3];
        let acc = self.com_acc[i] * (1.0 - u) + self.com_acc[i + 1] * u;
        (pos, vel, acc)
    }

    /// Linearly interpolated reference CoP at time `t`.
    pub fn cop_at(&self, t: f64) -> Vec2 {
        let t = t.clamp(0.0, self.duration());
        let (i, u) = interp::locate_uniform(t, 0.0, self.sample_period, self.samples.len());
        self.samples[i].cop * (1.0 - u) + self.samples[i + 1].cop * u
    }

    /// Support region active at sample `index`: the foot polygon in single
    /// support, the bounding box of both feet in double support.
    pub fn active_polygon(&self, index: usize, foot: &SupportPolygon) -> SupportPolygon {
        if self.samples[index].phase.is_single() {
            *foot
        } else {
            double_support_polygon(foot, &self.next_foot_offset())
        }
    }

    /// Smallest relative CoP margin over all samples: `1 − max |u − center| / half_extent`.
    /// Positive means the CoP reference lies strictly inside the active polygon.
    pub fn cop_margin(&self, foot: &SupportPolygon) -> f64 {
        let mut worst: f64 = 1.0;
        for (i, s) in self.samples.iter().enumerate() {
            let poly = self.active_polygon(i, foot);
            let rel = (s.cop - poly.center()).abs().component_div(&poly.half_extents());
            worst = worst.min(1.0 - rel.max());
        }
        worst
    }

    /// The same gait mirrored about the sagittal plane: legs swapped, lateral
    /// joints, CoM and CoP lateral coordinates negated.
    pub fn mirrored(&self) -> Self {
        let samples = self
            .samples
            .iter()
            .map(|s| {
                let mut q = [0.0; N_JOINTS];
                for j in 0..LEG_JOINTS {
                    let flip = if LATERAL_JOINTS.contains(&j) { -1.0 } else { 1.0 };
                    q[j] = flip * s.q[j + LEG_JOINTS];
                    q[j + LEG_JOINTS] = flip * s.q[j];
                }
                GaitSample {
                    t: s.t,
                    q,
                    com: Vector3::new(s.com[0], -s.com[1], s.com[2]),
                    cop: Vec2::new(s.cop[0], -s.cop[1]),
                    phase: s.phase.mirrored(),
                }
            })
            .collect();
        Self::new(samples).expect("mirroring preserves validity")
    }

    /// Consistency check of the stored CoM height against pendulum parameters.
    pub fn matches_params(&self, params: &PendulumParams) -> bool {
        (self.com_height() - params.com_height()).abs() < 1e-6
    }
}

/// Bounding box of the current and next foot rectangles.
pub fn double_support_polygon(foot: &SupportPolygon, next_foot: &Vec2) -> SupportPolygon {
    let lo = foot.lower().inf(&(foot.lower() + next_foot));
    let hi = foot.upper().sup(&(foot.upper() + next_foot));
    SupportPolygon::from_bounds(lo, hi).expect("non-empty bounding box")
}

/// Map a state from the current support frame into the next one
/// (origin on the next foot, lateral axis mirrored).
pub fn to_next_frame(state: &LipState, next_foot: &Vec2) -> LipState {
    LipState::new(
        Vec2::new(state.com[0] - next_foot[0], next_foot[1] - state.com[1]),
        Vec2::new(state.com_vel[0], -state.com_vel[1]),
    )
}

/// Inverse of [`to_next_frame`].
pub fn from_next_frame(state: &LipState, next_foot: &Vec2) -> LipState {
    LipState::new(
        Vec2::new(state.com[0] + next_foot[0], next_foot[1] - state.com[1]),
        Vec2::new(state.com_vel[0], -state.com_vel[1]),
    )
}
