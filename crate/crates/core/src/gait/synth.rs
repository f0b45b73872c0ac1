//! Synthetic periodic gait generator.
//!
//! The CoP reference is a smooth heel-to-toe sweep under the support foot
//! followed by a smoothstep transfer to the next foot during double support.
//! The CoM channel is the unique periodic LIP orbit under that CoP (exact
//! first-order-hold propagation), and the swing leg follows a sinusoidal
//! joint-space curve traversed at constant joint-space speed.

use nalgebra::{Matrix2, Vector3};

use super::{GaitError, GaitSample, JointVec, NominalGait, Phase, LEG_JOINTS, MIN_SAMPLES_PER_STEP, N_JOINTS};
use crate::lip::{propagate_linear_cop, LipState, PendulumParams, SupportPolygon, Vec2};

#[derive(Debug, Clone, PartialEq)]
pub struct GaitDesign {
    /// Forward displacement between consecutive footprints (m).
    pub step_length: f64,
    /// Lateral distance between foot centers (m).
    pub step_width: f64,
    /// Full step period, single plus double support (s).
    pub step_duration: f64,
    pub double_support_fraction: f64,
    pub sample_period: f64,
    /// Heel-to-toe CoP sweep as a fraction of the foot half length.
    pub cop_sweep: f64,
    /// Actuator speed bound for the swing leg (rad/s, joint-space norm).
    pub joint_speed_limit: f64,
}

impl Default for GaitDesign {
    fn default() -> Self {
        Self {
            step_length: 0.2,
            step_width: 0.35,
            step_duration: 1.2,
            double_support_fraction: 0.2,
            sample_period: 1e-3,
            cop_sweep: 0.4,
            joint_speed_limit: 6.0,
        }
    }
}

impl GaitDesign {
    pub fn single_support_duration(&self) -> f64 {
        self.step_duration * (1.0 - self.double_support_fraction)
    }
}

/// Required relative CoP margin inside the support polygon.
const COP_MARGIN: f64 = 0.2;

// Swing curve shape (rad).
const KNEE_BASE: f64 = 0.10;
const KNEE_LIFT: f64 = 0.015;
const ROLL_LOOP: f64 = 0.004;
const YAW_LOOP: f64 = 0.002;

pub fn generate_synthetic_gait(
    design: &GaitDesign,
    params: &PendulumParams,
    polygon: &SupportPolygon,
) -> Result<NominalGait, GaitError> {
    let d = design;
    let all_finite = [
        d.step_length,
        d.step_width,
        d.step_duration,
        d.double_support_fraction,
        d.sample_period,
        d.cop_sweep,
        d.joint_speed_limit,
    ]
    .iter()
    .all(|v| v.is_finite());
    if !all_finite {
        return Err(GaitError::Invalid("design values must be finite".into()));
    }
    if !(d.step_duration > 0.0) {
        return Err(GaitError::Invalid("step duration must be positive".into()));
    }
    if !(0.0..0.9).contains(&d.double_support_fraction) {
        return Err(GaitError::Invalid(
            "double-support fraction must lie in [0, 0.9)".into(),
        ));
    }
    if !(d.sample_period > 0.0) || d.step_length < 0.0 || !(0.0..=1.0).contains(&d.cop_sweep) {
        return Err(GaitError::Invalid(
            "invalid sample period, step length or CoP sweep".into(),
        ));
    }

    let h = d.sample_period;
    let n_total = (d.step_duration / h).round() as usize;
    let n_ss = (d.single_support_duration() / h).round() as usize;
    if n_ss + 1 < MIN_SAMPLES_PER_STEP {
        return Err(GaitError::Infeasible(format!(
            "single support of {:.4} s holds fewer than {MIN_SAMPLES_PER_STEP} samples",
            d.single_support_duration()
        )));
    }
    let t_ss = n_ss as f64 * h;
    let t_step = n_total as f64 * h;
    let next_foot = Vec2::new(d.step_length, d.step_width);

    // CoP reference at every sample, in the support-foot frame.
    let center = polygon.center();
    let sweep = (d.cop_sweep * polygon.half_extents()[0]).min(d.step_length / 4.0);
    let ss_end = center + Vec2::new(sweep, 0.0);
    let next_start = next_foot + Vec2::new(center[0] - sweep, -center[1]);
    let cop: Vec<Vec2> = (0..=n_total)
        .map(|k| {
            let t = k as f64 * h;
            if k <= n_ss {
                let p = t / t_ss;
                center + Vec2::new(-sweep * (std::f64::consts::PI * p).cos(), 0.0)
            } else {
                let p = ((t - t_ss) / (t_step - t_ss)).clamp(0.0, 1.0);
                let sm = p * p * (3.0 - 2.0 * p);
                ss_end + (next_start - ss_end) * sm
            }
        })
        .collect();

    let shrunk = polygon
        .shrunk(1.0 - COP_MARGIN)
        .map_err(|e| GaitError::Invalid(e.to_string()))?;
    if let Some(k) = (0..=n_ss).find(|&k| !shrunk.contains(&cop[k])) {
        return Err(GaitError::Infeasible(format!(
            "CoP reference leaves the support margin at t = {:.3} s",
            k as f64 * h
        )));
    }

    let w = params.omega();
    let orbit_from = |x0: LipState| -> Vec<LipState> {
        let mut out = Vec::with_capacity(n_total + 1);
        let mut x = x0;
        out.push(x);
        for k in 0..n_total {
            x = propagate_linear_cop(&x, &cop[k], &cop[k + 1], h, w);
            out.push(x);
        }
        out
    };

    // Periodic orbit: x(T) = Φ x₀ + g must equal the mirrored start.
    let forced = orbit_from(LipState::default())[n_total];
    let (sh, ch) = ((w * t_step).sinh(), (w * t_step).cosh());
    let phi = Matrix2::new(ch, sh / w, w * sh, ch);
    let sys_x = phi - Matrix2::identity();
    let sys_y = phi + Matrix2::identity();
    let rhs_x = nalgebra::Vector2::new(next_foot[0] - forced.com[0], -forced.com_vel[0]);
    let rhs_y = nalgebra::Vector2::new(next_foot[1] - forced.com[1], -forced.com_vel[1]);
    let (Some(ix), Some(iy)) = (sys_x.try_inverse(), sys_y.try_inverse()) else {
        return Err(GaitError::Infeasible("no periodic orbit for this step".into()));
    };
    let sx = ix * rhs_x;
    let sy = iy * rhs_y;
    let x0 = LipState::new(Vec2::new(sx[0], sy[0]), Vec2::new(sx[1], sy[1]));
    let orbit = orbit_from(x0);

    // Swing curve, reparametrized to constant joint-space speed.
    let alpha = (d.step_length / (2.0 * params.com_height())).atan();
    let curve = SwingCurve::new(alpha);
    let speed = curve.length / t_ss;
    if speed > d.joint_speed_limit {
        return Err(GaitError::Infeasible(format!(
            "swing leg needs {speed:.2} rad/s, above the {:.2} rad/s actuator limit",
            d.joint_speed_limit
        )));
    }

    let samples = (0..=n_total)
        .map(|k| {
            let t = k as f64 * h;
            let (swing, stance) = if k <= n_ss {
                let p = curve.param_at_fraction(t / t_ss);
                (curve.eval(p), stance_pose(alpha, t / t_ss))
            } else {
                (curve.eval(1.0), stance_pose(alpha, 1.0))
            };
            let mut q = [0.0; N_JOINTS];
            // Canonical step stands on the right foot; the left leg swings.
            q[..LEG_JOINTS].copy_from_slice(swing.as_slice());
            q[LEG_JOINTS..].copy_from_slice(stance.as_slice());
            let x = &orbit[k];
            GaitSample {
                t,
                q,
                com: Vector3::new(x.com[0], x.com[1], params.com_height()),
                cop: cop[k],
                phase: if k <= n_ss { Phase::SingleRight } else { Phase::Double },
            }
        })
        .collect();
    NominalGait::new(samples)
}

fn stance_pose(alpha: f64, p: f64) -> JointVec {
    let pitch = alpha - 2.0 * alpha * p;
    JointVec::from_column_slice(&[0.0, 0.0, pitch, KNEE_BASE, -pitch, 0.0])
}

/// Geometric swing curve `p ∈ [0, 1] ↦ q`, with a lookup table mapping arc
/// length fraction back to `p`.
struct SwingCurve {
    alpha: f64,
    length: f64,
    table: Vec<f64>,
}

const CURVE_TABLE: usize = 20_000;

impl SwingCurve {
    fn new(alpha: f64) -> Self {
        let mut c = Self {
            alpha,
            length: 0.0,
            table: Vec::with_capacity(CURVE_TABLE + 1),
        };
        // Cumulative arc length by Simpson's rule on each table cell.
        let dp = 1.0 / CURVE_TABLE as f64;
        c.table.push(0.0);
        let mut acc = 0.0;
        for i in 0..CURVE_TABLE {
            let p = i as f64 * dp;
            let s = c.deriv(p).norm() + 4.0 * c.deriv(p + 0.5 * dp).norm() + c.deriv(p + dp).norm();
            acc += s * dp / 6.0;
            c.table.push(acc);
        }
        c.length = acc;
        c
    }

    fn eval(&self, p: f64) -> JointVec {
        use std::f64::consts::PI;
        let a = self.alpha;
        let pitch = -a + 2.0 * a * p;
        let roll = ROLL_LOOP * (2.0 * PI * p).sin();
        JointVec::from_column_slice(&[
            YAW_LOOP * (2.0 * PI * p).sin(),
            roll,
            pitch,
            KNEE_BASE + KNEE_LIFT * (PI * p).sin(),
            -pitch,
            -roll,
        ])
    }

    fn deriv(&self, p: f64) -> JointVec {
        use std::f64::consts::PI;
        let a = self.alpha;
        let droll = 2.0 * PI * ROLL_LOOP * (2.0 * PI * p).cos();
        JointVec::from_column_slice(&[
            2.0 * PI * YAW_LOOP * (2.0 * PI * p).cos(),
            droll,
            2.0 * a,
            PI * KNEE_LIFT * (PI * p).cos(),
            -2.0 * a,
            -droll,
        ])
    }

    /// Curve parameter at which the arc length reaches `fraction · length`.
    fn param_at_fraction(&self, fraction: f64) -> f64 {
        let target = fraction.clamp(0.0, 1.0) * self.length;
        let i = self.table.partition_point(|&s| s < target).clamp(1, CURVE_TABLE);
        let (s0, s1) = (self.table[i - 1], self.table[i]);
        let dp = 1.0 / CURVE_TABLE as f64;
        // Newton refinement inside the cell.
        let mut p = (i - 1) as f64 * dp + dp * (target - s0) / (s1 - s0).max(f64::MIN_POSITIVE);
        for _ in 0..3 {
            let p0 = (i - 1) as f64 * dp;
            let mid = 0.5 * (p0 + p);
            let partial =
                (p - p0) / 6.0 * (self.deriv(p0).norm() + 4.0 * self.deriv(mid).norm() + self.deriv(p).norm());
            let err = s0 + partial - target;
            p -= err / self.deriv(p).norm();
        }
        p.clamp(0.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_gait() -> NominalGait {
        generate_synthetic_gait(
            &GaitDesign::default(),
            &PendulumParams::default(),
            &SupportPolygon::default(),
        )
        .unwrap()
    }

    #[test]
    fn duration_matches_request() {
        let g = default_gait();
        assert!((g.duration() - 1.2).abs() <= g.sample_period());
        assert!((g.single_support().duration() - 0.96).abs() <= g.sample_period());
    }

    #[test]
    fn cop_margin_holds() {
        let g = default_gait();
        assert!(g.cop_margin(&SupportPolygon::default()) >= COP_MARGIN - 1e-12);
    }

    #[test]
    fn orbit_is_periodic() {
        let g = default_gait();
        let foot = g.next_foot_offset();
        assert!((foot - Vec2::new(0.2, 0.35)).norm() < 1e-6);
        let mapped = super::super::to_next_frame(&g.terminal_state(), &foot);
        assert!(
            mapped.distance(&g.initial_state()) < 1e-5,
            "{mapped:?} vs {:?}",
            g.initial_state()
        );
    }

    #[test]
    fn constant_height() {
        let g = default_gait();
        assert!(g.matches_params(&PendulumParams::default()));
    }

    #[test]
    fn marching_in_place_keeps_com_over_foot_center() {
        let design = GaitDesign {
            step_length: 0.0,
            ..GaitDesign::default()
        };
        let g = generate_synthetic_gait(&design, &PendulumParams::default(), &SupportPolygon::default()).unwrap();
        for s in g.samples() {
            assert!(s.com[0].abs() < 1e-12);
        }
        let (x0, xf) = (g.initial_state(), g.final_state());
        // Single support is time-symmetric: same lateral position, reversed velocity.
        assert!((x0.com[1] - xf.com[1]).abs() < 1e-6);
        assert!((x0.com_vel[1] + xf.com_vel[1]).abs() < 1e-5);
        let mapped = super::super::to_next_frame(&g.terminal_state(), &g.next_foot_offset());
        assert!(mapped.distance(&x0) < 1e-5);
    }

    #[test]
    fn absurd_duration_is_infeasible() {
        let design = GaitDesign {
            step_duration: 0.01,
            ..GaitDesign::default()
        };
        let r = generate_synthetic_gait(&design, &PendulumParams::default(), &SupportPolygon::default());
        assert!(matches!(r, Err(GaitError::Infeasible(_))));
        let fine = GaitDesign {
            step_duration: 0.01,
            sample_period: 1e-5,
            ..GaitDesign::default()
        };
        let r = generate_synthetic_gait(&fine, &PendulumParams::default(), &SupportPolygon::default());
        assert!(matches!(r, Err(GaitError::Infeasible(_))));
    }

    #[test]
    fn swing_speed_is_constant() {
        let g = default_gait();
        let ss = g.single_support();
        let h = g.sample_period();
        let speeds: Vec<f64> = (ss.first..ss.last)
            .map(|i| (g.swing_joints(i + 1) - g.swing_joints(i)).norm() / h)
            .collect();
        let mean = speeds.iter().sum::<f64>() / speeds.len() as f64;
        for s in speeds {
            assert!((s - mean).abs() / mean < 1e-5);
        }
    }
}
