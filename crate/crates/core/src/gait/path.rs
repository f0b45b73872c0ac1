//! Arc-length parametrized swing-leg path in joint space.
//!
//! `s(t) = ∫₀ᵗ ‖𝒯̇_sw‖₂` is built by trapezoidal quadrature of sampled joint
//! speeds, inverted with a monotone cubic Hermite, and the path
//! `P = 𝒯_sw ∘ s⁻¹` is stored on a uniform arc-length grid with unit tangents.

use super::{GaitError, JointVec, NominalGait};
use crate::interp;

pub const DEFAULT_KNOTS: usize = 1000;
pub const DEFAULT_MIN_SPEED: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathPoint {
    pub position: JointVec,
    /// Unit tangent `T(σ)`.
    pub tangent: JointVec,
    /// True when the requested abscissa was outside `[0, L_max]`.
    pub clamped: bool,
}

#[derive(Debug, Clone)]
pub struct SwingPath {
    total_length: f64,
    knot_spacing: f64,
    positions: Vec<JointVec>,
    tangents: Vec<JointVec>,
    // Abscissa table on the sample grid.
    sample_period: f64,
    abscissa: Vec<f64>,
    speed: Vec<f64>,
    speed_rate: Vec<f64>,
}

/// Swing path of the gait's single-support phase.
pub fn build_swing_path(gait: &NominalGait, knots: usize) -> Result<SwingPath, GaitError> {
    let ss = gait.single_support();
    let samples: Vec<JointVec> = (ss.first..=ss.last).map(|i| gait.swing_joints(i)).collect();
    SwingPath::from_samples(&samples, gait.sample_period(), knots, DEFAULT_MIN_SPEED)
}

impl SwingPath {
    /// Build from joint samples on a uniform time grid starting at zero.
    pub fn from_samples(
        samples: &[JointVec],
        sample_period: f64,
        knots: usize,
        min_speed: f64,
    ) -> Result<Self, GaitError> {
        if samples.len() < 5 {
            return Err(GaitError::Invalid("swing path needs at least five samples".into()));
        }
        if knots < 2 {
            return Err(GaitError::Invalid("swing path needs at least two knots".into()));
        }
        let h = sample_period;
        let vel = interp::derivative(samples, h);
        let speed: Vec<f64> = vel.iter().map(|v| v.norm()).collect();
        if let Some((i, s)) = speed.iter().enumerate().find(|(_, s)| !(**s > min_speed)) {
            return Err(GaitError::DegeneratePath {
                t: i as f64 * h,
                speed: *s,
            });
        }
        let speed_rate = interp::derivative_scalar(&speed, h);

        let mut abscissa = Vec::with_capacity(samples.len());
        abscissa.push(0.0);
        for w in speed.windows(2) {
            let last = *abscissa.last().unwrap();
            abscissa.push(last + 0.5 * h * (w[0] + w[1]));
        }
        let total_length = *abscissa.last().unwrap();

        let mut path = Self {
            total_length,
            knot_spacing: total_length / (knots - 1) as f64,
            positions: Vec::with_capacity(knots),
            tangents: Vec::with_capacity(knots),
            sample_period: h,
            abscissa,
            speed,
            speed_rate,
        };
        for k in 0..knots {
            let sigma = (k as f64 * path.knot_spacing).min(total_length);
            let tau = path.time_at(sigma);
            let (q, qd) = interp::hermite_eval(samples, &vel, 0.0, h, tau);
            path.positions.push(q);
            path.tangents.push(qd / qd.norm());
        }
        Ok(path)
    }

    pub fn total_length(&self) -> f64 {
        self.total_length
    }

    pub fn knot_count(&self) -> usize {
        self.positions.len()
    }

    /// Duration of the nominal swing `T_f,sw`.
    pub fn duration(&self) -> f64 {
        (self.abscissa.len() - 1) as f64 * self.sample_period
    }

    pub fn knot_abscissa(&self, k: usize) -> f64 {
        k as f64 * self.knot_spacing
    }

    /// Nominal mean traversal rate `L_max / T_f,sw`.
    pub fn nominal_rate(&self) -> f64 {
        self.total_length / self.duration()
    }

    /// `P(σ)` and the unit tangent `T(σ)`; σ is clamped to `[0, L_max]`.
    pub fn eval(&self, sigma: f64) -> PathPoint {
        let clamped = !(0.0..=self.total_length).contains(&sigma);
        let s = sigma.clamp(0.0, self.total_length);
        let (position, d) = self.hermite(s);
        PathPoint {
            position,
            tangent: d / d.norm(),
            clamped,
        }
    }

    /// Derivative `dP/dσ` of the interpolant before renormalization.
    pub fn raw_tangent(&self, sigma: f64) -> JointVec {
        self.hermite(sigma.clamp(0.0, self.total_length)).1
    }

    fn hermite(&self, s: f64) -> (JointVec, JointVec) {
        interp::hermite_eval(&self.positions, &self.tangents, 0.0, self.knot_spacing, s)
    }

    /// `s(t)` for `t ∈ [0, T_f,sw]`.
    pub fn abscissa_at(&self, t: f64) -> f64 {
        let n = self.abscissa.len();
        let (i, u) = interp::locate_uniform(t.clamp(0.0, self.duration()), 0.0, self.sample_period, n);
        let (w, _) = interp::hermite_weights(u, self.sample_period);
        self.abscissa[i] * w[0] + self.speed[i] * w[1] + self.abscissa[i + 1] * w[2] + self.speed[i + 1] * w[3]
    }

    /// `ṡ(t)` and `s̈(t)`.
    pub fn speed_at(&self, t: f64) -> (f64, f64) {
        let n = self.abscissa.len();
        let (i, u) = interp::locate_uniform(t.clamp(0.0, self.duration()), 0.0, self.sample_period, n);
        let (_, dw) = interp::hermite_weights(u, self.sample_period);
        let v =
            self.abscissa[i] * dw[0] + self.speed[i] * dw[1] + self.abscissa[i + 1] * dw[2] + self.speed[i + 1] * dw[3];
        let a = self.speed_rate[i] * (1.0 - u) + self.speed_rate[i + 1] * u;
        (v, a)
    }

    /// `s⁻¹(σ)`: nominal time at which the swing reaches abscissa σ.
    pub fn time_at(&self, sigma: f64) -> f64 {
        let s = sigma.clamp(0.0, self.total_length);
        let n = self.abscissa.len();
        let i = self.abscissa.partition_point(|&a| a <= s).clamp(1, n - 1) - 1;
        let h = self.sample_period;
        let (s0, s1) = (self.abscissa[i], self.abscissa[i + 1]);
        let (m0, m1) = (self.speed[i], self.speed[i + 1]);
        let eval = |u: f64| {
            let (w, dw) = interp::hermite_weights(u, h);
            (
                s0 * w[0] + m0 * w[1] + s1 * w[2] + m1 * w[3],
                s0 * dw[0] + m0 * dw[1] + s1 * dw[2] + m1 * dw[3],
            )
        };
        // Safeguarded Newton on the local cubic.
        let (mut lo, mut hi) = (0.0, 1.0);
        let mut u = ((s - s0) / (s1 - s0)).clamp(0.0, 1.0);
        for _ in 0..30 {
            let (val, der) = eval(u);
            let f = val - s;
            if f.abs() <= 1e-15 * self.total_length.max(1.0) {
                break;
            }
            if f > 0.0 {
                hi = u;
            } else {
                lo = u;
            }
            let step = f / (der * h);
            let next = u - step;
            u = if der > 0.0 && next > lo && next < hi {
                next
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo < 1e-15 {
                break;
            }
        }
        (i as f64 + u) * h
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn ramp(v: f64) -> Vec<JointVec> {
        (0..=1000)
            .map(|i| {
                let mut q = JointVec::zeros();
                q[0] = v * i as f64 * 1e-3;
                q
            })
            .collect()
    }

    fn arc() -> (Vec<JointVec>, f64) {
        let n = 1571;
        let h = FRAC_PI_2 / (n - 1) as f64;
        let s = (0..n)
            .map(|i| {
                let t = i as f64 * h;
                let mut q = JointVec::zeros();
                q[0] = t.cos();
                q[1] = t.sin();
                q
            })
            .collect();
        (s, h)
    }

    #[test]
    fn linear_ramp() {
        let p = SwingPath::from_samples(&ramp(0.7), 1e-3, DEFAULT_KNOTS, DEFAULT_MIN_SPEED).unwrap();
        assert!((p.total_length() - 0.7).abs() < 1e-12);
        for sigma in [0.0, 0.1, 0.35, 0.7] {
            let pt = p.eval(sigma);
            assert!((pt.position[0] - sigma).abs() < 1e-12);
            assert!((pt.tangent[0] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn circular_arc() {
        let (s, h) = arc();
        let p = SwingPath::from_samples(&s, h, DEFAULT_KNOTS, DEFAULT_MIN_SPEED).unwrap();
        assert!((p.total_length() - FRAC_PI_2).abs() < 1e-6);
        let mid = p.eval(p.total_length() / 2.0).position;
        let r = FRAC_PI_4.cos();
        assert!((mid[0] - r).abs() < 1e-6 && (mid[1] - r).abs() < 1e-6, "{mid}");
        let start = p.eval(0.0).position;
        let end = p.eval(p.total_length()).position;
        assert!((start[0] - 1.0).abs() < 1e-12 && start[1].abs() < 1e-12);
        assert!(end[0].abs() < 1e-9 && (end[1] - 1.0).abs() < 1e-9);
        for k in 0..=2000 {
            let sigma = p.total_length() * k as f64 / 2000.0;
            assert!((p.raw_tangent(sigma).norm() - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn out_of_range_is_clamped_and_flagged() {
        let p = SwingPath::from_samples(&ramp(1.0), 1e-3, 100, DEFAULT_MIN_SPEED).unwrap();
        let pt = p.eval(1.5);
        assert!(pt.clamped);
        assert_eq!(pt.position, p.eval(p.total_length()).position);
        assert!(p.eval(-0.1).clamped);
        assert!(!p.eval(0.5).clamped);
    }

    #[test]
    fn stationary_segment_is_degenerate() {
        let mut s = ramp(1.0);
        for q in s.iter_mut().skip(400).take(200) {
            q[0] = 0.4;
        }
        let r = SwingPath::from_samples(&s, 1e-3, 100, DEFAULT_MIN_SPEED);
        assert!(matches!(r, Err(GaitError::DegeneratePath { .. })));
    }

    #[test]
    fn inverse_abscissa_round_trips() {
        let (s, h) = arc();
        let p = SwingPath::from_samples(&s, h, 200, DEFAULT_MIN_SPEED).unwrap();
        for k in 0..100 {
            let t = p.duration() * k as f64 / 99.0;
            assert!((p.time_at(p.abscissa_at(t)) - t).abs() < 1e-10);
        }
    }
}
