//! Linear inverted pendulum (LIP) balance model.
//!
//! Planar CoM dynamics `c̈ = ω²(c − u)` with the CoP `u` as input. Propagation
//! is closed-form (hyperbolic functions), never integrated numerically, so the
//! simulator and the planner share one discretization-free model.

use nalgebra::Vector2;
use thiserror::Error;

pub type Vec2 = Vector2<f64>;

#[derive(Debug, Error, PartialEq)]
pub enum LipError {
    #[error("invalid pendulum parameters: {0}")]
    InvalidParams(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
    #[error("invalid support polygon: half extents must be strictly positive")]
    InvalidPolygon,
}

/// Gravity, CoM height and the derived pendulum frequency `ω = √(g / c_z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendulumParams {
    gravity: f64,
    com_height: f64,
    omega: f64,
}

impl PendulumParams {
    pub fn new(gravity: f64, com_height: f64) -> Result<Self, LipError> {
        if !(gravity.is_finite() && gravity > 0.0) {
            return Err(LipError::InvalidParams("gravity must be positive"));
        }
        if !(com_height.is_finite() && com_height > 0.0) {
            return Err(LipError::InvalidParams("CoM height must be positive"));
        }
        Ok(Self {
            gravity,
            com_height,
            omega: (gravity / com_height).sqrt(),
        })
    }

    /// Build directly from a pendulum frequency, keeping the default gravity.
    pub fn from_omega(omega: f64) -> Result<Self, LipError> {
        if !(omega.is_finite() && omega > 0.0) {
            return Err(LipError::InvalidParams("omega must be positive"));
        }
        let gravity = 9.81;
        Self::new(gravity, gravity / (omega * omega))
    }

    pub fn gravity(&self) -> f64 {
        self.gravity
    }

    pub fn com_height(&self) -> f64 {
        self.com_height
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }
}

impl Default for PendulumParams {
    fn default() -> Self {
        Self::new(9.81, 0.9).expect("default pendulum parameters are valid")
    }
}

/// Horizontal CoM position and velocity.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LipState {
    pub com: Vec2,
    pub com_vel: Vec2,
}

impl LipState {
    pub fn new(com: Vec2, com_vel: Vec2) -> Self {
        Self { com, com_vel }
    }

    pub fn is_finite(&self) -> bool {
        self.com.iter().chain(self.com_vel.iter()).all(|v| v.is_finite())
    }

    /// Divergent and convergent components of this state.
    pub fn to_dcm(&self, params: &PendulumParams) -> DcmPair {
        let w = params.omega();
        DcmPair {
            dcm: self.com + self.com_vel / w,
            cdm: self.com - self.com_vel / w,
        }
    }

    pub fn from_dcm(pair: &DcmPair, params: &PendulumParams) -> Self {
        let w = params.omega();
        Self {
            com: (pair.dcm + pair.cdm) * 0.5,
            com_vel: (pair.dcm - pair.cdm) * (0.5 * w),
        }
    }

    /// Mixed position/velocity distance used for terminal-state checks.
    pub fn distance(&self, other: &LipState) -> f64 {
        let d = self.com - other.com;
        let v = self.com_vel - other.com_vel;
        (d.norm_squared() + v.norm_squared()).sqrt()
    }
}

/// DCM `ξ = c + ċ/ω` and the convergent component `ζ = c − ċ/ω`.
///
/// Under a constant CoP the two decouple: `ξ` diverges from `u` as `e^{ωt}`
/// and `ζ` converges to it as `e^{−ωt}`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DcmPair {
    pub dcm: Vec2,
    pub cdm: Vec2,
}

/// Axis-aligned rectangular support polygon. Closed set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportPolygon {
    center: Vec2,
    half_extents: Vec2,
}

impl SupportPolygon {
    pub fn new(center: Vec2, half_extents: Vec2) -> Result<Self, LipError> {
        let ok = half_extents.iter().all(|h| h.is_finite() && *h > 0.0) && center.iter().all(|c| c.is_finite());
        if !ok {
            return Err(LipError::InvalidPolygon);
        }
        Ok(Self { center, half_extents })
    }

    /// Rectangle spanning `[lo, hi]` on each axis.
    pub fn from_bounds(lo: Vec2, hi: Vec2) -> Result<Self, LipError> {
        Self::new((lo + hi) * 0.5, (hi - lo) * 0.5)
    }

    pub fn center(&self) -> Vec2 {
        self.center
    }

    pub fn half_extents(&self) -> Vec2 {
        self.half_extents
    }

    pub fn lower(&self) -> Vec2 {
        self.center - self.half_extents
    }

    pub fn upper(&self) -> Vec2 {
        self.center + self.half_extents
    }

    pub fn contains(&self, u: &Vec2) -> bool {
        (0..2).all(|i| (u[i] - self.center[i]).abs() <= self.half_extents[i])
    }

    /// Euclidean distance from `u` to the rectangle (zero inside).
    pub fn exit_distance(&self, u: &Vec2) -> f64 {
        let mut d2 = 0.0;
        for i in 0..2 {
            let excess = (u[i] - self.center[i]).abs() - self.half_extents[i];
            if excess > 0.0 {
                d2 += excess * excess;
            }
        }
        d2.sqrt()
    }

    /// Componentwise projection onto the rectangle.
    pub fn clamp(&self, u: &Vec2) -> Vec2 {
        let lo = self.lower();
        let hi = self.upper();
        Vec2::new(u[0].max(lo[0]).min(hi[0]), u[1].max(lo[1]).min(hi[1]))
    }

    /// Same rectangle with each half extent scaled by `factor`.
    pub fn shrunk(&self, factor: f64) -> Result<Self, LipError> {
        Self::new(self.center, self.half_extents * factor)
    }
}

impl Default for SupportPolygon {
    /// Foot-sized 0.20 m × 0.10 m rectangle centered on the foot frame origin.
    fn default() -> Self {
        Self::new(Vec2::zeros(), Vec2::new(0.10, 0.05)).expect("valid default polygon")
    }
}

/// Exact LIP propagation over `dt` under a constant CoP.
pub fn propagate(state: &LipState, cop: &Vec2, dt: f64, params: &PendulumParams) -> Result<LipState, LipError> {
    if !(dt.is_finite() && dt >= 0.0) {
        return Err(LipError::InvalidArgument("dt must be finite and non-negative"));
    }
    if !state.is_finite() || !cop.iter().all(|v| v.is_finite()) {
        return Err(LipError::InvalidArgument("state and CoP must be finite"));
    }
    Ok(propagate_unchecked(state, cop, dt, params.omega()))
}

/// Hot-path variant of [`propagate`] without argument validation.
#[inline]
pub fn propagate_unchecked(state: &LipState, cop: &Vec2, dt: f64, omega: f64) -> LipState {
    let (sh, ch) = hyperbolic(omega * dt);
    let offset = state.com - cop;
    LipState {
        com: cop + offset * ch + state.com_vel * (sh / omega),
        com_vel: offset * (omega * sh) + state.com_vel * ch,
    }
}

/// Exact propagation when the CoP moves linearly from `cop_start` to
/// `cop_end` over `dt` (first-order hold).
///
/// A linear CoP is itself a particular solution of the LIP, so only the
/// deviation from it evolves hyperbolically.
pub fn propagate_linear_cop(state: &LipState, cop_start: &Vec2, cop_end: &Vec2, dt: f64, omega: f64) -> LipState {
    if dt == 0.0 {
        return *state;
    }
    let slope = (cop_end - cop_start) / dt;
    let (sh, ch) = hyperbolic(omega * dt);
    let d = state.com - cop_start;
    let dv = state.com_vel - slope;
    LipState {
        com: cop_end + d * ch + dv * (sh / omega),
        com_vel: slope + d * (omega * sh) + dv * ch,
    }
}

#[inline]
fn hyperbolic(x: f64) -> (f64, f64) {
    let e = x.exp();
    let ei = 1.0 / e;
    (0.5 * (e - ei), 0.5 * (e + ei))
}

/// CoP consistent with a given CoM acceleration: `u = c − c̈/ω²`.
pub fn cop_from_accel(com: &Vec2, com_acc: &Vec2, params: &PendulumParams) -> Vec2 {
    let w2 = params.omega() * params.omega();
    com - com_acc / w2
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit_omega() -> PendulumParams {
        PendulumParams::from_omega(1.0).unwrap()
    }

    #[test]
    fn omega_matches_definition() {
        let p = PendulumParams::new(9.81, 0.9).unwrap();
        let expected = (9.81f64 / 0.9).sqrt();
        assert!(((p.omega() - expected) / expected).abs() < 1e-12);
        assert!(PendulumParams::new(0.0, 0.9).is_err());
        assert!(PendulumParams::new(9.81, -1.0).is_err());
    }

    #[test]
    fn equilibrium_is_fixed_point() {
        let p = PendulumParams::default();
        let s = propagate(&LipState::default(), &Vec2::zeros(), 1.7, &p).unwrap();
        assert_eq!(s, LipState::default());
    }

    #[test]
    fn hand_evaluated_propagation() {
        // cosh(ln 2) = 5/4, sinh(ln 2) = 3/4
        let s0 = LipState::new(Vec2::new(0.1, 0.0), Vec2::zeros());
        let s = propagate(&s0, &Vec2::zeros(), 2f64.ln(), &unit_omega()).unwrap();
        assert_abs_diff_eq!(s.com[0], 0.125, epsilon = 1e-15);
        assert_abs_diff_eq!(s.com_vel[0], 0.075, epsilon = 1e-15);
        let xi = s.to_dcm(&unit_omega()).dcm;
        assert_abs_diff_eq!(xi[0], 0.2, epsilon = 1e-15);
    }

    #[test]
    fn rejects_bad_arguments() {
        let p = PendulumParams::default();
        let s = LipState::default();
        assert!(propagate(&s, &Vec2::zeros(), -0.1, &p).is_err());
        assert!(propagate(&s, &Vec2::new(f64::NAN, 0.0), 0.1, &p).is_err());
        let bad = LipState::new(Vec2::new(f64::INFINITY, 0.0), Vec2::zeros());
        assert!(propagate(&bad, &Vec2::zeros(), 0.1, &p).is_err());
    }

    #[test]
    fn dcm_examples() {
        let p = PendulumParams::default();
        let s = LipState::new(Vec2::new(0.3, 0.1), Vec2::zeros());
        assert_eq!(s.to_dcm(&p).dcm, Vec2::new(0.3, 0.1));

        let p2 = PendulumParams::from_omega(2.0).unwrap();
        let s = LipState::new(Vec2::zeros(), Vec2::new(1.0, 0.0));
        let pair = s.to_dcm(&p2);
        assert_abs_diff_eq!(pair.dcm[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(pair.cdm[0], -0.5, epsilon = 1e-15);
    }

    #[test]
    fn cop_from_accel_examples() {
        let p = PendulumParams::default();
        let c = Vec2::new(0.1, -0.02);
        assert_eq!(cop_from_accel(&c, &Vec2::zeros(), &p), c);
        let w2 = p.omega() * p.omega();
        let u = cop_from_accel(&Vec2::new(0.1, 0.0), &Vec2::new(w2 * 0.1, 0.0), &p);
        assert_abs_diff_eq!(u[0], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn finite_difference_acceleration_recovers_cop() {
        let p = PendulumParams::default();
        let u = Vec2::new(0.03, -0.01);
        let s0 = LipState::new(Vec2::new(0.05, 0.02), Vec2::new(0.2, -0.1));
        let h = 1e-4;
        let t = 0.4;
        let at = |t: f64| propagate(&s0, &u, t, &p).unwrap().com;
        let acc = (at(t + h) - 2.0 * at(t) + at(t - h)) / (h * h);
        let rec = cop_from_accel(&at(t), &acc, &p);
        assert!((rec - u).norm() < 1e-6);
    }

    #[test]
    fn linear_cop_matches_fine_zero_order_hold() {
        let w = 3.3;
        let s0 = LipState::new(Vec2::new(0.02, 0.1), Vec2::new(0.3, -0.2));
        let (u0, u1) = (Vec2::new(-0.04, 0.0), Vec2::new(0.04, 0.01));
        let exact = propagate_linear_cop(&s0, &u0, &u1, 0.2, w);
        let n = 20000;
        let mut s = s0;
        for k in 0..n {
            let mid = u0 + (u1 - u0) * ((k as f64 + 0.5) / n as f64);
            s = propagate_unchecked(&s, &mid, 0.2 / n as f64, w);
        }
        assert!(exact.distance(&s) < 1e-8);
    }

    #[test]
    fn polygon_is_closed_and_clamps() {
        let poly = SupportPolygon::default();
        assert!(poly.contains(&Vec2::new(0.10, -0.05)));
        assert!(!poly.contains(&Vec2::new(0.1000001, 0.0)));
        assert_eq!(poly.clamp(&Vec2::new(0.3, 0.01)), Vec2::new(0.10, 0.01));
        let inside = Vec2::new(0.02, -0.03);
        assert_eq!(poly.clamp(&inside), inside);
        let c = poly.clamp(&Vec2::new(-1.0, 2.0));
        assert_eq!(poly.clamp(&c), c);
        assert!(SupportPolygon::new(Vec2::zeros(), Vec2::new(0.1, 0.0)).is_err());
        assert_abs_diff_eq!(poly.exit_distance(&Vec2::new(0.13, 0.09)), 0.05, epsilon = 1e-12);
    }
}
