//! Time-rescaling baseline: the nominal CoM channel is replayed along the
//! abscissa the wearer imposes, and the CoP follows from the pendulum
//! dynamics. No support-polygon constraint is enforced.

use crate::gait::{NominalGait, SwingPath};
use crate::interp;
use crate::lip::{LipState, PendulumParams, Vec2};

#[derive(Debug, Clone, PartialEq)]
pub struct RescaleResult {
    /// `σ*(t_i)`, clamped to `[0, L_max]`.
    pub sigma: Vec<f64>,
    pub states: Vec<LipState>,
    pub cop: Vec<Vec2>,
    /// True when the integrated abscissa exceeded `L_max`.
    pub clamped: bool,
}

/// Offline rescaling from a history of target velocities sampled every `dt`.
///
/// `σ*` is the trapezoidal integral of the rates, `c*(t) = c(s⁻¹(σ*(t)))`,
/// and `u* = c* − c̈*/ω²` with finite-difference derivatives of `c*`.
pub fn time_rescale(
    gait: &NominalGait,
    path: &SwingPath,
    rates: &[f64],
    dt: f64,
    params: &PendulumParams,
) -> RescaleResult {
    let l_max = path.total_length();
    let mut sigma = Vec::with_capacity(rates.len());
    let mut acc = 0.0;
    let mut clamped = false;
    for (i, r) in rates.iter().enumerate() {
        if i > 0 {
            acc += 0.5 * dt * (rates[i - 1] + r);
        }
        if acc > l_max {
            clamped = true;
        }
        sigma.push(acc.min(l_max));
    }
    let com: Vec<Vec2> = sigma.iter().map(|s| gait.com_at(path.time_at(*s)).0).collect();
    let vel = interp::derivative(&com, dt);
    let accel = interp::derivative(&vel, dt);
    let w2 = params.omega() * params.omega();
    let states = com.iter().zip(&vel).map(|(c, v)| LipState::new(*c, *v)).collect();
    let cop = com.iter().zip(&accel).map(|(c, a)| c - a / w2).collect();
    RescaleResult {
        sigma,
        states,
        cop,
        clamped,
    }
}

/// Online rescaled reference at abscissa `σ` moving at constant rate `σ̇`.
///
/// With nominal time `τ = s⁻¹(σ)`: `τ̇ = σ̇ / ṡ(τ)`, `τ̈ = −σ̇² s̈(τ) / ṡ(τ)³`,
/// `ċ* = c'τ̇`, `c̈* = c''τ̇² + c'τ̈` and `u* = c* − c̈*/ω²`.
pub fn rescaled_reference(
    gait: &NominalGait,
    path: &SwingPath,
    sigma: f64,
    sigma_rate: f64,
    params: &PendulumParams,
) -> (LipState, Vec2) {
    let tau = path.time_at(sigma);
    let (sd, sdd) = path.speed_at(tau);
    let tau_d = sigma_rate / sd;
    let tau_dd = -sigma_rate * sigma_rate * sdd / (sd * sd * sd);
    let (c, cd, cdd) = gait.com_at(tau);
    let vel = cd * tau_d;
    let acc = cdd * (tau_d * tau_d) + cd * tau_dd;
    let w2 = params.omega() * params.omega();
    (LipState::new(c, vel), c - acc / w2)
}

/// Nominal segment replayed at constant rate `r`: `c*(t) = c(r t)`, giving
/// `u* = c − r² c̈/ω²`.
pub fn uniform_rescaled_reference(gait: &NominalGait, t: f64, rate: f64, params: &PendulumParams) -> (LipState, Vec2) {
    let (c, cd, cdd) = gait.com_at(rate * t);
    let w2 = params.omega() * params.omega();
    (LipState::new(c, cd * rate), c - cdd * (rate * rate) / w2)
}
