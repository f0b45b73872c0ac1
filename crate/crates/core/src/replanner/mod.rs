//! Reference-trajectory generation.
//!
//! Online planning solves, at every tick, a two-level problem: find the step
//! duration closest to the one the wearer asks for among the durations for
//! which the remaining CoM transfer is achievable with the CoP inside the
//! support polygon, then the minimum-energy CoP at that duration. The
//! time-rescaling baseline (see [`rescale`]) stretches the nominal gait
//! without any constraint.

mod feasibility;
mod qp;
pub mod rescale;

pub use qp::AxisSolution;
pub use rescale::{rescaled_reference, time_rescale, RescaleResult};

use thiserror::Error;

use crate::lip::{propagate_unchecked, LipState, PendulumParams, SupportPolygon, Vec2};

#[derive(Debug, Error, PartialEq)]
pub enum ReplanError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no feasible step duration in [{t_min}, {t_max}] s: balance cannot be recovered")]
    Unrecoverable { t_min: f64, t_max: f64 },
    #[error("knot QP did not converge (residual {0:.3e})")]
    NotConverged(f64),
}

/// Planner tuning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerSettings {
    /// CoP knots per axis.
    pub knots: usize,
    /// Search window for the step duration.
    pub t_min: f64,
    pub t_max: f64,
    /// Coarse scan step of the feasible-time search.
    pub scan_step: f64,
    /// Bisection tolerance on interval boundaries, and the tolerance of the
    /// "schedule respected" flag.
    pub time_tol: f64,
    /// Equality residual tolerance of the knot QP.
    pub qp_tol: f64,
}

impl Default for PlannerSettings {
    fn default() -> Self {
        Self {
            knots: 64,
            t_min: 0.05,
            t_max: 3.0,
            scan_step: 0.005,
            time_tol: 1e-4,
            qp_tol: 1e-13,
        }
    }
}

impl PlannerSettings {
    pub fn validate(&self) -> Result<(), ReplanError> {
        let ok = self.knots >= 16
            && self.t_min > 0.0
            && self.t_max > self.t_min
            && self.t_max.is_finite()
            && self.scan_step > 0.0
            && self.time_tol > 0.0
            && self.qp_tol > 0.0;
        if ok {
            Ok(())
        } else {
            Err(ReplanError::InvalidArgument(format!(
                "invalid planner settings {self:?}"
            )))
        }
    }
}

/// Current and target CoM states with the admissible CoP region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryConditions {
    pub x0: LipState,
    pub xf: LipState,
    pub polygon: SupportPolygon,
}

impl BoundaryConditions {
    pub fn validate(&self) -> Result<(), ReplanError> {
        if !self.x0.is_finite() || !self.xf.is_finite() {
            return Err(ReplanError::InvalidArgument("non-finite boundary state".into()));
        }
        Ok(())
    }

    /// The per-axis problems at duration `t` with `knots` CoP knots.
    pub fn axes(&self, duration: f64, knots: usize, params: &PendulumParams) -> [AxisProblem; 2] {
        let w = params.omega();
        let e = (-w * duration).exp();
        let center = self.polygon.center();
        let half = self.polygon.half_extents();
        std::array::from_fn(|i| {
            let c0 = self.x0.com[i] - center[i];
            let cf = self.xf.com[i] - center[i];
            let (xi0, zeta0) = (c0 + self.x0.com_vel[i] / w, c0 - self.x0.com_vel[i] / w);
            let (xif, zetaf) = (cf + self.xf.com_vel[i] / w, cf - self.xf.com_vel[i] / w);
            AxisProblem {
                omega: w,
                duration,
                knots,
                half_width: half[i],
                b1: xi0 - xif * e,
                b2: zetaf - zeta0 * e,
            }
        })
    }

    pub fn is_feasible(&self, duration: f64, knots: usize, params: &PendulumParams) -> bool {
        duration > 0.0 && self.axes(duration, knots, params).iter().all(AxisProblem::is_feasible)
    }
}

/// One axis of the discretized transfer problem in polygon-centered
/// coordinates: `a·u = b₁` (divergent component, scaled by `e^{−ωT}`) and
/// `c·u = b₂` (convergent component), `|u_k| ≤ half_width`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisProblem {
    pub omega: f64,
    pub duration: f64,
    pub knots: usize,
    pub half_width: f64,
    pub b1: f64,
    pub b2: f64,
}

/// Piecewise-constant CoP plan over `[0, duration]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CopPlan {
    pub duration: f64,
    /// Knot values in the frame of the boundary conditions.
    pub cop: Vec<Vec2>,
    /// CoM states at the knot times, `states[0] = x₀`.
    pub states: Vec<LipState>,
    /// `Σ ‖u_k − center‖² Δt`.
    pub cost: f64,
    /// Dual multipliers per axis.
    pub multipliers: [[f64; 2]; 2],
    /// Largest equality residual over both axes.
    pub residual: f64,
    omega: f64,
}

impl CopPlan {
    pub fn knot_period(&self) -> f64 {
        self.duration / self.cop.len() as f64
    }

    pub fn final_state(&self) -> LipState {
        *self.states.last().expect("plan has states")
    }

    /// Planned state and CoP at time `t`, clamped to `[0, duration]`.
    pub fn reference_at(&self, t: f64) -> (LipState, Vec2) {
        let dt = self.knot_period();
        let t = t.clamp(0.0, self.duration);
        let k = ((t / dt).floor() as usize).min(self.cop.len() - 1);
        let local = t - k as f64 * dt;
        let state = propagate_unchecked(&self.states[k], &self.cop[k], local, self.omega);
        (state, self.cop[k])
    }
}

/// Minimum-energy CoP at a fixed duration; `Ok(None)` when infeasible.
pub fn min_energy_control(
    bc: &BoundaryConditions,
    duration: f64,
    params: &PendulumParams,
    knots: usize,
    qp_tol: f64,
) -> Result<Option<CopPlan>, ReplanError> {
    bc.validate()?;
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(ReplanError::InvalidArgument(format!(
            "duration must be positive, got {duration}"
        )));
    }
    if knots < 16 {
        return Err(ReplanError::InvalidArgument(format!(
            "need at least 16 knots, got {knots}"
        )));
    }
    let axes = bc.axes(duration, knots, params);
    if !axes.iter().all(AxisProblem::is_feasible) {
        return Ok(None);
    }
    let sol = axes.map(|ax| ax.solve(qp_tol));
    // Residuals are measured on e^{−ωT}-scaled constraints; relax the
    // tolerance for the last few ulps near the bang-bang boundary.
    let residual = sol[0].residual.max(sol[1].residual);
    if residual > 1e-9 {
        return Err(ReplanError::NotConverged(residual));
    }
    let center = bc.polygon.center();
    let lo = bc.polygon.lower();
    let hi = bc.polygon.upper();
    let dt = duration / knots as f64;
    let mut cost = 0.0;
    let cop: Vec<Vec2> = (0..knots)
        .map(|k| {
            let (ux, uy) = (sol[0].knots[k], sol[1].knots[k]);
            cost += (ux * ux + uy * uy) * dt;
            // Guard the exact containment against rounding in the shift.
            Vec2::new(
                (ux + center[0]).clamp(lo[0], hi[0]),
                (uy + center[1]).clamp(lo[1], hi[1]),
            )
        })
        .collect();
    let w = params.omega();
    let mut states = Vec::with_capacity(knots + 1);
    states.push(bc.x0);
    for u in &cop {
        let next = propagate_unchecked(states.last().unwrap(), u, dt, w);
        states.push(next);
    }
    Ok(Some(CopPlan {
        duration,
        cop,
        states,
        cost,
        multipliers: [sol[0].multipliers, sol[1].multipliers],
        residual,
        omega: w,
    }))
}

/// Union of disjoint closed intervals of feasible durations.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeasibleTimeSet {
    pub intervals: Vec<(f64, f64)>,
}

impl FeasibleTimeSet {
    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn contains(&self, t: f64) -> bool {
        self.intervals.iter().any(|(a, b)| *a <= t && t <= *b)
    }

    /// Closest point to `t`; ties go to the smaller duration.
    pub fn project(&self, t: f64) -> Option<f64> {
        let mut best: Option<(f64, f64)> = None;
        for &(a, b) in &self.intervals {
            let p = t.clamp(a, b);
            let d = (p - t).abs();
            match best {
                Some((bd, bp)) if d > bd || (d == bd && p >= bp) => {}
                _ => best = Some((d, p)),
            }
        }
        best.map(|(_, p)| p)
    }
}

/// Feasible durations in `[t_min, t_max]`: coarse scan, then bisection of
/// every boundary to `time_tol`, keeping the feasible side.
pub fn feasible_time_set(
    bc: &BoundaryConditions,
    params: &PendulumParams,
    settings: &PlannerSettings,
) -> FeasibleTimeSet {
    let feasible = |t: f64| bc.is_feasible(t, settings.knots, params);
    let span = settings.t_max - settings.t_min;
    let steps = (span / settings.scan_step).ceil().max(1.0) as usize;
    let grid = |i: usize| {
        if i == steps {
            settings.t_max
        } else {
            settings.t_min + span * i as f64 / steps as f64
        }
    };
    let refine = |mut ok: f64, mut bad: f64| {
        while (ok - bad).abs() > settings.time_tol {
            let mid = 0.5 * (ok + bad);
            if feasible(mid) {
                ok = mid;
            } else {
                bad = mid;
            }
        }
        ok
    };

    let mut intervals = Vec::new();
    let mut open: Option<f64> = None;
    let mut prev = (settings.t_min, false);
    for i in 0..=steps {
        let t = grid(i);
        let f = feasible(t);
        match (open, f) {
            (None, true) => open = Some(if i == 0 { t } else { refine(t, prev.0) }),
            (Some(start), false) => {
                intervals.push((start, refine(prev.0, t)));
                open = None;
            }
            _ => {}
        }
        prev = (t, f);
    }
    if let Some(start) = open {
        intervals.push((start, settings.t_max));
    }
    FeasibleTimeSet { intervals }
}

/// `Tᵗ = (L_max − σ) / σ̇ᵗ`.
pub fn target_time(sigma: f64, target_rate: f64, total_length: f64) -> Result<f64, ReplanError> {
    if !(target_rate > 0.0) {
        return Err(ReplanError::InvalidArgument(format!(
            "target rate must be positive, got {target_rate}"
        )));
    }
    Ok((total_length - sigma).max(0.0) / target_rate)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplanSolution {
    pub t_opt: f64,
    pub t_target: f64,
    /// `|T^opt − Tᵗ| ≤ time_tol`.
    pub respected: bool,
    /// `(L_max − σ) / T^opt`.
    pub sigma_rate: f64,
    pub plan: CopPlan,
    /// The feasible set, when it had to be computed.
    pub feasible_set: Option<FeasibleTimeSet>,
}

impl ReplanSolution {
    /// Width of the feasible interval containing `T^opt`, when the feasible
    /// set had to be computed.
    pub fn interval_width(&self) -> Option<f64> {
        let set = self.feasible_set.as_ref()?;
        set.intervals
            .iter()
            .find(|(a, b)| *a <= self.t_opt && self.t_opt <= *b)
            .map(|(a, b)| b - a)
    }

    pub fn reference_at(&self, t: f64) -> (LipState, Vec2) {
        self.plan.reference_at(t)
    }
}

/// Problem 1: the feasible duration closest to `t_target` and the
/// minimum-energy CoP at that duration. `remaining` is `L_max − σ`.
pub fn solve_problem1(
    bc: &BoundaryConditions,
    t_target: f64,
    remaining: f64,
    params: &PendulumParams,
    settings: &PlannerSettings,
) -> Result<ReplanSolution, ReplanError> {
    bc.validate()?;
    settings.validate()?;
    if !(t_target > 0.0 && t_target.is_finite()) {
        return Err(ReplanError::InvalidArgument(format!(
            "target time must be positive, got {t_target}"
        )));
    }
    let in_window = (settings.t_min..=settings.t_max).contains(&t_target);
    let (t_opt, feasible_set) = if in_window && bc.is_feasible(t_target, settings.knots, params) {
        (t_target, None)
    } else {
        let set = feasible_time_set(bc, params, settings);
        let t = set.project(t_target).ok_or(ReplanError::Unrecoverable {
            t_min: settings.t_min,
            t_max: settings.t_max,
        })?;
        (t, Some(set))
    };
    let plan =
        min_energy_control(bc, t_opt, params, settings.knots, settings.qp_tol)?.ok_or(ReplanError::Unrecoverable {
            t_min: settings.t_min,
            t_max: settings.t_max,
        })?;
    Ok(ReplanSolution {
        t_opt,
        t_target,
        respected: (t_opt - t_target).abs() <= settings.time_tol,
        sigma_rate: remaining.max(0.0) / t_opt,
        plan,
        feasible_set,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> PendulumParams {
        PendulumParams::default()
    }

    fn rest() -> LipState {
        LipState::new(Vec2::zeros(), Vec2::zeros())
    }

    #[test]
    fn target_time_examples() {
        assert_eq!(target_time(0.5, 0.5, 1.0).unwrap(), 1.0);
        assert_eq!(target_time(1.0, 0.3, 1.0).unwrap(), 0.0);
        assert!((target_time(0.0, 1.0 / 0.96, 1.0).unwrap() - 0.96).abs() < 1e-15);
        assert!(target_time(0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn equilibrium_needs_no_effort() {
        let bc = BoundaryConditions {
            x0: rest(),
            xf: rest(),
            polygon: SupportPolygon::default(),
        };
        let plan = min_energy_control(&bc, 0.8, &params(), 64, 1e-13).unwrap().unwrap();
        assert!(plan.cop.iter().all(|u| u.norm() == 0.0));
        assert_eq!(plan.cost, 0.0);
        let set = feasible_time_set(&bc, &params(), &PlannerSettings::default());
        assert_eq!(set.intervals, vec![(0.05, 3.0)]);
    }

    #[test]
    fn unreachable_target_is_empty() {
        // DCM far outside the polygon diverges away: never recoverable.
        let x0 = LipState::new(Vec2::new(0.3, 0.0), Vec2::new(0.5, 0.0));
        let bc = BoundaryConditions {
            x0,
            xf: rest(),
            polygon: SupportPolygon::default(),
        };
        let set = feasible_time_set(&bc, &params(), &PlannerSettings::default());
        assert!(set.is_empty());
        let err = solve_problem1(&bc, 1.0, 0.5, &params(), &PlannerSettings::default()).unwrap_err();
        assert!(matches!(err, ReplanError::Unrecoverable { .. }));
    }

    #[test]
    fn projection_prefers_smaller_on_ties() {
        let set = FeasibleTimeSet {
            intervals: vec![(0.2, 0.4), (0.6, 0.9)],
        };
        assert_eq!(set.project(0.5), Some(0.4));
        assert_eq!(set.project(0.3), Some(0.3));
        assert_eq!(set.project(1.2), Some(0.9));
        assert_eq!(set.project(0.1), Some(0.2));
        assert_eq!(FeasibleTimeSet::default().project(0.3), None);
    }

    #[test]
    fn near_bang_bang_plans_converge() {
        // Only two knots are free at the lower end of the feasible interval;
        // the Newton damping must not swamp their small curvature.
        let bc = BoundaryConditions {
            x0: LipState::new(
                Vec2::new(0.0, 0.026745576778672613),
                Vec2::new(0.0, -0.2502367713997286),
            ),
            xf: LipState::new(Vec2::new(0.0, 0.1087711423967018), Vec2::new(0.0, 0.3990740286247814)),
            polygon: SupportPolygon::default(),
        };
        let sol = solve_problem1(&bc, 0.05, 0.5, &params(), &PlannerSettings::default()).unwrap();
        assert!(sol.plan.residual < 1e-12);
        assert!((sol.t_opt - 1.7805).abs() < 1e-3, "{}", sol.t_opt);
    }

    #[test]
    fn plan_reaches_target() {
        let x0 = LipState::new(Vec2::new(-0.02, 0.01), Vec2::new(0.15, 0.05));
        let xf = LipState::new(Vec2::new(0.03, -0.02), Vec2::new(0.1, -0.08));
        let bc = BoundaryConditions {
            x0,
            xf,
            polygon: SupportPolygon::default(),
        };
        let sol = solve_problem1(&bc, 0.6, 0.5, &params(), &PlannerSettings::default()).unwrap();
        let end = sol.plan.final_state();
        assert!(end.distance(&xf) < 1e-6, "{:?} vs {:?}", end, xf);
        assert!(sol.plan.cop.iter().all(|u| bc.polygon.contains(u)));
        let (s, _) = sol.reference_at(sol.t_opt);
        assert!(s.distance(&xf) < 1e-6);
    }
}
