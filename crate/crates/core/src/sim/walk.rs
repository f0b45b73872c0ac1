//! The 1 ms tick loop: wearer → guides → reference → stabilizer → plant.

use std::time::Instant;

use serde::Serialize;

use super::falls::{FallMonitor, FallReason};
use super::patient::{PatientModel, SwingPlant};
use super::trace::TickRecord;
use super::{PreparedGait, SimConfig, SimError, Strategy};
use crate::gait::{double_support_polygon, to_next_frame, JointVec, Phase};
use crate::guides::{swing_torque, target_velocity, SwingJointState, VelocityFilter};
use crate::lip::{propagate_unchecked, LipState, SupportPolygon, Vec2};
use crate::replanner::{solve_problem1, target_time, BoundaryConditions, ReplanSolution};
use crate::stabilizer::{dcm_control, StabilizerState};

/// Result of one single-support phase (and the double support after it).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepOutcome {
    pub index: usize,
    pub fall_reason: FallReason,
    /// End-of-single-support CoM position error, m.
    pub terminal_error: f64,
    /// Single-support duration, s.
    pub duration: f64,
    /// Fraction of planner ticks that respected the wearer's schedule.
    pub respected_fraction: f64,
    /// Largest distance of the reference CoP outside the foot polygon, m.
    pub max_reference_exit: f64,
    /// Largest swing-joint deviation from the guide reference, rad.
    pub max_swing_error: f64,
    /// Number of ticks on which Problem 1 was solved.
    pub planner_ticks: usize,
}

impl StepOutcome {
    pub fn stable(&self) -> bool {
        !self.fall_reason.is_fall()
    }

    pub fn classification(&self) -> &'static str {
        if self.stable() {
            "stable"
        } else {
            "fallen"
        }
    }
}

/// One logged call of the planner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerTick {
    pub step: usize,
    pub bc: BoundaryConditions,
    pub t_target: f64,
    pub remaining: f64,
    pub t_opt: f64,
    pub respected: bool,
    pub solve_seconds: f64,
}

#[derive(Debug, Clone, Default)]
pub struct WalkResult {
    pub steps: Vec<StepOutcome>,
    pub ticks: Vec<TickRecord>,
    pub planner: Vec<PlannerTick>,
}

impl WalkResult {
    pub fn all_stable(&self) -> bool {
        self.steps.iter().all(StepOutcome::stable)
    }

    pub fn falls(&self) -> usize {
        self.steps.iter().filter(|s| !s.stable()).count()
    }
}

/// A single step from the nominal initial state.
pub fn run_step(
    gait: &PreparedGait,
    strategy: Strategy,
    patient: &PatientModel,
    config: &SimConfig,
) -> Result<WalkResult, SimError> {
    run_walk(gait, strategy, patient, 1, config)
}

/// `n_steps` chained steps. Stops after the first fall.
pub fn run_walk(
    gait: &PreparedGait,
    strategy: Strategy,
    patient: &PatientModel,
    n_steps: usize,
    config: &SimConfig,
) -> Result<WalkResult, SimError> {
    config.validate()?;
    if n_steps == 0 {
        return Err(SimError::Invalid("need at least one step".into()));
    }
    if !patient.is_valid() {
        return Err(SimError::Invalid("invalid patient model".into()));
    }
    let mut walker = Walker {
        g: gait,
        cfg: config,
        strategy,
        patient,
        x: gait.gait.initial_state(),
        stab: StabilizerState::new(config.windup_bound)?,
        filter: config.velocity_filter.map(VelocityFilter::new).transpose()?,
        applied: None,
        foot_world: Vec2::zeros(),
        lateral_sign: 1.0,
        clock: 0,
        result: WalkResult::default(),
    };
    for k in 0..n_steps {
        let outcome = walker.single_support(k);
        let fell = !outcome.stable();
        walker.result.steps.push(outcome);
        if fell {
            break;
        }
        if k + 1 < n_steps {
            if let Err(reason) = walker.double_support(k) {
                let last = walker.result.steps.last_mut().expect("step recorded");
                last.fall_reason = reason;
                break;
            }
        }
    }
    Ok(walker.result)
}

struct Walker<'a> {
    g: &'a PreparedGait,
    cfg: &'a SimConfig,
    strategy: Strategy,
    patient: &'a PatientModel,
    /// CoM state in the current support-foot frame.
    x: LipState,
    stab: StabilizerState,
    filter: Option<VelocityFilter>,
    /// CoP applied on the previous tick (actuation-lag state).
    applied: Option<Vec2>,
    foot_world: Vec2,
    lateral_sign: f64,
    /// Global tick counter.
    clock: u64,
    result: WalkResult,
}

/// Reference and rate chosen by the strategy for one tick.
struct TickPlan {
    x_ref: LipState,
    u_ref: Vec2,
    rate: f64,
    t_target: f64,
    t_opt: f64,
    respected: bool,
}

impl Walker<'_> {
    fn now(&self) -> f64 {
        self.clock as f64 * self.cfg.dt
    }

    fn phase_label(&self, step: usize) -> Phase {
        let kind = self.g.gait.single_support().kind;
        if step.is_multiple_of(2) {
            kind
        } else {
            kind.mirrored()
        }
    }

    /// Stabilize toward the reference, apply the CoP and advance the plant.
    /// Returns the pre-clamp command and the applied CoP.
    fn actuate(&mut self, x_ref: &LipState, u_ref: &Vec2, polygon: &SupportPolygon) -> (Vec2, Vec2) {
        let out = dcm_control(
            &self.x,
            x_ref,
            u_ref,
            &mut self.stab,
            &self.cfg.dcm_gains,
            &self.cfg.params,
            polygon,
            self.cfg.dt,
        );
        let applied = match (self.applied, self.cfg.actuation_lag > 0.0) {
            (Some(prev), true) => {
                let a = (-self.cfg.dt / self.cfg.actuation_lag).exp();
                polygon.clamp(&(prev * a + out.command * (1.0 - a)))
            }
            _ => out.command,
        };
        self.applied = Some(applied);
        self.stab.record_applied(applied);
        self.x = propagate_unchecked(&self.x, &applied, self.cfg.dt, self.cfg.params.omega());
        (out.raw, applied)
    }

    fn single_support(&mut self, step: usize) -> StepOutcome {
        let cfg = self.cfg;
        let g = self.g;
        let path = &g.path;
        let l_max = path.total_length();
        let nominal_rate = path.nominal_rate();
        let profile = self.patient.profiles().for_step(step);
        let target = g.gait.final_state();
        let phase = self.phase_label(step);

        let start = path.eval(0.0);
        let mut plant = SwingPlant::new(
            JointVec::repeat(cfg.swing_inertia),
            SwingJointState {
                q: start.position,
                qd: start.tangent * nominal_rate,
            },
        )
        .expect("validated inertia");
        if let Some(f) = self.filter.as_mut() {
            f.reset();
        }

        let planning_polygon = cfg.foot.shrunk(1.0 - cfg.planning_margin).expect("validated margin");
        let mut monitor = FallMonitor::new(cfg.falls);
        let mut sigma = 0.0;
        let mut rate_prev = nominal_rate;
        let mut lock: Option<(ReplanSolution, u64)> = None;
        let mut reason = FallReason::None;
        let mut planner_ticks = 0usize;
        let mut respected_ticks = 0usize;
        let mut max_exit: f64 = 0.0;
        let mut max_swing: f64 = 0.0;
        let max_ticks = (cfg.max_step_time / cfg.dt).ceil() as u64;
        let mut tick: u64 = 0;

        while sigma < l_max {
            if tick >= max_ticks {
                reason = FallReason::TerminalError;
                break;
            }
            let t_local = tick as f64 * cfg.dt;
            let desired = profile.fraction_at(t_local) * nominal_rate;

            // Wearer and virtual guides.
            max_swing = max_swing.max((plant.state.q - path.eval(sigma).position).norm());
            let guide = swing_torque(path, sigma, rate_prev, &plant.state, &cfg.swing_gains);
            let rate_target = match self.patient {
                PatientModel::Scripted(_) => {
                    plant.step(&guide, cfg.dt);
                    g.limits.saturate(desired)
                }
                PatientModel::TangentTorque { stiffness, .. } => {
                    let push = path.eval(sigma).tangent * (stiffness * (desired - rate_prev));
                    plant.step(&(guide + push), cfg.dt);
                    let est = target_velocity(path, sigma, &plant.state, &cfg.swing_gains, &g.limits).saturated;
                    match self.filter.as_mut() {
                        Some(f) => g.limits.saturate(f.update(est, cfg.dt)),
                        None => est,
                    }
                }
            };

            // Reference generation.
            let plan = match self.strategy {
                Strategy::TimeRescaling => {
                    let (x_ref, u_ref) =
                        crate::replanner::rescaled_reference(&g.gait, path, sigma, rate_target, &cfg.params);
                    let t = (l_max - sigma) / rate_target;
                    TickPlan {
                        x_ref,
                        u_ref,
                        rate: rate_target,
                        t_target: t,
                        t_opt: t,
                        respected: true,
                    }
                }
                Strategy::OnlinePlanning => {
                    let t_target = target_time(sigma, rate_target, l_max).expect("saturated rate is positive");
                    if let Some((sol, t0)) = &lock {
                        let elapsed = (tick - t0) as f64 * cfg.dt;
                        let (x_ref, u_ref) = sol.reference_at(elapsed);
                        TickPlan {
                            x_ref,
                            u_ref,
                            rate: sol.sigma_rate,
                            t_target,
                            t_opt: (sol.t_opt - elapsed).max(0.0),
                            respected: sol.respected,
                        }
                    } else {
                        let mut bc = BoundaryConditions {
                            x0: self.x,
                            xf: target,
                            polygon: planning_polygon,
                        };
                        let clock = Instant::now();
                        let mut solved = solve_problem1(&bc, t_target, l_max - sigma, &cfg.params, &cfg.planner);
                        if solved.is_err() && bc.polygon != cfg.foot {
                            bc.polygon = cfg.foot;
                            solved = solve_problem1(&bc, t_target, l_max - sigma, &cfg.params, &cfg.planner);
                        }
                        let secs = clock.elapsed().as_secs_f64();
                        let sol = match solved {
                            Ok(s) => s,
                            Err(_) => {
                                reason = FallReason::PlannerInfeasible;
                                break;
                            }
                        };
                        planner_ticks += 1;
                        respected_ticks += sol.respected as usize;
                        if cfg.record_planner {
                            self.result.planner.push(PlannerTick {
                                step,
                                bc,
                                t_target,
                                remaining: l_max - sigma,
                                t_opt: sol.t_opt,
                                respected: sol.respected,
                                solve_seconds: secs,
                            });
                        }
                        for u in &sol.plan.cop {
                            max_exit = max_exit.max(cfg.foot.exit_distance(u));
                        }
                        let (x_ref, u_ref) = sol.reference_at(0.0);
                        let p = TickPlan {
                            x_ref,
                            u_ref,
                            rate: sol.sigma_rate,
                            t_target,
                            t_opt: sol.t_opt,
                            respected: sol.respected,
                        };
                        let committed = sol.interval_width().is_some_and(|w| w < cfg.lock_width);
                        if sol.t_opt <= cfg.lock_time || committed {
                            lock = Some((sol, tick));
                        }
                        p
                    }
                }
            };
            if self.strategy == Strategy::TimeRescaling {
                max_exit = max_exit.max(cfg.foot.exit_distance(&plan.u_ref));
            }

            let (raw, applied) = self.actuate(&plan.x_ref, &plan.u_ref, &cfg.foot);
            let saturated_too_long = monitor.observe(t_local, cfg.dt, &raw, &cfg.foot);
            if cfg.record_trace {
                self.result.ticks.push(TickRecord {
                    t: self.now(),
                    step,
                    phase,
                    sigma,
                    sigma_rate_target: rate_target,
                    sigma_rate: plan.rate,
                    t_target: plan.t_target,
                    t_opt: plan.t_opt,
                    respected: plan.respected,
                    com: self.x.com,
                    com_vel: self.x.com_vel,
                    u_star: plan.u_ref,
                    u_cmd: raw,
                    u_applied: applied,
                    foot_world: self.foot_world,
                    lateral_sign: self.lateral_sign,
                });
            }
            sigma += plan.rate * cfg.dt;
            rate_prev = plan.rate;
            tick += 1;
            self.clock += 1;
            if saturated_too_long {
                reason = FallReason::CopSaturationTimeout;
                break;
            }
        }

        let terminal_error = (self.x.com - target.com).norm();
        if reason == FallReason::None && monitor.terminal(terminal_error) {
            reason = FallReason::TerminalError;
        }
        StepOutcome {
            index: step,
            fall_reason: reason,
            terminal_error,
            duration: tick as f64 * cfg.dt,
            respected_fraction: if planner_ticks > 0 {
                respected_ticks as f64 / planner_ticks as f64
            } else {
                1.0
            },
            max_reference_exit: max_exit,
            max_swing_error: max_swing,
            planner_ticks,
        }
    }

    /// Double support after step `step`: a reference computed once from the
    /// previous step's mean rate, then the hand-off to the next foot frame.
    fn double_support(&mut self, step: usize) -> Result<(), FallReason> {
        let cfg = self.cfg;
        let g = &self.g.gait;
        let ds = g.double_support().expect("prepared gait has double support");
        let next_foot = g.next_foot_offset();
        let polygon = double_support_polygon(&cfg.foot, &next_foot);
        let ss_nominal = g.single_support().duration();
        let ss_actual = self.result.steps.last().map(|s| s.duration).unwrap_or(ss_nominal);
        let rate = (ss_nominal / ss_actual.max(cfg.dt)).clamp(cfg.velocity_min_fraction, cfg.velocity_max_fraction);
        let t_target = ds.duration() / rate;

        let plan = match self.strategy {
            Strategy::OnlinePlanning => {
                let bc = BoundaryConditions {
                    x0: self.x,
                    xf: g.terminal_state(),
                    polygon,
                };
                Some(
                    solve_problem1(&bc, t_target, 0.0, &cfg.params, &cfg.planner)
                        .map_err(|_| FallReason::PlannerInfeasible)?,
                )
            }
            Strategy::TimeRescaling => None,
        };
        let duration = plan.as_ref().map(|p| p.t_opt).unwrap_or(t_target);
        let ticks = (duration / cfg.dt).round().max(1.0) as u64;
        let w2 = cfg.params.omega() * cfg.params.omega();
        let mut monitor = FallMonitor::new(cfg.falls);
        for i in 0..ticks {
            let t = i as f64 * cfg.dt;
            let (x_ref, u_ref) = match &plan {
                Some(sol) => sol.reference_at(t),
                None => {
                    let (c, cd, cdd) = g.com_at(ds.start + rate * t);
                    (LipState::new(c, cd * rate), c - cdd * (rate * rate) / w2)
                }
            };
            let (raw, applied) = self.actuate(&x_ref, &u_ref, &polygon);
            let fell = monitor.observe(t, cfg.dt, &raw, &polygon);
            if cfg.record_trace {
                self.result.ticks.push(TickRecord {
                    t: self.now(),
                    step,
                    phase: Phase::Double,
                    sigma: self.g.path.total_length(),
                    sigma_rate_target: 0.0,
                    sigma_rate: 0.0,
                    t_target,
                    t_opt: duration,
                    respected: (duration - t_target).abs() <= cfg.planner.time_tol,
                    com: self.x.com,
                    com_vel: self.x.com_vel,
                    u_star: u_ref,
                    u_cmd: raw,
                    u_applied: applied,
                    foot_world: self.foot_world,
                    lateral_sign: self.lateral_sign,
                });
            }
            self.clock += 1;
            if fell {
                return Err(FallReason::CopSaturationTimeout);
            }
        }

        // Hand-off: re-express everything in the next support-foot frame.
        self.x = to_next_frame(&self.x, &next_foot);
        self.stab.mirror_lateral();
        if let Some(u) = self.applied.as_mut() {
            *u = Vec2::new(u[0] - next_foot[0], next_foot[1] - u[1]);
        }
        self.stab.applied = self.applied;
        self.foot_world += Vec2::new(next_foot[0], self.lateral_sign * next_foot[1]);
        self.lateral_sign = -self.lateral_sign;
        Ok(())
    }
}
