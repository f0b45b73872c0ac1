//! Per-tick records and the trace CSV.

use std::io::Write;

use crate::gait::Phase;
use crate::lip::{PendulumParams, Vec2};

pub const TRACE_COLUMNS: [&str; 18] = [
    "t",
    "sigma",
    "sigma_dot_t",
    "sigma_dot_opt",
    "T_t",
    "T_opt",
    "respected",
    "com_x",
    "com_y",
    "dcm_x",
    "dcm_y",
    "u_star_x",
    "u_star_y",
    "u_cmd_x",
    "u_cmd_y",
    "u_applied_x",
    "u_applied_y",
    "phase",
];

/// One control tick. Positions are in the support-foot frame; the foot pose
/// maps them to the world frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickRecord {
    pub t: f64,
    pub step: usize,
    pub phase: Phase,
    pub sigma: f64,
    pub sigma_rate_target: f64,
    /// Rate actually used to advance σ (σ̇^opt for online planning).
    pub sigma_rate: f64,
    pub t_target: f64,
    pub t_opt: f64,
    pub respected: bool,
    /// State after the tick's propagation.
    pub com: Vec2,
    pub com_vel: Vec2,
    /// Reference CoP.
    pub u_star: Vec2,
    /// Stabilizer command before clamping.
    pub u_cmd: Vec2,
    pub u_applied: Vec2,
    pub foot_world: Vec2,
    pub lateral_sign: f64,
}

impl TickRecord {
    pub fn to_world(&self, p: &Vec2) -> Vec2 {
        self.foot_world + Vec2::new(p[0], self.lateral_sign * p[1])
    }

    pub fn dcm(&self, params: &PendulumParams) -> Vec2 {
        self.com + self.com_vel / params.omega()
    }
}

/// Write records as CSV in the world frame.
pub fn write_trace<W: Write>(ticks: &[TickRecord], params: &PendulumParams, writer: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| std::io::Error::other(e);
    w.write_record(TRACE_COLUMNS).map_err(io)?;
    for r in ticks {
        let com = r.to_world(&r.com);
        let dcm = r.to_world(&r.dcm(params));
        let us = r.to_world(&r.u_star);
        let uc = r.to_world(&r.u_cmd);
        let ua = r.to_world(&r.u_applied);
        let row = [
            r.t.to_string(),
            r.sigma.to_string(),
            r.sigma_rate_target.to_string(),
            r.sigma_rate.to_string(),
            r.t_target.to_string(),
            r.t_opt.to_string(),
            (r.respected as u8).to_string(),
            com[0].to_string(),
            com[1].to_string(),
            dcm[0].to_string(),
            dcm[1].to_string(),
            us[0].to_string(),
            us[1].to_string(),
            uc[0].to_string(),
            uc[1].to_string(),
            ua[0].to_string(),
            ua[1].to_string(),
            r.phase.label().to_string(),
        ];
        w.write_record(&row).map_err(io)?;
    }
    w.flush()
}
