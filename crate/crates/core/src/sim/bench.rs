//! Solver benchmark over recorded boundary conditions.

use std::io::{Read, Write};
use std::time::Instant;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::patient::{PatientModel, StepProfiles, VelocityProfile};
use super::walk::PlannerTick;
use super::{run_walk, PreparedGait, SimConfig, SimError, Strategy};
use crate::lip::{LipState, PendulumParams, SupportPolygon, Vec2};
use crate::replanner::{solve_problem1, BoundaryConditions, PlannerSettings};

/// One replayable planner call.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusCase {
    pub x0_x: f64,
    pub x0_y: f64,
    pub x0_vx: f64,
    pub x0_vy: f64,
    pub xf_x: f64,
    pub xf_y: f64,
    pub xf_vx: f64,
    pub xf_vy: f64,
    pub lo_x: f64,
    pub lo_y: f64,
    pub hi_x: f64,
    pub hi_y: f64,
    pub t_target: f64,
    pub remaining: f64,
}

impl CorpusCase {
    pub fn from_tick(t: &PlannerTick) -> Self {
        let (lo, hi) = (t.bc.polygon.lower(), t.bc.polygon.upper());
        Self {
            x0_x: t.bc.x0.com[0],
            x0_y: t.bc.x0.com[1],
            x0_vx: t.bc.x0.com_vel[0],
            x0_vy: t.bc.x0.com_vel[1],
            xf_x: t.bc.xf.com[0],
            xf_y: t.bc.xf.com[1],
            xf_vx: t.bc.xf.com_vel[0],
            xf_vy: t.bc.xf.com_vel[1],
            lo_x: lo[0],
            lo_y: lo[1],
            hi_x: hi[0],
            hi_y: hi[1],
            t_target: t.t_target,
            remaining: t.remaining,
        }
    }

    pub fn boundary_conditions(&self) -> Result<BoundaryConditions, SimError> {
        let polygon = SupportPolygon::from_bounds(Vec2::new(self.lo_x, self.lo_y), Vec2::new(self.hi_x, self.hi_y))
            .map_err(|e| SimError::Invalid(e.to_string()))?;
        Ok(BoundaryConditions {
            x0: LipState::new(Vec2::new(self.x0_x, self.x0_y), Vec2::new(self.x0_vx, self.x0_vy)),
            xf: LipState::new(Vec2::new(self.xf_x, self.xf_y), Vec2::new(self.xf_vx, self.xf_vy)),
            polygon,
        })
    }
}

/// Wearer profiles whose online-planning walks feed the recorded corpus:
/// nominal walking, sustained slow and fast walking, and square waves that
/// drive the planner onto the boundary of the feasible set.
fn corpus_profiles() -> Vec<StepProfiles> {
    let mut out = vec![
        StepProfiles::uniform(VelocityProfile::Nominal),
        StepProfiles::uniform(VelocityProfile::Constant { fraction: 0.6 }),
        StepProfiles::uniform(VelocityProfile::Constant { fraction: 1.2 }),
        StepProfiles(vec![
            VelocityProfile::square(0.5, 0.5),
            VelocityProfile::square(1.5, 0.5),
        ]),
    ];
    for (m, d) in [(0.5, 0.3), (0.7, 0.9), (0.8, 0.5), (1.3, 0.4), (0.6, 0.6)] {
        out.push(StepProfiles::uniform(VelocityProfile::square(m, d)));
    }
    out
}

/// Record planner calls from online-planning walks and draw `n` of them
/// with a seeded generator (with replacement if fewer were recorded).
pub fn record_corpus(
    gait: &PreparedGait,
    config: &SimConfig,
    steps: usize,
    n: usize,
    seed: u64,
) -> Result<Vec<CorpusCase>, SimError> {
    let mut config = config.clone();
    config.record_planner = true;
    config.record_trace = false;
    let walks = corpus_profiles()
        .into_par_iter()
        .map(|p| {
            run_walk(
                gait,
                Strategy::OnlinePlanning,
                &PatientModel::Scripted(p),
                steps,
                &config,
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    let pool: Vec<CorpusCase> = walks
        .iter()
        .flat_map(|w| w.planner.iter().map(CorpusCase::from_tick))
        .collect();
    if pool.is_empty() {
        return Err(SimError::Invalid("no planner calls were recorded".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if n <= pool.len() {
        Ok(rand::seq::index::sample(&mut rng, pool.len(), n)
            .into_iter()
            .map(|i| pool[i])
            .collect())
    } else {
        Ok((0..n).map(|_| pool[rng.random_range(0..pool.len())]).collect())
    }
}

pub fn write_corpus<W: Write>(cases: &[CorpusCase], writer: W) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(writer);
    for c in cases {
        w.serialize(c).map_err(|e| SimError::Io(std::io::Error::other(e)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_corpus<R: Read>(reader: R) -> Result<Vec<CorpusCase>, SimError> {
    let mut r = csv::Reader::from_reader(reader);
    r.deserialize()
        .enumerate()
        .map(|(i, c)| c.map_err(|e| SimError::Invalid(format!("corpus row {}: {e}", i + 2))))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimingStats {
    pub cases: usize,
    pub failures: usize,
    pub min_ms: f64,
    pub max_ms: f64,
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p99_ms: f64,
}

impl TimingStats {
    pub fn from_seconds(mut samples: Vec<f64>, failures: usize) -> Self {
        samples.sort_by(f64::total_cmp);
        let n = samples.len();
        let pct = |q: f64| {
            if n == 0 {
                0.0
            } else {
                samples[((q * n as f64).ceil() as usize).clamp(1, n) - 1] * 1e3
            }
        };
        Self {
            cases: n,
            failures,
            min_ms: samples.first().copied().unwrap_or(0.0) * 1e3,
            max_ms: samples.last().copied().unwrap_or(0.0) * 1e3,
            mean_ms: if n == 0 {
                0.0
            } else {
                samples.iter().sum::<f64>() / n as f64 * 1e3
            },
            p50_ms: pct(0.5),
            p99_ms: pct(0.99),
        }
    }

    /// One JSON object per line.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("stats serialize")
    }
}

/// Time `solve_problem1` on every case, sequentially on the calling thread.
pub fn bench_solver(
    cases: &[CorpusCase],
    params: &PendulumParams,
    settings: &PlannerSettings,
) -> Result<TimingStats, SimError> {
    if cases.is_empty() {
        return Err(SimError::Invalid("benchmark corpus is empty".into()));
    }
    let bcs = cases
        .iter()
        .map(CorpusCase::boundary_conditions)
        .collect::<Result<Vec<_>, _>>()?;
    let mut times = Vec::with_capacity(cases.len());
    let mut failures = 0;
    for (bc, c) in bcs.iter().zip(cases) {
        let start = Instant::now();
        let r = solve_problem1(bc, c.t_target, c.remaining, params, settings);
        times.push(start.elapsed().as_secs_f64());
        failures += r.is_err() as usize;
        std::hint::black_box(r.ok());
    }
    Ok(TimingStats::from_seconds(times, failures))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stats_of_known_samples() {
        let s = TimingStats::from_seconds((1..=100).map(|i| i as f64 * 1e-3).collect(), 0);
        assert_eq!(s.cases, 100);
        assert!((s.min_ms - 1.0).abs() < 1e-12);
        assert!((s.max_ms - 100.0).abs() < 1e-12);
        assert!((s.mean_ms - 50.5).abs() < 1e-9);
        assert!((s.p50_ms - 50.0).abs() < 1e-12);
        assert!((s.p99_ms - 99.0).abs() < 1e-12);
    }

    #[test]
    fn corpus_round_trip() {
        let c = CorpusCase {
            x0_x: 0.1,
            x0_y: -0.2,
            x0_vx: 0.3,
            x0_vy: 0.4,
            xf_x: 0.5,
            xf_y: 0.6,
            xf_vx: 0.7,
            xf_vy: 0.8,
            lo_x: -0.1,
            lo_y: -0.05,
            hi_x: 0.1,
            hi_y: 0.05,
            t_target: 0.9,
            remaining: 0.3,
        };
        let mut buf = Vec::new();
        write_corpus(&[c, c], &mut buf).unwrap();
        assert_eq!(read_corpus(buf.as_slice()).unwrap(), vec![c, c]);
    }

    #[test]
    fn recorded_corpus_is_seeded() {
        let cfg = SimConfig::default();
        let gait = crate::gait::generate_synthetic_gait(&Default::default(), &cfg.params, &cfg.foot).unwrap();
        let g = PreparedGait::new(gait, &cfg).unwrap();
        let a = record_corpus(&g, &cfg, 1, 200, 7).unwrap();
        let b = record_corpus(&g, &cfg, 1, 200, 7).unwrap();
        let c = record_corpus(&g, &cfg, 1, 200, 8).unwrap();
        assert_eq!(a.len(), 200);
        assert_eq!(a, b);
        assert_ne!(a, c);
        let stats = bench_solver(&a, &cfg.params, &cfg.planner).unwrap();
        assert_eq!(stats.failures, 0);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(bench_solver(&[], &PendulumParams::default(), &PlannerSettings::default()).is_err());
    }
}
