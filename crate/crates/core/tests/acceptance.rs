//! Acceptance criteria, one pass/fail line each. Runs without the libtest
//! harness so every line is printed; exits non-zero if any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{default_setup, feasibility_margin, qp_cost};
use exoplan_core::guides::{swing_torque, target_velocity, SwingJointState};
use exoplan_core::lip::{propagate, LipState, PendulumParams, SupportPolygon, Vec2};
use exoplan_core::replanner::{feasible_time_set, solve_problem1};
use exoplan_core::sim::bench::{bench_solver, record_corpus};
use exoplan_core::sim::map::{default_grid, stability_map, CellStatus};
use exoplan_core::sim::{run_step, run_walk, PatientModel, PlannerTick, StepProfiles, Strategy, VelocityProfile};
use exoplan_core::stabilizer::{dcm_control, DcmGains, StabilizerState};

type Check = fn() -> Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn scripted(p: StepProfiles) -> PatientModel {
    PatientModel::Scripted(p)
}

/// The ±50% scenario: steps alternate between a slow and a fast wearer.
fn alternating() -> StepProfiles {
    StepProfiles(vec![
        VelocityProfile::square(0.5, 0.5),
        VelocityProfile::square(1.5, 0.5),
    ])
}

fn patient_priority() -> Result<String, String> {
    let (gait, mut cfg) = default_setup();
    cfg.record_planner = true;
    let profiles = [
        StepProfiles::uniform(VelocityProfile::Nominal),
        StepProfiles::uniform(VelocityProfile::Constant { fraction: 0.6 }),
        StepProfiles::uniform(VelocityProfile::Constant { fraction: 0.8 }),
        StepProfiles::uniform(VelocityProfile::Constant { fraction: 1.3 }),
        StepProfiles::uniform(VelocityProfile::square(0.6, 0.4)),
        StepProfiles::uniform(VelocityProfile::square(1.3, 0.3)),
        alternating(),
    ];
    let mut ticks: Vec<PlannerTick> = Vec::new();
    for p in profiles {
        let walk = run_walk(&gait, Strategy::OnlinePlanning, &scripted(p), 3, &cfg).map_err(|e| e.to_string())?;
        ticks.extend(walk.planner);
    }
    ensure(ticks.len() >= 10_000, || format!("only {} planner ticks", ticks.len()))?;
    let s = cfg.planner;
    let w = cfg.params.omega();
    let (mut confirmed, mut worst) = (0usize, 0.0f64);
    for t in &ticks {
        let in_window = (s.t_min..=s.t_max).contains(&t.t_target);
        if in_window && feasibility_margin(&t.bc, t.t_target, s.knots, w) > 1e-9 {
            confirmed += 1;
            worst = worst.max((t.t_opt - t.t_target).abs());
        }
    }
    ensure(confirmed > 0, || "no tick had a feasible target".into())?;
    ensure(worst <= 1e-4, || {
        format!("|T^opt − T^t| = {worst:.3e} on a feasible target")
    })?;
    Ok(format!(
        "{} ticks, {confirmed} with T^t feasible, max |T^opt − T^t| = {worst:.1e}",
        ticks.len()
    ))
}

fn constraint_satisfaction() -> Result<String, String> {
    let start = Instant::now();
    let (gait, mut cfg) = default_setup();
    cfg.record_planner = true;
    let slow = scripted(StepProfiles::uniform(VelocityProfile::Constant { fraction: 0.6 }));
    let op = run_step(&gait, Strategy::OnlinePlanning, &slow, &cfg).map_err(|e| e.to_string())?;
    let mut worst_end: f64 = 0.0;
    for t in &op.planner {
        let sol =
            solve_problem1(&t.bc, t.t_target, t.remaining, &cfg.params, &cfg.planner).map_err(|e| e.to_string())?;
        ensure(sol.plan.cop.iter().all(|u| t.bc.polygon.contains(u)), || {
            format!("knot outside U at step {}", t.step)
        })?;
        worst_end = worst_end.max(sol.plan.final_state().distance(&t.bc.xf));
    }
    let step = &op.steps[0];
    ensure(step.stable(), || format!("OP fell: {}", step.fall_reason.label()))?;
    ensure(step.terminal_error < 1e-3, || {
        format!("OP terminal error {:.3e} m", step.terminal_error)
    })?;
    ensure(worst_end < 1e-3, || format!("planned terminal error {worst_end:.3e}"))?;
    let tr = run_step(&gait, Strategy::TimeRescaling, &slow, &cfg).map_err(|e| e.to_string())?;
    let exit = tr.steps[0].max_reference_exit;
    ensure(exit > 0.0, || "TR reference CoP stayed inside U".into())?;
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 10.0, || format!("took {secs:.1} s"))?;
    Ok(format!(
        "OP: {} plans inside U, terminal error {:.1e} m; TR u* leaves U by {:.1} mm; {secs:.1} s",
        op.planner.len(),
        step.terminal_error,
        exit * 1e3
    ))
}

fn stability_map_dominance() -> Result<String, String> {
    let start = Instant::now();
    let (gait, cfg) = default_setup();
    let (mags, durs) = default_grid();
    let tr = stability_map(&gait, Strategy::TimeRescaling, &mags, &durs, 10, &cfg).map_err(|e| e.to_string())?;
    let op = stability_map(&gait, Strategy::OnlinePlanning, &mags, &durs, 10, &cfg).map_err(|e| e.to_string())?;
    ensure(tr.strictly_contained_in(&op), || {
        format!(
            "stable cells tr {} op {}: no strict containment",
            tr.stable_count(),
            op.stable_count()
        )
    })?;
    let row = |m: f64| mags.iter().position(|x| (x - m).abs() < 1e-9).expect("grid row");
    for (j, d) in durs.iter().enumerate() {
        ensure(op.cell(row(0.7), j).status == CellStatus::Stable, || {
            format!("OP unstable at 70%, {d} s")
        })?;
        if *d <= 0.3 + 1e-9 {
            ensure(op.cell(row(0.5), j).status == CellStatus::Stable, || {
                format!("OP unstable at 50%, {d} s")
            })?;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 300.0, || format!("took {secs:.1} s"))?;
    Ok(format!(
        "stable cells tr {} ⊊ op {}; {secs:.1} s",
        tr.stable_count(),
        op.stable_count()
    ))
}

fn ten_step_run() -> Result<String, String> {
    let start = Instant::now();
    let (gait, cfg) = default_setup();
    let patient = scripted(alternating());
    let op = run_walk(&gait, Strategy::OnlinePlanning, &patient, 10, &cfg).map_err(|e| e.to_string())?;
    let tr = run_walk(&gait, Strategy::TimeRescaling, &patient, 10, &cfg).map_err(|e| e.to_string())?;
    ensure(op.steps.len() == 10 && op.falls() == 0, || {
        format!("OP completed {} steps, {} falls", op.steps.len(), op.falls())
    })?;
    ensure(tr.falls() >= 1, || "TR never fell".into())?;
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 30.0, || format!("took {secs:.1} s"))?;
    Ok(format!(
        "OP 10/10 steps stable; TR falls at step {}; {secs:.1} s",
        tr.steps.len() - 1
    ))
}

fn solver_bench() -> Result<String, String> {
    let (gait, cfg) = default_setup();
    let corpus = record_corpus(&gait, &cfg, 10, 10_000, 7).map_err(|e| e.to_string())?;
    let stats = bench_solver(&corpus, &cfg.params, &cfg.planner).map_err(|e| e.to_string())?;
    ensure(stats.cases == 10_000, || format!("{} cases", stats.cases))?;
    ensure(stats.failures == 0, || format!("{} solver failures", stats.failures))?;
    ensure(stats.mean_ms < 1.0 && stats.p99_ms < 2.0, || {
        format!("mean {:.3} ms, p99 {:.3} ms", stats.mean_ms, stats.p99_ms)
    })?;
    Ok(format!(
        "10000 cases: mean {:.4} ms, p99 {:.4} ms, max {:.3} ms",
        stats.mean_ms, stats.p99_ms, stats.max_ms
    ))
}

fn oracles() -> Result<String, String> {
    let (gait, cfg) = default_setup();
    let s = cfg.planner;
    let w = cfg.params.omega();
    let cases = record_corpus(&gait, &cfg, 10, 500, 11).map_err(|e| e.to_string())?;
    let grid_len = ((s.t_max - s.t_min) / s.time_tol).round() as usize;
    let mut max_card = 0;
    for (n, c) in cases.iter().enumerate() {
        let bc = c.boundary_conditions().map_err(|e| e.to_string())?;
        let set = feasible_time_set(&bc, &cfg.params, &s);
        max_card = max_card.max(set.intervals.len());
        let near_edge = |t: f64| {
            set.intervals
                .iter()
                .any(|(a, b)| (t - a).abs() <= s.time_tol || (t - b).abs() <= s.time_tol)
        };
        let mut runs = 0;
        let mut prev = false;
        for i in 0..=grid_len {
            let t = s.t_min + (s.t_max - s.t_min) * i as f64 / grid_len as f64;
            let inside = bc.is_feasible(t, s.knots, &cfg.params);
            runs += (inside && !prev) as usize;
            prev = inside;
            if inside != set.contains(t) && !near_edge(t) {
                return Err(format!(
                    "case {n}: grid says {inside} at T = {t:.4} s, set {:?}",
                    set.intervals
                ));
            }
            // Every 1 ms, the exact membership test against the facet oracle.
            if i % 10 == 0 {
                let m = feasibility_margin(&bc, t, s.knots, w);
                if m.abs() > 1e-9 && (m > 0.0) != inside {
                    return Err(format!(
                        "case {n}: oracle margin {m:.3e} but membership {inside} at T = {t:.4} s"
                    ));
                }
            }
        }
        ensure(runs <= 2, || format!("case {n}: {runs} feasible runs on the grid"))?;
    }
    ensure(max_card <= 2, || format!("feasible set with {max_card} intervals"))?;

    let mut worst: f64 = 0.0;
    for (n, c) in cases.iter().take(200).enumerate() {
        let bc = c.boundary_conditions().map_err(|e| e.to_string())?;
        let sol = solve_problem1(&bc, c.t_target, c.remaining, &cfg.params, &s).map_err(|e| e.to_string())?;
        let reference =
            qp_cost(&bc, sol.t_opt, 2000, w).ok_or_else(|| format!("case {n}: oracle failed at T = {}", sol.t_opt))?;
        let err = (sol.plan.cost - reference).abs() / reference.max(1e-9);
        worst = worst.max(err);
        ensure(err < 5e-3, || {
            format!("case {n}: cost {:.6e} vs oracle {reference:.6e}", sol.plan.cost)
        })?;
    }
    Ok(format!(
        "500 feasible sets match the {:.0e} s grid (max {max_card} intervals); 200 QP costs within {:.3}% of 2000 knots",
        s.time_tol,
        worst * 100.0
    ))
}

fn numerical_checks() -> Result<String, String> {
    let p = PendulumParams::default();
    let w = p.omega();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut v2 = |r: f64| Vec2::new(rng.random_range(-r..r), rng.random_range(-r..r));
    let (mut semigroup, mut dcm) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let x = LipState::new(v2(0.2), v2(0.5));
        let u = v2(0.1);
        let (t1, t2) = (0.7 * v2(1.0)[0].abs(), 0.7 * v2(1.0)[0].abs());
        let two = propagate(&propagate(&x, &u, t1, &p).unwrap(), &u, t2, &p).unwrap();
        let one = propagate(&x, &u, t1 + t2, &p).unwrap();
        semigroup = semigroup.max(two.distance(&one));
        let (d0, d1) = (x.to_dcm(&p), one.to_dcm(&p));
        let t = t1 + t2;
        let xi = u + (d0.dcm - u) * (w * t).exp();
        let zeta = u + (d0.cdm - u) * (-w * t).exp();
        dcm = dcm.max((d1.dcm - xi).norm()).max((d1.cdm - zeta).norm());
        dcm = dcm.max(LipState::from_dcm(&d0, &p).distance(&x));
    }
    ensure(semigroup < 1e-10, || format!("semigroup defect {semigroup:.2e}"))?;
    ensure(dcm < 1e-10, || format!("DCM identity defect {dcm:.2e}"))?;

    let (gait, cfg) = default_setup();
    let path = &gait.path;
    let mut null: f64 = 0.0;
    for _ in 0..1000 {
        let sigma = rng.random_range(0.0..path.total_length());
        let point = path.eval(sigma);
        let noise = exoplan_core::gait::JointVec::from_fn(|_, _| rng.random_range(-0.05..0.05));
        let state = SwingJointState {
            q: point.position + noise,
            qd: point.tangent * rng.random_range(-1.0..2.0) + noise * 3.0,
        };
        let tv = target_velocity(path, sigma, &state, &cfg.swing_gains, &gait.limits);
        let tau = swing_torque(path, sigma, tv.raw, &state, &cfg.swing_gains);
        null = null.max(point.tangent.dot(&tau).abs());
    }
    ensure(null < 1e-9, || format!("tangential guide torque {null:.2e}"))?;

    let n = 20_000;
    let tangent = (0..=n)
        .map(|i| (path.raw_tangent(path.total_length() * i as f64 / n as f64).norm() - 1.0).abs())
        .fold(0.0, f64::max);
    ensure(tangent < 1e-4, || format!("unit-tangent deviation {tangent:.2e}"))?;
    Ok(format!(
        "semigroup {semigroup:.1e}, DCM {dcm:.1e}, guide nullification {null:.1e}, tangent {tangent:.1e}"
    ))
}

fn stabilizer_recovery() -> Result<String, String> {
    let p = PendulumParams::default();
    let poly = SupportPolygon::default();
    let dt = 1e-3;
    let rest = LipState::new(Vec2::zeros(), Vec2::zeros());
    let mut x = LipState::new(Vec2::new(0.02, 0.0), Vec2::zeros());
    let mut s = StabilizerState::default();
    let gains = DcmGains::default();
    let mut settled = None;
    for k in 1..=3000 {
        let out = dcm_control(&x, &rest, &Vec2::zeros(), &mut s, &gains, &p, &poly, dt);
        x = propagate(&x, &out.command, dt, &p).unwrap();
        s.record_applied(out.command);
        let err = x.to_dcm(&p).dcm.norm();
        match (err < 1e-3, settled) {
            (true, None) => settled = Some(k as f64 * dt),
            (false, Some(_)) => settled = None,
            _ => {}
        }
    }
    let t = settled.ok_or("DCM error never settled below 1 mm")?;
    ensure(t <= 1.0, || format!("settled below 1 mm after {t:.3} s"))?;
    Ok(format!(
        "2 cm DCM offset below 1 mm after {:.0} ms and stays there",
        t * 1e3
    ))
}

fn main() {
    let checks: [(&str, Check); 8] = [
        ("1 patient priority", patient_priority),
        ("2 constraint satisfaction", constraint_satisfaction),
        ("3 stability map", stability_map_dominance),
        ("4 ten-step run", ten_step_run),
        ("5 solver bench", solver_bench),
        ("6 oracles", oracles),
        ("7 numerical checks", numerical_checks),
        ("8 stabilizer recovery", stabilizer_recovery),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {name}: {detail} [{secs:.1} s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail} [{secs:.1} s]");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
