//! Independent oracles and fixtures shared by the integration tests.
//!
//! The oracles rebuild the discretized transfer problem from plain LIP
//! propagation in position/velocity coordinates, without the DCM split or
//! the prefix-sum boundary used by the library.
#![allow(dead_code)]

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettings, DefaultSolver, IPSolver, NonnegativeConeT, SolverStatus, ZeroConeT};
use exoplan_core::config::RunConfig;
use exoplan_core::replanner::BoundaryConditions;
use exoplan_core::sim::{PreparedGait, SimConfig};

/// Default gait and simulation settings, built through the configuration.
pub fn default_setup() -> (PreparedGait, SimConfig) {
    let cfg = RunConfig::default();
    let sim = cfg.sim_config().expect("default sim config");
    let gait = cfg.build_gait().expect("default gait");
    (PreparedGait::new(gait, &sim).expect("prepared gait"), sim)
}

/// One axis of the transfer problem: end state `Σ_k u_k g_k + r₀` must equal
/// the target, i.e. `Σ_k u_k g_k = rhs`, with `|u_k| ≤ half`. Coordinates are
/// centered on the polygon; the velocity row is divided by ω.
pub struct AxisMap {
    pub generators: Vec<[f64; 2]>,
    pub rhs: [f64; 2],
    pub half: f64,
}

fn free(p: f64, v: f64, t: f64, w: f64) -> (f64, f64) {
    let (sh, ch) = ((w * t).sinh(), (w * t).cosh());
    (p * ch + v * sh / w, p * w * sh + v * ch)
}

pub fn axis_maps(bc: &BoundaryConditions, duration: f64, knots: usize, omega: f64) -> [AxisMap; 2] {
    let dt = duration / knots as f64;
    let center = bc.polygon.center();
    let half = bc.polygon.half_extents();
    // End state of a unit CoP held over one knot, starting from rest at the origin.
    let (bp, bv) = (1.0 - (omega * dt).cosh(), -omega * (omega * dt).sinh());
    std::array::from_fn(|i| {
        let generators = (0..knots)
            .map(|k| {
                let (p, v) = free(bp, bv, duration - (k + 1) as f64 * dt, omega);
                [p, v / omega]
            })
            .collect();
        let (p0, v0) = free(bc.x0.com[i] - center[i], bc.x0.com_vel[i], duration, omega);
        let (pf, vf) = (bc.xf.com[i] - center[i], bc.xf.com_vel[i]);
        AxisMap {
            generators,
            rhs: [pf - p0, (vf - v0) / omega],
            half: half[i],
        }
    })
}

impl AxisMap {
    /// Smallest relative slack over the facet inequalities of the zonotope
    /// `{Σ u_k g_k : |u_k| ≤ half}`; non-negative iff `rhs` is reachable.
    ///
    /// Facets are parallel to the generators. After sorting generators by
    /// angle, the support along each facet normal is a signed prefix sum.
    pub fn margin(&self) -> f64 {
        let mut keyed: Vec<(f64, [f64; 2])> = self
            .generators
            .iter()
            .map(|v| {
                if v[0] < 0.0 || (v[0] == 0.0 && v[1] < 0.0) {
                    [-v[0], -v[1]]
                } else {
                    *v
                }
            })
            .map(|v| (v[1].atan2(v[0]), v))
            .collect();
        keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
        let g: Vec<[f64; 2]> = keyed.into_iter().map(|(_, v)| v).collect();
        let total = g.iter().fold([0.0, 0.0], |s, v| [s[0] + v[0], s[1] + v[1]]);
        let mut before = [0.0, 0.0];
        let mut worst = f64::INFINITY;
        for v in &g {
            let after = [total[0] - before[0] - v[0], total[1] - before[1] - v[1]];
            let diff = [after[0] - before[0], after[1] - before[1]];
            let norm = v[0].hypot(v[1]);
            let support = self.half * (v[0] * diff[1] - v[1] * diff[0]).abs() / norm;
            let reach = (v[0] * self.rhs[1] - v[1] * self.rhs[0]).abs() / norm;
            worst = worst.min((support - reach) / support);
            before = [before[0] + v[0], before[1] + v[1]];
        }
        worst
    }
}

/// Relative reachability margin of both axes at `duration`.
pub fn feasibility_margin(bc: &BoundaryConditions, duration: f64, knots: usize, omega: f64) -> f64 {
    axis_maps(bc, duration, knots, omega)
        .iter()
        .map(AxisMap::margin)
        .fold(f64::INFINITY, f64::min)
}

/// Minimum of `Σ ‖u_k − center‖² Δt` with a general-purpose interior-point
/// solver; `None` when the solver does not report an optimum.
pub fn qp_cost(bc: &BoundaryConditions, duration: f64, knots: usize, omega: f64) -> Option<f64> {
    let dt = duration / knots as f64;
    let mut cost = 0.0;
    for axis in axis_maps(bc, duration, knots, omega) {
        let n = knots;
        let p = CscMatrix::new(n, n, (0..=n).collect(), (0..n).collect(), vec![2.0 * dt; n]);
        let q = vec![0.0; n];
        // Normalize both equality rows; their raw scale grows like e^{ωT}.
        let scale: [f64; 2] =
            std::array::from_fn(|r| axis.generators.iter().map(|g| g[r] * g[r]).sum::<f64>().sqrt().recip());
        let mut colptr = Vec::with_capacity(n + 1);
        let mut rowval = Vec::with_capacity(4 * n);
        let mut nzval = Vec::with_capacity(4 * n);
        for (j, g) in axis.generators.iter().enumerate() {
            colptr.push(rowval.len());
            rowval.extend([0, 1, 2 + j, 2 + n + j]);
            nzval.extend([g[0] * scale[0], g[1] * scale[1], 1.0, -1.0]);
        }
        colptr.push(rowval.len());
        let a = CscMatrix::new(2 + 2 * n, n, colptr, rowval, nzval);
        let mut b = vec![axis.rhs[0] * scale[0], axis.rhs[1] * scale[1]];
        b.extend(std::iter::repeat_n(axis.half, 2 * n));
        let cones = [ZeroConeT(2), NonnegativeConeT(2 * n)];
        let settings = DefaultSettings {
            verbose: false,
            ..Default::default()
        };
        let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, settings).ok()?;
        solver.solve();
        if !matches!(
            solver.solution.status,
            SolverStatus::Solved | SolverStatus::AlmostSolved
        ) {
            return None;
        }
        cost += solver.solution.x.iter().map(|u| u * u * dt).sum::<f64>();
    }
    Some(cost)
}
