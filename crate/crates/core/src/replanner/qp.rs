//! Minimum-energy CoP knots for one axis.
//!
//! `min ½‖u‖²  s.t.  A u = b,  |u_k| ≤ h` is solved through its two-variable
//! dual: the primal minimizer is `u = clip(Aᵀλ, −h, h)` and `λ` minimizes the
//! convex, once-differentiable `θ(λ) = Σ φ(a_kᵀλ) − λᵀb` with the Huber-type
//! `φ`. A regularized semismooth Newton method with Armijo backtracking
//! identifies the active set in a few iterations.

use super::AxisProblem;

#[derive(Debug, Clone, PartialEq)]
pub struct AxisSolution {
    /// Centered knot values.
    pub knots: Vec<f64>,
    /// Dual multipliers of the two equality constraints.
    pub multipliers: [f64; 2],
    /// Max-norm residual of the equality constraints.
    pub residual: f64,
    pub iterations: usize,
}

const MAX_ITER: usize = 100;

impl AxisProblem {
    /// Exact quadrature weights `(a, c)` of the two boundary constraints.
    pub fn weights(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.knots;
        let step = self.omega * self.duration / n as f64;
        let wt = self.omega * self.duration;
        let mut a = Vec::with_capacity(n);
        let mut c = Vec::with_capacity(n);
        for k in 0..n {
            let (w0, w1) = (k as f64 * step, (k + 1) as f64 * step);
            a.push((-w0).exp() - (-w1).exp());
            c.push((w1 - wt).exp() - (w0 - wt).exp());
        }
        (a, c)
    }

    /// Solve the knot QP. The caller is expected to have checked feasibility;
    /// on an infeasible problem the returned residual stays large.
    pub fn solve(&self, tol: f64) -> AxisSolution {
        let (a, c) = self.weights();
        let h = self.half_width;
        let b = [self.b1, self.b2];
        let n = self.knots;

        let gram = [
            a.iter().map(|x| x * x).sum::<f64>(),
            a.iter().zip(&c).map(|(x, y)| x * y).sum::<f64>(),
            c.iter().map(|x| x * x).sum::<f64>(),
        ];

        let eval = |lam: [f64; 2], u: &mut [f64]| -> (f64, [f64; 2], [f64; 3]) {
            let mut theta = -(lam[0] * b[0] + lam[1] * b[1]);
            let mut f = [-b[0], -b[1]];
            let mut j = [0.0; 3];
            for k in 0..n {
                let z = a[k] * lam[0] + c[k] * lam[1];
                let (uk, phi) = if z > h {
                    (h, h * z - 0.5 * h * h)
                } else if z < -h {
                    (-h, -h * z - 0.5 * h * h)
                } else {
                    j[0] += a[k] * a[k];
                    j[1] += a[k] * c[k];
                    j[2] += c[k] * c[k];
                    (z, 0.5 * z * z)
                };
                u[k] = uk;
                theta += phi;
                f[0] += a[k] * uk;
                f[1] += c[k] * uk;
            }
            (theta, f, j)
        };

        // Unconstrained least-norm multipliers as the starting point.
        let mut lam = solve2(gram, [0.0, 0.0], b).unwrap_or([0.0, 0.0]);
        let mut u = vec![0.0; n];
        let mut trial = vec![0.0; n];
        let (mut theta, mut f, mut jac) = eval(lam, &mut u);
        let mut iterations = 0;
        while iterations < MAX_ITER && inf_norm(f) > tol {
            iterations += 1;
            // Marquardt damping, scaled per direction by the free-knot
            // curvature: near a bang-bang solution only a few knots are free,
            // their curvature is strongly anisotropic, and a uniform damping
            // would swamp the weak direction.
            let mu = 1e-12 + inf_norm(f).min(1e-2);
            let damping = [mu * jac[0].max(1e-12 * gram[0]), mu * jac[2].max(1e-12 * gram[2])];
            let Some(d) = solve2(jac, damping, [-f[0], -f[1]]) else {
                break;
            };
            let slope = f[0] * d[0] + f[1] * d[1];
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let cand = [lam[0] + t * d[0], lam[1] + t * d[1]];
                let (th, fc, jc) = eval(cand, &mut trial);
                if th <= theta + 1e-4 * t * slope || inf_norm(fc) <= tol {
                    lam = cand;
                    theta = th;
                    f = fc;
                    jac = jc;
                    std::mem::swap(&mut u, &mut trial);
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        AxisSolution {
            knots: u,
            multipliers: lam,
            residual: inf_norm(f),
            iterations,
        }
    }
}

fn inf_norm(v: [f64; 2]) -> f64 {
    v[0].abs().max(v[1].abs())
}

/// Solve `(J + diag(d)) x = r` for a symmetric 2×2 `J = [j0 j1; j1 j2]`.
fn solve2(j: [f64; 3], d: [f64; 2], r: [f64; 2]) -> Option<[f64; 2]> {
    let (m00, m01, m11) = (j[0] + d[0], j[1], j[2] + d[1]);
    let det = m00 * m11 - m01 * m01;
    if !(det.abs() > 0.0) || !det.is_finite() {
        return None;
    }
    Some([(m11 * r[0] - m01 * r[1]) / det, (m00 * r[1] - m01 * r[0]) / det])
}
