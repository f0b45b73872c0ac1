//! Exact feasibility of the discretized per-axis transfer problem.
//!
//! With `N` piecewise-constant CoP knots over `[0, T]` and the box
//! `|u| ≤ h` (coordinates centered on the polygon), the two boundary
//! constraints read `a·u = b₁` and `c·u = b₂` with
//! `a_k = e^{−ωt_k} − e^{−ωt_{k+1}}` and `c_k = e^{−ω(T−t_{k+1})} − e^{−ω(T−t_k)}`.
//! The reachable set `{(a·u, c·u)}` is a zonotope whose generators are sorted
//! by slope `c_k / a_k` (increasing in `k`), so its lower boundary is the chain
//! of prefix sums `(1 − e^{−ωt_j}, e^{−ωT}(e^{ωt_j} − 1))` and its upper
//! boundary is the point reflection of the lower one. Membership is therefore
//! decided in constant time.

use super::AxisProblem;

impl AxisProblem {
    /// Whether some admissible knot sequence meets both boundary constraints.
    ///
    /// The test is odd-symmetric: negating `(b₁, b₂)` swaps the two
    /// evaluations, so mirrored problems get bitwise identical answers.
    pub fn is_feasible(&self) -> bool {
        self.lower_margin(self.b1, self.b2) >= 0.0 && self.lower_margin(-self.b1, -self.b2) >= 0.0
    }

    /// Signed vertical distance (normalized units) above the lower boundary
    /// chain; negative when `(b₁, b₂)` is below it or left of the zonotope.
    fn lower_margin(&self, b1: f64, b2: f64) -> f64 {
        let h = self.half_width;
        let wt = self.omega * self.duration;
        let e = (-wt).exp();
        let s = -(-wt).exp_m1();
        let x = (b1 + h * s) / (2.0 * h);
        let y = (b2 + h * s) / (2.0 * h);
        if x < 0.0 {
            return x;
        }
        if x > s {
            // Right of the zonotope; the reflected evaluation reports it.
            return 0.0;
        }
        let step = wt / self.knots as f64;
        let cell = (-(-x).ln_1p() / step).floor();
        let j = if cell.is_finite() {
            cell.clamp(0.0, (self.knots - 1) as f64)
        } else {
            (self.knots - 1) as f64
        };
        let (w0, w1) = (j * step, (j + 1.0) * step);
        let (p0, p1) = (-(-w0).exp_m1(), -(-w1).exp_m1());
        let (f0, f1) = (e * w0.exp_m1(), e * w1.exp_m1());
        let chain = f0 + (f1 - f0) * (x - p0) / (p1 - p0);
        y - chain
    }
}
