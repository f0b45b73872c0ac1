//! Small interpolation and differentiation helpers on uniform grids.

use nalgebra::SVector;

/// Fourth-order finite-difference derivative of uniformly sampled values.
///
/// Interior points use the five-point central stencil, points next to the
/// boundary fall back to one-sided fourth-order stencils.
pub fn derivative<const D: usize>(values: &[SVector<f64, D>], h: f64) -> Vec<SVector<f64, D>> {
    let n = values.len();
    let mut out = vec![SVector::<f64, D>::zeros(); n];
    if n < 2 {
        return out;
    }
    if n < 5 {
        for (i, o) in out.iter_mut().enumerate() {
            let (a, b) = if i + 1 < n { (i, i + 1) } else { (i - 1, i) };
            *o = (values[b] - values[a]) / h;
        }
        return out;
    }
    for i in 0..n {
        out[i] = if i >= 2 && i + 2 < n {
            (values[i - 2] - values[i - 1] * 8.0 + values[i + 1] * 8.0 - values[i + 2]) / (12.0 * h)
        } else if i < 2 {
            let v = |k: usize| values[i + k];
            (v(0) * -25.0 + v(1) * 48.0 - v(2) * 36.0 + v(3) * 16.0 - v(4) * 3.0) / (12.0 * h)
        } else {
            let v = |k: usize| values[i - k];
            (v(0) * 25.0 - v(1) * 48.0 + v(2) * 36.0 - v(3) * 16.0 + v(4) * 3.0) / (12.0 * h)
        };
    }
    out
}

/// Scalar version of [`derivative`].
pub fn derivative_scalar(values: &[f64], h: f64) -> Vec<f64> {
    let v: Vec<SVector<f64, 1>> = values.iter().map(|x| SVector::<f64, 1>::new(*x)).collect();
    derivative(&v, h).into_iter().map(|d| d[0]).collect()
}

/// Cubic Hermite basis evaluated at `u ∈ [0, 1]` for an interval of width `h`.
///
/// Returns weights `(p0, m0, p1, m1)` for the value and `(dp0, dm0, dp1, dm1)`
/// for the derivative with respect to the physical coordinate.
#[inline]
pub fn hermite_weights(u: f64, h: f64) -> ([f64; 4], [f64; 4]) {
    let u2 = u * u;
    let u3 = u2 * u;
    let val = [
        2.0 * u3 - 3.0 * u2 + 1.0,
        (u3 - 2.0 * u2 + u) * h,
        -2.0 * u3 + 3.0 * u2,
        (u3 - u2) * h,
    ];
    let der = [
        (6.0 * u2 - 6.0 * u) / h,
        3.0 * u2 - 4.0 * u + 1.0,
        (-6.0 * u2 + 6.0 * u) / h,
        3.0 * u2 - 2.0 * u,
    ];
    (val, der)
}

/// Locate `x` on a uniform grid starting at `x0` with spacing `h` and `n`
/// nodes. Returns the interval index and the local coordinate in `[0, 1]`.
#[inline]
pub fn locate_uniform(x: f64, x0: f64, h: f64, n: usize) -> (usize, f64) {
    debug_assert!(n >= 2);
    let r = (x - x0) / h;
    let last = (n - 2) as f64;
    let i = r.floor().clamp(0.0, last);
    let u = (r - i).clamp(0.0, 1.0);
    (i as usize, u)
}

/// Cubic Hermite interpolation of vector samples with known derivatives.
pub fn hermite_eval<const D: usize>(
    values: &[SVector<f64, D>],
    slopes: &[SVector<f64, D>],
    x0: f64,
    h: f64,
    x: f64,
) -> (SVector<f64, D>, SVector<f64, D>) {
    let (i, u) = locate_uniform(x, x0, h, values.len());
    let (w, dw) = hermite_weights(u, h);
    let (p0, m0, p1, m1) = (&values[i], &slopes[i], &values[i + 1], &slopes[i + 1]);
    (
        p0 * w[0] + m0 * w[1] + p1 * w[2] + m1 * w[3],
        p0 * dw[0] + m0 * dw[1] + p1 * dw[2] + m1 * dw[3],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector2;

    #[test]
    fn derivative_of_polynomial_is_exact() {
        let h = 0.01;
        let xs: Vec<f64> = (0..40).map(|i| i as f64 * h).collect();
        let vals: Vec<f64> = xs.iter().map(|x| x.powi(4) - 2.0 * x).collect();
        let d = derivative_scalar(&vals, h);
        for (x, dv) in xs.iter().zip(&d) {
            assert!((dv - (4.0 * x.powi(3) - 2.0)).abs() < 1e-9, "{x}: {dv}");
        }
    }

    #[test]
    fn hermite_reproduces_cubic() {
        let h = 0.5;
        let f = |x: f64| Vector2::new(x * x * x - x, 2.0 * x * x);
        let df = |x: f64| Vector2::new(3.0 * x * x - 1.0, 4.0 * x);
        let xs: Vec<f64> = (0..5).map(|i| i as f64 * h).collect();
        let v: Vec<_> = xs.iter().map(|x| f(*x)).collect();
        let m: Vec<_> = xs.iter().map(|x| df(*x)).collect();
        for x in [0.1, 0.77, 1.3, 1.99] {
            let (p, d) = hermite_eval(&v, &m, 0.0, h, x);
            assert!((p - f(x)).norm() < 1e-12);
            assert!((d - df(x)).norm() < 1e-12);
        }
    }
}
