//! Finite-difference derivatives of orders 1..=4 with one Richardson
//! extrapolation level.
//!
//! Central stencils are O(h²); when the expansion point sits too close to
//! the left edge of the function's domain (the evaluation points would go
//! negative) the one-sided forward stencils of the same order are used
//! instead. One Richardson step on (h, h/2) lifts both to O(h⁴)/O(h³).

use crate::error::Result;

fn central<F: Fn(f64) -> Result<f64>>(f: &F, x: f64, n: u32, h: f64) -> Result<f64> {
    let v = |k: f64| f(x + k * h);
    Ok(match n {
        1 => (v(1.0)? - v(-1.0)?) / (2.0 * h),
        2 => (v(1.0)? - 2.0 * v(0.0)? + v(-1.0)?) / (h * h),
        3 => (v(2.0)? - 2.0 * v(1.0)? + 2.0 * v(-1.0)? - v(-2.0)?) / (2.0 * h * h * h),
        4 => (v(2.0)? - 4.0 * v(1.0)? + 6.0 * v(0.0)? - 4.0 * v(-1.0)? + v(-2.0)?) / h.powi(4),
        _ => unreachable!("orders are restricted to 1..=4"),
    })
}

fn forward<F: Fn(f64) -> Result<f64>>(f: &F, x: f64, n: u32, h: f64) -> Result<f64> {
    let v = |k: f64| f(x + k * h);
    Ok(match n {
        1 => (-1.5 * v(0.0)? + 2.0 * v(1.0)? - 0.5 * v(2.0)?) / h,
        2 => (2.0 * v(0.0)? - 5.0 * v(1.0)? + 4.0 * v(2.0)? - v(3.0)?) / (h * h),
        3 => {
            (-2.5 * v(0.0)? + 9.0 * v(1.0)? - 12.0 * v(2.0)? + 7.0 * v(3.0)? - 1.5 * v(4.0)?)
                / (h * h * h)
        }
        4 => {
            (3.0 * v(0.0)? - 14.0 * v(1.0)? + 26.0 * v(2.0)? - 24.0 * v(3.0)? + 11.0 * v(4.0)?
                - 2.0 * v(5.0)?)
                / h.powi(4)
        }
        _ => unreachable!("orders are restricted to 1..=4"),
    })
}

/// n-th derivative of `f` at `x` (n in 1..=4), step `h`, one Richardson
/// level. `f` must be defined on [max(0, x − 2h), x + 6h].
pub fn derivative<F: Fn(f64) -> Result<f64>>(f: &F, x: f64, n: u32, h: f64) -> Result<f64> {
    assert!((1..=4).contains(&n), "derivative order must be 1..=4");
    // Central stencils reach down to x − 2h; fall back to forward ones
    // when that would leave the domain.
    let use_central = x - 2.0 * h > 0.0 || (n < 3 && x - h > 0.0);
    let est = |step: f64| {
        if use_central {
            central(f, x, n, step)
        } else {
            forward(f, x, n, step)
        }
    };
    let d_h = est(h)?;
    let d_h2 = est(0.5 * h)?;
    // Both stencil families have leading error O(h²).
    Ok((4.0 * d_h2 - d_h) / 3.0)
}
