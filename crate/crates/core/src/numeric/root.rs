//! Safeguarded Newton iteration on a bracketing interval.

use crate::error::{numeric, Result};

/// Solve f(x) = 0 for a continuous monotone `f` with f(lo) and f(hi) of
/// opposite signs. Newton steps (using `df`) are taken while they stay
/// inside the current bracket and keep halving the interval fast enough;
/// otherwise the step falls back to bisection. Converges when the step
/// size drops below `rel_tol · |x|`.
pub fn newton_bracketed<F, D>(f: F, df: D, lo: f64, hi: f64, rel_tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    const MAX_ITER: usize = 200;
    let (mut lo, mut hi) = (lo.min(hi), lo.max(hi));
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(numeric(format!(
            "root not bracketed on [{lo}, {hi}]: f = ({f_lo:.3e}, {f_hi:.3e})"
        )));
    }

    let mut x = 0.5 * (lo + hi);
    let mut step = (hi - lo).abs();
    for _ in 0..MAX_ITER {
        let fx = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        // Maintain the bracket.
        if fx.signum() == f_lo.signum() {
            lo = x;
            f_lo = fx;
        } else {
            hi = x;
        }

        let dfx = df(x);
        let newton = x - fx / dfx;
        let prev_step = step;
        if dfx.is_finite() && dfx != 0.0 && newton > lo && newton < hi {
            step = (newton - x).abs();
            x = newton;
        } else {
            x = 0.5 * (lo + hi);
            step = 0.5 * (hi - lo);
        }
        if step <= rel_tol * x.abs() || hi - lo <= rel_tol * x.abs() {
            return Ok(x);
        }
        // Guard against stalled Newton sequences.
        if step > 0.5 * prev_step && hi - lo < prev_step {
            step = hi - lo;
        }
    }
    Err(numeric(format!(
        "root finding did not converge to rel tol {rel_tol} (bracket [{lo}, {hi}])"
    )))
}
