//! Principal real branch `W0` of the Lambert W function.
//!
//! `W0(x)` is the solution `w >= -1` of `w * exp(w) = x`, defined for
//! `x >= -1/e`. The evaluator seeds from a piecewise guess (branch-point
//! series near `-1/e`, a log-based form on the middle range, the asymptotic
//! expansion for large `x`) and polishes with Halley's iteration.

use crate::error::{Error, Result};

/// `1/e` split into a double and its rounding error, so that `x + 1/e`
/// is available to well below one ulp near the branch point.
const INV_E_HI: f64 = 0.367_879_441_171_442_33;
const INV_E_LO: f64 = -1.242_875_367_278_836_3e-17;

/// Arguments at most this far below `-1/e` clamp to the branch point.
pub const DOMAIN_SLACK: f64 = 1e-12;

/// Relative-absolute residual tolerance: `|w e^w - x| <= RESIDUAL_TOL * max(1, |x|)`.
pub const RESIDUAL_TOL: f64 = 1e-14;

const MAX_ITERATIONS: usize = 50;

/// The branch point `-1/e` rounded to the nearest double.
pub const BRANCH_POINT: f64 = -INV_E_HI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambertResult {
    /// Branch value, always `>= -1`.
    pub w: f64,
    /// `|w e^w - x|` at the returned value.
    pub residual: f64,
    /// Halley steps taken.
    pub iterations: usize,
}

/// `x + 1/e`, evaluated without cancellation for `x` near `-1/e`.
pub fn branch_offset(x: f64) -> f64 {
    (x + INV_E_HI) + INV_E_LO
}

/// Residual tolerance at `x` for a result `w`.
///
/// The nominal bound is `RESIDUAL_TOL * max(1, |x|)`. For `w` beyond about
/// 64 the spacing of doubles around `w` alone moves `w e^w` by more than
/// that, so the bound widens to a few ulps of `w` propagated through `e^w`.
fn residual_tolerance(x: f64, w: f64) -> f64 {
    let nominal = RESIDUAL_TOL * x.abs().max(1.0);
    let conditioning = 4.0 * f64::EPSILON * (1.0 + w.abs()) * x.abs();
    nominal.max(conditioning)
}

fn initial_guess(x: f64, offset: f64) -> f64 {
    if x < -0.25 {
        // Series in p = sqrt(2(e x + 1)) about the branch point.
        let p = (2.0 * std::f64::consts::E * offset).sqrt();
        -1.0 + p
            * (1.0
                + p * (-1.0 / 3.0 + p * (11.0 / 72.0 + p * (-43.0 / 540.0 + p * 769.0 / 17280.0))))
    } else if x <= 3.0 {
        let l = x.ln_1p();
        l * (1.0 - l.ln_1p() / (2.0 + l))
    } else {
        let l1 = x.ln();
        let l2 = l1.ln();
        l1 - l2 + l2 / l1 + l2 * (l2 - 2.0) / (2.0 * l1 * l1)
    }
}

/// Above this argument `w e^w` is handled as `w + ln w = ln x` to stay
/// clear of overflow.
const LOG_FORM_THRESHOLD: f64 = 1e100;

fn log_form(x: f64, mut w: f64) -> Result<LambertResult> {
    let target = x.ln();
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        let step = (w + w.ln() - target) / (1.0 + 1.0 / w);
        w -= step;
        iterations += 1;
        if step.abs() <= 2.0 * f64::EPSILON * w {
            break;
        }
    }
    // |w e^w - x| = x |expm1(w + ln w - ln x)|
    let residual = x * (w + w.ln() - target).exp_m1().abs();
    if !(residual <= residual_tolerance(x, w)) {
        return Err(Error::LambertNonConvergence { x });
    }
    Ok(LambertResult {
        w,
        residual,
        iterations,
    })
}

/// Evaluates `W0(x)`.
///
/// Inputs in `[-1/e - DOMAIN_SLACK, -1/e]` return the branch value `-1`
/// exactly; their reported residual is the distance to the branch point,
/// which may exceed the nominal tolerance by up to `DOMAIN_SLACK`.
pub fn w0(x: f64) -> Result<LambertResult> {
    if x.is_nan() {
        return Err(Error::Domain { x });
    }
    if x == f64::INFINITY {
        return Ok(LambertResult {
            w: f64::INFINITY,
            residual: 0.0,
            iterations: 0,
        });
    }
    let offset = branch_offset(x);
    if offset < -DOMAIN_SLACK {
        return Err(Error::Domain { x });
    }
    if offset <= 0.0 {
        return Ok(LambertResult {
            w: -1.0,
            residual: offset.abs(),
            iterations: 0,
        });
    }
    if x == 0.0 {
        return Ok(LambertResult {
            w: 0.0,
            residual: 0.0,
            iterations: 0,
        });
    }
    if x.abs() < 1e-5 {
        let w = x * (1.0 + x * (-1.0 + x * (1.5 + x * (-8.0 / 3.0 + x * 125.0 / 24.0))));
        let residual = (w * w.exp() - x).abs();
        return Ok(LambertResult {
            w,
            residual,
            iterations: 0,
        });
    }

    let mut w = initial_guess(x, offset).max(-1.0);
    if x > LOG_FORM_THRESHOLD {
        return log_form(x, w);
    }
    let mut iterations = 0;
    let mut last_step = f64::INFINITY;
    while iterations < MAX_ITERATIONS {
        let ew = w.exp();
        let f = w * ew - x;
        if f == 0.0 {
            break;
        }
        let wp1 = w + 1.0;
        if wp1 <= 0.0 {
            // Overshot the branch point; restart from just above it.
            w = -1.0 + (2.0 * std::f64::consts::E * offset).sqrt();
            iterations += 1;
            continue;
        }
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        w -= step;
        iterations += 1;
        let size = step.abs();
        if size <= 2.0 * f64::EPSILON * w.abs() {
            break;
        }
        // Near the branch point the step stalls at the rounding floor of
        // w e^w - x; stop once it no longer shrinks.
        if iterations > 2 && size >= last_step {
            break;
        }
        last_step = size;
    }
    let w = w.max(-1.0);
    let residual = (w * w.exp() - x).abs();
    if !(residual <= residual_tolerance(x, w)) {
        return Err(Error::LambertNonConvergence { x });
    }
    Ok(LambertResult {
        w,
        residual,
        iterations,
    })
}
