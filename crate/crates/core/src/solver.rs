//! Optimal deduction: Lambert W closed form, a numerical maximizer used as an
//! independent check, and comparative statics.
//!
//! The first-order condition `1 = (F + f m) B` with the Weibull-type `F`
//! reduces, via `u = (A/k) m^k`, to `W e^W = (1 - 1/B) e^(1/k) / k` with
//! `A m^k = 1 - W k`. Hence
//!
//! ```text
//! m* = ((1 - W k) / A)^(1/k),   W = W0((1 - 1/B) e^(1/k) / k)
//! ```
//!
//! An interior stationary point needs the Lambert argument to be at least
//! `-1/e`. At the stationary point the second-order margin is
//! `k (1 + W) f / m`, so it is a local maximum whenever `W > -1`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lambertw;
use crate::penalty::{
    effective_penalty, expected_after_tax_income, expected_income_difference, penalty_cdf,
    survival, HazardParams, Problem,
};

/// Closeness of `W` to `-1` or `1/k` at which statics are refused.
pub const STATICS_GUARD: f64 = 1e-9;

/// Relative step of the central differences in [`comparative_statics`].
pub const FD_RELATIVE_STEP: f64 = 1e-6;

/// Floor of the denominator in analytic-vs-FD relative disagreement; below
/// it the comparison is effectively absolute.
pub const DISAGREEMENT_FLOOR: f64 = 1e-6;

const GRID_POINTS: usize = 1024;
const GOLDEN_RELATIVE_WIDTH: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Solution {
    pub m_star: f64,
    pub lambert_arg: f64,
    pub w_value: f64,
    /// `E(U)` at `m_star`.
    pub objective: f64,
    pub foc_residual: f64,
    pub soc_margin: f64,
    /// `((1 + k) / A)^(1/k)`, where the second-order margin changes sign.
    pub upper_bound: f64,
    /// Set when `k <= 1`: the CDF has no convex region near the origin.
    pub shape_warning: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StaticsReport {
    pub dm_da: f64,
    pub dm_db: f64,
    pub dm_dk: f64,
    pub fd_dm_da: f64,
    pub fd_dm_db: f64,
    pub fd_dm_dk: f64,
    pub max_rel_disagreement: f64,
    /// `dm/dB` from the factored form `-m^(1-k) / (A B^2 (1 - 1/B)) * W / (W + 1)`.
    /// NaN at `B = 1`, where both `1 - 1/B` and `W` vanish.
    pub dm_db_factored: f64,
    /// Whether the factored form is defined and matches `dm_db` to 1e-9 relative.
    pub factored_agrees: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DkSign {
    Negative,
    Zero,
    Positive,
}

/// The lower-branch inequality for `0 < B < 1`, written as
/// `1 < 1 / W0(B / (e (1 - B))) < k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeakPenaltyBounds {
    /// `1 / W0(B / (e (1 - B)))`.
    pub reciprocal: f64,
    /// `reciprocal <= k`; equivalent to the Lambert argument being `>= -1/e`.
    pub below_shape: bool,
    /// `reciprocal > 1`; equivalent to `B < e^2 / (1 + e^2)`, not a feasibility condition.
    pub above_one: bool,
}

/// `(1 - 1/B) e^(1/k) / k`.
pub fn lambert_argument(b: f64, k: f64) -> f64 {
    (1.0 - 1.0 / b) * (1.0 / k).exp() / k
}

pub fn upper_bound(h: &HazardParams) -> f64 {
    ((1.0 + h.k()) / h.a()).powf(1.0 / h.k())
}

/// Direct branch-point test: the Lambert argument is at or above `-1/e`
/// (within [`lambertw::DOMAIN_SLACK`]).
pub fn branch_point_feasible(b: f64, k: f64) -> bool {
    lambertw::branch_offset(lambert_argument(b, k)) >= -lambertw::DOMAIN_SLACK
}

/// Evaluates the weak-penalty inequality; `None` unless `0 < B < 1`.
pub fn weak_penalty_bounds(b: f64, k: f64) -> Option<WeakPenaltyBounds> {
    if !(b > 0.0 && b < 1.0) {
        return None;
    }
    let y = b / (std::f64::consts::E * (1.0 - b));
    let w = lambertw::w0(y).ok()?.w;
    let reciprocal = 1.0 / w;
    Some(WeakPenaltyBounds {
        reciprocal,
        below_shape: reciprocal <= k,
        above_one: reciprocal > 1.0,
    })
}

/// `1 - (F(m) + f(m) m) B`, using `f(m) m = A m^k S(m)`.
pub fn foc_residual(m: f64, p: &Problem) -> f64 {
    let h = p.hazard();
    let b = effective_penalty(p.policy());
    let fm = if m > 0.0 {
        h.a() * m.powf(h.k()) * survival(m, h)
    } else {
        0.0
    };
    1.0 - (penalty_cdf(m, h) + fm) * b
}

/// `f'(m) + 2 f(m) / m`; positive values certify a local maximum of `E(U)`.
pub fn soc_margin(m: f64, h: &HazardParams) -> f64 {
    let (a, k) = (h.a(), h.k());
    let s = survival(m, h);
    let amk = a * m.powf(k);
    let f = a * m.powf(k - 1.0) * s;
    let df = a * m.powf(k - 2.0) * s * (k - 1.0 - amk);
    df + 2.0 * f / m
}

fn check_objective(p: &Problem) -> Result<f64> {
    let b = effective_penalty(p.policy());
    if p.policy().t() == 0.0 {
        return Err(Error::DegenerateObjective(
            "tax rate t = 0 makes E(U) constant in m".into(),
        ));
    }
    if b == 0.0 {
        return Err(Error::DegenerateObjective(
            "effective penalty B = 0 makes E(U) strictly increasing in m".into(),
        ));
    }
    Ok(b)
}

/// `(m*, W, Lambert argument)` from the closed form, without optimality checks.
fn closed_form(a: f64, b: f64, k: f64) -> Result<(f64, f64, f64)> {
    let arg = lambert_argument(b, k);
    let w = lambertw::w0(arg)
        .map_err(|e| match e {
            Error::Domain { x } => Error::NoInteriorOptimum(format!(
                "Lambert argument {x} is below -1/e: penalty B = {b} too weak for shape k = {k}"
            )),
            other => other,
        })?
        .w;
    let m = ((1.0 - w * k) / a).powf(1.0 / k);
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::NoInteriorOptimum(format!(
            "optimum collapses to m = {m} (W = {w})"
        )));
    }
    Ok((m, w, arg))
}

pub fn solve_closed_form(p: &Problem) -> Result<Solution> {
    let b = check_objective(p)?;
    let h = p.hazard();
    let (m_star, w_value, lambert_arg) = closed_form(h.a(), b, h.k())?;
    let margin = soc_margin(m_star, h);
    if w_value <= -1.0 || !(margin > 0.0) {
        return Err(Error::SecondOrderViolation {
            m_star,
            margin: if w_value <= -1.0 { 0.0 } else { margin },
        });
    }
    Ok(Solution {
        m_star,
        lambert_arg,
        w_value,
        objective: expected_after_tax_income(m_star, p),
        foc_residual: foc_residual(m_star, p),
        soc_margin: margin,
        upper_bound: upper_bound(h),
        shape_warning: h.k() <= 1.0,
    })
}

/// Maximizes `E(U)` over `(0, upper_bound]` by a 1024-point grid followed by
/// golden-section refinement to a bracket of `1e-12 * upper_bound`.
///
/// Uses only the objective; no derivative or Lambert W evaluation. For
/// `B < 1` the objective is unbounded as `m -> inf`, so the result is the
/// local maximum inside the bracket.
pub fn solve_numeric(p: &Problem) -> Result<f64> {
    check_objective(p)?;
    let ub = upper_bound(p.hazard());
    let grid: Vec<f64> = (1..=GRID_POINTS)
        .map(|i| ub * i as f64 / GRID_POINTS as f64)
        .collect();
    // Strict comparison keeps the lowest index on ties.
    let mut best = 0;
    for i in 1..grid.len() {
        if expected_income_difference(grid[i], grid[best], p) > 0.0 {
            best = i;
        }
    }
    let last = grid.len() - 1;
    if best == last && expected_income_difference(grid[last], grid[last - 1], p) > 0.0 {
        return Err(Error::NoInteriorOptimum(format!(
            "objective still rising at the upper bound {ub}; no stationary point in (0, {ub}]"
        )));
    }
    let lo = if best == 0 { 0.0 } else { grid[best - 1] };
    let hi = grid[(best + 1).min(last)];
    Ok(golden_section_max(
        |x, y| expected_income_difference(x, y, p),
        lo,
        hi,
        GOLDEN_RELATIVE_WIDTH * ub,
    ))
}

/// Golden-section maximization driven by a difference oracle
/// `diff(x, y) = g(x) - g(y)`. Ties keep the lower bracket.
fn golden_section_max<D: Fn(f64, f64) -> f64>(
    diff: D,
    mut lo: f64,
    mut hi: f64,
    width: f64,
) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - ratio * (hi - lo);
    let mut d = lo + ratio * (hi - lo);
    while hi - lo > width {
        if diff(c, d) >= 0.0 {
            hi = d;
            d = c;
            c = hi - ratio * (hi - lo);
        } else {
            lo = c;
            c = d;
            d = lo + ratio * (hi - lo);
        }
    }
    0.5 * (lo + hi)
}

/// Eq.-10-style `dm*/dk` from `(W, k, m*)`.
fn dm_dk_formula(w: f64, k: f64, m: f64) -> f64 {
    let ratio = w / (w + 1.0);
    m / k * ((w - (1.0 + 1.0 / k) * ratio) / (w * k - 1.0) - m.ln())
}

fn central_difference<F: Fn(f64) -> Result<f64>>(f: F, x: f64) -> Result<f64> {
    let h = FD_RELATIVE_STEP * x.abs().max(1.0);
    Ok((f(x + h)? - f(x - h)?) / (2.0 * h))
}

fn relative_disagreement(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(DISAGREEMENT_FLOOR);
    (analytic - numeric).abs() / scale
}

/// Analytic sensitivities of `m*` to `A`, `B` and `k`, each paired with a
/// central difference of the closed form.
///
/// `dm/dB` is evaluated as `-m^(1-k)/A * e^(-W)/(1+W) * e^(1/k)/(k B^2)`,
/// which equals the factored form `-m^(1-k)/(A B^2 (1-1/B)) * W/(W+1)` for
/// `B != 1` (using `W/x = e^(-W)`) and stays finite at `B = 1`.
pub fn comparative_statics(p: &Problem, s: &Solution) -> Result<StaticsReport> {
    let h = p.hazard();
    let (a, k) = (h.a(), h.k());
    let b = effective_penalty(p.policy());
    let (w, m) = (s.w_value, s.m_star);
    if (w + 1.0).abs() <= STATICS_GUARD || (w - 1.0 / k).abs() <= STATICS_GUARD {
        return Err(Error::StaticsUnstable { w });
    }

    let dm_da = -m / (a * k);
    let dm_db = -m.powf(1.0 - k) / a * (-w).exp() / (1.0 + w) * (1.0 / k).exp() / (k * b * b);
    let dm_dk = dm_dk_formula(w, k, m);
    let dm_db_factored = -m.powf(1.0 - k) / (a * b * b * (1.0 - 1.0 / b)) * (w / (w + 1.0));

    let fd_dm_da = central_difference(|x| closed_form(x, b, k).map(|r| r.0), a)?;
    let fd_dm_db = central_difference(|x| closed_form(a, x, k).map(|r| r.0), b)?;
    let fd_dm_dk = central_difference(|x| closed_form(a, b, x).map(|r| r.0), k)?;

    let max_rel_disagreement = [(dm_da, fd_dm_da), (dm_db, fd_dm_db), (dm_dk, fd_dm_dk)]
        .iter()
        .map(|&(x, y)| relative_disagreement(x, y))
        .fold(0.0, f64::max);
    let factored_agrees = dm_db_factored.is_finite()
        && (dm_db_factored - dm_db).abs() <= 1e-9 * dm_db.abs().max(1e-300);

    Ok(StaticsReport {
        dm_da,
        dm_db,
        dm_dk,
        fd_dm_da,
        fd_dm_db,
        fd_dm_dk,
        max_rel_disagreement,
        dm_db_factored,
        factored_agrees,
    })
}

/// Sign of `dm*/dk` at `(W, k)` with `m*` rebuilt from `A` as
/// `((1 - W k) / A)^(1/k)`.
pub fn dk_sign(w: f64, k: f64, a: f64) -> DkSign {
    let m = ((1.0 - w * k) / a).powf(1.0 / k);
    let value = dm_dk_formula(w, k, m);
    if value.abs() <= 1e-12 * (m / k).max(1.0) {
        DkSign::Zero
    } else if value > 0.0 {
        DkSign::Positive
    } else {
        DkSign::Negative
    }
}
