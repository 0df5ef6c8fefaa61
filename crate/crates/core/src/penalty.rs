//! Economic primitives of the deduction problem.
//!
//! A taxpayer with exogenous income `pi` deducts `m >= 0` before tax at
//! rate `t`. With probability `F(m)` the deduction is judged abusive and the
//! taxpayer repays `t * beta * m` plus a penalty at rate `z` on it. The
//! probability comes from the hazard `lambda(m) = A m^(k-1)`, which gives the
//! Weibull-type CDF `F(m) = 1 - exp(-(A/k) m^k)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TaxPolicy {
    t: f64,
    beta: f64,
    z: f64,
}

impl TaxPolicy {
    pub fn new(t: f64, beta: f64, z: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&t) {
            return Err(invalid(
                "t",
                format!("tax rate must lie in [0, 1], got {t}"),
            ));
        }
        if !(0.0..=1.0).contains(&beta) {
            return Err(invalid(
                "beta",
                format!("reclaim share must lie in [0, 1], got {beta}"),
            ));
        }
        if !(z >= 0.0 && z.is_finite()) {
            return Err(invalid(
                "z",
                format!("penalty rate must be finite and >= 0, got {z}"),
            ));
        }
        Ok(Self { t, beta, z })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    /// `B = beta (1 + z)`.
    pub fn effective_penalty(&self) -> f64 {
        effective_penalty(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HazardParams {
    a: f64,
    k: f64,
}

impl HazardParams {
    pub fn new(a: f64, k: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(invalid(
                "A",
                format!("hazard scale must be finite and > 0, got {a}"),
            ));
        }
        if !(k > 0.0 && k.is_finite()) {
            return Err(invalid(
                "k",
                format!("hazard shape must be finite and > 0, got {k}"),
            ));
        }
        Ok(Self { a, k })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    /// Cumulative hazard `(A/k) m^k`.
    pub fn cumulative_hazard(&self, m: f64) -> f64 {
        if m <= 0.0 {
            return 0.0;
        }
        self.a / self.k * m.powf(self.k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Problem {
    pi: f64,
    policy: TaxPolicy,
    hazard: HazardParams,
}

impl Problem {
    pub fn new(pi: f64, policy: TaxPolicy, hazard: HazardParams) -> Result<Self> {
        if !(pi > 0.0 && pi.is_finite()) {
            return Err(invalid(
                "pi",
                format!("income must be finite and > 0, got {pi}"),
            ));
        }
        Ok(Self { pi, policy, hazard })
    }

    /// Builds a problem from raw parameters in the order `(pi, t, beta, z, A, k)`.
    pub fn from_parts(pi: f64, t: f64, beta: f64, z: f64, a: f64, k: f64) -> Result<Self> {
        Self::new(pi, TaxPolicy::new(t, beta, z)?, HazardParams::new(a, k)?)
    }

    pub fn pi(&self) -> f64 {
        self.pi
    }

    pub fn policy(&self) -> &TaxPolicy {
        &self.policy
    }

    pub fn hazard(&self) -> &HazardParams {
        &self.hazard
    }

    pub fn with_hazard(&self, hazard: HazardParams) -> Self {
        Self { hazard, ..*self }
    }

    pub fn with_policy(&self, policy: TaxPolicy) -> Self {
        Self { policy, ..*self }
    }
}

fn invalid(field: &'static str, reason: String) -> Error {
    Error::InvalidParameter { field, reason }
}

pub fn effective_penalty(policy: &TaxPolicy) -> f64 {
    policy.beta * (1.0 + policy.z)
}

/// `lambda(m) = A m^(k-1)`.
pub fn hazard_rate(m: f64, h: &HazardParams) -> Result<f64> {
    if m == 0.0 {
        return if h.k < 1.0 {
            Err(Error::SingularHazard { k: h.k })
        } else if h.k == 1.0 {
            Ok(h.a)
        } else {
            Ok(0.0)
        };
    }
    Ok(h.a * m.powf(h.k - 1.0))
}

/// Survival probability `1 - F(m) = exp(-(A/k) m^k)`, accurate in the far tail.
pub fn survival(m: f64, h: &HazardParams) -> f64 {
    (-h.cumulative_hazard(m)).exp()
}

/// `F(m) = 1 - exp(-(A/k) m^k)`; zero for `m <= 0`.
pub fn penalty_cdf(m: f64, h: &HazardParams) -> f64 {
    -(-h.cumulative_hazard(m)).exp_m1()
}

/// `f(m) = A m^(k-1) exp(-(A/k) m^k)`.
pub fn penalty_pdf(m: f64, h: &HazardParams) -> Result<f64> {
    if m == 0.0 {
        return hazard_rate(0.0, h);
    }
    Ok(h.a * m.powf(h.k - 1.0) * (-(h.a / h.k) * m.powf(h.k)).exp())
}

/// Expected after-tax income `pi - t (pi - m) - F(m) beta m t (1 + z)`.
pub fn expected_after_tax_income(m: f64, p: &Problem) -> f64 {
    let TaxPolicy { t, beta, z } = p.policy;
    p.pi - t * (p.pi - m) - penalty_cdf(m, &p.hazard) * beta * m * t * (1.0 + z)
}

/// `E(U)(m1) - E(U)(m2)`, formed from differences of the cumulative hazard
/// rather than by subtracting two rounded objective values. The result keeps
/// its sign correct even when the two values agree to every printed digit.
pub fn expected_income_difference(m1: f64, m2: f64, p: &Problem) -> f64 {
    let t = p.policy.t;
    let b = effective_penalty(&p.policy);
    let h = &p.hazard;
    let dm = m1 - m2;
    // u1 - u2 with u = (A/k) m^k
    let du = if m2 > 0.0 {
        h.cumulative_hazard(m2) * (h.k * (dm / m2).ln_1p()).exp_m1()
    } else {
        h.cumulative_hazard(m1)
    };
    // F1 - F2 = S2 - S1, factored on the larger survival so expm1 stays bounded
    let df = if du >= 0.0 {
        -survival(m2, h) * (-du).exp_m1()
    } else {
        survival(m1, h) * du.exp_m1()
    };
    let f1 = penalty_cdf(m1, h);
    t * (dm * (1.0 - b * f1) - b * m2 * df)
}

/// Closed-support variant `1 - (1 - m^k / pi)^(A pi / k)`, for deductions
/// capped at the income `pi`. Evaluated as written; its value at `m = pi` is
/// `1 - (1 - pi^(k-1))^(A pi / k)`, which is 1 only when `k = 1` or `pi = 1`.
pub fn penalty_cdf_closed_support(m: f64, p: &Problem) -> Result<f64> {
    let (pi, a, k) = (p.pi, p.hazard.a, p.hazard.k);
    if !(0.0..=pi).contains(&m) {
        return Err(Error::ClosedSupportDomain(format!(
            "m = {m} outside [0, pi = {pi}]"
        )));
    }
    let ratio = m.powf(k) / pi;
    if ratio > 1.0 {
        return Err(Error::ClosedSupportDomain(format!(
            "m^k / pi = {ratio} exceeds 1"
        )));
    }
    Ok(1.0 - (1.0 - ratio).powf(a * pi / k))
}

const QUAD_TARGET: f64 = 1e-12;
const QUAD_ACCEPT: f64 = 1e-10;
const QUAD_MAX_SEGMENTS: usize = 4000;

/// `1 - exp(-int_0^m lambda(y) dy)` with the cumulative hazard obtained by
/// adaptive quadrature of [`hazard_rate`], split at `m = 1`.
pub fn penalty_cdf_from_hazard(m: f64, h: &HazardParams) -> Result<f64> {
    if m <= 0.0 {
        return Ok(0.0);
    }
    let integrand = |y: f64| hazard_rate(y, h).unwrap_or(f64::INFINITY);
    let pieces: &[(f64, f64)] = if m > 1.0 {
        &[(0.0, 1.0), (1.0, m)]
    } else {
        &[(0.0, m)]
    };
    let (mut total, mut error) = (0.0, 0.0);
    for &(lo, hi) in pieces {
        let est = quadrature::integrate(
            integrand,
            lo,
            hi,
            QUAD_TARGET / pieces.len() as f64,
            QUAD_MAX_SEGMENTS,
        );
        total += est.value;
        error += est.error;
    }
    let floor = 100.0 * f64::EPSILON * total.abs();
    if !(error <= QUAD_ACCEPT.max(floor)) {
        return Err(Error::QuadratureFailure { estimate: error });
    }
    Ok(-(-total).exp_m1())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E, LN_2};

    fn hz(a: f64, k: f64) -> HazardParams {
        HazardParams::new(a, k).unwrap()
    }

    #[test]
    fn effective_penalty_examples() {
        let b = |beta, z| TaxPolicy::new(0.3, beta, z).unwrap().effective_penalty();
        assert_eq!(b(1.0, 1.0), 2.0);
        assert_eq!(b(0.5, 0.0), 0.5);
        assert_eq!(b(0.0, 5.0), 0.0);
    }

    #[test]
    fn constructors_reject_out_of_range() {
        assert!(TaxPolicy::new(1.1, 0.5, 0.0).is_err());
        assert!(TaxPolicy::new(0.3, -0.1, 0.0).is_err());
        assert!(TaxPolicy::new(0.3, 0.5, -1.0).is_err());
        assert!(HazardParams::new(0.0, 2.0).is_err());
        assert!(HazardParams::new(1.0, 0.0).is_err());
        assert!(HazardParams::new(f64::NAN, 1.0).is_err());
        let ok = TaxPolicy::new(0.3, 0.5, 1.0).unwrap();
        assert!(Problem::new(0.0, ok, hz(1.0, 2.0)).is_err());
    }

    #[test]
    fn hazard_examples() {
        assert_eq!(hazard_rate(7.0, &hz(1.0, 1.0)).unwrap(), 1.0);
        assert_eq!(hazard_rate(3.0, &hz(2.0, 2.0)).unwrap(), 6.0);
        assert!(matches!(
            hazard_rate(0.0, &hz(1.0, 0.5)),
            Err(Error::SingularHazard { .. })
        ));
        assert_eq!(hazard_rate(0.0, &hz(3.0, 1.0)).unwrap(), 3.0);
        assert_eq!(hazard_rate(0.0, &hz(3.0, 2.5)).unwrap(), 0.0);
    }

    #[test]
    fn cdf_examples() {
        assert_eq!(penalty_cdf(0.0, &hz(1.3, 0.4)), 0.0);
        assert!((penalty_cdf(LN_2, &hz(1.0, 1.0)) - 0.5).abs() < 1e-15);
        assert!((penalty_cdf(1.0, &hz(2.0, 2.0)) - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert!((penalty_cdf(1.0, &hz(2.0, 2.0)) - 0.632_120_558_828_557_7).abs() < 1e-15);
    }

    #[test]
    fn pdf_examples() {
        assert_eq!(penalty_pdf(0.0, &hz(1.0, 1.0)).unwrap(), 1.0);
        assert!((penalty_pdf(1.0, &hz(1.0, 2.0)).unwrap() - 0.606_530_659_712_633_4).abs() < 1e-15);
        assert!(penalty_pdf(0.0, &hz(1.0, 0.5)).is_err());
    }

    #[test]
    fn objective_examples() {
        let p = Problem::from_parts(10.0, 0.3, 1.0, 1.0, 1.0, 2.0).unwrap();
        assert!((expected_after_tax_income(0.0, &p) - 7.0).abs() < 1e-15);
        // high-precision evaluation: 7.06391839582758005416...
        assert!((expected_after_tax_income(1.0, &p) - 7.063_918_395_827_58).abs() < 1e-13);
        let untaxed = Problem::from_parts(10.0, 0.0, 1.0, 1.0, 1.0, 2.0).unwrap();
        for m in [0.0, 0.5, 3.0, 40.0] {
            assert_eq!(expected_after_tax_income(m, &untaxed), 10.0);
        }
    }

    #[test]
    fn income_difference_matches_direct_subtraction() {
        let p = Problem::from_parts(10.0, 0.3, 1.0, 1.0, 1.3, 2.2).unwrap();
        for &(m1, m2) in &[
            (0.5, 0.2),
            (0.2, 0.5),
            (1.0, 0.0),
            (2.0, 1.999),
            (0.7, 0.7),
            (1.0, 40.0),
            (40.0, 1.0),
            (60.0, 50.0),
        ] {
            let direct = expected_after_tax_income(m1, &p) - expected_after_tax_income(m2, &p);
            let diff = expected_income_difference(m1, m2, &p);
            assert!((direct - diff).abs() < 1e-14, "{m1} {m2}: {direct} {diff}");
        }
    }

    #[test]
    fn closed_support_examples() {
        let p = |a: f64, k: f64| Problem::from_parts(1.0, 0.3, 1.0, 1.0, a, k).unwrap();
        assert_eq!(penalty_cdf_closed_support(0.0, &p(2.0, 1.0)).unwrap(), 0.0);
        assert_eq!(penalty_cdf_closed_support(0.5, &p(2.0, 1.0)).unwrap(), 0.75);
        assert_eq!(penalty_cdf_closed_support(1.0, &p(1.0, 1.0)).unwrap(), 1.0);
        let big = Problem::from_parts(4.0, 0.3, 1.0, 1.0, 1.0, 2.0).unwrap();
        // 3^2 / 4 > 1
        assert!(penalty_cdf_closed_support(3.0, &big).is_err());
        assert!(penalty_cdf_closed_support(5.0, &big).is_err());
        assert!(penalty_cdf_closed_support(-0.1, &big).is_err());
    }

    #[test]
    fn closed_support_at_income_as_written() {
        // pi = 2, k = 0.5: F(pi) = 1 - (1 - 2^-0.5)^(A*2/0.5), not 1.
        let p = Problem::from_parts(2.0, 0.3, 1.0, 1.0, 1.0, 0.5).unwrap();
        let f = penalty_cdf_closed_support(2.0, &p).unwrap();
        let expected = 1.0 - (1.0 - 2f64.powf(-0.5)).powf(4.0);
        assert!((f - expected).abs() < 1e-15);
        assert!(f < 1.0);
    }

    #[test]
    fn quadrature_examples() {
        assert_eq!(penalty_cdf_from_hazard(0.0, &hz(1.0, 1.0)).unwrap(), 0.0);
        let f = penalty_cdf_from_hazard(1.0, &hz(1.0, 1.0)).unwrap();
        assert!((f - (1.0 - 1.0 / E)).abs() < 1e-14);
        let h = hz(1.7, 2.3);
        let f = penalty_cdf_from_hazard(0.8, &h).unwrap();
        assert!((f - penalty_cdf(0.8, &h)).abs() < 1e-8);
    }

    #[test]
    fn quadrature_handles_singular_hazard() {
        let h = hz(0.8, 0.5);
        for m in [0.01, 0.5, 3.0] {
            let f = penalty_cdf_from_hazard(m, &h).unwrap();
            assert!((f - penalty_cdf(m, &h)).abs() < 1e-9, "m={m}");
        }
    }
}
