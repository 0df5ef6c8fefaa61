//! Oracle checks run by `taxopt verify`.

use crate::penalty::{
    effective_penalty, expected_income_difference, hazard_rate, penalty_cdf,
    penalty_cdf_from_hazard, penalty_pdf, survival, HazardParams, Problem, TaxPolicy,
};
use crate::solver::{
    branch_point_feasible, comparative_statics, solve_closed_form, solve_numeric,
    weak_penalty_bounds, Solution,
};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub samples: usize,
    /// Largest deviation, smallest margin, or violation count, depending on the check.
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
}

enum Kind {
    /// `worst <= tolerance`; the tolerance can be overridden.
    Deviation(f64),
    /// `worst > 0`.
    Margin,
    /// `worst == 0`.
    Violations,
}

struct Tally {
    name: &'static str,
    kind: Kind,
    samples: usize,
    worst: f64,
}

impl Tally {
    fn deviation(name: &'static str, tolerance: f64) -> Self {
        Self {
            name,
            kind: Kind::Deviation(tolerance),
            samples: 0,
            worst: 0.0,
        }
    }

    fn margin(name: &'static str) -> Self {
        Self {
            name,
            kind: Kind::Margin,
            samples: 0,
            worst: f64::INFINITY,
        }
    }

    fn violations(name: &'static str) -> Self {
        Self {
            name,
            kind: Kind::Violations,
            samples: 0,
            worst: 0.0,
        }
    }

    fn record(&mut self, value: f64) {
        self.samples += 1;
        self.worst = match self.kind {
            Kind::Deviation(_) => {
                self.worst
                    .max(if value.is_nan() { f64::INFINITY } else { value })
            }
            Kind::Margin => self.worst.min(if value.is_nan() {
                f64::NEG_INFINITY
            } else {
                value
            }),
            Kind::Violations => self.worst + f64::from(u8::from(!(value == 0.0))),
        };
    }

    fn flag(&mut self, ok: bool) {
        self.record(if ok { 0.0 } else { 1.0 });
    }

    fn finish(self, tolerance_override: Option<f64>) -> Check {
        let (tolerance, passed) = match self.kind {
            Kind::Deviation(default) => {
                let tol = tolerance_override.unwrap_or(default);
                (tol, self.worst <= tol)
            }
            Kind::Margin => (0.0, self.samples == 0 || self.worst > 0.0),
            Kind::Violations => (0.0, self.worst == 0.0),
        };
        let worst = if self.samples == 0 { 0.0 } else { self.worst };
        Check {
            name: self.name,
            samples: self.samples,
            worst,
            tolerance,
            passed,
        }
    }
}

/// `A ∈ {0.5, 1, 2} × k ∈ {1.25, 2, 3} × B ∈ {0.9, 1, 1.5, 2.5}` at
/// `t = 0.3`, `pi = 10`. `B <= 1` uses `beta = B, z = 0`; larger `B`
/// uses `beta = 1, z = B - 1`.
pub fn default_problems() -> Vec<Problem> {
    let mut out = Vec::new();
    for a in [0.5, 1.0, 2.0] {
        for k in [1.25, 2.0, 3.0] {
            for b in [0.9, 1.0, 1.5, 2.5] {
                out.push(problem_with_penalty(10.0, 0.3, b, a, k));
            }
        }
    }
    out
}

pub fn problem_with_penalty(pi: f64, t: f64, b: f64, a: f64, k: f64) -> Problem {
    let (beta, z) = if b <= 1.0 { (b, 0.0) } else { (1.0, b - 1.0) };
    Problem::from_parts(pi, t, beta, z, a, k).expect("valid verification point")
}

/// Log-spaced deductions on `[1e-3, 10]`.
pub fn log_grid(points: usize) -> Vec<f64> {
    (0..points)
        .map(|i| 10f64.powf(-3.0 + 4.0 * i as f64 / (points - 1) as f64))
        .collect()
}

/// Relative gap between the density and a central difference of the CDF.
/// The CDF difference is taken through the survival function once `F`
/// passes one half, where `1 - F` carries the significant digits.
pub fn pdf_difference_error(m: f64, h: &HazardParams) -> f64 {
    let step = 1e-7 * m;
    let slope = if penalty_cdf(m, h) < 0.5 {
        (penalty_cdf(m + step, h) - penalty_cdf(m - step, h)) / (2.0 * step)
    } else {
        (survival(m - step, h) - survival(m + step, h)) / (2.0 * step)
    };
    let pdf = penalty_pdf(m, h).unwrap_or(f64::NAN);
    (pdf - slope).abs() / pdf.abs()
}

pub fn run_checks(problems: &[Problem], tolerance_override: Option<f64>) -> (Vec<Check>, usize) {
    let mut closed_vs_numeric = Tally::deviation("closed_vs_numeric", 1e-6);
    let mut foc = Tally::deviation("foc_residual", 1e-10);
    let mut soc = Tally::margin("soc_margin");
    let mut maximality = Tally::margin("maximality_gap");
    let mut bounds = Tally::violations("bound_and_w_range");
    let mut statics_fd = Tally::deviation("statics_vs_fd", 1e-5);
    let mut statics_signs = Tally::violations("statics_signs");
    let mut weak_penalty = Tally::violations("weak_penalty_predicate");
    let mut quadrature = Tally::deviation("cdf_vs_quadrature", 1e-8);
    let mut pdf_fd = Tally::deviation("pdf_vs_cdf_difference", 1e-6);
    let mut identity = Tally::deviation("hazard_identity", 1e-14);
    let mut scale = Tally::deviation("scale_covariance", 1e-12);
    let mut t_inv = Tally::deviation("t_invariance", 1e-12);

    let mut skipped = 0;
    let mut hazards: Vec<HazardParams> = Vec::new();
    for p in problems {
        let h = *p.hazard();
        if !hazards.contains(&h) {
            hazards.push(h);
        }
        let b = effective_penalty(p.policy());
        if let Some(bounds) = weak_penalty_bounds(b, h.k()) {
            weak_penalty.flag(bounds.below_shape == branch_point_feasible(b, h.k()));
        }

        let s: Solution = match solve_closed_form(p) {
            Ok(s) => s,
            Err(_) => {
                skipped += 1;
                continue;
            }
        };
        match solve_numeric(p) {
            Ok(m) => closed_vs_numeric.record((s.m_star - m).abs() / s.m_star),
            Err(_) => closed_vs_numeric.record(f64::INFINITY),
        }
        foc.record(s.foc_residual.abs());
        soc.record(s.soc_margin);
        let gap = expected_income_difference(s.m_star, s.m_star * (1.0 + 1e-3), p).min(
            expected_income_difference(s.m_star, s.m_star * (1.0 - 1e-3), p),
        );
        maximality.record(gap);
        bounds.flag(s.m_star < s.upper_bound && s.w_value > -1.0 && s.w_value < 1.0 / h.k());

        if let Ok(r) = comparative_statics(p, &s) {
            statics_fd.record(r.max_rel_disagreement);
            statics_signs.flag(r.dm_da < 0.0 && r.fd_dm_db < 0.0);
        }

        for c in [0.5_f64, 2.0] {
            let scaled = HazardParams::new(h.a() * c.powf(h.k()), h.k()).expect("positive scale");
            if let Ok(sc) = solve_closed_form(&p.with_hazard(scaled)) {
                scale.record((sc.m_star * c - s.m_star).abs() / s.m_star);
            }
        }
        for t in [0.1, 0.5, 0.9] {
            let policy =
                TaxPolicy::new(t, p.policy().beta(), p.policy().z()).expect("valid tax rate");
            if let Ok(st) = solve_closed_form(&p.with_policy(policy)) {
                t_inv.record((st.m_star - s.m_star).abs() / s.m_star);
            }
        }
    }

    for h in &hazards {
        for m in log_grid(41) {
            match penalty_cdf_from_hazard(m, h) {
                Ok(f) => quadrature.record((f - penalty_cdf(m, h)).abs()),
                Err(_) => quadrature.record(f64::INFINITY),
            }
            pdf_fd.record(pdf_difference_error(m, h));
            if let (Ok(pdf), Ok(lambda)) = (penalty_pdf(m, h), hazard_rate(m, h)) {
                identity.record((pdf - lambda * survival(m, h)).abs() / pdf);
            }
        }
    }

    let checks = [
        closed_vs_numeric,
        foc,
        soc,
        maximality,
        bounds,
        statics_fd,
        statics_signs,
        weak_penalty,
        quadrature,
        pdf_fd,
        identity,
        scale,
        t_inv,
    ]
    .into_iter()
    .map(|t| t.finish(tolerance_override))
    .collect();
    (checks, skipped)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_passes() {
        let (checks, skipped) = run_checks(&default_problems(), None);
        assert_eq!(skipped, 0);
        for c in &checks {
            assert!(c.passed, "{c:?}");
            assert!(c.samples > 0, "{c:?}");
        }
    }

    #[test]
    fn impossible_tolerance_fails() {
        let (checks, _) = run_checks(&default_problems(), Some(1e-20));
        assert!(checks.iter().any(|c| !c.passed));
    }

    #[test]
    fn trivial_point_is_tight() {
        let (checks, _) = run_checks(&[problem_with_penalty(10.0, 0.3, 1.0, 1.0, 2.0)], None);
        for c in &checks {
            assert!(c.passed, "{c:?}");
            match c.name {
                "closed_vs_numeric" | "foc_residual" | "scale_covariance" | "t_invariance"
                | "cdf_vs_quadrature" | "hazard_identity" => assert!(c.worst <= 1e-12, "{c:?}"),
                _ => {}
            }
        }
    }
}
