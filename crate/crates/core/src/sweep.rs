//! Batch evaluation over parameter grids, enforcement scenarios and curve
//! sampling.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::penalty::{
    effective_penalty, expected_after_tax_income, hazard_rate, penalty_cdf, penalty_pdf,
    HazardParams, Problem,
};
use crate::solver::{comparative_statics, solve_closed_form, Solution, StaticsReport};

pub const MAX_GRID_POINTS: usize = 1_000_000;

/// One parameter: either held fixed or swept over `count` evenly spaced
/// values from `start` to `stop` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Axis {
    Fixed(f64),
    Range { start: f64, stop: f64, count: usize },
}

impl Axis {
    fn validate(&self, name: &str) -> Result<()> {
        match *self {
            Axis::Fixed(v) if !v.is_finite() => {
                Err(Error::Spec(format!("{name}: value {v} is not finite")))
            }
            Axis::Fixed(_) => Ok(()),
            Axis::Range { start, stop, count } => {
                if count == 0 {
                    Err(Error::Spec(format!("{name}: axis has zero points")))
                } else if !(start.is_finite() && stop.is_finite()) {
                    Err(Error::Spec(format!("{name}: range bounds must be finite")))
                } else if start > stop {
                    Err(Error::Spec(format!(
                        "{name}: start {start} exceeds stop {stop}"
                    )))
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn len(&self) -> usize {
        match *self {
            Axis::Fixed(_) => 1,
            Axis::Range { count, .. } => count,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn value(&self, i: usize) -> f64 {
        match *self {
            Axis::Fixed(v) => v,
            Axis::Range {
                start, count: 1, ..
            } => start,
            Axis::Range { start, stop, count } => {
                if i + 1 == count {
                    stop
                } else {
                    start + (stop - start) * i as f64 / (count - 1) as f64
                }
            }
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.value(i)).collect()
    }
}

/// Grid over `(A, k, beta, z, t, pi)`; row-major in that order, so `pi`
/// varies fastest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub a: Axis,
    pub k: Axis,
    pub beta: Axis,
    pub z: Axis,
    pub t: Axis,
    pub pi: Axis,
    /// Enforcement shift applied to every point's hazard before solving.
    pub intensity: f64,
}

impl GridSpec {
    pub fn point(pi: f64, t: f64, beta: f64, z: f64, a: f64, k: f64) -> Self {
        Self {
            a: Axis::Fixed(a),
            k: Axis::Fixed(k),
            beta: Axis::Fixed(beta),
            z: Axis::Fixed(z),
            t: Axis::Fixed(t),
            pi: Axis::Fixed(pi),
            intensity: 0.0,
        }
    }

    fn axes(&self) -> [(&'static str, &Axis); 6] {
        [
            ("A", &self.a),
            ("k", &self.k),
            ("beta", &self.beta),
            ("z", &self.z),
            ("t", &self.t),
            ("pi", &self.pi),
        ]
    }

    pub fn total_points(&self) -> usize {
        self.axes()
            .iter()
            .fold(1usize, |acc, (_, axis)| acc.saturating_mul(axis.len()))
    }

    /// Checks axis shapes, the point cap, and that every value on every
    /// axis is admissible for its parameter.
    pub fn validate(&self) -> Result<()> {
        for (name, axis) in self.axes() {
            axis.validate(name)?;
        }
        let total = self.total_points();
        if total > MAX_GRID_POINTS {
            return Err(Error::Spec(format!(
                "grid has {total} points; the cap is {MAX_GRID_POINTS}"
            )));
        }
        if !(self.intensity.abs() < 1.0) {
            return Err(Error::Spec(format!(
                "intensity {} must satisfy |intensity| < 1",
                self.intensity
            )));
        }
        // Ranges are monotone, so checking the endpoints covers every value.
        let ends = |axis: &Axis| [axis.value(0), axis.value(axis.len() - 1)];
        for a in ends(&self.a) {
            for k in ends(&self.k) {
                HazardParams::new(a, k).map_err(spec_error)?;
            }
        }
        for beta in ends(&self.beta) {
            for z in ends(&self.z) {
                for t in ends(&self.t) {
                    for pi in ends(&self.pi) {
                        Problem::from_parts(pi, t, beta, z, 1.0, 1.0).map_err(spec_error)?;
                    }
                }
            }
        }
        Ok(())
    }

    fn problem_at(&self, index: usize) -> Problem {
        let mut rest = index;
        let mut coords = [0.0; 6];
        for (slot, (_, axis)) in coords.iter_mut().zip(self.axes()).rev() {
            let n = axis.len();
            *slot = axis.value(rest % n);
            rest /= n;
        }
        let [a, k, beta, z, t, pi] = coords;
        let base = Problem::from_parts(pi, t, beta, z, a, k).expect("validated grid");
        let hazard = enforcement_shift(base.hazard(), self.intensity).expect("validated intensity");
        base.with_hazard(hazard)
    }
}

fn spec_error(e: Error) -> Error {
    Error::Spec(e.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SweepOutcome {
    Solved {
        solution: Solution,
        statics: StaticsReport,
    },
    Failed {
        kind: &'static str,
        message: String,
    },
}

/// One grid point. `problem` holds the parameters actually solved, i.e.
/// after any enforcement shift.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub problem: Problem,
    pub b: f64,
    pub outcome: SweepOutcome,
}

impl SweepRecord {
    pub fn status(&self) -> &'static str {
        match &self.outcome {
            SweepOutcome::Solved { .. } => "ok",
            SweepOutcome::Failed { kind, .. } => kind,
        }
    }

    pub fn solved(&self) -> Option<(&Solution, &StaticsReport)> {
        match &self.outcome {
            SweepOutcome::Solved { solution, statics } => Some((solution, statics)),
            SweepOutcome::Failed { .. } => None,
        }
    }
}

pub fn evaluate(problem: Problem) -> SweepRecord {
    let outcome = solve_closed_form(&problem).and_then(|solution| {
        comparative_statics(&problem, &solution).map(|statics| (solution, statics))
    });
    SweepRecord {
        problem,
        b: effective_penalty(problem.policy()),
        outcome: match outcome {
            Ok((solution, statics)) => SweepOutcome::Solved { solution, statics },
            Err(e) => SweepOutcome::Failed {
                kind: e.kind(),
                message: e.to_string(),
            },
        },
    }
}

/// Evaluates every grid point, in parallel, emitting records in declared order.
pub fn run_sweep(spec: &GridSpec) -> Result<Vec<SweepRecord>> {
    spec.validate()?;
    Ok((0..spec.total_points())
        .into_par_iter()
        .map(|i| evaluate(spec.problem_at(i)))
        .collect())
}

pub fn run_sweep_serial(spec: &GridSpec) -> Result<Vec<SweepRecord>> {
    spec.validate()?;
    Ok((0..spec.total_points())
        .map(|i| evaluate(spec.problem_at(i)))
        .collect())
}

/// Maps an enforcement change onto the hazard: positive `intensity` is
/// stricter (larger `A`, smaller `k`), moving `F` toward smaller deductions.
pub fn enforcement_shift(h: &HazardParams, intensity: f64) -> Result<HazardParams> {
    if !(intensity.abs() < 1.0) {
        return Err(Error::InvalidParameter {
            field: "intensity",
            reason: format!("must satisfy |intensity| < 1, got {intensity}"),
        });
    }
    HazardParams::new(h.a() * (1.0 + intensity), h.k() / (1.0 + intensity))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub m: f64,
    pub cdf: f64,
    pub pdf: f64,
    pub hazard: f64,
    pub expected_income: f64,
}

/// `n` evenly spaced samples of `F`, `f`, `lambda` and `E(U)` on
/// `[m_min, m_max]`, with `m_min = 0` for `k >= 1` and `m_max / n` otherwise.
pub fn sample_curves(p: &Problem, m_max: f64, n: usize) -> Result<Vec<CurvePoint>> {
    if !(m_max > 0.0 && m_max.is_finite()) {
        return Err(Error::InvalidParameter {
            field: "m_max",
            reason: format!("must be finite and > 0, got {m_max}"),
        });
    }
    if n < 2 {
        return Err(Error::InvalidParameter {
            field: "n",
            reason: format!("need at least 2 samples, got {n}"),
        });
    }
    let h = p.hazard();
    let m_min = if h.k() >= 1.0 { 0.0 } else { m_max / n as f64 };
    (0..n)
        .map(|i| {
            let m = if i + 1 == n {
                m_max
            } else {
                m_min + (m_max - m_min) * i as f64 / (n - 1) as f64
            };
            Ok(CurvePoint {
                m,
                cdf: penalty_cdf(m, h),
                pdf: penalty_pdf(m, h)?,
                hazard: hazard_rate(m, h)?,
                expected_income: expected_after_tax_income(m, p),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point() {
        let spec = GridSpec::point(10.0, 0.3, 0.5, 1.0, 1.0, 2.0);
        let records = run_sweep(&spec).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].solved().unwrap().0.m_star, 1.0);
    }

    #[test]
    fn penalty_sweep_marks_infeasible_points() {
        // B = 2.5 beta over beta in {0.2, ..., 1.0} gives B in {0.5, ..., 2.5}.
        let mut spec = GridSpec::point(10.0, 0.3, 0.0, 1.5, 1.0, 2.0);
        spec.beta = Axis::Range {
            start: 0.2,
            stop: 1.0,
            count: 5,
        };
        let records = run_sweep(&spec).unwrap();
        // boundary for k = 2: B = 1 / (1 + 2 e^(-3/2)) ≈ 0.6914
        let boundary = 1.0 / (1.0 + 2.0 * (-1.5f64).exp());
        for r in &records {
            if r.b < boundary {
                assert_eq!(r.status(), "NoInteriorOptimum");
            } else {
                assert_eq!(r.status(), "ok", "B = {}", r.b);
            }
        }
        assert_eq!(records[0].status(), "NoInteriorOptimum");
        assert!(records[1..].iter().all(|r| r.status() == "ok"));
    }

    #[test]
    fn scale_sweep_decreases() {
        let mut spec = GridSpec::point(10.0, 0.3, 1.0, 1.0, 1.0, 2.0);
        spec.a = Axis::Range {
            start: 0.5,
            stop: 2.0,
            count: 3,
        };
        let values = spec.a.values();
        assert_eq!(values, vec![0.5, 1.25, 2.0]);
        let m: Vec<f64> = run_sweep(&spec)
            .unwrap()
            .iter()
            .map(|r| r.solved().unwrap().0.m_star)
            .collect();
        assert!(m.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn malformed_specs() {
        let mut spec = GridSpec::point(10.0, 0.3, 1.0, 1.0, 1.0, 2.0);
        spec.a = Axis::Range {
            start: 1.0,
            stop: 2.0,
            count: 0,
        };
        assert!(matches!(run_sweep(&spec), Err(Error::Spec(_))));
        spec.a = Axis::Range {
            start: 2.0,
            stop: 1.0,
            count: 3,
        };
        assert!(matches!(run_sweep(&spec), Err(Error::Spec(_))));
        spec.a = Axis::Fixed(1.0);
        spec.beta = Axis::Range {
            start: 0.5,
            stop: 1.5,
            count: 3,
        };
        assert!(matches!(run_sweep(&spec), Err(Error::Spec(_))));
        spec.beta = Axis::Fixed(1.0);
        spec.t = Axis::Range {
            start: 0.1,
            stop: 0.9,
            count: 1000,
        };
        spec.pi = Axis::Range {
            start: 1.0,
            stop: 9.0,
            count: 1000,
        };
        assert!(spec.validate().is_ok());
        spec.pi = Axis::Range {
            start: 1.0,
            stop: 9.0,
            count: 1001,
        };
        assert!(matches!(spec.validate(), Err(Error::Spec(_))));
    }

    #[test]
    fn shift_examples() {
        let h = HazardParams::new(1.0, 2.0).unwrap();
        assert_eq!(enforcement_shift(&h, 0.0).unwrap(), h);
        let s = enforcement_shift(&h, 0.5).unwrap();
        assert_eq!(s.a(), 1.5);
        assert!((s.k() - 4.0 / 3.0).abs() < 1e-15);
        assert!(enforcement_shift(&h, 1.0).is_err());
        assert!(enforcement_shift(&h, -1.0).is_err());
    }

    #[test]
    fn stricter_enforcement_lowers_deduction() {
        for beta in [0.5, 0.8, 1.0] {
            let p = Problem::from_parts(10.0, 0.3, beta, 1.0, 1.0, 2.0).unwrap();
            let base = solve_closed_form(&p).unwrap();
            assert!(base.w_value >= 0.0);
            let shifted = p.with_hazard(enforcement_shift(p.hazard(), 0.5).unwrap());
            let strict = solve_closed_form(&shifted).unwrap();
            assert!(strict.m_star < base.m_star, "beta={beta}");
        }
    }

    #[test]
    fn curve_endpoints() {
        let p = Problem::from_parts(10.0, 0.3, 1.0, 1.0, 1.0, 2.0).unwrap();
        let c = sample_curves(&p, 3.0, 2).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c[0].m, 0.0);
        assert_eq!(c[0].cdf, 0.0);
        assert_eq!(c[1].m, 3.0);
        assert!(sample_curves(&p, 3.0, 1).is_err());
        assert!(sample_curves(&p, 0.0, 5).is_err());
    }

    #[test]
    fn shallow_shape_curve_starts_off_origin() {
        let p = Problem::from_parts(10.0, 0.3, 1.0, 1.0, 1.0, 0.5).unwrap();
        let c = sample_curves(&p, 4.0, 8).unwrap();
        assert_eq!(c[0].m, 0.5);
        assert!(c.iter().all(|pt| pt.hazard.is_finite()));
    }

    #[test]
    fn cdf_column_is_s_shaped() {
        // A = 1, k = 2: inflection at m = ((k - 1) / A)^(1/k) = 1.
        let p = Problem::from_parts(10.0, 0.3, 1.0, 1.0, 1.0, 2.0).unwrap();
        let c = sample_curves(&p, 3.0, 301).unwrap();
        for i in 1..c.len() - 1 {
            let second = c[i + 1].cdf - 2.0 * c[i].cdf + c[i - 1].cdf;
            if c[i].m < 0.98 {
                assert!(second > 0.0, "m={}", c[i].m);
            } else if c[i].m > 1.02 {
                assert!(second < 0.0, "m={}", c[i].m);
            }
        }
    }

    #[test]
    fn objective_column_peaks_near_optimum() {
        let p = Problem::from_parts(10.0, 0.3, 1.0, 1.0, 1.0, 2.0).unwrap();
        let s = solve_closed_form(&p).unwrap();
        let c = sample_curves(&p, 2.0 * s.upper_bound, 200).unwrap();
        let peak = c
            .iter()
            .max_by(|x, y| x.expected_income.total_cmp(&y.expected_income))
            .unwrap();
        let nearest = c
            .iter()
            .min_by(|x, y| (x.m - s.m_star).abs().total_cmp(&(y.m - s.m_star).abs()))
            .unwrap();
        assert_eq!(peak.m, nearest.m);
    }

    #[test]
    fn parallel_matches_serial() {
        let mut spec = GridSpec::point(10.0, 0.3, 0.0, 1.0, 1.0, 2.0);
        spec.a = Axis::Range {
            start: 0.5,
            stop: 2.0,
            count: 7,
        };
        spec.k = Axis::Range {
            start: 0.8,
            stop: 3.0,
            count: 6,
        };
        spec.beta = Axis::Range {
            start: 0.1,
            stop: 1.0,
            count: 9,
        };
        assert_eq!(run_sweep(&spec).unwrap(), run_sweep_serial(&spec).unwrap());
    }
}
