//! Sample-point generation and residual scans.
//!
//! Every identity in this crate is verified numerically: a check evaluates
//! some expression that should vanish (or should stay away from zero) at a
//! deterministic set of chart points and reports the worst case. Points where
//! an expression cannot be evaluated (a pole of a quotient, a sqrt domain
//! error) are skipped and counted; a check that could not be evaluated
//! anywhere fails.

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::expr::EvalError;
use crate::tensor::TensorField;

pub const DEFAULT_POINTS: usize = 50;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_BOX: (f64, f64) = (-1.0, 1.0);

/// Deterministic sampling plan: `count` points drawn uniformly from a box,
/// plus the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SamplePlan {
    pub count: usize,
    pub lo: f64,
    pub hi: f64,
    pub seed: u64,
}

impl Default for SamplePlan {
    fn default() -> Self {
        SamplePlan {
            count: DEFAULT_POINTS,
            lo: DEFAULT_BOX.0,
            hi: DEFAULT_BOX.1,
            seed: DEFAULT_SEED,
        }
    }
}

impl SamplePlan {
    pub fn points(&self, dim: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let dist = Uniform::new_inclusive(self.lo, self.hi);
        let mut points = Vec::with_capacity(self.count + 1);
        points.push(vec![0.0; dim]);
        for _ in 0..self.count {
            points.push((0..dim).map(|_| dist.sample(&mut rng)).collect());
        }
        points
    }
}

/// Worst-case result of evaluating a per-point residual over a point set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualScan {
    pub max_residual: f64,
    pub points_used: usize,
    pub points_skipped: usize,
}

impl ResidualScan {
    pub fn merge(self, other: ResidualScan) -> ResidualScan {
        ResidualScan {
            max_residual: self.max_residual.max(other.max_residual),
            points_used: self.points_used + other.points_used,
            points_skipped: self.points_skipped + other.points_skipped,
        }
    }
}

/// Runs a per-point residual function, skipping points where evaluation
/// fails.
pub fn scan(
    points: &[Vec<f64>],
    mut residual: impl FnMut(&[f64]) -> Result<f64, EvalError>,
) -> ResidualScan {
    let mut max = 0.0f64;
    let mut used = 0;
    let mut skipped = 0;
    for p in points {
        match residual(p) {
            Ok(r) => {
                max = max.max(r);
                used += 1;
            }
            Err(_) => skipped += 1,
        }
    }
    ResidualScan {
        max_residual: max,
        points_used: used,
        points_skipped: skipped,
    }
}

/// Max absolute component of a field expected to vanish.
pub fn max_component_scan(field: &TensorField, points: &[Vec<f64>]) -> ResidualScan {
    scan(points, |p| {
        Ok(field
            .evaluate_at(p)?
            .iter()
            .fold(0.0f64, |acc, v| acc.max(v.abs())))
    })
}

/// Max absolute componentwise difference of two fields of the same shape.
pub fn max_difference_scan(a: &TensorField, b: &TensorField, points: &[Vec<f64>]) -> ResidualScan {
    assert_eq!(a.signature(), b.signature(), "field shape mismatch");
    scan(points, |p| {
        let av = a.evaluate_at(p)?;
        let bv = b.evaluate_at(p)?;
        Ok(av
            .iter()
            .zip(&bv)
            .fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs())))
    })
}

/// How a check's value is compared against its tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// The value is a residual and must stay below the tolerance.
    BelowTolerance,
    /// The value is a magnitude (e.g. the smallest eigenvalue of a rank
    /// test) and must stay above the threshold.
    AboveThreshold,
}

/// A single named verification result.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub criterion: Criterion,
    pub passed: bool,
    pub points_used: usize,
    pub points_skipped: usize,
}

impl Check {
    /// Standard residual check: passes iff the worst residual is below the
    /// tolerance and at least one point could be evaluated.
    pub fn residual(name: &str, scan: ResidualScan, tolerance: f64) -> Self {
        Check {
            name: name.to_string(),
            value: scan.max_residual,
            tolerance,
            criterion: Criterion::BelowTolerance,
            passed: scan.points_used > 0 && scan.max_residual < tolerance,
            points_used: scan.points_used,
            points_skipped: scan.points_skipped,
        }
    }

    /// Lower-bound check: passes iff the worst-case value stays above the
    /// threshold and at least one point could be evaluated.
    pub fn above(name: &str, scan: ResidualScan, threshold: f64) -> Self {
        // For lower-bound checks the scan accumulates the *minimum* via
        // negation; see `min_scan`.
        Check {
            name: name.to_string(),
            value: scan.max_residual,
            tolerance: threshold,
            criterion: Criterion::AboveThreshold,
            passed: scan.points_used > 0 && scan.max_residual > threshold,
            points_used: scan.points_used,
            points_skipped: scan.points_skipped,
        }
    }
}

/// Minimum of a per-point value over a point set (for lower-bound checks);
/// reported in `max_residual` so it can share the `ResidualScan` shape.
pub fn min_scan(
    points: &[Vec<f64>],
    mut value: impl FnMut(&[f64]) -> Result<f64, EvalError>,
) -> ResidualScan {
    let mut min = f64::INFINITY;
    let mut used = 0;
    let mut skipped = 0;
    for p in points {
        match value(p) {
            Ok(v) => {
                min = min.min(v);
                used += 1;
            }
            Err(_) => skipped += 1,
        }
    }
    ResidualScan {
        max_residual: if used > 0 { min } else { f64::INFINITY },
        points_used: used,
        points_skipped: skipped,
    }
}

pub fn all_passed(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.passed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampling_is_deterministic_and_includes_origin() {
        let plan = SamplePlan::default();
        let a = plan.points(3);
        let b = plan.points(3);
        assert_eq!(a, b);
        assert_eq!(a.len(), DEFAULT_POINTS + 1);
        assert_eq!(a[0], vec![0.0; 3]);
        assert!(a[1..]
            .iter()
            .all(|p| p.iter().all(|x| (-1.0..=1.0).contains(x))));

        let other_seed = SamplePlan {
            seed: 7,
            ..SamplePlan::default()
        };
        assert_ne!(a, other_seed.points(3));
    }

    #[test]
    fn scans_skip_evaluation_failures() {
        use crate::expr::ScalarExpr;
        let x = ScalarExpr::coord(0, 1);
        let pole = ScalarExpr::one(1).div(&x);
        let points = vec![vec![0.0], vec![2.0]];
        let scan = scan(&points, |p| pole.evaluate(p).map(f64::abs));
        assert_eq!(scan.points_skipped, 1);
        assert_eq!(scan.points_used, 1);
        assert_eq!(scan.max_residual, 0.5);

        let check = Check::residual("pole", scan, 1.0);
        assert!(check.passed);
        let all_skipped = super::scan(&points[..1], |p| pole.evaluate(p).map(f64::abs));
        assert!(!Check::residual("pole", all_skipped, 1.0).passed);
    }
}
