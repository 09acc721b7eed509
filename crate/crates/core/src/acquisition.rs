//! Constraint-aware expected improvement.
//!
//! The closed-form EI under the GP's Gaussian marginal is multiplied by the
//! product of per-constraint factors: 0 for a violated hard constraint,
//! `beta(x)` for a violated soft one and 1 otherwise.

use statrs::function::erf::erfc;

use crate::error::Result;
use crate::objectives::{constraint_factor, ConstraintSpec};
use crate::space::{Candidate, SearchSpace};
use crate::surrogate::GpModel;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn norm_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

pub fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Expected improvement below `y_best` of a Gaussian with mean `mu` and
/// standard deviation `sigma` (minimization).
pub fn expected_improvement(mu: f64, sigma: f64, y_best: f64) -> f64 {
    let gain = y_best - mu;
    if sigma <= 0.0 {
        return gain.max(0.0);
    }
    let z = gain / sigma;
    (gain * norm_cdf(z) + sigma * norm_pdf(z)).max(0.0)
}

pub struct AcquisitionContext<'a> {
    pub model: &'a GpModel,
    pub y_best: f64,
    pub constraints: &'a [ConstraintSpec],
    pub space: &'a SearchSpace,
}

impl AcquisitionContext<'_> {
    /// Unconstrained EI at an already encoded point.
    pub fn ei_encoded(&self, encoded: &[f64]) -> f64 {
        let (mu, sigma) = self.model.posterior(encoded);
        expected_improvement(mu, sigma, self.y_best)
    }

    pub fn ca_ei(&self, x: &Candidate) -> Result<f64> {
        let factor = constraint_factor(self.constraints, x)?;
        if factor == 0.0 {
            return Ok(0.0);
        }
        let encoded = self.space.encode(x)?;
        Ok(self.ei_encoded(&encoded) * factor)
    }
}

/// Incumbent `y+` for one objective: best feasible value when any exists,
/// otherwise the overall best.
pub fn incumbent(values: impl IntoIterator<Item = (f64, bool)> + Clone) -> Option<f64> {
    let best_feasible = values
        .clone()
        .into_iter()
        .filter(|(_, feasible)| *feasible)
        .map(|(v, _)| v)
        .reduce(f64::min);
    best_feasible.or_else(|| values.into_iter().map(|(v, _)| v).reduce(f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{ConstraintMode, ConstraintSpec};
    use crate::space::ParamSpec;
    use crate::surrogate::{gp_fit, HyperMode};
    use std::sync::Arc;

    // Adaptive Simpson quadrature of the improvement integrand.
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        #[allow(clippy::too_many_arguments)]
        fn rec(
            f: &dyn Fn(f64) -> f64,
            a: f64,
            b: f64,
            fa: f64,
            fm: f64,
            fb: f64,
            whole: f64,
            tol: f64,
            depth: u32,
        ) -> f64 {
            let m = 0.5 * (a + b);
            let lm = 0.5 * (a + m);
            let rm = 0.5 * (m + b);
            let flm = f(lm);
            let frm = f(rm);
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                return left + right + (left + right - whole) / 15.0;
            }
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
        let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        rec(f, a, b, fa, fm, fb, whole, tol, 50)
    }

    fn ei_quadrature(mu: f64, sigma: f64, y_best: f64, lo: f64, hi: f64) -> f64 {
        let integrand = |y: f64| {
            let z = (y - mu) / sigma;
            (y_best - y).max(0.0) * (-0.5 * z * z).exp()
                / (sigma * (2.0 * std::f64::consts::PI).sqrt())
        };
        let hi = hi.min(y_best);
        if hi <= lo {
            return 0.0;
        }
        simpson(&integrand, lo, hi, 1e-12)
    }

    #[test]
    fn degenerate_sigma() {
        assert_eq!(expected_improvement(1.0, 0.0, 1.0), 0.0);
        assert_eq!(expected_improvement(0.0, 0.0, 1.0), 1.0);
        assert_eq!(expected_improvement(2.0, 0.0, 1.0), 0.0);
    }

    #[test]
    fn unit_gaussian_example_matches_quadrature() {
        let closed = expected_improvement(0.0, 1.0, 1.0);
        let quad = ei_quadrature(0.0, 1.0, 1.0, -10.0, 12.0);
        assert!((closed - quad).abs() < 1e-8, "{closed} vs {quad}");
        assert!((closed - 1.083_315_470_7).abs() < 1e-8, "{closed}");
    }

    #[test]
    fn monotone_in_sigma() {
        for mu in [0.5, 1.0, 3.0] {
            let mut prev = 0.0;
            for k in 0..200 {
                let sigma = 1e-3 + k as f64 * 0.025;
                let ei = expected_improvement(mu, sigma, 0.0);
                assert!(ei >= prev - 1e-15);
                prev = ei;
            }
        }
    }

    #[test]
    fn incumbent_prefers_feasible() {
        assert_eq!(
            incumbent(vec![(1.0, false), (3.0, true), (2.0, true)]),
            Some(2.0)
        );
        assert_eq!(incumbent(vec![(1.0, false), (3.0, false)]), Some(1.0));
        assert_eq!(incumbent(Vec::<(f64, bool)>::new()), None);
    }

    fn context_fixture() -> (SearchSpace, GpModel) {
        let space = SearchSpace::new(vec![ParamSpec::continuous("x", 0.0, 1.0).unwrap()]).unwrap();
        let xs = vec![vec![0.1], vec![0.5], vec![0.9]];
        let ys = vec![1.0, 0.2, 0.7];
        let model = gp_fit(&xs, &ys, &HyperMode::evidence(1)).unwrap();
        (space, model)
    }

    #[test]
    fn ca_ei_examples() {
        let (space, model) = context_fixture();
        let x = Candidate::from_reals(&[0.3]);
        let plain = AcquisitionContext {
            model: &model,
            y_best: 0.2,
            constraints: &[],
            space: &space,
        };
        let base = plain.ca_ei(&x).unwrap();
        assert!(base > 0.0);
        assert_eq!(base, plain.ei_encoded(&[0.3]));

        let hard = [ConstraintSpec::hard("h", |_| false)];
        let ctx = AcquisitionContext {
            model: &model,
            y_best: 0.2,
            constraints: &hard,
            space: &space,
        };
        assert_eq!(ctx.ca_ei(&x).unwrap(), 0.0);

        let soft = [ConstraintSpec::soft("s", |_| false, |_| 0.5)];
        let ctx = AcquisitionContext {
            model: &model,
            y_best: 0.2,
            constraints: &soft,
            space: &space,
        };
        assert_eq!(ctx.ca_ei(&x).unwrap(), 0.5 * base);
    }

    #[test]
    fn hard_equals_soft_with_zero_beta() {
        let (space, model) = context_fixture();
        let pred = |c: &Candidate| c.real(0) < 0.2 || c.real(0) > 0.6;
        let hard = [ConstraintSpec::hard("h", pred)];
        let soft = [hard[0].with_mode(ConstraintMode::Soft(Arc::new(|_| 0.0)))];
        for k in 0..=100 {
            let x = Candidate::from_reals(&[k as f64 / 100.0]);
            let a = AcquisitionContext {
                model: &model,
                y_best: 0.2,
                constraints: &hard,
                space: &space,
            };
            let b = AcquisitionContext {
                model: &model,
                y_best: 0.2,
                constraints: &soft,
                space: &space,
            };
            assert_eq!(
                a.ca_ei(&x).unwrap().to_bits(),
                b.ca_ei(&x).unwrap().to_bits()
            );
        }
    }
}
