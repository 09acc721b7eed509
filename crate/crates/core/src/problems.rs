//! Built-in benchmark problems and their brute-force reference fronts.
//!
//! * `binh-korn`: two quadratic objectives under two circular constraints,
//!   x in [0, 5], y in [0, 3].
//! * `constr-ex`: `q1 = x`, `q2 = (1 + y) / x` under two linear constraints,
//!   x in [0.1, 1], y in [0, 5].
//! * `sinusoid-1d`: a multi-modal 1-D cost on [0, 1.2] with a hard
//!   infeasible band [0.2, 0.6] and a soft-penalized region x > 0.6.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::objectives::{is_feasible, ConstraintSpec, FnEvaluator, ObjectiveVector, Problem};
use crate::pareto::pareto_front;
use crate::space::{Candidate, ParamKind, ParamSpec, SearchSpace};

pub const BUILTIN_NAMES: [&str; 3] = ["binh-korn", "constr-ex", "sinusoid-1d"];

pub fn binh_korn(x: f64, y: f64) -> (f64, f64) {
    (
        4.0 * x * x + 4.0 * y * y,
        (x - 5.0).powi(2) + (y - 5.0).powi(2),
    )
}

pub fn binh_korn_c1(x: f64, y: f64) -> bool {
    (x - 5.0).powi(2) + y * y <= 25.0
}

pub fn binh_korn_c2(x: f64, y: f64) -> bool {
    (x - 8.0).powi(2) + (y + 3.0).powi(2) >= 7.7
}

pub fn constr_ex(x: f64, y: f64) -> (f64, f64) {
    (x, (1.0 + y) / x)
}

pub fn constr_ex_c1(x: f64, y: f64) -> bool {
    y + 9.0 * x >= 6.0
}

pub fn constr_ex_c2(x: f64, y: f64) -> bool {
    -y + 9.0 * x >= 1.0
}

pub fn sinusoid_1d(x: f64) -> f64 {
    use std::f64::consts::PI;
    1.1 + (x - 0.5).powi(2) + 0.5 * (6.0 * PI * x + PI / 2.0).sin()
}

/// Hard constraint of the 1-D demo: the band [0.2, 0.6] is forbidden.
pub fn sinusoid_hard_ok(x: f64) -> bool {
    !(0.2..=0.6).contains(&x)
}

/// Soft constraint of the 1-D demo: satisfied for x <= 0.6.
pub fn sinusoid_soft_ok(x: f64) -> bool {
    x <= 0.6
}

/// Soft penalty `1 / (x - 0.6)^4`, clamped just below 1 so it stays a
/// valid acquisition factor.
pub fn sinusoid_beta(x: f64) -> f64 {
    (1.0 / (x - 0.6).powi(4)).min(1.0 - 1e-9)
}

#[derive(Clone)]
pub struct BenchmarkProblem {
    pub name: &'static str,
    pub problem: Problem,
    /// Worst feasible value of each objective over the domain.
    pub objective_bounds: Vec<f64>,
    violation: Arc<dyn Fn(&Candidate) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for BenchmarkProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BenchmarkProblem")
            .field("name", &self.name)
            .field("problem", &self.problem)
            .finish_non_exhaustive()
    }
}

fn require_continuous(space: &SearchSpace, name: &str) -> Result<usize> {
    let i = space
        .index_of(name)
        .ok_or_else(|| Error::Config(format!("parameter `{name}` is required by this problem")))?;
    match space.params()[i].kind {
        ParamKind::Continuous { .. } => Ok(i),
        _ => Err(Error::Config(format!(
            "parameter `{name}` must be continuous"
        ))),
    }
}

impl BenchmarkProblem {
    pub fn by_name(name: &str) -> Result<Self> {
        Self::with_space(name, None)
    }

    /// Builds a benchmark, optionally over a caller-supplied space (which
    /// must provide the problem's continuous parameters by name).
    pub fn with_space(name: &str, space: Option<SearchSpace>) -> Result<Self> {
        match name {
            "binh-korn" => Self::binh_korn(space),
            "constr-ex" => Self::constr_ex(space),
            "sinusoid-1d" => Self::sinusoid(space),
            other => Err(Error::Config(format!(
                "unknown problem `{other}` (expected one of {})",
                BUILTIN_NAMES.join(", ")
            ))),
        }
    }

    pub fn default_space(name: &str) -> Result<SearchSpace> {
        let params = match name {
            "binh-korn" => vec![
                ParamSpec::continuous("x", 0.0, 5.0)?,
                ParamSpec::continuous("y", 0.0, 3.0)?,
            ],
            "constr-ex" => vec![
                ParamSpec::continuous("x", 0.1, 1.0)?,
                ParamSpec::continuous("y", 0.0, 5.0)?,
            ],
            "sinusoid-1d" => vec![ParamSpec::continuous("x", 0.0, 1.2)?],
            other => return Err(Error::Config(format!("unknown problem `{other}`"))),
        };
        SearchSpace::new(params)
    }

    fn binh_korn(space: Option<SearchSpace>) -> Result<Self> {
        let space = match space {
            Some(s) => s,
            None => Self::default_space("binh-korn")?,
        };
        let (ix, iy) = (
            require_continuous(&space, "x")?,
            require_continuous(&space, "y")?,
        );
        let xy = move |c: &Candidate| (c.real(ix), c.real(iy));
        let evaluator = FnEvaluator(move |c: &Candidate| {
            let (x, y) = xy(c);
            let (q1, q2) = binh_korn(x, y);
            vec![q1, q2]
        });
        let constraints = vec![
            ConstraintSpec::hard("c1", move |c| {
                let (x, y) = xy(c);
                binh_korn_c1(x, y)
            }),
            ConstraintSpec::hard("c2", move |c| {
                let (x, y) = xy(c);
                binh_korn_c2(x, y)
            }),
        ];
        Ok(BenchmarkProblem {
            name: "binh-korn",
            problem: Problem::new(space, &["q1", "q2"], constraints, Arc::new(evaluator))?,
            objective_bounds: vec![136.0, 50.0],
            violation: Arc::new(move |c| {
                let (x, y) = xy(c);
                ((x - 5.0).powi(2) + y * y - 25.0).max(0.0)
                    + (7.7 - (x - 8.0).powi(2) - (y + 3.0).powi(2)).max(0.0)
            }),
        })
    }

    fn constr_ex(space: Option<SearchSpace>) -> Result<Self> {
        let space = match space {
            Some(s) => s,
            None => Self::default_space("constr-ex")?,
        };
        let (ix, iy) = (
            require_continuous(&space, "x")?,
            require_continuous(&space, "y")?,
        );
        if let ParamKind::Continuous { lo, .. } = space.params()[ix].kind {
            if lo <= 0.0 {
                return Err(Error::Config(
                    "constr-ex requires x > 0 over the whole domain".into(),
                ));
            }
        }
        let xy = move |c: &Candidate| (c.real(ix), c.real(iy));
        let evaluator = FnEvaluator(move |c: &Candidate| {
            let (x, y) = xy(c);
            let (q1, q2) = constr_ex(x, y);
            vec![q1, q2]
        });
        let constraints = vec![
            ConstraintSpec::hard("c1", move |c| {
                let (x, y) = xy(c);
                constr_ex_c1(x, y)
            }),
            ConstraintSpec::hard("c2", move |c| {
                let (x, y) = xy(c);
                constr_ex_c2(x, y)
            }),
        ];
        Ok(BenchmarkProblem {
            name: "constr-ex",
            problem: Problem::new(space, &["q1", "q2"], constraints, Arc::new(evaluator))?,
            objective_bounds: vec![1.0, 60.0],
            violation: Arc::new(move |c| {
                let (x, y) = xy(c);
                (6.0 - y - 9.0 * x).max(0.0) + (1.0 + y - 9.0 * x).max(0.0)
            }),
        })
    }

    fn sinusoid(space: Option<SearchSpace>) -> Result<Self> {
        let space = match space {
            Some(s) => s,
            None => Self::default_space("sinusoid-1d")?,
        };
        let ix = require_continuous(&space, "x")?;
        let evaluator = FnEvaluator(move |c: &Candidate| vec![sinusoid_1d(c.real(ix))]);
        let constraints = vec![
            ConstraintSpec::hard("band", move |c| sinusoid_hard_ok(c.real(ix))),
            ConstraintSpec::soft(
                "upper",
                move |c| sinusoid_soft_ok(c.real(ix)),
                move |c| sinusoid_beta(c.real(ix)),
            ),
        ];
        Ok(BenchmarkProblem {
            name: "sinusoid-1d",
            problem: Problem::new(space, &["q"], constraints, Arc::new(evaluator))?,
            objective_bounds: vec![2.1],
            violation: Arc::new(move |c| {
                let x = c.real(ix);
                if sinusoid_hard_ok(x) {
                    0.0
                } else {
                    (x - 0.2).min(0.6 - x) + 1e-9
                }
            }),
        })
    }

    /// Aggregate violation magnitude of the benchmark's constraints; 0 when feasible.
    pub fn violation(&self, c: &Candidate) -> f64 {
        (self.violation)(c)
    }

    /// Death-penalty scores for a plain NSGA-II run over encoded genomes:
    /// infeasible points score `worst feasible + violation` on every objective.
    pub fn penalized_scores(&self, genome: &[f64]) -> Result<Vec<f64>> {
        let c = self.problem.space.decode(genome)?;
        let v = self.violation(&c);
        if v > 0.0 || !is_feasible(&self.problem.constraints, &c)? {
            return Ok(self.objective_bounds.iter().map(|b| b + v).collect());
        }
        Ok(self.problem.evaluate(&c)?.0)
    }
}

/// Pareto front of the feasible points of a `resolution x resolution` grid
/// over a two-parameter continuous problem.
pub fn grid_reference_front(problem: &Problem, resolution: usize) -> Result<Vec<ObjectiveVector>> {
    let params = problem.space.params();
    let bounds: Vec<(f64, f64)> = params
        .iter()
        .map(|p| match p.kind {
            ParamKind::Continuous { lo, hi } => Ok((lo, hi)),
            _ => Err(Error::Config(format!(
                "grid reference needs continuous parameters (`{}`)",
                p.name
            ))),
        })
        .collect::<Result<_>>()?;
    if bounds.len() != 2 || resolution == 0 {
        return Err(Error::Config(
            "grid reference needs a 2-D problem and resolution >= 1".into(),
        ));
    }
    let axis = |(lo, hi): (f64, f64)| -> Vec<f64> {
        if resolution == 1 {
            vec![lo]
        } else {
            (0..resolution)
                .map(|i| lo + (hi - lo) * i as f64 / (resolution - 1) as f64)
                .collect()
        }
    };
    let xs = axis(bounds[0]);
    let ys = axis(bounds[1]);
    let mut values = Vec::new();
    for &x in &xs {
        for &y in &ys {
            let c = Candidate::from_reals(&[x, y]);
            if is_feasible(&problem.constraints, &c)? {
                values.push(problem.evaluate(&c)?);
            }
        }
    }
    if values.is_empty() {
        return Err(Error::Config("no feasible grid point".into()));
    }
    let front = pareto_front(&values);
    Ok(front.into_iter().map(|i| values[i].clone()).collect())
}
