//! Fixed-seed reproductions of the benchmark studies, with their pass
//! thresholds. Shared by the CLI `verify` command and the acceptance suite.

use std::time::{Duration, Instant};

use crate::engine::{run, EngineConfig, RunResult};
use crate::error::{Error, Result};
use crate::objectives::{hard_violations, ObjectiveVector};
use crate::pareto::{bounding_diagonal, generational_distance};
use crate::problems::{grid_reference_front, sinusoid_1d, BenchmarkProblem};
use crate::space::Candidate;

pub const VERIFY_SEED: u64 = 7;
pub const ORACLE_RESOLUTION: usize = 400;
/// GD threshold as a fraction of the oracle front's bounding diagonal.
pub const GD_FRACTION: f64 = 0.05;
pub const FRONT_TIME_LIMIT: Duration = Duration::from_secs(120);

pub const SINUSOID_START: f64 = 0.1;
pub const SINUSOID_ITERATIONS: usize = 15;
pub const SINUSOID_GRID: usize = 10_000;
pub const SINUSOID_MATCH: f64 = 0.05;
pub const SINUSOID_REFERENCE_X: f64 = 0.08;

#[derive(Debug, Clone)]
pub struct FrontReport {
    pub problem: BenchmarkProblem,
    pub result: RunResult,
    /// Objective vectors of the recovered Pareto front.
    pub front: Vec<ObjectiveVector>,
    pub oracle: Vec<ObjectiveVector>,
    pub gd: f64,
    pub diagonal: f64,
    pub threshold: f64,
    pub hard_violations: usize,
    pub elapsed: Duration,
}

impl FrontReport {
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.gd.is_nan() || self.gd > self.threshold {
            out.push(format!(
                "generational distance {:.6} exceeds {:.6}",
                self.gd, self.threshold
            ));
        }
        if self.hard_violations > 0 {
            out.push(format!(
                "{} archived points violate a hard constraint",
                self.hard_violations
            ));
        }
        if self.elapsed > FRONT_TIME_LIMIT {
            out.push(format!(
                "runtime {:.1}s exceeds {}s",
                self.elapsed.as_secs_f64(),
                FRONT_TIME_LIMIT.as_secs()
            ));
        }
        out
    }

    pub fn passed(&self) -> bool {
        self.failures().is_empty()
    }
}

/// Engine settings used by the two-objective reproductions: 8 initial
/// samples followed by 50 exploration queries.
pub fn front_config(seed: u64) -> EngineConfig {
    EngineConfig {
        n_initial: 8,
        max_iterations: 58,
        seed,
        ..EngineConfig::default()
    }
}

fn count_hard_violations(problem: &BenchmarkProblem, result: &RunResult) -> Result<usize> {
    let mut n = 0;
    for o in result.archive.observations() {
        if hard_violations(&problem.problem.constraints, &o.candidate)? > 0 {
            n += 1;
        }
    }
    Ok(n)
}

/// Runs the engine on `binh-korn` or `constr-ex` and compares its front to
/// the grid oracle.
pub fn verify_front(name: &str, seed: u64) -> Result<FrontReport> {
    if !matches!(name, "binh-korn" | "constr-ex") {
        return Err(Error::Config(format!(
            "no front reproduction for problem '{name}'"
        )));
    }
    let problem = BenchmarkProblem::by_name(name)?;
    let start = Instant::now();
    let result = run(&problem.problem, &front_config(seed), None, |_| Ok(()))?;
    let elapsed = start.elapsed();

    let front: Vec<ObjectiveVector> = result
        .pof
        .iter()
        .map(|&i| result.archive.observations()[i].objectives.clone())
        .collect();
    let oracle = grid_reference_front(&problem.problem, ORACLE_RESOLUTION)?;
    let gd = generational_distance(&front, &oracle);
    let diagonal = bounding_diagonal(&oracle);
    let hard_violations = count_hard_violations(&problem, &result)?;
    Ok(FrontReport {
        problem,
        result,
        front,
        oracle,
        gd,
        diagonal,
        threshold: GD_FRACTION * diagonal,
        hard_violations,
        elapsed,
    })
}

#[derive(Debug, Clone)]
pub struct SinusoidReport {
    pub result: RunResult,
    /// Every queried x, in query order.
    pub queries: Vec<f64>,
    pub hard_violations: usize,
    pub soft_queries: usize,
    pub best_feasible: f64,
    /// q at the reference point in the left basin.
    pub reference_value: f64,
    /// Grid minimum of q over the feasible set.
    pub grid_min: f64,
    pub grid_argmin: f64,
}

impl SinusoidReport {
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.hard_violations > 0 {
            out.push(format!(
                "{} queries inside the forbidden band",
                self.hard_violations
            ));
        }
        if self.soft_queries == 0 {
            out.push("no query in the penalized region".to_string());
        }
        if self.best_feasible.is_nan() || self.best_feasible > self.reference_value {
            out.push(format!(
                "best feasible value {:.6} above reference {:.6}",
                self.best_feasible, self.reference_value
            ));
        }
        let gap = (self.best_feasible - self.grid_min).abs();
        if gap.is_nan() || gap > SINUSOID_MATCH {
            out.push(format!(
                "best feasible value {:.6} not within {SINUSOID_MATCH} of grid minimum {:.6}",
                self.best_feasible, self.grid_min
            ));
        }
        out
    }

    pub fn passed(&self) -> bool {
        self.failures().is_empty()
    }
}

pub fn sinusoid_config(seed: u64) -> EngineConfig {
    EngineConfig {
        n_initial: 1,
        max_iterations: 1 + SINUSOID_ITERATIONS,
        initial_points: vec![Candidate::from_reals(&[SINUSOID_START])],
        seed,
        ..EngineConfig::default()
    }
}

pub fn verify_sinusoid(seed: u64) -> Result<SinusoidReport> {
    let bench = BenchmarkProblem::by_name("sinusoid-1d")?;
    let problem = &bench.problem;
    let result = run(problem, &sinusoid_config(seed), None, |_| Ok(()))?;
    let obs = result.archive.observations();
    let queries: Vec<f64> = obs.iter().map(|o| o.candidate.real(0)).collect();

    let hard_violations = count_hard_violations(&bench, &result)?;
    let soft = problem
        .constraints
        .iter()
        .find(|c| !c.is_hard())
        .expect("soft constraint");
    let mut soft_queries = 0;
    for o in obs {
        if !soft.is_satisfied(&o.candidate)? {
            soft_queries += 1;
        }
    }
    let best_feasible = obs
        .iter()
        .filter(|o| o.feasible)
        .map(|o| o.objectives.0[0])
        .fold(f64::INFINITY, f64::min);

    let (lo, hi) = match problem.space.params()[0].kind {
        crate::space::ParamKind::Continuous { lo, hi } => (lo, hi),
        _ => unreachable!("sinusoid domain is continuous"),
    };
    let (mut grid_min, mut grid_argmin) = (f64::INFINITY, f64::NAN);
    for i in 0..SINUSOID_GRID {
        let x = lo + (hi - lo) * i as f64 / (SINUSOID_GRID - 1) as f64;
        let c = Candidate::from_reals(&[x]);
        if crate::objectives::is_feasible(&problem.constraints, &c)? {
            let q = sinusoid_1d(x);
            if q < grid_min {
                (grid_min, grid_argmin) = (q, x);
            }
        }
    }

    Ok(SinusoidReport {
        result,
        queries,
        hard_violations,
        soft_queries,
        best_feasible,
        reference_value: sinusoid_1d(SINUSOID_REFERENCE_X),
        grid_min,
        grid_argmin,
    })
}
