//! Problem definition: objectives to minimize, hard and soft constraints,
//! and the black-box evaluator that measures a candidate.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::space::{Candidate, SearchSpace};

/// Measured objective values `[q_1, ..., q_K]`, all minimized.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveVector(pub Vec<f64>);

impl ObjectiveVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl AsRef<[f64]> for ObjectiveVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveSpec {
    pub name: String,
}

pub type Predicate = dyn Fn(&Candidate) -> Result<bool, String> + Send + Sync;
pub type PenaltyFn = dyn Fn(&Candidate) -> f64 + Send + Sync;

#[derive(Clone)]
pub enum ConstraintMode {
    Hard,
    /// Violations scale the acquisition by `beta(x)`, which must lie in `[0, 1)`.
    Soft(Arc<PenaltyFn>),
}

impl fmt::Debug for ConstraintMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintMode::Hard => f.write_str("Hard"),
            ConstraintMode::Soft(_) => f.write_str("Soft(..)"),
        }
    }
}

#[derive(Clone)]
pub struct ConstraintSpec {
    pub name: String,
    predicate: Arc<Predicate>,
    pub mode: ConstraintMode,
}

impl fmt::Debug for ConstraintSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConstraintSpec")
            .field("name", &self.name)
            .field("mode", &self.mode)
            .finish()
    }
}

impl ConstraintSpec {
    pub fn new<P>(name: impl Into<String>, mode: ConstraintMode, predicate: P) -> Self
    where
        P: Fn(&Candidate) -> Result<bool, String> + Send + Sync + 'static,
    {
        ConstraintSpec {
            name: name.into(),
            predicate: Arc::new(predicate),
            mode,
        }
    }

    pub fn hard<P>(name: impl Into<String>, predicate: P) -> Self
    where
        P: Fn(&Candidate) -> bool + Send + Sync + 'static,
    {
        Self::new(name, ConstraintMode::Hard, move |c| Ok(predicate(c)))
    }

    pub fn soft<P, B>(name: impl Into<String>, predicate: P, beta: B) -> Self
    where
        P: Fn(&Candidate) -> bool + Send + Sync + 'static,
        B: Fn(&Candidate) -> f64 + Send + Sync + 'static,
    {
        Self::new(name, ConstraintMode::Soft(Arc::new(beta)), move |c| {
            Ok(predicate(c))
        })
    }

    /// Same predicate, different enforcement mode.
    pub fn with_mode(&self, mode: ConstraintMode) -> Self {
        ConstraintSpec {
            name: self.name.clone(),
            predicate: Arc::clone(&self.predicate),
            mode,
        }
    }

    pub fn is_hard(&self) -> bool {
        matches!(self.mode, ConstraintMode::Hard)
    }

    pub fn is_satisfied(&self, x: &Candidate) -> Result<bool> {
        (self.predicate)(x).map_err(|message| Error::Constraint {
            name: self.name.clone(),
            message,
        })
    }

    /// Boolean indicator: 1 when the constraint holds at `x`, else 0.
    pub fn indicator(&self, x: &Candidate) -> Result<u8> {
        Ok(u8::from(self.is_satisfied(x)?))
    }

    /// Multiplicative acquisition factor: 1 when satisfied, `beta(x)` for a
    /// violated soft constraint and 0 for a violated hard one.
    pub fn soft_factor(&self, x: &Candidate) -> Result<f64> {
        if self.is_satisfied(x)? {
            return Ok(1.0);
        }
        match &self.mode {
            ConstraintMode::Hard => Ok(0.0),
            ConstraintMode::Soft(beta) => {
                let b = beta(x);
                if !(0.0..1.0).contains(&b) {
                    return Err(Error::Contract(format!(
                        "soft constraint `{}` returned beta = {b}, outside [0, 1)",
                        self.name
                    )));
                }
                Ok(b)
            }
        }
    }
}

/// Product of `soft_factor` over all constraints.
pub fn constraint_factor(constraints: &[ConstraintSpec], x: &Candidate) -> Result<f64> {
    let mut factor = 1.0;
    for c in constraints {
        factor *= c.soft_factor(x)?;
        if factor == 0.0 {
            break;
        }
    }
    Ok(factor)
}

/// True iff every constraint (hard or soft) is satisfied.
pub fn is_feasible(constraints: &[ConstraintSpec], x: &Candidate) -> Result<bool> {
    for c in constraints {
        if !c.is_satisfied(x)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Number of violated hard constraints.
pub fn hard_violations(constraints: &[ConstraintSpec], x: &Candidate) -> Result<usize> {
    let mut n = 0;
    for c in constraints.iter().filter(|c| c.is_hard()) {
        if !c.is_satisfied(x)? {
            n += 1;
        }
    }
    Ok(n)
}

/// Black-box measurement of a candidate's objectives.
pub trait Evaluator: Send + Sync {
    fn evaluate(&self, x: &Candidate) -> Result<ObjectiveVector>;
}

pub struct FnEvaluator<F>(pub F);

impl<F> Evaluator for FnEvaluator<F>
where
    F: Fn(&Candidate) -> Vec<f64> + Send + Sync,
{
    fn evaluate(&self, x: &Candidate) -> Result<ObjectiveVector> {
        Ok(ObjectiveVector((self.0)(x)))
    }
}

/// Full problem statement: minimize every objective over `space` subject to
/// `constraints`.
#[derive(Clone)]
pub struct Problem {
    pub space: SearchSpace,
    pub objectives: Vec<ObjectiveSpec>,
    pub constraints: Vec<ConstraintSpec>,
    pub evaluator: Arc<dyn Evaluator>,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("space", &self.space)
            .field("objectives", &self.objectives)
            .field("constraints", &self.constraints)
            .finish_non_exhaustive()
    }
}

impl Problem {
    pub fn new(
        space: SearchSpace,
        objective_names: &[&str],
        constraints: Vec<ConstraintSpec>,
        evaluator: Arc<dyn Evaluator>,
    ) -> Result<Self> {
        if objective_names.is_empty() {
            return Err(Error::validation(
                "objectives",
                "need at least one objective",
            ));
        }
        let mut objectives: Vec<ObjectiveSpec> = Vec::with_capacity(objective_names.len());
        for name in objective_names {
            if objectives.iter().any(|o| o.name == *name) {
                return Err(Error::validation(*name, "duplicate objective name"));
            }
            objectives.push(ObjectiveSpec {
                name: (*name).to_string(),
            });
        }
        Ok(Problem {
            space,
            objectives,
            constraints,
            evaluator,
        })
    }

    pub fn num_objectives(&self) -> usize {
        self.objectives.len()
    }

    /// Runs the evaluator and rejects wrong-length or non-finite results.
    pub fn evaluate(&self, x: &Candidate) -> Result<ObjectiveVector> {
        let q = self.evaluator.evaluate(x)?;
        if q.len() != self.num_objectives() {
            return Err(Error::Evaluation(format!(
                "expected {} objectives, evaluator returned {}",
                self.num_objectives(),
                q.len()
            )));
        }
        if let Some(i) = q.0.iter().position(|v| !v.is_finite()) {
            return Err(Error::Evaluation(format!(
                "objective `{}` is not finite ({})",
                self.objectives[i].name, q.0[i]
            )));
        }
        Ok(q)
    }
}
