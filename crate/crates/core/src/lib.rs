//! Multi-objective Bayesian optimization with constraint-aware expected
//! improvement, NSGA-II acquisition search and TOPSIS selection.

pub mod acquisition;
pub mod engine;
pub mod error;
pub mod nsga2;
pub mod objectives;
pub mod pareto;
pub mod problems;
pub mod space;
pub mod surrogate;
pub mod topsis;
pub mod verify;

pub use engine::{
    exploit, explore, propose_next, run, stop_check, Archive, EngineConfig, NextPick, Observation,
    RunResult, StopReason,
};
pub use error::{Error, Result};
pub use objectives::{
    ConstraintMode, ConstraintSpec, Evaluator, FnEvaluator, ObjectiveVector, Problem,
};
pub use space::{Candidate, ParamKind, ParamSpec, ParamValue, SearchSpace};
pub use topsis::Direction;
