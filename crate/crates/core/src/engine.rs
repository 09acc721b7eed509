//! The optimization loop.
//!
//! Exploration fits one GP per objective, turns each into a constraint-aware
//! EI function, runs NSGA-II over the vector of (negated) acquisition values
//! and picks the next query from the resulting Pareto set with TOPSIS. It
//! stops once the proposal lands within `delta` of an archived point or the
//! evaluation budget is spent. Exploitation extracts the Pareto front of the
//! feasible observations and recommends one member with TOPSIS.

use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::acquisition::{expected_improvement, incumbent};
use crate::error::{Error, Result};
use crate::nsga2::{GaConfig, Nsga2};
use crate::objectives::{
    constraint_factor, hard_violations, is_feasible, ObjectiveVector, Problem,
};
use crate::pareto::pareto_front;
use crate::space::{euclidean, Candidate};
use crate::surrogate::{gp_fit, GpModel, HyperMode};
use crate::topsis::{topsis_rank, DecisionMatrix, Direction};

/// One member of the acquisition Pareto set: a candidate and its
/// (un-negated) acquisition vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ProposalPoint {
    pub candidate: Candidate,
    pub acquisition: Vec<f64>,
}

pub type PickRule = dyn Fn(&[ProposalPoint]) -> Vec<usize> + Send + Sync;

/// How the next query is chosen from the acquisition Pareto set.
#[derive(Clone, Default)]
pub enum NextPick {
    #[default]
    Topsis,
    /// Query every member of the set (batch evaluation).
    All,
    /// User rule returning indices into the set, in preference order.
    Custom(Arc<PickRule>),
}

impl fmt::Debug for NextPick {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NextPick::Topsis => f.write_str("Topsis"),
            NextPick::All => f.write_str("All"),
            NextPick::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub n_initial: usize,
    /// Total evaluation budget, initial design included.
    pub max_iterations: usize,
    /// Stop threshold on the encoded distance to the nearest archived point.
    pub delta: f64,
    /// NSGA-II settings for acquisition optimization; its seed is replaced
    /// by one derived from `seed` and the iteration.
    pub ga: GaConfig,
    pub next_pick: NextPick,
    pub seed: u64,
    /// Points evaluated first; they count towards `n_initial`.
    pub initial_points: Vec<Candidate>,
    /// GP noise variance on the standardized target scale.
    pub gp_noise: f64,
    /// Evaluate batch proposals on several threads (evaluator must allow it).
    pub parallel_evaluation: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            n_initial: 8,
            max_iterations: 50,
            delta: 1e-3,
            ga: GaConfig {
                population_size: 60,
                generations: 30,
                ..GaConfig::default()
            },
            next_pick: NextPick::Topsis,
            seed: 0,
            initial_points: Vec::new(),
            gp_noise: 1e-6,
            parallel_evaluation: false,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        let min_initial = if self.initial_points.is_empty() { 2 } else { 1 };
        if self.n_initial < min_initial {
            return Err(Error::Config(format!(
                "n_initial must be at least {min_initial}"
            )));
        }
        if self.initial_points.len() > self.n_initial {
            return Err(Error::Config("more initial_points than n_initial".into()));
        }
        if self.max_iterations < self.n_initial {
            return Err(Error::Config(format!(
                "max_iterations ({}) must be at least n_initial ({})",
                self.max_iterations, self.n_initial
            )));
        }
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(Error::Config("delta must be finite and positive".into()));
        }
        if !(self.gp_noise.is_finite() && self.gp_noise > 0.0) {
            return Err(Error::Config("gp_noise must be finite and positive".into()));
        }
        self.ga.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub candidate: Candidate,
    pub encoded: Vec<f64>,
    pub objectives: ObjectiveVector,
    pub feasible: bool,
    /// 0 for the initial design, then the exploration iteration.
    pub iteration: usize,
}

/// Ordered record of every successful evaluation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Archive {
    observations: Vec<Observation>,
}

impl Archive {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn contains_encoding(&self, encoded: &[f64]) -> bool {
        self.observations.iter().any(|o| o.encoded == encoded)
    }

    /// Appends an observation; rejects exact duplicate encodings and
    /// decreasing iteration numbers.
    pub fn push(&mut self, obs: Observation) -> Result<()> {
        if let Some(last) = self.observations.last() {
            if obs.iteration < last.iteration {
                return Err(Error::Contract(
                    "archive iterations must be non-decreasing".into(),
                ));
            }
        }
        if self.contains_encoding(&obs.encoded) {
            return Err(Error::Contract("candidate already in the archive".into()));
        }
        if obs.objectives.0.iter().any(|v| !v.is_finite()) {
            return Err(Error::Contract("archived objectives must be finite".into()));
        }
        self.observations.push(obs);
        Ok(())
    }

    /// Smallest encoded distance from `encoded` to any archived point.
    pub fn min_distance(&self, encoded: &[f64]) -> f64 {
        self.observations
            .iter()
            .map(|o| euclidean(&o.encoded, encoded))
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    StopThreshold,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct Exploration {
    pub archive: Archive,
    pub stop_reason: StopReason,
    /// Evaluations performed, failed ones included.
    pub iterations_used: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Exploitation {
    /// Archive indices of the Pareto-optimal feasible observations.
    pub pof: Vec<usize>,
    /// Archive index of the recommended observation.
    pub best_index: usize,
    /// TOPSIS closeness of each `pof` member, aligned with `pof`.
    pub closeness: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub archive: Archive,
    pub pof: Vec<usize>,
    pub best_index: usize,
    pub closeness: Vec<f64>,
    pub stop_reason: StopReason,
    pub iterations_used: usize,
}

#[derive(Debug, Clone)]
pub struct Proposal {
    /// Candidates to query next, in preference order.
    pub candidates: Vec<Candidate>,
    /// Pareto set of the final GA population over acquisition values.
    pub pm: Vec<ProposalPoint>,
    /// True when the candidates came from uniform sampling instead of the GA.
    pub fallback: bool,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn derive_seed(base: u64, a: u64, b: u64) -> u64 {
    splitmix(splitmix(splitmix(base) ^ a) ^ b)
}

/// True iff the nearest archived point is within `delta` of `next`.
pub fn stop_check(
    problem: &Problem,
    archive: &Archive,
    next: &Candidate,
    delta: f64,
) -> Result<bool> {
    let encoded = problem.space.encode(next)?;
    Ok(archive.min_distance(&encoded) <= delta)
}

/// Fits one GP per objective on every archived observation.
pub fn fit_surrogates(
    archive: &Archive,
    num_objectives: usize,
    noise: f64,
    seed: u64,
) -> Result<Vec<GpModel>> {
    let inputs: Vec<Vec<f64>> = archive
        .observations()
        .iter()
        .map(|o| o.encoded.clone())
        .collect();
    (0..num_objectives)
        .map(|j| {
            let targets: Vec<f64> = archive
                .observations()
                .iter()
                .map(|o| o.objectives.0[j])
                .collect();
            gp_fit(
                &inputs,
                &targets,
                &HyperMode::MaximizeEvidence {
                    seed: derive_seed(seed, j as u64, 0x6770),
                    noise_variance: noise,
                },
            )
        })
        .collect()
}

/// TOPSIS over rows, ignoring criteria that are zero for every row (they
/// carry no preference and cannot be vector-normalized). Returns closeness
/// and ranking.
pub(crate) fn rank_rows(
    rows: &[Vec<f64>],
    direction: Direction,
    weights: Option<&[f64]>,
) -> Result<(Vec<f64>, Vec<usize>)> {
    let n = rows.first().map_or(0, Vec::len);
    let keep: Vec<usize> = (0..n)
        .filter(|&j| rows.iter().any(|r| r[j] != 0.0))
        .collect();
    if keep.is_empty() {
        return Ok((vec![0.5; rows.len()], (0..rows.len()).collect()));
    }
    let reduced: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| keep.iter().map(|&j| r[j]).collect())
        .collect();
    let w = weights.map(|w| keep.iter().map(|&j| w[j]).collect());
    let dm = DecisionMatrix::new(reduced, w, vec![direction; keep.len()])?;
    let res = topsis_rank(&dm)?;
    Ok((res.closeness, res.ranking))
}

/// Proposes the next query point(s) from the current archive.
pub fn propose_next(
    archive: &Archive,
    problem: &Problem,
    cfg: &EngineConfig,
    iteration: usize,
    exclude: &[Vec<f64>],
) -> Result<Proposal> {
    let wrap = |e: Error| Error::Iteration {
        iteration,
        source: Box::new(e),
    };
    if archive.is_empty() {
        return Err(wrap(Error::Contract(
            "cannot propose from an empty archive".into(),
        )));
    }
    let k = problem.num_objectives();
    let space = &problem.space;
    let seed = derive_seed(cfg.seed, iteration as u64, 0x7072);

    let models = fit_surrogates(archive, k, cfg.gp_noise, seed).map_err(wrap)?;
    let y_best: Vec<f64> = (0..k)
        .map(|j| {
            incumbent(
                archive
                    .observations()
                    .iter()
                    .map(|o| (o.objectives.0[j], o.feasible))
                    .collect::<Vec<_>>(),
            )
            .expect("archive is non-empty")
        })
        .collect();

    let acquisition = |genome: &[f64]| -> Result<(Candidate, Vec<f64>)> {
        let c = space.decode(genome)?;
        let factor = constraint_factor(&problem.constraints, &c)?;
        if factor == 0.0 {
            return Ok((c, vec![0.0; k]));
        }
        let enc = space.encode(&c)?;
        let values = models
            .iter()
            .zip(&y_best)
            .map(|(m, &yb)| {
                let (mu, sigma) = m.posterior(&enc);
                expected_improvement(mu, sigma, yb) * factor
            })
            .collect();
        Ok((c, values))
    };

    let ga_cfg = GaConfig {
        seed: derive_seed(seed, 0x6761, 0),
        ..cfg.ga.clone()
    };
    let ga = Nsga2::new(ga_cfg, space.encoded_dim()).map_err(wrap)?;
    // negate so that the minimizing domination rule prefers larger acquisition
    let result = ga
        .run(|g| Ok(acquisition(g)?.1.into_iter().map(|v| -v).collect()))
        .map_err(wrap)?;

    let mut pm: Vec<ProposalPoint> = Vec::new();
    for id in pareto_front(&result.population) {
        let (candidate, acq) = acquisition(&result.population[id].genome).map_err(wrap)?;
        if acq.iter().all(|v| *v == 0.0) || pm.iter().any(|p| p.candidate == candidate) {
            continue;
        }
        pm.push(ProposalPoint {
            candidate,
            acquisition: acq,
        });
    }

    let is_new = |c: &Candidate| -> Result<bool> {
        let enc = space.encode(c)?;
        Ok(!archive.contains_encoding(&enc) && !exclude.contains(&enc))
    };

    let order: Vec<usize> = if pm.is_empty() {
        Vec::new()
    } else {
        match &cfg.next_pick {
            NextPick::Topsis | NextPick::All => {
                let rows: Vec<Vec<f64>> = pm.iter().map(|p| p.acquisition.clone()).collect();
                rank_rows(&rows, Direction::Benefit, None).map_err(wrap)?.1
            }
            NextPick::Custom(rule) => rule(&pm).into_iter().filter(|&i| i < pm.len()).collect(),
        }
    };

    let mut candidates = Vec::new();
    for i in order {
        if is_new(&pm[i].candidate).map_err(wrap)? {
            candidates.push(pm[i].candidate.clone());
            if !matches!(cfg.next_pick, NextPick::All) {
                break;
            }
        }
    }

    let mut fallback = false;
    if candidates.is_empty() {
        fallback = true;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x756e, 0));
        let mut least: Option<(usize, Candidate)> = None;
        for _ in 0..100 {
            let c = space.sample_uniform(&mut rng);
            if !is_new(&c).map_err(wrap)? {
                continue;
            }
            let hv = hard_violations(&problem.constraints, &c).map_err(wrap)?;
            if hv == 0 {
                least = Some((0, c));
                break;
            }
            if least.as_ref().is_none_or(|(v, _)| hv < *v) {
                least = Some((hv, c));
            }
        }
        if let Some((_, c)) = least {
            candidates.push(c);
        }
    }

    Ok(Proposal {
        candidates,
        pm,
        fallback,
    })
}

enum Evaluated {
    Ok(Observation),
    Failed(Vec<f64>),
}

fn evaluate(problem: &Problem, c: &Candidate, iteration: usize) -> Result<Evaluated> {
    let encoded = problem.space.encode(c)?;
    let feasible = is_feasible(&problem.constraints, c)?;
    Ok(match problem.evaluate(c) {
        Ok(objectives) => Evaluated::Ok(Observation {
            candidate: c.clone(),
            encoded,
            objectives,
            feasible,
            iteration,
        }),
        // failed or non-finite evaluations never enter the archive
        Err(Error::Evaluation(_)) => Evaluated::Failed(encoded),
        Err(e) => return Err(e),
    })
}

/// Runs the exploration phase. `on_observation` sees every archived
/// observation as soon as it lands.
pub fn explore<F>(
    problem: &Problem,
    cfg: &EngineConfig,
    mut on_observation: F,
) -> Result<Exploration>
where
    F: FnMut(&Observation) -> Result<()>,
{
    cfg.validate()?;
    let space = &problem.space;
    let mut archive = Archive::new();
    let mut failed: Vec<Vec<f64>> = Vec::new();
    let mut evaluations = 0usize;

    let mut record =
        |archive: &mut Archive, failed: &mut Vec<Vec<f64>>, e: Evaluated| -> Result<()> {
            match e {
                Evaluated::Ok(obs) => {
                    archive.push(obs)?;
                    on_observation(archive.observations().last().expect("just pushed"))
                }
                Evaluated::Failed(enc) => {
                    failed.push(enc);
                    Ok(())
                }
            }
        };

    for c in &cfg.initial_points {
        space.validate(c)?;
        if archive.contains_encoding(&space.encode(c)?) {
            return Err(Error::Config("duplicate entry in initial_points".into()));
        }
        evaluations += 1;
        let e = evaluate(problem, c, 0)?;
        record(&mut archive, &mut failed, e)?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 0x696e, 0));
    let max_attempts = 100 * cfg.n_initial;
    let mut attempts = 0;
    let mut found_feasible =
        !cfg.initial_points.is_empty() || !problem.constraints.iter().any(|c| c.is_hard());
    let mut pool: Vec<(usize, Candidate)> = Vec::new();
    while archive.len() < cfg.n_initial
        && attempts < max_attempts
        && evaluations < cfg.max_iterations
    {
        attempts += 1;
        let c = space.sample_uniform(&mut rng);
        let enc = space.encode(&c)?;
        if archive.contains_encoding(&enc) || failed.contains(&enc) {
            continue;
        }
        let hv = hard_violations(&problem.constraints, &c)?;
        if hv > 0 {
            pool.push((hv, c));
            continue;
        }
        found_feasible = true;
        evaluations += 1;
        let e = evaluate(problem, &c, 0)?;
        record(&mut archive, &mut failed, e)?;
    }
    if archive.len() < cfg.n_initial {
        if !found_feasible {
            return Err(Error::Config(format!(
                "no hard-feasible initial point found in {max_attempts} uniform draws"
            )));
        }
        // fill up with the least-violating draws
        pool.sort_by_key(|(hv, _)| *hv);
        for (_, c) in pool {
            if archive.len() >= cfg.n_initial || evaluations >= cfg.max_iterations {
                break;
            }
            if archive.contains_encoding(&space.encode(&c)?) {
                continue;
            }
            evaluations += 1;
            let e = evaluate(problem, &c, 0)?;
            record(&mut archive, &mut failed, e)?;
        }
    }
    if archive.is_empty() {
        return Err(Error::Config(
            "initial design produced no valid evaluation".into(),
        ));
    }

    let mut iteration = 0;
    let stop_reason = loop {
        if evaluations >= cfg.max_iterations {
            break StopReason::MaxIterations;
        }
        iteration += 1;
        let proposal = propose_next(&archive, problem, cfg, iteration, &failed)?;
        let mut batch = Vec::new();
        for c in proposal.candidates {
            if !stop_check(problem, &archive, &c, cfg.delta)? {
                batch.push(c);
            }
        }
        if batch.is_empty() {
            break StopReason::StopThreshold;
        }
        batch.truncate(cfg.max_iterations - evaluations);
        evaluations += batch.len();

        let results: Vec<Result<Evaluated>> = if cfg.parallel_evaluation && batch.len() > 1 {
            std::thread::scope(|s| {
                let handles: Vec<_> = batch
                    .iter()
                    .map(|c| s.spawn(move || evaluate(problem, c, iteration)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("evaluator thread panicked"))
                    .collect()
            })
        } else {
            batch
                .iter()
                .map(|c| evaluate(problem, c, iteration))
                .collect()
        };
        for r in results {
            match r? {
                Evaluated::Ok(obs) if archive.contains_encoding(&obs.encoded) => {}
                e => record(&mut archive, &mut failed, e)?,
            }
        }
    };

    Ok(Exploration {
        archive,
        stop_reason,
        iterations_used: evaluations,
    })
}

/// Pareto front of the feasible observations and the TOPSIS recommendation.
pub fn exploit(archive: &Archive, weights: Option<&[f64]>) -> Result<Exploitation> {
    let feasible: Vec<usize> = archive
        .observations()
        .iter()
        .enumerate()
        .filter(|(_, o)| o.feasible)
        .map(|(i, _)| i)
        .collect();
    if feasible.is_empty() {
        return Err(Error::NoFeasible);
    }
    let objs: Vec<&[f64]> = feasible
        .iter()
        .map(|&i| archive.observations()[i].objectives.0.as_slice())
        .collect();
    let pof: Vec<usize> = pareto_front(&objs)
        .into_iter()
        .map(|i| feasible[i])
        .collect();
    let rows: Vec<Vec<f64>> = pof
        .iter()
        .map(|&i| archive.observations()[i].objectives.0.clone())
        .collect();
    if let Some(w) = weights {
        if w.len() != rows[0].len() {
            return Err(Error::Config(format!(
                "expected {} objective weights, got {}",
                rows[0].len(),
                w.len()
            )));
        }
    }
    let (closeness, ranking) = rank_rows(&rows, Direction::Cost, weights)?;
    Ok(Exploitation {
        best_index: pof[ranking[0]],
        pof,
        closeness,
    })
}

/// Exploration followed by exploitation.
pub fn run<F>(
    problem: &Problem,
    cfg: &EngineConfig,
    weights: Option<&[f64]>,
    on_observation: F,
) -> Result<RunResult>
where
    F: FnMut(&Observation) -> Result<()>,
{
    let ex = explore(problem, cfg, on_observation)?;
    let pick = exploit(&ex.archive, weights)?;
    Ok(RunResult {
        archive: ex.archive,
        pof: pick.pof,
        best_index: pick.best_index,
        closeness: pick.closeness,
        stop_reason: ex.stop_reason,
        iterations_used: ex.iterations_used,
    })
}
