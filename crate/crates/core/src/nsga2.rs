//! Elitist NSGA-II over genomes in the unit hypercube.
//!
//! Each generation merges parents and offspring, sorts the union into
//! non-dominated fronts and refills the parent population front by front.
//! The last front that does not fit entirely is truncated by descending
//! crowding distance. Offspring come from binary tournaments, simulated
//! binary crossover and polynomial mutation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pareto::{fast_nondominated_sort, FrontPartition};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    pub population_size: usize,
    pub generations: usize,
    pub crossover_prob: f64,
    /// Per-gene mutation probability; `None` means `1 / genome length`.
    pub mutation_prob: Option<f64>,
    pub sbx_eta: f64,
    pub pm_eta: f64,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population_size: 100,
            generations: 50,
            crossover_prob: 0.9,
            mutation_prob: None,
            sbx_eta: 15.0,
            pm_eta: 20.0,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: &str| Err(Error::Config(format!("ga.{key}: {msg}")));
        if self.population_size < 4 || !self.population_size.is_multiple_of(2) {
            return bad("population_size", "must be an even number of at least 4");
        }
        if self.generations < 1 {
            return bad("generations", "must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.crossover_prob) {
            return bad("crossover_prob", "must lie in [0, 1]");
        }
        if let Some(p) = self.mutation_prob {
            if !(0.0..=1.0).contains(&p) {
                return bad("mutation_prob", "must lie in [0, 1]");
            }
        }
        if !(self.sbx_eta > 0.0 && self.sbx_eta.is_finite()) {
            return bad("sbx_eta", "must be positive");
        }
        if !(self.pm_eta > 0.0 && self.pm_eta.is_finite()) {
            return bad("pm_eta", "must be positive");
        }
        Ok(())
    }

    fn mutation_prob_for(&self, len: usize) -> f64 {
        self.mutation_prob.unwrap_or(1.0 / len.max(1) as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub genome: Vec<f64>,
    pub scores: Vec<f64>,
    /// 0-based front index.
    pub rank: usize,
    pub crowding: f64,
}

impl AsRef<[f64]> for Individual {
    fn as_ref(&self) -> &[f64] {
        &self.scores
    }
}

/// Binary tournament: lower rank wins, then larger crowding distance, then
/// a fair coin.
pub fn tournament_select<'a, R: Rng + ?Sized>(
    a: &'a Individual,
    b: &'a Individual,
    rng: &mut R,
) -> &'a Individual {
    if a.rank != b.rank {
        return if a.rank < b.rank { a } else { b };
    }
    if a.crowding != b.crowding {
        return if a.crowding > b.crowding { a } else { b };
    }
    if rng.gen::<bool>() {
        a
    } else {
        b
    }
}

pub fn sbx_crossover<R: Rng + ?Sized>(
    p1: &[f64],
    p2: &[f64],
    cfg: &GaConfig,
    rng: &mut R,
) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(p1.len(), p2.len(), "parents differ in length");
    let mut c1 = p1.to_vec();
    let mut c2 = p2.to_vec();
    if rng.gen::<f64>() >= cfg.crossover_prob {
        return (c1, c2);
    }
    let exponent = 1.0 / (cfg.sbx_eta + 1.0);
    for i in 0..p1.len() {
        let u: f64 = rng.gen();
        if (p1[i] - p2[i]).abs() < 1e-14 {
            continue;
        }
        let beta = if u <= 0.5 {
            (2.0 * u).powf(exponent)
        } else {
            (1.0 / (2.0 * (1.0 - u))).powf(exponent)
        };
        c1[i] = (0.5 * ((1.0 + beta) * p1[i] + (1.0 - beta) * p2[i])).clamp(0.0, 1.0);
        c2[i] = (0.5 * ((1.0 - beta) * p1[i] + (1.0 + beta) * p2[i])).clamp(0.0, 1.0);
    }
    (c1, c2)
}

/// Bounded polynomial mutation on `[0, 1]`.
pub fn polynomial_mutation<R: Rng + ?Sized>(g: &[f64], cfg: &GaConfig, rng: &mut R) -> Vec<f64> {
    let prob = cfg.mutation_prob_for(g.len());
    let eta = cfg.pm_eta;
    let pow = 1.0 / (eta + 1.0);
    g.iter()
        .map(|&y| {
            if rng.gen::<f64>() >= prob {
                return y;
            }
            let u: f64 = rng.gen();
            let dq = if u < 0.5 {
                let xy = 1.0 - y;
                let val = 2.0 * u + (1.0 - 2.0 * u) * xy.powf(eta + 1.0);
                val.powf(pow) - 1.0
            } else {
                let xy = y;
                let val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * xy.powf(eta + 1.0);
                1.0 - val.powf(pow)
            };
            (y + dq).clamp(0.0, 1.0)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Nsga2Result {
    pub population: Vec<Individual>,
    pub partition: FrontPartition,
}

impl Nsga2Result {
    pub fn first_front(&self) -> impl Iterator<Item = &Individual> {
        self.partition.fronts[0]
            .iter()
            .map(|&i| &self.population[i])
    }
}

/// Configured NSGA-II run, optionally seeded with known genomes.
pub struct Nsga2 {
    cfg: GaConfig,
    dim: usize,
    initial: Vec<Vec<f64>>,
}

impl Nsga2 {
    pub fn new(cfg: GaConfig, dim: usize) -> Result<Self> {
        cfg.validate()?;
        if dim == 0 {
            return Err(Error::Config("genome length must be positive".into()));
        }
        Ok(Nsga2 {
            cfg,
            dim,
            initial: Vec::new(),
        })
    }

    /// Genomes placed into the initial population before random fill.
    pub fn with_initial(mut self, genomes: Vec<Vec<f64>>) -> Self {
        self.initial = genomes;
        self
    }

    pub fn run<F>(&self, score_fn: F) -> Result<Nsga2Result>
    where
        F: FnMut(&[f64]) -> Result<Vec<f64>>,
    {
        self.run_observed(score_fn, |_, _| {})
    }

    /// Runs the configured generations; `observer` sees every surviving
    /// parent population.
    pub fn run_observed<F, O>(&self, mut score_fn: F, mut observer: O) -> Result<Nsga2Result>
    where
        F: FnMut(&[f64]) -> Result<Vec<f64>>,
        O: FnMut(usize, &[Individual]),
    {
        let n = self.cfg.population_size;
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        let mut num_scores = None;

        let mut evaluate = |genome: Vec<f64>| -> Result<Individual> {
            let scores = score_fn(&genome)?;
            if let Some(bad) = scores.iter().position(|s| !s.is_finite()) {
                return Err(Error::Numerical(format!(
                    "score function returned {} for objective {bad} at genome {genome:?}",
                    scores[bad]
                )));
            }
            match num_scores {
                None => num_scores = Some(scores.len()),
                Some(k) if k != scores.len() => {
                    return Err(Error::Numerical(format!(
                        "score function returned {} values, expected {k}",
                        scores.len()
                    )))
                }
                _ => {}
            }
            Ok(Individual {
                genome,
                scores,
                rank: 0,
                crowding: 0.0,
            })
        };

        let mut parents = Vec::with_capacity(n);
        for g in self.initial.iter().take(n) {
            if g.len() != self.dim {
                return Err(Error::validation("initial genome", "wrong length"));
            }
            parents.push(evaluate(g.iter().map(|v| v.clamp(0.0, 1.0)).collect())?);
        }
        while parents.len() < n {
            let genome: Vec<f64> = (0..self.dim).map(|_| rng.gen::<f64>()).collect();
            parents.push(evaluate(genome)?);
        }
        assign_rank_and_crowding(&mut parents);

        for generation in 0..self.cfg.generations {
            let mut offspring = Vec::with_capacity(n);
            while offspring.len() < n {
                let a = self.pick(&parents, &mut rng);
                let b = self.pick(&parents, &mut rng);
                let (c1, c2) = sbx_crossover(&a.genome, &b.genome, &self.cfg, &mut rng);
                let c1 = polynomial_mutation(&c1, &self.cfg, &mut rng);
                let c2 = polynomial_mutation(&c2, &self.cfg, &mut rng);
                offspring.push(c1);
                offspring.push(c2);
            }
            let mut combined = parents;
            for genome in offspring {
                combined.push(evaluate(genome)?);
            }
            parents = survive(combined, n);
            observer(generation, &parents);
        }

        let partition = fast_nondominated_sort(&parents);
        for (i, ind) in parents.iter_mut().enumerate() {
            ind.rank = partition.rank[i];
            ind.crowding = partition.crowding[i];
        }
        Ok(Nsga2Result {
            population: parents,
            partition,
        })
    }

    fn pick<'a>(&self, pop: &'a [Individual], rng: &mut ChaCha8Rng) -> &'a Individual {
        let i = rng.gen_range(0..pop.len());
        let j = rng.gen_range(0..pop.len());
        tournament_select(&pop[i], &pop[j], rng)
    }
}

fn assign_rank_and_crowding(pop: &mut [Individual]) {
    let partition = fast_nondominated_sort(pop);
    for (i, ind) in pop.iter_mut().enumerate() {
        ind.rank = partition.rank[i];
        ind.crowding = partition.crowding[i];
    }
}

/// Elitist (mu + lambda) survival of `n` members from `combined`.
fn survive(mut combined: Vec<Individual>, n: usize) -> Vec<Individual> {
    let partition = fast_nondominated_sort(&combined);
    for (i, ind) in combined.iter_mut().enumerate() {
        ind.rank = partition.rank[i];
        ind.crowding = partition.crowding[i];
    }
    let mut chosen: Vec<usize> = Vec::with_capacity(n);
    for front in &partition.fronts {
        if chosen.len() + front.len() <= n {
            chosen.extend(front);
            if chosen.len() == n {
                break;
            }
        } else {
            let mut last = front.clone();
            last.sort_by(|&a, &b| {
                partition.crowding[b]
                    .total_cmp(&partition.crowding[a])
                    .then(a.cmp(&b))
            });
            chosen.extend(&last[..n - chosen.len()]);
            break;
        }
    }
    let mut slots: Vec<Option<Individual>> = combined.into_iter().map(Some).collect();
    chosen
        .into_iter()
        .map(|i| slots[i].take().expect("each member chosen once"))
        .collect()
}

/// Runs NSGA-II for `cfg.generations` generations over `[0, 1]^dim`.
pub fn nsga2_run<F>(score_fn: F, cfg: &GaConfig, dim: usize) -> Result<Nsga2Result>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    Nsga2::new(cfg.clone(), dim)?.run(score_fn)
}
