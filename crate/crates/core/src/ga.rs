//! Generational real-coded GA: tournament selection, per-gene uniform
//! crossover, per-gene resampling mutation and elitism.
//!
//! Random draws per generation, in order: for each pair, the tournament
//! draws of parent 1 then parent 2, the crossover mask, then the mutation
//! draws of child 1 and child 2 (per gene one uniform, followed by the new
//! value when the gene mutates). Evaluation happens after all draws.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::Bounds;
use crate::error::{Error, Result};
use crate::problem::Objective;
use crate::runlog::{Algorithm, RunLog};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaConfig {
    pub population_size: usize,
    pub generations: u64,
    pub tournament_size: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub elite_size: usize,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population_size: 10,
            generations: 40_000,
            tournament_size: 3,
            crossover_rate: 0.5,
            mutation_rate: 0.1,
            elite_size: 1,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.elite_size < 1 || self.population_size < self.elite_size {
            return fail(format!(
                "need population_size >= elite_size >= 1, got {} and {}",
                self.population_size, self.elite_size
            ));
        }
        if self.tournament_size < 1 || self.tournament_size > self.population_size {
            return fail(format!(
                "tournament_size {} must be in 1..={}",
                self.tournament_size, self.population_size
            ));
        }
        for (name, r) in [("crossover_rate", self.crossover_rate), ("mutation_rate", self.mutation_rate)] {
            if !(0.0..=1.0).contains(&r) {
                return fail(format!("{name} {r} outside [0, 1]"));
            }
        }
        if self.generations == 0 {
            return fail("generations must be >= 1".into());
        }
        Ok(())
    }

    pub fn evaluations(&self) -> u64 {
        self.population_size as u64 * self.generations
    }
}

/// Draws `k` indices with replacement and returns the fittest; ties go to
/// the lowest index.
pub fn tournament_select<R: Rng + ?Sized>(fitness: &[f64], k: usize, rng: &mut R) -> usize {
    let mut best = rng.random_range(0..fitness.len());
    for _ in 1..k {
        let c = rng.random_range(0..fitness.len());
        if fitness[c] > fitness[best] || (fitness[c] == fitness[best] && c < best) {
            best = c;
        }
    }
    best
}

/// Swaps each locus between the two parents with probability `rate`.
pub fn uniform_crossover<R: Rng + ?Sized>(
    a: &[f64],
    b: &[f64],
    rate: f64,
    rng: &mut R,
) -> (Vec<f64>, Vec<f64>) {
    let mut c1 = a.to_vec();
    let mut c2 = b.to_vec();
    for i in 0..a.len() {
        if rng.random::<f64>() < rate {
            std::mem::swap(&mut c1[i], &mut c2[i]);
        }
    }
    (c1, c2)
}

/// Replaces each gene with probability `rate` by a fresh uniform sample of
/// its domain.
pub fn mutate<R: Rng + ?Sized>(v: &mut [f64], bounds: &Bounds, rate: f64, rng: &mut R) {
    for (i, g) in v.iter_mut().enumerate() {
        if rng.random::<f64>() < rate {
            *g = bounds.sample_gene(i, rng);
        }
    }
}

/// Indices sorted by descending fitness, ties by index.
fn ranking(fitness: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..fitness.len()).collect();
    idx.sort_by(|&a, &b| fitness[b].total_cmp(&fitness[a]).then(a.cmp(&b)));
    idx
}

/// Next population from an evaluated one.
pub fn breed<R: Rng + ?Sized>(
    pop: &[Vec<f64>],
    fitness: &[f64],
    cfg: &GaConfig,
    bounds: &Bounds,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    let mut next: Vec<Vec<f64>> = ranking(fitness)
        .into_iter()
        .take(cfg.elite_size)
        .map(|i| pop[i].clone())
        .collect();
    while next.len() < cfg.population_size {
        let p1 = tournament_select(fitness, cfg.tournament_size, rng);
        let p2 = tournament_select(fitness, cfg.tournament_size, rng);
        let (mut c1, mut c2) = uniform_crossover(&pop[p1], &pop[p2], cfg.crossover_rate, rng);
        mutate(&mut c1, bounds, cfg.mutation_rate, rng);
        mutate(&mut c2, bounds, cfg.mutation_rate, rng);
        next.push(c1);
        if next.len() < cfg.population_size {
            next.push(c2);
        }
    }
    next
}

pub fn run_ga<O: Objective + ?Sized>(cfg: &GaConfig, objective: &O) -> Result<RunLog> {
    cfg.validate()?;
    let bounds = objective.bounds();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut log = RunLog::start(Algorithm::Ga, cfg.seed);
    let mut pop: Vec<Vec<f64>> = (0..cfg.population_size).map(|_| bounds.sample(&mut rng)).collect();
    for generation in 0..cfg.generations {
        let evals = objective.evaluate_all(&pop);
        log.record_generation(generation, &pop, &evals);
        if generation + 1 < cfg.generations {
            let fitness: Vec<f64> = evals.iter().map(|e| e.fitness).collect();
            pop = breed(&pop, &fitness, cfg, bounds, &mut rng);
        }
    }
    Ok(log)
}
