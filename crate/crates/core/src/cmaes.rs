//! (mu/mu_w, lambda)-CMA-ES with clamp repair, searching the unit cube that
//! maps affinely onto the objective's box.
//!
//! Repaired (clamped) samples are used both for evaluation and for the
//! distribution update. When the condition number of `C` exceeds
//! [`MAX_CONDITION`], the strategy restarts from its current mean with
//! `C = I`, `sigma = sigma0` and zeroed evolution paths.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{Evaluation, Objective};
use crate::runlog::{Algorithm, RunLog};

pub const MAX_CONDITION: f64 = 1e14;
pub const EIGEN_FLOOR: f64 = 1e-20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CmaesConfig {
    pub mu: usize,
    pub lambda: usize,
    pub sigma0: f64,
    pub generations: u64,
    pub seed: u64,
    /// Starting mean in the unit cube; drawn uniformly when `None`.
    pub initial_mean: Option<Vec<f64>>,
}

impl Default for CmaesConfig {
    fn default() -> Self {
        Self {
            mu: 25,
            lambda: 50,
            sigma0: 0.5,
            generations: 8_000,
            seed: 0,
            initial_mean: None,
        }
    }
}

impl CmaesConfig {
    /// Default `lambda = 4 + floor(3 ln n)` and `mu = lambda / 2`.
    pub fn standard(n: usize) -> Self {
        let lambda = 4 + (3.0 * (n as f64).ln()).floor() as usize;
        Self {
            mu: lambda / 2,
            lambda,
            ..Self::default()
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(1 <= self.mu && self.mu <= self.lambda) {
            return Err(Error::Config(format!(
                "need 1 <= mu <= lambda, got mu = {}, lambda = {}",
                self.mu, self.lambda
            )));
        }
        if self.lambda < 2 {
            return Err(Error::Config("lambda must be >= 2".into()));
        }
        if !(self.sigma0.is_finite() && self.sigma0 > 0.0) {
            return Err(Error::Config(format!("sigma0 must be > 0, got {}", self.sigma0)));
        }
        if self.generations == 0 {
            return Err(Error::Config("generations must be >= 1".into()));
        }
        if let Some(m) = &self.initial_mean {
            if m.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: m.len(),
                });
            }
            if m.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::Config("initial_mean must lie in the unit cube".into()));
            }
        }
        Ok(())
    }

    pub fn evaluations(&self) -> u64 {
        self.lambda as u64 * self.generations
    }
}

/// Standard strategy parameters for dimension `n` and `mu` parents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyConstants {
    pub weights: Vec<f64>,
    pub mu_eff: f64,
    pub c_sigma: f64,
    pub d_sigma: f64,
    pub c_c: f64,
    pub c_1: f64,
    pub c_mu: f64,
    pub chi_n: f64,
    /// Generations between eigendecompositions.
    pub eigen_interval: u64,
}

impl StrategyConstants {
    pub fn new(n: usize, mu: usize) -> Self {
        let nf = n as f64;
        let raw: Vec<f64> = (1..=mu).map(|i| (mu as f64 + 0.5).ln() - (i as f64).ln()).collect();
        let sum: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / sum).collect();
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
        let c_sigma = (mu_eff + 2.0) / (nf + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / nf) / (nf + 4.0 + 2.0 * mu_eff / nf);
        let c_1 = 2.0 / ((nf + 1.3).powi(2) + mu_eff);
        let c_mu = (1.0 - c_1).min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((nf + 2.0).powi(2) + mu_eff));
        let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));
        let eigen_interval = ((1.0 / (10.0 * nf * (c_1 + c_mu))).ceil() as u64).max(1);
        Self {
            weights,
            mu_eff,
            c_sigma,
            d_sigma,
            c_c,
            c_1,
            c_mu,
            chi_n,
            eigen_interval,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CmaesState {
    pub constants: StrategyConstants,
    pub lambda: usize,
    pub sigma0: f64,
    pub mean: DVector<f64>,
    pub sigma: f64,
    pub cov: DMatrix<f64>,
    pub p_sigma: DVector<f64>,
    pub p_c: DVector<f64>,
    /// Eigenvectors of `cov` at the last refresh.
    pub basis: DMatrix<f64>,
    /// Square roots of the eigenvalues at the last refresh.
    pub scales: DVector<f64>,
    pub inv_sqrt_cov: DMatrix<f64>,
    pub eigen_generation: u64,
    pub generation: u64,
    pub restarts: u32,
}

impl CmaesState {
    pub fn new(mean: Vec<f64>, sigma0: f64, mu: usize, lambda: usize) -> Self {
        let n = mean.len();
        Self {
            constants: StrategyConstants::new(n, mu),
            lambda,
            sigma0,
            mean: DVector::from_vec(mean),
            sigma: sigma0,
            cov: DMatrix::identity(n, n),
            p_sigma: DVector::zeros(n),
            p_c: DVector::zeros(n),
            basis: DMatrix::identity(n, n),
            scales: DVector::from_element(n, 1.0),
            inv_sqrt_cov: DMatrix::identity(n, n),
            eigen_generation: 0,
            generation: 0,
            restarts: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// One raw sample `m + sigma B D z`, before repair.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let n = self.dim();
        let z = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let y = &self.basis * z.component_mul(&self.scales);
        &self.mean + y * self.sigma
    }

    /// `lambda` samples clamped into the unit cube.
    pub fn ask<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<DVector<f64>> {
        (0..self.lambda)
            .map(|_| self.sample(rng).map(|v| v.clamp(0.0, 1.0)))
            .collect()
    }

    /// Updates the distribution from evaluated candidates (maximisation).
    pub fn tell(&mut self, candidates: &[DVector<f64>], fitness: &[f64]) -> Result<()> {
        if candidates.len() != self.lambda || fitness.len() != self.lambda {
            return Err(Error::DimensionMismatch {
                expected: self.lambda,
                got: candidates.len().min(fitness.len()),
            });
        }
        if let Some(c) = candidates.iter().find(|c| c.len() != self.dim()) {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: c.len(),
            });
        }
        let k = self.constants.clone();
        let n = self.dim() as f64;
        let mut order: Vec<usize> = (0..self.lambda).collect();
        order.sort_by(|&a, &b| fitness[b].total_cmp(&fitness[a]).then(a.cmp(&b)));

        let old = self.mean.clone();
        let steps: Vec<DVector<f64>> = order
            .iter()
            .take(k.weights.len())
            .map(|&i| (&candidates[i] - &old) / self.sigma)
            .collect();
        let mut y_w = DVector::zeros(self.dim());
        for (w, y) in k.weights.iter().zip(&steps) {
            y_w.axpy(*w, y, 1.0);
        }
        self.mean = &old + &y_w * self.sigma;

        let cs = k.c_sigma;
        self.p_sigma = &self.p_sigma * (1.0 - cs) + (&self.inv_sqrt_cov * &y_w) * (cs * (2.0 - cs) * k.mu_eff).sqrt();
        let norm_ps = self.p_sigma.norm();
        let decay = 1.0 - (1.0 - cs).powf(2.0 * (self.generation + 1) as f64);
        let h_sigma = norm_ps / decay.sqrt() < (1.4 + 2.0 / (n + 1.0)) * k.chi_n;
        let cc = k.c_c;
        self.p_c *= 1.0 - cc;
        if h_sigma {
            self.p_c.axpy((cc * (2.0 - cc) * k.mu_eff).sqrt(), &y_w, 1.0);
        }
        let delta = if h_sigma { 0.0 } else { cc * (2.0 - cc) };

        let mut rank_mu = DMatrix::zeros(self.dim(), self.dim());
        for (w, y) in k.weights.iter().zip(&steps) {
            rank_mu.ger(*w, y, y, 1.0);
        }
        let rank_one = &self.p_c * self.p_c.transpose();
        self.cov = &self.cov * (1.0 - k.c_1 - k.c_mu + k.c_1 * delta) + rank_one * k.c_1 + rank_mu * k.c_mu;

        self.sigma *= ((cs / k.d_sigma) * (norm_ps / k.chi_n - 1.0)).exp();
        self.generation += 1;
        if self.generation - self.eigen_generation >= k.eigen_interval {
            self.refresh_eigen();
        }
        Ok(())
    }

    /// Recomputes `B`, `D` and `C^-1/2`; restarts on ill-conditioning.
    pub fn refresh_eigen(&mut self) {
        let n = self.dim();
        self.eigen_generation = self.generation;
        self.cov = (&self.cov + self.cov.transpose()) * 0.5;
        let eig = SymmetricEigen::new(self.cov.clone());
        let values = eig.eigenvalues.map(|v| v.max(EIGEN_FLOOR));
        let condition = values.max() / values.min();
        if !condition.is_finite() || condition > MAX_CONDITION {
            self.restarts += 1;
            log::info!(
                "cma-es restart {} at generation {}: condition number {condition:e}",
                self.restarts,
                self.generation
            );
            self.cov = DMatrix::identity(n, n);
            self.sigma = self.sigma0;
            self.p_sigma = DVector::zeros(n);
            self.p_c = DVector::zeros(n);
            self.basis = DMatrix::identity(n, n);
            self.scales = DVector::from_element(n, 1.0);
            self.inv_sqrt_cov = DMatrix::identity(n, n);
            return;
        }
        self.scales = values.map(f64::sqrt);
        let inv = DMatrix::from_diagonal(&self.scales.map(|d| 1.0 / d));
        self.inv_sqrt_cov = &eig.eigenvectors * inv * eig.eigenvectors.transpose();
        self.basis = eig.eigenvectors;
    }
}

/// A CMA-ES run in progress; serialisable so it can be snapshotted and
/// resumed bit-exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CmaesRun {
    pub config: CmaesConfig,
    pub state: CmaesState,
    pub rng: ChaCha8Rng,
    pub log: RunLog,
}

impl CmaesRun {
    pub fn new<O: Objective + ?Sized>(config: &CmaesConfig, objective: &O) -> Result<Self> {
        let dim = objective.bounds().dim();
        config.validate(dim)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mean = match &config.initial_mean {
            Some(m) => m.clone(),
            None => (0..dim).map(|_| rng.random::<f64>()).collect(),
        };
        Ok(Self {
            state: CmaesState::new(mean, config.sigma0, config.mu, config.lambda),
            config: config.clone(),
            rng,
            log: RunLog::start(Algorithm::Cmaes, config.seed),
        })
    }

    pub fn finished(&self) -> bool {
        self.state.generation >= self.config.generations
    }

    /// One ask, evaluate, tell cycle.
    pub fn step<O: Objective + ?Sized>(&mut self, objective: &O) -> Result<()> {
        let bounds = objective.bounds();
        let unit = self.state.ask(&mut self.rng);
        let genes: Vec<Vec<f64>> = unit
            .iter()
            .map(|u| {
                let mut g = bounds.denormalize(u.as_slice());
                bounds.clamp_in_place(&mut g);
                g
            })
            .collect();
        let evals: Vec<Evaluation> = objective.evaluate_all(&genes);
        self.log.record_generation(self.state.generation, &genes, &evals);
        let fitness: Vec<f64> = evals.iter().map(|e| e.fitness).collect();
        self.state.tell(&unit, &fitness)?;
        self.log.restarts = self.state.restarts;
        Ok(())
    }

    /// Runs to the end, calling `snapshot` every `every` generations.
    pub fn run<O: Objective + ?Sized>(
        mut self,
        objective: &O,
        every: Option<u64>,
        mut snapshot: impl FnMut(&CmaesRun) -> Result<()>,
    ) -> Result<RunLog> {
        while !self.finished() {
            self.step(objective)?;
            if let Some(k) = every.filter(|&k| k > 0) {
                if self.state.generation % k == 0 && !self.finished() {
                    snapshot(&self)?;
                }
            }
        }
        Ok(self.log)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("cma-es run serializes")
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, String> {
        serde_json::from_str(text).map_err(|e| e.to_string())
    }
}

pub fn run_cmaes<O: Objective + ?Sized>(config: &CmaesConfig, objective: &O) -> Result<RunLog> {
    CmaesRun::new(config, objective)?.run(objective, None, |_| Ok(()))
}
