//! Seeded multi-run experiments, their on-disk layout, summaries and the
//! pairwise comparison of two run sets.
//!
//! Layout of one experiment directory:
//!
//! ```text
//! <out>/runs/<algo>/<seed>.csv   per-generation best-so-far
//! <out>/best/<seed>.json         final best genome
//! <out>/summary.json
//! <out>/plot/convergence.csv     mean of the per-run series
//! <out>/plot/finals.csv          final values, one row per run
//! <out>/snapshots/<seed>.json    CMA-ES state, when enabled
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cmaes::{CmaesConfig, CmaesRun};
use crate::domain::DesignVector;
use crate::error::{Error, Result};
use crate::evaluator::Evaluator;
use crate::ga::{run_ga, GaConfig};
use crate::problem::Objective;
use crate::runlog::{json_f64, read_records, Algorithm, BestIndividual, GenerationRecord, RunLog};
use crate::stats::{mann_whitney_u, mean, std_dev, MannWhitney};

pub const SUMMARY_FORMAT_VERSION: u32 = 1;

/// Seed of run `i` in an experiment with base seed `base`.
pub fn seed_for(base: u64, i: usize) -> u64 {
    base * 1000 + i as u64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub runs: usize,
    pub base_seed: u64,
    /// Per-run settings; the `seed` fields are replaced by [`seed_for`].
    pub ga: GaConfig,
    pub cmaes: CmaesConfig,
    /// Worker threads; `None` uses the available parallelism.
    pub threads: Option<usize>,
    pub snapshot_every: Option<u64>,
    /// Continue CMA-ES runs from snapshots found in the output directory.
    pub resume: bool,
    /// Generations left out of the convergence plot data.
    pub skip_first: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Cmaes,
            runs: 30,
            base_seed: 0,
            ga: GaConfig::default(),
            cmaes: CmaesConfig::default(),
            threads: None,
            snapshot_every: None,
            resume: false,
            skip_first: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.runs == 0 || self.runs > 1000 {
            return Err(Error::Config(format!("runs must be in 1..=1000, got {}", self.runs)));
        }
        if self.base_seed > u64::MAX / 1000 - 1 {
            return Err(Error::Config(format!("base seed {} too large", self.base_seed)));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be >= 1".into()));
        }
        if self.snapshot_every == Some(0) {
            return Err(Error::Config("snapshot-every must be >= 1".into()));
        }
        match self.algorithm {
            Algorithm::Ga => self.ga.validate(),
            Algorithm::Cmaes => self.cmaes.validate(dim),
        }
    }

    pub fn evaluations_per_run(&self) -> u64 {
        match self.algorithm {
            Algorithm::Ga => self.ga.evaluations(),
            Algorithm::Cmaes => self.cmaes.evaluations(),
        }
    }

    pub fn generations(&self) -> u64 {
        match self.algorithm {
            Algorithm::Ga => self.ga.generations,
            Algorithm::Cmaes => self.cmaes.generations,
        }
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.runs).map(|i| seed_for(self.base_seed, i)).collect()
    }
}

fn snapshot_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join("snapshots").join(format!("{seed}.json"))
}

/// Writes a file, creating its parent directories.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn run_one<O: Objective + ?Sized>(cfg: &ExperimentConfig, seed: u64, objective: &O, dir: Option<&Path>) -> Result<RunLog> {
    match cfg.algorithm {
        Algorithm::Ga => run_ga(&GaConfig { seed, ..cfg.ga.clone() }, objective),
        Algorithm::Cmaes => {
            let config = CmaesConfig { seed, ..cfg.cmaes.clone() };
            let mut run = CmaesRun::new(&config, objective)?;
            if let (true, Some(dir)) = (cfg.resume, dir) {
                let path = snapshot_path(dir, seed);
                if path.exists() {
                    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                    let saved = CmaesRun::from_json(&text).map_err(|r| Error::parse(&path, r))?;
                    if saved.config != config {
                        return Err(Error::Config(format!(
                            "snapshot {} was taken with a different configuration",
                            path.display()
                        )));
                    }
                    log::info!("resuming seed {seed} at generation {}", saved.state.generation);
                    run = saved;
                }
            }
            let every = cfg.snapshot_every.filter(|_| dir.is_some());
            run.run(objective, every, |r| match dir {
                Some(dir) => write_file(&snapshot_path(dir, seed), r.to_json().as_bytes()),
                None => Ok(()),
            })
        }
    }
}

/// Runs every seed of an experiment, in parallel over runs. Results do not
/// depend on the thread count. `dir` is only used for CMA-ES snapshots.
pub fn run_experiment<O: Objective + ?Sized>(
    cfg: &ExperimentConfig,
    objective: &O,
    dir: Option<&Path>,
) -> Result<Vec<RunLog>> {
    cfg.validate(objective.bounds().dim())?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cfg.threads {
        builder = builder.num_threads(t.min(cfg.runs));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let seeds = cfg.seeds();
    pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| {
                let log = run_one(cfg, seed, objective, dir)?;
                log::info!(
                    "{} seed {seed}: fitness {} cost {} s {}",
                    cfg.algorithm,
                    log.best.fitness,
                    log.best.cost,
                    log.best.s
                );
                Ok(log)
            })
            .collect()
    })
}

/// A fixed design used as the baseline for improvement rates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceDesign {
    pub genes: Vec<f64>,
    /// Published baseline values, kept for side-by-side reporting only.
    pub published_cost: f64,
    pub published_s: f64,
}

impl ReferenceDesign {
    /// A 40 000-evaluation GA design (seed 5), rounded to four significant
    /// digits. Feasible under the built-in domains and materials.
    pub fn footbridge() -> Self {
        Self {
            genes: vec![
                6.33, 0.9607, 1.294, 0.7142, 0.7629, 1.709, 0.6157, 0.5605, 0.5614, 0.3229, 37.02, 1.271, 0.1691,
                0.3702, 30.0, 1.275, 1.384, 4.583, 0.6481, 6.731, 1.988, 5.474,
            ],
            published_cost: 91.354,
            published_s: 0.9962,
        }
    }

    pub fn evaluate(&self, evaluator: &Evaluator) -> Result<ReferenceEvaluation> {
        let r = evaluator.evaluate(&DesignVector::from_slice(&self.genes)?)?;
        Ok(ReferenceEvaluation {
            cost: r.cost,
            s: r.s_max,
            published_cost: self.published_cost,
            published_s: self.published_s,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceEvaluation {
    #[serde(with = "json_f64")]
    pub cost: f64,
    #[serde(with = "json_f64")]
    pub s: f64,
    pub published_cost: f64,
    pub published_s: f64,
}

/// Final best-so-far values of one run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunFinal {
    pub seed: u64,
    #[serde(with = "json_f64")]
    pub fitness: f64,
    #[serde(with = "json_f64")]
    pub cost: f64,
    #[serde(with = "json_f64")]
    pub s: f64,
}

impl RunFinal {
    pub fn from_log(log: &RunLog) -> Self {
        Self {
            seed: log.seed,
            fitness: log.best.fitness,
            cost: log.best.cost,
            s: log.best.s,
        }
    }

    pub fn from_record(seed: u64, r: &GenerationRecord) -> Self {
        Self {
            seed,
            fitness: r.best_fitness,
            cost: r.best_cost,
            s: r.best_s,
        }
    }
}

/// Fraction of runs whose final best is cheaper than the reference and
/// satisfies every constraint.
pub fn improvement_rate(finals: &[RunFinal], reference_cost: f64) -> (usize, f64) {
    let hits = finals
        .iter()
        .filter(|f| f.cost < reference_cost && f.s <= 1.0)
        .count();
    (hits, hits as f64 / finals.len().max(1) as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    #[serde(with = "json_f64")]
    pub mean: f64,
    #[serde(with = "json_f64")]
    pub std: f64,
}

impl MeanStd {
    pub fn of(x: &[f64]) -> Self {
        Self {
            mean: mean(x),
            std: std_dev(x),
        }
    }
}

impl std::fmt::Display for MeanStd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.3} (± {:.3})", self.mean, self.std)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub format_version: u32,
    pub algorithm: Algorithm,
    pub runs: usize,
    pub base_seed: u64,
    pub evaluations_per_run: u64,
    pub generations: u64,
    pub fitness: MeanStd,
    pub cost: MeanStd,
    pub s: MeanStd,
    pub improved_runs: usize,
    pub improvement_rate: f64,
    pub reference: ReferenceEvaluation,
    pub restarts: u32,
    pub finals: Vec<RunFinal>,
}

impl ExperimentSummary {
    pub fn new(cfg: &ExperimentConfig, logs: &[RunLog], reference: ReferenceEvaluation) -> Self {
        let finals: Vec<RunFinal> = logs.iter().map(RunFinal::from_log).collect();
        summarize(cfg.algorithm, cfg.base_seed, cfg.evaluations_per_run(), cfg.generations(), &finals, reference)
            .with_restarts(logs.iter().map(|l| l.restarts).sum())
    }

    /// Plain-text table of the final values.
    pub fn report(&self) -> String {
        let mut o = String::new();
        let _ = writeln!(
            o,
            "{}: {} runs x {} evaluations (base seed {})",
            self.algorithm.label(),
            self.runs,
            self.evaluations_per_run,
            self.base_seed
        );
        let _ = writeln!(o, "{:>8} {:>14} {:>12} {:>10}", "seed", "fitness", "C(x)", "S(x)");
        for f in &self.finals {
            let _ = writeln!(o, "{:>8} {:>14.6} {:>12.3} {:>10.4}", f.seed, f.fitness, f.cost, f.s);
        }
        let _ = writeln!(o, "fitness {}", self.fitness);
        let _ = writeln!(o, "C(x)    {}", self.cost);
        let _ = writeln!(o, "S(x)    {}", self.s);
        let _ = writeln!(
            o,
            "improved on the reference (C = {:.3}, S = {:.4}): {}/{}",
            self.reference.cost, self.reference.s, self.improved_runs, self.runs
        );
        if self.restarts > 0 {
            let _ = writeln!(o, "covariance restarts: {}", self.restarts);
        }
        o
    }

    fn with_restarts(mut self, restarts: u32) -> Self {
        self.restarts = restarts;
        self
    }
}

fn column(finals: &[RunFinal], f: impl Fn(&RunFinal) -> f64) -> Vec<f64> {
    finals.iter().map(f).collect()
}

fn summarize(
    algorithm: Algorithm,
    base_seed: u64,
    evaluations_per_run: u64,
    generations: u64,
    finals: &[RunFinal],
    reference: ReferenceEvaluation,
) -> ExperimentSummary {
    let (improved_runs, improvement_rate) = improvement_rate(finals, reference.cost);
    ExperimentSummary {
        format_version: SUMMARY_FORMAT_VERSION,
        algorithm,
        runs: finals.len(),
        base_seed,
        evaluations_per_run,
        generations,
        fitness: MeanStd::of(&column(finals, |f| f.fitness)),
        cost: MeanStd::of(&column(finals, |f| f.cost)),
        s: MeanStd::of(&column(finals, |f| f.s)),
        improved_runs,
        improvement_rate,
        reference,
        restarts: 0,
        finals: finals.to_vec(),
    }
}

/// Per-generation mean over runs of the best-so-far series, from generation
/// `skip_first` on.
pub fn convergence_csv(logs: &[RunLog], skip_first: u64) -> String {
    let mut out = String::from("generation,evals_used,mean_best_fitness,mean_best_cost,mean_best_s\n");
    let Some(first) = logs.first() else {
        return out;
    };
    for (k, r) in first.records.iter().enumerate() {
        if r.generation < skip_first {
            continue;
        }
        let at = |f: fn(&GenerationRecord) -> f64| mean(&logs.iter().map(|l| f(&l.records[k])).collect::<Vec<_>>());
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.generation,
            r.evals_used,
            at(|r| r.best_fitness),
            at(|r| r.best_cost),
            at(|r| r.best_s)
        );
    }
    out
}

pub fn finals_csv(finals: &[RunFinal]) -> String {
    let mut out = String::from("seed,fitness,cost,s\n");
    for f in finals {
        let _ = writeln!(out, "{},{},{},{}", f.seed, f.fitness, f.cost, f.s);
    }
    out
}

/// Writes every artifact of a finished experiment.
pub fn save_experiment(dir: &Path, cfg: &ExperimentConfig, logs: &[RunLog], summary: &ExperimentSummary) -> Result<()> {
    let runs = dir.join("runs").join(cfg.algorithm.name());
    std::fs::create_dir_all(&runs).map_err(|e| Error::io(&runs, e))?;
    for log in logs {
        log.save_csv(&runs.join(format!("{}.csv", log.seed)))?;
        let best = serde_json::to_string_pretty(&BestFile::new(log)).expect("best individual serializes");
        write_file(&dir.join("best").join(format!("{}.json", log.seed)), best.as_bytes())?;
    }
    let text = serde_json::to_string_pretty(summary).expect("summary serializes");
    write_file(&dir.join("summary.json"), text.as_bytes())?;
    write_file(
        &dir.join("plot").join("convergence.csv"),
        convergence_csv(logs, cfg.skip_first).as_bytes(),
    )?;
    write_file(&dir.join("plot").join("finals.csv"), finals_csv(&summary.finals).as_bytes())
}

/// Contents of `best/<seed>.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestFile {
    pub format_version: u32,
    pub algorithm: Algorithm,
    pub seed: u64,
    #[serde(flatten)]
    pub best: BestIndividual,
}

impl BestFile {
    pub fn new(log: &RunLog) -> Self {
        Self {
            format_version: SUMMARY_FORMAT_VERSION,
            algorithm: log.algorithm,
            seed: log.seed,
            best: log.best.clone(),
        }
    }
}

/// One experiment directory read back from disk, with finals recomputed
/// from the run CSVs.
#[derive(Clone, Debug)]
pub struct LoadedExperiment {
    pub dir: PathBuf,
    pub summary: ExperimentSummary,
    pub finals: Vec<RunFinal>,
    pub best: Vec<BestIndividual>,
}

pub fn load_experiment(dir: &Path) -> Result<LoadedExperiment> {
    let path = dir.join("summary.json");
    let text = std::fs::read_to_string(&path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::IncompleteData {
            path: path.clone(),
            reason: "missing summary.json".into(),
        },
        _ => Error::io(&path, e),
    })?;
    let summary: ExperimentSummary =
        serde_json::from_str(&text).map_err(|e| Error::IncompleteData { path: path.clone(), reason: e.to_string() })?;
    if summary.format_version != SUMMARY_FORMAT_VERSION {
        return Err(Error::parse(&path, format!("unsupported format_version {}", summary.format_version)));
    }
    let mut finals = Vec::with_capacity(summary.finals.len());
    let mut best = Vec::with_capacity(summary.finals.len());
    for f in &summary.finals {
        let csv = dir.join("runs").join(summary.algorithm.name()).join(format!("{}.csv", f.seed));
        if !csv.exists() {
            return Err(Error::IncompleteData {
                path: csv,
                reason: "run log missing".into(),
            });
        }
        let records = read_records(&csv)?;
        let last = records.last().expect("read_records rejects empty logs");
        if last.evals_used != summary.evaluations_per_run || records.len() as u64 != summary.generations {
            return Err(Error::IncompleteData {
                path: csv,
                reason: format!(
                    "{} generations / {} evaluations, expected {} / {}",
                    records.len(),
                    last.evals_used,
                    summary.generations,
                    summary.evaluations_per_run
                ),
            });
        }
        finals.push(RunFinal::from_record(f.seed, last));
        let bpath = dir.join("best").join(format!("{}.json", f.seed));
        let btext = std::fs::read_to_string(&bpath).map_err(|_| Error::IncompleteData {
            path: bpath.clone(),
            reason: "best genome missing".into(),
        })?;
        let file: BestFile = serde_json::from_str(&btext).map_err(|e| Error::IncompleteData {
            path: bpath.clone(),
            reason: e.to_string(),
        })?;
        best.push(file.best);
    }
    Ok(LoadedExperiment {
        dir: dir.to_path_buf(),
        summary,
        finals,
        best,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricTest {
    pub metric: String,
    pub test: MannWhitney,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestComparison {
    pub label: String,
    #[serde(with = "json_f64")]
    pub cost: f64,
    #[serde(with = "json_f64")]
    pub s: f64,
    /// Reference minus this best.
    #[serde(with = "json_f64")]
    pub cost_diff: f64,
    #[serde(with = "json_f64")]
    pub s_diff: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub reference: ReferenceEvaluation,
    pub best: [BestComparison; 2],
    /// `best_a - best_b` for cost and s.
    pub best_a_minus_b: [f64; 2],
    pub tests: Vec<MetricTest>,
    pub summaries: [ExperimentSummary; 2],
}

fn best_run(finals: &[RunFinal]) -> RunFinal {
    *finals
        .iter()
        .reduce(|a, b| if b.fitness > a.fitness { b } else { a })
        .expect("experiments have at least one run")
}

/// Compares two run sets: best designs against the reference, Mann-Whitney
/// on the final fitness, cost and s (first set as sample `a`) and per-set
/// means and improvement rates, all recomputed from the run CSVs.
pub fn compare(a: &LoadedExperiment, b: &LoadedExperiment, reference: ReferenceEvaluation) -> Result<Comparison> {
    let label = |e: &LoadedExperiment| {
        let l = e.summary.algorithm.label().to_string();
        match e.dir.file_name() {
            Some(n) => format!("{l} ({})", n.to_string_lossy()),
            None => l,
        }
    };
    let best = |e: &LoadedExperiment| {
        let r = best_run(&e.finals);
        BestComparison {
            label: label(e),
            cost: r.cost,
            s: r.s,
            cost_diff: reference.cost - r.cost,
            s_diff: reference.s - r.s,
        }
    };
    let (ba, bb) = (best(a), best(b));
    let metrics: [(&str, fn(&RunFinal) -> f64); 3] = [("fitness", |f| f.fitness), ("cost", |f| f.cost), ("s", |f| f.s)];
    let mut tests = Vec::new();
    for (name, f) in metrics {
        tests.push(MetricTest {
            metric: name.into(),
            test: mann_whitney_u(&column(&a.finals, f), &column(&b.finals, f))?,
        });
    }
    let resum = |e: &LoadedExperiment| {
        summarize(
            e.summary.algorithm,
            e.summary.base_seed,
            e.summary.evaluations_per_run,
            e.summary.generations,
            &e.finals,
            reference,
        )
        .with_restarts(e.summary.restarts)
    };
    Ok(Comparison {
        reference,
        best_a_minus_b: [ba.cost - bb.cost, ba.s - bb.s],
        best: [ba, bb],
        tests,
        summaries: [resum(a), resum(b)],
    })
}

impl Comparison {
    /// Plain-text report with the three tables.
    pub fn report(&self) -> String {
        let mut o = String::new();
        let r = &self.reference;
        let [a, b] = &self.best;
        let _ = writeln!(o, "Best solutions (diff = reference - best)");
        let _ = writeln!(
            o,
            "{:<6} {:>12} {:>12} {:>12} {:>12} {:>12} {:>12}",
            "", "reference", "diff(ref,A)", "best A", "diff(ref,B)", "best B", "A - B"
        );
        let _ = writeln!(
            o,
            "{:<6} {:>12.3} {:>12.3} {:>12.3} {:>12.3} {:>12.3} {:>12.3}",
            "C(x)", r.cost, a.cost_diff, a.cost, b.cost_diff, b.cost, self.best_a_minus_b[0]
        );
        let _ = writeln!(
            o,
            "{:<6} {:>12.4} {:>12.4} {:>12.4} {:>12.4} {:>12.4} {:>12.4}",
            "S(x)", r.s, a.s_diff, a.s, b.s_diff, b.s, self.best_a_minus_b[1]
        );
        let _ = writeln!(o, "A = {}, B = {}", a.label, b.label);
        let _ = writeln!(
            o,
            "published baseline: C = {} kEUR, S = {}",
            r.published_cost, r.published_s
        );
        let _ = writeln!(o);
        let _ = writeln!(o, "Mann-Whitney U (A as first sample)");
        let _ = writeln!(o, "{:<8} {:>10} {:>12} {:>12}", "metric", "U", "p", "effect");
        for t in &self.tests {
            let _ = writeln!(
                o,
                "{:<8} {:>10} {:>12.4e} {:>12.3}",
                t.metric, t.test.u, t.test.p_value, t.test.effect_size
            );
        }
        let _ = writeln!(o);
        let _ = writeln!(o, "Final values over runs, mean (± std)");
        let _ = writeln!(
            o,
            "{:<22} {:>20} {:>22} {:>20} {:>12}",
            "", "fitness", "C(x)", "S(x)", "improvement"
        );
        for (s, best) in self.summaries.iter().zip(&self.best) {
            let _ = writeln!(
                o,
                "{:<22} {:>20} {:>22} {:>20} {:>12}",
                best.label,
                s.fitness.to_string(),
                s.cost.to_string(),
                s.s.to_string(),
                format!("{}/{}", s.improved_runs, s.runs)
            );
        }
        o
    }
}
