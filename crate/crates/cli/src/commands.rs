use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use bridgeopt::export::{elevation_svg, geometry_csv};
use bridgeopt::harness::{
    compare as compare_sets, load_experiment, run_experiment, save_experiment, write_file, ExperimentSummary,
    LoadedExperiment, ReferenceEvaluation, RunFinal,
};
use bridgeopt::stats::{ks_two_sample, mann_whitney_u, mean, median, shapiro_wilk, std_dev};
use bridgeopt::{
    decode, Algorithm, BridgeGeometry, BridgeObjective, DesignVector, DomainTable, Error, Evaluator,
    ExperimentConfig, FitnessParams, FixedParams, MaterialConfig, ReferenceDesign, Result,
};

use crate::{ConfigArgs, ExportArgs, Format, RunArgs};

pub const CONFIG_FORMAT_VERSION: u32 = 1;

/// Contents of a `--config` file. Every field is optional.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub format_version: u32,
    pub experiment: ExperimentConfig,
    pub reference_cost: f64,
    pub domains: Option<PathBuf>,
    pub materials: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            format_version: CONFIG_FORMAT_VERSION,
            experiment: ExperimentConfig::default(),
            reference_cost: FitnessParams::default().reference_cost,
            domains: None,
            materials: None,
        }
    }
}

/// Everything a run needs, fully validated.
struct Setup {
    config: RunConfig,
    domains: DomainTable,
    materials: MaterialConfig,
    objective: BridgeObjective,
    reference: ReferenceEvaluation,
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn config_error(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// The validation shared by `run` and `validate-config`.
fn prepare(args: &ConfigArgs) -> Result<Setup> {
    let mut config = match &args.config {
        Some(path) => {
            let mut cfg: RunConfig = serde_json::from_str(&read_text(path)?).map_err(|e| Error::parse(path, e))?;
            if cfg.format_version != CONFIG_FORMAT_VERSION {
                return Err(Error::parse(path, format!("unsupported format_version {}", cfg.format_version)));
            }
            // Files named in a config are relative to the config itself.
            let base = path.parent().unwrap_or(Path::new(""));
            for p in [&mut cfg.domains, &mut cfg.materials].into_iter().flatten() {
                *p = base.join(&*p);
            }
            cfg
        }
        None => RunConfig::default(),
    };
    let exp = &mut config.experiment;
    if let Some(a) = &args.algo {
        exp.algorithm = a.parse()?;
    }
    let ga = exp.algorithm == Algorithm::Ga;
    let only = |flag: &str, set: bool, for_ga: bool| -> Result<()> {
        if set && for_ga != ga {
            let owner = if for_ga { "ga" } else { "cmaes" };
            return Err(config_error(format!("--{flag} applies to --algo {owner} only")));
        }
        Ok(())
    };
    only("pop-size", args.pop_size.is_some(), true)?;
    only("mu", args.mu.is_some(), false)?;
    only("lambda", args.lambda.is_some(), false)?;
    only("sigma0", args.sigma0.is_some(), false)?;
    only("snapshot-every", args.snapshot_every.is_some(), false)?;
    if let Some(v) = args.runs {
        exp.runs = v;
    }
    if let Some(v) = args.seed {
        exp.base_seed = v;
    }
    if let Some(v) = args.generations {
        if ga {
            exp.ga.generations = v;
        } else {
            exp.cmaes.generations = v;
        }
    }
    if let Some(v) = args.pop_size {
        exp.ga.population_size = v;
    }
    if let Some(v) = args.mu {
        exp.cmaes.mu = v;
    }
    if let Some(v) = args.lambda {
        exp.cmaes.lambda = v;
    }
    if let Some(v) = args.sigma0 {
        exp.cmaes.sigma0 = v;
    }
    if let Some(v) = args.snapshot_every {
        exp.snapshot_every = Some(v);
    }
    if let Some(v) = args.skip_first {
        exp.skip_first = v;
    }
    if let Some(v) = args.threads {
        exp.threads = Some(v);
    }
    if let Some(v) = args.cr {
        config.reference_cost = v;
    }
    if let Some(p) = &args.domains {
        config.domains = Some(p.clone());
    }
    if let Some(p) = &args.materials {
        config.materials = Some(p.clone());
    }

    let domains = match &config.domains {
        Some(p) => DomainTable::load(p)?,
        None => DomainTable::default(),
    };
    let materials = match &config.materials {
        Some(p) => MaterialConfig::load(p)?,
        None => MaterialConfig::default(),
    };
    let evaluator = Evaluator::new(domains.clone(), FixedParams::default(), materials.clone())?;
    let fitness = FitnessParams::new(config.reference_cost)?;
    config.experiment.validate(domains.bounds().dim())?;
    let reference = ReferenceDesign::footbridge().evaluate(&evaluator).unwrap_or_else(|e| {
        log::warn!("reference design cannot be evaluated ({e}); no run will count as an improvement");
        let r = ReferenceDesign::footbridge();
        ReferenceEvaluation {
            cost: f64::NAN,
            s: f64::NAN,
            published_cost: r.published_cost,
            published_s: r.published_s,
        }
    });
    Ok(Setup {
        config,
        domains,
        materials,
        objective: BridgeObjective::new(evaluator, fitness),
        reference,
    })
}

pub fn validate_config(args: &ConfigArgs) -> Result<()> {
    let s = prepare(args)?;
    let exp = &s.config.experiment;
    println!(
        "ok: {} x {} runs, {} evaluations per run, seeds {}..={}",
        exp.algorithm.label(),
        exp.runs,
        exp.evaluations_per_run(),
        bridgeopt::harness::seed_for(exp.base_seed, 0),
        bridgeopt::harness::seed_for(exp.base_seed, exp.runs - 1)
    );
    Ok(())
}

pub fn run(args: &RunArgs) -> Result<()> {
    let mut s = prepare(&args.config)?;
    s.config.experiment.resume = args.resume;
    let out = &args.out;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let exp = &s.config.experiment;
    let logs = run_experiment(exp, &s.objective, Some(out))?;
    let summary = ExperimentSummary::new(exp, &logs, s.reference);
    save_experiment(out, exp, &logs, &summary)?;

    let mut resolved = s.config.clone();
    resolved.experiment.resume = false;
    resolved.domains = Some(PathBuf::from("domains.json"));
    resolved.materials = Some(PathBuf::from("materials.json"));
    let text = serde_json::to_string_pretty(&resolved).expect("config serializes");
    write_file(&out.join("config.json"), text.as_bytes())?;
    write_file(&out.join("domains.json"), s.domains.to_json().as_bytes())?;
    write_file(&out.join("materials.json"), s.materials.to_json().as_bytes())?;
    let report = summary.report();
    write_file(&out.join("summary.txt"), report.as_bytes())?;
    print!("{report}");
    Ok(())
}

pub fn compare(a: &Path, b: &Path, json: Option<&Path>) -> Result<()> {
    let (la, lb) = (load_experiment(a)?, load_experiment(b)?);
    let reference = la.summary.reference;
    let same = |x: f64, y: f64| x == y || (x.is_nan() && y.is_nan());
    if !(same(reference.cost, lb.summary.reference.cost) && same(reference.s, lb.summary.reference.s)) {
        return Err(config_error(format!(
            "{} and {} were evaluated against different references (C = {} vs {})",
            a.display(),
            b.display(),
            reference.cost,
            lb.summary.reference.cost
        )));
    }
    let c = compare_sets(&la, &lb, reference)?;
    print!("{}", c.report());
    if let Some(path) = json {
        let text = serde_json::to_string_pretty(&c).expect("comparison serializes");
        write_file(path, text.as_bytes())?;
    }
    Ok(())
}

const METRICS: [(&str, fn(&RunFinal) -> f64); 3] = [("fitness", |f| f.fitness), ("cost", |f| f.cost), ("s", |f| f.s)];

fn column(e: &LoadedExperiment, f: fn(&RunFinal) -> f64) -> Vec<f64> {
    e.finals.iter().map(f).collect()
}

pub fn stats(dirs: &[PathBuf]) -> Result<()> {
    let sets: Vec<LoadedExperiment> = dirs.iter().map(|d| load_experiment(d)).collect::<Result<_>>()?;
    let mut o = String::new();
    for (e, dir) in sets.iter().zip(dirs) {
        let _ = writeln!(o, "{} ({}, {} runs)", dir.display(), e.summary.algorithm.label(), e.finals.len());
        let _ = writeln!(
            o,
            "{:<8} {:>14} {:>14} {:>14} {:>10} {:>10}",
            "metric", "mean", "std", "median", "SW W", "SW p"
        );
        for (name, f) in METRICS {
            let x = column(e, f);
            let sw = match shapiro_wilk(&x) {
                Ok(t) => format!("{:>10.4} {:>10.3e}", t.w, t.p_value),
                Err(_) => format!("{:>10} {:>10}", "n/a", "n/a"),
            };
            let _ = writeln!(
                o,
                "{:<8} {:>14.6} {:>14.6} {:>14.6} {sw}",
                name,
                mean(&x),
                std_dev(&x),
                median(&x)
            );
        }
        let _ = writeln!(o);
    }
    if let [a, b] = sets.as_slice() {
        let _ = writeln!(o, "A = {}, B = {}", dirs[0].display(), dirs[1].display());
        let _ = writeln!(
            o,
            "{:<8} {:>10} {:>12} {:>10} {:>8} {:>12}",
            "metric", "U", "MWU p", "effect", "KS D", "KS p"
        );
        for (name, f) in METRICS {
            let (x, y) = (column(a, f), column(b, f));
            let mw = mann_whitney_u(&x, &y)?;
            let ks = ks_two_sample(&x, &y)?;
            let _ = writeln!(
                o,
                "{:<8} {:>10} {:>12.4e} {:>10.3} {:>8.3} {:>12.4e}",
                name, mw.u, mw.p_value, mw.effect_size, ks.statistic, ks.p_value
            );
        }
    }
    print!("{o}");
    Ok(())
}

/// Reads a genome from a JSON array or an object with a `genes` array.
fn read_genome(path: &Path) -> Result<Vec<f64>> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Genome {
        Plain(Vec<f64>),
        Wrapped { genes: Vec<f64> },
    }
    let g: Genome = serde_json::from_str(&read_text(path)?).map_err(|e| Error::parse(path, e))?;
    Ok(match g {
        Genome::Plain(v) | Genome::Wrapped { genes: v } => v,
    })
}

pub fn export_geometry(args: &ExportArgs) -> Result<()> {
    let domains = match &args.domains {
        Some(p) => DomainTable::load(p)?,
        None => DomainTable::default(),
    };
    let fixed = FixedParams::default();
    let geometry = |genes: &[f64]| -> Result<BridgeGeometry> {
        decode(&DesignVector::from_slice(genes)?, &domains, &fixed)
    };
    let mut designs: Vec<(String, BridgeGeometry)> = Vec::new();
    if args.reference {
        designs.push(("reference".into(), geometry(&ReferenceDesign::footbridge().genes)?));
    }
    for path in &args.genomes {
        let label = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let genes = read_genome(path)?;
        let g = geometry(&genes).map_err(|e| match e {
            Error::InvalidGenome(msg) => Error::InvalidGenome(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        designs.push((label, g));
    }
    let text = match args.format {
        Format::Svg => {
            if designs.is_empty() {
                return Err(config_error("nothing to draw: give genome files or --reference"));
            }
            let refs: Vec<(&str, &BridgeGeometry)> = designs.iter().map(|(l, g)| (l.as_str(), g)).collect();
            elevation_svg(&refs)
        }
        Format::Csv => match designs.as_slice() {
            [(_, g)] => geometry_csv(g),
            _ => return Err(config_error("CSV export takes exactly one design")),
        },
    };
    write_file(&args.out, text.as_bytes())
}
