//! Per-run convergence log and its CSV / JSON on-disk forms.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::Evaluation;

pub const RUNLOG_FORMAT_VERSION: u32 = 1;
const CSV_HEADER: [&str; 5] = ["generation", "evals_used", "best_fitness", "best_cost", "best_s"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Ga,
    Cmaes,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Ga => "ga",
            Algorithm::Cmaes => "cmaes",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Algorithm::Ga => "GA",
            Algorithm::Cmaes => "CMA-ES",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ga" => Ok(Algorithm::Ga),
            "cmaes" | "cma-es" => Ok(Algorithm::Cmaes),
            other => Err(Error::Config(format!("unknown algorithm {other:?} (ga, cmaes)"))),
        }
    }
}

/// Best-so-far state after one generation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: u64,
    pub evals_used: u64,
    #[serde(with = "json_f64")]
    pub best_fitness: f64,
    #[serde(with = "json_f64")]
    pub best_cost: f64,
    #[serde(with = "json_f64")]
    pub best_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestIndividual {
    pub genes: Vec<f64>,
    #[serde(with = "json_f64")]
    pub fitness: f64,
    #[serde(with = "json_f64")]
    pub cost: f64,
    #[serde(with = "json_f64")]
    pub s: f64,
}

impl BestIndividual {
    pub fn new(genes: &[f64], e: Evaluation) -> Self {
        Self {
            genes: genes.to_vec(),
            fitness: e.fitness,
            cost: e.cost,
            s: e.s,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub records: Vec<GenerationRecord>,
    pub best: BestIndividual,
    pub evaluations: u64,
    /// Covariance restarts (CMA-ES only).
    pub restarts: u32,
}

impl RunLog {
    /// Tracks the best-so-far individual and appends one record per
    /// generation.
    pub(crate) fn start(algorithm: Algorithm, seed: u64) -> Self {
        Self {
            algorithm,
            seed,
            records: Vec::new(),
            best: BestIndividual {
                genes: Vec::new(),
                fitness: f64::NEG_INFINITY,
                cost: f64::INFINITY,
                s: f64::INFINITY,
            },
            evaluations: 0,
            restarts: 0,
        }
    }

    /// Folds a generation into the archive; earlier individuals win ties.
    pub(crate) fn record_generation(&mut self, generation: u64, xs: &[Vec<f64>], evals: &[Evaluation]) {
        self.evaluations += evals.len() as u64;
        for (x, e) in xs.iter().zip(evals) {
            if e.fitness > self.best.fitness || self.best.genes.is_empty() {
                self.best = BestIndividual::new(x, *e);
            }
        }
        self.records.push(GenerationRecord {
            generation,
            evals_used: self.evaluations,
            best_fitness: self.best.fitness,
            best_cost: self.best.cost,
            best_s: self.best.s,
        });
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# format_version: {RUNLOG_FORMAT_VERSION}")?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        for r in &self.records {
            w.write_record([
                r.generation.to_string(),
                r.evals_used.to_string(),
                r.best_fitness.to_string(),
                r.best_cost.to_string(),
                r.best_s.to_string(),
            ])?;
        }
        w.flush()
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).map_err(|e| Error::io(path, e))?;
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }
}

/// Reads the records of a RunLog CSV. Fails with `IncompleteData` when the
/// version line or header is missing or a row is truncated.
pub fn read_records(path: &Path) -> Result<Vec<GenerationRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_records(&text).map_err(|reason| Error::IncompleteData {
        path: path.to_path_buf(),
        reason,
    })
}

pub fn parse_records(text: &str) -> std::result::Result<Vec<GenerationRecord>, String> {
    let (first, body) = text.split_once('\n').ok_or("missing format_version line")?;
    let version = first
        .strip_prefix("# format_version:")
        .ok_or("missing format_version line")?
        .trim();
    if version != RUNLOG_FORMAT_VERSION.to_string() {
        return Err(format!("unsupported format_version {version}"));
    }
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    let header = rdr.headers().map_err(|e| e.to_string())?;
    if header.iter().ne(CSV_HEADER) {
        return Err(format!("unexpected header {header:?}"));
    }
    let mut out = Vec::new();
    for (line, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| format!("row {}: {e}", line + 1))?;
        let field = |i: usize| row.get(i).ok_or_else(|| format!("row {}: missing column {i}", line + 1));
        let num = |i: usize| -> std::result::Result<f64, String> {
            field(i)?
                .parse()
                .map_err(|e| format!("row {}: column {}: {e}", line + 1, CSV_HEADER[i]))
        };
        let int = |i: usize| -> std::result::Result<u64, String> {
            field(i)?
                .parse()
                .map_err(|e| format!("row {}: column {}: {e}", line + 1, CSV_HEADER[i]))
        };
        out.push(GenerationRecord {
            generation: int(0)?,
            evals_used: int(1)?,
            best_fitness: num(2)?,
            best_cost: num(3)?,
            best_s: num(4)?,
        });
    }
    if out.is_empty() {
        return Err("no records".into());
    }
    Ok(out)
}

/// Serde adapter writing non-finite floats as the strings `"inf"`, `"-inf"`
/// and `"NaN"`, which plain JSON numbers cannot hold.
pub mod json_f64 {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(&v.to_string())
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => t.parse().map_err(de::Error::custom),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RunLog {
        let mut log = RunLog::start(Algorithm::Ga, 7);
        let xs = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        let evals = [
            Evaluation { fitness: 0.5, cost: 300.0, s: 0.1 },
            Evaluation { fitness: 1.25, cost: 120.0, s: 4.0 },
        ];
        log.record_generation(0, &xs, &evals);
        let evals2 = [
            Evaluation { fitness: 1.0 / 3.0, cost: 450.0, s: 0.2 },
            Evaluation { fitness: 1.25, cost: 119.0, s: 4.0 },
        ];
        log.record_generation(1, &xs, &evals2);
        log
    }

    #[test]
    fn archive_keeps_first_of_ties() {
        let log = sample();
        assert_eq!(log.evaluations, 4);
        assert_eq!(log.best.cost, 120.0);
        assert_eq!(log.records[1].evals_used, 4);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let log = sample();
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# format_version: 1\ngeneration,evals_used,best_fitness,best_cost,best_s\n"));
        assert_eq!(parse_records(&text).unwrap(), log.records);
    }

    #[test]
    fn truncated_csv_is_incomplete() {
        let log = sample();
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let cut = &text[..text.len() - 8];
        assert!(parse_records(cut).is_err());
        assert!(parse_records("generation,evals_used\n").is_err());
        assert!(parse_records("# format_version: 1\n").is_err());
    }

    #[test]
    fn non_finite_survives_json() {
        let b = BestIndividual { genes: vec![1.5], fitness: 1.0, cost: 80.0, s: f64::INFINITY };
        let text = serde_json::to_string(&b).unwrap();
        assert!(text.contains("\"inf\""));
        assert_eq!(serde_json::from_str::<BestIndividual>(&text).unwrap(), b);
    }

    #[test]
    fn algorithm_names() {
        assert_eq!("CMA-ES".parse::<Algorithm>().unwrap(), Algorithm::Cmaes);
        assert_eq!("ga".parse::<Algorithm>().unwrap(), Algorithm::Ga);
        assert!("pso".parse::<Algorithm>().is_err());
    }
}
