//! Cable-stayed footbridge design optimisation: a 22-gene design space, a
//! planar surrogate structural evaluator, a three-regime fitness, a
//! generational GA and CMA-ES, and a seeded experiment harness with
//! Mann-Whitney comparison.

pub mod domain;
pub mod error;
pub mod evaluator;
pub mod export;
pub mod fe;
pub mod fitness;
pub mod ga;
pub mod cmaes;
pub mod problem;
pub mod runlog;
pub mod stats;
pub mod geometry;
pub mod harness;
pub mod materials;

pub use domain::{Bounds, DesignVector, DomainTable, GeneKind, GENE_COUNT};
pub use error::{Error, Result};
pub use evaluator::{ConstraintRatios, CostBreakdown, EvaluationResult, Evaluator};
pub use geometry::{decode, BridgeGeometry, FixedParams};
pub use fitness::{fitness, FitnessParams};
pub use materials::MaterialConfig;
pub use problem::{BridgeObjective, Evaluation, Objective};
pub use runlog::{Algorithm, RunLog};
pub use harness::{ExperimentConfig, ReferenceDesign};
