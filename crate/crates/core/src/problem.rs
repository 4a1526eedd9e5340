//! Objectives the optimisers maximise: the bridge problem and a couple of
//! classic test functions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{Bounds, DesignVector};
use crate::evaluator::Evaluator;
use crate::fitness::{fitness, FitnessParams};

/// What an optimiser sees of one candidate. For test functions `cost` holds
/// the function value and `s` is zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub fitness: f64,
    pub cost: f64,
    pub s: f64,
}

pub trait Objective: Sync {
    fn bounds(&self) -> &Bounds;

    /// Must be pure: the same input always gives the same output.
    fn evaluate(&self, x: &[f64]) -> Evaluation;

    /// Evaluates a batch, possibly in parallel, preserving order.
    fn evaluate_all(&self, xs: &[Vec<f64>]) -> Vec<Evaluation> {
        xs.par_iter().map(|x| self.evaluate(x)).collect()
    }
}

#[derive(Clone, Debug, Default)]
pub struct BridgeObjective {
    pub evaluator: Evaluator,
    pub fitness: FitnessParams,
}

impl BridgeObjective {
    pub fn new(evaluator: Evaluator, fitness: FitnessParams) -> Self {
        Self { evaluator, fitness }
    }
}

impl Objective for BridgeObjective {
    fn bounds(&self) -> &Bounds {
        self.evaluator.domains.bounds()
    }

    /// Invalid inputs and fitness domain errors score 0, below every regime.
    fn evaluate(&self, x: &[f64]) -> Evaluation {
        let result = DesignVector::from_slice(x).and_then(|v| self.evaluator.evaluate(&v));
        match result {
            Ok(r) => Evaluation {
                fitness: fitness(r.cost, r.s_max, &self.fitness).unwrap_or(0.0),
                cost: r.cost,
                s: r.s_max,
            },
            Err(e) => {
                log::warn!("evaluation failed: {e}");
                Evaluation {
                    fitness: 0.0,
                    cost: f64::INFINITY,
                    s: f64::INFINITY,
                }
            }
        }
    }
}

fn minimised(f: f64) -> Evaluation {
    Evaluation {
        fitness: -f,
        cost: f,
        s: 0.0,
    }
}

/// `sum (x_i - c)^2` over a box.
#[derive(Clone, Debug)]
pub struct Sphere {
    pub bounds: Bounds,
    pub centre: f64,
}

impl Objective for Sphere {
    fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    fn evaluate(&self, x: &[f64]) -> Evaluation {
        minimised(x.iter().map(|v| (v - self.centre).powi(2)).sum())
    }
}

/// Rosenbrock's function, minimum 0 at all ones.
#[derive(Clone, Debug)]
pub struct Rosenbrock {
    pub bounds: Bounds,
}

impl Objective for Rosenbrock {
    fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    fn evaluate(&self, x: &[f64]) -> Evaluation {
        let f = x
            .windows(2)
            .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
            .sum();
        minimised(f)
    }
}
