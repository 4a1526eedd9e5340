//! Three-regime fitness, to be maximised.
//!
//! With reference cost `c_r`:
//!
//! * `cost >= c_r`: `c_r / cost` (at most 1);
//! * `cost < c_r`, `s > 1`: `1 + 1/s` (between 1 and 2);
//! * `cost < c_r`, `s <= 1`: `2 - (1 - s) + c_r / cost` (above 2).
//!
//! A cost exactly equal to `c_r` takes the first branch.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_REFERENCE_COST: f64 = 150.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitnessParams {
    /// kEUR
    pub reference_cost: f64,
}

impl Default for FitnessParams {
    fn default() -> Self {
        Self {
            reference_cost: DEFAULT_REFERENCE_COST,
        }
    }
}

impl FitnessParams {
    pub fn new(reference_cost: f64) -> Result<Self> {
        if !(reference_cost.is_finite() && reference_cost > 0.0) {
            return Err(Error::Config(format!(
                "reference cost must be finite and > 0, got {reference_cost}"
            )));
        }
        Ok(Self { reference_cost })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    OverBudget,
    Infeasible,
    Feasible,
}

pub fn regime(cost: f64, s: f64, p: &FitnessParams) -> Regime {
    if cost >= p.reference_cost {
        Regime::OverBudget
    } else if s > 1.0 {
        Regime::Infeasible
    } else {
        Regime::Feasible
    }
}

/// Fitness of a design with cost `cost` (kEUR) and largest constraint ratio
/// `s`. `s = +inf` (failed analysis) is allowed.
pub fn fitness(cost: f64, s: f64, p: &FitnessParams) -> Result<f64> {
    if cost.is_nan() || s.is_nan() || cost <= 0.0 || cost.is_infinite() || s < 0.0 {
        return Err(Error::FitnessDomain { cost, s });
    }
    let cr = p.reference_cost;
    Ok(match regime(cost, s, p) {
        Regime::OverBudget => cr / cost,
        Regime::Infeasible => 1.0 + 1.0 / s,
        Regime::Feasible => 2.0 - (1.0 - s) + cr / cost,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p() -> FitnessParams {
        FitnessParams::default()
    }

    #[test]
    fn worked_values() {
        assert_eq!(fitness(300.0, 0.5, &p()).unwrap(), 0.5);
        assert_eq!(fitness(100.0, 2.0, &p()).unwrap(), 1.5);
        let expected = 2.0 - (1.0 - 0.9962) + 150.0 / 91.354;
        let f = fitness(91.354, 0.9962, &p()).unwrap();
        assert!((f - expected).abs() < 1e-12);
        assert!((f - 3.638_164).abs() < 1e-6);
    }

    #[test]
    fn boundary_cost_takes_first_branch() {
        assert_eq!(fitness(150.0, 0.1, &p()).unwrap(), 1.0);
        assert_eq!(regime(150.0, 0.1, &p()), Regime::OverBudget);
    }

    #[test]
    fn failed_analysis_lands_at_one() {
        assert_eq!(fitness(100.0, f64::INFINITY, &p()).unwrap(), 1.0);
    }

    #[test]
    fn rejects_invalid_inputs() {
        for (c, s) in [(0.0, 1.0), (-5.0, 1.0), (f64::NAN, 1.0), (100.0, f64::NAN), (100.0, -0.1)] {
            assert!(matches!(fitness(c, s, &p()), Err(Error::FitnessDomain { .. })), "{c} {s}");
        }
        assert!(FitnessParams::new(0.0).is_err());
        assert!(FitnessParams::new(f64::NAN).is_err());
    }

    proptest! {
        #[test]
        fn regimes_are_ordered(
            c_over in 150.0f64..1e4, s_any in 0.0f64..1e3,
            c_under in 1.0f64..149.999, s_bad in 1.0001f64..1e3, s_ok in 0.0f64..=1.0,
        ) {
            let over = fitness(c_over, s_any, &p()).unwrap();
            let infeasible = fitness(c_under, s_bad, &p()).unwrap();
            let feasible = fitness(c_under, s_ok, &p()).unwrap();
            prop_assert!(over <= 1.0);
            prop_assert!(infeasible > 1.0 && infeasible < 2.0);
            prop_assert!(feasible > 2.0);
            prop_assert!(over <= infeasible && infeasible < feasible);
        }

        #[test]
        fn cheaper_feasible_is_fitter(c1 in 1.0f64..149.0, dc in 0.001f64..1.0, s in 0.0f64..=1.0) {
            let a = fitness(c1, s, &p()).unwrap();
            let b = fitness(c1 + dc, s, &p()).unwrap();
            prop_assert!(a > b);
        }
    }
}
