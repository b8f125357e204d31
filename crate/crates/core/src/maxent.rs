//! Closed-form maximum-entropy failure probabilities and the quantities
//! built on them.
//!
//! Maximizing `-sum p^F ln p^F` subject to the failure-probability constraint
//! `F1 = sum p_ij p^F_ij` and the loss constraint `F2 = sum UL_i p_ij p^F_ij`
//! gives
//!
//! ```text
//! p^F_ij = exp(-1 - p_ij (lambda1 + lambda2 UL_i))
//! ```
//!
//! which is a valid probability when the exponent stays negative and grows
//! with `p_ij` when `lambda1 + lambda2 UL_i < 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FailureMatrix, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiplierPair {
    /// Multiplier of the network failure probability constraint.
    pub lambda1: f64,
    /// Multiplier of the expected loss constraint.
    pub lambda2: f64,
}

impl MultiplierPair {
    pub const fn new(lambda1: f64, lambda2: f64) -> Self {
        Self { lambda1, lambda2 }
    }

    /// `lambda1 + lambda2 * UL`, the per-component rate in the exponent.
    #[inline]
    pub fn rate(&self, unit_loss: f64) -> f64 {
        self.lambda1 + self.lambda2 * unit_loss
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.lambda1, self.lambda2]
    }

    pub fn from_array(x: [f64; 2]) -> Self {
        Self::new(x[0], x[1])
    }
}

/// Unclamped closed-form failure probability of one cell.
#[inline]
pub fn failure_probability(p_ij: f64, multipliers: MultiplierPair, unit_loss: f64) -> f64 {
    (-1.0 - p_ij * multipliers.rate(unit_loss)).exp()
}

pub fn failure_matrix(scenario: &Scenario, multipliers: MultiplierPair) -> FailureMatrix {
    let stress = scenario.stress();
    let entries = stress
        .rows()
        .zip(scenario.components())
        .flat_map(|(row, c)| {
            row.iter()
                .map(move |&p| failure_probability(p, multipliers, c.unit_loss))
        })
        .collect();
    FailureMatrix::from_parts(
        stress.components(),
        stress.levels(),
        entries,
        Some(multipliers),
    )
}

/// Shannon entropy of the matrix entries in nats.
pub fn shannon_entropy(matrix: &FailureMatrix) -> Result<f64> {
    let mut h = 0.0;
    for (k, &p) in matrix.entries().iter().enumerate() {
        if !(p > 0.0) {
            return Err(Error::Domain(format!(
                "entropy undefined for entry ({}, {}) = {p}",
                k / matrix.levels(),
                k % matrix.levels()
            )));
        }
        h -= p * p.ln();
    }
    Ok(h)
}

/// Achieved network failure constraint `F1 = sum_ij p_ij p^F_ij`.
pub fn constraint_f1(scenario: &Scenario, matrix: &FailureMatrix) -> Result<f64> {
    matrix.check_shape(scenario)?;
    Ok(weighted_sum(scenario, matrix, |_| 1.0))
}

/// Achieved expected loss `F2 = sum_ij UL_i p_ij p^F_ij`.
pub fn constraint_f2(scenario: &Scenario, matrix: &FailureMatrix) -> Result<f64> {
    matrix.check_shape(scenario)?;
    Ok(weighted_sum(scenario, matrix, |i| scenario.unit_loss(i)))
}

fn weighted_sum(scenario: &Scenario, matrix: &FailureMatrix, weight: impl Fn(usize) -> f64) -> f64 {
    scenario
        .stress()
        .rows()
        .zip(matrix.rows())
        .enumerate()
        .map(|(i, (p, pf))| weight(i) * p.iter().zip(pf).map(|(a, b)| a * b).sum::<f64>())
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    /// `lambda1 + lambda2 UL_i < 0` for each component.
    pub case2_holds_per_component: Vec<bool>,
    /// `p_ij (lambda1 + lambda2 UL_i) > -1` for every cell.
    pub exponent_bound_holds: bool,
    pub lambda2_positive: bool,
    pub lambda1_negative: bool,
    /// `lambda1 < -lambda2 max(UL_i)`.
    pub lambda1_below_case2_bound: bool,
    /// Every component's failure probability increases with its stress
    /// probability.
    pub failure_increases_with_stress: bool,
    pub overall_valid: bool,
}

impl ValidityReport {
    /// The four checks in the order they are usually reported: exponent
    /// bound, sign regime, lambda1 bound, monotone failure probabilities.
    pub fn checks(&self) -> [(&'static str, bool); 4] {
        [
            ("all p_ij(l1 + l2 UL_i) > -1", self.exponent_bound_holds),
            (
                "l2 > 0 and l1 < 0",
                self.lambda2_positive && self.lambda1_negative,
            ),
            ("l1 < -l2 max(UL_i)", self.lambda1_below_case2_bound),
            (
                "p^F increases with p_ij for all components",
                self.failure_increases_with_stress,
            ),
        ]
    }
}

pub fn check_validity(scenario: &Scenario, multipliers: MultiplierPair) -> ValidityReport {
    let case2: Vec<bool> = scenario
        .components()
        .iter()
        .map(|c| multipliers.rate(c.unit_loss) < 0.0)
        .collect();
    let exponent_bound_holds =
        scenario
            .stress()
            .rows()
            .zip(scenario.components())
            .all(|(row, c)| {
                let rate = multipliers.rate(c.unit_loss);
                row.iter().all(|&p| p * rate > -1.0)
            });
    let lambda2_positive = multipliers.lambda2 > 0.0;
    let lambda1_negative = multipliers.lambda1 < 0.0;
    let lambda1_below_case2_bound =
        multipliers.lambda1 < -multipliers.lambda2 * scenario.max_unit_loss();
    let failure_increases_with_stress = case2.iter().all(|&b| b);
    let overall_valid = failure_increases_with_stress
        && exponent_bound_holds
        && lambda2_positive
        && lambda1_negative;
    ValidityReport {
        case2_holds_per_component: case2,
        exponent_bound_holds,
        lambda2_positive,
        lambda1_negative,
        lambda1_below_case2_bound,
        failure_increases_with_stress,
        overall_valid,
    }
}
