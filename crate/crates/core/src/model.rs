//! Problem-instance types shared by every other module.
//!
//! Stress levels are indexed `0..m`. Level `j` means `j` units of additional
//! charging time beyond the first detectable unit, so the first column of a
//! stress row is the lightest stress a component can cause.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maxent::MultiplierPair;

/// Deviation from a unit row sum that is silently renormalized away.
pub const ROW_SUM_TOLERANCE: f64 = 1e-6;

/// Row sums closer to one than this are left untouched, which keeps
/// validation idempotent after a renormalization.
const RENORMALIZE_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub name: String,
    /// Cost charged per failure (repair or downtime units), at least 1.
    pub unit_loss: f64,
}

impl Component {
    pub fn new(name: impl Into<String>, unit_loss: f64) -> Self {
        Self {
            name: name.into(),
            unit_loss,
        }
    }
}

/// `n x m` grid of stress probabilities `p_ij`, row-major by component.
#[derive(Debug, Clone, PartialEq)]
pub struct StressMatrix {
    n: usize,
    m: usize,
    values: Vec<f64>,
}

impl StressMatrix {
    pub fn components(&self) -> usize {
        self.n
    }

    pub fn levels(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.m + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.m..(i + 1) * self.m]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.m)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }
}

/// Unvalidated scenario content as it appears in a scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawScenario {
    pub components: Vec<Component>,
    /// One row per component, one column per stress level.
    pub stress_matrix: Vec<Vec<f64>>,
    pub pf_target: f64,
    pub loss_target: f64,
}

/// A validated problem instance. Immutable once constructed.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    components: Vec<Component>,
    stress: StressMatrix,
    pf_target: f64,
    loss_target: f64,
}

impl Scenario {
    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn component_count(&self) -> usize {
        self.components.len()
    }

    pub fn level_count(&self) -> usize {
        self.stress.levels()
    }

    pub fn stress(&self) -> &StressMatrix {
        &self.stress
    }

    pub fn unit_loss(&self, i: usize) -> f64 {
        self.components[i].unit_loss
    }

    pub fn max_unit_loss(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.unit_loss)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Network failure probability target `PF`.
    pub fn pf_target(&self) -> f64 {
        self.pf_target
    }

    /// Expected total loss target `L`.
    pub fn loss_target(&self) -> f64 {
        self.loss_target
    }

    /// Returns a copy with different constraint targets. Used to build
    /// instances whose targets are exactly attainable.
    pub fn with_targets(&self, pf_target: f64, loss_target: f64) -> Result<Self> {
        let mut raw = self.to_raw();
        raw.pf_target = pf_target;
        raw.loss_target = loss_target;
        validate_scenario(&raw)
    }

    pub fn to_raw(&self) -> RawScenario {
        RawScenario {
            components: self.components.clone(),
            stress_matrix: self.stress.to_rows(),
            pf_target: self.pf_target,
            loss_target: self.loss_target,
        }
    }

    /// Components whose stress probabilities decrease somewhere along the
    /// stress axis. The model assumes non-decreasing rows for
    /// interpretation only, so this is reported, not rejected.
    pub fn non_monotone_components(&self) -> Vec<usize> {
        self.stress
            .rows()
            .enumerate()
            .filter(|(_, row)| row.windows(2).any(|w| w[1] < w[0]))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Checks every scenario invariant and returns the validated instance.
///
/// Rows whose sum is within [`ROW_SUM_TOLERANCE`] of one are rescaled to
/// sum to one; larger deviations are rejected.
pub fn validate_scenario(raw: &RawScenario) -> Result<Scenario> {
    let n = raw.components.len();
    if n == 0 {
        return Err(Error::shape("components", "component list is empty"));
    }

    let mut seen = HashSet::with_capacity(n);
    for (i, c) in raw.components.iter().enumerate() {
        if c.name.trim().is_empty() {
            return Err(Error::InvalidName {
                field: format!("components[{i}].name"),
                detail: "name is empty".into(),
            });
        }
        if !seen.insert(c.name.as_str()) {
            return Err(Error::InvalidName {
                field: format!("components[{i}].name"),
                detail: format!("duplicate component name {:?}", c.name),
            });
        }
        if !(c.unit_loss.is_finite() && c.unit_loss >= 1.0) {
            return Err(Error::range(
                format!("components[{i}].unit_loss"),
                c.unit_loss,
                "a finite value >= 1",
            ));
        }
    }

    if raw.stress_matrix.len() != n {
        return Err(Error::shape(
            "stress_matrix",
            format!("{} rows for {} components", raw.stress_matrix.len(), n),
        ));
    }
    let m = raw.stress_matrix[0].len();
    if m == 0 {
        return Err(Error::shape("stress_matrix[0]", "no stress levels"));
    }

    let mut values = Vec::with_capacity(n * m);
    for (i, row) in raw.stress_matrix.iter().enumerate() {
        if row.len() != m {
            return Err(Error::shape(
                format!("stress_matrix[{i}]"),
                format!("{} levels, expected {m}", row.len()),
            ));
        }
        for (j, &p) in row.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::range(
                    format!("stress_matrix[{i}][{j}]"),
                    p,
                    "a probability in [0, 1]",
                ));
            }
        }
        let sum: f64 = row.iter().sum();
        let deviation = (sum - 1.0).abs();
        if deviation > ROW_SUM_TOLERANCE {
            return Err(Error::RowSum {
                row: i,
                component: raw.components[i].name.clone(),
                sum,
                tolerance: ROW_SUM_TOLERANCE,
            });
        }
        if deviation > RENORMALIZE_THRESHOLD {
            values.extend(row.iter().map(|p| p / sum));
        } else {
            values.extend_from_slice(row);
        }
    }

    if !(raw.pf_target > 0.0 && raw.pf_target < 1.0) {
        return Err(Error::range(
            "pf_target",
            raw.pf_target,
            "a value in (0, 1)",
        ));
    }
    if !(raw.loss_target.is_finite() && raw.loss_target > 0.0) {
        return Err(Error::range(
            "loss_target",
            raw.loss_target,
            "a finite value > 0",
        ));
    }

    let scenario = Scenario {
        components: raw.components.clone(),
        stress: StressMatrix { n, m, values },
        pf_target: raw.pf_target,
        loss_target: raw.loss_target,
    };
    for i in scenario.non_monotone_components() {
        log::warn!(
            "stress probabilities of component {:?} are not non-decreasing in the stress level",
            scenario.components[i].name
        );
    }
    Ok(scenario)
}

/// `n x m` grid of failure probabilities `p^F_ij`.
///
/// Entries are stored exactly as the closed form produced them. Values at
/// or above one are possible for invalid multipliers and are reported by
/// [`crate::maxent::check_validity`] rather than clamped here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureMatrix {
    components: usize,
    levels: usize,
    entries: Vec<f64>,
    provenance: Option<MultiplierPair>,
}

impl FailureMatrix {
    pub(crate) fn from_parts(
        components: usize,
        levels: usize,
        entries: Vec<f64>,
        provenance: Option<MultiplierPair>,
    ) -> Self {
        debug_assert_eq!(entries.len(), components * levels);
        Self {
            components,
            levels,
            entries,
            provenance,
        }
    }

    /// Builds a matrix from explicit rows (one per component), with no
    /// generating multipliers attached.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::shape("failure_matrix", "no rows"));
        }
        let m = rows[0].len();
        if m == 0 {
            return Err(Error::shape("failure_matrix[0]", "no stress levels"));
        }
        let mut entries = Vec::with_capacity(n * m);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(Error::shape(
                    format!("failure_matrix[{i}]"),
                    format!("{} levels, expected {m}", row.len()),
                ));
            }
            entries.extend_from_slice(row);
        }
        Ok(Self::from_parts(n, m, entries, None))
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.levels + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.levels..(i + 1) * self.levels]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.entries.chunks_exact(self.levels)
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.components).map(move |i| self.get(i, j))
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    /// Multipliers that produced this matrix, if it came from the closed form.
    pub fn provenance(&self) -> Option<MultiplierPair> {
        self.provenance
    }

    /// Applies `f` to every entry. Provenance is dropped because the result
    /// no longer comes from the closed form.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_parts(
            self.components,
            self.levels,
            self.entries.iter().map(|&x| f(x)).collect(),
            None,
        )
    }

    pub(crate) fn check_shape(&self, scenario: &Scenario) -> Result<()> {
        if self.components != scenario.component_count() || self.levels != scenario.level_count() {
            return Err(Error::shape(
                "failure_matrix",
                format!(
                    "{}x{} matrix for a {}x{} scenario",
                    self.components,
                    self.levels,
                    scenario.component_count(),
                    scenario.level_count()
                ),
            ));
        }
        Ok(())
    }
}
