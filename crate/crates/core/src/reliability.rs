//! Series-system reliability derived from a failure matrix.
//!
//! The network fails as soon as any one component fails. Stress level `j`
//! stands in for time: `R_j = prod_i (1 - p^F_ij)` is the probability that
//! every component survives stress level `j`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::maxent::shannon_entropy;
use crate::model::{FailureMatrix, Scenario};

/// Slack above one tolerated in a component failure probability.
const OVERFLOW_TOLERANCE: f64 = 1e-9;

/// `F_i = sum_j p_ij p^F_ij` for component `i`.
pub fn component_failure_probability(
    scenario: &Scenario,
    matrix: &FailureMatrix,
    i: usize,
) -> Result<f64> {
    matrix.check_shape(scenario)?;
    if i >= scenario.component_count() {
        return Err(Error::shape(
            "component",
            format!(
                "index {i} out of range for {} components",
                scenario.component_count()
            ),
        ));
    }
    let value: f64 = scenario
        .stress()
        .row(i)
        .iter()
        .zip(matrix.row(i))
        .map(|(p, pf)| p * pf)
        .sum();
    if value > 1.0 + OVERFLOW_TOLERANCE {
        return Err(Error::ProbabilityOverflow {
            component: i,
            value,
        });
    }
    Ok(value)
}

pub fn component_failure_probabilities(
    scenario: &Scenario,
    matrix: &FailureMatrix,
) -> Result<Vec<f64>> {
    (0..scenario.component_count())
        .map(|i| component_failure_probability(scenario, matrix, i))
        .collect()
}

/// `1 - prod_i (1 - F_i)`: probability that at least one component fails.
pub fn network_failure_exact(scenario: &Scenario, matrix: &FailureMatrix) -> Result<f64> {
    let survival: f64 = component_failure_probabilities(scenario, matrix)?
        .iter()
        .map(|f| 1.0 - f)
        .product();
    Ok(1.0 - survival)
}

/// First-order expansion of the exact network failure, `sum_i F_i`. An
/// upper bound on the exact value, and not necessarily a probability.
pub fn network_failure_linear(scenario: &Scenario, matrix: &FailureMatrix) -> Result<f64> {
    crate::maxent::constraint_f1(scenario, matrix)
}

pub fn reliability_per_stress_level(matrix: &FailureMatrix) -> Vec<f64> {
    (0..matrix.levels())
        .map(|j| matrix.column(j).map(|pf| 1.0 - pf).product())
        .collect()
}

/// Diagnostic variant weighting each failure probability by its stress
/// probability, `prod_i (1 - p_ij p^F_ij)`. Not used for the reported curve.
pub fn reliability_per_stress_level_weighted(
    scenario: &Scenario,
    matrix: &FailureMatrix,
) -> Result<Vec<f64>> {
    matrix.check_shape(scenario)?;
    let stress = scenario.stress();
    Ok((0..matrix.levels())
        .map(|j| {
            (0..matrix.components())
                .map(|i| 1.0 - stress.get(i, j) * matrix.get(i, j))
                .product()
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentFailureSummary {
    pub name: String,
    /// `sum_j p^F_ij`, unweighted.
    pub sum_pf: f64,
    pub exceeds_one: bool,
    pub max_level_pf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeakestComponentReport {
    pub index: usize,
    pub components: Vec<ComponentFailureSummary>,
}

impl WeakestComponentReport {
    pub fn weakest(&self) -> &ComponentFailureSummary {
        &self.components[self.index]
    }
}

/// Component with the largest failure probability at the highest stress
/// level. Ties go to the larger unweighted row sum, then to the lower index.
pub fn identify_weakest_component(
    scenario: &Scenario,
    matrix: &FailureMatrix,
) -> Result<WeakestComponentReport> {
    matrix.check_shape(scenario)?;
    let last = matrix.levels() - 1;
    let components: Vec<ComponentFailureSummary> = scenario
        .components()
        .iter()
        .zip(matrix.rows())
        .map(|(c, row)| {
            let sum_pf: f64 = row.iter().sum();
            ComponentFailureSummary {
                name: c.name.clone(),
                sum_pf,
                exceeds_one: sum_pf > 1.0,
                max_level_pf: row[last],
            }
        })
        .collect();
    let mut index = 0;
    for (i, c) in components.iter().enumerate().skip(1) {
        let best = &components[index];
        let better = c.max_level_pf > best.max_level_pf
            || (c.max_level_pf == best.max_level_pf && c.sum_pf > best.sum_pf);
        if better {
            index = i;
        }
    }
    Ok(WeakestComponentReport { index, components })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReliabilityCurve {
    /// `R_j` for each stress level.
    pub per_level: Vec<f64>,
    /// `F_i` for each component.
    pub per_component_failure: Vec<f64>,
    pub weakest_component: usize,
    pub network_failure_exact: f64,
    pub network_failure_linear: f64,
    pub entropy_nats: f64,
}

pub fn reliability_curve(scenario: &Scenario, matrix: &FailureMatrix) -> Result<ReliabilityCurve> {
    let per_component_failure = component_failure_probabilities(scenario, matrix)?;
    let survival: f64 = per_component_failure.iter().map(|f| 1.0 - f).product();
    Ok(ReliabilityCurve {
        per_level: reliability_per_stress_level(matrix),
        network_failure_linear: per_component_failure.iter().sum(),
        per_component_failure,
        weakest_component: identify_weakest_component(scenario, matrix)?.index,
        network_failure_exact: 1.0 - survival,
        entropy_nats: shannon_entropy(matrix)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyReliabilityPoint {
    pub entropy_nats: f64,
    pub reliability: Vec<f64>,
    pub network_failure_exact: f64,
}

/// Pairs entropy with the reliability curve for each matrix, for plotting.
pub fn entropy_reliability_report(
    scenario: &Scenario,
    matrices: &[FailureMatrix],
) -> Result<Vec<EntropyReliabilityPoint>> {
    if matrices.is_empty() {
        return Err(Error::EmptyInput("no failure matrices to report"));
    }
    matrices
        .iter()
        .map(|m| {
            Ok(EntropyReliabilityPoint {
                entropy_nats: shannon_entropy(m)?,
                reliability: reliability_per_stress_level(m),
                network_failure_exact: network_failure_exact(scenario, m)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maxent::{failure_matrix, MultiplierPair};
    use crate::model::tests::case_study_raw;
    use crate::model::{validate_scenario, Component, RawScenario};

    const REFERENCE: MultiplierPair = MultiplierPair::new(-7.0859, 0.39360);

    fn case_study() -> Scenario {
        validate_scenario(&case_study_raw()).unwrap()
    }

    fn scenario(rows: Vec<Vec<f64>>) -> Scenario {
        let components = (0..rows.len())
            .map(|i| Component::new(format!("c{i}"), 1.0 + i as f64))
            .collect();
        validate_scenario(&RawScenario {
            components,
            stress_matrix: rows,
            pf_target: 0.5,
            loss_target: 1.0,
        })
        .unwrap()
    }

    /// Published failure probabilities, one row per component.
    fn published_table() -> FailureMatrix {
        FailureMatrix::from_rows(&[
            vec![0.367907, 0.367948, 0.367975, 0.367989, 0.367995],
            vec![0.405318, 0.450277, 0.478819, 0.497864, 0.504975],
            vec![0.456123, 0.565533, 0.628974, 0.656300, 0.671991],
            vec![0.448627, 0.664821, 0.834057, 0.947539, 0.988699],
        ])
        .unwrap()
    }

    #[test]
    fn component_failure_examples() {
        let s = case_study();
        let zeros = FailureMatrix::from_rows(&vec![vec![0.0; 5]; 4]).unwrap();
        assert_eq!(component_failure_probability(&s, &zeros, 2).unwrap(), 0.0);

        let one = scenario(vec![vec![1.0]]);
        let m = FailureMatrix::from_rows(&[vec![0.4]]).unwrap();
        assert_eq!(component_failure_probability(&one, &m, 0).unwrap(), 0.4);

        let m = failure_matrix(&s, REFERENCE);
        let cs = component_failure_probability(&s, &m, 3).unwrap();
        assert!((cs - 0.857_656_848_247_287).abs() < 1e-12);
        assert!(component_failure_probability(&s, &m, 4).is_err());
    }

    #[test]
    fn overflow_is_an_error() {
        let one = scenario(vec![vec![1.0]]);
        let m = FailureMatrix::from_rows(&[vec![1.2]]).unwrap();
        assert!(matches!(
            component_failure_probability(&one, &m, 0),
            Err(Error::ProbabilityOverflow { component: 0, .. })
        ));
        assert!(network_failure_exact(&one, &m).is_err());
    }

    #[test]
    fn network_failure_examples() {
        let two = scenario(vec![vec![1.0], vec![1.0]]);
        let zeros = FailureMatrix::from_rows(&[vec![0.0], vec![0.0]]).unwrap();
        assert_eq!(network_failure_exact(&two, &zeros).unwrap(), 0.0);
        assert_eq!(network_failure_linear(&two, &zeros).unwrap(), 0.0);
        let halves = FailureMatrix::from_rows(&[vec![0.5], vec![0.5]]).unwrap();
        assert_eq!(network_failure_exact(&two, &halves).unwrap(), 0.75);
        assert_eq!(network_failure_linear(&two, &halves).unwrap(), 1.0);

        let single = scenario(vec![vec![0.25, 0.75]]);
        let m = FailureMatrix::from_rows(&[vec![0.3, 0.6]]).unwrap();
        assert_eq!(
            network_failure_exact(&single, &m).unwrap(),
            network_failure_linear(&single, &m).unwrap()
        );

        let s = case_study();
        let m = failure_matrix(&s, REFERENCE);
        let exact = network_failure_exact(&s, &m).unwrap();
        assert!((exact - 0.982_186_061_873_208).abs() < 1e-12);
        assert!(exact >= s.pf_target());
    }

    #[test]
    fn reliability_examples() {
        let r = reliability_per_stress_level(&published_table());
        let hand = (1.0 - 0.367995) * (1.0 - 0.504975) * (1.0 - 0.671991) * (1.0 - 0.988699);
        assert!((r[4] - hand).abs() < 1e-15);
        assert!((r[4] - 0.00116).abs() < 1e-4);
        assert!(r.windows(2).all(|w| w[1] < w[0]));

        let zeros = FailureMatrix::from_rows(&vec![vec![0.0; 3]; 2]).unwrap();
        assert_eq!(reliability_per_stress_level(&zeros), vec![1.0; 3]);
        let with_one = FailureMatrix::from_rows(&[vec![0.2, 1.0], vec![0.3, 0.1]]).unwrap();
        assert_eq!(reliability_per_stress_level(&with_one)[1], 0.0);
    }

    #[test]
    fn weighted_variant_does_not_collapse() {
        let s = case_study();
        let m = failure_matrix(&s, REFERENCE);
        let w = reliability_per_stress_level_weighted(&s, &m).unwrap();
        assert!((w[4] - 0.465_966_477).abs() < 1e-8, "{w:?}");
    }

    #[test]
    fn weakest_component_examples() {
        let s = case_study();
        let report = identify_weakest_component(&s, &failure_matrix(&s, REFERENCE)).unwrap();
        assert_eq!(report.index, 3);
        assert_eq!(report.weakest().name, "Charging Station");
        assert!(report.weakest().exceeds_one);
        assert!((report.weakest().sum_pf - 3.883_749_168_174_35).abs() < 1e-12);

        let one = scenario(vec![vec![1.0]]);
        let m = FailureMatrix::from_rows(&[vec![0.4]]).unwrap();
        assert_eq!(identify_weakest_component(&one, &m).unwrap().index, 0);

        let two = scenario(vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        let m = FailureMatrix::from_rows(&[vec![0.4, 0.6], vec![0.4, 0.6]]).unwrap();
        assert_eq!(identify_weakest_component(&two, &m).unwrap().index, 0);
        let m = FailureMatrix::from_rows(&[vec![0.3, 0.6], vec![0.4, 0.6]]).unwrap();
        assert_eq!(identify_weakest_component(&two, &m).unwrap().index, 1);
    }

    #[test]
    fn curve_and_report() {
        let s = case_study();
        let m = failure_matrix(&s, REFERENCE);
        let curve = reliability_curve(&s, &m).unwrap();
        assert_eq!(curve.weakest_component, 3);
        assert!((curve.entropy_nats - 5.969_765_626_476_394).abs() < 1e-12);
        assert!(curve.network_failure_linear >= curve.network_failure_exact);

        let report = entropy_reliability_report(&s, std::slice::from_ref(&m)).unwrap();
        assert_eq!(report.len(), 1);
        assert!((report[0].reliability[4] - 0.00116).abs() < 1e-4);
        assert!(matches!(
            entropy_reliability_report(&s, &[]),
            Err(Error::EmptyInput(_))
        ));

        let small = FailureMatrix::from_rows(&vec![vec![0.1; 5]; 4]).unwrap();
        let large = FailureMatrix::from_rows(&vec![vec![0.2; 5]; 4]).unwrap();
        let pair = entropy_reliability_report(&s, &[small, large]).unwrap();
        assert!(pair[1]
            .reliability
            .iter()
            .zip(&pair[0].reliability)
            .all(|(l, sm)| l < sm));
    }
}
