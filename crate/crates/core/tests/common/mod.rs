#![allow(dead_code)]

use entroprel::io::parse_scenario;
use entroprel::*;

pub const REFERENCE_MULTIPLIERS: MultiplierPair = MultiplierPair::new(-7.0859, 0.39360);

pub fn reference_scenario() -> Scenario {
    parse_scenario(include_str!("../../../../scenarios/case_study.json"))
        .unwrap()
        .scenario
}

/// Two components whose targets are the constraint values at `truth`, so
/// `truth` attains a zero objective.
pub fn constructed_scenario(truth: MultiplierPair) -> Scenario {
    let base = validate_scenario(&RawScenario {
        components: vec![
            Component::new("upstream", 4.0),
            Component::new("downstream", 2.0),
        ],
        stress_matrix: vec![vec![0.2, 0.3, 0.5], vec![0.1, 0.3, 0.6]],
        pf_target: 0.5,
        loss_target: 1.0,
    })
    .unwrap();
    let matrix = failure_matrix(&base, truth);
    base.with_targets(
        constraint_f1(&base, &matrix).unwrap(),
        constraint_f2(&base, &matrix).unwrap(),
    )
    .unwrap()
}

pub const CONSTRUCTED_TRUTHS: [MultiplierPair; 3] = [
    MultiplierPair::new(-1.0, 0.2),
    MultiplierPair::new(-1.5, 0.3),
    MultiplierPair::new(-0.8, 0.15),
];

pub fn tight_options() -> OptimizerOptions {
    OptimizerOptions {
        function_tolerance: 1e-12,
        ..OptimizerOptions::default()
    }
}
