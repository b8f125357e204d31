//! Optimizer results checked against independent oracles with a known
//! answer, plus the exhaustive grid scan.

mod common;

use common::*;
use entroprel::optimizer::{Matrix2, IDENTITY};
use entroprel::validation::{estimate_with_grid_restart, nested_search};
use entroprel::*;

fn lattice(l1: (f64, f64), l2: (f64, f64), steps: usize) -> GridSpec {
    GridSpec::new(
        Interval::new(l1.0, l1.1).unwrap(),
        Interval::new(l2.0, l2.1).unwrap(),
        steps,
        &OptimizerOptions::default(),
    )
    .unwrap()
}

/// Nested scan from a 400 x 400 lattice down to a spacing below 1e-3.
fn refined_oracle(scenario: &Scenario, options: &OptimizerOptions, grid: &GridSpec) -> GridResult {
    let rounds = nested_search(scenario, options, grid, 4, 41).unwrap();
    let last = *rounds.last().unwrap();
    assert!(last.spacing <= 1e-3, "spacing {}", last.spacing);
    last
}

#[test]
fn bfgs_recovers_inverse_hessian_of_a_quadratic() {
    let a: Matrix2 = [[3.0, 1.0], [1.0, 2.0]];
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let a_inv = [
        [a[1][1] / det, -a[0][1] / det],
        [-a[1][0] / det, a[0][0] / det],
    ];
    let grad = |x: [f64; 2]| {
        [
            a[0][0] * x[0] + a[0][1] * x[1],
            a[1][0] * x[0] + a[1][1] * x[1],
        ]
    };

    let mut x = [1.0, -2.0];
    let mut h = IDENTITY;
    for _ in 0..2 {
        let g = grad(x);
        let d = [
            -(h[0][0] * g[0] + h[0][1] * g[1]),
            -(h[1][0] * g[0] + h[1][1] * g[1]),
        ];
        let ad = grad(d);
        // exact minimizer along d
        let alpha = -(g[0] * d[0] + g[1] * d[1]) / (d[0] * ad[0] + d[1] * ad[1]);
        let s = [alpha * d[0], alpha * d[1]];
        let next = [x[0] + s[0], x[1] + s[1]];
        let g_next = grad(next);
        h = bfgs_update(&h, s, [g_next[0] - g[0], g_next[1] - g[1]]);
        x = next;
    }
    for r in 0..2 {
        for c in 0..2 {
            assert!(
                (h[r][c] - a_inv[r][c]).abs() < 1e-8,
                "H[{r}][{c}] = {}",
                h[r][c]
            );
        }
    }
}

#[test]
fn gradient_matches_central_difference_at_fixed_points() {
    let scenario = reference_scenario();
    let options = OptimizerOptions::default();
    let points = [
        (-7.0859, 0.39360),
        (-6.0, 0.3),
        (-4.0, 0.2),
        (-3.0, 0.1),
        (-5.0, 0.25),
        (-6.5, 0.35),
        (-2.5, 0.12),
        (-4.5, 0.22),
        (-3.8, 0.18),
        (-5.5, 0.28),
    ];
    for (l1, l2) in points {
        let m = MultiplierPair::new(l1, l2);
        assert!(check_validity(&scenario, m).overall_valid);
        let forward = gradient_fd(&scenario, m, &options);
        let x = m.as_array();
        for k in 0..2 {
            let h = options.fd_epsilon * x[k].abs().max(1.0);
            let (mut up, mut down) = (x, x);
            up[k] += h;
            down[k] -= h;
            let f = |v: [f64; 2]| objective(MultiplierPair::from_array(v), &scenario, &options);
            let central = (f(up) - f(down)) / (up[k] - down[k]);
            let tol = 10.0 * h * central.abs().max(1.0);
            assert!(
                (forward[k] - central).abs() <= tol,
                "({l1}, {l2}) k={k}: forward {} central {central}",
                forward[k]
            );
        }
    }
}

#[test]
fn constructed_instances_are_recovered() {
    let options = tight_options();
    for truth in CONSTRUCTED_TRUTHS {
        let scenario = constructed_scenario(truth);
        let grid = GridSpec::default_for(&scenario, &options, 200).unwrap();
        let run = estimate_with_grid_restart(&scenario, &options, &grid).unwrap();
        let best = run.best();
        let m = best.final_multipliers;
        assert!(
            best.final_objective <= 1e-6,
            "{truth:?}: objective {}",
            best.final_objective
        );
        assert!(
            (m.lambda1 - truth.lambda1).abs() <= 1e-2 && (m.lambda2 - truth.lambda2).abs() <= 1e-2,
            "{truth:?}: recovered {m:?}"
        );
    }
}

#[test]
fn stationary_start_stops_immediately() {
    for truth in CONSTRUCTED_TRUTHS {
        let scenario = constructed_scenario(truth);
        let options = OptimizerOptions {
            initial_guess: Some(truth),
            ..OptimizerOptions::default()
        };
        let run = estimate_multipliers(&scenario, &options).unwrap();
        assert!(
            run.iterations <= 2,
            "{truth:?}: {} iterations",
            run.iterations
        );
        assert!(run.converged(), "{truth:?}: {:?}", run.convergence_reason);
        assert!(run.final_objective <= 1e-12);
    }
}

#[test]
fn grid_minimum_lies_next_to_the_construction() {
    for truth in CONSTRUCTED_TRUTHS {
        let scenario = constructed_scenario(truth);
        // spacings 0.025 and 0.01 put every construction on a lattice node
        let grid = lattice((-3.0, -0.5), (0.1, 1.1), 101);
        let found = grid_search(&scenario, &OptimizerOptions::default(), &grid);
        let spacing_l1 = 2.5 / 100.0;
        let spacing_l2 = 1.0 / 100.0;
        assert!(
            (found.best.lambda1 - truth.lambda1).abs() <= spacing_l1 + 1e-12
                && (found.best.lambda2 - truth.lambda2).abs() <= spacing_l2 + 1e-12,
            "{truth:?}: grid best {:?}",
            found.best
        );
    }
}

#[test]
fn optimizer_is_not_dominated_on_the_reference_scenario() {
    let scenario = reference_scenario();
    let options = OptimizerOptions::default();
    let run = estimate_multipliers(&scenario, &options).unwrap();
    let grid = lattice((-30.0, -0.5), (0.1, 2.0), 400);
    let coarse = grid_search(&scenario, &options, &grid);
    assert!(coarse.objective >= run.final_objective - 1e-3);
    let refined = refined_oracle(&scenario, &options, &grid);
    assert!(refined.objective >= run.final_objective - 1e-3);
    assert!(
        (refined.objective - run.final_objective).abs() <= 2e-3,
        "grid {} optimizer {}",
        refined.objective,
        run.final_objective
    );
    let reference = objective(REFERENCE_MULTIPLIERS, &scenario, &options);
    assert!(run.final_objective <= reference + 1e-3);
}

#[test]
fn oracle_agrees_on_constructed_instances() {
    let options = tight_options();
    for truth in CONSTRUCTED_TRUTHS {
        let scenario = constructed_scenario(truth);
        let grid = GridSpec::default_for(&scenario, &options, 400).unwrap();
        let run = estimate_with_grid_restart(&scenario, &options, &grid).unwrap();
        let refined = refined_oracle(&scenario, &options, &grid);
        let best = run.best();
        assert!(
            (refined.objective - best.final_objective).abs() <= 2e-3,
            "{truth:?}: grid {} optimizer {}",
            refined.objective,
            best.final_objective
        );
    }
}

#[test]
fn iterates_stay_feasible_and_descend() {
    let options = tight_options();
    let mut scenarios = vec![reference_scenario()];
    scenarios.extend(CONSTRUCTED_TRUTHS.map(constructed_scenario));
    for scenario in &scenarios {
        let run = estimate_multipliers(scenario, &options).unwrap();
        assert!(run.iterates.iter().all(|&m| options.in_bounds(m)));
        assert!(run.objective_trace.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(run, estimate_multipliers(scenario, &options).unwrap());
    }
}
