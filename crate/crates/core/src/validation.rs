//! Brute-force oracle for the optimizer: exhaustive lattice scans of the
//! objective over the multiplier box, with optional nested refinement.
//!
//! Lattice points are independent, so with the `parallel` feature they are
//! evaluated on the rayon pool. The reduction always runs sequentially in
//! scan order (lambda1 outer, lambda2 inner) and keeps the first minimum,
//! so parallel and sequential scans return identical results.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::maxent::MultiplierPair;
use crate::model::Scenario;
use crate::optimizer::{
    estimate_multipliers, objective, ConvergenceReason, Interval, OptimizerOptions, OptimizerRun,
};

/// Objective gap by which a lattice point must beat the optimizer before the
/// optimizer result counts as dominated.
pub const DOMINANCE_TOLERANCE: f64 = 1e-3;

/// Upper end of the default lambda2 scan range.
pub const DEFAULT_LAMBDA2_MAX: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    lambda1_range: Interval,
    lambda2_range: Interval,
    steps_per_axis: usize,
}

impl GridSpec {
    pub fn new(
        lambda1_range: Interval,
        lambda2_range: Interval,
        steps_per_axis: usize,
        options: &OptimizerOptions,
    ) -> Result<Self> {
        if steps_per_axis < 2 {
            return Err(Error::InvalidOptions {
                field: "steps_per_axis",
                detail: format!("{steps_per_axis} is below 2"),
            });
        }
        for (range, bounds, field) in [
            (lambda1_range, options.lambda1_bounds, "lambda1_range"),
            (lambda2_range, options.lambda2_bounds, "lambda2_range"),
        ] {
            let inside = range.lower.is_finite()
                && range.upper.is_finite()
                && bounds.contains(range.lower)
                && bounds.contains(range.upper);
            if !inside {
                return Err(Error::InvalidOptions {
                    field,
                    detail: format!("{range} is not a finite interval inside {bounds}"),
                });
            }
        }
        Ok(Self {
            lambda1_range,
            lambda2_range,
            steps_per_axis,
        })
    }

    /// Scan box `[-3 max(UL) lambda2_max, -0.5] x [0.1, lambda2_max]`,
    /// intersected with the optimizer bounds.
    pub fn default_for(
        scenario: &Scenario,
        options: &OptimizerOptions,
        steps_per_axis: usize,
    ) -> Result<Self> {
        let lambda2 = Interval {
            lower: 0.1,
            upper: DEFAULT_LAMBDA2_MAX,
        };
        let lambda1 = Interval {
            lower: -3.0 * scenario.max_unit_loss() * DEFAULT_LAMBDA2_MAX,
            upper: -0.5,
        };
        let clip = |r: Interval, b: Interval, field| {
            r.intersect(&b).ok_or(Error::InvalidOptions {
                field,
                detail: format!("default range {r} misses bounds {b}"),
            })
        };
        Self::new(
            clip(lambda1, options.lambda1_bounds, "lambda1_range")?,
            clip(lambda2, options.lambda2_bounds, "lambda2_range")?,
            steps_per_axis,
            options,
        )
    }

    pub fn lambda1_range(&self) -> Interval {
        self.lambda1_range
    }

    pub fn lambda2_range(&self) -> Interval {
        self.lambda2_range
    }

    pub fn steps_per_axis(&self) -> usize {
        self.steps_per_axis
    }

    /// Largest lattice spacing over the two axes.
    pub fn spacing(&self) -> f64 {
        let n = (self.steps_per_axis - 1) as f64;
        let w1 = self.lambda1_range.upper - self.lambda1_range.lower;
        let w2 = self.lambda2_range.upper - self.lambda2_range.lower;
        w1.max(w2) / n
    }

    /// Lattice point number `k` in scan order.
    pub fn point(&self, k: usize) -> MultiplierPair {
        let n = self.steps_per_axis;
        let axis = |r: Interval, idx: usize| {
            if idx == n - 1 {
                r.upper
            } else {
                r.lower + (r.upper - r.lower) * idx as f64 / (n - 1) as f64
            }
        };
        MultiplierPair::new(
            axis(self.lambda1_range, k / n),
            axis(self.lambda2_range, k % n),
        )
    }

    pub fn len(&self) -> usize {
        self.steps_per_axis * self.steps_per_axis
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    /// Rayon when the `parallel` feature is enabled, otherwise sequential.
    #[default]
    Parallel,
    Sequential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridResult {
    pub best: MultiplierPair,
    pub objective: f64,
    pub evaluations: usize,
    pub spacing: f64,
}

pub fn grid_search(scenario: &Scenario, options: &OptimizerOptions, grid: &GridSpec) -> GridResult {
    grid_search_with(scenario, options, grid, Execution::default())
}

pub fn grid_search_with(
    scenario: &Scenario,
    options: &OptimizerOptions,
    grid: &GridSpec,
    execution: Execution,
) -> GridResult {
    let eval = |k: usize| objective(grid.point(k), scenario, options);
    let values = evaluate(grid.len(), eval, execution);

    let mut best = 0;
    for (k, v) in values.iter().enumerate() {
        // NaN never wins; a NaN in slot 0 is replaced by the first number
        if *v < values[best] || values[best].is_nan() && !v.is_nan() {
            best = k;
        }
    }
    GridResult {
        best: grid.point(best),
        objective: values[best],
        evaluations: values.len(),
        spacing: grid.spacing(),
    }
}

#[cfg(feature = "parallel")]
fn evaluate(
    len: usize,
    eval: impl Fn(usize) -> f64 + Sync + Send,
    execution: Execution,
) -> Vec<f64> {
    use rayon::prelude::*;
    match execution {
        Execution::Parallel => (0..len).into_par_iter().map(eval).collect(),
        Execution::Sequential => (0..len).map(eval).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
fn evaluate(len: usize, eval: impl Fn(usize) -> f64, _execution: Execution) -> Vec<f64> {
    (0..len).map(eval).collect()
}

/// Grid search on `around +- radius`, clipped to the optimizer bounds.
pub fn refine_search(
    scenario: &Scenario,
    options: &OptimizerOptions,
    around: MultiplierPair,
    radius: f64,
    steps: usize,
) -> Result<GridResult> {
    if !(radius > 0.0) {
        return Err(Error::InvalidOptions {
            field: "radius",
            detail: format!("{radius} is not > 0"),
        });
    }
    let window = |c: f64, bounds: Interval, field| {
        let lower = bounds.project(c - radius);
        let upper = bounds.project(c + radius);
        Interval::new(lower, upper).map_err(|_| Error::InvalidOptions {
            field,
            detail: format!("refinement window around {c} misses {bounds}"),
        })
    };
    let grid = GridSpec::new(
        window(around.lambda1, options.lambda1_bounds, "lambda1_range")?,
        window(around.lambda2, options.lambda2_bounds, "lambda2_range")?,
        steps,
        options,
    )?;
    Ok(grid_search(scenario, options, &grid))
}

/// Coarse scan followed by `rounds` refinements, each centered on the
/// previous best with a radius of two lattice spacings.
pub fn nested_search(
    scenario: &Scenario,
    options: &OptimizerOptions,
    grid: &GridSpec,
    rounds: usize,
    refine_steps: usize,
) -> Result<Vec<GridResult>> {
    let mut results = vec![grid_search(scenario, options, grid)];
    for _ in 0..rounds {
        let prev = results[results.len() - 1];
        let next = refine_search(
            scenario,
            options,
            prev.best,
            2.0 * prev.spacing,
            refine_steps,
        )?;
        // the refinement lattice need not contain the previous best
        results.push(if next.objective <= prev.objective {
            next
        } else {
            GridResult {
                spacing: next.spacing,
                ..prev
            }
        });
    }
    Ok(results)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RestartedRun {
    pub cold: OptimizerRun,
    pub grid: GridResult,
    /// Present when the cold start stalled and a second run was made.
    pub restart: Option<OptimizerRun>,
}

impl RestartedRun {
    pub fn best(&self) -> &OptimizerRun {
        match &self.restart {
            Some(r) if r.final_objective <= self.cold.final_objective => r,
            _ => &self.cold,
        }
    }
}

/// Runs the optimizer from its usual starting point and, if that run hit the
/// iteration cap or is dominated by a lattice point of `grid`, runs it once
/// more from the better of the two points.
pub fn estimate_with_grid_restart(
    scenario: &Scenario,
    options: &OptimizerOptions,
    grid: &GridSpec,
) -> Result<RestartedRun> {
    let cold = estimate_multipliers(scenario, options)?;
    let grid = grid_search(scenario, options, grid);
    let stalled = cold.convergence_reason == ConvergenceReason::MaxIterations
        || grid.objective < cold.final_objective - DOMINANCE_TOLERANCE;
    let restart = if stalled {
        let seed = if grid.objective < cold.final_objective {
            grid.best
        } else {
            cold.final_multipliers
        };
        log::info!("restarting optimizer from {seed:?}");
        let mut seeded = options.clone();
        seeded.initial_guess = Some(seed);
        Some(estimate_multipliers(scenario, &seeded)?)
    } else {
        None
    };
    Ok(RestartedRun {
        cold,
        grid,
        restart,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::case_study_raw;
    use crate::model::validate_scenario;

    fn case_study() -> Scenario {
        validate_scenario(&case_study_raw()).unwrap()
    }

    fn interval(lower: f64, upper: f64) -> Interval {
        Interval::new(lower, upper).unwrap()
    }

    #[test]
    fn two_by_two_grid_is_min_of_corners() {
        let s = case_study();
        let opts = OptimizerOptions::default();
        let g = GridSpec::new(interval(-10.0, -2.0), interval(0.2, 0.6), 2, &opts).unwrap();
        let r = grid_search(&s, &opts, &g);
        assert_eq!(r.evaluations, 4);
        let corners = [(-10.0, 0.2), (-10.0, 0.6), (-2.0, 0.2), (-2.0, 0.6)]
            .map(|(a, b)| objective(MultiplierPair::new(a, b), &s, &opts));
        let min = corners.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(r.objective, min);
    }

    #[test]
    fn grid_spec_validation() {
        let opts = OptimizerOptions::default();
        assert!(GridSpec::new(interval(-3.0, -1.0), interval(0.2, 1.0), 1, &opts).is_err());
        assert!(GridSpec::new(interval(-3.0, 0.0), interval(0.2, 1.0), 4, &opts).is_err());
        assert!(GridSpec::new(interval(-3.0, -1.0), interval(0.0, 1.0), 4, &opts).is_err());
        let d = GridSpec::default_for(&case_study(), &opts, 10).unwrap();
        assert_eq!(d.lambda1_range(), interval(-270.0, -0.5));
        assert_eq!(d.lambda2_range(), interval(0.1, 5.0));
        assert_eq!(d.point(0), MultiplierPair::new(-270.0, 0.1));
        assert_eq!(d.point(d.len() - 1), MultiplierPair::new(-0.5, 5.0));
        assert_eq!(d.point(1), MultiplierPair::new(-270.0, 0.1 + 4.9 / 9.0));
    }

    #[test]
    fn tiny_radius_returns_center() {
        let s = case_study();
        let opts = OptimizerOptions::default();
        let c = MultiplierPair::new(-7.0, 0.4);
        let r = refine_search(&s, &opts, c, 1e-12, 3).unwrap();
        assert!((r.best.lambda1 - c.lambda1).abs() < 1e-11);
        assert!((r.best.lambda2 - c.lambda2).abs() < 1e-11);
        assert!(refine_search(&s, &opts, c, 0.0, 3).is_err());
    }

    #[test]
    fn refinement_is_clipped_to_bounds() {
        let s = case_study();
        let opts = OptimizerOptions::default();
        let r = refine_search(&s, &opts, MultiplierPair::new(-0.6, 0.15), 1.0, 11).unwrap();
        let g = GridSpec::new(interval(-1.6, -0.5), interval(0.1, 1.15), 11, &opts).unwrap();
        assert_eq!(r, grid_search(&s, &opts, &g));
        for k in 0..g.len() {
            assert!(opts.in_bounds(g.point(k)));
        }
    }

    #[test]
    fn nested_rounds_never_worsen() {
        let s = case_study();
        let opts = OptimizerOptions::default();
        let g = GridSpec::new(interval(-30.0, -0.5), interval(0.1, 2.0), 40, &opts).unwrap();
        let rounds = nested_search(&s, &opts, &g, 3, 21).unwrap();
        assert_eq!(rounds.len(), 4);
        assert!(rounds.windows(2).all(|w| w[1].objective <= w[0].objective));
        assert!(rounds.windows(2).all(|w| w[1].spacing < w[0].spacing));
    }

    #[test]
    fn parallel_matches_sequential() {
        let s = case_study();
        let opts = OptimizerOptions::default();
        let g = GridSpec::new(interval(-30.0, -0.5), interval(0.1, 2.0), 60, &opts).unwrap();
        let a = grid_search_with(&s, &opts, &g, Execution::Parallel);
        let b = grid_search_with(&s, &opts, &g, Execution::Sequential);
        assert_eq!(a, b);
        assert_eq!(a, grid_search(&s, &opts, &g));
    }
}
