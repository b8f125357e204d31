//! Multiplier estimation by penalized least squares.
//!
//! The objective is
//!
//! ```text
//! f(l1, l2) = (F1 - PF)^2 + (F2 - L)^2
//!           + constraint_penalty * sum_i max(0, l1 + l2 UL_i + margin)^2
//!           + bound_penalty * sum_ij (max(0, floor - p^F_ij)^2 + max(0, p^F_ij - ceiling)^2)
//! ```
//!
//! and is minimized over a box on `(l1, l2)` with a two-parameter BFGS
//! method on forward-difference gradients. Each step runs a backtracking
//! (Armijo) line search whose trial points are projected onto the box.
//!
//! The recovered multipliers depend on the penalty weights. Defaults are
//! `constraint_penalty = 1e6` and `bound_penalty = 1e4`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maxent::MultiplierPair;
use crate::model::Scenario;

/// Magnitude standing in for an infinite bound in projection arithmetic.
pub const INFINITE_BOUND: f64 = 1e12;
/// Curvature `y.s` at or below which the BFGS update is skipped.
pub const CURVATURE_FLOOR: f64 = 1e-12;
pub const ARMIJO_C1: f64 = 1e-4;
pub const MAX_BACKTRACKS: usize = 30;

pub type Matrix2 = [[f64; 2]; 2];
pub const IDENTITY: Matrix2 = [[1.0, 0.0], [0.0, 1.0]];

/// Closed interval, either end possibly infinite. Serialized as a
/// two-element array with `null` for an infinite end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[Option<f64>; 2]", into = "[Option<f64>; 2]")]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if lower.is_nan() || upper.is_nan() || lower > upper {
            return Err(Error::InvalidOptions {
                field: "bounds",
                detail: format!("[{lower}, {upper}] is empty"),
            });
        }
        Ok(Self { lower, upper })
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower && x <= self.upper
    }

    /// Lower end with an infinite bound replaced by the sentinel.
    pub fn finite_lower(&self) -> f64 {
        self.lower.max(-INFINITE_BOUND)
    }

    pub fn finite_upper(&self) -> f64 {
        self.upper.min(INFINITE_BOUND)
    }

    pub fn project(&self, x: f64) -> f64 {
        x.clamp(self.finite_lower(), self.finite_upper())
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lower = self.lower.max(other.lower);
        let upper = self.upper.min(other.upper);
        (lower <= upper).then_some(Interval { lower, upper })
    }
}

impl TryFrom<[Option<f64>; 2]> for Interval {
    type Error = Error;

    fn try_from(v: [Option<f64>; 2]) -> Result<Self> {
        Interval::new(
            v[0].unwrap_or(f64::NEG_INFINITY),
            v[1].unwrap_or(f64::INFINITY),
        )
    }
}

impl From<Interval> for [Option<f64>; 2] {
    fn from(i: Interval) -> Self {
        let finite = |x: f64| x.is_finite().then_some(x);
        [finite(i.lower), finite(i.upper)]
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lower, self.upper)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerOptions {
    pub lambda1_bounds: Interval,
    pub lambda2_bounds: Interval,
    pub constraint_penalty: f64,
    pub bound_penalty: f64,
    /// Slack required below zero by the `l1 + l2 UL_i` hinge. Zero gives the
    /// bare hinge, whose minimizer usually sits a hair on the invalid side.
    pub validity_margin: f64,
    pub pf_floor: f64,
    pub pf_ceiling: f64,
    /// Relative forward-difference step; the step for coordinate `k` is
    /// `fd_epsilon * max(1, |x_k|)`.
    pub fd_epsilon: f64,
    /// Absolute tolerance on `|f_{k+1} - f_k|`.
    pub function_tolerance: f64,
    pub gradient_tolerance: f64,
    pub max_iterations: usize,
    /// Defaults to `(-1.5 max(UL_i), 1.0)` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_guess: Option<MultiplierPair>,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            lambda1_bounds: Interval {
                lower: f64::NEG_INFINITY,
                upper: -0.5,
            },
            lambda2_bounds: Interval {
                lower: 0.1,
                upper: f64::INFINITY,
            },
            constraint_penalty: 1e6,
            bound_penalty: 1e4,
            validity_margin: 1e-3,
            pf_floor: 1e-9,
            pf_ceiling: 0.99,
            fd_epsilon: 1e-7,
            function_tolerance: 1e-3,
            gradient_tolerance: 1e-10,
            max_iterations: 100,
            initial_guess: None,
        }
    }
}

impl OptimizerOptions {
    pub fn validate(&self) -> Result<()> {
        let fail = |field, detail: String| Err(Error::InvalidOptions { field, detail });
        Interval::new(self.lambda1_bounds.lower, self.lambda1_bounds.upper)?;
        Interval::new(self.lambda2_bounds.lower, self.lambda2_bounds.upper)?;
        if !(self.constraint_penalty > 0.0) {
            return fail(
                "constraint_penalty",
                format!("{} is not > 0", self.constraint_penalty),
            );
        }
        if !(self.bound_penalty > 0.0) {
            return fail(
                "bound_penalty",
                format!("{} is not > 0", self.bound_penalty),
            );
        }
        if !(self.validity_margin >= 0.0) {
            return fail(
                "validity_margin",
                format!("{} is negative", self.validity_margin),
            );
        }
        if !(self.pf_floor < self.pf_ceiling) {
            return fail(
                "pf_floor",
                format!(
                    "floor {} is not below ceiling {}",
                    self.pf_floor, self.pf_ceiling
                ),
            );
        }
        if !(self.fd_epsilon > 0.0) {
            return fail("fd_epsilon", format!("{} is not > 0", self.fd_epsilon));
        }
        if !(self.function_tolerance >= 0.0) {
            return fail(
                "function_tolerance",
                format!("{} is negative", self.function_tolerance),
            );
        }
        Ok(())
    }

    pub fn default_initial_guess(scenario: &Scenario) -> MultiplierPair {
        MultiplierPair::new(-1.5 * scenario.max_unit_loss(), 1.0)
    }

    pub fn project(&self, x: [f64; 2]) -> [f64; 2] {
        [
            self.lambda1_bounds.project(x[0]),
            self.lambda2_bounds.project(x[1]),
        ]
    }

    pub fn in_bounds(&self, m: MultiplierPair) -> bool {
        self.lambda1_bounds.contains(m.lambda1) && self.lambda2_bounds.contains(m.lambda2)
    }

    fn bounds(&self) -> [Interval; 2] {
        [self.lambda1_bounds, self.lambda2_bounds]
    }
}

/// Objective value split into its parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObjectiveTerms {
    pub f1: f64,
    pub f2: f64,
    pub pf_residual: f64,
    pub loss_residual: f64,
    pub constraint_penalty: f64,
    pub bound_penalty: f64,
}

impl ObjectiveTerms {
    pub fn penalty_total(&self) -> f64 {
        self.constraint_penalty + self.bound_penalty
    }

    pub fn total(&self) -> f64 {
        self.pf_residual * self.pf_residual
            + self.loss_residual * self.loss_residual
            + self.penalty_total()
    }
}

pub fn objective_terms(
    multipliers: MultiplierPair,
    scenario: &Scenario,
    options: &OptimizerOptions,
) -> ObjectiveTerms {
    let mut f1 = 0.0;
    let mut f2 = 0.0;
    let mut hinge = 0.0;
    let mut bound = 0.0;
    for (row, c) in scenario.stress().rows().zip(scenario.components()) {
        let rate = multipliers.rate(c.unit_loss);
        let violation = (rate + options.validity_margin).max(0.0);
        hinge += violation * violation;
        let mut row_sum = 0.0;
        for &p in row {
            let pf = (-1.0 - p * rate).exp();
            row_sum += p * pf;
            let below = (options.pf_floor - pf).max(0.0);
            let above = (pf - options.pf_ceiling).max(0.0);
            bound += below * below + above * above;
        }
        f1 += row_sum;
        f2 += c.unit_loss * row_sum;
    }
    ObjectiveTerms {
        f1,
        f2,
        pf_residual: f1 - scenario.pf_target(),
        loss_residual: f2 - scenario.loss_target(),
        constraint_penalty: options.constraint_penalty * hinge,
        bound_penalty: options.bound_penalty * bound,
    }
}

pub fn objective(
    multipliers: MultiplierPair,
    scenario: &Scenario,
    options: &OptimizerOptions,
) -> f64 {
    objective_terms(multipliers, scenario, options).total()
}

/// Forward-difference gradient of `f` at `x` with per-coordinate step
/// `eps * max(1, |x_k|)`. `fx` is `f(x)`, passed in to save an evaluation.
pub fn forward_difference(f: impl Fn([f64; 2]) -> f64, x: [f64; 2], fx: f64, eps: f64) -> [f64; 2] {
    let mut g = [0.0; 2];
    for k in 0..2 {
        let h = eps * x[k].abs().max(1.0);
        let mut xh = x;
        xh[k] += h;
        // the realized step differs from h by rounding
        let h = xh[k] - x[k];
        g[k] = (f(xh) - fx) / h;
    }
    g
}

pub fn gradient_fd(
    scenario: &Scenario,
    multipliers: MultiplierPair,
    options: &OptimizerOptions,
) -> [f64; 2] {
    let f = |x: [f64; 2]| objective(MultiplierPair::from_array(x), scenario, options);
    let x = multipliers.as_array();
    forward_difference(f, x, f(x), options.fd_epsilon)
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn mat_vec(h: &Matrix2, v: [f64; 2]) -> [f64; 2] {
    [
        h[0][0] * v[0] + h[0][1] * v[1],
        h[1][0] * v[0] + h[1][1] * v[1],
    ]
}

fn mat_mul(a: &Matrix2, b: &Matrix2) -> Matrix2 {
    let mut out = [[0.0; 2]; 2];
    for (r, row) in out.iter_mut().enumerate() {
        for (c, cell) in row.iter_mut().enumerate() {
            *cell = a[r][0] * b[0][c] + a[r][1] * b[1][c];
        }
    }
    out
}

/// BFGS update of the inverse Hessian,
/// `(I - rho s y^T) H (I - rho y s^T) + rho s s^T` with `rho = 1 / y.s`.
/// Returns `h_inv` unchanged when `y.s <= CURVATURE_FLOOR`.
pub fn bfgs_update(h_inv: &Matrix2, s: [f64; 2], y: [f64; 2]) -> Matrix2 {
    let ys = dot(y, s);
    if !(ys > CURVATURE_FLOOR) {
        return *h_inv;
    }
    let rho = 1.0 / ys;
    let left = [
        [1.0 - rho * s[0] * y[0], -rho * s[0] * y[1]],
        [-rho * s[1] * y[0], 1.0 - rho * s[1] * y[1]],
    ];
    let right = [
        [1.0 - rho * y[0] * s[0], -rho * y[0] * s[1]],
        [-rho * y[1] * s[0], 1.0 - rho * y[1] * s[1]],
    ];
    let mut out = mat_mul(&mat_mul(&left, h_inv), &right);
    for (r, row) in out.iter_mut().enumerate() {
        for (c, cell) in row.iter_mut().enumerate() {
            *cell += rho * s[r] * s[c];
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConvergenceReason {
    FunctionTolerance,
    MaxIterations,
    GradientVanished,
}

impl fmt::Display for ConvergenceReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConvergenceReason::FunctionTolerance => "FunctionTolerance",
            ConvergenceReason::MaxIterations => "MaxIterations",
            ConvergenceReason::GradientVanished => "GradientVanished",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizerRun {
    pub final_multipliers: MultiplierPair,
    pub final_objective: f64,
    /// `(F1 - PF, F2 - L)` at the final multipliers.
    pub target_residuals: (f64, f64),
    pub penalty_total: f64,
    pub iterations: usize,
    pub convergence_reason: ConvergenceReason,
    /// Objective at the starting point followed by one value per accepted step.
    pub objective_trace: Vec<f64>,
    /// Starting point followed by every accepted iterate.
    pub iterates: Vec<MultiplierPair>,
}

impl OptimizerRun {
    pub fn converged(&self) -> bool {
        self.convergence_reason != ConvergenceReason::MaxIterations
    }
}

/// Coordinates sitting on a bound with the gradient pushing outward.
fn active_set(x: [f64; 2], g: [f64; 2], bounds: &[Interval; 2]) -> [bool; 2] {
    let mut active = [false; 2];
    for k in 0..2 {
        let at_lower = x[k] <= bounds[k].finite_lower() && g[k] > 0.0;
        let at_upper = x[k] >= bounds[k].finite_upper() && g[k] < 0.0;
        active[k] = at_lower || at_upper;
    }
    active
}

fn search_direction(h: &Matrix2, g: [f64; 2], active: [bool; 2]) -> [f64; 2] {
    match active {
        [false, false] => {
            let hg = mat_vec(h, g);
            [-hg[0], -hg[1]]
        }
        // one free coordinate: scale by its diagonal entry, which stays
        // positive for a positive definite H
        [true, false] => [0.0, -h[1][1] * g[1]],
        [false, true] => [-h[0][0] * g[0], 0.0],
        [true, true] => [0.0, 0.0],
    }
}

struct Step {
    x: [f64; 2],
    f: f64,
}

fn line_search(
    f: &impl Fn([f64; 2]) -> f64,
    options: &OptimizerOptions,
    x: [f64; 2],
    fx: f64,
    g: [f64; 2],
    d: [f64; 2],
    initial_alpha: f64,
) -> Option<Step> {
    let mut alpha = initial_alpha;
    for _ in 0..=MAX_BACKTRACKS {
        let trial = options.project([x[0] + alpha * d[0], x[1] + alpha * d[1]]);
        let slope = dot(g, [trial[0] - x[0], trial[1] - x[1]]);
        if slope < 0.0 {
            let ft = f(trial);
            if ft <= fx + ARMIJO_C1 * slope && ft < fx {
                return Some(Step { x: trial, f: ft });
            }
        }
        alpha *= 0.5;
    }
    None
}

/// Minimizes the penalized objective over the multiplier box.
///
/// Every iterate lies in the box and every accepted step strictly decreases
/// the objective.
pub fn estimate_multipliers(
    scenario: &Scenario,
    options: &OptimizerOptions,
) -> Result<OptimizerRun> {
    options.validate()?;
    if scenario
        .stress()
        .rows()
        .all(|r| r.iter().all(|&p| p == 0.0))
    {
        return Err(Error::DegenerateScenario);
    }

    let f = |x: [f64; 2]| objective(MultiplierPair::from_array(x), scenario, options);
    let bounds = options.bounds();
    let start = options
        .initial_guess
        .unwrap_or_else(|| OptimizerOptions::default_initial_guess(scenario));
    let mut x = options.project(start.as_array());
    let mut fx = f(x);
    let mut g = forward_difference(f, x, fx, options.fd_epsilon);
    let mut h = IDENTITY;
    let mut h_is_identity = true;

    let mut trace = vec![fx];
    let mut iterates = vec![MultiplierPair::from_array(x)];
    let mut reason = ConvergenceReason::MaxIterations;

    while iterates.len() <= options.max_iterations {
        let active = active_set(x, g, &bounds);
        let projected = [
            if active[0] { 0.0 } else { g[0] },
            if active[1] { 0.0 } else { g[1] },
        ];
        if dot(projected, projected).sqrt() < options.gradient_tolerance {
            reason = ConvergenceReason::GradientVanished;
            break;
        }

        let mut d = search_direction(&h, g, active);
        if dot(g, d) >= 0.0 {
            h = IDENTITY;
            h_is_identity = true;
            d = [-projected[0], -projected[1]];
        }
        let unit_alpha = |d: [f64; 2]| (1.0 / dot(d, d).sqrt()).min(1.0);
        let alpha0 = if h_is_identity { unit_alpha(d) } else { 1.0 };

        let mut step = line_search(&f, options, x, fx, g, d, alpha0);
        if step.is_none() && !h_is_identity {
            // quasi-Newton direction failed; retry along steepest descent
            h = IDENTITY;
            h_is_identity = true;
            let d = [-projected[0], -projected[1]];
            step = line_search(&f, options, x, fx, g, d, unit_alpha(d));
        }
        let Some(step) = step else {
            log::debug!("line search made no progress at {x:?}, f = {fx}");
            reason = ConvergenceReason::FunctionTolerance;
            break;
        };

        let g_new = forward_difference(f, step.x, step.f, options.fd_epsilon);
        let s = [step.x[0] - x[0], step.x[1] - x[1]];
        let y = [g_new[0] - g[0], g_new[1] - g[1]];
        let ys = dot(y, s);
        if h_is_identity && ys > CURVATURE_FLOOR {
            // scale the initial inverse Hessian to the observed curvature
            let gamma = ys / dot(y, y);
            h = [[gamma, 0.0], [0.0, gamma]];
        }
        h = bfgs_update(&h, s, y);
        if ys > CURVATURE_FLOOR {
            h_is_identity = false;
        }

        let decrease = fx - step.f;
        x = step.x;
        fx = step.f;
        g = g_new;
        trace.push(fx);
        iterates.push(MultiplierPair::from_array(x));
        log::trace!(
            "iter {:3}: lambda = ({:.8}, {:.8}) f = {:.10e} decrease = {:.3e}",
            iterates.len() - 1,
            x[0],
            x[1],
            fx,
            decrease
        );

        if decrease.abs() < options.function_tolerance {
            reason = ConvergenceReason::FunctionTolerance;
            break;
        }
    }

    let final_multipliers = MultiplierPair::from_array(x);
    let terms = objective_terms(final_multipliers, scenario, options);
    log::info!(
        "optimizer stopped after {} iterations ({reason}): lambda1 = {}, lambda2 = {}, objective = {}",
        iterates.len() - 1,
        x[0],
        x[1],
        fx
    );
    Ok(OptimizerRun {
        final_multipliers,
        final_objective: fx,
        target_residuals: (terms.pf_residual, terms.loss_residual),
        penalty_total: terms.penalty_total(),
        iterations: iterates.len() - 1,
        convergence_reason: reason,
        objective_trace: trace,
        iterates,
    })
}
