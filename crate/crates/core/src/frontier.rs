//! Single-station deterministic staffing: the constrained model, its bound
//! approximations, the weighted model and efficient-frontier sweeps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::CostFunction;
use crate::erlang::{square_root_staffing, DelayModel};
use crate::error::{Result, StaffingError};
use crate::search::{self, RootSettings};

/// Largest safety factor any solver will consider.
pub const BETA_MAX: f64 = 64.0;

const GOLDEN_TOL: f64 = 1e-10;
const GOLDEN_BUDGET: usize = 400;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub beta: f64,
    pub n_servers: f64,
    pub objective: f64,
    pub bound_used: DelayModel,
    /// Delay probability under `bound_used` at `beta`.
    pub wait_prob: f64,
    pub evaluations: usize,
    pub converged: bool,
    /// Constraint value minus its target (zero for weighted solves).
    pub residual: f64,
}

pub(crate) fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon < 1.0 {
        Ok(())
    } else {
        Err(StaffingError::domain("epsilon", format!("must lie strictly between 0 and 1, got {epsilon}")))
    }
}

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda > 0.0 {
        Ok(())
    } else {
        Err(StaffingError::domain("lambda", format!("must be positive and finite, got {lambda}")))
    }
}

/// Smallest `β` whose delay probability under `model` is at most `target`.
///
/// Every delay model here is strictly decreasing in `β`, so the optimum of
/// `min c(β) s.t. w(β) ≤ target` makes the constraint active.
pub(crate) fn beta_for_target(lambda: f64, target: f64, model: DelayModel) -> Result<search::Root> {
    search::decreasing_root(|b| model.eval(b, lambda), target, &RootSettings::default())
}

/// Minimum-cost `β` with delay probability at most `epsilon`.
///
/// With `DelayModel::Upper` the answer is conservative: it is feasible for the
/// exact constraint as well.
pub fn solve_constrained(lambda: f64, epsilon: f64, cost: &CostFunction, model: DelayModel) -> Result<SolveReport> {
    check_lambda(lambda)?;
    check_epsilon(epsilon)?;
    cost.validate()?;
    let root = beta_for_target(lambda, epsilon, model)?;
    Ok(SolveReport {
        beta: root.x,
        n_servers: square_root_staffing(root.x, lambda),
        objective: cost.eval(root.x, lambda),
        bound_used: model,
        wait_prob: epsilon + root.residual,
        evaluations: root.evaluations,
        converged: root.converged,
        residual: root.residual,
    })
}

/// Minimises `c(β) + δ w(β)` over `β ≥ 0`.
pub fn solve_weighted(lambda: f64, delta: f64, cost: &CostFunction, model: DelayModel) -> Result<SolveReport> {
    check_lambda(lambda)?;
    if !(delta.is_finite() && delta > 0.0) {
        return Err(StaffingError::domain("delta", format!("must be positive, got {delta}")));
    }
    cost.validate()?;
    // Past this point the cost increase alone outweighs any QoS gain.
    let upper = cost.beta_for_increment(delta, lambda).min(BETA_MAX);
    let objective = |b: f64| -> Result<f64> { Ok(cost.eval(b, lambda) + delta * model.eval(b, lambda)?) };
    let min = search::golden_section(objective, 0.0, upper, GOLDEN_TOL, GOLDEN_BUDGET)?;
    Ok(SolveReport {
        beta: min.x,
        n_servers: square_root_staffing(min.x, lambda),
        objective: min.value,
        bound_used: model,
        wait_prob: model.eval(min.x, lambda)?,
        evaluations: min.evaluations,
        converged: true,
        residual: 0.0,
    })
}

/// One point of the cost / delay trade-off curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub epsilon: f64,
    pub beta: f64,
    pub n_continuous: f64,
    /// Smallest integer head count at or above `n_continuous`.
    pub n_integer: u64,
    pub cost: f64,
    pub wait_prob_exact: f64,
    pub wait_prob_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierFailure {
    pub epsilon: f64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierSweep {
    pub bound_used: DelayModel,
    pub points: Vec<FrontierPoint>,
    pub failures: Vec<FrontierFailure>,
}

fn frontier_point(lambda: f64, epsilon: f64, cost: &CostFunction, model: DelayModel) -> Result<FrontierPoint> {
    let report = solve_constrained(lambda, epsilon, cost, model)?;
    let n = report.n_servers;
    Ok(FrontierPoint {
        epsilon,
        beta: report.beta,
        n_continuous: n,
        n_integer: n.ceil() as u64,
        cost: report.objective,
        wait_prob_exact: DelayModel::Exact.eval(report.beta, lambda)?,
        wait_prob_bound: report.wait_prob,
    })
}

/// Solves the constrained model for every `epsilon` in the grid.
///
/// Points are evaluated in parallel and returned in grid order; a failing
/// point is recorded and the sweep carries on.
pub fn sweep_frontier(lambda: f64, epsilons: &[f64], cost: &CostFunction, model: DelayModel) -> Result<FrontierSweep> {
    check_lambda(lambda)?;
    cost.validate()?;
    if epsilons.is_empty() {
        return Err(StaffingError::validation("/epsilons", "epsilon grid is empty"));
    }
    for (i, &eps) in epsilons.iter().enumerate() {
        check_epsilon(eps).map_err(|e| StaffingError::validation(format!("/epsilons/{i}"), e.to_string()))?;
        if i > 0 && eps <= epsilons[i - 1] {
            return Err(StaffingError::validation(format!("/epsilons/{i}"), "grid must be strictly increasing"));
        }
    }
    let results: Vec<_> = epsilons
        .par_iter()
        .map(|&eps| (eps, frontier_point(lambda, eps, cost, model)))
        .collect();
    let mut points = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (epsilon, r) in results {
        match r {
            Ok(p) => points.push(p),
            Err(e) => failures.push(FrontierFailure { epsilon, error: e.to_string() }),
        }
    }
    Ok(FrontierSweep { bound_used: model, points, failures })
}
