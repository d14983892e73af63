//! One station facing a random arrival rate.
//!
//! A nonanticipative staffing fixes a safety factor `β` and a key scenario
//! before the rate is realised; the head count `n = Λ_key + β√Λ_key` is then
//! used in every scenario.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::CostFunction;
use crate::erlang::{erlang_c_exact, square_root_staffing, wait_probability, DelayModel};
use crate::error::{Result, StaffingError};
use crate::frontier::{beta_for_target, check_epsilon};
use crate::scenario::ScenarioSet;
use crate::search::{self, RootSettings};

/// Tail sums closer than this to `ε` count as ties.
pub const KEY_TIE_TOL: f64 = 1e-12;

/// Slack below which a solution is reported as violating the full constraint.
const FEASIBILITY_TOL: f64 = 1e-9;

/// Index of the key scenario: the `i` with `Σ_{k≥i} p_k ≥ ε > Σ_{k>i} p_k`.
pub fn select_key_scenario(scenarios: &ScenarioSet, epsilon: f64) -> Result<usize> {
    check_epsilon(epsilon)?;
    for i in 1..scenarios.len() {
        let tail = scenarios.tail_sum(i);
        if (tail - epsilon).abs() <= KEY_TIE_TOL {
            return Err(StaffingError::KeyBoundary { tail, epsilon });
        }
    }
    Ok((0..scenarios.len())
        .rev()
        .find(|&i| scenarios.tail_sum(i) >= epsilon)
        .unwrap_or(0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaffingDecision {
    pub beta: f64,
    pub key_index: usize,
    pub key_rate: f64,
    pub n_continuous: f64,
    /// `n_continuous` rounded to the nearest integer.
    pub n_integer: u64,
    /// Smallest integer at or above `n_continuous`.
    pub n_ceiling: u64,
}

impl StaffingDecision {
    pub fn new(beta: f64, key_index: usize, key_rate: f64) -> Self {
        let n = square_root_staffing(beta, key_rate);
        Self {
            beta,
            key_index,
            key_rate,
            n_continuous: n,
            n_integer: n.round() as u64,
            n_ceiling: n.ceil() as u64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMethod {
    Reduced,
    ExactEnumeration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochSolveReport {
    pub decision: StaffingDecision,
    /// `Σ p^ω ᾱ(n, Λ^ω)` at the continuous head count.
    pub expected_wait: f64,
    pub objective: f64,
    pub method: SolveMethod,
    pub bound_used: DelayModel,
    /// `ε − expected_wait`; negative when the full constraint is violated.
    pub slack: f64,
    pub warning: Option<String>,
}

/// Expected delay probability with `n` servers (real-valued) over all scenarios.
pub fn expected_wait(scenarios: &ScenarioSet, n: f64) -> Result<f64> {
    scenarios
        .rates()
        .iter()
        .zip(scenarios.probs())
        .map(|(&r, &p)| Ok(p * wait_probability(n, r)?))
        .sum()
}

/// Expected delay probability with an integer head count, via exact Erlang-C.
pub fn expected_wait_integer(scenarios: &ScenarioSet, n: u64) -> Result<f64> {
    scenarios
        .rates()
        .iter()
        .zip(scenarios.probs())
        .map(|(&r, &p)| {
            let w = if (n as f64) <= r { 1.0 } else { erlang_c_exact(n, r)?.value() };
            Ok(p * w)
        })
        .sum()
}

fn report(
    scenarios: &ScenarioSet,
    epsilon: f64,
    decision: StaffingDecision,
    objective: f64,
    method: SolveMethod,
    model: DelayModel,
) -> Result<StochSolveReport> {
    let expected = expected_wait(scenarios, decision.n_continuous)?;
    let slack = epsilon - expected;
    let warning = (slack < -FEASIBILITY_TOL).then(|| {
        format!("staffing violates the full constraint: expected wait {expected:.6} exceeds epsilon {epsilon} by {:.3e}", -slack)
    });
    Ok(StochSolveReport {
        decision,
        expected_wait: expected,
        objective,
        method,
        bound_used: model,
        slack,
        warning,
    })
}

/// Reduced model: only the key scenario's delay probability is kept, all
/// higher-rate scenarios count as always waiting and lower ones as never.
///
/// Solves `p_key · w(β, Λ_key) = ε − Σ_{k>key} p_k`.
pub fn solve_reduced(scenarios: &ScenarioSet, epsilon: f64, cost: &CostFunction, model: DelayModel) -> Result<StochSolveReport> {
    cost.validate()?;
    let key = select_key_scenario(scenarios, epsilon)?;
    let rhs = epsilon - scenarios.tail_sum(key + 1);
    let p_key = scenarios.probs()[key];
    let rate = scenarios.rates()[key];
    let root = beta_for_target(rate, rhs / p_key, model)?;
    let decision = StaffingDecision::new(root.x, key, rate);
    report(scenarios, epsilon, decision, cost.eval(root.x, rate), SolveMethod::Reduced, model)
}

/// Outcome of one key candidate in [`solve_exact_enumeration_detailed`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyCandidate {
    pub key_index: usize,
    pub beta: Option<f64>,
    pub cost: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnumerationOutcome {
    pub best: StochSolveReport,
    pub candidates: Vec<KeyCandidate>,
}

/// Ground truth for the full model: every scenario is tried as the key and the
/// cheapest feasible `(β, key)` wins.
pub fn solve_exact_enumeration(scenarios: &ScenarioSet, epsilon: f64, cost: &CostFunction) -> Result<StochSolveReport> {
    solve_exact_enumeration_detailed(scenarios, epsilon, cost).map(|o| o.best)
}

/// As [`solve_exact_enumeration`], also returning every candidate.
///
/// Ties in cost (relative 1e-9) go to the smaller `β`, then the lower index.
/// With a head-count cost several keys describe the same staffing, and the
/// smallest `β` names the scenario whose rate sits just below `n`.
pub fn solve_exact_enumeration_detailed(scenarios: &ScenarioSet, epsilon: f64, cost: &CostFunction) -> Result<EnumerationOutcome> {
    check_epsilon(epsilon)?;
    cost.validate()?;
    let results: Vec<(usize, Result<search::Root>)> = (0..scenarios.len())
        .into_par_iter()
        .map(|k| {
            let rate = scenarios.rates()[k];
            let constraint = |b: f64| expected_wait(scenarios, square_root_staffing(b, rate));
            (k, search::decreasing_root(constraint, epsilon, &RootSettings::default()))
        })
        .collect();

    let mut candidates = Vec::with_capacity(results.len());
    let mut best: Option<(usize, f64, f64)> = None;
    for (k, r) in results {
        let rate = scenarios.rates()[k];
        match r {
            Ok(root) => {
                let c = cost.eval(root.x, rate);
                let better = match best {
                    None => true,
                    Some((_, bb, bc)) => {
                        let scale = c.abs().max(bc.abs()).max(1.0);
                        if (c - bc).abs() <= 1e-9 * scale {
                            root.x < bb
                        } else {
                            c < bc
                        }
                    }
                };
                if better {
                    best = Some((k, root.x, c));
                }
                candidates.push(KeyCandidate { key_index: k, beta: Some(root.x), cost: Some(c), error: None });
            }
            Err(e) => candidates.push(KeyCandidate { key_index: k, beta: None, cost: None, error: Some(e.to_string()) }),
        }
    }
    let Some((k, beta, c)) = best else {
        return Err(StaffingError::Infeasible(format!(
            "no key scenario admits a safety factor meeting epsilon = {epsilon}"
        )));
    };
    let decision = StaffingDecision::new(beta, k, scenarios.rates()[k]);
    let best = report(scenarios, epsilon, decision, c, SolveMethod::ExactEnumeration, DelayModel::Exact)?;
    Ok(EnumerationOutcome { best, candidates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontier::solve_constrained;
    use approx::assert_relative_eq;

    fn queue1() -> ScenarioSet {
        ScenarioSet::new(vec![350.0, 450.0], vec![0.66, 0.34]).unwrap()
    }

    fn queue2() -> ScenarioSet {
        ScenarioSet::new(vec![150.0, 200.0, 300.0], vec![0.58, 0.38, 0.04]).unwrap()
    }

    fn per_station_eps() -> f64 {
        1.0 - 0.95_f64.sqrt()
    }

    #[test]
    fn key_selection_example() {
        assert_eq!(select_key_scenario(&queue1(), per_station_eps()).unwrap(), 1);
        assert_eq!(select_key_scenario(&queue2(), per_station_eps()).unwrap(), 2);
        assert_eq!(select_key_scenario(&ScenarioSet::single(5.0).unwrap(), 0.3).unwrap(), 0);
        assert_eq!(select_key_scenario(&queue2(), 0.1).unwrap(), 1);
        assert_eq!(select_key_scenario(&queue2(), 0.9).unwrap(), 0);
    }

    #[test]
    fn key_tie_is_an_error() {
        let s = ScenarioSet::new(vec![1.0, 2.0], vec![0.75, 0.25]).unwrap();
        assert!(matches!(select_key_scenario(&s, 0.25), Err(StaffingError::KeyBoundary { .. })));
    }

    #[test]
    fn reduced_rhs_inside_key_mass() {
        let s = queue2();
        for eps in [0.01, 0.03, 0.1, 0.3, 0.5, 0.9] {
            let k = select_key_scenario(&s, eps).unwrap();
            let rhs = eps - s.tail_sum(k + 1);
            assert!(rhs > 0.0 && rhs <= s.probs()[k]);
        }
    }

    #[test]
    fn decoupled_betas() {
        let c = CostFunction::linear_in_servers(1.0);
        let r1 = solve_reduced(&queue1(), per_station_eps(), &c, DelayModel::Exact).unwrap();
        assert!((r1.decision.beta - 1.6).abs() < 0.05);
        let r2 = solve_reduced(&queue2(), per_station_eps(), &c, DelayModel::Exact).unwrap();
        assert!((r2.decision.beta - 0.36).abs() < 0.05);
        assert_eq!(r2.decision.n_integer, 306);
    }

    #[test]
    fn single_scenario_matches_deterministic() {
        let s = ScenarioSet::single(200.0).unwrap();
        let c = CostFunction::default();
        let det = solve_constrained(200.0, 0.1, &c, DelayModel::Exact).unwrap();
        let red = solve_reduced(&s, 0.1, &c, DelayModel::Exact).unwrap();
        let ex = solve_exact_enumeration(&s, 0.1, &c).unwrap();
        assert_relative_eq!(red.decision.beta, det.beta, epsilon = 1e-12);
        assert_relative_eq!(ex.decision.beta, det.beta, epsilon = 1e-9);
        assert!(ex.slack >= -1e-9);
    }

    #[test]
    fn enumeration_is_feasible_and_no_worse() {
        let s = queue2();
        let c = CostFunction::linear_in_servers(1.0);
        for eps in [0.02, 0.1, 0.3] {
            let ex = solve_exact_enumeration(&s, eps, &c).unwrap();
            assert!(ex.expected_wait <= eps + 1e-9);
            let red = solve_reduced(&s, eps, &c, DelayModel::Upper).unwrap();
            if red.slack >= 0.0 {
                assert!(ex.objective <= red.objective + 1e-9);
            }
        }
    }

    /// Giving every scenario its own head count `Λ^ω + β√Λ^ω` meets the
    /// constraint, but the staffing then depends on the realised rate.
    #[test]
    fn scenario_dependent_staffing_is_anticipative() {
        let s = queue2();
        let eps = 0.05;
        let g = |b: f64| -> Result<f64> {
            s.rates().iter().zip(s.probs()).map(|(&r, &p)| Ok(p * DelayModel::Exact.eval(b, r)?)).sum()
        };
        let root = search::decreasing_root(g, eps, &RootSettings::default()).unwrap();
        let counts: Vec<f64> = s.rates().iter().map(|&r| square_root_staffing(root.x, r)).collect();
        assert!(counts.windows(2).all(|w| w[1] > w[0] + 1.0));
        // A single head count cannot reproduce all of them.
        let fixed = StaffingDecision::new(root.x, 1, s.rates()[1]);
        assert!(counts.iter().any(|&n| (n - fixed.n_continuous).abs() > 1.0));
    }

    #[test]
    fn integer_expected_wait_matches_continuous() {
        let s = queue1();
        for n in [400_u64, 451, 480, 500] {
            assert_relative_eq!(
                expected_wait_integer(&s, n).unwrap(),
                expected_wait(&s, n as f64).unwrap(),
                max_relative = 1e-8
            );
        }
    }
}
