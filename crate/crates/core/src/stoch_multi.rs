//! Several conditionally independent stations under a joint random rate.
//!
//! The QoS target is on the union event "the customer waits at some station":
//! `Σ_ω p^ω Π_i (1 − α_i(ω)) ≥ 1 − ε`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::CostFunction;
use crate::erlang::{erlang_c_exact, erlang_c_table, square_root_staffing, DelayModel};
use crate::error::{Result, StaffingError};
use crate::frontier::{check_epsilon, BETA_MAX};
use crate::scenario::JointScenarioSet;
use crate::search::{self, RootSettings};
use crate::stoch_single::{self, StochSolveReport};

/// Default cap on the number of key vectors tried by enumeration.
pub const DEFAULT_KEY_CAP: usize = 10_000;

const GOLDEN_TOL: f64 = 1e-10;
const GOLDEN_BUDGET: usize = 400;
const MAX_CYCLES: usize = 200;
const CYCLE_IMPROVEMENT: f64 = 1e-10;

fn check_prices(set: &JointScenarioSet, prices: &[f64]) -> Result<()> {
    if prices.len() != set.stations() {
        return Err(StaffingError::domain(
            "prices",
            format!("{} stations but {} prices", set.stations(), prices.len()),
        ));
    }
    if prices.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
        return Err(StaffingError::domain("prices", "every per-server price must be positive"));
    }
    Ok(())
}

fn check_counts(set: &JointScenarioSet, n: &[u64]) -> Result<()> {
    if n.len() != set.stations() {
        return Err(StaffingError::domain(
            "n",
            format!("{} stations but {} server counts", set.stations(), n.len()),
        ));
    }
    if n.contains(&0) {
        return Err(StaffingError::domain("n", "every station needs at least one server"));
    }
    Ok(())
}

/// Joint no-wait probability `Σ_ω p^ω Π_i (1 − α(n_i, Λ_i^ω))` with exact
/// Erlang-C; an unstable station contributes a zero factor.
pub fn joint_constraint_value(set: &JointScenarioSet, n: &[u64]) -> Result<f64> {
    check_counts(set, n)?;
    let mut alphas = Vec::with_capacity(set.stations());
    for (i, &ni) in n.iter().enumerate() {
        let per_level = set
            .levels(i)
            .iter()
            .map(|&r| if ni as f64 <= r { Ok(1.0) } else { Ok(erlang_c_exact(ni, r)?.value()) })
            .collect::<Result<Vec<f64>>>()?;
        alphas.push(per_level);
    }
    Ok(no_wait_from(set, |s, i| alphas[i][set.level_of(s, i)]))
}

fn no_wait_from(set: &JointScenarioSet, mut alpha: impl FnMut(usize, usize) -> f64) -> f64 {
    set.scenarios()
        .iter()
        .enumerate()
        .map(|(s, sc)| sc.probability * (0..set.stations()).map(|i| 1.0 - alpha(s, i)).product::<f64>())
        .sum()
}

/// Integer staffing with its cost and exact joint QoS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegerSolution {
    pub n: Vec<u64>,
    pub cost: f64,
    pub no_wait: f64,
    /// Probability of waiting at some station, `1 − no_wait`.
    pub union_wait: f64,
}

impl IntegerSolution {
    pub fn evaluate(set: &JointScenarioSet, prices: &[f64], n: Vec<u64>) -> Result<Self> {
        let no_wait = joint_constraint_value(set, &n)?;
        Ok(Self {
            cost: n.iter().zip(prices).map(|(&k, &c)| c * k as f64).sum(),
            n,
            no_wait,
            union_wait: 1.0 - no_wait,
        })
    }
}

/// Exact Erlang-C tables for every station and level up to a box bound.
struct ConstraintTables<'a> {
    set: &'a JointScenarioSet,
    tables: Vec<Vec<Vec<f64>>>,
}

impl<'a> ConstraintTables<'a> {
    fn new(set: &'a JointScenarioSet, hi: &[u64]) -> Result<Self> {
        let tables = (0..set.stations())
            .map(|i| set.levels(i).iter().map(|&r| erlang_c_table(hi[i], r)).collect())
            .collect::<Result<_>>()?;
        Ok(Self { set, tables })
    }

    fn value(&self, n: &[u64]) -> f64 {
        no_wait_from(self.set, |s, i| self.tables[i][self.set.level_of(s, i)][n[i] as usize])
    }
}

/// Minimum of `Σ c_i n_i` over integer staffing meeting the exact joint constraint.
///
/// The constraint is nondecreasing in every `n_i`, so the search runs over a
/// box: its upper corner is the decoupled staffing plus `3√n`, widened until
/// feasible, and each lower bound is the least `n_i` that works with all other
/// stations at the upper corner. The last coordinate is found by binary
/// search; the others are exhausted. Ties go to the lexicographically
/// smallest vector.
pub fn solve_joint_exact_integer(set: &JointScenarioSet, epsilon: f64, prices: &[f64]) -> Result<IntegerSolution> {
    check_epsilon(epsilon)?;
    check_prices(set, prices)?;
    let stations = set.stations();
    let target = 1.0 - epsilon;

    let start: Vec<u64> = match solve_decoupled(set, epsilon, &vec![CostFunction::default(); stations], DelayModel::Exact) {
        Ok(d) => d.n_ceiling,
        Err(_) => (0..stations).map(|i| set.levels(i).last().expect("non-empty").ceil() as u64 + 1).collect(),
    };
    let mut margin = 3.0;
    let hi = loop {
        let hi: Vec<u64> = start.iter().map(|&n| n + (margin * (n as f64).sqrt()).ceil() as u64).collect();
        if joint_constraint_value(set, &hi)? >= target {
            break hi;
        }
        margin *= 2.0;
        if margin > 1e4 {
            return Err(StaffingError::Infeasible(format!(
                "joint target {target} not reached within the search box {hi:?}"
            )));
        }
    };
    let tables = ConstraintTables::new(set, &hi)?;

    let mut lo = vec![1_u64; stations];
    for i in 0..stations {
        let mut probe = hi.clone();
        lo[i] = least_feasible(1, hi[i], |k| {
            probe[i] = k;
            tables.value(&probe) >= target
        });
    }

    let last = stations - 1;
    let prefixes = lattice(&lo[..last], &hi[..last]);
    let best = prefixes
        .into_par_iter()
        .filter_map(|prefix| {
            let mut n = prefix;
            n.push(hi[last]);
            if tables.value(&n) < target {
                return None;
            }
            n[last] = least_feasible(lo[last], hi[last], |k| {
                let mut m = n.clone();
                m[last] = k;
                tables.value(&m) >= target
            });
            let cost: f64 = n.iter().zip(prices).map(|(&k, &c)| c * k as f64).sum();
            Some((cost, n))
        })
        .min_by(|a, b| {
            if (a.0 - b.0).abs() <= 1e-9 * a.0.abs().max(1.0) {
                a.1.cmp(&b.1)
            } else {
                a.0.total_cmp(&b.0)
            }
        });
    let Some((_, n)) = best else {
        return Err(StaffingError::Infeasible(format!(
            "no staffing in the box {lo:?}..{hi:?} reaches the joint target {target}"
        )));
    };
    IntegerSolution::evaluate(set, prices, n)
}

/// Smallest `k` in `[lo, hi]` with `feasible(k)`, assuming monotonicity and
/// `feasible(hi)`.
fn least_feasible(mut lo: u64, mut hi: u64, mut feasible: impl FnMut(u64) -> bool) -> u64 {
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    hi
}

fn lattice(lo: &[u64], hi: &[u64]) -> Vec<Vec<u64>> {
    let mut points = vec![Vec::new()];
    for (&a, &b) in lo.iter().zip(hi) {
        points = points
            .into_iter()
            .flat_map(|p| {
                (a..=b).map(move |k| {
                    let mut q = p.clone();
                    q.push(k);
                    q
                })
            })
            .collect();
    }
    points
}

/// Per-station heuristic: every station meets `1 − (1 − ε)^{1/L}` on its own
/// marginal distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoupledSolution {
    pub per_station_epsilon: f64,
    pub stations: Vec<StochSolveReport>,
    pub betas: Vec<f64>,
    pub n_continuous: Vec<f64>,
    /// Head counts rounded to the nearest integer.
    pub n_integer: Vec<u64>,
    pub n_ceiling: Vec<u64>,
}

pub fn solve_decoupled(set: &JointScenarioSet, epsilon: f64, costs: &[CostFunction], model: DelayModel) -> Result<DecoupledSolution> {
    check_epsilon(epsilon)?;
    if costs.len() != set.stations() {
        return Err(StaffingError::domain("costs", "one cost function per station is required"));
    }
    let per_station_epsilon = 1.0 - (1.0 - epsilon).powf(1.0 / set.stations() as f64);
    let stations = (0..set.stations())
        .map(|i| stoch_single::solve_reduced(&set.marginal(i)?, per_station_epsilon, &costs[i], model))
        .collect::<Result<Vec<_>>>()?;
    Ok(DecoupledSolution {
        per_station_epsilon,
        betas: stations.iter().map(|r| r.decision.beta).collect(),
        n_continuous: stations.iter().map(|r| r.decision.n_continuous).collect(),
        n_integer: stations.iter().map(|r| r.decision.n_integer).collect(),
        n_ceiling: stations.iter().map(|r| r.decision.n_ceiling).collect(),
        stations,
    })
}

/// Reduced-model factor of station `i` in scenario `s` for a key vector:
/// `None` marks the key level, whose factor depends on `β_i`.
fn key_factor(set: &JointScenarioSet, key: &[usize], s: usize, i: usize) -> Option<f64> {
    let level = set.level_of(s, i);
    match level.cmp(&key[i]) {
        std::cmp::Ordering::Less => Some(1.0),
        std::cmp::Ordering::Greater => Some(0.0),
        std::cmp::Ordering::Equal => None,
    }
}

/// Reduced joint constraint `Σ_ω p^ω Π_i factor_i(ω)`, each factor being 1
/// below the key level, 0 above it and `1 − w(β_i, Λ_i^key)` at it.
pub fn reduced_constraint_value(set: &JointScenarioSet, key: &[usize], betas: &[f64], model: DelayModel) -> Result<f64> {
    check_key(set, key)?;
    if betas.len() != set.stations() {
        return Err(StaffingError::domain("betas", "one safety factor per station is required"));
    }
    let waits = (0..set.stations())
        .map(|i| model.eval(betas[i], set.levels(i)[key[i]]))
        .collect::<Result<Vec<f64>>>()?;
    Ok(reduced_with_waits(set, key, &waits))
}

fn reduced_with_waits(set: &JointScenarioSet, key: &[usize], waits: &[f64]) -> f64 {
    set.scenarios()
        .iter()
        .enumerate()
        .map(|(s, sc)| {
            let mut factor = sc.probability;
            for (i, w) in waits.iter().enumerate() {
                factor *= key_factor(set, key, s, i).unwrap_or(1.0 - w);
            }
            factor
        })
        .sum()
}

fn check_key(set: &JointScenarioSet, key: &[usize]) -> Result<()> {
    if key.len() != set.stations() {
        return Err(StaffingError::domain("key", "one key level per station is required"));
    }
    for (i, &k) in key.iter().enumerate() {
        if k >= set.levels(i).len() {
            return Err(StaffingError::domain("key", format!("station {i} has no level {k}")));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointDecision {
    pub betas: Vec<f64>,
    pub key: Vec<usize>,
    pub key_labels: Vec<String>,
    pub key_rates: Vec<f64>,
    pub n_continuous: Vec<f64>,
    /// Head counts rounded to the nearest integer.
    pub n_integer: Vec<u64>,
    pub n_ceiling: Vec<u64>,
    /// `Σ c_i β_i`, the quantity minimised for a fixed key.
    pub beta_cost: f64,
    /// `Σ c_i n_i` at the continuous head counts; used to rank keys.
    pub server_cost: f64,
    pub reduced_no_wait: f64,
    /// Exact joint no-wait probability at `n_integer`.
    pub achieved_no_wait: f64,
    /// The key's constant terms already meet the target with every `β_i = 0`.
    pub over_conservative: bool,
    pub bound_used: DelayModel,
    pub evaluations: usize,
}

struct ReducedProblem<'a> {
    set: &'a JointScenarioSet,
    key: &'a [usize],
    key_rates: Vec<f64>,
    model: DelayModel,
    target: f64,
    evaluations: std::cell::Cell<usize>,
}

impl ReducedProblem<'_> {
    fn value(&self, betas: &[f64]) -> Result<f64> {
        self.evaluations.set(self.evaluations.get() + 1);
        let waits = betas
            .iter()
            .zip(&self.key_rates)
            .map(|(&b, &r)| self.model.eval(b, r))
            .collect::<Result<Vec<f64>>>()?;
        Ok(reduced_with_waits(self.set, self.key, &waits))
    }

    /// Least `β_j` meeting the target with the other coordinates fixed, or
    /// `None` when even `BETA_MAX` is not enough.
    fn solve_coordinate(&self, betas: &[f64], j: usize) -> Result<Option<f64>> {
        let mut point = betas.to_vec();
        point[j] = 0.0;
        if self.value(&point)? >= self.target {
            return Ok(Some(0.0));
        }
        let deficit = |b: f64| -> Result<f64> {
            let mut p = betas.to_vec();
            p[j] = b;
            Ok(1.0 - self.value(&p)?)
        };
        match search::decreasing_root(deficit, 1.0 - self.target, &RootSettings::default()) {
            Ok(root) => Ok(Some(root.x)),
            Err(StaffingError::Bracket { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }
}

/// Reduced joint model for a fixed key vector: minimises `Σ c_i β_i` subject
/// to the reduced constraint, by coordinate descent along its boundary.
///
/// Each step moves one coordinate by golden section while a partner
/// coordinate is re-solved to keep the constraint active.
pub fn solve_reduced_joint(
    set: &JointScenarioSet,
    epsilon: f64,
    prices: &[f64],
    key: &[usize],
    model: DelayModel,
) -> Result<JointDecision> {
    check_epsilon(epsilon)?;
    check_prices(set, prices)?;
    check_key(set, key)?;
    let stations = set.stations();
    let target = 1.0 - epsilon;
    let problem = ReducedProblem {
        set,
        key,
        key_rates: (0..stations).map(|i| set.levels(i)[key[i]]).collect(),
        model,
        target,
        evaluations: std::cell::Cell::new(0),
    };

    let best_attainable = reduced_with_waits(set, key, &vec![0.0; stations]);
    if best_attainable < target {
        return Err(StaffingError::InfeasibleKey { key: key.to_vec(), best: best_attainable, target });
    }
    let at_zero = problem.value(&vec![0.0; stations])?;
    let over_conservative = at_zero >= target;

    let mut betas = vec![0.0; stations];
    if !over_conservative {
        let common = search::decreasing_root(
            |t| Ok(1.0 - problem.value(&vec![t; stations])?),
            epsilon,
            &RootSettings::default(),
        )
        .map_err(|e| match e {
            StaffingError::Bracket { .. } => {
                StaffingError::InfeasibleKey { key: key.to_vec(), best: best_attainable, target }
            }
            e => e,
        })?;
        betas = vec![common.x; stations];
        if stations == 1 {
            betas[0] = problem.solve_coordinate(&betas, 0)?.unwrap_or(common.x);
        }
    }

    let beta_cost = |b: &[f64]| b.iter().zip(prices).map(|(x, c)| x * c).sum::<f64>();
    let mut current = beta_cost(&betas);
    for _ in 0..MAX_CYCLES {
        if over_conservative || stations == 1 {
            break;
        }
        let start = current;
        for i in 0..stations {
            for j in (0..stations).filter(|&j| j != i) {
                let (lo, hi) = pair_range(&problem, &betas, i, j, prices)?;
                if hi <= lo {
                    continue;
                }
                let along = |x: f64| -> Result<f64> {
                    let mut p = betas.clone();
                    p[i] = x;
                    match problem.solve_coordinate(&p, j)? {
                        Some(bj) => {
                            p[j] = bj;
                            Ok(beta_cost(&p))
                        }
                        None => Ok(f64::MAX),
                    }
                };
                let min = search::golden_section(along, lo, hi, GOLDEN_TOL, GOLDEN_BUDGET)?;
                if min.value < current {
                    let mut p = betas.clone();
                    p[i] = min.x;
                    if let Some(bj) = problem.solve_coordinate(&p, j)? {
                        p[j] = bj;
                        betas = p;
                        current = beta_cost(&betas);
                    }
                }
            }
        }
        if start - current < CYCLE_IMPROVEMENT {
            break;
        }
    }

    let n_continuous: Vec<f64> = betas
        .iter()
        .zip(&problem.key_rates)
        .map(|(&b, &r)| square_root_staffing(b, r))
        .collect();
    let n_integer: Vec<u64> = n_continuous.iter().map(|n| n.round().max(1.0) as u64).collect();
    Ok(JointDecision {
        key_labels: (0..stations).map(|i| set.level_labels(i)[key[i]].clone()).collect(),
        key: key.to_vec(),
        key_rates: problem.key_rates.clone(),
        n_ceiling: n_continuous.iter().map(|n| n.ceil().max(1.0) as u64).collect(),
        server_cost: n_continuous.iter().zip(prices).map(|(n, c)| n * c).sum(),
        beta_cost: current,
        reduced_no_wait: problem.value(&betas)?,
        achieved_no_wait: joint_constraint_value(set, &n_integer)?,
        over_conservative,
        bound_used: model,
        evaluations: problem.evaluations.get(),
        n_continuous,
        n_integer,
        betas,
    })
}

/// Range of `β_i` along which the partner `β_j` can keep the constraint
/// active without the pair costing more than it does now.
fn pair_range(problem: &ReducedProblem<'_>, betas: &[f64], i: usize, j: usize, prices: &[f64]) -> Result<(f64, f64)> {
    let hi = (betas[i] + prices[j] * betas[j] / prices[i]).min(BETA_MAX);
    let mut with_j_max = betas.to_vec();
    with_j_max[j] = BETA_MAX;
    let lo = match problem.solve_coordinate(&with_j_max, i)? {
        Some(b) => b,
        None => return Ok((betas[i], betas[i])),
    };
    Ok((lo.min(betas[i]), hi))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyOutcome {
    pub key: Vec<usize>,
    pub decision: Option<JointDecision>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyEnumeration {
    pub best: JointDecision,
    pub outcomes: Vec<KeyOutcome>,
}

fn key_vectors(set: &JointScenarioSet, cap: usize) -> Result<Vec<Vec<usize>>> {
    let count = (0..set.stations()).try_fold(1_usize, |acc, i| acc.checked_mul(set.levels(i).len()));
    match count {
        Some(c) if c <= cap => {}
        other => {
            return Err(StaffingError::EnumerationCap { candidates: other.unwrap_or(usize::MAX), cap });
        }
    }
    let lo = vec![0; set.stations()];
    let hi: Vec<u64> = (0..set.stations()).map(|i| set.levels(i).len() as u64 - 1).collect();
    Ok(lattice(&lo, &hi)
        .into_iter()
        .map(|v| v.into_iter().map(|k| k as usize).collect())
        .collect())
}

/// Runs [`solve_reduced_joint`] for every key vector and keeps the one with
/// the smallest server cost; ties go to the lexicographically first key.
pub fn enumerate_key_scenarios(
    set: &JointScenarioSet,
    epsilon: f64,
    prices: &[f64],
    model: DelayModel,
    cap: usize,
) -> Result<KeyEnumeration> {
    check_epsilon(epsilon)?;
    check_prices(set, prices)?;
    let keys = key_vectors(set, cap)?;
    let outcomes: Vec<KeyOutcome> = keys
        .into_par_iter()
        .map(|key| match solve_reduced_joint(set, epsilon, prices, &key, model) {
            Ok(d) => KeyOutcome { key, decision: Some(d), error: None },
            Err(e) => KeyOutcome { key, decision: None, error: Some(e.to_string()) },
        })
        .collect();
    let best = outcomes
        .iter()
        .filter_map(|o| o.decision.as_ref())
        .fold(None::<&JointDecision>, |best, d| match best {
            Some(b) if b.server_cost <= d.server_cost * (1.0 + 1e-9) => Some(b),
            _ => Some(d),
        })
        .cloned();
    let Some(best) = best else {
        return Err(StaffingError::Infeasible(format!("every key vector is infeasible for epsilon = {epsilon}")));
    };
    Ok(KeyEnumeration { best, outcomes })
}

/// Weighted model for a fixed key and safety factors:
/// `Σ c_i(β_i, Λ_i^key) + δ (1 − Σ_ω p^ω Π_i (1 − w(n_i, Λ_i^ω)))`.
pub fn weighted_objective(
    set: &JointScenarioSet,
    delta: f64,
    costs: &[CostFunction],
    key: &[usize],
    betas: &[f64],
    model: DelayModel,
) -> Result<f64> {
    check_key(set, key)?;
    if betas.len() != set.stations() || costs.len() != set.stations() {
        return Err(StaffingError::domain("betas", "one safety factor and cost per station is required"));
    }
    let stations = set.stations();
    let mut waits = Vec::with_capacity(stations);
    let mut cost = 0.0;
    for i in 0..stations {
        let rate = set.levels(i)[key[i]];
        let n = square_root_staffing(betas[i], rate);
        cost += costs[i].eval(betas[i], rate);
        waits.push(
            set.levels(i)
                .iter()
                .map(|&r| model.eval_servers(n, r))
                .collect::<Result<Vec<f64>>>()?,
        );
    }
    let no_wait = no_wait_from(set, |s, i| waits[i][set.level_of(s, i)]);
    Ok(cost + delta * (1.0 - no_wait))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedStochDecision {
    pub key: Vec<usize>,
    pub betas: Vec<f64>,
    pub n_continuous: Vec<f64>,
    pub objective: f64,
    pub bound_used: DelayModel,
    pub cycles: usize,
    pub converged: bool,
}

/// Minimises the weighted objective over safety factors and key vectors.
///
/// For each key, cyclic coordinate descent with a golden-section search per
/// station; the best key wins, ties to the lexicographically first.
pub fn solve_weighted_stoch(
    set: &JointScenarioSet,
    delta: f64,
    costs: &[CostFunction],
    model: DelayModel,
) -> Result<WeightedStochDecision> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(StaffingError::domain("delta", format!("must be positive, got {delta}")));
    }
    if costs.len() != set.stations() {
        return Err(StaffingError::domain("costs", "one cost function per station is required"));
    }
    for c in costs {
        c.validate()?;
    }
    let keys = key_vectors(set, DEFAULT_KEY_CAP)?;
    let results = keys
        .into_par_iter()
        .map(|key| weighted_for_key(set, delta, costs, &key, model))
        .collect::<Result<Vec<_>>>()?;
    Ok(results
        .into_iter()
        .reduce(|best, d| if d.objective < best.objective - 1e-12 { d } else { best })
        .expect("at least one key vector"))
}

fn weighted_for_key(
    set: &JointScenarioSet,
    delta: f64,
    costs: &[CostFunction],
    key: &[usize],
    model: DelayModel,
) -> Result<WeightedStochDecision> {
    let stations = set.stations();
    let mut betas = vec![0.0; stations];
    let mut current = weighted_objective(set, delta, costs, key, &betas, model)?;
    let mut cycles = 0;
    let mut converged = false;
    while cycles < MAX_CYCLES {
        cycles += 1;
        let start = current;
        for i in 0..stations {
            let rate = set.levels(i)[key[i]];
            let upper = costs[i].beta_for_increment(delta, rate).min(BETA_MAX);
            let slice = |b: f64| {
                let mut p = betas.clone();
                p[i] = b;
                weighted_objective(set, delta, costs, key, &p, model)
            };
            let min = search::golden_section(slice, 0.0, upper, GOLDEN_TOL, GOLDEN_BUDGET)?;
            if min.value < current {
                betas[i] = min.x;
                current = min.value;
            }
        }
        if start - current < CYCLE_IMPROVEMENT {
            converged = true;
            break;
        }
    }
    Ok(WeightedStochDecision {
        key: key.to_vec(),
        n_continuous: (0..stations)
            .map(|i| square_root_staffing(betas[i], set.levels(i)[key[i]]))
            .collect(),
        betas,
        objective: current,
        bound_used: model,
        cycles,
        converged,
    })
}

/// Side-by-side joint, reduced and decoupled staffing with exact QoS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub epsilon: f64,
    pub prices: Vec<f64>,
    pub joint_solution: IntegerSolution,
    pub reduced_solution: Option<IntegerSolution>,
    pub reduced_decision: Option<JointDecision>,
    pub reduced_error: Option<String>,
    pub decoupled_solution: IntegerSolution,
    pub decoupled_decision: DecoupledSolution,
    /// Decoupled cost over joint cost.
    pub cost_ratio: f64,
}

pub fn compare(set: &JointScenarioSet, epsilon: f64, prices: &[f64], model: DelayModel) -> Result<ComparisonReport> {
    check_epsilon(epsilon)?;
    check_prices(set, prices)?;
    let costs: Vec<CostFunction> = prices.iter().map(|&c| CostFunction::linear_in_servers(c)).collect();
    let joint = solve_joint_exact_integer(set, epsilon, prices)?;
    let decoupled = solve_decoupled(set, epsilon, &costs, model)?;
    let decoupled_solution = IntegerSolution::evaluate(set, prices, decoupled.n_integer.clone())?;
    let (reduced_solution, reduced_decision, reduced_error) =
        match enumerate_key_scenarios(set, epsilon, prices, model, DEFAULT_KEY_CAP) {
            Ok(e) => (
                Some(IntegerSolution::evaluate(set, prices, e.best.n_integer.clone())?),
                Some(e.best),
                None,
            ),
            Err(e) => (None, None, Some(e.to_string())),
        };
    Ok(ComparisonReport {
        epsilon,
        prices: prices.to_vec(),
        cost_ratio: decoupled_solution.cost / joint.cost,
        joint_solution: joint,
        reduced_solution,
        reduced_decision,
        reduced_error,
        decoupled_solution,
        decoupled_decision: decoupled,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{JointScenario, ScenarioSet};
    use approx::assert_relative_eq;

    fn two_by_two() -> JointScenarioSet {
        let a = ScenarioSet::new(vec![40.0, 60.0], vec![0.7, 0.3]).unwrap();
        let b = ScenarioSet::new(vec![20.0, 30.0], vec![0.8, 0.2]).unwrap();
        JointScenarioSet::independent(&[a, b]).unwrap()
    }

    #[test]
    fn constraint_single_station() {
        let set = JointScenarioSet::deterministic(vec![50.0]).unwrap();
        let v = joint_constraint_value(&set, &[60]).unwrap();
        assert_relative_eq!(v, 1.0 - erlang_c_exact(60, 50.0).unwrap().value(), epsilon = 1e-15);
        assert_eq!(joint_constraint_value(&set, &[50]).unwrap(), 0.0);
        assert!(joint_constraint_value(&set, &[0]).is_err());
    }

    #[test]
    fn constraint_matches_inclusion_exclusion() {
        let set = two_by_two();
        let n = [70_u64, 35];
        let mut union = 0.0;
        for sc in set.scenarios() {
            let a = erlang_c_exact(n[0], sc.rates[0]).unwrap().value();
            let b = erlang_c_exact(n[1], sc.rates[1]).unwrap().value();
            union += sc.probability * (a + b - a * b);
        }
        assert_relative_eq!(joint_constraint_value(&set, &n).unwrap(), 1.0 - union, epsilon = 1e-14);
    }

    #[test]
    fn integer_search_is_minimal() {
        let set = two_by_two();
        let eps = 0.1;
        let prices = [2.0, 1.0];
        let sol = solve_joint_exact_integer(&set, eps, &prices).unwrap();
        assert!(sol.no_wait >= 1.0 - eps);
        // Brute force over a generous box.
        let mut best = f64::INFINITY;
        for n1 in 40..120 {
            for n2 in 20..80 {
                if joint_constraint_value(&set, &[n1, n2]).unwrap() >= 1.0 - eps {
                    best = best.min(2.0 * n1 as f64 + n2 as f64);
                }
            }
        }
        assert_eq!(sol.cost, best);
    }

    #[test]
    fn epsilon_near_one_gives_minimal_stable_staffing() {
        let set = two_by_two();
        let sol = solve_joint_exact_integer(&set, 1.0 - 1e-12, &[1.0, 1.0]).unwrap();
        assert!(sol.n[0] <= 41 && sol.n[1] <= 21);
    }

    #[test]
    fn reduced_factor_rule() {
        let set = two_by_two();
        let key = [1, 0];
        for s in 0..set.scenarios().len() {
            for i in 0..2 {
                let f = key_factor(&set, &key, s, i);
                let level = set.level_of(s, i);
                match f {
                    Some(v) => assert_eq!(v, if level < key[i] { 1.0 } else { 0.0 }),
                    None => assert_eq!(level, key[i]),
                }
            }
        }
    }

    #[test]
    fn reduced_joint_is_active_and_optimal_on_a_line() {
        let set = two_by_two();
        let eps = 0.25;
        let prices = [1.0, 1.0];
        let d = solve_reduced_joint(&set, eps, &prices, &[1, 0], DelayModel::Exact).unwrap();
        assert!((d.reduced_no_wait - (1.0 - eps)).abs() < 1e-8);
        // Moving along the boundary never lowers the cost.
        let problem_cost = |b1: f64| -> Option<f64> {
            let r = search::decreasing_root(
                |b2| Ok(1.0 - reduced_constraint_value(&set, &[1, 0], &[b1, b2], DelayModel::Exact)?),
                eps,
                &RootSettings::default(),
            )
            .ok()?;
            Some(b1 + r.x)
        };
        for db in [-0.05, 0.05] {
            if let Some(c) = problem_cost(d.betas[0] + db) {
                assert!(c >= d.beta_cost - 1e-7);
            }
        }
    }

    #[test]
    fn infeasible_key_is_reported() {
        let set = two_by_two();
        let err = solve_reduced_joint(&set, 0.05, &[1.0, 1.0], &[0, 0], DelayModel::Exact).unwrap_err();
        assert!(matches!(err, StaffingError::InfeasibleKey { .. }));
    }

    #[test]
    fn over_conservative_key_is_flagged() {
        let set = JointScenarioSet::new(vec![
            JointScenario { rates: vec![10.0], probability: 0.9, labels: None },
            JointScenario { rates: vec![20.0], probability: 0.1, labels: None },
        ])
        .unwrap();
        let d = solve_reduced_joint(&set, 0.5, &[1.0], &[1], DelayModel::Exact).unwrap();
        assert!(d.over_conservative);
        assert_eq!(d.betas, vec![0.0]);
    }

    #[test]
    fn decoupled_single_station_is_reduced_model() {
        let set = JointScenarioSet::deterministic(vec![100.0]).unwrap();
        let d = solve_decoupled(&set, 0.1, &[CostFunction::default()], DelayModel::Exact).unwrap();
        assert_relative_eq!(d.per_station_epsilon, 0.1, epsilon = 1e-15);
        let s = stoch_single::solve_reduced(&set.marginal(0).unwrap(), 0.1, &CostFunction::default(), DelayModel::Exact).unwrap();
        assert_eq!(d.betas[0], s.decision.beta);
    }

    #[test]
    fn weighted_single_scenario_matches_deterministic() {
        let set = JointScenarioSet::deterministic(vec![100.0]).unwrap();
        let cost = CostFunction::linear_in_beta(1.0);
        let w = solve_weighted_stoch(&set, 20.0, &[cost.clone()], DelayModel::Exact).unwrap();
        let d = crate::frontier::solve_weighted(100.0, 20.0, &cost, DelayModel::Exact).unwrap();
        assert_relative_eq!(w.betas[0], d.beta, epsilon = 1e-7);
        assert_relative_eq!(w.objective, d.objective, epsilon = 1e-10);
    }

    #[test]
    fn key_cap() {
        let set = two_by_two();
        assert!(matches!(
            enumerate_key_scenarios(&set, 0.1, &[1.0, 1.0], DelayModel::Exact, 3),
            Err(StaffingError::EnumerationCap { candidates: 4, cap: 3 })
        ));
    }
}
