//! Multi-station deterministic weighted model, solved by cyclic coordinate
//! descent with a golden-section line search per station.

use serde::{Deserialize, Serialize};

use crate::cost::CostFunction;
use crate::erlang::{square_root_staffing, DelayModel};
use crate::error::{Result, StaffingError};
use crate::frontier::{self, check_lambda, BETA_MAX};
use crate::search;

const CYCLE_IMPROVEMENT: f64 = 1e-9;
const MAX_CYCLES: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiStationInstance {
    lambdas: Vec<f64>,
    costs: Vec<CostFunction>,
    delta: f64,
}

impl MultiStationInstance {
    pub fn new(lambdas: Vec<f64>, costs: Vec<CostFunction>, delta: f64) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(StaffingError::domain("lambdas", "at least one station is required"));
        }
        if lambdas.len() != costs.len() {
            return Err(StaffingError::domain(
                "costs",
                format!("{} stations but {} cost functions", lambdas.len(), costs.len()),
            ));
        }
        for &l in &lambdas {
            check_lambda(l)?;
        }
        for c in &costs {
            c.validate()?;
        }
        if !(delta.is_finite() && delta > 0.0) {
            return Err(StaffingError::domain("delta", format!("must be positive, got {delta}")));
        }
        Ok(Self { lambdas, costs, delta })
    }

    pub fn stations(&self) -> usize {
        self.lambdas.len()
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn costs(&self) -> &[CostFunction] {
        &self.costs
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Same instance with every arrival rate multiplied by `m`.
    pub fn scaled(&self, m: f64) -> Result<Self> {
        Self::new(self.lambdas.iter().map(|l| l * m).collect(), self.costs.clone(), self.delta)
    }

    fn check_point(&self, betas: &[f64]) -> Result<()> {
        if betas.len() != self.stations() {
            return Err(StaffingError::domain(
                "betas",
                format!("expected {} entries, got {}", self.stations(), betas.len()),
            ));
        }
        Ok(())
    }

    pub fn station_waits(&self, betas: &[f64], model: DelayModel) -> Result<Vec<f64>> {
        self.check_point(betas)?;
        betas.iter().zip(&self.lambdas).map(|(&b, &l)| model.eval(b, l)).collect()
    }

    /// `Σ cᵢ(βᵢ) + δ (1 − Π(1 − wᵢ(βᵢ)))`.
    pub fn objective(&self, betas: &[f64], model: DelayModel) -> Result<f64> {
        let waits = self.station_waits(betas, model)?;
        Ok(self.total_cost(betas) + self.delta * joint_wait(&waits))
    }

    fn total_cost(&self, betas: &[f64]) -> f64 {
        betas
            .iter()
            .zip(&self.costs)
            .zip(&self.lambdas)
            .map(|((&b, c), &l)| c.eval(b, l))
            .sum()
    }
}

/// Probability that at least one independent station delays its customer.
pub fn joint_wait(per_station: &[f64]) -> f64 {
    1.0 - per_station.iter().map(|w| 1.0 - w).product::<f64>()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiSolveReport {
    pub betas: Vec<f64>,
    pub n_servers: Vec<f64>,
    pub objective: f64,
    pub per_station_wait: Vec<f64>,
    pub joint_wait: f64,
    pub bound_used: DelayModel,
    pub evaluations: usize,
    pub cycles: usize,
    pub converged: bool,
}

/// Minimises the weighted multi-station objective under `model`.
///
/// The result is a coordinate-wise minimum; no global certificate is given.
/// Stations are visited in index order, so the result is deterministic.
pub fn solve_multi(instance: &MultiStationInstance, model: DelayModel) -> Result<MultiSolveReport> {
    let stations = instance.stations();
    let delta = instance.delta;
    let per_station_delta = delta / stations as f64;

    let mut evaluations = 0;
    let mut betas = Vec::with_capacity(stations);
    for (l, c) in instance.lambdas.iter().zip(&instance.costs) {
        let r = frontier::solve_weighted(*l, per_station_delta, c, model)?;
        evaluations += r.evaluations;
        betas.push(r.beta);
    }
    let mut waits = instance.station_waits(&betas, model)?;
    let mut current = instance.total_cost(&betas) + delta * joint_wait(&waits);

    let mut cycles = 0;
    let mut converged = false;
    while cycles < MAX_CYCLES {
        cycles += 1;
        let start = current;
        for i in 0..stations {
            let others: f64 = waits
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, w)| 1.0 - w)
                .product();
            let lambda = instance.lambdas[i];
            let cost = &instance.costs[i];
            let fixed_cost = instance.total_cost(&betas) - cost.eval(betas[i], lambda);
            let upper = cost.beta_for_increment(delta, lambda).min(BETA_MAX);
            let slice = |b: f64| -> Result<f64> {
                let w = model.eval(b, lambda)?;
                Ok(fixed_cost + cost.eval(b, lambda) + delta * (1.0 - others * (1.0 - w)))
            };
            let min = search::golden_section(slice, 0.0, upper, 1e-10, 400)?;
            evaluations += min.evaluations;
            if min.value < current {
                betas[i] = min.x;
                waits[i] = model.eval(min.x, lambda)?;
                current = instance.total_cost(&betas) + delta * joint_wait(&waits);
            }
        }
        if start - current < CYCLE_IMPROVEMENT {
            converged = true;
            break;
        }
    }

    Ok(MultiSolveReport {
        n_servers: betas
            .iter()
            .zip(&instance.lambdas)
            .map(|(&b, &l)| square_root_staffing(b, l))
            .collect(),
        objective: current,
        joint_wait: joint_wait(&waits),
        per_station_wait: waits,
        betas,
        bound_used: model,
        evaluations,
        cycles,
        converged,
    })
}

/// Upper-bound objective minus exact objective at `betas`; never negative.
pub fn objective_gap(instance: &MultiStationInstance, betas: &[f64]) -> Result<f64> {
    instance.check_point(betas)?;
    if betas.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
        return Err(StaffingError::domain("betas", "entries must be non-negative"));
    }
    Ok(instance.objective(betas, DelayModel::Upper)? - instance.objective(betas, DelayModel::Exact)?)
}
