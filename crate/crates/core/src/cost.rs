//! Staffing cost as a function of the safety factor.

use serde::{Deserialize, Serialize};

use crate::erlang::square_root_staffing;
use crate::error::{Result, StaffingError};

/// A continuous, strictly increasing cost `c(β)`.
///
/// `LinearInServers` prices the induced head count `n = λ + β√λ`, so its value
/// depends on the rate the staffing is built on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CostFunction {
    LinearInBeta { coefficient: f64 },
    LinearInServers { coefficient: f64 },
    /// Piecewise-linear through `(β, cost)` points; extrapolated with the
    /// outermost slopes.
    Table { points: Vec<(f64, f64)> },
}

impl Default for CostFunction {
    fn default() -> Self {
        CostFunction::LinearInBeta { coefficient: 1.0 }
    }
}

impl CostFunction {
    pub fn linear_in_beta(coefficient: f64) -> Self {
        CostFunction::LinearInBeta { coefficient }
    }

    pub fn linear_in_servers(coefficient: f64) -> Self {
        CostFunction::LinearInServers { coefficient }
    }

    pub fn table(mut points: Vec<(f64, f64)>) -> Result<Self> {
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        let cost = CostFunction::Table { points };
        cost.validate()?;
        Ok(cost)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            CostFunction::LinearInBeta { coefficient } | CostFunction::LinearInServers { coefficient } => {
                if coefficient.is_finite() && *coefficient > 0.0 {
                    Ok(())
                } else {
                    Err(StaffingError::domain("cost.coefficient", format!("must be positive, got {coefficient}")))
                }
            }
            CostFunction::Table { points } => {
                if points.len() < 2 {
                    return Err(StaffingError::domain("cost.points", "a cost table needs at least two points"));
                }
                for w in points.windows(2) {
                    if !(w[1].0 > w[0].0 && w[1].1 > w[0].1) {
                        return Err(StaffingError::domain(
                            "cost.points",
                            format!("table must be strictly increasing, violated between {:?} and {:?}", w[0], w[1]),
                        ));
                    }
                }
                if points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
                    return Err(StaffingError::domain("cost.points", "non-finite table entry"));
                }
                Ok(())
            }
        }
    }

    /// `c(β)` for staffing built on arrival rate `lambda`.
    pub fn eval(&self, beta: f64, lambda: f64) -> f64 {
        match self {
            CostFunction::LinearInBeta { coefficient } => coefficient * beta,
            CostFunction::LinearInServers { coefficient } => coefficient * square_root_staffing(beta, lambda),
            CostFunction::Table { points } => interpolate(points, beta),
        }
    }

    /// Price of one extra server where the cost is linear in head count.
    pub fn server_price(&self) -> Option<f64> {
        match self {
            CostFunction::LinearInServers { coefficient } => Some(*coefficient),
            _ => None,
        }
    }

    /// Smallest `β ≥ 0` whose cost exceeds `c(0) + increment`; any larger `β`
    /// is dominated when the remaining objective is bounded by `increment`.
    pub fn beta_for_increment(&self, increment: f64, lambda: f64) -> f64 {
        match self {
            CostFunction::LinearInBeta { coefficient } => increment / coefficient,
            CostFunction::LinearInServers { coefficient } => increment / (coefficient * lambda.sqrt()),
            CostFunction::Table { .. } => {
                let base = self.eval(0.0, lambda);
                let mut beta = 1.0;
                while self.eval(beta, lambda) - base < increment && beta < 1e6 {
                    beta *= 2.0;
                }
                beta
            }
        }
    }
}

fn interpolate(points: &[(f64, f64)], x: f64) -> f64 {
    let idx = match points.iter().position(|p| p.0 >= x) {
        Some(0) => 1,
        Some(i) => i,
        None => points.len() - 1,
    };
    let (x0, y0) = points[idx - 1];
    let (x1, y1) = points[idx];
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}
