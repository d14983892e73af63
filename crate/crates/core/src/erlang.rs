//! Erlang-C delay probability: exact, continuous, Halfin-Whitt and JVLZ bounds.
//!
//! Everything here assumes a unit service rate; callers holding `μ ≠ 1` divide
//! the arrival rate by `μ` first (see [`QueueParams::with_service_rate`]).
//!
//! The square-root staffing parametrisation ties the number of servers to a
//! safety factor `β` through `n = λ + β√λ`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, StaffingError};
use crate::normal;
use crate::quadrature::{self, Tolerance};

/// Arrival rate of one station, service rate normalised to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueueParams {
    lambda: f64,
}

impl QueueParams {
    pub fn new(lambda: f64) -> Result<Self> {
        check_rate(lambda)?;
        Ok(Self { lambda })
    }

    /// Normalises `lambda / mu` onto the unit-service-rate convention.
    pub fn with_service_rate(lambda: f64, mu: f64) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(StaffingError::domain("service_rate", format!("must be positive, got {mu}")));
        }
        Self::new(lambda / mu)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Server count induced by safety factor `beta`.
    pub fn servers(&self, beta: f64) -> f64 {
        square_root_staffing(beta, self.lambda)
    }
}

/// A probability that an arriving customer waits.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DelayProbability(f64);

impl DelayProbability {
    pub(crate) fn clamped(value: f64) -> Self {
        Self(value.clamp(0.0, 1.0))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl From<DelayProbability> for f64 {
    fn from(p: DelayProbability) -> f64 {
        p.0
    }
}

/// JVLZ lower and upper bounds on the continuous Erlang-C value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundPair {
    pub lower: DelayProbability,
    pub upper: DelayProbability,
}

impl BoundPair {
    pub fn width(&self) -> f64 {
        self.upper.value() - self.lower.value()
    }
}

/// Quantities of the Halfin-Whitt regime at `n = λ + β√λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HwQuantities {
    pub n: f64,
    pub rho: f64,
    pub beta: f64,
    pub gamma: f64,
    pub a: f64,
}

impl HwQuantities {
    pub fn new(beta: f64, lambda: f64) -> Result<Self> {
        check_rate(lambda)?;
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(StaffingError::domain("beta", format!("must be non-negative, got {beta}")));
        }
        Ok(Self::unchecked(beta, lambda))
    }

    fn unchecked(beta: f64, lambda: f64) -> Self {
        let excess = beta * lambda.sqrt();
        let n = lambda + excess;
        // 1 - rho, formed from the excess so it keeps relative precision.
        let slack = excess / n;
        Self {
            n,
            rho: lambda / n,
            beta,
            gamma: excess / n.sqrt(),
            a: (2.0 * n * neg_log_defect(slack)).sqrt(),
        }
    }
}

/// `-(x + ln(1 - x))`, the quantity under the root in `a` divided by `2n`.
///
/// Near `x = 0` the two terms cancel, so the Taylor series `Σ_{k≥2} x^k / k`
/// is summed instead.
fn neg_log_defect(x: f64) -> f64 {
    if x.abs() < 1e-2 {
        let mut term = x * x;
        let mut sum = 0.0;
        for k in 2..12 {
            sum += term / k as f64;
            term *= x;
        }
        sum
    } else {
        -(x + (-x).ln_1p())
    }
}

/// Two-term expansion `a ≈ β − β²/(6√λ)`; diagnostic only.
pub fn a_expansion(beta: f64, lambda: f64) -> f64 {
    beta - beta * beta / (6.0 * lambda.sqrt())
}

pub fn square_root_staffing(beta: f64, lambda: f64) -> f64 {
    lambda + beta * lambda.sqrt()
}

fn check_rate(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda > 0.0 {
        Ok(())
    } else {
        Err(StaffingError::domain("lambda", format!("must be positive and finite, got {lambda}")))
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta.is_finite() && beta > 0.0 {
        Ok(())
    } else {
        Err(StaffingError::domain("beta", format!("must be positive and finite, got {beta}")))
    }
}

/// Exact Erlang-C probability `P{Q ≥ n}` for an integer number of servers.
///
/// Runs the Erlang-B recursion on the inverse blocking probability
/// `b_k = 1 + (k/λ) b_{k-1}` and converts with `C = n / ((n − λ) b_n + λ)`.
pub fn erlang_c_exact(n: u64, lambda: f64) -> Result<DelayProbability> {
    check_rate(lambda)?;
    if n == 0 {
        return Err(StaffingError::domain("n", "at least one server is required"));
    }
    if lambda >= n as f64 {
        return Err(StaffingError::Unstable { n: n as f64, lambda });
    }
    let mut inv_blocking = 1.0_f64;
    for k in 1..=n {
        inv_blocking = 1.0 + (k as f64 / lambda) * inv_blocking;
    }
    let n = n as f64;
    Ok(DelayProbability::clamped(n / ((n - lambda) * inv_blocking + lambda)))
}

/// Exact Erlang-C values for every server count `0..=max_n`.
///
/// Entries with `n ≤ λ` are 1: an unstable station makes every customer wait.
pub fn erlang_c_table(max_n: u64, lambda: f64) -> Result<Vec<f64>> {
    check_rate(lambda)?;
    let mut table = Vec::with_capacity(max_n as usize + 1);
    table.push(1.0);
    let mut inv_blocking = 1.0_f64;
    for k in 1..=max_n {
        inv_blocking = 1.0 + (k as f64 / lambda) * inv_blocking;
        let n = k as f64;
        if n <= lambda {
            table.push(1.0);
        } else {
            table.push((n / ((n - lambda) * inv_blocking + lambda)).clamp(0.0, 1.0));
        }
    }
    Ok(table)
}

// Integrand is dropped once it falls this many e-folds below its peak.
const LOG_CUTOFF: f64 = 50.0;

/// Continuous extension `[λ ∫₀^∞ t e^{−λt} (1+t)^{n−1} dt]^{-1}` for real `n > λ`.
///
/// The integrand is handled in log space around its mode, where
/// `λt² − (n−λ)t − 1 = 0`, and each side of the mode is integrated adaptively.
pub fn erlang_c_continuous(n: f64, lambda: f64) -> Result<DelayProbability> {
    check_rate(lambda)?;
    if !(n.is_finite() && n > lambda) {
        return Err(StaffingError::Unstable { n, lambda });
    }
    continuous_unchecked(n, lambda).map(DelayProbability::clamped)
}

fn continuous_unchecked(n: f64, lambda: f64) -> Result<f64> {
    let log_integrand = |t: f64| t.ln() - lambda * t + (n - 1.0) * t.ln_1p();
    let excess = n - lambda;
    let mode = (excess + (excess * excess + 4.0 * lambda).sqrt()) / (2.0 * lambda);
    let peak = log_integrand(mode);
    let curvature = 1.0 / (mode * mode) + (n - 1.0).max(0.0) / ((1.0 + mode) * (1.0 + mode));
    let scale = 1.0 / curvature.sqrt();

    let mut right = scale;
    for _ in 0..200 {
        if log_integrand(mode + right) - peak < -LOG_CUTOFF {
            break;
        }
        right *= 2.0;
    }
    let mut left = scale;
    while mode - left > 0.0 && log_integrand(mode - left) - peak >= -LOG_CUTOFF {
        left *= 2.0;
    }
    let lower = (mode - left).max(0.0);

    let scaled = |t: f64| {
        if t <= 0.0 {
            0.0
        } else {
            (log_integrand(t) - peak).exp()
        }
    };
    let tol = Tolerance {
        absolute: 0.0,
        relative: 1e-13,
        max_intervals: 400,
    };
    let lhs = quadrature::integrate(scaled, lower, mode, tol);
    let rhs = quadrature::integrate(scaled, mode, mode + right, tol);
    let mass = lhs.value + rhs.value;
    let error = lhs.error_estimate + rhs.error_estimate;
    // 1e-12 absolute on the log of the integral.
    if !(mass > 0.0) || error > 1e-12 * mass {
        return Err(StaffingError::Quadrature {
            n,
            lambda,
            intervals: lhs.intervals + rhs.intervals,
            error_estimate: error / mass,
        });
    }
    let log_integral = lambda.ln() + peak + mass.ln();
    Ok((-log_integral).exp())
}

/// `ᾱ(n, λ)` extended to unstable staffing: returns 1 whenever `n ≤ λ`.
pub fn wait_probability(n: f64, lambda: f64) -> Result<f64> {
    check_rate(lambda)?;
    if n <= lambda {
        Ok(1.0)
    } else {
        Ok(continuous_unchecked(n, lambda)?.clamp(0.0, 1.0))
    }
}

/// Continuous Erlang-C at square-root staffing, `ᾱ(λ + β√λ, λ)`.
pub fn erlang_c_sqrt(beta: f64, lambda: f64) -> Result<DelayProbability> {
    check_beta(beta)?;
    check_rate(lambda)?;
    erlang_c_continuous(square_root_staffing(beta, lambda), lambda)
}

/// Halfin-Whitt limit `1 / (1 + √(2π) β Φ(β) e^{β²/2})`.
pub fn halfin_whitt(beta: f64) -> Result<DelayProbability> {
    check_beta(beta)?;
    Ok(DelayProbability::clamped(halfin_whitt_unchecked(beta)))
}

fn halfin_whitt_unchecked(beta: f64) -> f64 {
    1.0 / (1.0 + beta * normal::cdf_over_pdf(beta))
}

/// JVLZ bounds on `ᾱ(λ + β√λ, λ)`.
pub fn jvlz_bounds(beta: f64, lambda: f64) -> Result<BoundPair> {
    check_beta(beta)?;
    check_rate(lambda)?;
    let (lower, upper) = bounds_unchecked(&HwQuantities::unchecked(beta, lambda));
    Ok(BoundPair {
        lower: DelayProbability::clamped(lower),
        upper: DelayProbability::clamped(upper),
    })
}

fn upper_denominator(q: &HwQuantities) -> f64 {
    q.rho + q.gamma * (normal::cdf_over_pdf(q.a) + 2.0 / (3.0 * q.n.sqrt()))
}

fn bounds_unchecked(q: &HwQuantities) -> (f64, f64) {
    let upper_den = upper_denominator(q);
    // γ / (φ(a)(12n − 1)) with 1/φ(a) expanded so large `a` overflows to +inf
    // instead of dividing by an underflowed zero.
    let extra = q.gamma * (0.5 * q.a * q.a).exp() * 2.506_628_274_631_000_7 / (12.0 * q.n - 1.0);
    (1.0 / (upper_den + extra), 1.0 / upper_den)
}

/// JVLZ upper bound alone.
pub fn jvlz_upper(beta: f64, lambda: f64) -> Result<DelayProbability> {
    jvlz_bounds(beta, lambda).map(|b| b.upper)
}

/// Which delay formula a solver uses for the QoS term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DelayModel {
    /// Continuous Erlang-C.
    Exact,
    /// JVLZ upper bound.
    Upper,
    /// JVLZ lower bound.
    Lower,
    /// Halfin-Whitt limit (ignores `λ`).
    HalfinWhitt,
}

impl DelayModel {
    pub fn label(self) -> &'static str {
        match self {
            DelayModel::Exact => "exact",
            DelayModel::Upper => "jvlz-upper",
            DelayModel::Lower => "jvlz-lower",
            DelayModel::HalfinWhitt => "halfin-whitt",
        }
    }

    /// Delay probability at safety factor `beta ≥ 0`; equal to 1 at `beta = 0`.
    pub fn eval(self, beta: f64, lambda: f64) -> Result<f64> {
        check_rate(lambda)?;
        if !(beta >= 0.0) || beta.is_infinite() {
            return Err(StaffingError::domain("beta", format!("must be non-negative, got {beta}")));
        }
        if beta == 0.0 {
            return Ok(1.0);
        }
        let value = match self {
            DelayModel::Exact => continuous_unchecked(square_root_staffing(beta, lambda), lambda)?,
            DelayModel::Upper => bounds_unchecked(&HwQuantities::unchecked(beta, lambda)).1,
            DelayModel::Lower => bounds_unchecked(&HwQuantities::unchecked(beta, lambda)).0,
            DelayModel::HalfinWhitt => halfin_whitt_unchecked(beta),
        };
        Ok(value.clamp(0.0, 1.0))
    }

    /// Delay probability with `n` servers facing arrival rate `lambda`; 1 when `n ≤ λ`.
    pub fn eval_servers(self, n: f64, lambda: f64) -> Result<f64> {
        check_rate(lambda)?;
        if n <= lambda {
            return Ok(1.0);
        }
        self.eval((n - lambda) / lambda.sqrt(), lambda)
    }
}
