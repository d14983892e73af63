//! One-dimensional root bracketing and golden-section minimisation.

use crate::error::{Result, StaffingError};

/// Bracketing settings for `decreasing_root`.
#[derive(Debug, Clone, Copy)]
pub struct RootSettings {
    pub lower: f64,
    pub initial_upper: f64,
    pub max_upper: f64,
    pub interval_tol: f64,
    pub residual_tol: f64,
    pub max_steps: usize,
}

impl Default for RootSettings {
    fn default() -> Self {
        Self {
            lower: 1e-8,
            initial_upper: 8.0,
            max_upper: 64.0,
            interval_tol: 1e-10,
            residual_tol: 1e-9,
            max_steps: 200,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Root {
    /// Smallest point found with `f(x) ≤ target` (the feasible end of the bracket).
    pub x: f64,
    /// `f(x) − target`, never positive.
    pub residual: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Finds where a strictly decreasing `f` crosses `target`.
///
/// The upper end is doubled until `f` drops to the target, capped at
/// `settings.max_upper`. The returned point always satisfies `f(x) ≤ target`.
pub fn decreasing_root<F>(mut f: F, target: f64, settings: &RootSettings) -> Result<Root>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut evaluations = 0;
    let mut eval = |x: f64, evals: &mut usize| -> Result<f64> {
        *evals += 1;
        Ok(f(x)? - target)
    };

    let mut lo = settings.lower;
    let f_lo = eval(lo, &mut evaluations)?;
    if f_lo <= 0.0 {
        return Ok(Root {
            x: lo,
            residual: f_lo,
            evaluations,
            // The constraint already holds at the smallest admissible point.
            converged: true,
        });
    }

    let mut hi = settings.initial_upper.min(settings.max_upper);
    let mut f_hi = eval(hi, &mut evaluations)?;
    while f_hi > 0.0 {
        if hi >= settings.max_upper {
            return Err(StaffingError::Bracket { target, beta_max: settings.max_upper });
        }
        lo = hi;
        hi = (2.0 * hi).min(settings.max_upper);
        f_hi = eval(hi, &mut evaluations)?;
    }

    for _ in 0..settings.max_steps {
        if hi - lo <= settings.interval_tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let f_mid = eval(mid, &mut evaluations)?;
        if f_mid > 0.0 {
            lo = mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }
    Ok(Root {
        x: hi,
        residual: f_hi,
        evaluations,
        converged: f_hi.abs() <= settings.residual_tol,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct Minimum {
    pub x: f64,
    pub value: f64,
    pub evaluations: usize,
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section search for the minimum of a unimodal `f` on `[a, b]`.
///
/// Both endpoints are evaluated as well, so a minimum sitting on the boundary
/// is returned exactly.
pub fn golden_section<F>(mut f: F, a: f64, b: f64, x_tol: f64, max_evals: usize) -> Result<Minimum>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut a, mut b) = if a <= b { (a, b) } else { (b, a) };
    let f_a = f(a)?;
    let f_b = f(b)?;
    let mut best = if f_a <= f_b { (a, f_a) } else { (b, f_b) };
    let mut evaluations = 2;

    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut f_c = f(c)?;
    let mut f_d = f(d)?;
    evaluations += 2;

    while b - a > x_tol {
        if evaluations >= max_evals {
            return Err(StaffingError::NonConvergence { evaluations, residual: b - a });
        }
        if f_c <= f_d {
            b = d;
            d = c;
            f_d = f_c;
            c = b - INV_PHI * (b - a);
            f_c = f(c)?;
        } else {
            a = c;
            c = d;
            f_c = f_d;
            d = a + INV_PHI * (b - a);
            f_d = f(d)?;
        }
        evaluations += 1;
    }
    for (x, v) in [(c, f_c), (d, f_d)] {
        if v < best.1 {
            best = (x, v);
        }
    }
    Ok(Minimum { x: best.0, value: best.1, evaluations })
}
