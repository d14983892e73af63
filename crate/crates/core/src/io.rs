//! Scenario files, run records and plain-text tables.

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cost::CostFunction;
use crate::erlang::DelayModel;
use crate::error::{Result, StaffingError};
use crate::scenario::{JointScenario, JointScenarioSet, ScenarioSet};
use crate::stoch_multi::ComparisonReport;

pub const FILE_VERSION: u32 = 1;

/// Probability mass tolerance accepted on input; masses are rescaled to sum
/// to one exactly before reaching the solvers.
pub const FILE_PROB_TOL: f64 = 1e-9;

/// Bundled two-station example.
pub const EXAMPLE1_JSON: &str = include_str!("../fixtures/example1.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationSpec {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub service_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioEntry {
    pub rates: Vec<f64>,
    pub probability: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostKind {
    LinearInBeta,
    LinearInServers,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSpec {
    pub kind: CostKind,
    /// One coefficient per station.
    pub coefficients: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverMode {
    Det,
    StochSingle,
    StochMultiJoint,
    StochMultiDecoupled,
    StochMultiReduced,
}

impl SolverMode {
    pub fn label(self) -> &'static str {
        match self {
            SolverMode::Det => "det",
            SolverMode::StochSingle => "stoch-single",
            SolverMode::StochMultiJoint => "stoch-multi-joint",
            SolverMode::StochMultiDecoupled => "stoch-multi-decoupled",
            SolverMode::StochMultiReduced => "stoch-multi-reduced",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    pub cost: CostSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<DelayModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub version: u32,
    pub stations: Vec<StationSpec>,
    pub scenarios: Vec<ScenarioEntry>,
    pub problem: ProblemSpec,
}

impl ScenarioFile {
    /// Parses and validates a scenario file.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ScenarioFile = serde_json::from_str(text).map_err(|e| {
            StaffingError::validation(
                format!("line {} column {}", e.line(), e.column()),
                e.to_string(),
            )
        })?;
        file.validate()?;
        Ok(file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario files always serialise")
    }

    pub fn example1() -> Self {
        Self::from_json(EXAMPLE1_JSON).expect("bundled fixture is valid")
    }

    pub fn stations(&self) -> usize {
        self.stations.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != FILE_VERSION {
            return Err(StaffingError::validation(
                "/version",
                format!("unsupported version {}, expected {FILE_VERSION}", self.version),
            ));
        }
        if self.stations.is_empty() {
            return Err(StaffingError::validation("/stations", "at least one station is required"));
        }
        let mut ids = HashSet::new();
        for (i, s) in self.stations.iter().enumerate() {
            if s.id.is_empty() || !ids.insert(s.id.as_str()) {
                return Err(StaffingError::validation(format!("/stations/{i}/id"), "ids must be non-empty and unique"));
            }
            if let Some(mu) = s.service_rate {
                if !(mu.is_finite() && mu > 0.0) {
                    return Err(StaffingError::validation(
                        format!("/stations/{i}/service_rate"),
                        format!("must be positive, got {mu}"),
                    ));
                }
            }
        }
        let l = self.stations();
        if self.scenarios.is_empty() {
            return Err(StaffingError::validation("/scenarios", "at least one scenario is required"));
        }
        for (s, sc) in self.scenarios.iter().enumerate() {
            if sc.rates.len() != l {
                return Err(StaffingError::validation(
                    format!("/scenarios/{s}/rates"),
                    format!("expected {l} rates, got {}", sc.rates.len()),
                ));
            }
            for (i, &r) in sc.rates.iter().enumerate() {
                if !(r.is_finite() && r > 0.0) {
                    return Err(StaffingError::validation(
                        format!("/scenarios/{s}/rates/{i}"),
                        format!("rate must be positive, got {r}"),
                    ));
                }
            }
            if !(sc.probability > 0.0 && sc.probability <= 1.0) {
                return Err(StaffingError::validation(
                    format!("/scenarios/{s}/probability"),
                    format!("must lie in (0, 1], got {}", sc.probability),
                ));
            }
            if let Some(labels) = &sc.labels {
                if labels.len() != l {
                    return Err(StaffingError::validation(
                        format!("/scenarios/{s}/labels"),
                        format!("expected {l} labels, got {}", labels.len()),
                    ));
                }
            }
        }
        let total: f64 = self.scenarios.iter().map(|s| s.probability).sum();
        if (total - 1.0).abs() > FILE_PROB_TOL {
            return Err(StaffingError::validation(
                "/scenarios",
                format!("probabilities sum to {total}, expected 1"),
            ));
        }

        let p = &self.problem;
        if let Some(eps) = p.epsilon {
            if !(eps > 0.0 && eps < 1.0) {
                return Err(StaffingError::validation("/problem/epsilon", format!("must lie in (0, 1), got {eps}")));
            }
        }
        if let Some(delta) = p.delta {
            if !(delta.is_finite() && delta > 0.0) {
                return Err(StaffingError::validation("/problem/delta", format!("must be positive, got {delta}")));
            }
        }
        if p.cost.coefficients.len() != l {
            return Err(StaffingError::validation(
                "/problem/cost/coefficients",
                format!("expected {l} coefficients, got {}", p.cost.coefficients.len()),
            ));
        }
        for (i, &c) in p.cost.coefficients.iter().enumerate() {
            if !(c.is_finite() && c > 0.0) {
                return Err(StaffingError::validation(
                    format!("/problem/cost/coefficients/{i}"),
                    format!("must be positive, got {c}"),
                ));
            }
        }
        Ok(())
    }

    /// Joint distribution with rates divided by each station's service rate
    /// and probabilities rescaled to sum to one.
    pub fn joint_set(&self) -> Result<JointScenarioSet> {
        let total: f64 = self.scenarios.iter().map(|s| s.probability).sum();
        let mus: Vec<f64> = self.stations.iter().map(|s| s.service_rate.unwrap_or(1.0)).collect();
        JointScenarioSet::new(
            self.scenarios
                .iter()
                .map(|s| JointScenario {
                    rates: s.rates.iter().zip(&mus).map(|(r, mu)| r / mu).collect(),
                    probability: s.probability / total,
                    labels: s.labels.clone(),
                })
                .collect(),
        )
    }

    /// Marginal distribution of a single-station file.
    pub fn single_set(&self) -> Result<ScenarioSet> {
        if self.stations() != 1 {
            return Err(StaffingError::validation(
                "/stations",
                format!("this mode needs exactly one station, found {}", self.stations()),
            ));
        }
        self.joint_set()?.marginal(0)
    }

    pub fn costs(&self) -> Vec<CostFunction> {
        self.problem
            .cost
            .coefficients
            .iter()
            .map(|&c| match self.problem.cost.kind {
                CostKind::LinearInBeta => CostFunction::linear_in_beta(c),
                CostKind::LinearInServers => CostFunction::linear_in_servers(c),
            })
            .collect()
    }

    /// Cost coefficients read as per-server prices.
    pub fn prices(&self) -> Vec<f64> {
        self.problem.cost.coefficients.clone()
    }

    pub fn epsilon(&self) -> Result<f64> {
        self.problem
            .epsilon
            .ok_or_else(|| StaffingError::validation("/problem/epsilon", "this mode needs epsilon"))
    }

    pub fn delta(&self) -> Result<f64> {
        self.problem
            .delta
            .ok_or_else(|| StaffingError::validation("/problem/delta", "this mode needs delta"))
    }
}

/// Lower-case hex SHA-256 of the input bytes.
pub fn digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// What one `solve` invocation produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub input_digest: String,
    pub solver: String,
    pub bound: DelayModel,
    pub solution: serde_json::Value,
    pub objective: f64,
    /// Exact-Erlang-C no-wait probability of the reported integer staffing.
    pub achieved_no_wait: Option<f64>,
    pub server_counts: Vec<u64>,
    pub wall_time_seconds: f64,
    pub tool_version: String,
}

impl RunRecord {
    pub fn new(
        input: &[u8],
        solver: SolverMode,
        bound: DelayModel,
        solution: &impl Serialize,
        objective: f64,
        server_counts: Vec<u64>,
        achieved_no_wait: Option<f64>,
        wall_time_seconds: f64,
    ) -> Self {
        Self {
            input_digest: digest(input),
            solver: solver.label().to_string(),
            bound,
            solution: serde_json::to_value(solution).expect("solver outputs serialise"),
            objective,
            achieved_no_wait,
            server_counts,
            wall_time_seconds,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

/// `x` to six significant digits, switching to scientific notation outside
/// `[1e-4, 1e6)`.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-4..6).contains(&exp) {
        format!("{:.*}", (5 - exp) as usize, x)
    } else {
        format!("{x:.5e}")
    }
}

/// Left-aligned first column, right-aligned others.
pub fn render_table(headers: &[String], rows: &[Vec<String>]) -> String {
    let cols = headers.len();
    let mut widths: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cells: &[String]| {
        for (c, cell) in cells.iter().enumerate().take(cols) {
            if c == 0 {
                let _ = write!(out, "{cell:<w$}", w = widths[c]);
            } else {
                let _ = write!(out, "  {cell:>w$}", w = widths[c]);
            }
        }
        out.push('\n');
    };
    line(&mut out, headers);
    let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
    line(&mut out, &rule);
    for row in rows {
        line(&mut out, row);
    }
    out
}

fn vector(n: &[u64]) -> String {
    let parts: Vec<String> = n.iter().map(u64::to_string).collect();
    format!("({})", parts.join(", "))
}

/// Joint, reduced and decoupled staffing side by side.
pub fn comparison_table(report: &ComparisonReport) -> String {
    let headers: Vec<String> = ["", "joint exact", "reduced (key enum)", "decoupled"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let reduced = report.reduced_solution.as_ref();
    let dash = || "-".to_string();
    let rows = vec![
        vec![
            "n".to_string(),
            vector(&report.joint_solution.n),
            reduced.map_or_else(dash, |r| vector(&r.n)),
            vector(&report.decoupled_solution.n),
        ],
        vec![
            "cost".to_string(),
            sig6(report.joint_solution.cost),
            reduced.map_or_else(dash, |r| sig6(r.cost)),
            sig6(report.decoupled_solution.cost),
        ],
        vec![
            "expected union wait".to_string(),
            sig6(report.joint_solution.union_wait),
            reduced.map_or_else(dash, |r| sig6(r.union_wait)),
            sig6(report.decoupled_solution.union_wait),
        ],
    ];
    let mut out = render_table(&headers, &rows);
    if let Some(d) = &report.reduced_decision {
        let _ = writeln!(out, "reduced key: ({})", d.key_labels.join(", "));
    }
    if let Some(e) = &report.reduced_error {
        let _ = writeln!(out, "reduced model failed: {e}");
    }
    let _ = writeln!(out, "cost ratio (decoupled / joint): {}", sig6(report.cost_ratio));
    out
}
