//! Finite arrival-rate distributions for one or several stations.

use serde::{Deserialize, Serialize};

use crate::error::{Result, StaffingError};

/// Tolerance on the total probability mass.
pub const PROB_SUM_TOL: f64 = 1e-12;

/// Distribution of one station's arrival rate, sorted by strictly increasing
/// rate. Equal rates in the input are merged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    rates: Vec<f64>,
    probs: Vec<f64>,
}

impl ScenarioSet {
    pub fn new(rates: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if rates.is_empty() {
            return Err(StaffingError::validation("/scenarios", "at least one scenario is required"));
        }
        if rates.len() != probs.len() {
            return Err(StaffingError::validation(
                "/scenarios",
                format!("{} rates but {} probabilities", rates.len(), probs.len()),
            ));
        }
        for (i, (&r, &p)) in rates.iter().zip(&probs).enumerate() {
            check_rate(r, format!("/scenarios/{i}/rate"))?;
            check_prob(p, format!("/scenarios/{i}/probability"))?;
        }
        check_total(probs.iter().sum())?;

        let mut pairs: Vec<(f64, f64)> = rates.into_iter().zip(probs).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut rates = Vec::with_capacity(pairs.len());
        let mut probs: Vec<f64> = Vec::with_capacity(pairs.len());
        for (r, p) in pairs {
            if rates.last() == Some(&r) {
                *probs.last_mut().expect("parallel vectors") += p;
            } else {
                rates.push(r);
                probs.push(p);
            }
        }
        Ok(Self { rates, probs })
    }

    pub fn single(rate: f64) -> Result<Self> {
        Self::new(vec![rate], vec![1.0])
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Probability mass on scenarios `i..`.
    pub fn tail_sum(&self, i: usize) -> f64 {
        self.probs[i.min(self.probs.len())..].iter().sum()
    }

    /// Every rate multiplied by `m`.
    pub fn scaled(&self, m: f64) -> Result<Self> {
        Self::new(self.rates.iter().map(|r| r * m).collect(), self.probs.clone())
    }
}

/// One joint realisation of all stations' arrival rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointScenario {
    pub rates: Vec<f64>,
    pub probability: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

/// Joint distribution of the rate vector over `Ω₁ × ⋯ × Ω_L`.
///
/// Each station's distinct rates form its marginal levels, sorted ascending;
/// every scenario is indexed by its level in each station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointScenarioSet {
    stations: usize,
    scenarios: Vec<JointScenario>,
    levels: Vec<Vec<f64>>,
    level_labels: Vec<Vec<String>>,
    level_index: Vec<Vec<usize>>,
}

impl JointScenarioSet {
    pub fn new(scenarios: Vec<JointScenario>) -> Result<Self> {
        let Some(first) = scenarios.first() else {
            return Err(StaffingError::validation("/scenarios", "at least one scenario is required"));
        };
        let stations = first.rates.len();
        if stations == 0 {
            return Err(StaffingError::validation("/scenarios/0/rates", "at least one station is required"));
        }
        for (s, sc) in scenarios.iter().enumerate() {
            if sc.rates.len() != stations {
                return Err(StaffingError::validation(
                    format!("/scenarios/{s}/rates"),
                    format!("expected {stations} rates, got {}", sc.rates.len()),
                ));
            }
            if let Some(labels) = &sc.labels {
                if labels.len() != stations {
                    return Err(StaffingError::validation(
                        format!("/scenarios/{s}/labels"),
                        format!("expected {stations} labels, got {}", labels.len()),
                    ));
                }
            }
            for (i, &r) in sc.rates.iter().enumerate() {
                check_rate(r, format!("/scenarios/{s}/rates/{i}"))?;
            }
            check_prob(sc.probability, format!("/scenarios/{s}/probability"))?;
        }
        check_total(scenarios.iter().map(|s| s.probability).sum())?;

        let mut levels = Vec::with_capacity(stations);
        let mut level_labels = Vec::with_capacity(stations);
        for i in 0..stations {
            let mut rates: Vec<f64> = scenarios.iter().map(|s| s.rates[i]).collect();
            rates.sort_by(f64::total_cmp);
            rates.dedup();
            let labels = rates
                .iter()
                .map(|&r| {
                    scenarios
                        .iter()
                        .find(|s| s.rates[i] == r && s.labels.is_some())
                        .and_then(|s| s.labels.as_ref().map(|l| l[i].clone()))
                        .unwrap_or_else(|| format!("{r}"))
                })
                .collect();
            levels.push(rates);
            level_labels.push(labels);
        }
        let level_index = scenarios
            .iter()
            .map(|s| {
                (0..stations)
                    .map(|i| {
                        levels[i]
                            .iter()
                            .position(|&r| r == s.rates[i])
                            .expect("every rate is a level")
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            stations,
            scenarios,
            levels,
            level_labels,
            level_index,
        })
    }

    /// Single deterministic rate vector.
    pub fn deterministic(rates: Vec<f64>) -> Result<Self> {
        Self::new(vec![JointScenario { rates, probability: 1.0, labels: None }])
    }

    /// Independent stations: the product of the given marginals.
    pub fn independent(marginals: &[ScenarioSet]) -> Result<Self> {
        let mut scenarios = vec![JointScenario { rates: vec![], probability: 1.0, labels: None }];
        for m in marginals {
            let mut next = Vec::with_capacity(scenarios.len() * m.len());
            for s in &scenarios {
                for (&r, &p) in m.rates().iter().zip(m.probs()) {
                    let mut rates = s.rates.clone();
                    rates.push(r);
                    next.push(JointScenario { rates, probability: s.probability * p, labels: None });
                }
            }
            scenarios = next;
        }
        Self::new(scenarios)
    }

    pub fn stations(&self) -> usize {
        self.stations
    }

    pub fn scenarios(&self) -> &[JointScenario] {
        &self.scenarios
    }

    /// Sorted distinct rates of station `i`.
    pub fn levels(&self, station: usize) -> &[f64] {
        &self.levels[station]
    }

    pub fn level_labels(&self, station: usize) -> &[String] {
        &self.level_labels[station]
    }

    /// Level index of station `station` in scenario `scenario`.
    pub fn level_of(&self, scenario: usize, station: usize) -> usize {
        self.level_index[scenario][station]
    }

    /// Marginal distribution of one station.
    pub fn marginal(&self, station: usize) -> Result<ScenarioSet> {
        let mut probs = vec![0.0; self.levels[station].len()];
        for (s, sc) in self.scenarios.iter().enumerate() {
            probs[self.level_index[s][station]] += sc.probability;
        }
        ScenarioSet::new(self.levels[station].clone(), probs)
    }

    /// Every rate multiplied by `m`; labels are kept.
    pub fn scaled(&self, m: f64) -> Result<Self> {
        Self::new(
            self.scenarios
                .iter()
                .map(|s| JointScenario {
                    rates: s.rates.iter().map(|r| r * m).collect(),
                    probability: s.probability,
                    labels: s.labels.clone(),
                })
                .collect(),
        )
    }

    /// Replaces every occurrence of `from` in station `station` by `to`.
    pub fn with_rate_replaced(&self, station: usize, from: f64, to: f64) -> Result<Self> {
        Self::new(
            self.scenarios
                .iter()
                .map(|s| {
                    let mut s = s.clone();
                    if s.rates[station] == from {
                        s.rates[station] = to;
                    }
                    s
                })
                .collect(),
        )
    }
}

fn check_rate(rate: f64, pointer: String) -> Result<()> {
    if rate.is_finite() && rate > 0.0 {
        Ok(())
    } else {
        Err(StaffingError::validation(pointer, format!("rate must be positive and finite, got {rate}")))
    }
}

fn check_prob(p: f64, pointer: String) -> Result<()> {
    if p > 0.0 && p <= 1.0 {
        Ok(())
    } else {
        Err(StaffingError::validation(pointer, format!("probability must lie in (0, 1], got {p}")))
    }
}

fn check_total(total: f64) -> Result<()> {
    if (total - 1.0).abs() <= PROB_SUM_TOL {
        Ok(())
    } else {
        Err(StaffingError::validation(
            "/scenarios",
            format!("probabilities sum to {total}, expected 1"),
        ))
    }
}
