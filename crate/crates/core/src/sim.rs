//! Discrete-event M/M/n simulation, used as an empirical check on the
//! delay-probability formulas and on scenario-weighted QoS.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Result, StaffingError};
use crate::scenario::{JointScenarioSet, ScenarioSet};

pub const MIN_MEASURED: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: u64,
    pub lambda: f64,
    /// Customers discarded before measuring; `None` means `10 n`.
    pub warmup_customers: Option<u64>,
    pub measured_customers: u64,
    pub replications: usize,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(n: u64, lambda: f64) -> Self {
        Self {
            n,
            lambda,
            warmup_customers: None,
            measured_customers: 100_000,
            replications: 20,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_replications(mut self, replications: usize) -> Self {
        self.replications = replications;
        self
    }

    pub fn with_measured(mut self, measured: u64) -> Self {
        self.measured_customers = measured;
        self
    }

    pub fn warmup(&self) -> u64 {
        self.warmup_customers.unwrap_or(10 * self.n)
    }

    fn validate_run(&self) -> Result<()> {
        if self.measured_customers < MIN_MEASURED {
            return Err(StaffingError::domain(
                "measured_customers",
                format!("at least {MIN_MEASURED} per replication, got {}", self.measured_customers),
            ));
        }
        if self.replications < 2 {
            return Err(StaffingError::domain("replications", "at least two are needed for a confidence interval"));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_run()?;
        if self.n == 0 {
            return Err(StaffingError::domain("n", "at least one server is required"));
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(StaffingError::domain("lambda", format!("must be positive, got {}", self.lambda)));
        }
        if self.lambda >= self.n as f64 {
            return Err(StaffingError::Unstable { n: self.n as f64, lambda: self.lambda });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimEstimate {
    pub wait_prob_mean: f64,
    pub ci99_halfwidth: f64,
    pub replications_used: usize,
}

impl SimEstimate {
    pub fn contains(&self, value: f64) -> bool {
        (value - self.wait_prob_mean).abs() <= self.ci99_halfwidth
    }

    fn from_samples(samples: &[f64]) -> Self {
        let (mean, halfwidth) = mean_ci99(samples);
        Self {
            wait_prob_mean: mean,
            ci99_halfwidth: halfwidth,
            replications_used: samples.len(),
        }
    }
}

/// Sample mean and Student-t 99% half-width.
fn mean_ci99(samples: &[f64]) -> (f64, f64) {
    let r = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / r;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r - 1.0);
    let t = StudentsT::new(0.0, 1.0, r - 1.0)
        .expect("at least two replications")
        .inverse_cdf(0.995);
    (mean, t * (var / r).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Event {
    time: f64,
    seq: u64,
    kind: EventKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EventKind {
    Arrival,
    Departure,
}

impl Eq for Event {}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time.total_cmp(&other.time).then(self.seq.cmp(&other.seq))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// One replication's arrival-seen and time-average waiting fractions.
#[derive(Debug, Clone, Copy)]
struct RunOutcome {
    arrival_fraction: f64,
    time_fraction: f64,
}

fn exponential(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    let u: f64 = rng.random();
    -(1.0 - u).ln() / rate
}

/// FCFS M/M/n with unit service rate, starting empty.
fn run(n: u64, lambda: f64, warmup: u64, measured: u64, seed: u64, stream: u64) -> RunOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut events = BinaryHeap::new();
    let mut seq = 0_u64;
    let mut push = |events: &mut BinaryHeap<Reverse<Event>>, time: f64, kind: EventKind| {
        events.push(Reverse(Event { time, seq, kind }));
        seq += 1;
    };
    push(&mut events, exponential(&mut rng, lambda), EventKind::Arrival);

    let mut in_system = 0_u64;
    let mut arrivals = 0_u64;
    let mut waited = 0_u64;
    let mut now = 0.0;
    let mut start = None::<f64>;
    let mut busy_time = 0.0;
    let total = warmup + measured;

    while let Some(Reverse(ev)) = events.pop() {
        if start.is_some() && in_system >= n {
            busy_time += ev.time - now;
        }
        now = ev.time;
        match ev.kind {
            EventKind::Arrival => {
                arrivals += 1;
                if arrivals > total {
                    break;
                }
                if arrivals == warmup + 1 {
                    start = Some(now);
                }
                if arrivals > warmup && in_system >= n {
                    waited += 1;
                }
                in_system += 1;
                // A free server starts service at once; otherwise the
                // customer queues and the next departure frees a server.
                if in_system <= n {
                    let service = exponential(&mut rng, 1.0);
                    push(&mut events, now + service, EventKind::Departure);
                }
                let gap = exponential(&mut rng, lambda);
                push(&mut events, now + gap, EventKind::Arrival);
            }
            EventKind::Departure => {
                in_system -= 1;
                if in_system >= n {
                    let service = exponential(&mut rng, 1.0);
                    push(&mut events, now + service, EventKind::Departure);
                }
            }
        }
    }
    let span = now - start.unwrap_or(now);
    RunOutcome {
        arrival_fraction: waited as f64 / measured as f64,
        time_fraction: if span > 0.0 { busy_time / span } else { 0.0 },
    }
}

fn replicate(config: &SimConfig, stream_base: u64) -> Vec<RunOutcome> {
    (0..config.replications)
        .into_par_iter()
        .map(|r| {
            run(
                config.n,
                config.lambda,
                config.warmup(),
                config.measured_customers,
                config.seed,
                stream_base + r as u64,
            )
        })
        .collect()
}

/// Fraction of arrivals finding every server busy, with a 99% CI across
/// replications. Identical configs give bit-identical results.
pub fn simulate_wait_probability(config: &SimConfig) -> Result<SimEstimate> {
    config.validate()?;
    let runs = replicate(config, 0);
    let samples: Vec<f64> = runs.iter().map(|r| r.arrival_fraction).collect();
    Ok(SimEstimate::from_samples(&samples))
}

/// Arrival-seen versus time-average `P{Q ≥ n}` from the same runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PastaReport {
    pub arrival_seen: SimEstimate,
    pub time_average: SimEstimate,
    pub difference_mean: f64,
    pub difference_ci99_halfwidth: f64,
    /// The paired 99% CI on the difference covers zero.
    pub consistent: bool,
}

pub fn pasta_check(config: &SimConfig) -> Result<PastaReport> {
    config.validate()?;
    let runs = replicate(config, 0);
    let arrival: Vec<f64> = runs.iter().map(|r| r.arrival_fraction).collect();
    let time: Vec<f64> = runs.iter().map(|r| r.time_fraction).collect();
    let diff: Vec<f64> = arrival.iter().zip(&time).map(|(a, t)| a - t).collect();
    let (d_mean, d_half) = mean_ci99(&diff);
    Ok(PastaReport {
        arrival_seen: SimEstimate::from_samples(&arrival),
        time_average: SimEstimate::from_samples(&time),
        difference_mean: d_mean,
        difference_ci99_halfwidth: d_half,
        consistent: d_mean.abs() <= d_half,
    })
}

/// Per-replication wait fraction at `n` servers for each rate; unstable
/// rates wait with certainty and are not simulated.
fn level_waits(n: u64, rates: &[f64], config: &SimConfig, rep: usize, station: usize) -> Vec<f64> {
    rates
        .iter()
        .enumerate()
        .map(|(l, &rate)| {
            if rate >= n as f64 {
                1.0
            } else {
                let stream = ((rep as u64) << 32) | ((station as u64) << 16) | l as u64;
                run(n, rate, config.warmup_customers.unwrap_or(10 * n), config.measured_customers, config.seed, stream)
                    .arrival_fraction
            }
        })
        .collect()
}

/// Expected delay probability `Σ p^ω P{W > 0 | Λ^ω}` for a fixed head count.
///
/// Only `measured_customers`, `warmup_customers`, `replications` and `seed`
/// are read from `config`.
pub fn simulate_scenario_qos(scenarios: &ScenarioSet, n: u64, config: &SimConfig) -> Result<SimEstimate> {
    config.validate_run()?;
    if n == 0 {
        return Err(StaffingError::domain("n", "at least one server is required"));
    }
    let samples: Vec<f64> = (0..config.replications)
        .into_par_iter()
        .map(|rep| {
            let waits = level_waits(n, scenarios.rates(), config, rep, 0);
            waits.iter().zip(scenarios.probs()).map(|(w, p)| w * p).sum()
        })
        .collect();
    Ok(SimEstimate::from_samples(&samples))
}

/// Probability of waiting at some station, `1 − Σ p^ω Π_i (1 − P{W_i > 0})`,
/// from independent per-station runs.
pub fn simulate_joint_qos(scenarios: &JointScenarioSet, n: &[u64], config: &SimConfig) -> Result<SimEstimate> {
    config.validate_run()?;
    if n.len() != scenarios.stations() || n.contains(&0) {
        return Err(StaffingError::domain("n", "one positive server count per station is required"));
    }
    let samples: Vec<f64> = (0..config.replications)
        .into_par_iter()
        .map(|rep| {
            let waits: Vec<Vec<f64>> = (0..scenarios.stations())
                .map(|i| level_waits(n[i], scenarios.levels(i), config, rep, i))
                .collect();
            let no_wait: f64 = scenarios
                .scenarios()
                .iter()
                .enumerate()
                .map(|(s, sc)| {
                    sc.probability
                        * (0..scenarios.stations())
                            .map(|i| 1.0 - waits[i][scenarios.level_of(s, i)])
                            .product::<f64>()
                })
                .sum();
            1.0 - no_wait
        })
        .collect();
    Ok(SimEstimate::from_samples(&samples))
}
