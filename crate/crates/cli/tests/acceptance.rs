//! End-to-end acceptance checks. Each test prints one PASS/FAIL line.

use std::process::Command;
use std::time::{Duration, Instant};

use serde_json::Value;
use staffing_core::cost::CostFunction;
use staffing_core::erlang::{erlang_c_continuous, erlang_c_exact, erlang_c_sqrt, jvlz_bounds, jvlz_upper, HwQuantities};
use staffing_core::frontier::solve_constrained;
use staffing_core::io::ScenarioFile;
use staffing_core::multi_det::{solve_multi, MultiStationInstance};
use staffing_core::scenario::JointScenarioSet;
use staffing_core::sim::{pasta_check, simulate_wait_probability, SimConfig};
use staffing_core::stoch_multi::{
    enumerate_key_scenarios, joint_constraint_value, solve_decoupled, solve_reduced_joint, solve_weighted_stoch,
    weighted_objective, DEFAULT_KEY_CAP,
};
use staffing_core::stoch_single::select_key_scenario;
use staffing_core::DelayModel;

const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/fixtures/example1.json");

fn report(id: u32, ok: bool, detail: &str, elapsed: Duration, limit: Duration) {
    let in_time = elapsed < limit;
    let verdict = if ok && in_time { "PASS" } else { "FAIL" };
    println!("criterion {id:>2}: {verdict} ({:.2}s of {}s) {detail}", elapsed.as_secs_f64(), limit.as_secs());
    assert!(ok, "criterion {id}: {detail}");
    assert!(in_time, "criterion {id}: took {elapsed:?}, limit {limit:?}");
}

fn example1() -> JointScenarioSet {
    ScenarioFile::example1().joint_set().unwrap()
}

fn counts(v: &Value) -> Vec<u64> {
    v["n"].as_array().unwrap().iter().map(|x| x.as_u64().unwrap()).collect()
}

fn compare_json() -> Value {
    let out = Command::new(env!("CARGO_BIN_EXE_staffing"))
        .args(["compare", FIXTURE, "--format", "json"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

#[test]
fn criterion_01_joint_exact_example() {
    let t = Instant::now();
    let report_json = compare_json();
    let joint = &report_json["joint_solution"];
    let n = counts(joint);
    let cost = joint["cost"].as_f64().unwrap();
    let wait = 1.0 - joint["no_wait"].as_f64().unwrap();
    let ok = n == [496, 235] && cost == 3185.0 && (wait - 0.05).abs() <= 0.005;
    report(
        1,
        ok,
        &format!("n = {n:?}, cost = {cost}, union wait = {wait:.6}; expected (496, 235), 3185, 0.05"),
        t.elapsed(),
        Duration::from_secs(60),
    );
}

#[test]
fn criterion_02_decoupled_example() {
    let t = Instant::now();
    let r = compare_json();
    let dec = &r["decoupled_solution"];
    let n = counts(dec);
    let cost = dec["cost"].as_f64().unwrap();
    let ratio = r["cost_ratio"].as_f64().unwrap();
    let ok = n == [484, 306] && cost == 3338.0 && (ratio - 1.048).abs() <= 0.01;
    report(2, ok, &format!("n = {n:?}, cost = {cost}, ratio = {ratio:.4}"), t.elapsed(), Duration::from_secs(10));
}

#[test]
fn criterion_03_reduced_joint_example() {
    let t = Instant::now();
    let set = example1();
    let r = solve_reduced_joint(&set, 0.05, &[5.0, 3.0], &[1, 1], DelayModel::Exact).unwrap();
    let ok = (r.betas[0] - 2.15).abs() <= 0.02 && (r.betas[1] - 2.48).abs() <= 0.02 && r.n_integer == [496, 235];
    report(
        3,
        ok,
        &format!("key {:?}, beta = ({:.4}, {:.4}), n = {:?}", r.key_labels, r.betas[0], r.betas[1], r.n_integer),
        t.elapsed(),
        Duration::from_secs(10),
    );
}

#[test]
fn criterion_04_decoupled_betas() {
    let t = Instant::now();
    let set = example1();
    let costs = vec![CostFunction::linear_in_servers(5.0), CostFunction::linear_in_servers(3.0)];
    let d = solve_decoupled(&set, 0.05, &costs, DelayModel::Exact).unwrap();
    let ok = (d.betas[0] - 1.6).abs() <= 0.05 && (d.betas[1] - 0.36).abs() <= 0.05 && d.n_integer[1] == 306;
    report(
        4,
        ok,
        &format!("beta = ({:.4}, {:.4}), n2 = {}", d.betas[0], d.betas[1], d.n_integer[1]),
        t.elapsed(),
        Duration::from_secs(5),
    );
}

#[test]
fn criterion_05_key_scenarios() {
    let t = Instant::now();
    let set = example1();
    let eps = 1.0 - 0.95_f64.sqrt();
    let mut picks = Vec::new();
    for i in 0..2 {
        let k = select_key_scenario(&set.marginal(i).unwrap(), eps).unwrap();
        picks.push(set.level_labels(i)[k].clone());
    }
    let e = enumerate_key_scenarios(&set, 0.05, &[5.0, 3.0], DelayModel::Exact, DEFAULT_KEY_CAP).unwrap();
    let ok = picks == ["high", "high"] && e.best.key_labels == ["high", "medium"];
    report(
        5,
        ok,
        &format!("per-station keys {picks:?}, joint key {:?}", e.best.key_labels),
        t.elapsed(),
        Duration::from_secs(5),
    );
}

#[test]
fn criterion_06_bounds_sandwich() {
    let t = Instant::now();
    let mut violations = 0;
    let mut checked = 0;
    for lambda in [10.0, 1e2, 1e3, 1e4] {
        for k in 1..=20 {
            let beta = 0.15 * k as f64;
            let b = jvlz_bounds(beta, lambda).unwrap();
            let c = erlang_c_sqrt(beta, lambda).unwrap().value();
            checked += 1;
            if !(b.lower.value() <= c && c <= b.upper.value()) {
                violations += 1;
            }
        }
    }
    report(6, violations == 0, &format!("{violations} violations in {checked} points"), t.elapsed(), Duration::from_secs(30));
}

#[test]
fn criterion_07_bound_width_convergence() {
    let t = Instant::now();
    let widths: Vec<f64> = [1e2, 1e3, 1e4, 1e5]
        .iter()
        .map(|&lambda| {
            (1..=100)
                .map(|k| jvlz_bounds(0.05 * k as f64, lambda).unwrap().width())
                .fold(0.0, f64::max)
        })
        .collect();
    let ok = strictly_decreasing(&widths) && widths[3] < 1e-3;
    report(7, ok, &format!("max widths {}", sci(&widths)), t.elapsed(), Duration::from_secs(30));
}

#[test]
fn criterion_08_single_station_asymptotics() {
    let t = Instant::now();
    let c = CostFunction::default();
    let gaps: Vec<f64> = [1e2, 1e3, 1e4, 1e5]
        .iter()
        .map(|&lambda| {
            let f = solve_constrained(lambda, 0.1, &c, DelayModel::Exact).unwrap().beta;
            let g = solve_constrained(lambda, 0.1, &c, DelayModel::Upper).unwrap().beta;
            g - f
        })
        .collect();
    let ok = strictly_decreasing(&gaps) && gaps[3] < 1e-2;
    report(8, ok, &format!("beta gaps {}", sci(&gaps)), t.elapsed(), Duration::from_secs(30));
}

#[test]
fn criterion_09_multi_station_asymptotics() {
    let t = Instant::now();
    let scales = [1.0, 10.0, 100.0];
    let det: Vec<f64> = scales
        .iter()
        .map(|&m| {
            let c = CostFunction::linear_in_beta(1.0);
            let inst = MultiStationInstance::new(vec![100.0 * m, 50.0 * m], vec![c.clone(), c], 20.0).unwrap();
            let f = solve_multi(&inst, DelayModel::Exact).unwrap();
            let g = solve_multi(&inst, DelayModel::Upper).unwrap();
            inst.objective(&g.betas, DelayModel::Exact).unwrap() - f.objective
        })
        .collect();
    let costs = vec![CostFunction::linear_in_beta(5.0), CostFunction::linear_in_beta(3.0)];
    let stoch: Vec<f64> = scales
        .iter()
        .map(|&m| {
            let set = example1().scaled(m).unwrap();
            let f = solve_weighted_stoch(&set, 50.0, &costs, DelayModel::Exact).unwrap();
            let g = solve_weighted_stoch(&set, 50.0, &costs, DelayModel::Upper).unwrap();
            weighted_objective(&set, 50.0, &costs, &g.key, &g.betas, DelayModel::Exact).unwrap() - f.objective
        })
        .collect();
    let ok = strictly_decreasing(&det) && strictly_decreasing(&stoch);
    report(
        9,
        ok,
        &format!("deterministic gaps {}, scenario gaps {}", sci(&det), sci(&stoch)),
        t.elapsed(),
        Duration::from_secs(120),
    );
}

#[test]
fn criterion_10_monotonicity() {
    let t = Instant::now();
    let mut violations = Vec::new();
    let lambdas: Vec<f64> = (0..=16).map(|k| 10f64.powf(0.25 * k as f64)).collect();
    let betas: Vec<f64> = (1..=80).map(|k| 0.05 * k as f64).collect();
    // Upper bound decreasing in the arrival rate.
    for beta in [0.5, 1.0, 2.0] {
        for w in lambdas.windows(2) {
            if jvlz_upper(beta, w[1]).unwrap() >= jvlz_upper(beta, w[0]).unwrap() {
                violations.push(format!("UB not decreasing in lambda at beta={beta}, lambda={}", w[1]));
            }
        }
    }
    for &lambda in &lambdas {
        let mut prev_ub = f64::INFINITY;
        let mut prev_c = f64::INFINITY;
        for &beta in &betas {
            let ub = jvlz_upper(beta, lambda).unwrap().value();
            let c = erlang_c_sqrt(beta, lambda).unwrap().value();
            if ub >= prev_ub {
                violations.push(format!("UB not decreasing in beta at lambda={lambda}, beta={beta}"));
            }
            if c >= prev_c {
                violations.push(format!("continuous delay not decreasing in beta at lambda={lambda}, beta={beta}"));
            }
            if !(0.0..=1.0).contains(&ub) || !(0.0..=1.0).contains(&c) {
                violations.push(format!("value outside [0, 1] at lambda={lambda}, beta={beta}"));
            }
            prev_ub = ub;
            prev_c = c;
        }
    }
    // Continuous delay strictly decreasing in n on [λ + 0.1√λ, λ + 5√λ].
    let mut prev = f64::INFINITY;
    for k in 0..=200 {
        let n = 100.0 + (0.1 + 4.9 * k as f64 / 200.0) * 10.0;
        let v = erlang_c_continuous(n, 100.0).unwrap().value();
        if v >= prev {
            violations.push(format!("continuous delay not decreasing in n at n={n}"));
        }
        prev = v;
    }
    // γ/(12n − 1) vanishes as λ grows.
    let sup = |lambda: f64| {
        betas
            .iter()
            .map(|&b| {
                let q = HwQuantities::new(b, lambda).unwrap();
                q.gamma / (12.0 * q.n - 1.0)
            })
            .fold(0.0, f64::max)
    };
    if sup(1e4) >= sup(1e2) {
        violations.push("gamma/(12n-1) not shrinking".into());
    }
    let ok = violations.is_empty();
    report(
        10,
        ok,
        &format!("{} violations {:?}", violations.len(), violations.iter().take(3).collect::<Vec<_>>()),
        t.elapsed(),
        Duration::from_secs(30),
    );
}

#[test]
fn criterion_11_simulation() {
    let t = Instant::now();
    let points: [(u64, f64); 10] = [
        (496, 450.0),
        (235, 200.0),
        (1, 0.5),
        (2, 1.5),
        (5, 4.0),
        (10, 8.0),
        (25, 20.0),
        (50, 45.0),
        (100, 90.0),
        (300, 280.0),
    ];
    let mut misses = Vec::new();
    for (n, lambda) in points {
        let cfg = SimConfig::new(n, lambda).with_measured(500_000).with_replications(20).with_seed(1);
        let est = simulate_wait_probability(&cfg).unwrap();
        let exact = erlang_c_exact(n, lambda).unwrap().value();
        if !est.contains(exact) {
            misses.push(format!("(n={n}, lambda={lambda}): {:.5} +- {:.5} vs {exact:.5}", est.wait_prob_mean, est.ci99_halfwidth));
        }
    }
    let pasta = pasta_check(&SimConfig::new(235, 200.0).with_measured(200_000).with_replications(20).with_seed(1)).unwrap();
    let ok = misses.is_empty() && pasta.consistent;
    report(
        11,
        ok,
        &format!(
            "{} of 10 outside the 99% CI {misses:?}; PASTA difference {:.2e} +- {:.2e}",
            misses.len(),
            pasta.difference_mean,
            pasta.difference_ci99_halfwidth
        ),
        t.elapsed(),
        Duration::from_secs(180),
    );
}

#[test]
fn criterion_12_interpolation() {
    let t = Instant::now();
    let worst = (2..=200_u64)
        .map(|n| {
            let lambda = 0.9 * n as f64;
            let e = erlang_c_exact(n, lambda).unwrap().value();
            let c = erlang_c_continuous(n as f64, lambda).unwrap().value();
            ((c - e) / e).abs()
        })
        .fold(0.0, f64::max);
    report(12, worst <= 1e-8, &format!("max relative error {worst:.2e}"), t.elapsed(), Duration::from_secs(30));
}

#[test]
fn union_wait_of_reported_staffing() {
    // The two staffing levels reported for the example both meet the target.
    let set = example1();
    for n in [[496, 235], [484, 306]] {
        let q = 1.0 - joint_constraint_value(&set, &n).unwrap();
        assert!(q <= 0.05 && q > 0.045, "{n:?}: {q}");
    }
}
