//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line and then
//! asserts; all tolerances are pinned below.

use std::time::{Duration, Instant};

use tvoc_core::analytic::{
    asymptotic_solution, check_optimality, cubic_f1, solve, solve_cubic_t1, solve_min_energy,
    solve_tv_particular,
};
use tvoc_core::functional::total_variation;
use tvoc_core::oracle::{
    discretize, residual_report, solve as oracle_solve, solve_lqptv, DiscretizedProblem, LqptvData,
};
use tvoc_core::pareto::{default_alphas, diagnose, log_spaced, sweep};
use tvoc_core::{BoundaryConditions, Weight};

const COEFF_TOL: f64 = 1e-12;
const ROOT_TOL: f64 = 1e-12;
const SYMMETRY_TOL: f64 = 1e-10;
const LIMIT_TOL: f64 = 1e-3;
const CHECK_TOL: f64 = 1e-9;
const OBJECTIVE_GAP: f64 = 1e-3;
const CONTROL_GAP: f64 = 5e-3;
const ETA_GAP: f64 = 5e-3;
const ENDPOINT_TOL: f64 = 1e-3;
const SLOPE_RANGE: (f64, f64) = (0.8, 1.2);
const ORACLE_TOL: f64 = 1e-9;
const ORACLE_MAX_ITER: usize = 50_000;
const N_VERIFY: usize = 2000;
const GRIDS: [usize; 5] = [125, 250, 500, 1000, 2000];

fn report(id: u32, name: &str, passed: bool, detail: &str) {
    println!(
        "criterion {id} [{}] {name}: {detail}",
        if passed { "PASS" } else { "FAIL" }
    );
}

fn w(a: f64) -> Weight {
    Weight::new(a).unwrap()
}

fn coeff_gap(got: &[f64], want: &[f64]) -> f64 {
    (0..got.len().max(want.len()))
        .map(|i| (got.get(i).copied().unwrap_or(0.0) - want.get(i).copied().unwrap_or(0.0)).abs())
        .fold(0.0, f64::max)
}

#[test]
fn criterion_1_min_energy_closed_form() {
    let start = Instant::now();
    let sol = solve_min_energy(BoundaryConditions::particular());
    let single =
        sol.u.num_segments() == 1 && sol.x1.num_segments() == 1 && sol.x2.num_segments() == 1;
    let gaps = [
        coeff_gap(sol.u.segments()[0].coeffs(), &[-4.0, 6.0]),
        coeff_gap(sol.x1.segments()[0].coeffs(), &[0.0, 1.0, -2.0, 1.0]),
        coeff_gap(sol.x2.segments()[0].coeffs(), &[1.0, -4.0, 3.0]),
    ];
    let worst = gaps.iter().copied().fold(0.0, f64::max);
    let tv = total_variation(&sol.u);
    let elapsed = start.elapsed();
    let passed = single
        && worst <= COEFF_TOL
        && (tv - 6.0).abs() <= COEFF_TOL
        && (sol.phi2 - 6.0).abs() <= COEFF_TOL;
    report(
        1,
        "min-energy closed form",
        passed,
        &format!("coefficient gap {worst:.1e}, TV {tv}, {elapsed:?}"),
    );
    assert!(passed);
}

#[test]
fn criterion_2_cubic_root_and_symmetry() {
    let start = Instant::now();
    let alphas = log_spaced(1e-6, 1e6, 50).unwrap();
    let mut worst_root = 0.0_f64;
    let mut worst_sym = 0.0_f64;
    let mut monotone = true;
    let mut prev = 0.0;
    let mut last_t1 = 0.0;
    for a in &alphas {
        let t1 = solve_cubic_t1(a.value()).unwrap();
        worst_root = worst_root.max(cubic_f1(a.value(), t1).abs());
        let sol = solve_tv_particular(*a).unwrap();
        worst_sym = worst_sym.max((sol.t1 + sol.t2 - 1.0).abs());
        monotone &= t1 > prev;
        prev = t1;
        last_t1 = t1;
    }
    let elapsed = start.elapsed();
    let limit = (0.5 - last_t1).abs();
    let passed = worst_root <= ROOT_TOL
        && worst_sym <= SYMMETRY_TOL
        && monotone
        && limit <= LIMIT_TOL
        && elapsed < Duration::from_secs(1);
    report(
        2,
        "cubic root and junction symmetry",
        passed,
        &format!("|f1| {worst_root:.1e}, |t1+t2-1| {worst_sym:.1e}, monotone {monotone}, 1/2 - t1(1e6) {limit:.1e}, {elapsed:?}"),
    );
    assert!(passed);
}

#[test]
fn criterion_3_maximum_principle() {
    let mut alphas = log_spaced(1e-6, 1e6, 50).unwrap();
    alphas.push(w(0.589));
    let mut failures = Vec::new();
    let mut slowest = Duration::ZERO;
    for a in &alphas {
        let start = Instant::now();
        let sol = solve_tv_particular(*a).unwrap();
        let rep = check_optimality(&sol, CHECK_TOL);
        slowest = slowest.max(start.elapsed());
        if !rep.passed {
            failures.push(format!("{a}: {:?}", rep.failed_checks()));
        }
    }
    let passed = failures.is_empty() && slowest < Duration::from_secs(1);
    report(
        3,
        "maximum-principle suite",
        passed,
        &format!(
            "{} weights, {} failed, slowest {slowest:?}",
            alphas.len(),
            failures.len()
        ),
    );
    assert!(passed, "{failures:?}");
}

#[test]
fn criterion_4_analytic_vs_oracle() {
    let bc = BoundaryConditions::particular();
    let mut lines = Vec::new();
    let mut passed = true;
    for a in [0.0, 0.05, 0.4, 1.0, 10.0] {
        let start = Instant::now();
        let exact = solve(bc, w(a)).unwrap();
        let dp = discretize(bc, w(a), N_VERIFY).unwrap();
        let num = oracle_solve(&dp, ORACLE_TOL, ORACLE_MAX_ITER).unwrap();
        let h = dp.dt();
        let obj = exact.objective().unwrap();
        let obj_gap = (num.objective - obj).abs() / obj.abs();
        // Interval controls are compared with the exact control at midpoints.
        let u_gap = num
            .controls
            .iter()
            .enumerate()
            .map(|(k, u)| (u[0] - exact.u.value((k as f64 + 0.5) * h)).abs())
            .fold(0.0, f64::max);
        let res = residual_report(&num, &dp);
        let eta_gap = res
            .eta
            .iter()
            .zip(&res.eta_times)
            .map(|(e, &t)| (e[0] - exact.eta.value(t)).abs())
            .fold(0.0, f64::max);
        let ok = obj_gap <= OBJECTIVE_GAP && u_gap <= CONTROL_GAP && eta_gap <= ETA_GAP;
        passed &= ok;
        lines.push(format!(
            "alpha {a}: obj {obj_gap:.1e}, u {u_gap:.1e}, eta {eta_gap:.1e}, {:?}",
            start.elapsed()
        ));
    }
    report(
        4,
        "analytic vs oracle at N = 2000",
        passed,
        &lines.join("; "),
    );
    assert!(passed);
}

#[test]
fn criterion_5_pareto_front() {
    let start = Instant::now();
    let front = sweep(BoundaryConditions::particular(), &default_alphas()).unwrap();
    let elapsed = start.elapsed();
    let first = &front.points[0];
    let last = front.points.last().unwrap();
    let endpoints = first.alpha.is_zero()
        && last.alpha.is_infinite()
        && (first.phi1 - 2.0).abs() <= ENDPOINT_TOL
        && (first.phi2 - 6.0).abs() <= ENDPOINT_TOL
        && (last.phi1 - 2.5).abs() <= ENDPOINT_TOL
        && (last.phi2 - 4.0).abs() <= ENDPOINT_TOL;
    let d = diagnose(&front);
    let passed =
        front.failed.is_empty() && endpoints && d.all_ok() && elapsed < Duration::from_secs(30);
    report(
        5,
        "Pareto endpoints and shape",
        passed,
        &format!(
            "{} points, ({}, {}) .. ({}, {}), monotonicity {:.1e}, dominated {}, convexity {:.1e}, {elapsed:?}",
            front.points.len(),
            first.phi1,
            first.phi2,
            last.phi1,
            last.phi2,
            d.monotonicity,
            d.dominated_pairs,
            d.convexity
        ),
    );
    assert!(passed);
}

#[test]
fn criterion_6_asymptotic_solution() {
    let s = asymptotic_solution();
    let bc_exact = s.x1.value(0.0) == 0.0
        && s.x2.value(0.0) == 1.0
        && s.x1.value(1.0) == 0.0
        && s.x2.value(1.0) == 0.0;
    let k = s.u.segment_index(0.75);
    let continuous = s.x1.jump(k) == 0.0 && s.x2.jump(k) == 0.0 && s.u.breakpoints()[k] == 0.5;
    let fin = solve_tv_particular(w(1e6)).unwrap();
    let params = [
        (fin.t1, s.t1),
        (fin.t2, s.t2),
        (fin.u1, s.u1),
        (fin.u3, s.u3),
        (fin.phi2, s.phi2),
    ];
    let worst = params
        .iter()
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let passed = bc_exact && continuous && worst <= LIMIT_TOL;
    report(
        6,
        "asymptotic solution",
        passed,
        &format!(
            "boundary exact {bc_exact}, continuous at 1/2 {continuous}, limit gap {worst:.1e}"
        ),
    );
    assert!(passed);
}

#[test]
fn criterion_7_lqptv_specialization() {
    let bc = BoundaryConditions::particular();
    let mut passed = true;
    let start = Instant::now();
    for a in [0.0, 0.4, 10.0] {
        let direct = discretize(bc, w(a), N_VERIFY).unwrap();
        let general =
            DiscretizedProblem::from_lqptv(&LqptvData::double_integrator(bc, w(a), N_VERIFY))
                .unwrap();
        let x = oracle_solve(&direct, ORACLE_TOL, ORACLE_MAX_ITER).unwrap();
        let y = solve_lqptv(&general, ORACLE_TOL, ORACLE_MAX_ITER).unwrap();
        passed &= x.controls == y.controls
            && x.states == y.states
            && x.objective.to_bits() == y.objective.to_bits();
    }
    report(
        7,
        "LQPTV specialization",
        passed,
        &format!(
            "bit-identical controls, states, objective; {:?}",
            start.elapsed()
        ),
    );
    assert!(passed);
}

/// Least-squares slope of `log err` against `log N`.
fn loglog_slope(ns: &[usize], errs: &[f64]) -> f64 {
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    -sxy / sxx
}

#[test]
fn criterion_8_grid_convergence() {
    let bc = BoundaryConditions::particular();
    let start = Instant::now();
    let mut lines = Vec::new();
    let mut passed = true;
    for a in [0.05, 0.4, 1.0, 10.0] {
        let exact = solve(bc, w(a)).unwrap().objective().unwrap();
        let errs: Vec<f64> = GRIDS
            .iter()
            .map(|&n| {
                let dp = discretize(bc, w(a), n).unwrap();
                (oracle_solve(&dp, ORACLE_TOL, ORACLE_MAX_ITER)
                    .unwrap()
                    .objective
                    - exact)
                    .abs()
            })
            .collect();
        let monotone = errs.windows(2).all(|e| e[1] < e[0]);
        let slope = loglog_slope(&GRIDS, &errs);
        passed &= monotone && slope >= SLOPE_RANGE.0 && slope <= SLOPE_RANGE.1;
        lines.push(format!(
            "alpha {a}: slope {slope:.3}, errors {:.2e}..{:.2e}",
            errs[0],
            errs[errs.len() - 1]
        ));
    }
    passed &= start.elapsed() < Duration::from_secs(60);
    report(
        8,
        "grid convergence order in [0.8, 1.2]",
        passed,
        &format!("{}; {:?}", lines.join("; "), start.elapsed()),
    );
    assert!(passed);
}
