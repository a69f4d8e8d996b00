use tvoc_core::analytic::{
    asymptotic_solution, check_optimality, cubic_f1, solve, solve_cubic_t1, solve_min_energy,
    solve_tv_general, solve_tv_particular, StructuralSolution,
};
use tvoc_core::functional::{energy, total_variation};
use tvoc_core::pareto::log_spaced;
use tvoc_core::{BoundaryConditions, Weight};

fn w(a: f64) -> Weight {
    Weight::new(a).unwrap()
}

fn bc(s0: f64, sf: f64, v0: f64, vf: f64) -> BoundaryConditions {
    BoundaryConditions::new(s0, sf, v0, vf).unwrap()
}

/// Root of `4 t^3 - 3 (2 + 1/alpha) t^2 + 1` in `(0, 1/2)` by plain bisection.
fn bisect_t1(alpha: f64) -> f64 {
    let f = |t: f64| 4.0 * t * t * t - 3.0 * (2.0 + 1.0 / alpha) * t * t + 1.0;
    let (mut lo, mut hi) = (0.0, 0.5);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn sup_gap(a: &StructuralSolution, f: impl Fn(f64) -> f64) -> f64 {
    (0..=2000)
        .map(|i| i as f64 / 2000.0)
        .map(|t| (a.u.value(t) - f(t)).abs())
        .fold(0.0, f64::max)
}

#[test]
fn min_energy_matches_hand_solution() {
    for b in [
        bc(0.0, 0.0, 1.0, 0.0),
        bc(-2.0, 3.0, 0.5, -1.5),
        bc(1.0, 1.0, 2.0, 2.0),
        bc(0.0, 0.0, 0.0, 0.0),
    ] {
        // a/2 + b = dv and a/6 + b/2 = e for u = a t + b.
        let dv = b.vf - b.v0;
        let e = b.sf - b.s0 - b.v0;
        let a = 6.0 * dv - 12.0 * e;
        let c = dv - 0.5 * a;
        let sol = solve_min_energy(b);
        assert!(sup_gap(&sol, |t| a * t + c) < 1e-12, "{b}");
        assert!((sol.x1.value(1.0) - b.sf).abs() < 1e-12);
        assert!((sol.x2.value(1.0) - b.vf).abs() < 1e-12);
        assert!(check_optimality(&sol, 1e-9).passed);
    }
}

#[test]
fn junction_time_against_bisection() {
    let grid = log_spaced(1e-6, 1e6, 60).unwrap();
    let mut prev = 0.0;
    for alpha in grid {
        let a = alpha.value();
        let t1 = solve_cubic_t1(a).unwrap();
        assert!(t1 > 0.0 && t1 < 0.5);
        assert!(t1 > prev, "t1 not increasing at alpha {a}");
        prev = t1;
        assert!(cubic_f1(a, t1).abs() <= 1e-12);
        let eps = 1e-9 * t1;
        assert!(
            cubic_f1(a, t1 - eps) * cubic_f1(a, t1 + eps) <= 0.0,
            "no sign change at alpha {a}"
        );
        assert!(
            (t1 - bisect_t1(a)).abs() < 1e-10 * (1.0 + 1.0 / t1),
            "alpha {a}"
        );
    }
}

#[test]
fn particular_closed_form() {
    for a in [1e-4, 0.05, 0.4, 0.589, 1.0, 10.0, 1e3] {
        let sol = solve_tv_particular(w(a)).unwrap();
        let t1 = bisect_t1(a);
        let slope = 2.0 * a / (t1 * t1);
        let u1 = -0.5 * slope * (1.0 - 2.0 * t1) - 1.0;
        assert!((sol.t1 - t1).abs() < 1e-9, "alpha {a}");
        assert!((sol.t1 + sol.t2 - 1.0).abs() < 1e-12);
        assert!(
            (sol.u1 - u1).abs() < 1e-7 * (1.0 + u1.abs()),
            "alpha {a}: {} vs {u1}",
            sol.u1
        );
        assert!((sol.u1 + sol.u3 + 2.0).abs() < 1e-10);
        assert!(sol.lambda1_bar().unwrap() > 0.0);
        assert!((sol.phi1 - energy(&sol.u)).abs() < 1e-14);
        assert!((sol.phi2 - total_variation(&sol.u)).abs() < 1e-12 * sol.phi2);
        assert!((sol.phi2 - (sol.u3 - sol.u1)).abs() < 1e-9);
        let report = check_optimality(&sol, 1e-9);
        assert!(report.passed, "alpha {a}: {:?}", report.failed_checks());
    }
}

#[test]
fn unit_weight_values() {
    let sol = solve_tv_particular(w(1.0)).unwrap();
    // numpy.roots([4, -9, 0, 1])
    assert!((sol.t1 - 0.36409072).abs() < 1e-8);
    assert!((sol.t1 - bisect_t1(1.0)).abs() < 1e-12);
}

#[test]
fn small_weight_approaches_min_energy() {
    let mut prev = f64::INFINITY;
    for a in [1e-1, 1e-2, 1e-3, 1e-4] {
        let gap = sup_gap(&solve_tv_particular(w(a)).unwrap(), |t| 6.0 * t - 4.0);
        assert!(gap < prev, "not decreasing at {a}");
        prev = gap;
    }
    assert!(prev < 0.05);
}

#[test]
fn large_weight_approaches_asymptote() {
    let lim = asymptotic_solution();
    let sol = solve_tv_particular(w(1e6)).unwrap();
    for (x, y) in [
        (sol.t1, lim.t1),
        (sol.t2, lim.t2),
        (sol.u1, lim.u1),
        (sol.u3, lim.u3),
        (sol.phi2, lim.phi2),
    ] {
        assert!((x - y).abs() < 1e-3);
    }
    assert!((sol.phi1 - 2.5).abs() < 1e-3);
}

#[test]
fn asymptotic_trajectories() {
    let s = asymptotic_solution();
    assert_eq!(s.x1.value(0.0), 0.0);
    assert_eq!(s.x2.value(0.0), 1.0);
    assert!(s.x1.value(1.0).abs() < 1e-15);
    assert!(s.x2.value(1.0).abs() < 1e-15);
    assert!((s.x1.value(0.5) - 0.125).abs() < 1e-15);
    assert!((s.x2.value(0.5) + 0.5).abs() < 1e-15);
    assert_eq!((s.phi1, s.phi2), (2.5, 4.0));
    assert!(check_optimality(&s, 1e-9).passed);
}

/// Any instance reduces to the running one at weight `alpha / (2 |K|)`:
/// `u = dv - 2 K (u_p + 1)` with `u_p` the running-instance control.
#[test]
fn general_instances_rescale_running_instance() {
    for b in [
        bc(-2.0, 3.0, 0.5, -1.5),
        bc(0.0, 1.0, 0.0, 0.0),
        bc(0.0, -1.0, 0.0, 0.0),
        bc(1.0, 1.0, 2.0, 2.0),
    ] {
        let k = b.imbalance();
        let dv = b.vf - b.v0;
        for a in [0.01, 0.3, 2.0, 50.0] {
            let sol = solve_tv_general(b, w(a)).unwrap();
            let p = solve_tv_particular(w(a / (2.0 * k.abs()))).unwrap();
            let gap = sup_gap(&sol, |t| dv - 2.0 * k * (p.u.value(t) + 1.0));
            assert!(gap < 1e-8 * (1.0 + k.abs()), "{b} alpha {a}: {gap}");
            assert!((sol.t1 - p.t1).abs() < 1e-9);
            assert!((sol.phi2 - 2.0 * k.abs() * p.phi2).abs() < 1e-8 * (1.0 + k.abs()));
            let report = check_optimality(&sol, 1e-9);
            assert!(report.passed, "{b} alpha {a}: {:?}", report.failed_checks());
        }
    }
}

#[test]
fn balanced_instance_is_constant() {
    let b = bc(0.0, 1.5, 1.0, 2.0);
    assert_eq!(b.imbalance(), 0.0);
    let sol = solve(b, w(0.7)).unwrap();
    assert!(sup_gap(&sol, |_| 1.0) < 1e-14);
    assert_eq!(sol.phi2, 0.0);
}

#[test]
fn general_solver_on_running_instance() {
    let b = BoundaryConditions::particular();
    for a in [0.05, 1.0, 10.0] {
        let g = solve_tv_general(b, w(a)).unwrap();
        let p = solve_tv_particular(w(a)).unwrap();
        assert!((g.t1 - p.t1).abs() < 1e-10);
        assert!(sup_gap(&g, |t| p.u.value(t)) < 1e-9);
    }
}

#[test]
fn infinite_weight_needs_running_instance() {
    assert!(solve(bc(0.0, 1.0, 0.0, 0.0), Weight::INFINITY).is_err());
    assert_eq!(
        solve(BoundaryConditions::particular(), Weight::INFINITY)
            .unwrap()
            .phi2,
        4.0
    );
}
