//! Weighted-sum sweep of the energy / total-variation front.
//!
//! Each weight is solved independently (in parallel) and every solution is
//! run through the optimality checker; failures are kept in
//! [`ParetoFront::failed`] instead of being dropped.

mod frames;
mod svg;

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{check_optimality, solve, StructuralSolution};
use crate::error::{Error, Result};
use crate::problem::{BoundaryConditions, Weight};

pub use frames::{frames, FrameData, FRAME_POINTS};
pub use svg::{frame_svg, front_svg};

/// Tolerance used when checking each swept solution.
pub const CHECK_TOL: f64 = 1e-9;
/// Slack for the monotonicity, dominance and convexity diagnostics.
pub const SHAPE_SLACK: f64 = 1e-9;
/// Relative slack of the weighted-sum consistency diagnostic.
pub const WEIGHTED_SUM_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub alpha: Weight,
    pub phi1: f64,
    pub phi2: f64,
    /// Index into [`ParetoFront::solutions`].
    pub solution_ref: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedPoint {
    pub alpha: Weight,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoFront {
    pub instance: BoundaryConditions,
    /// Ordered by increasing weight.
    pub points: Vec<ParetoPoint>,
    pub failed: Vec<FailedPoint>,
    pub solutions: Vec<StructuralSolution>,
}

impl ParetoFront {
    pub fn solution(&self, point: &ParetoPoint) -> &StructuralSolution {
        &self.solutions[point.solution_ref]
    }

    /// Point with exactly this weight, if it was solved.
    pub fn point(&self, alpha: Weight) -> Option<&ParetoPoint> {
        self.points.iter().find(|p| p.alpha == alpha)
    }

    /// CSV with columns `alpha,phi1,phi2,t1,t2,u1,u3`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["alpha", "phi1", "phi2", "t1", "t2", "u1", "u3"])?;
        for p in &self.points {
            let s = self.solution(p);
            let mut row = vec![p.alpha.to_string()];
            row.extend(
                [p.phi1, p.phi2, s.t1, s.t2, s.u1, s.u3]
                    .iter()
                    .map(f64::to_string),
            );
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `count` log-spaced weights in `[min, max]`.
pub fn log_spaced(min: f64, max: f64, count: usize) -> Result<Vec<Weight>> {
    if !(min > 0.0 && max >= min && max.is_finite()) || count == 0 {
        return Err(Error::invalid(format!(
            "bad log range {min}..{max} x {count}"
        )));
    }
    if count == 1 {
        return Ok(vec![Weight::new(min)?]);
    }
    let (a, b) = (min.log10(), max.log10());
    (0..count)
        .map(|i| {
            let v = if i + 1 == count {
                max
            } else {
                10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64)
            };
            Weight::new(v)
        })
        .collect()
}

/// 200 log-spaced weights in `[1e-6, 1e6]` plus the endpoints 0 and infinity.
pub fn default_alphas() -> Vec<Weight> {
    let mut v = vec![Weight::ZERO];
    v.extend(log_spaced(1e-6, 1e6, 200).expect("valid range"));
    v.push(Weight::INFINITY);
    v
}

/// Weight for the scalarization `a1 phi1 + (1 - a1) phi2`, `a1` in `(0, 1]`.
pub fn alpha_from_energy_share(a1: f64) -> Result<Weight> {
    Weight::from_energy_share(a1)
}

/// Solves every weight and assembles the front. Weights must be nonempty,
/// strictly increasing and nonnegative.
pub fn sweep(bc: BoundaryConditions, alphas: &[Weight]) -> Result<ParetoFront> {
    if alphas.is_empty() {
        return Err(Error::invalid("empty weight list"));
    }
    for w in alphas.windows(2) {
        if w[1].value() <= w[0].value() {
            let what = if w[1] == w[0] {
                "duplicate"
            } else {
                "unsorted"
            };
            return Err(Error::invalid(format!(
                "{what} weights: {} then {}",
                w[0], w[1]
            )));
        }
    }

    let results: Vec<std::result::Result<StructuralSolution, String>> = alphas
        .par_iter()
        .map(|&alpha| {
            let sol = solve(bc, alpha).map_err(|e| e.to_string())?;
            let report = check_optimality(&sol, CHECK_TOL);
            if report.passed {
                Ok(sol)
            } else {
                Err(format!(
                    "optimality check failed: {}",
                    report.failed_checks().join(", ")
                ))
            }
        })
        .collect();

    let mut front = ParetoFront {
        instance: bc,
        points: Vec::new(),
        failed: Vec::new(),
        solutions: Vec::new(),
    };
    for (&alpha, r) in alphas.iter().zip(results) {
        match r {
            Ok(sol) => {
                front.points.push(ParetoPoint {
                    alpha,
                    phi1: sol.phi1,
                    phi2: sol.phi2,
                    solution_ref: front.solutions.len(),
                });
                front.solutions.push(sol);
            }
            Err(reason) => front.failed.push(FailedPoint { alpha, reason }),
        }
    }
    Ok(front)
}

/// Worst violations of the front-shape properties; each `*_ok` flag compares
/// against [`SHAPE_SLACK`] or [`WEIGHTED_SUM_SLACK`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontDiagnostics {
    /// Largest increase of `phi2` or decrease of `phi1` between neighbours.
    pub monotonicity: f64,
    pub monotone_ok: bool,
    /// Number of ordered pairs `(a, b)` with `a` no worse in both objectives
    /// and better by more than [`SHAPE_SLACK`] in one.
    pub dominated_pairs: usize,
    pub nondominated_ok: bool,
    /// Largest distance of a point above the chord of its neighbours.
    pub convexity: f64,
    pub convex_ok: bool,
    /// Largest relative excess of a point's own scalarized value over the
    /// best value on the front.
    pub weighted_sum: f64,
    pub weighted_sum_ok: bool,
}

impl FrontDiagnostics {
    pub fn all_ok(&self) -> bool {
        self.monotone_ok && self.nondominated_ok && self.convex_ok && self.weighted_sum_ok
    }
}

pub fn diagnose(front: &ParetoFront) -> FrontDiagnostics {
    let pts: Vec<(f64, f64)> = front.points.iter().map(|p| (p.phi1, p.phi2)).collect();

    let monotonicity = pts
        .windows(2)
        .map(|w| (w[0].0 - w[1].0).max(w[1].1 - w[0].1))
        .fold(0.0_f64, f64::max);

    let mut dominated_pairs = 0;
    for (i, a) in pts.iter().enumerate() {
        for (j, b) in pts.iter().enumerate() {
            let weakly = a.0 <= b.0 && a.1 <= b.1;
            let strictly = a.0 < b.0 - SHAPE_SLACK || a.1 < b.1 - SHAPE_SLACK;
            if i != j && weakly && strictly {
                dominated_pairs += 1;
            }
        }
    }

    // Height of the middle point above the chord of its neighbours.
    let convexity = pts
        .windows(3)
        .map(|w| {
            let (p, q, r) = (w[0], w[1], w[2]);
            let dx = r.0 - p.0;
            if dx <= 0.0 {
                return 0.0;
            }
            let chord = p.1 + (r.1 - p.1) * (q.0 - p.0) / dx;
            q.1 - chord
        })
        .fold(0.0_f64, f64::max);

    let mut weighted_sum = 0.0_f64;
    for p in &front.points {
        let a = p.alpha.value();
        let (own, best, scale) = if p.alpha.is_infinite() {
            let best = pts.iter().map(|q| q.1).fold(f64::INFINITY, f64::min);
            (p.phi2, best, 1.0 + p.phi2.abs())
        } else {
            let f = |q: (f64, f64)| q.0 + a * q.1;
            let best = pts.iter().map(|&q| f(q)).fold(f64::INFINITY, f64::min);
            (f((p.phi1, p.phi2)), best, 1.0 + f((p.phi1, p.phi2)).abs())
        };
        weighted_sum = weighted_sum.max((own - best) / scale);
    }

    FrontDiagnostics {
        monotonicity,
        monotone_ok: monotonicity <= SHAPE_SLACK,
        dominated_pairs,
        nondominated_ok: dominated_pairs == 0,
        convexity,
        convex_ok: convexity <= SHAPE_SLACK,
        weighted_sum,
        weighted_sum_ok: weighted_sum <= WEIGHTED_SUM_SLACK,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_weight_lists() {
        let bc = BoundaryConditions::particular();
        let w = |v: f64| Weight::new(v).unwrap();
        assert!(sweep(bc, &[]).is_err());
        assert!(sweep(bc, &[w(1.0), w(0.5)]).is_err());
        assert!(sweep(bc, &[w(1.0), w(1.0)]).is_err());
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_spaced(1e-6, 1e6, 200).unwrap();
        assert_eq!(g.len(), 200);
        assert_eq!(g[0].value(), 1e-6);
        assert_eq!(g[199].value(), 1e6);
        assert!(g.windows(2).all(|w| w[1].value() > w[0].value()));
        let d = default_alphas();
        assert_eq!(d.len(), 202);
        assert!(d[0].is_zero() && d[201].is_infinite());
    }

    #[test]
    fn unsupported_weight_is_recorded_not_fatal() {
        let bc = BoundaryConditions::new(0.0, 1.0, 0.0, 0.0).unwrap();
        let front = sweep(
            bc,
            &[Weight::ZERO, Weight::new(0.5).unwrap(), Weight::INFINITY],
        )
        .unwrap();
        assert_eq!(front.points.len(), 2);
        assert_eq!(front.failed.len(), 1);
        assert!(front.failed[0].alpha.is_infinite());
    }

    #[test]
    fn csv_writes_inf() {
        let front = sweep(
            BoundaryConditions::particular(),
            &[Weight::new(1.0).unwrap(), Weight::INFINITY],
        )
        .unwrap();
        let mut buf = Vec::new();
        front.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "alpha,phi1,phi2,t1,t2,u1,u3");
        assert!(lines[2].starts_with("inf,2.5,4,0.5,0.5,-3,1"));
    }
}
