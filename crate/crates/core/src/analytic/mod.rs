//! Closed-form and structural solutions of the energy / total-variation problem.
//!
//! With weight `alpha > 0` the optimal control has at most three pieces:
//! constant `u1` on `[0, t1)`, a singular ramp of slope `lambda1_bar` on
//! `[t1, t2)`, and constant `u3` on `[t2, 1]`, with `t1 + t2 = 1`.

mod general;
mod optimality;

pub use general::solve_tv_general;
pub use optimality::{check_optimality, Check, OptimalityReport, GRID_POINTS};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functional::{energy, total_variation};
use crate::piecewise::{PiecewisePolynomial, Polynomial};
use crate::problem::{BoundaryConditions, Weight};

/// Constants of the adjoints: `lambda_1(t) = lambda1_bar`,
/// `lambda_2(t) = -lambda1_bar * t - c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdjointParams {
    pub lambda1_bar: f64,
    pub c: f64,
}

impl AdjointParams {
    pub fn lambda2(&self) -> Polynomial {
        Polynomial::linear(-self.c, -self.lambda1_bar)
    }
}

/// Structural parameters of an optimal control together with the assembled
/// trajectories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuralSolution {
    pub bc: BoundaryConditions,
    pub alpha: Weight,
    pub t1: f64,
    pub t2: f64,
    pub u1: f64,
    pub u3: f64,
    /// `None` for the infinite-weight limit, where `lambda1_bar` diverges.
    pub adjoint: Option<AdjointParams>,
    pub u: PiecewisePolynomial,
    pub x1: PiecewisePolynomial,
    pub x2: PiecewisePolynomial,
    /// Adjoint of the control state. For the infinite-weight limit this holds
    /// the limit of `eta / alpha` instead, since `eta` itself diverges.
    pub eta: PiecewisePolynomial,
    pub phi1: f64,
    pub phi2: f64,
}

impl StructuralSolution {
    /// Assembles the three-piece control and its trajectories.
    ///
    /// The control is `u1` before `t1`, `u1 + lambda1_bar (t - t1)` on
    /// `[t1, t2)` and `u3` from `t2` on; `x2` and `x1` follow by exact
    /// integration from the initial conditions. `eta` is quadratic outside
    /// the arc and equal to `plateau` on it. `phi1` and `phi2` are computed
    /// from the assembled control.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parameters(
        bc: BoundaryConditions,
        alpha: Weight,
        t1: f64,
        t2: f64,
        lambda1_bar: f64,
        u1: f64,
        u3: f64,
        plateau: f64,
    ) -> Result<Self> {
        if !(0.0 <= t1 && t1 <= t2 && t2 <= 1.0) {
            return Err(Error::invalid(format!(
                "junction times must satisfy 0 <= t1 <= t2 <= 1, got t1={t1}, t2={t2}"
            )));
        }
        let l = lambda1_bar;
        let u_pieces = [
            Polynomial::constant(u1),
            Polynomial::linear(u1 - l * t1, l),
            Polynomial::constant(u3),
        ];
        // eta = l/2 (t^2 - 2 t1 t) before the arc, l/2 (t^2 + 2 t2 (1 - t) - 1) after.
        let eta_pieces = [
            Polynomial::new(vec![0.0, -l * t1, 0.5 * l]),
            Polynomial::constant(plateau),
            Polynomial::new(vec![0.5 * l * (2.0 * t2 - 1.0), -l * t2, 0.5 * l]),
        ];
        let (bps, keep) = layout(t1, t2);
        let pick = |pieces: &[Polynomial; 3]| keep.iter().map(|&i| pieces[i].clone()).collect();
        let u = PiecewisePolynomial::from_global_pieces(bps.clone(), pick(&u_pieces))?;
        let eta = PiecewisePolynomial::from_global_pieces(bps, pick(&eta_pieces))?;
        let x2 = u.integrate(bc.v0);
        let x1 = x2.integrate(bc.s0);
        Ok(StructuralSolution {
            bc,
            alpha,
            t1,
            t2,
            u1,
            u3,
            adjoint: Some(AdjointParams {
                lambda1_bar: l,
                c: u1 - l * t1,
            }),
            phi1: energy(&u),
            phi2: total_variation(&u),
            u,
            x1,
            x2,
            eta,
        })
    }

    pub fn lambda1_bar(&self) -> Option<f64> {
        self.adjoint.map(|a| a.lambda1_bar)
    }

    /// `phi1 + alpha * phi2`; `None` for infinite weight.
    pub fn objective(&self) -> Option<f64> {
        (!self.alpha.is_infinite()).then(|| self.phi1 + self.alpha.value() * self.phi2)
    }

    /// `eta / alpha`. `None` when `alpha = 0`, where the ratio is undefined.
    pub fn eta_over_alpha(&self) -> Option<PiecewisePolynomial> {
        if self.alpha.is_zero() {
            None
        } else if self.alpha.is_infinite() {
            Some(self.eta.clone())
        } else {
            Some(self.eta.scaled(1.0 / self.alpha.value()))
        }
    }
}

/// Breakpoints `[0, t1, t2, 1]` without zero-length pieces, and the indices of
/// the surviving pieces.
fn layout(t1: f64, t2: f64) -> (Vec<f64>, Vec<usize>) {
    let mut bps = vec![0.0];
    let mut keep = Vec::new();
    for (i, (a, b)) in [(0.0, t1), (t1, t2), (t2, 1.0)].into_iter().enumerate() {
        if b > a {
            keep.push(i);
            bps.push(b);
        }
    }
    (bps, keep)
}

/// Minimum-energy control (zero weight): `u(t) = lambda1_bar t + c`.
pub fn solve_min_energy(bc: BoundaryConditions) -> StructuralSolution {
    let ds = bc.sf - bc.s0;
    let lambda1_bar = -12.0 * ds + 6.0 * (bc.v0 + bc.vf);
    let c = 6.0 * ds - 2.0 * (2.0 * bc.v0 + bc.vf);
    let mut sol = StructuralSolution::from_parameters(
        bc,
        Weight::ZERO,
        0.0,
        1.0,
        lambda1_bar,
        c,
        lambda1_bar + c,
        0.0,
    )
    .expect("unit interval layout is valid");
    sol.phi2 = (12.0 * ds - 6.0 * (bc.v0 + bc.vf)).abs();
    sol
}

/// `f1(t) = 4 t^3 - 3 (2 + 1/alpha) t^2 + 1`.
pub fn cubic_f1(alpha: f64, t: f64) -> f64 {
    let b = 3.0 * (2.0 + 1.0 / alpha);
    (4.0 * t - b) * t * t + 1.0
}

fn cubic_f1_prime(alpha: f64, t: f64) -> f64 {
    t * (12.0 * t - 6.0 * (2.0 + 1.0 / alpha))
}

/// Unique root in `[0, 1]` of `f1` for `alpha > 0`.
///
/// `f1(0) = 1 > 0`, `f1(1) = -3/alpha < 0` and `f1' < 0` on `(0, 1]`, so the
/// bracket is valid and the root simple. Bisection narrows it to width 1e-6,
/// then safeguarded Newton polishes.
pub fn solve_cubic_t1(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::WeightDomain(format!(
            "the cubic needs a finite positive weight, got {alpha}; use solve_min_energy for 0 and asymptotic_solution for inf"
        )));
    }
    let f = |t| cubic_f1(alpha, t);
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut t = 0.5 * (lo + hi);
    for _ in 0..100 {
        let ft = f(t);
        if ft == 0.0 {
            break;
        }
        if ft > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let mut next = t - ft / cubic_f1_prime(alpha, t);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if next == t || hi - lo <= f64::EPSILON * hi {
            break;
        }
        t = next;
    }
    // The last Newton step may overshoot by an ulp; keep the better endpoint.
    Ok([t, lo, hi]
        .into_iter()
        .min_by(|a, b| f(*a).abs().total_cmp(&f(*b).abs()))
        .unwrap())
}

/// `(t1, t2, t2 - t1)` from the root of `f1`.
///
/// For large weights `t1` approaches 1/2 and `1 - 2 t1` loses relative
/// accuracy, which `u1` and `phi2` amplify by `lambda1_bar ~ 8 alpha`. In
/// terms of the arc length `d = 1 - 2 t1` the cubic reads
/// `d (3 - d^2) = 3 (1 - d)^2 / (2 alpha)`, which is well conditioned for
/// small `d`; the root is refined there by Newton.
fn junctions(alpha: f64, t1: f64) -> (f64, f64, f64) {
    if t1 <= 0.25 {
        return (t1, 1.0 - t1, 1.0 - 2.0 * t1);
    }
    let g = |d: f64| d * (3.0 - d * d) - 3.0 * (1.0 - d) * (1.0 - d) / (2.0 * alpha);
    let dg = |d: f64| 3.0 - 3.0 * d * d + 3.0 * (1.0 - d) / alpha;
    let mut d = 1.0 - 2.0 * t1;
    for _ in 0..50 {
        let next = d - g(d) / dg(d);
        if !(next > 0.0 && next < 1.0) || (next - d).abs() <= f64::EPSILON * d {
            if next > 0.0 && next < 1.0 {
                d = next;
            }
            break;
        }
        d = next;
    }
    (0.5 * (1.0 - d), 0.5 * (1.0 + d), d)
}

/// Closed-form solution for the running instance `bc = (0, 0, 1, 0)`.
pub fn solve_tv_particular(alpha: Weight) -> Result<StructuralSolution> {
    if !alpha.is_finite_positive() {
        return Err(Error::WeightDomain(format!(
            "solve_tv_particular needs 0 < alpha < inf, got {alpha}; use solve_min_energy or asymptotic_solution"
        )));
    }
    let a = alpha.value();
    let (t1, t2, d) = junctions(a, solve_cubic_t1(a)?);
    let lambda1_bar = 2.0 * a / (t1 * t1);
    let u1 = -0.5 * lambda1_bar * d - 1.0;
    let u3 = -(u1 + 2.0);
    // Continuity with the left quadratic piece: eta(t1) = -lambda1_bar t1^2 / 2 = -alpha.
    let mut sol = StructuralSolution::from_parameters(
        BoundaryConditions::particular(),
        alpha,
        t1,
        t2,
        lambda1_bar,
        u1,
        u3,
        -a,
    )?;
    sol.phi1 = 0.5 * ((u1 * u1 + u3 * u3) * t1 + (u3.powi(3) - u1.powi(3)) / (3.0 * lambda1_bar));
    sol.phi2 = u3 - u1;
    Ok(sol)
}

/// Infinite-weight limit on the running instance: `u = -3` then `1`,
/// switching at `t = 1/2`.
pub fn asymptotic_solution() -> StructuralSolution {
    let bc = BoundaryConditions::particular();
    let bps = vec![0.0, 0.5, 1.0];
    let u = PiecewisePolynomial::from_global_pieces(
        bps.clone(),
        vec![Polynomial::constant(-3.0), Polynomial::constant(1.0)],
    )
    .expect("valid layout");
    let x2 = u.integrate(bc.v0);
    let x1 = x2.integrate(bc.s0);
    // Limit of eta / alpha along the finite-weight family: 4 t (t - 1).
    let eta = PiecewisePolynomial::from_global_pieces(
        bps.clone(),
        vec![Polynomial::new(vec![0.0, -4.0, 4.0]); 2],
    )
    .expect("valid layout");
    StructuralSolution {
        bc,
        alpha: Weight::INFINITY,
        t1: 0.5,
        t2: 0.5,
        u1: -3.0,
        u3: 1.0,
        adjoint: None,
        phi1: energy(&u),
        phi2: total_variation(&u),
        u,
        x1,
        x2,
        eta,
    }
}

/// Dispatches on the weight: zero, infinite, the closed form on the running
/// instance, or the structural Newton solve otherwise.
pub fn solve(bc: BoundaryConditions, alpha: Weight) -> Result<StructuralSolution> {
    if alpha.is_zero() {
        Ok(solve_min_energy(bc))
    } else if alpha.is_infinite() {
        if bc.is_particular() {
            Ok(asymptotic_solution())
        } else {
            Err(Error::Unsupported(
                "the infinite-weight limit is only available for bc = 0,0,1,0".into(),
            ))
        }
    } else if bc.is_particular() {
        solve_tv_particular(alpha)
    } else {
        solve_tv_general(bc, alpha)
    }
}
