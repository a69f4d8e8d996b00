//! Structural Newton solve for arbitrary boundary conditions.
//!
//! Unknowns `(d, lambda1_bar, u1, u3)` with arc length `d = t2 - t1` and
//! `t1 = (1 - d) / 2`, `t2 = (1 + d) / 2`; working with `d` keeps the arc
//! accurate when it is short (large weights). Residuals:
//!
//! * `lambda1_bar t1^2 / (2 alpha) + sigma`, i.e. `eta(t1) = sigma alpha`
//!   where `sigma = ±1` is the plateau sign;
//! * `u3 - u1 - lambda1_bar d`, continuity of the control at `t2`;
//! * `x2(1) - vf` and `x1(1) - sf`, integrated exactly from the three-piece
//!   control.

use nalgebra::{Matrix4, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_optimality, solve_min_energy, StructuralSolution};
use crate::error::{Error, Result};
use crate::problem::{BoundaryConditions, Weight};

const MAX_NEWTON: usize = 200;
const RESTARTS: usize = 8;
const RESTART_SEED: u64 = 0x7f4a_7c15;
const RESIDUAL_TOL: f64 = 1e-13;
const CHECK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy)]
struct Unknowns {
    d: f64,
    lambda: f64,
    u1: f64,
    u3: f64,
}

impl Unknowns {
    fn to_vec(self) -> Vector4<f64> {
        Vector4::new(self.d, self.lambda, self.u1, self.u3)
    }

    fn from_vec(v: &Vector4<f64>) -> Self {
        Unknowns {
            d: v[0],
            lambda: v[1],
            u1: v[2],
            u3: v[3],
        }
    }
}

struct System {
    bc: BoundaryConditions,
    alpha: f64,
    sigma: f64,
}

impl System {
    fn residual(&self, z: Unknowns) -> Vector4<f64> {
        let Unknowns {
            d,
            lambda: l,
            u1,
            u3,
        } = z;
        let bc = &self.bc;
        let t = 0.5 * (1.0 - d);
        Vector4::new(
            l * t * t / (2.0 * self.alpha) + self.sigma,
            u3 - u1 - l * d,
            bc.v0 - bc.vf + u1 * (1.0 - t) + 0.5 * l * d * d + u3 * t,
            bc.s0 + bc.v0 - bc.sf
                + 0.5 * u1 * (1.0 - t * t)
                + l * ramp_moment(d)
                + 0.5 * u3 * t * t,
        )
    }

    fn jacobian(&self, z: Unknowns) -> Matrix4<f64> {
        let Unknowns {
            d,
            lambda: l,
            u1,
            u3,
        } = z;
        let t = 0.5 * (1.0 - d);
        let a = self.alpha;
        Matrix4::new(
            -l * t / (2.0 * a),
            t * t / (2.0 * a),
            0.0,
            0.0,
            -l,
            -d,
            -1.0,
            1.0,
            l * d - 0.5 * (u3 - u1),
            0.5 * d * d,
            1.0 - t,
            t,
            -0.5 * (u3 - u1) * t + l * ramp_moment_dd(d),
            ramp_moment(d),
            0.5 * (1.0 - t * t),
            0.5 * t * t,
        )
    }

    /// Scale of the control-unit residuals.
    fn scale(&self, z: Unknowns) -> f64 {
        1.0 + z.u1.abs() + z.u3.abs() + self.bc.scale()
    }

    fn norm(&self, z: Unknowns) -> f64 {
        let r = self.residual(z);
        let s = self.scale(z);
        r[0].abs()
            .max(r[1].abs() / s)
            .max(r[2].abs() / s)
            .max(r[3].abs() / s)
    }

    /// Damped Newton keeping `d` inside `(0, 1)`.
    fn newton(&self, start: Unknowns) -> (Unknowns, f64) {
        let mut z = start;
        let mut norm = self.norm(z);
        let mut polish = 0;
        for _ in 0..MAX_NEWTON {
            if norm <= RESIDUAL_TOL {
                polish += 1;
                if polish > 2 {
                    break;
                }
            }
            let Some(step) = self.jacobian(z).lu().solve(&-self.residual(z)) else {
                break;
            };
            let mut damping = 1.0;
            let mut accepted = None;
            for _ in 0..60 {
                let cand = Unknowns::from_vec(&(z.to_vec() + step * damping));
                if cand.d > 0.0 && cand.d < 1.0 {
                    let n = self.norm(cand);
                    if n < norm || (polish > 0 && n <= RESIDUAL_TOL) {
                        accepted = Some((cand, n));
                        break;
                    }
                }
                damping *= 0.5;
            }
            match accepted {
                Some((cand, n)) => {
                    z = cand;
                    norm = n;
                }
                None => break,
            }
        }
        (z, norm)
    }
}

/// `int_{t1}^{t2} (1 - t)(t - t1) dt` with `d = t2 - t1`, `t1 + t2 = 1`:
/// contribution of the unit-slope part of the arc to `x1(1)`.
fn ramp_moment(d: f64) -> f64 {
    d * d / 4.0 - d * d * d / 12.0
}

fn ramp_moment_dd(d: f64) -> f64 {
    d / 2.0 - d * d / 4.0
}

/// Solves the three-piece structure for arbitrary boundary conditions.
///
/// The first Newton start is read off the minimum-energy control
/// (`t1 = 1/4`); up to eight seeded restarts follow, each drawn on the set
/// where the plateau and continuity equations already hold. Both plateau
/// signs are tried and a candidate is returned only if it passes
/// [`check_optimality`] at 1e-9.
pub fn solve_tv_general(bc: BoundaryConditions, alpha: Weight) -> Result<StructuralSolution> {
    if !alpha.is_finite_positive() {
        return Err(Error::WeightDomain(format!(
            "solve_tv_general needs 0 < alpha < inf, got {alpha}"
        )));
    }
    let a = alpha.value();
    let k = bc.imbalance();

    if k.abs() <= 1e-15 * bc.scale() {
        // A constant control meets both terminal conditions; it is optimal
        // for energy and has zero variation.
        let dv = bc.velocity_change();
        let sol = StructuralSolution::from_parameters(bc, alpha, 0.0, 1.0, 0.0, dv, dv, 0.0)?;
        return Ok(sol);
    }

    let energy = solve_min_energy(bc);
    let seed = Unknowns {
        d: 0.5,
        lambda: energy.lambda1_bar().unwrap(),
        u1: energy.u.value(0.25),
        u3: energy.u.value(0.75),
    };

    let mut best = f64::INFINITY;
    let mut last_failure = String::from("Newton did not converge");
    let preferred = if k > 0.0 { 1.0 } else { -1.0 };
    for sigma in [preferred, -preferred] {
        let sys = System {
            bc,
            alpha: a,
            sigma,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(RESTART_SEED);
        for attempt in 0..=RESTARTS {
            let start = if attempt == 0 {
                seed
            } else {
                let t1 = rng.gen_range(0.01..0.49);
                restart_point(&sys, t1)
            };
            let (z, norm) = sys.newton(start);
            best = best.min(norm);
            if norm > RESIDUAL_TOL * 1e3 {
                continue;
            }
            let mut sol = StructuralSolution::from_parameters(
                bc,
                alpha,
                0.5 * (1.0 - z.d),
                0.5 * (1.0 + z.d),
                z.lambda,
                z.u1,
                z.u3,
                sigma * a,
            )?;
            // The control is monotone and continuous (checked below).
            sol.phi2 = (z.u3 - z.u1).abs();
            let report = check_optimality(&sol, CHECK_TOL);
            if report.passed {
                return Ok(sol);
            }
            last_failure = format!("candidate failed {}", report.failed_checks().join(", "));
        }
    }
    Err(Error::NoStructuralSolution {
        best_residual: best,
        reason: last_failure,
    })
}

/// Point with the given `t1` satisfying the plateau, continuity and
/// terminal-velocity equations exactly.
fn restart_point(sys: &System, t1: f64) -> Unknowns {
    let lambda = -sys.sigma * 2.0 * sys.alpha / (t1 * t1);
    let d = 1.0 - 2.0 * t1;
    // u3 = u1 + lambda d and u1 (1 - t1) + u3 t1 = vf - v0 - lambda d^2 / 2
    let rhs = sys.bc.velocity_change() - 0.5 * lambda * d * d;
    let u1 = rhs - lambda * d * t1;
    Unknowns {
        d,
        lambda,
        u1,
        u3: u1 + lambda * d,
    }
}
