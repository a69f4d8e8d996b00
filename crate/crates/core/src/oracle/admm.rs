//! ADMM on `min f(u) + alpha TV(z)` s.t. `u = z`, with `f` the energy
//! restricted to controls meeting the terminal constraint.
//!
//! The penalty is `(rho dt / 2) ||u - z + w||^2`. The u-step is an
//! equality-constrained quadratic solved with a factorization cached per
//! `rho`: for `Q = 0` the states are eliminated (`sum_k G_k u_k = b`, an
//! `n x n` Schur complement), otherwise the interleaved KKT system is
//! factored as a band matrix. The z-step is the exact TV prox per control
//! component.
//!
//! ADMM alone converges slowly on flat runs, so every few iterations the run
//! structure of `z` is frozen and the resulting small linear system is solved
//! exactly ("polish"). The outcome is accepted only through the KKT
//! certificate.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::banded::{BandedLu, BandedMatrix};
use super::certificate::costates_from_nu;
use super::tv_prox::tv_prox;
use super::{DiscretizedProblem, OracleSolution, SolverSettings, StartPoint};
use crate::error::{Error, Result};

const POLISH_EVERY: usize = 25;
const CERTIFY_EVERY: usize = 250;
const BALANCE_EVERY: usize = 10;
const BALANCE_RATIO: f64 = 10.0;
const RHO_RANGE: (f64, f64) = (1e-8, 1e12);

/// Terminal map with states eliminated: `x_N = Phi x0 + sum_k G_k u_k`.
struct Reduction {
    n: usize,
    m: usize,
    /// `G_k`, row-major `n x m` blocks.
    g: Vec<f64>,
    b: DVector<f64>,
}

impl Reduction {
    fn new(dp: &DiscretizedProblem) -> Self {
        let (n, m, big_n) = (dp.state_dim(), dp.control_dim(), dp.n_steps());
        let mut g = vec![0.0; big_n * n * m];
        let mut prod = DMatrix::<f64>::identity(n, n);
        for k in (0..big_n).rev() {
            let st = &dp.stages()[k];
            let gk = &prod * &st.gamma;
            for i in 0..n {
                for j in 0..m {
                    g[(k * n + i) * m + j] = gk[(i, j)];
                }
            }
            prod = &prod * &st.phi;
        }
        let b = dp.xf() - prod * dp.x0();
        Reduction { n, m, g, b }
    }

    fn gk(&self, k: usize, i: usize, j: usize) -> f64 {
        self.g[(k * self.n + i) * self.m + j]
    }

    fn steps(&self) -> usize {
        self.g.len() / (self.n * self.m)
    }

    /// Least-squares gap of `sum G_k u_k = b`; nonzero when `xf` cannot be
    /// reached.
    fn feasibility_gap(&self) -> f64 {
        let n = self.n;
        let mut gram = DMatrix::<f64>::zeros(n, n);
        for k in 0..self.steps() {
            for i in 0..n {
                for l in 0..n {
                    gram[(i, l)] += (0..self.m)
                        .map(|j| self.gk(k, i, j) * self.gk(k, l, j))
                        .sum::<f64>();
                }
            }
        }
        let svd = gram.clone().svd(true, true);
        let eps = 1e-12 * svd.singular_values.max();
        match svd.solve(&self.b, eps) {
            Ok(y) => (&gram * y - &self.b).amax(),
            Err(_) => self.b.amax(),
        }
    }
}

trait XStep {
    fn refactor(&mut self, c: f64) -> Result<()>;
    /// `argmin f(u) + (c / 2) ||u - q||^2` subject to the dynamics.
    fn solve(&mut self, q: &[f64], u: &mut [f64]);
}

struct Eliminated<'a> {
    red: &'a Reduction,
    /// `h R_k`, row-major `m x m`.
    hr: Vec<f64>,
    c: f64,
    minv: Vec<f64>,
    s_inv: DMatrix<f64>,
    y: Vec<f64>,
}

impl<'a> Eliminated<'a> {
    fn new(dp: &DiscretizedProblem, red: &'a Reduction) -> Self {
        let m = red.m;
        let h = dp.dt();
        let mut hr = Vec::with_capacity(dp.n_steps() * m * m);
        for st in dp.stages() {
            for i in 0..m {
                for j in 0..m {
                    hr.push(h * st.r[(i, j)]);
                }
            }
        }
        Eliminated {
            red,
            hr,
            c: 0.0,
            minv: Vec::new(),
            s_inv: DMatrix::zeros(0, 0),
            y: vec![0.0; dp.n_steps() * m],
        }
    }
}

impl XStep for Eliminated<'_> {
    fn refactor(&mut self, c: f64) -> Result<()> {
        let (n, m) = (self.red.n, self.red.m);
        let big_n = self.red.steps();
        self.c = c;
        self.minv.clear();
        let mut s = DMatrix::<f64>::zeros(n, n);
        for k in 0..big_n {
            let blk = DMatrix::from_fn(m, m, |i, j| {
                self.hr[k * m * m + i * m + j] + if i == j { c } else { 0.0 }
            });
            let inv = blk
                .try_inverse()
                .ok_or_else(|| Error::invalid("singular control block in the quadratic step"))?;
            let gk = DMatrix::from_fn(n, m, |i, j| self.red.gk(k, i, j));
            s += &gk * &inv * gk.transpose();
            self.minv.extend(inv.transpose().iter());
        }
        let svd = s.svd(true, true);
        let eps = 1e-13 * svd.singular_values.max();
        self.s_inv = svd
            .pseudo_inverse(eps)
            .map_err(|e| Error::invalid(e.to_string()))?;
        Ok(())
    }

    fn solve(&mut self, q: &[f64], u: &mut [f64]) {
        let (n, m) = (self.red.n, self.red.m);
        let c = self.c;
        let mut rhs = -self.red.b.clone();
        for k in 0..self.red.steps() {
            let mk = &self.minv[k * m * m..(k + 1) * m * m];
            for i in 0..m {
                let mut v = 0.0;
                for j in 0..m {
                    v += mk[i * m + j] * c * q[k * m + j];
                }
                self.y[k * m + i] = v;
            }
            for i in 0..n {
                for j in 0..m {
                    rhs[i] += self.red.gk(k, i, j) * self.y[k * m + j];
                }
            }
        }
        let nu = &self.s_inv * rhs;
        let mut gt_nu = vec![0.0; m];
        for k in 0..self.red.steps() {
            for (j, v) in gt_nu.iter_mut().enumerate() {
                *v = (0..n).map(|i| self.red.gk(k, i, j) * nu[i]).sum();
            }
            let mk = &self.minv[k * m * m..(k + 1) * m * m];
            for i in 0..m {
                let corr: f64 = (0..m).map(|j| mk[i * m + j] * gt_nu[j]).sum();
                u[k * m + i] = self.y[k * m + i] - corr;
            }
        }
    }
}

/// States kept as unknowns; ordering per step `[x_k (k > 0), u_k, p_k]`.
struct Retained<'a> {
    dp: &'a DiscretizedProblem,
    c: f64,
    lu: Option<BandedLu>,
    rhs: Vec<f64>,
}

impl<'a> Retained<'a> {
    fn new(dp: &'a DiscretizedProblem) -> Self {
        Retained {
            dp,
            c: 0.0,
            lu: None,
            rhs: Vec::new(),
        }
    }

    fn offset(&self, k: usize) -> usize {
        let (n, m) = (self.dp.state_dim(), self.dp.control_dim());
        if k == 0 {
            0
        } else {
            (m + n) + (k - 1) * (2 * n + m)
        }
    }

    fn u_at(&self, k: usize) -> usize {
        self.offset(k) + if k == 0 { 0 } else { self.dp.state_dim() }
    }

    fn p_at(&self, k: usize) -> usize {
        self.u_at(k) + self.dp.control_dim()
    }

    fn size(&self) -> usize {
        self.offset(self.dp.n_steps())
    }
}

impl XStep for Retained<'_> {
    fn refactor(&mut self, c: f64) -> Result<()> {
        let dp = self.dp;
        let (n, m, big_n) = (dp.state_dim(), dp.control_dim(), dp.n_steps());
        let h = dp.dt();
        self.c = c;
        let mut entries: Vec<(usize, usize, f64)> = Vec::new();
        for k in 0..big_n {
            let st = &dp.stages()[k];
            let (ui, pi) = (self.u_at(k), self.p_at(k));
            if k > 0 {
                let xi = self.offset(k);
                let pprev = self.p_at(k - 1);
                for i in 0..n {
                    for j in 0..n {
                        entries.push((xi + i, xi + j, h * st.q[(i, j)]));
                        entries.push((xi + i, pi + j, st.phi[(j, i)]));
                        entries.push((pi + i, xi + j, st.phi[(i, j)]));
                    }
                    entries.push((xi + i, pprev + i, -1.0));
                    entries.push((pprev + i, xi + i, -1.0));
                }
            }
            for i in 0..m {
                for j in 0..m {
                    let d = if i == j { c } else { 0.0 };
                    entries.push((ui + i, ui + j, h * st.r[(i, j)] + d));
                }
                for j in 0..n {
                    entries.push((ui + i, pi + j, st.gamma[(j, i)]));
                    entries.push((pi + j, ui + i, st.gamma[(j, i)]));
                }
            }
        }
        let (mut kl, mut ku) = (0, 0);
        for &(i, j, _) in &entries {
            kl = kl.max(i.saturating_sub(j));
            ku = ku.max(j.saturating_sub(i));
        }
        let mut band = BandedMatrix::zeros(self.size(), kl, ku);
        for (i, j, v) in entries {
            band.add(i, j, v);
        }
        self.lu = Some(
            band.factor()
                .ok_or_else(|| Error::invalid("singular KKT matrix in the quadratic step"))?,
        );
        self.rhs = vec![0.0; self.size()];
        Ok(())
    }

    fn solve(&mut self, q: &[f64], u: &mut [f64]) {
        let dp = self.dp;
        let (n, m, big_n) = (dp.state_dim(), dp.control_dim(), dp.n_steps());
        self.rhs.iter_mut().for_each(|v| *v = 0.0);
        for k in 0..big_n {
            let ui = self.u_at(k);
            for j in 0..m {
                self.rhs[ui + j] = self.c * q[k * m + j];
            }
        }
        let phi0x0 = &dp.stages()[0].phi * dp.x0();
        let p0 = self.p_at(0);
        for i in 0..n {
            self.rhs[p0 + i] -= phi0x0[i];
        }
        let plast = self.p_at(big_n - 1);
        for i in 0..n {
            self.rhs[plast + i] += dp.xf()[i];
        }
        let mut sol = std::mem::take(&mut self.rhs);
        self.lu.as_ref().expect("factored").solve_in_place(&mut sol);
        for k in 0..big_n {
            let ui = self.u_at(k);
            u[k * m..(k + 1) * m].copy_from_slice(&sol[ui..ui + m]);
        }
        self.rhs = sol;
    }
}

pub(super) fn run(dp: &DiscretizedProblem, settings: &SolverSettings) -> Result<OracleSolution> {
    let red = Reduction::new(dp);
    let gap = red.feasibility_gap();
    if gap > 1e-8 * (1.0 + red.b.amax()) {
        return Err(Error::Infeasible { gap });
    }
    if dp.has_state_cost() {
        admm(dp, &red, &mut Retained::new(dp), settings, false)
    } else {
        admm(
            dp,
            &red,
            &mut Eliminated::new(dp, &red),
            settings,
            dp.diagonal_r,
        )
    }
}

fn weighted_norm(v: impl Iterator<Item = f64>, h: f64) -> f64 {
    (h * v.map(|x| x * x).sum::<f64>()).sqrt()
}

fn admm<X: XStep>(
    dp: &DiscretizedProblem,
    red: &Reduction,
    xs: &mut X,
    settings: &SolverSettings,
    can_polish: bool,
) -> Result<OracleSolution> {
    let (m, big_n) = (dp.control_dim(), dp.n_steps());
    let len = big_n * m;
    let h = dp.dt();
    let alpha = dp.alpha().value();

    let mut z = vec![0.0; len];
    if let StartPoint::Random(seed) = settings.start {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        z.iter_mut().for_each(|v| *v = rng.gen_range(-10.0..10.0));
    }
    let mut w = vec![0.0; len];
    let mut u = vec![0.0; len];
    let mut q = vec![0.0; len];
    let mut v = vec![0.0; len];
    let mut z_old = vec![0.0; len];
    let mut buf_in = vec![0.0; big_n];
    let mut buf_out = vec![0.0; big_n];

    let mut rho = settings.rho;
    xs.refactor(rho * h)?;
    let mut best: Option<OracleSolution> = None;
    let consider =
        |cand: OracleSolution, best: &mut Option<OracleSolution>| -> Option<OracleSolution> {
            if cand.kkt_residual <= settings.tol {
                return Some(cand);
            }
            if best
                .as_ref()
                .is_none_or(|b| cand.kkt_residual < b.kkt_residual)
            {
                *best = Some(cand);
            }
            None
        };

    for it in 1..=settings.max_iter {
        for i in 0..len {
            q[i] = z[i] - w[i];
        }
        xs.solve(&q, &mut u);
        z_old.copy_from_slice(&z);
        for i in 0..len {
            v[i] = u[i] + w[i];
        }
        let lambda = alpha / (rho * h);
        for j in 0..m {
            for k in 0..big_n {
                buf_in[k] = v[k * m + j];
            }
            tv_prox(&buf_in, lambda, &mut buf_out);
            for k in 0..big_n {
                z[k * m + j] = buf_out[k];
            }
        }
        for i in 0..len {
            w[i] += u[i] - z[i];
        }

        let r_p = weighted_norm((0..len).map(|i| u[i] - z[i]), h);
        let r_d = rho * weighted_norm((0..len).map(|i| z[i] - z_old[i]), h);
        let floor = (len as f64 * h).sqrt() * settings.abs_tol;
        let eps_p = floor
            + settings.rel_tol
                * weighted_norm(u.iter().copied(), h).max(weighted_norm(z.iter().copied(), h));
        let eps_d = floor + settings.rel_tol * rho * weighted_norm(w.iter().copied(), h);
        let converged = r_p <= eps_p && r_d <= eps_d;

        if can_polish && (it % POLISH_EVERY == 0 || converged) {
            if let Some((pu, nu)) = polish(dp, red, &z) {
                let states = dp.propagate(&pu);
                let p = costates_from_nu(dp, &states, &nu);
                let cand = OracleSolution::assemble(dp, &pu, Some(&p), it, true);
                if let Some(done) = consider(cand, &mut best) {
                    return Ok(done);
                }
            }
        }
        if (converged && it % 5 == 0) || it % CERTIFY_EVERY == 0 {
            let cand = OracleSolution::assemble(dp, &z, None, it, false);
            if let Some(done) = consider(cand, &mut best) {
                return Ok(done);
            }
        }

        if it % BALANCE_EVERY == 0 {
            let factor = if r_p > BALANCE_RATIO * r_d {
                2.0
            } else if r_d > BALANCE_RATIO * r_p {
                0.5
            } else {
                1.0
            };
            let next = (rho * factor).clamp(RHO_RANGE.0, RHO_RANGE.1);
            if next != rho {
                w.iter_mut().for_each(|x| *x *= rho / next);
                rho = next;
                xs.refactor(rho * h)?;
            }
        }
    }
    let best =
        best.unwrap_or_else(|| OracleSolution::assemble(dp, &z, None, settings.max_iter, false));
    Err(Error::NotConverged {
        iterations: settings.max_iter,
        residual: best.kkt_residual,
        best: Box::new(best),
    })
}

/// Exact solution with the run structure of `z` frozen: each run of equal
/// values in a component is one unknown level `w_r` and the sign of every
/// jump is fixed, which leaves the linear conditions
/// `dt n_r R w_r + alpha (s_{r-1} - s_r) + P_r' nu = 0`, `sum_r P_r w_r = b`
/// with `P_r = sum_{k in r} G_k e_j`. Requires diagonal `R`.
fn polish(dp: &DiscretizedProblem, red: &Reduction, z: &[f64]) -> Option<(Vec<f64>, DVector<f64>)> {
    let (n, m, big_n) = (red.n, red.m, dp.n_steps());
    let h = dp.dt();
    let alpha = dp.alpha().value();

    struct Run {
        j: usize,
        start: usize,
        end: usize,
        weight: f64,
        lin: f64,
        p: DVector<f64>,
    }
    let mut runs = Vec::new();
    for j in 0..m {
        let mut start = 0;
        let mut prev_sign = 0.0;
        for k in 0..big_n {
            let last = k + 1 == big_n;
            let next_sign = if last {
                0.0
            } else {
                (z[(k + 1) * m + j] - z[k * m + j]).signum()
            };
            if last || z[(k + 1) * m + j] != z[k * m + j] {
                let mut p = DVector::zeros(n);
                let mut weight = 0.0;
                for i in start..=k {
                    weight += h * dp.stages()[i].r[(j, j)];
                    for l in 0..n {
                        p[l] += red.gk(i, l, j);
                    }
                }
                runs.push(Run {
                    j,
                    start,
                    end: k,
                    weight,
                    lin: alpha * (prev_sign - next_sign),
                    p,
                });
                prev_sign = next_sign;
                start = k + 1;
            }
        }
    }

    let mut s = DMatrix::<f64>::zeros(n, n);
    let mut rhs = -red.b.clone();
    for r in &runs {
        s += &r.p * r.p.transpose() / r.weight;
        rhs -= &r.p * (r.lin / r.weight);
    }
    let nu = s.lu().solve(&rhs)?;
    if nu.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let mut u = vec![0.0; big_n * m];
    for r in &runs {
        let level = -(r.lin + r.p.dot(&nu)) / r.weight;
        for k in r.start..=r.end {
            u[k * m + r.j] = level;
        }
    }
    Some((u, nu))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::discretize;
    use crate::problem::{BoundaryConditions, Weight};

    #[test]
    fn reduction_matches_closed_form_columns() {
        let n_steps = 10;
        let dp = discretize(BoundaryConditions::particular(), Weight::ZERO, n_steps).unwrap();
        let red = Reduction::new(&dp);
        let h = 0.1;
        for k in 0..n_steps {
            let want = h * h * (n_steps as f64 - k as f64 - 0.5);
            assert!((red.gk(k, 0, 0) - want).abs() < 1e-15);
            assert_eq!(red.gk(k, 1, 0), h);
        }
        // b = xf - Phi^N x0 = (0 - 1, 0 - 1).
        assert!((red.b[0] + 1.0).abs() < 1e-14 && (red.b[1] + 1.0).abs() < 1e-14);
    }
}
