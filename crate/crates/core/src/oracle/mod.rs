//! Direct-transcription oracle.
//!
//! Controls are piecewise constant on a uniform grid of `N` intervals and the
//! states are propagated exactly (zero-order hold), so the discrete problem
//! is the continuous one restricted to step controls. The resulting convex
//! program is solved by ADMM with an exact 1-D TV proximal step, followed by
//! an active-set polish; every returned solution carries a KKT certificate.

mod admm;
mod banded;
mod certificate;
mod tv_prox;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{BoundaryConditions, Weight};

pub use certificate::ResidualReport;
pub use tv_prox::tv_prox;

/// Dense matrix data for one coefficient of an LQPTV problem: either a single
/// matrix used on every interval or one sample per interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSamples {
    Constant(Vec<Vec<f64>>),
    Sampled(Vec<Vec<Vec<f64>>>),
}

impl MatrixSamples {
    fn is_constant(&self) -> bool {
        matches!(self, MatrixSamples::Constant(_))
    }

    fn matrices(
        &self,
        name: &str,
        rows: usize,
        cols: usize,
        n_steps: usize,
    ) -> Result<Vec<DMatrix<f64>>> {
        let raw: Vec<&Vec<Vec<f64>>> = match self {
            MatrixSamples::Constant(m) => vec![m],
            MatrixSamples::Sampled(s) => {
                if s.len() != n_steps {
                    return Err(Error::invalid(format!(
                        "{name}: {} samples for {n_steps} intervals",
                        s.len()
                    )));
                }
                s.iter().collect()
            }
        };
        raw.into_iter()
            .enumerate()
            .map(|(k, m)| {
                if m.len() != rows || m.iter().any(|row| row.len() != cols) {
                    return Err(Error::invalid(format!(
                        "{name}[{k}]: expected {rows}x{cols} matrix"
                    )));
                }
                if m.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(Error::invalid(format!("{name}[{k}]: non-finite entry")));
                }
                Ok(DMatrix::from_fn(rows, cols, |i, j| m[i][j]))
            })
            .collect()
    }
}

/// JSON problem file for a linear-quadratic problem with TV-regularized
/// controls:
/// minimize `1/2 sum_k (x_k' Q_k x_k + u_k' R_k u_k) dt + alpha sum_j TV(u_j)`
/// subject to `x' = A x + B u`, `x(0) = x0`, `x(1) = xf`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LqptvData {
    pub n: usize,
    pub m: usize,
    pub n_steps: usize,
    pub alpha: Weight,
    pub x0: Vec<f64>,
    pub xf: Vec<f64>,
    pub a: MatrixSamples,
    pub b: MatrixSamples,
    pub q: MatrixSamples,
    pub r: MatrixSamples,
}

impl LqptvData {
    /// The double integrator as an LQPTV problem (`Q = 0`, `R = 1`).
    pub fn double_integrator(bc: BoundaryConditions, alpha: Weight, n_steps: usize) -> Self {
        LqptvData {
            n: 2,
            m: 1,
            n_steps,
            alpha,
            x0: vec![bc.s0, bc.v0],
            xf: vec![bc.sf, bc.vf],
            a: MatrixSamples::Constant(vec![vec![0.0, 1.0], vec![0.0, 0.0]]),
            b: MatrixSamples::Constant(vec![vec![0.0], vec![1.0]]),
            q: MatrixSamples::Constant(vec![vec![0.0, 0.0], vec![0.0, 0.0]]),
            r: MatrixSamples::Constant(vec![vec![1.0]]),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Exact one-interval propagation data plus the cost weights of the interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    pub phi: DMatrix<f64>,
    pub gamma: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

/// Transcribed problem: `x_{k+1} = Phi_k x_k + Gamma_k u_k` for `k < N`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizedProblem {
    n_steps: usize,
    dt: f64,
    alpha: Weight,
    bc: Option<BoundaryConditions>,
    x0: DVector<f64>,
    xf: DVector<f64>,
    stages: Vec<Stage>,
    state_cost: bool,
    diagonal_r: bool,
}

/// Double-integrator transcription on `n_steps` intervals.
pub fn discretize(
    bc: BoundaryConditions,
    alpha: Weight,
    n_steps: usize,
) -> Result<DiscretizedProblem> {
    let mut dp = DiscretizedProblem::from_lqptv(&LqptvData::double_integrator(bc, alpha, n_steps))?;
    dp.bc = Some(bc);
    Ok(dp)
}

impl DiscretizedProblem {
    pub fn from_lqptv(data: &LqptvData) -> Result<Self> {
        let (n, m, big_n) = (data.n, data.m, data.n_steps);
        if n == 0 || m == 0 {
            return Err(Error::invalid(
                "state and control dimensions must be positive",
            ));
        }
        if big_n < 2 {
            return Err(Error::invalid(format!(
                "need at least 2 intervals, got {big_n}"
            )));
        }
        if data.alpha.is_infinite() {
            return Err(Error::WeightDomain(
                "the oracle needs a finite weight".into(),
            ));
        }
        if data.x0.len() != n || data.xf.len() != n {
            return Err(Error::invalid(format!("x0 and xf must have length {n}")));
        }
        if data.x0.iter().chain(&data.xf).any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite boundary state"));
        }
        let dt = 1.0 / big_n as f64;
        let a = data.a.matrices("a", n, n, big_n)?;
        let b = data.b.matrices("b", n, m, big_n)?;
        let q = data.q.matrices("q", n, n, big_n)?;
        let r = data.r.matrices("r", m, m, big_n)?;
        for (k, qk) in q.iter().enumerate() {
            check_psd(qk, &format!("q[{k}]"))?;
        }
        for (k, rk) in r.iter().enumerate() {
            check_pd(rk, &format!("r[{k}]"))?;
        }
        let pick = |v: &[DMatrix<f64>], k: usize| v[if v.len() == 1 { 0 } else { k }].clone();

        let constant_dynamics = data.a.is_constant() && data.b.is_constant();
        let mut stages = Vec::with_capacity(big_n);
        let mut cached: Option<(DMatrix<f64>, DMatrix<f64>)> = None;
        for k in 0..big_n {
            let (phi, gamma) = match (&cached, constant_dynamics) {
                (Some(c), true) => c.clone(),
                _ => {
                    let c = zoh(&pick(&a, k), &pick(&b, k), dt);
                    cached = Some(c.clone());
                    c
                }
            };
            stages.push(Stage {
                phi,
                gamma,
                q: pick(&q, k),
                r: pick(&r, k),
            });
        }
        let state_cost = q.iter().any(|m| m.iter().any(|v| *v != 0.0));
        let diagonal_r = r
            .iter()
            .all(|rk| (0..m).all(|i| (0..m).all(|j| i == j || rk[(i, j)] == 0.0)));
        Ok(DiscretizedProblem {
            n_steps: big_n,
            dt,
            alpha: data.alpha,
            bc: None,
            x0: DVector::from_column_slice(&data.x0),
            xf: DVector::from_column_slice(&data.xf),
            stages,
            state_cost,
            diagonal_r,
        })
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn alpha(&self) -> Weight {
        self.alpha
    }

    pub fn bc(&self) -> Option<BoundaryConditions> {
        self.bc
    }

    pub fn state_dim(&self) -> usize {
        self.x0.len()
    }

    pub fn control_dim(&self) -> usize {
        self.stages[0].gamma.ncols()
    }

    pub fn x0(&self) -> &DVector<f64> {
        &self.x0
    }

    pub fn xf(&self) -> &DVector<f64> {
        &self.xf
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn has_state_cost(&self) -> bool {
        self.state_cost
    }

    /// Same problem with a different weight.
    pub fn with_alpha(&self, alpha: Weight) -> Result<Self> {
        if alpha.is_infinite() {
            return Err(Error::WeightDomain(
                "the oracle needs a finite weight".into(),
            ));
        }
        Ok(DiscretizedProblem {
            alpha,
            ..self.clone()
        })
    }

    /// States `x_0..x_N` (flattened, `n` per step) driven by `controls`
    /// (flattened, `m` per step).
    pub(crate) fn propagate(&self, controls: &[f64]) -> Vec<f64> {
        let (n, m) = (self.state_dim(), self.control_dim());
        let mut x = Vec::with_capacity((self.n_steps + 1) * n);
        x.extend(self.x0.iter());
        for (k, st) in self.stages.iter().enumerate() {
            let base = k * n;
            for i in 0..n {
                let mut v = 0.0;
                for j in 0..n {
                    v += st.phi[(i, j)] * x[base + j];
                }
                for j in 0..m {
                    v += st.gamma[(i, j)] * controls[k * m + j];
                }
                x.push(v);
            }
        }
        x
    }

    /// `(energy_part, tv_part)` of a control sequence with its states.
    pub(crate) fn objective_parts(&self, controls: &[f64], states: &[f64]) -> (f64, f64) {
        let (n, m) = (self.state_dim(), self.control_dim());
        let mut energy = 0.0;
        for (k, st) in self.stages.iter().enumerate() {
            let u = &controls[k * m..(k + 1) * m];
            let mut e = quad_form(&st.r, u);
            if self.state_cost {
                e += quad_form(&st.q, &states[k * n..(k + 1) * n]);
            }
            energy += 0.5 * self.dt * e;
        }
        let mut tv = 0.0;
        for j in 0..m {
            for k in 0..self.n_steps - 1 {
                tv += (controls[(k + 1) * m + j] - controls[k * m + j]).abs();
            }
        }
        (energy, tv)
    }
}

fn quad_form(a: &DMatrix<f64>, v: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..v.len() {
        for j in 0..v.len() {
            s += v[i] * a[(i, j)] * v[j];
        }
    }
    s
}

fn symmetric(a: &DMatrix<f64>) -> bool {
    let scale = a.amax().max(1.0);
    (0..a.nrows()).all(|i| (0..i).all(|j| (a[(i, j)] - a[(j, i)]).abs() <= 1e-12 * scale))
}

fn check_pd(a: &DMatrix<f64>, name: &str) -> Result<()> {
    if !symmetric(a) || a.clone().cholesky().is_none() {
        return Err(Error::invalid(format!(
            "{name} must be symmetric positive definite"
        )));
    }
    Ok(())
}

fn check_psd(a: &DMatrix<f64>, name: &str) -> Result<()> {
    let shift = 1e-12 * a.amax().max(1.0);
    let shifted = a + DMatrix::identity(a.nrows(), a.ncols()) * shift;
    if !symmetric(a) || shifted.cholesky().is_none() {
        return Err(Error::invalid(format!(
            "{name} must be symmetric positive semidefinite"
        )));
    }
    Ok(())
}

/// Exact zero-order-hold step `(Phi, Gamma)` from the exponential of the
/// augmented matrix `[[A, B], [0, 0]] h`. Nilpotent generators use the
/// terminating Taylor series so that e.g. the double integrator gives exactly
/// `Phi = [[1, h], [0, 1]]`, `Gamma = [h^2/2, h]`.
fn zoh(a: &DMatrix<f64>, b: &DMatrix<f64>, h: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let (n, m) = (a.nrows(), b.ncols());
    let size = n + m;
    let mut gen = DMatrix::zeros(size, size);
    gen.view_mut((0, 0), (n, n)).copy_from(&(a * h));
    gen.view_mut((0, n), (n, m)).copy_from(&(b * h));

    let mut sum = DMatrix::identity(size, size);
    let mut term = DMatrix::identity(size, size);
    let mut nilpotent = false;
    for j in 1..=size {
        term = &term * &gen / j as f64;
        if term.iter().all(|v| *v == 0.0) {
            nilpotent = true;
            break;
        }
        sum += &term;
    }
    let e = if nilpotent { sum } else { gen.exp() };
    (
        e.view((0, 0), (n, n)).into_owned(),
        e.view((0, n), (n, m)).into_owned(),
    )
}

/// Initial ADMM iterate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StartPoint {
    Zero,
    Random(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    /// Bound on the certified KKT residual.
    pub tol: f64,
    pub max_iter: usize,
    /// ADMM stopping thresholds; a certificate is attempted once both hold.
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Initial penalty parameter.
    pub rho: f64,
    pub start: StartPoint,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            tol: 1e-9,
            max_iter: 50_000,
            abs_tol: 1e-9,
            rel_tol: 1e-7,
            rho: 1.0,
            start: StartPoint::Zero,
        }
    }
}

impl SolverSettings {
    pub fn with_tol(tol: f64, max_iter: usize) -> Self {
        SolverSettings {
            tol,
            max_iter,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0)
            || !(self.rho > 0.0)
            || !(self.abs_tol >= 0.0)
            || !(self.rel_tol >= 0.0)
        {
            return Err(Error::invalid(
                "solver tolerances and penalty must be positive",
            ));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSolution {
    pub n_steps: usize,
    pub dt: f64,
    pub alpha: Weight,
    /// `u_0..u_{N-1}`, one row of `m` values per interval.
    pub controls: Vec<Vec<f64>>,
    /// `x_0..x_N`.
    pub states: Vec<Vec<f64>>,
    /// Multipliers `p_0..p_{N-1}` of the dynamics (least-squares estimates
    /// unless the solver produced them).
    pub costates: Vec<Vec<f64>>,
    pub objective: f64,
    pub energy_part: f64,
    pub tv_part: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
    /// Whether the final iterate came from the active-set polish.
    pub polished: bool,
}

impl OracleSolution {
    fn assemble(
        dp: &DiscretizedProblem,
        controls: &[f64],
        costates: Option<&[f64]>,
        iterations: usize,
        polished: bool,
    ) -> Self {
        let (n, m) = (dp.state_dim(), dp.control_dim());
        let states = dp.propagate(controls);
        let (energy_part, tv_part) = dp.objective_parts(controls, &states);
        let (report, p) = certificate::evaluate(dp, controls, &states, costates);
        OracleSolution {
            n_steps: dp.n_steps,
            dt: dp.dt,
            alpha: dp.alpha,
            controls: controls.chunks(m).map(<[f64]>::to_vec).collect(),
            states: states.chunks(n).map(<[f64]>::to_vec).collect(),
            costates: p.chunks(n).map(<[f64]>::to_vec).collect(),
            objective: energy_part + dp.alpha.value() * tv_part,
            energy_part,
            tv_part,
            kkt_residual: report.kkt(),
            iterations,
            polished,
        }
    }

    /// Solution for a given control sequence (e.g. a sampled analytic
    /// control); states are propagated exactly and multipliers estimated.
    pub fn from_controls(dp: &DiscretizedProblem, controls: Vec<Vec<f64>>) -> Result<Self> {
        let m = dp.control_dim();
        if controls.len() != dp.n_steps || controls.iter().any(|c| c.len() != m) {
            return Err(Error::invalid(format!(
                "expected {} controls of dimension {m}",
                dp.n_steps
            )));
        }
        let flat: Vec<f64> = controls.concat();
        Ok(Self::assemble(dp, &flat, None, 0, false))
    }

    pub fn control_channel(&self, j: usize) -> Vec<f64> {
        self.controls.iter().map(|u| u[j]).collect()
    }

    pub fn state_channel(&self, i: usize) -> Vec<f64> {
        self.states.iter().map(|x| x[i]).collect()
    }

    /// Grid points `t_k = k dt`, `k = 0..=N`.
    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| k as f64 * self.dt).collect()
    }

    /// One row per grid point: `t`, the controls (held on the last row) and
    /// the states.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let m = self.controls.first().map_or(0, Vec::len);
        let n = self.states.first().map_or(0, Vec::len);
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        if m == 1 {
            header.push("u".into());
        } else {
            header.extend((1..=m).map(|j| format!("u{j}")));
        }
        header.extend((1..=n).map(|i| format!("x{i}")));
        w.write_record(&header)?;
        for (k, t) in self.times().into_iter().enumerate() {
            let u = &self.controls[k.min(self.n_steps - 1)];
            let row: Vec<String> = std::iter::once(t)
                .chain(u.iter().copied())
                .chain(self.states[k].iter().copied())
                .map(|v| v.to_string())
                .collect();
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Solves the double-integrator (or any `Q = 0`) transcription.
pub fn solve(dp: &DiscretizedProblem, tol: f64, max_iter: usize) -> Result<OracleSolution> {
    solve_with(dp, &SolverSettings::with_tol(tol, max_iter))
}

pub fn solve_with(dp: &DiscretizedProblem, settings: &SolverSettings) -> Result<OracleSolution> {
    if dp.state_cost {
        return Err(Error::Unsupported(
            "problems with a state cost need solve_lqptv".into(),
        ));
    }
    solve_lqptv_with(dp, settings)
}

/// Solves a general LQPTV transcription. With `Q = 0` the states are
/// eliminated and this is the same computation as [`solve`].
pub fn solve_lqptv(dp: &DiscretizedProblem, tol: f64, max_iter: usize) -> Result<OracleSolution> {
    solve_lqptv_with(dp, &SolverSettings::with_tol(tol, max_iter))
}

pub fn solve_lqptv_with(
    dp: &DiscretizedProblem,
    settings: &SolverSettings,
) -> Result<OracleSolution> {
    settings.validate()?;
    admm::run(dp, settings)
}

/// Named KKT residuals of `sol` for `dp`. Multipliers are taken from the
/// solution or, when absent, estimated by least squares.
pub fn residual_report(sol: &OracleSolution, dp: &DiscretizedProblem) -> ResidualReport {
    certificate::report(sol, dp)
}

impl ResidualReport {
    pub fn kkt(&self) -> f64 {
        certificate::KKT_TERMS
            .iter()
            .filter_map(|k| self.residuals.get(*k))
            .fold(0.0, |a, b| a.max(*b))
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.residuals.get(name).copied()
    }

    pub fn named(&self) -> &BTreeMap<String, f64> {
        &self.residuals
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn double_integrator_step_is_exact() {
        let dp = discretize(BoundaryConditions::particular(), Weight::ZERO, 8).unwrap();
        let h = 0.125;
        let st = &dp.stages()[3];
        assert_eq!(st.phi, DMatrix::from_row_slice(2, 2, &[1.0, h, 0.0, 1.0]));
        assert_eq!(st.gamma, DMatrix::from_row_slice(2, 1, &[0.5 * h * h, h]));
    }

    #[test]
    fn non_nilpotent_generator_uses_exponential() {
        // x' = -x + u: Phi = e^{-h}, Gamma = 1 - e^{-h}.
        let a = DMatrix::from_element(1, 1, -1.0);
        let b = DMatrix::from_element(1, 1, 1.0);
        let (phi, gamma) = zoh(&a, &b, 0.1);
        assert!((phi[(0, 0)] - (-0.1f64).exp()).abs() < 1e-14);
        assert!((gamma[(0, 0)] - (1.0 - (-0.1f64).exp())).abs() < 1e-14);
    }

    #[test]
    fn validation() {
        let bc = BoundaryConditions::particular();
        assert!(discretize(bc, Weight::ZERO, 1).is_err());
        assert!(discretize(bc, Weight::INFINITY, 10).is_err());
        let mut data = LqptvData::double_integrator(bc, Weight::ZERO, 10);
        data.r = MatrixSamples::Constant(vec![vec![0.0]]);
        assert!(DiscretizedProblem::from_lqptv(&data).is_err());
        let mut data = LqptvData::double_integrator(bc, Weight::ZERO, 10);
        data.q = MatrixSamples::Constant(vec![vec![1.0, 0.0], vec![0.0, -1.0]]);
        assert!(DiscretizedProblem::from_lqptv(&data).is_err());
        let mut data = LqptvData::double_integrator(bc, Weight::ZERO, 10);
        data.a = MatrixSamples::Sampled(vec![vec![vec![0.0, 1.0], vec![0.0, 0.0]]; 9]);
        assert!(DiscretizedProblem::from_lqptv(&data).is_err());
    }

    #[test]
    fn json_accepts_constant_and_sampled_matrices() {
        let text = r#"{"n":1,"m":1,"n_steps":3,"alpha":0.5,"x0":[0],"xf":[1],
            "a":[[[0]],[[0]],[[0]]],"b":[[1]],"q":[[0]],"r":[[2]]}"#;
        let data = LqptvData::from_json(text).unwrap();
        assert!(matches!(data.a, MatrixSamples::Sampled(_)));
        assert!(matches!(data.b, MatrixSamples::Constant(_)));
        let dp = DiscretizedProblem::from_lqptv(&data).unwrap();
        assert_eq!(dp.stages().len(), 3);
        assert_eq!(dp.stages()[1].r[(0, 0)], 2.0);
    }
}
