//! Exact piecewise-polynomial functions on `[0, 1]`.
//!
//! Every segment stores its coefficients in ascending powers of the local
//! variable `t - tau_k`, where `tau_k` is the segment's left breakpoint.
//! Evaluation is right-continuous: at an interior breakpoint the right
//! segment wins, and `t = 1` belongs to the last segment.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used to decide whether adjacent segments meet.
pub const CONTINUITY_TOL: f64 = 1e-12;

/// `|a - b| <= tol * max(1, |a|, |b|)`.
pub fn nearly_equal(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}

/// Dense polynomial with coefficients in ascending powers.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Self {
        let mut p = Polynomial { coeffs };
        p.trim();
        p
    }

    pub fn zero() -> Self {
        Polynomial { coeffs: vec![0.0] }
    }

    pub fn constant(c: f64) -> Self {
        Polynomial { coeffs: vec![c] }
    }

    /// `c0 + c1 x`.
    pub fn linear(c0: f64, c1: f64) -> Self {
        Polynomial::new(vec![c0, c1])
    }

    fn trim(&mut self) {
        while self.coeffs.len() > 1 && self.coeffs.last() == Some(&0.0) {
            self.coeffs.pop();
        }
        if self.coeffs.is_empty() {
            self.coeffs.push(0.0);
        }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.len() == 1
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Polynomial {
        if self.coeffs.len() == 1 {
            return Polynomial::zero();
        }
        Polynomial::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, &c)| c * i as f64)
                .collect(),
        )
    }

    /// Antiderivative vanishing at zero, plus `constant`.
    pub fn antiderivative(&self, constant: f64) -> Polynomial {
        let mut out = Vec::with_capacity(self.coeffs.len() + 1);
        out.push(constant);
        out.extend(
            self.coeffs
                .iter()
                .enumerate()
                .map(|(i, &c)| c / (i as f64 + 1.0)),
        );
        Polynomial::new(out)
    }

    /// `int_a^b p(x) dx`.
    pub fn integrate(&self, a: f64, b: f64) -> f64 {
        let anti = self.antiderivative(0.0);
        anti.eval(b) - anti.eval(a)
    }

    /// Re-expresses `p` in the variable `y = x - shift`, i.e. returns `q` with
    /// `q(y) = p(y + shift)`.
    pub fn shifted(&self, shift: f64) -> Polynomial {
        if shift == 0.0 {
            return self.clone();
        }
        // Taylor expansion around `shift` via repeated synthetic division.
        let mut work = self.coeffs.clone();
        let n = work.len();
        for i in 0..n {
            for j in (i..n - 1).rev() {
                work[j] += shift * work[j + 1];
            }
        }
        Polynomial::new(work)
    }

    pub fn scaled(&self, factor: f64) -> Polynomial {
        Polynomial::new(self.coeffs.iter().map(|c| c * factor).collect())
    }

    /// Upper bound on `|p|` over `[0, h]` from the coefficient magnitudes.
    pub fn abs_bound(&self, h: f64) -> f64 {
        let h = h.abs();
        self.coeffs
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * h + c.abs())
    }

    /// Real roots of `p` in `[a, b]`, ascending. The interval is cut into
    /// monotone pieces at the roots of `p'` (found recursively) and each sign
    /// change is bisected to full precision. Works for any degree.
    pub fn roots_in(&self, a: f64, b: f64) -> Vec<f64> {
        if a > b {
            return Vec::new();
        }
        match self.degree() {
            0 => Vec::new(),
            1 => {
                let r = -self.coeffs[0] / self.coeffs[1];
                if r >= a && r <= b {
                    vec![r]
                } else {
                    Vec::new()
                }
            }
            _ => {
                let mut knots = vec![a];
                knots.extend(self.derivative().roots_in(a, b));
                knots.push(b);
                let mut roots: Vec<f64> = Vec::new();
                for w in knots.windows(2) {
                    let (lo, hi) = (w[0], w[1]);
                    let (flo, fhi) = (self.eval(lo), self.eval(hi));
                    let root = if flo == 0.0 {
                        Some(lo)
                    } else if fhi == 0.0 {
                        Some(hi)
                    } else if flo.signum() != fhi.signum() {
                        Some(bisect_sign_change(|x| self.eval(x), lo, hi, flo))
                    } else {
                        None
                    };
                    if let Some(r) = root {
                        if roots.last().is_none_or(|&last| r > last) {
                            roots.push(r);
                        }
                    }
                }
                roots
            }
        }
    }
}

/// Bisects a bracketed sign change down to adjacent floating-point numbers.
pub(crate) fn bisect_sign_change(
    f: impl Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    flo: f64,
) -> f64 {
    let lo_sign = flo.signum();
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return mid;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if fm.signum() == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Polynomial::new(
            (0..n)
                .map(|i| self.coeffs.get(i).unwrap_or(&0.0) + rhs.coeffs.get(i).unwrap_or(&0.0))
                .collect(),
        )
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self + &(-rhs)
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scaled(-1.0)
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        let mut out = vec![0.0; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Polynomial::new(out)
    }
}

/// Piecewise polynomial on `[0, 1]` with right-continuous evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PiecewiseRepr", into = "PiecewiseRepr")]
pub struct PiecewisePolynomial {
    breakpoints: Vec<f64>,
    segments: Vec<Polynomial>,
    /// One flag per interior breakpoint.
    continuous: Vec<bool>,
}

/// Wire format: `{"breakpoints": [...], "segments": [[c0, c1, ...], ...]}`.
#[derive(Serialize, Deserialize)]
struct PiecewiseRepr {
    breakpoints: Vec<f64>,
    segments: Vec<Vec<f64>>,
}

impl TryFrom<PiecewiseRepr> for PiecewisePolynomial {
    type Error = Error;
    fn try_from(r: PiecewiseRepr) -> Result<Self> {
        PiecewisePolynomial::new(
            r.breakpoints,
            r.segments.into_iter().map(Polynomial::new).collect(),
        )
    }
}

impl From<PiecewisePolynomial> for PiecewiseRepr {
    fn from(p: PiecewisePolynomial) -> Self {
        PiecewiseRepr {
            breakpoints: p.breakpoints,
            segments: p.segments.into_iter().map(|s| s.coeffs).collect(),
        }
    }
}

impl PiecewisePolynomial {
    /// Builds from breakpoints `0 = tau_0 < ... < tau_K = 1` and `K` segments in
    /// local coordinates. Continuity flags are inferred at `CONTINUITY_TOL`.
    pub fn new(breakpoints: Vec<f64>, segments: Vec<Polynomial>) -> Result<Self> {
        if breakpoints.len() < 2 || segments.len() + 1 != breakpoints.len() {
            return Err(Error::invalid(format!(
                "need K+1 breakpoints for K >= 1 segments, got {} breakpoints and {} segments",
                breakpoints.len(),
                segments.len()
            )));
        }
        if breakpoints[0] != 0.0 || *breakpoints.last().unwrap() != 1.0 {
            return Err(Error::invalid("breakpoints must start at 0 and end at 1"));
        }
        if breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("breakpoints must be strictly increasing"));
        }
        if segments
            .iter()
            .flat_map(|s| s.coeffs())
            .any(|c| !c.is_finite())
        {
            return Err(Error::invalid("polynomial coefficients must be finite"));
        }
        let mut p = PiecewisePolynomial {
            breakpoints,
            segments,
            continuous: Vec::new(),
        };
        p.continuous = (1..p.breakpoints.len() - 1)
            .map(|k| nearly_equal(p.left_limit(k), p.right_value(k), CONTINUITY_TOL))
            .collect();
        Ok(p)
    }

    /// Like [`new`](Self::new) but rejects any jump.
    pub fn new_continuous(breakpoints: Vec<f64>, segments: Vec<Polynomial>) -> Result<Self> {
        let p = Self::new(breakpoints, segments)?;
        if let Some(k) = p.continuous.iter().position(|c| !c) {
            return Err(Error::invalid(format!(
                "segments disagree at breakpoint {} ({} vs {})",
                p.breakpoints[k + 1],
                p.left_limit(k + 1),
                p.right_value(k + 1)
            )));
        }
        Ok(p)
    }

    pub fn constant(c: f64) -> Self {
        Self::from_global(Polynomial::constant(c))
    }

    /// Single segment; `p` is in the global variable `t`.
    pub fn from_global(p: Polynomial) -> Self {
        PiecewisePolynomial {
            breakpoints: vec![0.0, 1.0],
            segments: vec![p],
            continuous: Vec::new(),
        }
    }

    /// Pieces written in the global variable `t`; each is shifted to local form.
    pub fn from_global_pieces(breakpoints: Vec<f64>, pieces: Vec<Polynomial>) -> Result<Self> {
        if pieces.len() + 1 != breakpoints.len() {
            return Err(Error::invalid(
                "piece count must be one less than breakpoint count",
            ));
        }
        let segments = pieces
            .iter()
            .zip(&breakpoints)
            .map(|(p, &tau)| p.shifted(tau))
            .collect();
        Self::new(breakpoints, segments)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn segments(&self) -> &[Polynomial] {
        &self.segments
    }

    pub fn num_segments(&self) -> usize {
        self.segments.len()
    }

    /// Continuity flag for interior breakpoint `k` (1-based, `0 < k < K`).
    pub fn is_continuous_at(&self, k: usize) -> bool {
        self.continuous[k - 1]
    }

    pub fn is_continuous(&self) -> bool {
        self.continuous.iter().all(|&c| c)
    }

    /// `[tau_k, tau_{k+1}]` width.
    pub fn segment_width(&self, k: usize) -> f64 {
        self.breakpoints[k + 1] - self.breakpoints[k]
    }

    /// Segment index containing `t` under right-continuity.
    pub fn segment_index(&self, t: f64) -> usize {
        let k = self.breakpoints.partition_point(|&b| b <= t);
        k.saturating_sub(1).min(self.segments.len() - 1)
    }

    pub fn evaluate(&self, t: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain(t));
        }
        Ok(self.value(t))
    }

    /// Unchecked evaluation; `t` outside `[0, 1]` extrapolates the end segments.
    pub fn value(&self, t: f64) -> f64 {
        let k = self.segment_index(t);
        self.segments[k].eval(t - self.breakpoints[k])
    }

    /// Value of segment `k - 1` at its right end.
    pub fn left_limit(&self, k: usize) -> f64 {
        self.segments[k - 1].eval(self.segment_width(k - 1))
    }

    /// Value of segment `k` at its left end.
    pub fn right_value(&self, k: usize) -> f64 {
        self.segments[k].eval(0.0)
    }

    /// Signed jump `u(tau_k+) - u(tau_k-)` at interior breakpoint `k`.
    pub fn jump(&self, k: usize) -> f64 {
        self.right_value(k) - self.left_limit(k)
    }

    pub fn derivative(&self) -> PiecewisePolynomial {
        let segments = self.segments.iter().map(Polynomial::derivative).collect();
        Self::new(self.breakpoints.clone(), segments).expect("derivative keeps a valid layout")
    }

    /// Continuous antiderivative with value `initial` at `t = 0`.
    pub fn integrate(&self, initial: f64) -> PiecewisePolynomial {
        let mut acc = initial;
        let segments = self
            .segments
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let anti = s.antiderivative(acc);
                acc = anti.eval(self.segment_width(k));
                anti
            })
            .collect();
        Self::new(self.breakpoints.clone(), segments).expect("antiderivative keeps a valid layout")
    }

    pub fn scaled(&self, factor: f64) -> PiecewisePolynomial {
        let segments = self.segments.iter().map(|s| s.scaled(factor)).collect();
        Self::new(self.breakpoints.clone(), segments).expect("scaling keeps a valid layout")
    }

    /// Adds a polynomial written in the global variable `t` to every segment.
    pub fn add_global(&self, p: &Polynomial) -> PiecewisePolynomial {
        let segments = self
            .segments
            .iter()
            .zip(&self.breakpoints)
            .map(|(s, &tau)| s + &p.shifted(tau))
            .collect();
        Self::new(self.breakpoints.clone(), segments).expect("sum keeps a valid layout")
    }

    /// Re-expresses the function on the union of both breakpoint sets.
    pub fn refined(&self, extra: &[f64]) -> PiecewisePolynomial {
        let mut bps: Vec<f64> = self
            .breakpoints
            .iter()
            .chain(extra.iter().filter(|t| **t > 0.0 && **t < 1.0))
            .copied()
            .collect();
        bps.sort_by(f64::total_cmp);
        bps.dedup();
        let segments = bps[..bps.len() - 1]
            .iter()
            .map(|&tau| {
                let k = self.segment_index(tau);
                self.segments[k].shifted(tau - self.breakpoints[k])
            })
            .collect();
        Self::new(bps, segments).expect("refinement keeps a valid layout")
    }

    /// Pointwise sum over the merged breakpoints.
    pub fn sum(&self, other: &PiecewisePolynomial) -> PiecewisePolynomial {
        let a = self.refined(&other.breakpoints);
        let b = other.refined(&self.breakpoints);
        let segments = a
            .segments
            .iter()
            .zip(&b.segments)
            .map(|(x, y)| x + y)
            .collect();
        Self::new(a.breakpoints, segments).expect("sum keeps a valid layout")
    }

    pub fn difference(&self, other: &PiecewisePolynomial) -> PiecewisePolynomial {
        self.sum(&other.scaled(-1.0))
    }

    /// Largest `|f|` over `[0, 1]`, exact up to root-finding precision: checks
    /// every breakpoint (both one-sided values) and every interior critical point.
    pub fn sup_norm(&self) -> f64 {
        let mut m = 0.0_f64;
        for (k, s) in self.segments.iter().enumerate() {
            let h = self.segment_width(k);
            m = m.max(s.eval(0.0).abs()).max(s.eval(h).abs());
            for r in s.derivative().roots_in(0.0, h) {
                m = m.max(s.eval(r).abs());
            }
        }
        m
    }

    /// `n` uniformly spaced samples `(t_i, f(t_i))` including both endpoints.
    pub fn sample(&self, n: usize) -> Vec<(f64, f64)> {
        let n = n.max(2);
        (0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                (t, self.value(t))
            })
            .collect()
    }
}
