//! Per-weight plot data: one frame per front point.

use serde::{Deserialize, Serialize};

use super::ParetoFront;
use crate::error::{Error, Result};
use crate::problem::Weight;

pub const FRAME_POINTS: usize = 400;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameData {
    pub alpha: Weight,
    /// Position of the frame's point in the front.
    pub index: usize,
    pub t: Vec<f64>,
    pub u: Vec<f64>,
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    /// `eta / alpha`; all zeros when `alpha = 0`.
    pub eta_over_alpha: Vec<f64>,
    /// Set when `alpha = 0` and the ratio is undefined.
    pub eta_undefined: bool,
    /// `(phi1, phi2)` of every front point.
    pub front: Vec<(f64, f64)>,
    pub current: (f64, f64),
}

pub fn frames(front: &ParetoFront) -> Result<Vec<FrameData>> {
    if front.points.is_empty() {
        return Err(Error::invalid("front has no points"));
    }
    let t: Vec<f64> = (0..FRAME_POINTS)
        .map(|i| i as f64 / (FRAME_POINTS - 1) as f64)
        .collect();
    let pts: Vec<(f64, f64)> = front.points.iter().map(|p| (p.phi1, p.phi2)).collect();
    Ok(front
        .points
        .iter()
        .enumerate()
        .map(|(index, p)| {
            let s = front.solution(p);
            let sample = |f: &crate::piecewise::PiecewisePolynomial| {
                t.iter().map(|&x| f.value(x)).collect::<Vec<_>>()
            };
            let (eta_over_alpha, eta_undefined) = match s.eta_over_alpha() {
                Some(e) => (sample(&e), false),
                None => (vec![0.0; t.len()], true),
            };
            FrameData {
                alpha: p.alpha,
                index,
                t: t.clone(),
                u: sample(&s.u),
                x1: sample(&s.x1),
                x2: sample(&s.x2),
                eta_over_alpha,
                eta_undefined,
                front: pts.clone(),
                current: (p.phi1, p.phi2),
            }
        })
        .collect())
}
