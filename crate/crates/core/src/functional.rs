//! The two objectives: control energy and total variation.

use crate::piecewise::PiecewisePolynomial;

/// Total variation of `u` on `[0, 1]`, exact for polynomial segments.
///
/// Each segment is split at the interior roots of its derivative so that it is
/// monotone on every piece; the variation of a monotone piece is the absolute
/// difference of its end values. Jumps at breakpoints contribute their height.
pub fn total_variation(u: &PiecewisePolynomial) -> f64 {
    let mut tv = 0.0;
    for (k, seg) in u.segments().iter().enumerate() {
        if seg.is_constant() {
            continue;
        }
        let h = u.segment_width(k);
        let mut prev = seg.eval(0.0);
        for x in seg
            .derivative()
            .roots_in(0.0, h)
            .into_iter()
            .filter(|&x| x > 0.0 && x < h)
            .chain(std::iter::once(h))
        {
            let v = seg.eval(x);
            tv += (v - prev).abs();
            prev = v;
        }
    }
    for k in 1..u.num_segments() {
        if !u.is_continuous_at(k) {
            tv += u.jump(k).abs();
        }
    }
    tv
}

/// `1/2 int_0^1 u(t)^2 dt`, by exact polynomial integration.
pub fn energy(u: &PiecewisePolynomial) -> f64 {
    0.5 * u
        .segments()
        .iter()
        .enumerate()
        .map(|(k, s)| (s * s).integrate(0.0, u.segment_width(k)))
        .sum::<f64>()
}
