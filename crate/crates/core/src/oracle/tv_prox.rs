//! Exact proximal operator of the 1-D total variation.
//!
//! Solves `argmin_x 1/2 ||x - y||^2 + lambda sum_k |x_{k+1} - x_k|` with
//! Condat's direct algorithm (L. Condat, "A direct algorithm for 1D total
//! variation denoising", IEEE SPL 2013). Linear time in practice; the output
//! is exactly piecewise constant.

pub fn tv_prox(input: &[f64], lambda: f64, output: &mut [f64]) {
    let width = input.len();
    assert_eq!(width, output.len());
    if width == 0 {
        return;
    }
    if lambda <= 0.0 {
        output.copy_from_slice(input);
        return;
    }
    let (mut k, mut k0, mut kplus, mut kminus) = (0usize, 0usize, 0usize, 0usize);
    let mut umin = lambda;
    let mut umax = -lambda;
    let mut vmin = input[0] - lambda;
    let mut vmax = input[0] + lambda;
    let twolambda = 2.0 * lambda;
    let minlambda = -lambda;
    loop {
        while k == width - 1 {
            if umin < 0.0 {
                loop {
                    output[k0] = vmin;
                    k0 += 1;
                    if k0 > kminus {
                        break;
                    }
                }
                kminus = k0;
                k = k0;
                vmin = input[k0];
                umin = lambda;
                umax = vmin + umin - vmax;
            } else if umax > 0.0 {
                loop {
                    output[k0] = vmax;
                    k0 += 1;
                    if k0 > kplus {
                        break;
                    }
                }
                kplus = k0;
                k = k0;
                vmax = input[k0];
                umax = minlambda;
                umin = vmax + umax - vmin;
            } else {
                vmin += umin / (k - k0 + 1) as f64;
                loop {
                    output[k0] = vmin;
                    k0 += 1;
                    if k0 > k {
                        break;
                    }
                }
                return;
            }
        }
        umin += input[k + 1] - vmin;
        if umin < minlambda {
            loop {
                output[k0] = vmin;
                k0 += 1;
                if k0 > kminus {
                    break;
                }
            }
            k = k0;
            kminus = k0;
            kplus = k0;
            vmin = input[k0];
            vmax = vmin + twolambda;
            umin = lambda;
            umax = minlambda;
        } else {
            umax += input[k + 1] - vmax;
            if umax > lambda {
                loop {
                    output[k0] = vmax;
                    k0 += 1;
                    if k0 > kplus {
                        break;
                    }
                }
                k = k0;
                kminus = k0;
                kplus = k0;
                vmax = input[k0];
                vmin = vmax - twolambda;
                umin = lambda;
                umax = minlambda;
            } else {
                k += 1;
                if umin >= lambda {
                    kminus = k;
                    vmin += (umin - lambda) / (kminus - k0 + 1) as f64;
                    umin = lambda;
                }
                if umax <= minlambda {
                    kplus = k;
                    vmax += (umax + lambda) / (kplus - k0 + 1) as f64;
                    umax = minlambda;
                }
            }
        }
    }
}
