//! Banded LU factorization with partial pivoting.

/// Square matrix with `kl` sub- and `ku` super-diagonals. Row `i` stores the
/// columns `i - kl ..= i + kl + ku`; the extra `kl` slots absorb pivoting fill.
#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        BandedMatrix {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(
            j + self.kl >= i && j <= i + self.kl + self.ku,
            "({i}, {j}) outside band"
        );
        i * self.width + (j + self.kl - i)
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(
            j + self.kl >= i && j <= i + self.ku,
            "entry ({i}, {j}) outside declared bandwidth"
        );
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        self.data[self.slot(i, j)]
    }

    /// Factors in place. Returns `None` on an exactly zero pivot.
    pub fn factor(mut self) -> Option<BandedLu> {
        let n = self.n;
        let reach = self.kl + self.ku;
        let mut perm = vec![0usize; n];
        for k in 0..n {
            let last_row = (k + self.kl).min(n - 1);
            let mut p = k;
            let mut best = self.get(k, k).abs();
            for i in k + 1..=last_row {
                let v = self.get(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                return None;
            }
            perm[k] = p;
            let last_col = (k + reach).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let (a, b) = (self.slot(k, j), self.slot(p, j));
                    self.data.swap(a, b);
                }
            }
            let pivot = self.get(k, k);
            for i in k + 1..=last_row {
                let si = self.slot(i, k);
                let l = self.data[si] / pivot;
                if l == 0.0 {
                    continue;
                }
                self.data[si] = l;
                for j in k + 1..=last_col {
                    let (a, b) = (self.slot(i, j), self.slot(k, j));
                    self.data[a] -= l * self.data[b];
                }
            }
        }
        Some(BandedLu { m: self, perm })
    }
}

#[derive(Debug, Clone)]
pub struct BandedLu {
    m: BandedMatrix,
    perm: Vec<usize>,
}

impl BandedLu {
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let a = &self.m;
        let n = a.n;
        assert_eq!(b.len(), n);
        for k in 0..n {
            b.swap(k, self.perm[k]);
            let bk = b[k];
            for (i, bi) in b
                .iter_mut()
                .enumerate()
                .take((k + a.kl).min(n - 1) + 1)
                .skip(k + 1)
            {
                *bi -= a.get(i, k) * bk;
            }
        }
        for k in (0..n).rev() {
            let last = (k + a.kl + a.ku).min(n - 1);
            let mut s = b[k];
            for (j, bj) in b.iter().enumerate().take(last + 1).skip(k + 1) {
                s -= a.get(k, j) * bj;
            }
            b[k] = s / a.get(k, k);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(n, kl, ku) in &[(1, 0, 0), (6, 1, 2), (40, 3, 1), (25, 4, 4)] {
            let mut band = BandedMatrix::zeros(n, kl, ku);
            let mut dense = DMatrix::<f64>::zeros(n, n);
            for i in 0..n {
                for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                    // Small diagonal forces pivoting.
                    let v = if i == j {
                        rng.gen_range(-0.01..0.01)
                    } else {
                        rng.gen_range(-1.0..1.0)
                    };
                    band.add(i, j, v);
                    dense[(i, j)] = v;
                }
            }
            let rhs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut x = rhs.clone();
            band.factor().unwrap().solve_in_place(&mut x);
            let want = dense.lu().solve(&DVector::from_vec(rhs)).unwrap();
            for i in 0..n {
                assert!(
                    (x[i] - want[i]).abs() < 1e-9 * (1.0 + want[i].abs()),
                    "n={n} i={i}"
                );
            }
        }
    }

    #[test]
    fn singular_is_reported() {
        let mut band = BandedMatrix::zeros(2, 1, 1);
        band.add(0, 0, 1.0);
        band.add(0, 1, 2.0);
        band.add(1, 0, 2.0);
        band.add(1, 1, 4.0);
        assert!(band.factor().is_none());
    }
}
