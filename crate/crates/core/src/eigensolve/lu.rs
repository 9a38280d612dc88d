//! Banded LU factorization with partial pivoting (LAPACK `gbtrf` layout).

use crate::banded::{BandedMatrix, Scalar};
use crate::error::{Error, Result};

/// `P M = L U` for a banded `M`. Immutable once built, so it can be shared
/// between threads that only call [`BandedLu::solve`].
#[derive(Debug, Clone)]
pub struct BandedLu<T: Scalar> {
    n: usize,
    kl: usize,
    ku: usize,
    ld: usize,
    ab: Vec<T>,
    pivots: Vec<usize>,
}

impl<T: Scalar> BandedLu<T> {
    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        // row offset kl + ku + i - j inside column j
        j * self.ld + self.kl + self.ku + i - j
    }

    pub fn factor(m: &BandedMatrix<T>) -> Result<Self> {
        let n = m.dim();
        let kl = m.lower_bandwidth();
        let ku = m.upper_bandwidth();
        let ld = 2 * kl + ku + 1;
        let mut lu = Self { n, kl, ku, ld, ab: vec![T::zero(); ld * n], pivots: vec![0; n] };
        for i in 0..n {
            for j in m.row_range(i) {
                let k = lu.idx(i, j);
                lu.ab[k] = m.get(i, j);
            }
        }
        let kv = ku + kl;
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let col = j * ld + kv;
            let mut p = 0usize;
            let mut best = -1.0f64;
            for i in 0..=km {
                let a = lu.ab[col + i].modulus();
                if a > best {
                    best = a;
                    p = i;
                }
            }
            lu.pivots[j] = j + p;
            if best == 0.0 || !best.is_finite() {
                return Err(Error::SingularShift { row: j });
            }
            ju = ju.max((j + ku + p).min(n - 1));
            if p != 0 {
                for c in j..=ju {
                    let a = lu.idx(j, c);
                    let b = lu.idx(j + p, c);
                    lu.ab.swap(a, b);
                }
            }
            if km > 0 {
                let inv = T::one() / lu.ab[col];
                for i in 1..=km {
                    lu.ab[col + i] = lu.ab[col + i] * inv;
                }
                for c in (j + 1)..=ju {
                    let ujc = lu.ab[lu.idx(j, c)];
                    if ujc == T::zero() {
                        continue;
                    }
                    let base = lu.idx(j, c);
                    for i in 1..=km {
                        let l = lu.ab[col + i];
                        lu.ab[base + i] = lu.ab[base + i] - l * ujc;
                    }
                }
            }
        }
        Ok(lu)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Overwrites `b` with the solution of `M x = b`.
    pub fn solve_in_place(&self, b: &mut [T]) {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let kv = self.kl + self.ku;
        for j in 0..n {
            let p = self.pivots[j];
            if p != j {
                b.swap(j, p);
            }
            let km = self.kl.min(n - 1 - j);
            let bj = b[j];
            if bj != T::zero() {
                let col = j * self.ld + kv;
                for i in 1..=km {
                    b[j + i] = b[j + i] - self.ab[col + i] * bj;
                }
            }
        }
        for j in (0..n).rev() {
            let col = j * self.ld + kv;
            b[j] = b[j] / self.ab[col];
            let bj = b[j];
            let top = j.saturating_sub(kv);
            for i in top..j {
                b[i] = b[i] - self.ab[col - (j - i)] * bj;
            }
        }
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn lcg(state: &mut u64) -> f64 {
        *state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*state >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
    }

    fn dense_solve(a: &[Vec<Complex64>], b: &[Complex64]) -> Vec<Complex64> {
        let n = b.len();
        let mut m: Vec<Vec<Complex64>> = a.to_vec();
        let mut x = b.to_vec();
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| m[i][k].norm().partial_cmp(&m[j][k].norm()).unwrap()).unwrap();
            m.swap(k, p);
            x.swap(k, p);
            for i in k + 1..n {
                let f = m[i][k] / m[k][k];
                for j in k..n {
                    let v = m[k][j];
                    m[i][j] -= f * v;
                }
                let v = x[k];
                x[i] -= f * v;
            }
        }
        for k in (0..n).rev() {
            let mut s = x[k];
            for j in k + 1..n {
                s -= m[k][j] * x[j];
            }
            x[k] = s / m[k][k];
        }
        x
    }

    #[test]
    fn identity_solve_is_noop() {
        let lu = BandedLu::factor(&BandedMatrix::<Complex64>::identity(7)).unwrap();
        let b: Vec<Complex64> = (0..7).map(|k| Complex64::new(k as f64, -1.0)).collect();
        assert_eq!(lu.solve(&b), b);
    }

    #[test]
    fn random_banded_matches_dense() {
        let mut s = 42u64;
        let n = 50;
        // bandwidth 7: 3 below, 3 above
        let mut m2 = BandedMatrix::<Complex64>::zeros(n, 3, 3);
        for i in 0..n {
            for j in m2.row_range(i) {
                m2.set(i, j, Complex64::new(lcg(&mut s), lcg(&mut s)));
            }
        }
        let b: Vec<Complex64> = (0..n).map(|_| Complex64::new(lcg(&mut s), lcg(&mut s))).collect();
        let x = BandedLu::factor(&m2).unwrap().solve(&b);
        let xd = dense_solve(&m2.to_dense(), &b);
        let r = m2.matvec(&x);
        let bn: f64 = b.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let rn: f64 = r.iter().zip(&b).map(|(a, c)| (a - c).norm_sqr()).sum::<f64>().sqrt();
        assert!(rn / bn <= 1e-12, "residual {}", rn / bn);
        for (a, c) in x.iter().zip(&xd) {
            assert!((a - c).norm() < 1e-10 * (1.0 + c.norm()));
        }
    }

    #[test]
    fn pivoting_is_required_and_handled() {
        // zero on the diagonal forces a row swap
        let m = BandedMatrix::from_fn(3, 1, 1, |i, j| if i == j { (i / 2) as f64 } else { 1.0 + i as f64 });
        let lu = BandedLu::factor(&m).unwrap();
        let x = lu.solve(&[1.0, 2.0, 3.0]);
        let r = m.matvec(&x);
        for (a, b) in r.iter().zip([1.0, 2.0, 3.0]) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn exact_eigenvalue_shift_is_singular() {
        let a = BandedMatrix::from_fn(3, 0, 0, |i, _| (i + 1) as f64);
        let shifted = BandedMatrix::from_fn(3, 0, 0, |i, j| a.get(i, j) - 2.0);
        assert!(matches!(BandedLu::factor(&shifted), Err(Error::SingularShift { row: 1 })));
    }
}
