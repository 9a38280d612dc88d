//! Dense reference solver for small pencils.

use num_complex::Complex64;

use super::{finish_pair, residual_of, sort_and_flag, EigenPair, EigenRequest};
use crate::banded::BandedMatrix;
use crate::error::{Error, Result};

/// Largest dimension accepted by the dense path.
pub const DENSE_LIMIT: usize = 2000;

/// Complex-symmetric Cholesky `B = L Lᵀ` (no conjugation, no pivoting).
fn symmetric_cholesky(b: &[Vec<Complex64>]) -> Result<Vec<Vec<Complex64>>> {
    let n = b.len();
    let mut l = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for j in 0..n {
        let mut d = b[j][j];
        for k in 0..j {
            d -= l[j][k] * l[j][k];
        }
        if d.norm() < 1e-300 {
            return Err(Error::Internal(format!("overlap factorization broke down at row {j}")));
        }
        let djj = d.sqrt();
        l[j][j] = djj;
        for i in (j + 1)..n {
            let mut s = b[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            l[i][j] = s / djj;
        }
    }
    Ok(l)
}

/// Every eigenpair of `A v = ε B v`, ordered by real part.
///
/// `B` must admit a complex-symmetric Cholesky factorization, which holds for
/// any positive definite overlap.
pub fn dense_eigs(a: &BandedMatrix<Complex64>, b: &BandedMatrix<Complex64>) -> Result<Vec<EigenPair>> {
    let n = a.dim();
    if b.dim() != n || n == 0 {
        return Err(Error::domain("dense solve needs a non-empty square pencil"));
    }
    if n > DENSE_LIMIT {
        return Err(Error::domain(format!("dimension {n} exceeds the dense limit {DENSE_LIMIT}")));
    }
    let l = symmetric_cholesky(&b.to_dense())?;
    let ad = a.to_dense();

    // M = L⁻¹ A L⁻ᵀ, built column by column with forward substitutions
    let forward = |rhs: &mut [Complex64]| {
        for i in 0..n {
            let mut s = rhs[i];
            for k in 0..i {
                s -= l[i][k] * rhs[k];
            }
            rhs[i] = s / l[i][i];
        }
    };
    let backward_t = |rhs: &mut [Complex64]| {
        for i in (0..n).rev() {
            let mut s = rhs[i];
            for k in (i + 1)..n {
                s -= l[k][i] * rhs[k];
            }
            rhs[i] = s / l[i][i];
        }
    };
    // Y = L⁻¹ A (columns), then M = L⁻¹ Yᵀ since Y Lᵀ⁻¹ = (L⁻¹ Yᵀ)ᵀ
    let mut y = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for j in 0..n {
        let mut col: Vec<Complex64> = (0..n).map(|i| ad[i][j]).collect();
        forward(&mut col);
        for i in 0..n {
            y[i][j] = col[i];
        }
    }
    let mut mmat = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for i in 0..n {
        let mut col = y[i].clone();
        forward(&mut col);
        for (j, v) in col.into_iter().enumerate() {
            mmat[i][j] = v;
        }
    }
    let fm = faer::Mat::<Complex64>::from_fn(n, n, |i, j| mmat[i][j]);
    let evd = fm.eigen().map_err(|e| Error::Internal(format!("dense eigensolver failed: {e:?}")))?;
    let u = evd.U();
    let s = evd.S();

    let mut pairs = Vec::with_capacity(n);
    for j in 0..n {
        let eps = s.column_vector()[j];
        let mut v: Vec<Complex64> = (0..n).map(|i| u[(i, j)]).collect();
        backward_t(&mut v);
        let res = residual_of(a, b, &v, eps);
        pairs.push(finish_pair(b, v, eps, res));
    }
    pairs.sort_by(|p, q| p.epsilon.re.total_cmp(&q.epsilon.re).then(p.epsilon.im.total_cmp(&q.epsilon.im)));
    Ok(pairs)
}

/// The `n_eigs` dense eigenpairs nearest `σ`, ordered as the iterative solver
/// orders them.
pub fn dense_eigs_near(
    a: &BandedMatrix<Complex64>,
    b: &BandedMatrix<Complex64>,
    req: &EigenRequest,
) -> Result<Vec<EigenPair>> {
    req.validate()?;
    let mut all = dense_eigs(a, b)?;
    sort_and_flag(&mut all, req.sigma);
    all.truncate(req.n_eigs);
    Ok(all)
}
