//! Shift-invert eigensolver for banded complex-symmetric pencils `A v = ε B v`.
//!
//! The Krylov iteration uses the ordinary Hermitian inner product for
//! stability. The bilinear c-product `uᵀ B v` is used only to normalize the
//! returned eigenvectors.

pub mod dense;
pub mod lu;

use log::warn;
use num_complex::Complex64;

use crate::banded::BandedMatrix;
use crate::error::{Error, Result};

pub use dense::{dense_eigs, dense_eigs_near, DENSE_LIMIT};
pub use lu::BandedLu;

/// Positive imaginary parts up to this magnitude are treated as roundoff.
pub const POSITIVE_IMAG_NOISE: f64 = 1e-10;

/// Eigenvalues closer than this are flagged as degenerate.
pub const DEGENERACY_GAP: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct EigenRequest {
    pub sigma: Complex64,
    pub n_eigs: usize,
    /// Relative residual `‖A v − ε B v‖ / ‖A v‖` required of every pair.
    pub tol: f64,
    /// Maximum number of restarts.
    pub max_iter: usize,
    /// Krylov subspace size; `None` picks `max(2 n_eigs + 1, n_eigs + 20)`.
    pub subspace: Option<usize>,
    /// Starting vector; `None` uses all ones.
    pub start: Option<Vec<Complex64>>,
}

impl EigenRequest {
    pub fn new(sigma: Complex64, n_eigs: usize) -> Self {
        Self { sigma, n_eigs, tol: 1e-10, max_iter: 300, subspace: None, start: None }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_eigs == 0 {
            return Err(Error::domain("n_eigs must be at least 1"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::domain("tol must be positive"));
        }
        if !self.sigma.re.is_finite() || !self.sigma.im.is_finite() {
            return Err(Error::domain("shift must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub epsilon: Complex64,
    /// c-normalized: `vᵀ B v = 1`.
    pub vector: Vec<Complex64>,
    pub residual: f64,
    /// Another returned eigenvalue lies within [`DEGENERACY_GAP`].
    pub degenerate: bool,
    /// Im ε was positive beyond [`POSITIVE_IMAG_NOISE`]: the pair is a basis
    /// artifact rather than a resonance and carries no physical width.
    pub unresolved: bool,
}

impl EigenPair {
    /// Resonance width `Γ = −2 Im ε`, never negative.
    pub fn width(&self) -> f64 {
        (-2.0 * self.epsilon.im).max(0.0)
    }
}

/// Bilinear product `uᵀ B v` (no complex conjugation).
pub fn c_product(u: &[Complex64], v: &[Complex64], b: &BandedMatrix<Complex64>) -> Result<Complex64> {
    if u.len() != b.dim() || v.len() != b.dim() {
        return Err(Error::domain(format!(
            "c-product dimension mismatch: {} / {} against matrix {}",
            u.len(),
            v.len(),
            b.dim()
        )));
    }
    let bv = b.matvec(v);
    Ok(dot_t(u, &bv))
}

pub(crate) fn dot_t(u: &[Complex64], v: &[Complex64]) -> Complex64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

fn dot_h(u: &[Complex64], v: &[Complex64]) -> Complex64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

fn norm(u: &[Complex64]) -> f64 {
    u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Relative residual of a candidate pair together with the Rayleigh quotient.
pub(crate) fn residual_of(
    a: &BandedMatrix<Complex64>,
    b: &BandedMatrix<Complex64>,
    v: &[Complex64],
    eps: Complex64,
) -> f64 {
    let av = a.matvec(v);
    let bv = b.matvec(v);
    let num = av.iter().zip(&bv).map(|(x, y)| (x - eps * y).norm_sqr()).sum::<f64>().sqrt();
    let den = norm(&av);
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

fn check_pencil(a: &BandedMatrix<Complex64>, b: &BandedMatrix<Complex64>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::domain(format!("pencil dimensions differ: {} vs {}", a.dim(), b.dim())));
    }
    if a.dim() == 0 {
        return Err(Error::domain("empty pencil"));
    }
    Ok(())
}

/// Scales `v` to unit c-norm, fixes its phase and applies the imaginary-part
/// policy. Shared by the iterative and dense paths.
pub(crate) fn finish_pair(
    b: &BandedMatrix<Complex64>,
    mut v: Vec<Complex64>,
    mut eps: Complex64,
    residual: f64,
) -> EigenPair {
    let bv = b.matvec(&v);
    let c = dot_t(&v, &bv);
    if c.norm() > 0.0 {
        let s = c.sqrt();
        v.iter_mut().for_each(|z| *z /= s);
    }
    // the c-norm fixes v up to sign; make the largest component point right
    let big = v.iter().copied().fold(Complex64::new(0.0, 0.0), |m, z| if z.norm() > m.norm() { z } else { m });
    if big.re < 0.0 || (big.re == 0.0 && big.im < 0.0) {
        v.iter_mut().for_each(|z| *z = -*z);
    }
    let mut unresolved = false;
    if eps.im > 0.0 {
        if eps.im <= POSITIVE_IMAG_NOISE {
            warn!("clamping Im ε = {:e} to zero at Re ε = {:e}", eps.im, eps.re);
            eps.im = 0.0;
        } else {
            unresolved = true;
        }
    }
    EigenPair { epsilon: eps, vector: v, residual, degenerate: false, unresolved }
}

pub(crate) fn sort_and_flag(pairs: &mut [EigenPair], sigma: Complex64) {
    pairs.sort_by(|p, q| {
        (p.epsilon - sigma)
            .norm()
            .total_cmp(&(q.epsilon - sigma).norm())
            .then(p.epsilon.re.total_cmp(&q.epsilon.re))
            .then(p.epsilon.im.total_cmp(&q.epsilon.im))
    });
    for i in 0..pairs.len() {
        for j in (i + 1)..pairs.len() {
            if (pairs[i].epsilon - pairs[j].epsilon).norm() <= DEGENERACY_GAP {
                pairs[i].degenerate = true;
                pairs[j].degenerate = true;
            }
        }
    }
}

/// Factorizes `A − σ B`, nudging σ off an exact eigenvalue up to three times.
pub fn factor_shifted(
    a: &BandedMatrix<Complex64>,
    b: &BandedMatrix<Complex64>,
    sigma: Complex64,
) -> Result<(BandedLu<Complex64>, Complex64)> {
    check_pencil(a, b)?;
    let lower = a.lower_bandwidth().max(b.lower_bandwidth());
    let upper = a.upper_bandwidth().max(b.upper_bandwidth());
    let mut s = sigma;
    let mut last = 0;
    for _ in 0..4 {
        let m = BandedMatrix::from_fn(a.dim(), lower, upper, |i, j| a.get(i, j) - s * b.get(i, j));
        match BandedLu::factor(&m) {
            Ok(lu) => return Ok((lu, s)),
            Err(Error::SingularShift { row }) => {
                last = row;
                s += Complex64::new(1e-8, 1e-8);
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::SingularShift { row: last })
}

/// Restarts without progress after which the iteration gives up on the
/// unconverged remainder.
const STALL_RESTARTS: usize = 20;

/// Best eigenvalue estimate for a fixed vector: the Ritz value, the
/// c-Rayleigh quotient or the least-squares value `(Bx)ᴴAx / ‖Bx‖²`,
/// whichever leaves the smallest relative residual.
fn best_estimate(
    a: &BandedMatrix<Complex64>,
    b: &BandedMatrix<Complex64>,
    x: &[Complex64],
    eps_ritz: Complex64,
) -> (Complex64, f64) {
    let ax = a.matvec(x);
    let bx = b.matvec(x);
    let an = norm(&ax);
    let bn = norm(&bx);
    let den = dot_t(x, &bx);
    let mut candidates = vec![eps_ritz];
    if den.norm() > 1e-8 * norm(x) * bn {
        candidates.push(dot_t(x, &ax) / den);
    }
    if bn > 0.0 {
        candidates.push(dot_h(&bx, &ax) / (bn * bn));
    }
    candidates
        .into_iter()
        .map(|e| {
            let num = ax.iter().zip(&bx).map(|(p, q)| (p - e * q).norm_sqr()).sum::<f64>().sqrt();
            (e, if an == 0.0 { num } else { num / an })
        })
        .min_by(|p, q| p.1.total_cmp(&q.1))
        .expect("at least one candidate")
}

/// Deterministic unit vector orthogonal to `basis`, used after a breakdown.
fn fresh_direction(basis: &[Vec<Complex64>], n: usize, seed: &mut u64) -> Option<Vec<Complex64>> {
    for _ in 0..8 {
        let mut w: Vec<Complex64> = (0..n)
            .map(|_| {
                *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                Complex64::new(((*seed >> 11) as f64) / ((1u64 << 53) as f64) - 0.5, 0.0)
            })
            .collect();
        for _ in 0..2 {
            for q in basis {
                let h = dot_h(q, &w);
                w.iter_mut().zip(q).for_each(|(x, y)| *x -= h * y);
            }
        }
        let nw = norm(&w);
        if nw > 1e-8 {
            w.iter_mut().for_each(|z| *z /= nw);
            return Some(w);
        }
    }
    None
}

/// Eigenvalues of a small dense matrix (column-major `m × m`) with right
/// eigenvectors.
fn small_eigen(h: &[Vec<Complex64>], m: usize) -> Result<(Vec<Complex64>, Vec<Vec<Complex64>>)> {
    let mat = faer::Mat::<Complex64>::from_fn(m, m, |i, j| h[j][i]);
    let evd = mat.eigen().map_err(|e| Error::Internal(format!("projected eigenproblem failed: {e:?}")))?;
    let u = evd.U();
    let s = evd.S();
    let vals: Vec<Complex64> = (0..m).map(|i| s.column_vector()[i]).collect();
    let vecs: Vec<Vec<Complex64>> = (0..m)
        .map(|j| {
            let mut y: Vec<Complex64> = (0..m).map(|i| u[(i, j)]).collect();
            let ny = norm(&y);
            if ny > 0.0 {
                y.iter_mut().for_each(|z| *z /= ny);
            }
            y
        })
        .collect();
    Ok((vals, vecs))
}

/// Eigenpairs of `A v = ε B v` nearest `σ`, by shift-invert Arnoldi with
/// thick restarts on `(A − σB)⁻¹ B`.
///
/// Returns between 1 and `n_eigs` pairs ordered by `|ε − σ|`, each with a
/// relative residual at most `tol`.
pub fn shift_invert_eigs(
    a: &BandedMatrix<Complex64>,
    b: &BandedMatrix<Complex64>,
    req: &EigenRequest,
) -> Result<Vec<EigenPair>> {
    req.validate()?;
    check_pencil(a, b)?;
    let (lu, _) = factor_shifted(a, b, req.sigma)?;
    shift_invert_with(a, b, &lu, req)
}

/// As [`shift_invert_eigs`] but with a factorization of `A − σB` supplied by
/// the caller, so several requests can share it.
pub fn shift_invert_with(
    a: &BandedMatrix<Complex64>,
    b: &BandedMatrix<Complex64>,
    lu: &BandedLu<Complex64>,
    req: &EigenRequest,
) -> Result<Vec<EigenPair>> {
    req.validate()?;
    check_pencil(a, b)?;
    let n = a.dim();
    if lu.dim() != n {
        return Err(Error::domain("factorization does not match the pencil"));
    }
    let sigma = req.sigma;
    let nev = req.n_eigs.min(n);
    let m = req.subspace.unwrap_or((2 * nev + 1).max(nev + 20)).max(nev + 2).min(n);
    let nev = if m == n { nev } else { nev.min(m - 1) }.max(1);
    // vectors kept across a restart
    let keep = (nev + (m - nev) / 2).min(m.saturating_sub(1)).max(1);

    let op = |x: &[Complex64]| -> Vec<Complex64> {
        let mut y = b.matvec(x);
        lu.solve_in_place(&mut y);
        y
    };

    let mut v0 = match &req.start {
        Some(s) if s.len() == n => s.clone(),
        Some(s) => return Err(Error::domain(format!("start vector has length {}, expected {n}", s.len()))),
        None => vec![Complex64::new(1.0, 0.0); n],
    };
    let n0 = norm(&v0);
    if n0 == 0.0 {
        return Err(Error::domain("start vector is zero"));
    }
    v0.iter_mut().for_each(|z| *z /= n0);

    // Krylov basis (columns) and projected matrix: hbar[j] is column j of the
    // (m+1) × m matrix with OP V_m = V_{m+1} Hbar.
    let mut basis: Vec<Vec<Complex64>> = vec![v0];
    let mut hbar: Vec<Vec<Complex64>> = Vec::with_capacity(m);
    let mut seed = 0x9e3779b97f4a7c15u64;
    let mut k = 0usize;
    let mut best_residual = f64::INFINITY;
    let mut accepted: Vec<EigenPair> = Vec::new();
    let (mut best_count, mut stall_residual, mut stalled) = (0usize, f64::INFINITY, 0usize);

    for restart in 0..=req.max_iter {
        // extend from k to m columns
        for j in k..m {
            let mut w = op(&basis[j]);
            let mut h = vec![Complex64::new(0.0, 0.0); m + 1];
            for _ in 0..2 {
                for (i, q) in basis.iter().enumerate() {
                    let c = dot_h(q, &w);
                    h[i] += c;
                    w.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
                }
            }
            let nw = norm(&w);
            let scale = h.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
            if nw > 1e-13 * scale {
                h[j + 1] = Complex64::new(nw, 0.0);
                w.iter_mut().for_each(|z| *z /= nw);
                basis.push(w);
            } else if j + 1 < n {
                // invariant subspace found; continue with an orthogonal direction
                match fresh_direction(&basis, n, &mut seed) {
                    Some(f) => basis.push(f),
                    None => return Err(Error::Internal("Krylov basis lost orthogonality".into())),
                }
            } else {
                basis.push(vec![Complex64::new(0.0, 0.0); n]);
            }
            hbar.push(h);
        }

        let (vals, vecs) = small_eigen(&hbar, m)?;
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&p, &q| vals[q].norm().total_cmp(&vals[p].norm()).then(p.cmp(&q)));

        accepted.clear();
        let mut all_ok = true;
        let mut round_best = f64::INFINITY;
        for &idx in order.iter().take(nev) {
            let nu = vals[idx];
            if nu.norm() == 0.0 {
                all_ok = false;
                continue;
            }
            let y = &vecs[idx];
            let mut x = vec![Complex64::new(0.0, 0.0); n];
            for (yi, q) in y.iter().zip(&basis) {
                if *yi != Complex64::new(0.0, 0.0) {
                    x.iter_mut().zip(q).for_each(|(a, b)| *a += yi * b);
                }
            }
            let eps_ritz = sigma + 1.0 / nu;
            let (mut eps, mut res) = best_estimate(a, b, &x, eps_ritz);
            if res > req.tol && res <= 1e3 * req.tol {
                // one inverse-iteration sweep polishes Ritz vectors stuck just
                // above the tolerance; keep it only if it stayed on the same pair
                let mut z = op(&x);
                let nz = norm(&z);
                z.iter_mut().for_each(|v| *v /= nz);
                let (e2, r2) = best_estimate(a, b, &z, eps);
                if r2 < res && (e2 - eps).norm() <= 1e-6 * (eps - sigma).norm() {
                    x = z;
                    eps = e2;
                    res = r2;
                }
            }
            if res <= req.tol {
                accepted.push(finish_pair(b, x, eps, res));
            } else {
                all_ok = false;
                round_best = round_best.min(res);
            }
        }
        best_residual = best_residual.min(round_best);
        if accepted.len() > best_count || round_best < 0.5 * stall_residual {
            best_count = best_count.max(accepted.len());
            stall_residual = stall_residual.min(round_best);
            stalled = 0;
        } else {
            stalled += 1;
        }
        if all_ok && accepted.len() == nev {
            log::debug!("σ = {sigma}: {nev} pairs after {restart} restarts");
            sort_and_flag(&mut accepted, sigma);
            return Ok(accepted);
        }
        if m == n || stalled >= STALL_RESTARTS {
            // full space spanned, or the remaining pairs sit at their accuracy floor
            break;
        }

        // thick restart on the `keep` Ritz vectors nearest σ
        let chosen: Vec<&Vec<Complex64>> = order.iter().take(keep).map(|&i| &vecs[i]).collect();
        let mut q: Vec<Vec<Complex64>> = Vec::with_capacity(keep);
        for y in chosen {
            let mut z = y.clone();
            for _ in 0..2 {
                for p in &q {
                    let c = dot_h(p, &z);
                    z.iter_mut().zip(p).for_each(|(a, b)| *a -= c * b);
                }
            }
            let nz = norm(&z);
            if nz > 1e-10 {
                z.iter_mut().for_each(|v| *v /= nz);
                q.push(z);
            }
        }
        let kk = q.len();
        // H Q for the square part
        let hq: Vec<Vec<Complex64>> = q
            .iter()
            .map(|z| {
                let mut out = vec![Complex64::new(0.0, 0.0); m + 1];
                for (c, zc) in z.iter().enumerate() {
                    for (r, h) in hbar[c].iter().enumerate() {
                        out[r] += h * zc;
                    }
                }
                out
            })
            .collect();
        let mut new_h: Vec<Vec<Complex64>> = Vec::with_capacity(m);
        for col in &hq {
            let mut h = vec![Complex64::new(0.0, 0.0); m + 1];
            for (r, p) in q.iter().enumerate() {
                h[r] = p.iter().zip(col.iter()).map(|(a, b)| a.conj() * b).sum();
            }
            h[kk] = col[m];
            new_h.push(h);
        }
        let mut new_basis: Vec<Vec<Complex64>> = q
            .iter()
            .map(|z| {
                let mut x = vec![Complex64::new(0.0, 0.0); n];
                for (zc, v) in z.iter().zip(&basis) {
                    x.iter_mut().zip(v).for_each(|(a, b)| *a += zc * b);
                }
                x
            })
            .collect();
        new_basis.push(basis.pop().expect("basis has m+1 columns"));
        basis = new_basis;
        hbar = new_h;
        k = kk;
    }

    if !accepted.is_empty() {
        warn!("best unconverged residual {best_residual:e}");
        warn!("shift-invert returned {} of {} requested pairs", accepted.len(), nev);
        sort_and_flag(&mut accepted, sigma);
        return Ok(accepted);
    }
    Err(Error::Convergence {
        message: format!("no eigenpair near σ = {sigma} reached tol {:e} after {} restarts", req.tol, req.max_iter),
        best_residual,
    })
}
