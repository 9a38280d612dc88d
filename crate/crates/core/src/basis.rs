//! Sturmian basis on the half line `x > 0` and the banded operator matrices.
//!
//! `φ_n(x) = N_n (2x/α) e^{-x/α} L^{(1)}_{n-1}(2x/α)` with `N_n = 1/sqrt(n)`,
//! which makes `⟨φ_n|1/x|φ_m⟩ = δ_nm`. All matrix elements are evaluated by
//! Gauss–Laguerre quadrature in `y = 2x/α`, exact for these integrands.

use std::io::{Read, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::banded::BandedMatrix;
use crate::eigensolve::lu::BandedLu;
use crate::error::{Error, Result};
use crate::quadrature::{scaled_laguerre, GaussLaguerre};

/// Declared half-bandwidths of the operator matrices.
pub const OVERLAP_BAND: usize = 1;
pub const KINETIC_BAND: usize = 1;
pub const COULOMB_BAND: usize = 0;
pub const DIPOLE_BAND: usize = 2;

/// Largest out-of-band element allowed, relative to the largest in-band one.
pub const BAND_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SturmianBasis {
    pub size: usize,
    pub alpha: f64,
}

impl SturmianBasis {
    pub fn new(size: usize, alpha: f64) -> Result<Self> {
        if size < 2 {
            return Err(Error::domain(format!("basis size must be at least 2, got {size}")));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::domain(format!("alpha must be positive, got {alpha}")));
        }
        Ok(Self { size, alpha })
    }

    /// Basis centred on the Rydberg level `n0` (`α = n0`).
    pub fn for_level(n0: u32, size: usize) -> Result<Self> {
        Self::new(size, n0 as f64)
    }

    /// `φ_n(x)` for `1 ≤ n ≤ size`.
    pub fn function(&self, n: usize, x: f64) -> Result<f64> {
        if n == 0 || n > self.size {
            return Err(Error::domain(format!("basis index {n} outside 1..={}", self.size)));
        }
        if !(x > 0.0) {
            return Err(Error::domain(format!("x must be positive, got {x}")));
        }
        let y = 2.0 * x / self.alpha;
        let l = scaled_laguerre(1.0, n - 1, y);
        Ok(y * l[n - 1] / (n as f64).sqrt())
    }
}

/// Free-function form of [`SturmianBasis::function`].
pub fn basis_function(basis: &SturmianBasis, n: usize, x: f64) -> Result<f64> {
    basis.function(n, x)
}

/// Overlap, kinetic, Coulomb and dipole matrices in the Sturmian basis.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSet {
    pub basis: SturmianBasis,
    /// `⟨φ_n|φ_m⟩`
    pub s: BandedMatrix<f64>,
    /// `½⟨φ_n'|φ_m'⟩`
    pub k: BandedMatrix<f64>,
    /// `⟨φ_n|1/x|φ_m⟩`
    pub c: BandedMatrix<f64>,
    /// `⟨φ_n|x|φ_m⟩`
    pub x: BandedMatrix<f64>,
}

const CHECK_MARGIN: usize = 2;

pub fn build_operators(basis: &SturmianBasis) -> Result<OperatorSet> {
    let nb = basis.size;
    let alpha = basis.alpha;
    let rule = GaussLaguerre::new(nb + 3);

    let wide = |band: usize| BandedMatrix::<f64>::zeros(nb, band + CHECK_MARGIN, band + CHECK_MARGIN);
    let mut s = wide(OVERLAP_BAND);
    let mut k = wide(KINETIC_BAND);
    let mut c = wide(COULOMB_BAND);
    let mut x = wide(DIPOLE_BAND);

    let norms: Vec<f64> = (1..=nb).map(|n| 1.0 / (n as f64).sqrt()).collect();
    let mut chi = vec![0.0; nb];
    let mut dchi = vec![0.0; nb];
    for (&y, &w) in rule.nodes.iter().zip(&rule.scaled_weights) {
        let l = scaled_laguerre(1.0, nb - 1, y);
        for n in 1..=nb {
            let nf = n as f64;
            let prev = if n >= 2 { l[n - 2] } else { 0.0 };
            chi[n - 1] = y * l[n - 1] * norms[n - 1];
            dchi[n - 1] = ((nf - 0.5 * y) * l[n - 1] - nf * prev) * norms[n - 1];
        }
        accumulate(&mut s, &chi, &chi, w);
        accumulate(&mut k, &dchi, &dchi, w);
        accumulate(&mut c, &chi, &chi, w / y);
        accumulate(&mut x, &chi, &chi, w * y);
    }

    // dx = α/2 dy, d/dx = (2/α) d/dy
    let finish = |m: BandedMatrix<f64>, factor: f64, band: usize, name: &str| -> Result<BandedMatrix<f64>> {
        let m = m.map(|v| v * factor);
        let (t, dropped) = m.truncated(band, band);
        let inside = t.max_abs();
        if dropped > BAND_TOLERANCE * inside {
            return Err(Error::Internal(format!(
                "{name} violates its bandwidth: out-of-band {dropped:e} vs in-band {inside:e}"
            )));
        }
        Ok(symmetrize(t))
    };
    Ok(OperatorSet {
        basis: *basis,
        s: finish(s, 0.5 * alpha, OVERLAP_BAND, "overlap")?,
        k: finish(k, 1.0 / alpha, KINETIC_BAND, "kinetic")?,
        c: finish(c, 1.0, COULOMB_BAND, "coulomb")?,
        x: finish(x, 0.25 * alpha * alpha, DIPOLE_BAND, "dipole")?,
    })
}

fn accumulate(m: &mut BandedMatrix<f64>, a: &[f64], b: &[f64], w: f64) {
    let n = a.len();
    let band = m.upper_bandwidth();
    for i in 0..n {
        let wa = w * a[i];
        if wa == 0.0 {
            continue;
        }
        for j in i..(i + band + 1).min(n) {
            m.add_to(i, j, wa * b[j]);
        }
    }
}

/// Fills the lower triangle from the upper one, so the result is exactly symmetric.
fn symmetrize(mut m: BandedMatrix<f64>) -> BandedMatrix<f64> {
    for i in 0..m.dim() {
        for j in (i + 1)..m.row_range(i).end {
            let v = m.get(i, j);
            m.set(j, i, v);
        }
    }
    m
}

impl OperatorSet {
    pub fn dim(&self) -> usize {
        self.basis.size
    }

    /// Complex-dilated field-free Hamiltonian `e^{-2iθ} K - e^{-iθ} C`.
    pub fn dilated_hamiltonian(&self, theta: f64) -> BandedMatrix<Complex64> {
        let kf = Complex64::from_polar(1.0, -2.0 * theta);
        let cf = Complex64::from_polar(1.0, -theta);
        BandedMatrix::from_fn(self.dim(), 1, 1, |i, j| kf * self.k.get(i, j) - cf * self.c.get(i, j))
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(DUMP_MAGIC)?;
        w.write_all(&DUMP_VERSION.to_le_bytes())?;
        w.write_all(&(self.basis.size as u64).to_le_bytes())?;
        w.write_all(&self.basis.alpha.to_le_bytes())?;
        w.write_all(&4u32.to_le_bytes())?;
        for m in [&self.s, &self.k, &self.c, &self.x] {
            let (kl, ku) = (m.lower_bandwidth(), m.upper_bandwidth());
            w.write_all(&(kl as u32).to_le_bytes())?;
            w.write_all(&(ku as u32).to_le_bytes())?;
            for d in -(kl as isize)..=(ku as isize) {
                for v in m.diagonal(d) {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != DUMP_MAGIC {
            return Err(Error::Format("not an operator-set dump".into()));
        }
        let version = read_u32(&mut r)?;
        if version != DUMP_VERSION {
            return Err(Error::Format(format!("unsupported dump version {version}")));
        }
        let size = read_u64(&mut r)? as usize;
        let alpha = read_f64(&mut r)?;
        let basis = SturmianBasis::new(size, alpha).map_err(|e| Error::Format(e.to_string()))?;
        if read_u32(&mut r)? != 4 {
            return Err(Error::Format("expected four matrices".into()));
        }
        let mut mats = Vec::with_capacity(4);
        for _ in 0..4 {
            let kl = read_u32(&mut r)? as usize;
            let ku = read_u32(&mut r)? as usize;
            if kl >= size.max(1) || ku >= size.max(1) {
                return Err(Error::Format("bandwidth exceeds dimension".into()));
            }
            let mut m = BandedMatrix::<f64>::zeros(size, kl, ku);
            for d in -(kl as isize)..=(ku as isize) {
                let rows = if d >= 0 { 0..size - d as usize } else { (-d) as usize..size };
                for i in rows {
                    let j = (i as isize + d) as usize;
                    m.set(i, j, read_f64(&mut r)?);
                }
            }
            mats.push(m);
        }
        let x = mats.pop().unwrap();
        let c = mats.pop().unwrap();
        let k = mats.pop().unwrap();
        let s = mats.pop().unwrap();
        Ok(Self { basis, s, k, c, x })
    }
}

const DUMP_MAGIC: &[u8; 8] = b"MWOPSET\0";
const DUMP_VERSION: u32 = 1;

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// A field-free eigenstate of the (possibly dilated) Hamiltonian.
#[derive(Debug, Clone)]
pub struct BoundState {
    pub energy: Complex64,
    /// Coefficients, normalized so that `vᵀ S v = 1` (no conjugation).
    pub vector: Vec<Complex64>,
}

/// Eigenpair of `(e^{-2iθ}K - e^{-iθ}C) v = E S v` nearest `-1/(2 n^2)`, by
/// shifted inverse iteration. The basis must satisfy `α = n` and `size ≥ 4n`.
pub fn dilated_bound_state(ops: &OperatorSet, n: u32, theta: f64) -> Result<BoundState> {
    let nf = n as f64;
    if n == 0 {
        return Err(Error::domain("principal quantum number must be at least 1"));
    }
    if (ops.basis.alpha - nf).abs() > 1e-12 * nf {
        return Err(Error::domain(format!("basis scale alpha = {} must equal n0 = {n}", ops.basis.alpha)));
    }
    if ops.basis.size < 4 * n as usize {
        return Err(Error::domain(format!("basis size {} below 4*n0 = {}", ops.basis.size, 4 * n)));
    }
    let target = -0.5 / (nf * nf);
    let h = ops.dilated_hamiltonian(theta);
    let s = ops.s.to_complex();
    let dim = ops.dim();

    let mut lu = None;
    for attempt in 0..4 {
        let sigma = Complex64::new(target * (1.0 + 1e-9 * (1 << (3 * attempt)) as f64), 0.0);
        let shifted = BandedMatrix::from_fn(dim, 1, 1, |i, j| h.get(i, j) - sigma * s.get(i, j));
        match BandedLu::factor(&shifted) {
            Ok(f) => {
                lu = Some(f);
                break;
            }
            Err(Error::SingularShift { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    let lu = lu.ok_or_else(|| Error::Convergence {
        message: "no regular shift found for inverse iteration".into(),
        best_residual: f64::INFINITY,
    })?;

    let mut v = vec![Complex64::new(1.0, 0.0); dim];
    let mut energy = Complex64::new(target, 0.0);
    let mut residual = f64::INFINITY;
    for _ in 0..60 {
        let mut next = s.matvec(&v);
        lu.solve_in_place(&mut next);
        let nrm = next.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        next.iter_mut().for_each(|z| *z /= nrm);
        let hv = h.matvec(&next);
        let sv = s.matvec(&next);
        let num: Complex64 = next.iter().zip(&hv).map(|(a, b)| a * b).sum();
        let den: Complex64 = next.iter().zip(&sv).map(|(a, b)| a * b).sum();
        energy = num / den;
        let rn = hv.iter().zip(&sv).map(|(a, b)| (a - energy * b).norm_sqr()).sum::<f64>().sqrt();
        let hn = hv.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        residual = rn / hn;
        v = next;
        if residual < 1e-13 {
            break;
        }
    }
    if (energy - target).norm() > 1e-6 {
        return Err(Error::Convergence {
            message: format!("bound state n = {n} converged to E = {energy}, expected {target}"),
            best_residual: residual,
        });
    }
    let sv = s.matvec(&v);
    let cnorm: Complex64 = v.iter().zip(&sv).map(|(a, b)| a * b).sum();
    let scale = cnorm.sqrt();
    v.iter_mut().for_each(|z| *z /= scale);
    // fix the overall sign so the largest component has positive real part
    let big = v.iter().copied().fold(Complex64::new(0.0, 0.0), |m, z| if z.norm() > m.norm() { z } else { m });
    if big.re < 0.0 {
        v.iter_mut().for_each(|z| *z = -*z);
    }
    Ok(BoundState { energy, vector: v })
}

/// Real field-free eigenvector of `(K - C) v = E S v` for level `n0`, `vᵀ S v = 1`.
pub fn field_free_state(ops: &OperatorSet, n0: u32) -> Result<Vec<f64>> {
    let st = dilated_bound_state(ops, n0, 0.0)?;
    Ok(st.vector.iter().map(|z| z.re).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ops(nb: usize, alpha: f64) -> OperatorSet {
        build_operators(&SturmianBasis::new(nb, alpha).unwrap()).unwrap()
    }

    #[test]
    fn rejects_bad_basis() {
        assert!(SturmianBasis::new(1, 1.0).is_err());
        assert!(SturmianBasis::new(4, 0.0).is_err());
        let b = SturmianBasis::new(4, 1.0).unwrap();
        assert!(b.function(0, 1.0).is_err());
        assert!(b.function(5, 1.0).is_err());
        assert!(b.function(1, 0.0).is_err());
    }

    #[test]
    fn lowest_function_closed_form() {
        let b = SturmianBasis::new(3, 1.0).unwrap();
        let v = b.function(1, 1.0).unwrap();
        assert!((v - 2.0 / std::f64::consts::E).abs() < 1e-15);
    }

    #[test]
    fn functions_vanish_at_origin() {
        let b = SturmianBasis::new(30, 3.0).unwrap();
        for n in [1, 7, 30] {
            assert!(b.function(n, 1e-12).unwrap().abs() < 1e-9);
        }
    }

    #[test]
    fn coulomb_is_identity_and_matrices_symmetric() {
        for (nb, alpha) in [(12, 0.5), (40, 7.0)] {
            let o = ops(nb, alpha);
            for i in 0..nb {
                assert!((o.c.get(i, i) - 1.0).abs() < 1e-12);
            }
            for m in [&o.s, &o.k, &o.c, &o.x] {
                assert!(m.is_symmetric());
            }
            assert_eq!(o.s.upper_bandwidth(), 1);
            assert_eq!(o.c.upper_bandwidth(), 0);
            assert_eq!(o.x.upper_bandwidth(), 2);
        }
    }

    #[test]
    fn kinetic_obeys_sturmian_identity() {
        // For Coulomb Sturmians: K = diag(n/α) C - S/(2α²)
        let alpha = 4.0;
        let o = ops(30, alpha);
        for i in 0..30 {
            for j in o.k.row_range(i) {
                let expect = if i == j { (i + 1) as f64 / alpha } else { 0.0 } - o.s.get(i, j) / (2.0 * alpha * alpha);
                assert!((o.k.get(i, j) - expect).abs() < 1e-12, "({i},{j})");
            }
        }
    }

    #[test]
    fn field_free_states() {
        for n0 in [1u32, 2, 10] {
            let o = ops(4 * n0 as usize + 4, n0 as f64);
            let st = dilated_bound_state(&o, n0, 0.0).unwrap();
            let e = -0.5 / (n0 as f64).powi(2);
            assert!((st.energy.re - e).abs() < 1e-10 && st.energy.im.abs() < 1e-14);
            let v = field_free_state(&o, n0).unwrap();
            let sv = o.s.matvec(&v);
            let norm: f64 = v.iter().zip(&sv).map(|(a, b)| a * b).sum();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn field_free_state_preconditions() {
        let o = ops(40, 5.0);
        assert!(matches!(field_free_state(&o, 4), Err(Error::Domain(_))));
        let o = ops(10, 5.0);
        assert!(matches!(field_free_state(&o, 5), Err(Error::Domain(_))));
    }

    #[test]
    fn dilated_bound_state_is_theta_invariant() {
        let o = ops(60, 5.0);
        let a = dilated_bound_state(&o, 5, 0.1).unwrap();
        let b = dilated_bound_state(&o, 5, 0.2).unwrap();
        assert!((a.energy - b.energy).norm() < 1e-8);
        assert!((a.energy.re + 0.02).abs() < 1e-8);
    }

    #[test]
    fn dump_round_trip() {
        let o = ops(25, 3.0);
        let mut buf = Vec::new();
        o.write_to(&mut buf).unwrap();
        // header + 4 matrices with (kl, ku) and their diagonals
        let diag_len = |b: usize| (0..=2 * b).map(|k| 25 - (k as isize - b as isize).unsigned_abs()).sum::<usize>();
        assert_eq!(buf.len(), 8 + 4 + 8 + 8 + 4 + 4 * 8 + 8 * (diag_len(1) * 2 + diag_len(0) + diag_len(2)));
        let back = OperatorSet::read_from(&buf[..]).unwrap();
        assert_eq!(back, o);
        buf[0] = b'X';
        assert!(matches!(OperatorSet::read_from(&buf[..]), Err(Error::Format(_))));
    }
}
