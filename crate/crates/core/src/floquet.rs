//! Complex-dilated Floquet pencil for the driven half-line atom.

use num_complex::Complex64;

use crate::banded::BandedMatrix;
use crate::basis::OperatorSet;
use crate::error::{Error, Result};
use crate::observables::photon_number;

/// Default rotation angle of the complex dilation, in radians.
pub const DEFAULT_THETA: f64 = 0.15;

/// Default number of spare photon blocks on either side of the ladder.
pub const DEFAULT_MARGIN: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FloquetConfig {
    pub theta: f64,
    pub k_min: i32,
    pub k_max: i32,
    /// Field amplitude, atomic units.
    pub field: f64,
    /// Angular frequency, atomic units.
    pub omega: f64,
}

impl FloquetConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.field >= 0.0) || !self.field.is_finite() {
            return Err(Error::domain(format!("field must be non-negative, got {}", self.field)));
        }
        if self.k_min > self.k_max {
            return Err(Error::domain(format!("empty photon block range {}..={}", self.k_min, self.k_max)));
        }
        if !(0.0..std::f64::consts::FRAC_PI_2).contains(&self.theta) {
            return Err(Error::domain(format!("rotation angle {} outside [0, π/2)", self.theta)));
        }
        if !(self.omega > 0.0) && self.k_min != self.k_max {
            return Err(Error::domain("omega must be positive when more than one block is used"));
        }
        Ok(())
    }

    pub fn n_blocks(&self) -> usize {
        (self.k_max - self.k_min + 1) as usize
    }
}

/// Position of the coefficient `(block k, basis function n)` in the global vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ordering {
    /// All basis functions of block `k_min` first: block-tridiagonal layout,
    /// bandwidth `N_b + 2`.
    PhotonMajor,
    /// The photon index runs fastest: bandwidth `2·n_blocks + 1`.
    BasisMajor,
}

/// The pencil `A v = ε B v` with its block bookkeeping.
#[derive(Debug, Clone)]
pub struct FloquetProblem {
    pub a: BandedMatrix<Complex64>,
    pub b: BandedMatrix<Complex64>,
    pub block_dim: usize,
    pub n_blocks: usize,
    pub k_min: i32,
    pub ordering: Ordering,
    pub config: FloquetConfig,
}

impl FloquetProblem {
    pub fn dim(&self) -> usize {
        self.block_dim * self.n_blocks
    }

    pub fn k_max(&self) -> i32 {
        self.k_min + self.n_blocks as i32 - 1
    }

    /// Global index of basis function `n` (0-based) in photon block `k`.
    pub fn index(&self, k: i32, n: usize) -> usize {
        let kb = (k - self.k_min) as usize;
        match self.ordering {
            Ordering::PhotonMajor => kb * self.block_dim + n,
            Ordering::BasisMajor => n * self.n_blocks + kb,
        }
    }

    fn check_block(&self, k: i32) -> Result<()> {
        if k < self.k_min || k > self.k_max() {
            return Err(Error::domain(format!("block {k} outside {}..={}", self.k_min, self.k_max())));
        }
        Ok(())
    }

    /// Places a single-block vector into block `k`, zero elsewhere.
    pub fn embed(&self, block_vector: &[Complex64], k: i32) -> Result<Vec<Complex64>> {
        self.check_block(k)?;
        if block_vector.len() != self.block_dim {
            return Err(Error::domain(format!(
                "block vector has length {}, expected {}",
                block_vector.len(),
                self.block_dim
            )));
        }
        let mut v = vec![Complex64::new(0.0, 0.0); self.dim()];
        for (n, z) in block_vector.iter().enumerate() {
            v[self.index(k, n)] = *z;
        }
        Ok(v)
    }

    /// Component of a global vector in block `k`.
    pub fn block(&self, v: &[Complex64], k: i32) -> Result<Vec<Complex64>> {
        self.check_block(k)?;
        if v.len() != self.dim() {
            return Err(Error::domain("vector does not match the problem dimension"));
        }
        Ok((0..self.block_dim).map(|n| v[self.index(k, n)]).collect())
    }

    /// Converts a global vector to photon-major order.
    pub fn to_photon_major(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); v.len()];
        for kb in 0..self.n_blocks {
            for n in 0..self.block_dim {
                out[kb * self.block_dim + n] = v[self.index(self.k_min + kb as i32, n)];
            }
        }
        out
    }

    /// The same pencil in another coefficient ordering (a symmetric
    /// permutation, so spectra and complex symmetry are unchanged).
    pub fn reordered(&self, ordering: Ordering) -> FloquetProblem {
        if ordering == self.ordering {
            return self.clone();
        }
        let target = FloquetProblem { ordering, ..self.clone() };
        let (lower, upper) = target.bandwidth();
        let dim = self.dim();
        let mut a = BandedMatrix::zeros(dim, lower, upper);
        let mut b = BandedMatrix::zeros(dim, lower, upper);
        let mut inverse = vec![(0i32, 0usize); dim];
        for kb in 0..self.n_blocks {
            let k = self.k_min + kb as i32;
            for n in 0..self.block_dim {
                inverse[self.index(k, n)] = (k, n);
            }
        }
        for i in 0..dim {
            let (ki, ni) = inverse[i];
            let ti = target.index(ki, ni);
            for j in self.a.row_range(i) {
                let (kj, nj) = inverse[j];
                let tj = target.index(kj, nj);
                let v = self.a.get(i, j);
                if v != Complex64::new(0.0, 0.0) {
                    a.set(ti, tj, v);
                }
                if self.b.in_band(i, j) {
                    let w = self.b.get(i, j);
                    if w != Complex64::new(0.0, 0.0) {
                        b.set(ti, tj, w);
                    }
                }
            }
        }
        FloquetProblem { a, b, ..target }
    }

    /// The cheaper of the two orderings for banded factorization.
    pub fn narrowest(&self) -> FloquetProblem {
        let pm = layout_bandwidth(Ordering::PhotonMajor, self.block_dim, self.n_blocks, self.coupled());
        let bm = layout_bandwidth(Ordering::BasisMajor, self.block_dim, self.n_blocks, self.coupled());
        self.reordered(if bm < pm { Ordering::BasisMajor } else { Ordering::PhotonMajor })
    }

    fn coupled(&self) -> bool {
        self.config.field > 0.0 && self.n_blocks > 1
    }

    fn bandwidth(&self) -> (usize, usize) {
        let w = layout_bandwidth(self.ordering, self.block_dim, self.n_blocks, self.coupled());
        (w, w)
    }
}

fn layout_bandwidth(ordering: Ordering, block_dim: usize, n_blocks: usize, coupled: bool) -> usize {
    let band = crate::basis::KINETIC_BAND.max(crate::basis::OVERLAP_BAND);
    match (ordering, coupled) {
        (Ordering::PhotonMajor, false) => band,
        (Ordering::PhotonMajor, true) => block_dim + crate::basis::DIPOLE_BAND,
        (Ordering::BasisMajor, false) => band * n_blocks,
        (Ordering::BasisMajor, true) => crate::basis::DIPOLE_BAND * n_blocks + 1,
    }
}

/// Builds the dilated Floquet pencil in photon-major order.
///
/// Diagonal block `k`: `e^{−2iθ} K − e^{−iθ} C − k ω S`; blocks `k, k±1` are
/// coupled by `(F/2) e^{iθ} X`; every block of `B` is `S`. Positive `k`
/// counts absorbed photons.
pub fn assemble(ops: &OperatorSet, cfg: &FloquetConfig) -> Result<FloquetProblem> {
    cfg.validate()?;
    let nb = ops.dim();
    let n_blocks = cfg.n_blocks();
    let proto = FloquetProblem {
        a: BandedMatrix::zeros(0, 0, 0),
        b: BandedMatrix::zeros(0, 0, 0),
        block_dim: nb,
        n_blocks,
        k_min: cfg.k_min,
        ordering: Ordering::PhotonMajor,
        config: *cfg,
    };
    let (lower, upper) = proto.bandwidth();
    let dim = nb * n_blocks;
    let kin = Complex64::from_polar(1.0, -2.0 * cfg.theta);
    let cou = Complex64::from_polar(1.0, -cfg.theta);
    let dip = Complex64::from_polar(0.5 * cfg.field, cfg.theta);
    let mut a = BandedMatrix::zeros(dim, lower, upper);
    let mut b = BandedMatrix::zeros(dim, lower, upper);
    for kb in 0..n_blocks {
        let k = cfg.k_min + kb as i32;
        let shift = k as f64 * cfg.omega;
        for n in 0..nb {
            let i = proto.index(k, n);
            for m in ops.k.row_range(n).chain(ops.s.row_range(n)).chain(ops.c.row_range(n)) {
                let j = proto.index(k, m);
                let val = kin * ops.k.get(n, m) - cou * ops.c.get(n, m) - shift * ops.s.get(n, m);
                a.set(i, j, val);
                b.set(i, j, Complex64::new(ops.s.get(n, m), 0.0));
            }
            if proto.coupled() && kb + 1 < n_blocks {
                for m in ops.x.row_range(n) {
                    let v = dip * ops.x.get(n, m);
                    let j = proto.index(k + 1, m);
                    a.set(i, j, v);
                    a.set(j, i, v);
                }
            }
        }
    }
    Ok(FloquetProblem { a, b, ..proto })
}

/// Limits applied by [`block_range`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockPolicy {
    pub margin: usize,
    pub k_min_limit: i32,
    pub k_max_limit: i32,
}

impl Default for BlockPolicy {
    fn default() -> Self {
        Self { margin: DEFAULT_MARGIN, k_min_limit: -64, k_max_limit: 256 }
    }
}

/// Photon block range `(k_min, k_max)` with the default policy.
pub fn block_count_heuristic(n0: u32, omega0: f64, f0: f64, n_eff: f64) -> (i32, i32) {
    block_range(n0, omega0, f0, n_eff, &BlockPolicy::default())
}

/// Photon block range covering the ladder up to the continuum.
///
/// `k_max` reaches the larger of the photon numbers needed to pass the
/// effective threshold and the true continuum, plus the margin and the
/// field-induced spread `⌈2 F0 n0 / ω0⌉`; `k_min` mirrors the margin and
/// spread below zero.
pub fn block_range(n0: u32, omega0: f64, f0: f64, n_eff: f64, policy: &BlockPolicy) -> (i32, i32) {
    let nf = n0.max(1) as f64;
    let omega = omega0 / (nf * nf * nf);
    let to_threshold = photon_number(n0, n_eff, omega);
    let to_continuum = photon_number(n0, f64::INFINITY, omega);
    let ladder = to_threshold.max(to_continuum) as i64;
    let spread = if omega0 > 0.0 { (2.0 * f0.max(0.0) * nf / omega0).ceil().min(1e6) as i64 } else { 0 };
    let margin = policy.margin as i64;
    let k_max = (ladder + margin + spread).clamp(0, policy.k_max_limit.max(0) as i64) as i32;
    let k_min = (-(margin + spread)).clamp(policy.k_min_limit.min(0) as i64, 0) as i32;
    (k_min, k_max)
}
