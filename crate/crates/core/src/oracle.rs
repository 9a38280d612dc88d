//! Brute-force reference: Crank–Nicolson propagation of the driven
//! half-line Coulomb problem on a uniform grid.
//!
//! Grid points sit at `x_j = j h`, `j = 1..=n_points`, with `h = x_max / (n_points + 1)`
//! and Dirichlet walls at `x = 0` and `x = x_max`. The wall at the origin
//! imposes `ψ(0) = 0` exactly, so `−1/x` is never evaluated at the singularity.

use std::f64::consts::PI;
use std::io::Write;

use log::warn;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum number of time steps per field period.
pub const MIN_STEPS_PER_CYCLE: f64 = 200.0;

/// Allowed relative norm growth per step before the step is declared unstable.
pub const NORM_GROWTH_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x_max: f64,
    pub n_points: usize,
    pub absorber_start: f64,
    /// `η` in `W(x) = −iη s²`, `s` the fractional depth into the absorber.
    pub absorber_strength: f64,
    pub dt: f64,
}

impl GridSpec {
    /// Defaults sized for level `n0` driven at angular frequency `omega`; the
    /// box also holds the orbits of levels below a finite `n_eff`.
    pub fn for_level(n0: u32, omega: f64, n_eff: f64) -> Self {
        let n2 = (n0 as f64).powi(2);
        let x_max = if n_eff.is_finite() { (20.0 * n2).max(4.0 * n_eff * n_eff) } else { 20.0 * n2 };
        let h = 0.025 * n0 as f64;
        Self {
            x_max,
            n_points: ((x_max / h).round() as usize).max(256),
            absorber_start: 0.75 * x_max,
            absorber_strength: 2e-3,
            dt: 2.0 * PI / omega / 400.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x_max > 0.0 && self.x_max.is_finite()) {
            return Err(Error::domain("x_max must be positive"));
        }
        if !(self.absorber_start > 0.0 && self.absorber_start < self.x_max) {
            return Err(Error::domain("absorber_start must lie in (0, x_max)"));
        }
        if self.n_points < 256 {
            return Err(Error::domain(format!("n_points must be at least 256, got {}", self.n_points)));
        }
        if !(self.absorber_strength >= 0.0) {
            return Err(Error::domain("absorber_strength must be non-negative"));
        }
        if !(self.dt > 0.0) {
            return Err(Error::domain("dt must be positive"));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        self.x_max / (self.n_points + 1) as f64
    }

    pub fn positions(&self) -> Vec<f64> {
        let h = self.spacing();
        (1..=self.n_points).map(|j| j as f64 * h).collect()
    }

    /// Twice the points and half the time step.
    pub fn refined(&self) -> Self {
        Self { n_points: 2 * self.n_points + 1, dt: 0.5 * self.dt, ..*self }
    }

    fn absorber(&self, x: f64) -> f64 {
        if x <= self.absorber_start {
            0.0
        } else {
            let s = (x - self.absorber_start) / (self.x_max - self.absorber_start);
            -self.absorber_strength * s * s
        }
    }
}

/// Eigenpairs of the static grid Hamiltonian, vectors normalized as `Σ ψ_j² = 1`.
#[derive(Debug, Clone)]
pub struct GridStates {
    pub energies: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

/// Symmetric tridiagonal matrix with constant off-diagonal.
struct Tridiagonal {
    diag: Vec<f64>,
    off: f64,
}

impl Tridiagonal {
    fn coulomb(grid: &GridSpec) -> Self {
        let h = grid.spacing();
        let diag = grid.positions().iter().map(|x| 1.0 / (h * h) - 1.0 / x).collect();
        Self { diag, off: -0.5 / (h * h) }
    }

    /// Number of eigenvalues below `lambda` (Sturm count of the LDLᵀ pivots).
    fn count_below(&self, lambda: f64) -> usize {
        let off2 = self.off * self.off;
        let mut count = 0;
        let mut d = 1.0;
        for (j, &a) in self.diag.iter().enumerate() {
            d = if j == 0 { a - lambda } else { a - lambda - off2 / d };
            if d == 0.0 {
                d = -f64::EPSILON * (a.abs() + lambda.abs()).max(1.0);
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn bounds(&self) -> (f64, f64) {
        let r = 2.0 * self.off.abs();
        let lo = self.diag.iter().fold(f64::INFINITY, |m, &a| m.min(a - r));
        let hi = self.diag.iter().fold(f64::NEG_INFINITY, |m, &a| m.max(a + r));
        (lo, hi)
    }

    /// The `k`-th smallest eigenvalue (0-based) by bisection.
    fn eigenvalue(&self, k: usize) -> f64 {
        let (mut lo, mut hi) = self.bounds();
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Solves `(T − λ) y = r` by the Thomas algorithm with tiny-pivot guarding.
    fn solve_shifted(&self, lambda: f64, r: &[f64]) -> Vec<f64> {
        let n = self.diag.len();
        let guard = f64::EPSILON * (self.diag[0].abs() + lambda.abs()).max(1.0);
        let mut c = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut pivot = self.diag[0] - lambda;
        if pivot.abs() < guard {
            pivot = guard;
        }
        y[0] = r[0] / pivot;
        for j in 1..n {
            c[j - 1] = self.off / pivot;
            pivot = self.diag[j] - lambda - self.off * c[j - 1];
            if pivot.abs() < guard {
                pivot = guard;
            }
            y[j] = (r[j] - self.off * y[j - 1]) / pivot;
        }
        for j in (0..n - 1).rev() {
            y[j] -= c[j] * y[j + 1];
        }
        y
    }

    fn eigenvector(&self, lambda: f64, previous: &[Vec<f64>]) -> Vec<f64> {
        let n = self.diag.len();
        let mut v: Vec<f64> = (0..n).map(|j| 1.0 + 0.1 * ((j * 7919) % 13) as f64).collect();
        for _ in 0..4 {
            v = self.solve_shifted(lambda, &v);
            for p in previous {
                let overlap: f64 = p.iter().zip(&v).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(p).for_each(|(x, a)| *x -= overlap * a);
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= norm);
        }
        // fix the sign so the first lobe is positive
        let first = v.iter().copied().find(|x| x.abs() > 1e-8).unwrap_or(1.0);
        if first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        v
    }

    fn lowest(&self, count: usize) -> GridStates {
        let mut energies = Vec::with_capacity(count);
        let mut states: Vec<Vec<f64>> = Vec::with_capacity(count);
        for k in 0..count {
            let e = self.eigenvalue(k);
            let v = self.eigenvector(e, &states);
            energies.push(e);
            states.push(v);
        }
        GridStates { energies, states }
    }
}

/// Lowest `count` eigenpairs of the field-free grid Hamiltonian.
pub fn grid_bound_states(grid: &GridSpec, count: usize) -> Result<GridStates> {
    grid.validate()?;
    let t = Tridiagonal::coulomb(grid);
    let bound = t.count_below(0.0);
    if count > bound {
        return Err(Error::domain(format!("grid resolves only {bound} bound states, {count} requested")));
    }
    Ok(t.lowest(count))
}

/// All grid eigenpairs with energy below `cutoff`.
pub fn grid_states_below(grid: &GridSpec, cutoff: f64) -> Result<GridStates> {
    grid.validate()?;
    let t = Tridiagonal::coulomb(grid);
    Ok(t.lowest(t.count_below(cutoff)))
}

/// Crank–Nicolson stepper for `H = −½∂² + V(x) + W(x) + f(t) x`.
pub(crate) struct Stepper {
    x: Vec<f64>,
    /// Static diagonal `1/h² + V + W`.
    diag: Vec<Complex64>,
    off: f64,
    scratch: Vec<Complex64>,
    rhs: Vec<Complex64>,
}

impl Stepper {
    pub(crate) fn new(x: Vec<f64>, h: f64, potential: impl Fn(f64) -> Complex64) -> Self {
        let diag = x.iter().map(|&xi| Complex64::new(1.0 / (h * h), 0.0) + potential(xi)).collect();
        let n = x.len();
        Self {
            x,
            diag,
            off: -0.5 / (h * h),
            scratch: vec![Complex64::default(); n],
            rhs: vec![Complex64::default(); n],
        }
    }

    /// Advances `psi` by `dt` with a field term `f x` held at its midpoint value.
    pub(crate) fn step(&mut self, psi: &mut [Complex64], dt: f64, f: f64) {
        let n = psi.len();
        let a = Complex64::new(0.0, 0.5 * dt);
        let off = a * self.off;
        // rhs = (1 − i dt/2 H) ψ
        for j in 0..n {
            let d = self.diag[j] + f * self.x[j];
            let mut hpsi = d * psi[j];
            if j > 0 {
                hpsi += self.off * psi[j - 1];
            }
            if j + 1 < n {
                hpsi += self.off * psi[j + 1];
            }
            self.rhs[j] = psi[j] - a * hpsi;
        }
        // (1 + i dt/2 H) ψ' = rhs by the Thomas algorithm
        let c = &mut self.scratch;
        let mut pivot = Complex64::new(1.0, 0.0) + a * (self.diag[0] + f * self.x[0]);
        psi[0] = self.rhs[0] / pivot;
        for j in 1..n {
            c[j - 1] = off / pivot;
            pivot = Complex64::new(1.0, 0.0) + a * (self.diag[j] + f * self.x[j]) - off * c[j - 1];
            psi[j] = (self.rhs[j] - off * psi[j - 1]) / pivot;
        }
        for j in (0..n - 1).rev() {
            let next = psi[j + 1];
            psi[j] -= c[j] * next;
        }
    }
}

fn norm_sqr(psi: &[Complex64]) -> f64 {
    psi.iter().map(|z| z.norm_sqr()).sum()
}

#[derive(Debug, Clone)]
pub struct OracleOutcome {
    pub p_ion: f64,
    /// Norm left on the grid after absorption.
    pub final_norm: f64,
    pub initial_energy: f64,
    /// Bound states counted as not ionized.
    pub n_bound: usize,
    pub steps: usize,
    pub psi: Vec<Complex64>,
}

/// Propagates the grid state nearest `−1/(2n0²)` for `t_cycles` periods of
/// `F x cos(ωt)` and returns `P = 1 − Σ |⟨b|ψ⟩|²` over grid states below
/// `−1/(2 n_eff²)` (below zero when `n_eff` is infinite).
pub fn propagate(n0: u32, field: f64, omega: f64, t_cycles: f64, n_eff: f64, grid: &GridSpec) -> Result<OracleOutcome> {
    grid.validate()?;
    if n0 == 0 {
        return Err(Error::domain("n0 must be at least 1"));
    }
    if !(field >= 0.0 && omega > 0.0 && t_cycles >= 0.0 && n_eff > 0.0) {
        return Err(Error::domain("field, t_cycles must be non-negative and omega, n_eff positive"));
    }
    let n2 = (n0 as f64).powi(2);
    if grid.x_max < 6.0 * n2 {
        warn!("x_max = {} is below 6 n0² = {}", grid.x_max, 6.0 * n2);
    }
    let period = 2.0 * PI / omega;
    let total = t_cycles * period;
    let steps = (total / grid.dt).ceil() as usize;
    let dt = if steps > 0 { total / steps as f64 } else { grid.dt };
    if steps > 0 && period / dt < MIN_STEPS_PER_CYCLE {
        return Err(Error::domain(format!(
            "{:.0} steps per cycle, at least {MIN_STEPS_PER_CYCLE} required",
            period / dt
        )));
    }

    let t = Tridiagonal::coulomb(grid);
    let e0 = -0.5 / n2;
    let cutoff = if n_eff.is_finite() { -0.5 / (n_eff * n_eff) } else { 0.0 };
    let n_cut = t.count_below(cutoff);
    let n_init = t.count_below(0.5 * e0).max(n_cut);
    let all = t.lowest(n_init);
    let pick = all
        .energies
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - e0).abs().total_cmp(&(b.1 - e0).abs()))
        .map(|(i, _)| i)
        .ok_or_else(|| Error::domain("grid resolves no bound states"))?;

    let mut psi: Vec<Complex64> = all.states[pick].iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut stepper = Stepper::new(grid.positions(), grid.spacing(), |x| Complex64::new(-1.0 / x, grid.absorber(x)));
    let mut norm = norm_sqr(&psi);
    for s in 0..steps {
        let tm = (s as f64 + 0.5) * dt;
        stepper.step(&mut psi, dt, field * (omega * tm).cos());
        let next = norm_sqr(&psi);
        if next > norm * (1.0 + NORM_GROWTH_LIMIT) {
            return Err(Error::Convergence {
                message: format!("norm grew at step {s}; reduce dt"),
                best_residual: next / norm - 1.0,
            });
        }
        norm = next;
    }

    let bound: f64 =
        all.states[..n_cut].iter().map(|b| b.iter().zip(&psi).map(|(&u, z)| z * u).sum::<Complex64>().norm_sqr()).sum();
    Ok(OracleOutcome {
        p_ion: (1.0 - bound).clamp(0.0, 1.0),
        final_norm: norm,
        initial_energy: all.energies[pick],
        n_bound: n_cut,
        steps,
        psi,
    })
}

/// Writes `x, Re ψ, Im ψ` with `ψ` scaled to a continuum density (`∫|ψ|² dx = 1`).
pub fn write_snapshot(mut w: impl Write, grid: &GridSpec, psi: &[Complex64]) -> Result<()> {
    if psi.len() != grid.n_points {
        return Err(Error::domain("snapshot length does not match the grid"));
    }
    let scale = grid.spacing().sqrt().recip();
    writeln!(w, "x,re_psi,im_psi")?;
    for (x, z) in grid.positions().iter().zip(psi) {
        writeln!(w, "{x},{},{}", z.re * scale, z.im * scale)?;
    }
    Ok(())
}
