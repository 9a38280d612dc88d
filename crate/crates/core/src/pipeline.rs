//! End-to-end ionization probability: basis, Floquet pencil, eigenpairs,
//! decomposition.

use log::{debug, warn};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::{build_operators, dilated_bound_state, OperatorSet, SturmianBasis};
use crate::eigensolve::{dense_eigs, factor_shifted, shift_invert_with, EigenPair, EigenRequest};
use crate::error::{Error, Result};
use crate::floquet::{
    assemble, block_range, BlockPolicy, FloquetConfig, FloquetProblem, DEFAULT_MARGIN, DEFAULT_THETA,
};
use crate::observables::{finish, ionization_probability, SpectralDecomposition, SpectralEntry};
use crate::units::{scale, AtomicParams};

/// Shifts sit this many photon energies below the real axis. At zero field
/// `E0 + jω` are exact eigenvalues, and a shift on top of one makes every
/// other Ritz value inaccurate.
pub const SHIFT_OFFSET: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    /// Shift-invert Arnoldi around the initial energy and its photon images.
    Iterative,
    /// Full dense diagonalization; small problems only.
    Dense,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Settings {
    /// Basis size as a multiple of `n0` when `basis_size` is unset.
    pub basis_per_level: f64,
    pub basis_size: Option<usize>,
    pub theta: f64,
    pub margin: usize,
    pub k_min_limit: i32,
    pub k_max_limit: i32,
    /// Half-width of the quasi-energy window, in photon energies.
    pub window_photons: f64,
    pub eigs_per_shift: usize,
    /// Times the shift grid may be halved while the captured weight is short.
    pub shift_refinements: u32,
    /// Captured weight at which the eigenpair search stops growing.
    pub target_capture: f64,
    pub tol: f64,
    pub max_restarts: usize,
    pub solver: SolverKind,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            basis_per_level: 5.0,
            basis_size: None,
            theta: DEFAULT_THETA,
            margin: DEFAULT_MARGIN,
            k_min_limit: -64,
            k_max_limit: 256,
            window_photons: 3.0,
            eigs_per_shift: 24,
            shift_refinements: 3,
            target_capture: 0.99,
            tol: 1e-10,
            max_restarts: 200,
            solver: SolverKind::Iterative,
        }
    }
}

impl Settings {
    pub fn validate(&self) -> Result<()> {
        if let Some(nb) = self.basis_size {
            if nb < 2 {
                return Err(Error::domain("basis_size must be at least 2"));
            }
        } else if !(self.basis_per_level >= 4.0) {
            return Err(Error::domain("basis_per_level must be at least 4"));
        }
        if !(self.theta > 0.0 && self.theta < std::f64::consts::FRAC_PI_4 * 2.0) {
            return Err(Error::domain("theta must lie in (0, π/2)"));
        }
        if !(self.window_photons > 0.0) {
            return Err(Error::domain("window_photons must be positive"));
        }
        if self.eigs_per_shift == 0 {
            return Err(Error::domain("eigs_per_shift must be positive"));
        }
        if self.shift_refinements > 8 {
            return Err(Error::domain("shift_refinements above 8 is not supported"));
        }
        if !(self.target_capture > 0.0 && self.target_capture <= 1.0) {
            return Err(Error::domain("target_capture must lie in (0, 1]"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::domain("tol must be positive"));
        }
        if self.k_min_limit > 0 || self.k_max_limit < 0 {
            return Err(Error::domain("block limits must bracket zero"));
        }
        Ok(())
    }

    pub fn basis_size_for(&self, n0: u32) -> usize {
        self.basis_size.unwrap_or_else(|| (self.basis_per_level * n0 as f64).ceil() as usize).max(2)
    }

    pub fn block_policy(&self) -> BlockPolicy {
        BlockPolicy { margin: self.margin, k_min_limit: self.k_min_limit, k_max_limit: self.k_max_limit }
    }
}

/// Result of one ionization-probability evaluation.
#[derive(Debug, Clone)]
pub struct PionOutcome {
    pub p_ion: f64,
    pub decomposition: SpectralDecomposition,
    pub n_eigensolves: usize,
    pub dim: usize,
    pub k_range: (i32, i32),
}

/// Field-independent state for repeated evaluations at fixed `n0`, `ω`, `t`.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub params: AtomicParams,
    pub settings: Settings,
    pub ops: OperatorSet,
    /// Dilated field-free state of level `n0`, c-normalized.
    pub initial: Vec<Complex64>,
    pub initial_energy: Complex64,
}

impl Pipeline {
    pub fn new(params: &AtomicParams, settings: &Settings) -> Result<Self> {
        params.validate()?;
        settings.validate()?;
        let nb = settings.basis_size_for(params.n0);
        let basis = SturmianBasis::for_level(params.n0, nb)?;
        let ops = build_operators(&basis)?;
        let bound = dilated_bound_state(&ops, params.n0, settings.theta)?;
        Ok(Self {
            params: *params,
            settings: settings.clone(),
            ops,
            initial: bound.vector,
            initial_energy: bound.energy,
        })
    }

    pub fn block_range(&self, field: f64) -> (i32, i32) {
        let p = AtomicParams { field, ..self.params };
        let s = scale(&p);
        block_range(p.n0, s.omega0, s.f0, p.n_eff, &self.settings.block_policy())
    }

    pub fn problem(&self, field: f64) -> Result<FloquetProblem> {
        let (k_min, k_max) = self.block_range(field);
        let cfg = FloquetConfig { theta: self.settings.theta, k_min, k_max, field, omega: self.params.omega };
        assemble(&self.ops, &cfg)
    }

    /// Spectral decomposition of the initial state at field `field`.
    pub fn decompose(&self, field: f64) -> Result<(SpectralDecomposition, usize, FloquetProblem)> {
        let problem = self.problem(field)?.narrowest();
        let init = problem.embed(&self.initial, 0)?;
        let omega = self.params.omega;
        let e0 = self.initial_energy.re;
        let half = self.settings.window_photons * omega;
        let in_window = |p: &EigenPair| (p.epsilon.re - e0).abs() <= half;

        let (pairs, solves) = match self.settings.solver {
            SolverKind::Dense => (dense_eigs(&problem.a, &problem.b)?.into_iter().filter(in_window).collect(), 1),
            SolverKind::Iterative => self.iterative_pairs(&problem, &init, &in_window)?,
        };
        let bi = problem.b.matvec(&init);
        let entries: Vec<SpectralEntry> = pairs
            .iter()
            .map(|p| {
                let w: Complex64 = bi.iter().zip(&p.vector).map(|(x, y)| x * y).sum();
                SpectralEntry { epsilon: p.epsilon, gamma: p.width(), w2: w.norm_sqr() }
            })
            .collect();
        let d = finish(entries)?;
        Ok((d, solves, problem))
    }

    fn iterative_pairs(
        &self,
        problem: &FloquetProblem,
        init: &[Complex64],
        in_window: &dyn Fn(&EigenPair) -> bool,
    ) -> Result<(Vec<EigenPair>, usize)> {
        let omega = self.params.omega;
        let e0 = self.initial_energy.re;
        let half = self.settings.window_photons;
        let bi = problem.b.matvec(init);
        let weight = |p: &EigenPair| bi.iter().zip(&p.vector).map(|(x, y)| x * y).sum::<Complex64>().norm_sqr();
        let mut pairs: Vec<EigenPair> = Vec::new();
        let mut captured = 0.0;
        let mut solves = 0;
        // level 0 puts shifts at the photon images E0 + jω; each further level
        // adds the midpoints of the previous grid
        for level in 0..=self.settings.shift_refinements {
            let step = 0.5f64.powi(level as i32);
            let count = (half / step).floor() as i64;
            for j in -count..=count {
                if level > 0 && j % 2 == 0 {
                    continue;
                }
                let sigma = Complex64::new(e0 + j as f64 * step * omega, -SHIFT_OFFSET * omega);
                let (lu, sigma) = factor_shifted(&problem.a, &problem.b, sigma)?;
                let req = EigenRequest {
                    tol: self.settings.tol,
                    max_iter: self.settings.max_restarts,
                    start: Some(init.to_vec()),
                    ..EigenRequest::new(sigma, self.settings.eigs_per_shift)
                };
                solves += 1;
                // a stagnating shift is skipped; the capture check decides
                let found = match shift_invert_with(&problem.a, &problem.b, &lu, &req) {
                    Ok(found) => found,
                    Err(Error::Convergence { message, .. }) => {
                        warn!("skipping shift {sigma}: {message}");
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                for p in found.into_iter().filter(|p| in_window(p)) {
                    if !pairs.iter().any(|q| same_pair(q, &p, &problem.b)) {
                        captured += weight(&p);
                        pairs.push(p);
                    }
                }
            }
            debug!("shift level {level}: {} pairs, captured weight {captured:.6}", pairs.len());
            if captured >= self.settings.target_capture {
                break;
            }
        }
        pairs.sort_by(|p, q| p.epsilon.re.total_cmp(&q.epsilon.re).then(p.epsilon.im.total_cmp(&q.epsilon.im)));
        Ok((pairs, solves))
    }

    /// Ionization probability after the configured interaction time.
    pub fn pion(&self, field: f64) -> Result<PionOutcome> {
        let (d, solves, problem) = self.decompose(field)?;
        let p_ion = ionization_probability(&d, self.params.time)?;
        Ok(PionOutcome {
            p_ion,
            decomposition: d,
            n_eigensolves: solves,
            dim: problem.dim(),
            k_range: (problem.k_min, problem.k_max()),
        })
    }
}

fn same_pair(p: &EigenPair, q: &EigenPair, b: &crate::banded::BandedMatrix<Complex64>) -> bool {
    let scale = p.epsilon.norm().max(q.epsilon.norm()).max(1e-300);
    if (p.epsilon - q.epsilon).norm() > 1e-8 * scale {
        return false;
    }
    // distinct vectors of a near-degenerate pair are c-orthogonal
    let bq = b.matvec(&q.vector);
    let overlap: Complex64 = p.vector.iter().zip(&bq).map(|(x, y)| x * y).sum();
    overlap.norm() > 0.5
}

/// One-shot ionization probability for `params`.
pub fn pion_at(params: &AtomicParams, settings: &Settings) -> Result<PionOutcome> {
    Pipeline::new(params, settings)?.pion(params.field)
}
