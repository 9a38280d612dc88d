//! Threshold fields and parameter scans.

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Mutex;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::observables::{localization_length, photon_number, shannon_width};
use crate::pipeline::{Pipeline, Settings};
use crate::units::{unscale, AtomicParams, ScaledParams};

/// Journal schema version; bump when [`ThresholdRecord`] changes shape.
pub const JOURNAL_SCHEMA: u32 = 1;

pub const CSV_HEADER: &str =
    "n0,omega0,F0_threshold,P_at_threshold,N_photons,xi,xi_over_N,shannon,converged,n_eigensolves";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchSettings {
    /// Ionization probability defining the threshold.
    pub target: f64,
    /// Stop when `|P − target|` is within this.
    pub p_tol: f64,
    /// Stop when the bracket is this narrow, relative.
    pub rel_width: f64,
    pub f0_start: f64,
    pub ratio: f64,
    pub f0_max: f64,
    pub max_bisections: usize,
}

impl Default for SearchSettings {
    fn default() -> Self {
        Self { target: 0.1, p_tol: 0.005, rel_width: 0.01, f0_start: 1e-3, ratio: 1.3, f0_max: 1.0, max_bisections: 40 }
    }
}

impl SearchSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.target > 0.0 && self.target < 1.0) {
            return Err(Error::domain("target probability must lie in (0, 1)"));
        }
        if !(self.p_tol >= 0.0) || !(self.rel_width > 0.0) {
            return Err(Error::domain("search tolerances must be positive"));
        }
        if !(self.f0_start > 0.0) || !(self.f0_max > self.f0_start) {
            return Err(Error::domain("need 0 < f0_start < f0_max"));
        }
        if !(self.ratio > 1.0) {
            return Err(Error::domain("grid ratio must exceed 1"));
        }
        Ok(())
    }
}

/// Outcome of a threshold search on an arbitrary yield curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub f0: f64,
    pub p: f64,
    pub bracket: (f64, f64),
    pub p_bracket: (f64, f64),
    /// Every evaluated `(F0, P)`, in evaluation order.
    pub curve: Vec<(f64, f64)>,
    pub converged: bool,
}

/// Lowest field at which `yield_fn` reaches `s.target`.
///
/// A geometric grid from `f0_start` finds the first bracket
/// `P(lo) < target ≤ P(hi)`; bisection in `ln F0` then narrows it until the
/// midpoint probability is within `p_tol` or the bracket is narrower than
/// `rel_width`. In the latter case the reported field is the log-linear
/// interpolation inside the final bracket.
pub fn find_crossing(mut yield_fn: impl FnMut(f64) -> Result<f64>, s: &SearchSettings) -> Result<Crossing> {
    s.validate()?;
    let mut curve = Vec::new();
    let mut eval = |f: f64, curve: &mut Vec<(f64, f64)>| -> Result<f64> {
        let p = yield_fn(f)?;
        curve.push((f, p));
        Ok(p)
    };

    let mut lo = (0.0, 0.0);
    let mut f = s.f0_start;
    let mut hi = None;
    let mut k = 0;
    while f <= s.f0_max * (1.0 + 1e-12) {
        let p = eval(f, &mut curve)?;
        if p >= s.target {
            hi = Some((f, p));
            break;
        }
        lo = (f, p);
        k += 1;
        f = s.f0_start * s.ratio.powi(k);
    }
    let Some(mut hi) = hi else {
        return Err(Error::NoThreshold { f0_max: s.f0_max });
    };
    if lo.0 == 0.0 {
        // already above target at the first grid point; walk down
        let mut g = hi.0;
        loop {
            g /= s.ratio;
            if g < s.f0_start * 1e-6 {
                return Err(Error::domain("yield exceeds the target at every probed field"));
            }
            let p = eval(g, &mut curve)?;
            if p < s.target {
                lo = (g, p);
                break;
            }
            hi = (g, p);
        }
    }

    for _ in 0..s.max_bisections {
        if hi.0 / lo.0 - 1.0 <= s.rel_width {
            let t = ((s.target - lo.1) / (hi.1 - lo.1)).clamp(0.0, 1.0);
            let fi = lo.0 * (hi.0 / lo.0).powf(t);
            let p = eval(fi, &mut curve)?;
            return Ok(Crossing { f0: fi, p, bracket: (lo.0, hi.0), p_bracket: (lo.1, hi.1), curve, converged: true });
        }
        let mid = (lo.0 * hi.0).sqrt();
        let p = eval(mid, &mut curve)?;
        if (p - s.target).abs() <= s.p_tol {
            let (lo2, hi2) = if p >= s.target { (lo, (mid, p)) } else { ((mid, p), hi) };
            return Ok(Crossing {
                f0: mid,
                p,
                bracket: (lo2.0, hi2.0),
                p_bracket: (lo2.1, hi2.1),
                curve,
                converged: true,
            });
        }
        if p >= s.target {
            hi = (mid, p);
        } else {
            lo = (mid, p);
        }
    }
    let mid = (lo.0 * hi.0).sqrt();
    let p = eval(mid, &mut curve)?;
    Ok(Crossing { f0: mid, p, bracket: (lo.0, hi.0), p_bracket: (lo.1, hi.1), curve, converged: false })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRecord {
    pub n0: u32,
    pub omega0: f64,
    #[serde(with = "non_finite")]
    pub f0_threshold: f64,
    #[serde(with = "non_finite")]
    pub p_at_threshold: f64,
    pub n_photons: u32,
    #[serde(with = "non_finite")]
    pub xi: f64,
    #[serde(with = "non_finite")]
    pub xi_over_n: f64,
    #[serde(with = "non_finite")]
    pub shannon: f64,
    #[serde(with = "non_finite_pair")]
    pub bracket: (f64, f64),
    #[serde(with = "non_finite_pair")]
    pub p_bracket: (f64, f64),
    /// Scaled field and probability of every evaluation.
    pub yield_curve: Vec<(f64, f64)>,
    pub n_eigensolves: usize,
    pub converged: bool,
    pub error: Option<String>,
}

impl ThresholdRecord {
    fn failed(n0: u32, omega0: f64, n_photons: u32, n_eigensolves: usize, error: &Error) -> Self {
        Self {
            n0,
            omega0,
            f0_threshold: f64::NAN,
            p_at_threshold: f64::NAN,
            n_photons,
            xi: f64::NAN,
            xi_over_n: f64::NAN,
            shannon: f64::NAN,
            bracket: (f64::NAN, f64::NAN),
            p_bracket: (f64::NAN, f64::NAN),
            yield_curve: Vec::new(),
            n_eigensolves,
            converged: false,
            error: Some(error.to_string()),
        }
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.n0,
            self.omega0,
            self.f0_threshold,
            self.p_at_threshold,
            self.n_photons,
            self.xi,
            self.xi_over_n,
            self.shannon,
            self.converged,
            self.n_eigensolves
        )
    }
}

/// Threshold field for one initial state at fixed `ω` (a.u.) and interaction
/// time `t` (field periods).
pub fn find_threshold(
    n0: u32,
    omega: f64,
    t_cycles: f64,
    n_eff: f64,
    settings: &Settings,
    search: &SearchSettings,
) -> Result<ThresholdRecord> {
    let nf = n0 as f64;
    let omega0 = omega * nf.powi(3);
    let params = unscale(&ScaledParams { omega0, f0: 0.0, t_cycles }, n0, n_eff)?;
    let pipeline = Pipeline::new(&params, settings)?;
    let n_photons = photon_number(n0, n_eff, omega);
    let solves = std::cell::Cell::new(0usize);
    let field_of = |f0: f64| f0 / nf.powi(4);
    let found = find_crossing(
        |f0| {
            let out = pipeline.pion(field_of(f0))?;
            solves.set(solves.get() + out.n_eigensolves);
            Ok(out.p_ion)
        },
        search,
    );
    let c = match found {
        Ok(c) => c,
        Err(e) => return Ok(ThresholdRecord::failed(n0, omega0, n_photons, solves.get(), &e)),
    };
    // width of the decomposition at the reported field
    let (d, extra, _) = pipeline.decompose(field_of(c.f0))?;
    let shannon = shannon_width(&d.weights())?;
    let xi = localization_length(c.f0, omega0, n0)?;
    Ok(ThresholdRecord {
        n0,
        omega0,
        f0_threshold: c.f0,
        p_at_threshold: c.p,
        n_photons,
        xi,
        xi_over_n: xi / n_photons as f64,
        shannon,
        bracket: c.bracket,
        p_bracket: c.p_bracket,
        yield_curve: c.curve,
        n_eigensolves: solves.get() + extra,
        converged: c.converged,
        error: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frequency {
    /// Fixed angular frequency in atomic units.
    Omega(f64),
    /// Fixed scaled frequency `ω n0³`.
    Omega0(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanPlan {
    pub n0_values: Vec<u32>,
    pub frequency: Frequency,
    pub t_cycles: f64,
    /// Defaults to the largest `n0` plus 10.
    pub n_eff: Option<f64>,
    #[serde(default)]
    pub settings: Settings,
    #[serde(default)]
    pub search: SearchSettings,
}

impl ScanPlan {
    pub fn validate(&self) -> Result<()> {
        if self.n0_values.is_empty() {
            return Err(Error::domain("scan needs at least one n0"));
        }
        if self.n0_values.contains(&0) {
            return Err(Error::domain("n0 must be at least 1"));
        }
        let mut sorted = self.n0_values.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.n0_values.len() {
            return Err(Error::domain("duplicate n0 in scan"));
        }
        match self.frequency {
            Frequency::Omega(w) | Frequency::Omega0(w) if !(w > 0.0) => {
                return Err(Error::domain("frequency must be positive"));
            }
            _ => {}
        }
        if !(self.t_cycles >= 0.0) {
            return Err(Error::domain("t_cycles must be non-negative"));
        }
        if let Some(n) = self.n_eff {
            if !(n > 0.0) {
                return Err(Error::domain("n_eff must be positive"));
            }
        }
        self.settings.validate()?;
        self.search.validate()
    }

    pub fn n_eff(&self) -> f64 {
        self.n_eff.unwrap_or_else(|| self.n0_values.iter().copied().max().unwrap_or(0) as f64 + 10.0)
    }

    pub fn omega_for(&self, n0: u32) -> f64 {
        match self.frequency {
            Frequency::Omega(w) => w,
            Frequency::Omega0(w0) => w0 / (n0 as f64).powi(3),
        }
    }

    /// SHA-256 of the canonical JSON form, as lowercase hex.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("plan serializes");
        hex(&Sha256::digest(json.as_bytes()))
    }

    pub fn atomic_params(&self, n0: u32, f0: f64) -> Result<AtomicParams> {
        let omega0 = self.omega_for(n0) * (n0 as f64).powi(3);
        unscale(&ScaledParams { omega0, f0, t_cycles: self.t_cycles }, n0, self.n_eff())
    }
}

/// JSON has no NaN or infinity; such values are stored as strings.
mod non_finite {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    pub(super) enum Num {
        Finite(f64),
        Special(String),
    }

    pub(super) fn wrap(v: f64) -> Num {
        if v.is_finite() {
            Num::Finite(v)
        } else {
            Num::Special(v.to_string())
        }
    }

    pub(super) fn unwrap<E: serde::de::Error>(n: Num) -> Result<f64, E> {
        match n {
            Num::Finite(v) => Ok(v),
            Num::Special(s) => s.parse().map_err(|_| E::custom(format!("not a number: {s}"))),
        }
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        wrap(*v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        unwrap(Num::deserialize(d)?)
    }
}

mod non_finite_pair {
    use super::non_finite::{unwrap, wrap, Num};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &(f64, f64), s: S) -> Result<S::Ok, S::Error> {
        (wrap(v.0), wrap(v.1)).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(f64, f64), D::Error> {
        let (a, b) = <(Num, Num)>::deserialize(d)?;
        Ok((unwrap(a)?, unwrap(b)?))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct JournalLine {
    schema: u32,
    plan_hash: String,
    n0: u32,
    record: ThresholdRecord,
}

fn read_journal(path: &Path, plan_hash: &str) -> Result<BTreeMap<u32, ThresholdRecord>> {
    let mut done = BTreeMap::new();
    if !path.exists() {
        return Ok(done);
    }
    let file = std::fs::File::open(path)?;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<JournalLine>(&line) {
            Ok(j) if j.schema == JOURNAL_SCHEMA && j.plan_hash == plan_hash => {
                done.insert(j.n0, j.record);
            }
            Ok(_) => {}
            // a torn final line from an interrupted run is dropped
            Err(e) => warn!("ignoring unreadable journal line {}: {e}", i + 1),
        }
    }
    Ok(done)
}

/// Runs a threshold search for every `n0` of the plan.
///
/// Points already present in `journal` under the same plan hash are reused;
/// each newly finished point is appended to it. Failed points are recorded
/// with `converged = false`. Results are ordered by `n0`.
pub fn run_scan(plan: &ScanPlan, workers: usize, journal: Option<&Path>) -> Result<Vec<ThresholdRecord>> {
    plan.validate()?;
    let hash = plan.hash();
    let done = match journal {
        Some(p) => read_journal(p, &hash)?,
        None => BTreeMap::new(),
    };
    let todo: Vec<u32> = plan.n0_values.iter().copied().filter(|n| !done.contains_key(n)).collect();
    info!("scan {}: {} points cached, {} to run", &hash[..12], done.len(), todo.len());

    let writer = match journal {
        Some(p) => Some(Mutex::new(OpenOptions::new().create(true).append(true).open(p)?)),
        None => None,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Internal(format!("worker pool: {e}")))?;

    let n_eff = plan.n_eff();
    let fresh: Vec<Result<ThresholdRecord>> = pool.install(|| {
        todo.par_iter()
            .map(|&n0| {
                let omega = plan.omega_for(n0);
                let rec = match find_threshold(n0, omega, plan.t_cycles, n_eff, &plan.settings, &plan.search) {
                    Ok(r) => r,
                    Err(e) => {
                        let omega0 = omega * (n0 as f64).powi(3);
                        ThresholdRecord::failed(n0, omega0, photon_number(n0, n_eff, omega), 0, &e)
                    }
                };
                if let Some(w) = &writer {
                    let line = JournalLine { schema: JOURNAL_SCHEMA, plan_hash: hash.clone(), n0, record: rec.clone() };
                    let text = serde_json::to_string(&line).map_err(|e| Error::Format(e.to_string()))?;
                    let mut f = w.lock().map_err(|_| Error::Internal("journal lock poisoned".into()))?;
                    writeln!(f, "{text}")?;
                    f.flush()?;
                }
                info!("n0 = {n0} done (converged = {})", rec.converged);
                Ok(rec)
            })
            .collect()
    });

    let mut all: BTreeMap<u32, ThresholdRecord> =
        done.into_iter().filter(|(n, _)| plan.n0_values.contains(n)).collect();
    for r in fresh {
        let r = r?;
        all.insert(r.n0, r);
    }
    Ok(all.into_values().collect())
}

/// CSV table of scan records, header first.
pub fn records_csv(records: &[ThresholdRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}
