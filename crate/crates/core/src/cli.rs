//! Command-line front end: configuration, commands and output files.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use log::info;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::eigensolve::{dense_eigs_near, shift_invert_eigs, EigenRequest};
use crate::error::{Error, Result};
use crate::observables::{photon_number, regime_classify, shannon_width};
use crate::oracle::{propagate, write_snapshot, GridSpec};
use crate::pipeline::{Pipeline, Settings, SolverKind, SHIFT_OFFSET};
use crate::threshold::{find_threshold, records_csv, run_scan, Frequency, ScanPlan, SearchSettings, ThresholdRecord};
use crate::units::{scale, unscale, AtomicParams, ScaledParams};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_IO: i32 = 3;

/// Name of the checkpoint journal written next to the scan output.
pub const JOURNAL_FILE: &str = "scan.journal.jsonl";

#[derive(Debug, Parser)]
#[command(name = "mwion", version, about = "Microwave ionization of a one-dimensional Rydberg atom")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Scan worker threads.
    #[arg(long, global = true, env = "MWION_WORKERS", value_name = "N")]
    pub workers: Option<usize>,
    /// Reserved: nothing in the program draws random numbers.
    #[arg(long, global = true)]
    pub seedless: bool,
    /// Override a config entry, e.g. `--set point.f0=0.03`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Quasi-energies near a shift.
    Spectrum,
    /// Ionization probability and Floquet decomposition at one field.
    Pion,
    /// Threshold field of one initial state.
    Threshold,
    /// Threshold scan over initial states.
    Scan,
    /// Grid propagation reference.
    Oracle,
    /// Parse and validate the configuration, print its hash.
    ValidateConfig,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Pion => "pion",
            Command::Threshold => "threshold",
            Command::Scan => "scan",
            Command::Oracle => "oracle",
            Command::ValidateConfig => "validate-config",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub workers: Option<usize>,
}

/// One parameter point. Exactly one of `omega`/`omega0`; at most one of
/// `field`/`f0` (zero if both are absent).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointConfig {
    pub n0: u32,
    pub omega: Option<f64>,
    pub omega0: Option<f64>,
    pub field: Option<f64>,
    pub f0: Option<f64>,
    pub t_cycles: f64,
    /// Defaults to `n0 + 10`.
    pub n_eff: Option<f64>,
}

impl PointConfig {
    pub fn n_eff(&self) -> f64 {
        self.n_eff.unwrap_or(self.n0 as f64 + 10.0)
    }

    pub fn atomic(&self) -> Result<AtomicParams> {
        let n = self.n0 as f64;
        let omega0 = match (self.omega, self.omega0) {
            (Some(w), None) => w * n.powi(3),
            (None, Some(w0)) => w0,
            _ => return Err(Error::Config("point needs exactly one of omega, omega0".into())),
        };
        let f0 = match (self.field, self.f0) {
            (Some(f), None) => f * n.powi(4),
            (None, Some(f0)) => f0,
            (None, None) => 0.0,
            _ => return Err(Error::Config("point takes at most one of field, f0".into())),
        };
        let p = unscale(&ScaledParams { omega0, f0, t_cycles: self.t_cycles }, self.n0, self.n_eff())?;
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub n0_values: Vec<u32>,
    pub omega: Option<f64>,
    pub omega0: Option<f64>,
    pub t_cycles: f64,
    pub n_eff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumConfig {
    pub n_eigs: usize,
    /// Shift as `[re, im]`; defaults to the initial-state energy.
    pub sigma: Option<[f64; 2]>,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self { n_eigs: 24, sigma: None }
    }
}

/// Overrides of the level-sized default grid.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub x_max: Option<f64>,
    pub n_points: Option<usize>,
    pub absorber_start: Option<f64>,
    pub absorber_strength: Option<f64>,
    pub dt: Option<f64>,
    /// Also write the final wavefunction.
    pub snapshot: bool,
}

impl GridConfig {
    pub fn resolve(&self, n0: u32, omega: f64, n_eff: f64) -> GridSpec {
        let d = GridSpec::for_level(n0, omega, n_eff);
        let x_max = self.x_max.unwrap_or(d.x_max);
        GridSpec {
            x_max,
            n_points: self.n_points.unwrap_or(d.n_points),
            absorber_start: self.absorber_start.unwrap_or(0.75 * x_max),
            absorber_strength: self.absorber_strength.unwrap_or(d.absorber_strength),
            dt: self.dt.unwrap_or(d.dt),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub output: OutputConfig,
    pub point: Option<PointConfig>,
    pub scan: Option<ScanConfig>,
    #[serde(default)]
    pub settings: Settings,
    #[serde(default)]
    pub search: SearchSettings,
    #[serde(default)]
    pub spectrum: SpectrumConfig,
    #[serde(default)]
    pub grid: GridConfig,
}

impl RunConfig {
    /// Parses TOML text and applies `key=value` overrides before validation.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e| Error::Config(format!("{e}")))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: RunConfig = toml::Value::Table(table).try_into().map_err(|e| Error::Config(format!("{e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => fs::read_to_string(p)?,
            None => String::new(),
        };
        Self::parse(&text, overrides)
    }

    pub fn validate(&self) -> Result<()> {
        let wrap = |e: Error| match e {
            Error::Domain(m) => Error::Config(m),
            e => e,
        };
        self.settings.validate().map_err(wrap)?;
        self.search.validate().map_err(wrap)?;
        if let Some(p) = &self.point {
            p.atomic().map_err(wrap)?;
        }
        if let Some(s) = &self.scan {
            self.plan_from(s)?.validate().map_err(wrap)?;
        }
        if self.spectrum.n_eigs == 0 {
            return Err(Error::Config("spectrum.n_eigs must be positive".into()));
        }
        if self.output.workers == Some(0) {
            return Err(Error::Config("output.workers must be positive".into()));
        }
        Ok(())
    }

    fn plan_from(&self, s: &ScanConfig) -> Result<ScanPlan> {
        let frequency = match (s.omega, s.omega0) {
            (Some(w), None) => Frequency::Omega(w),
            (None, Some(w0)) => Frequency::Omega0(w0),
            _ => return Err(Error::Config("scan needs exactly one of omega, omega0".into())),
        };
        Ok(ScanPlan {
            n0_values: s.n0_values.clone(),
            frequency,
            t_cycles: s.t_cycles,
            n_eff: s.n_eff,
            settings: self.settings.clone(),
            search: self.search.clone(),
        })
    }

    pub fn plan(&self) -> Result<ScanPlan> {
        let s = self.scan.as_ref().ok_or_else(|| Error::Config("missing [scan] section".into()))?;
        self.plan_from(s)
    }

    pub fn point(&self) -> Result<&PointConfig> {
        self.point.as_ref().ok_or_else(|| Error::Config("missing [point] section".into()))
    }

    /// SHA-256 over everything that affects results (output location and
    /// worker count excluded).
    pub fn hash(&self) -> String {
        let physics = RunConfig { output: OutputConfig::default(), ..self.clone() };
        let json = serde_json::to_string(&physics).expect("config serializes");
        crate::threshold::hex(&Sha256::digest(json.as_bytes()))
    }
}

fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) =
        spec.split_once('=').ok_or_else(|| Error::Config(format!("override `{spec}` is not KEY=VALUE")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("bad override key `{key}`")));
    }
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let mut node = table;
    for p in &parts[..parts.len() - 1] {
        let entry = node.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry.as_table_mut().ok_or_else(|| Error::Config(format!("`{p}` in `{key}` is not a section")))?;
    }
    node.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Domain(_) | Error::Format(_) => EXIT_CONFIG,
        Error::Io(_) => EXIT_IO,
        _ => EXIT_NUMERICAL,
    }
}

struct Context {
    cfg: RunConfig,
    hash: String,
    out: PathBuf,
    workers: usize,
    command: Command,
}

impl Context {
    fn header(&self) -> String {
        format!("# mwion {} {}\n# config_hash = {}\n", env!("CARGO_PKG_VERSION"), self.command.name(), self.hash)
    }

    fn write(&self, name: &str, body: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.out)?;
        let path = self.out.join(name);
        fs::write(&path, format!("{}{body}", self.header()))?;
        Ok(path)
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    let cfg = RunConfig::load(cli.config.as_deref(), &cli.overrides)?;
    let hash = cfg.hash();
    let out = cli.out.clone().or_else(|| cfg.output.dir.clone()).unwrap_or_else(|| PathBuf::from("."));
    let workers = cli.workers.or(cfg.output.workers).unwrap_or(1);
    if workers == 0 {
        return Err(Error::Config("--workers must be positive".into()));
    }
    let ctx = Context { cfg, hash, out, workers, command: cli.command };
    match cli.command {
        Command::ValidateConfig => {
            println!("config ok, hash {}", ctx.hash);
            Ok(())
        }
        Command::Spectrum => cmd_spectrum(&ctx),
        Command::Pion => cmd_pion(&ctx),
        Command::Threshold => cmd_threshold(&ctx),
        Command::Scan => cmd_scan(&ctx),
        Command::Oracle => cmd_oracle(&ctx),
    }
}

fn cmd_spectrum(ctx: &Context) -> Result<()> {
    let params = ctx.cfg.point()?.atomic()?;
    let pipeline = Pipeline::new(&params, &ctx.cfg.settings)?;
    let problem = pipeline.problem(params.field)?.narrowest();
    let sigma = match ctx.cfg.spectrum.sigma {
        Some([re, im]) => Complex64::new(re, im),
        None => Complex64::new(pipeline.initial_energy.re, -SHIFT_OFFSET * params.omega),
    };
    let req = EigenRequest {
        tol: ctx.cfg.settings.tol,
        max_iter: ctx.cfg.settings.max_restarts,
        ..EigenRequest::new(sigma, ctx.cfg.spectrum.n_eigs)
    };
    let mut pairs = match ctx.cfg.settings.solver {
        SolverKind::Dense => dense_eigs_near(&problem.a, &problem.b, &req)?,
        SolverKind::Iterative => shift_invert_eigs(&problem.a, &problem.b, &req)?,
    };
    pairs.sort_by(|p, q| p.epsilon.re.total_cmp(&q.epsilon.re).then(p.epsilon.im.total_cmp(&q.epsilon.im)));
    let mut body = String::from("re_eps,im_eps,gamma,residual\n");
    for p in &pairs {
        writeln!(body, "{},{},{},{}", p.epsilon.re, p.epsilon.im, p.width(), p.residual).expect("string write");
    }
    let path = ctx.write("spectrum.csv", &body)?;
    println!("{} quasi-energies written to {}", pairs.len(), path.display());
    Ok(())
}

fn cmd_pion(ctx: &Context) -> Result<()> {
    let params = ctx.cfg.point()?.atomic()?;
    let out = Pipeline::new(&params, &ctx.cfg.settings)?.pion(params.field)?;
    let d = &out.decomposition;
    let w = shannon_width(&d.weights())?;
    let mut body = format!(
        "# p_ion = {}\n# captured_weight = {}\n# shannon_width = {}\nre_eps,im_eps,gamma,weight\n",
        out.p_ion, d.captured_weight, w
    );
    for e in &d.entries {
        writeln!(body, "{},{},{},{}", e.epsilon.re, e.epsilon.im, e.gamma, e.w2).expect("string write");
    }
    let path = ctx.write("pion.csv", &body)?;
    println!("{}", out.p_ion);
    info!("decomposition written to {}", path.display());
    Ok(())
}

fn cmd_threshold(ctx: &Context) -> Result<()> {
    let point = ctx.cfg.point()?;
    let params = point.atomic()?;
    let rec =
        find_threshold(point.n0, params.omega, point.t_cycles, point.n_eff(), &ctx.cfg.settings, &ctx.cfg.search)?;
    if let Some(e) = &rec.error {
        return Err(Error::Convergence { message: e.clone(), best_residual: f64::NAN });
    }
    ctx.write("threshold.csv", &records_csv(std::slice::from_ref(&rec)))?;
    ctx.write("yield.csv", &yield_table(&rec))?;
    println!("{}", rec.f0_threshold);
    Ok(())
}

fn yield_table(rec: &ThresholdRecord) -> String {
    let mut body = String::from("f0,p_ion\n");
    for (f, p) in &rec.yield_curve {
        writeln!(body, "{f},{p}").expect("string write");
    }
    body
}

/// The three regime-labelled plot tables of a scan.
pub fn plot_tables(records: &[ThresholdRecord]) -> [(&'static str, String); 3] {
    let table = |column: &str, value: fn(&ThresholdRecord) -> f64| {
        let mut body = format!("omega0,{column},n_photons,regime\n");
        for r in records.iter().filter(|r| r.converged) {
            let regime = regime_classify(r.omega0, r.n_photons);
            writeln!(body, "{},{},{},{regime}", r.omega0, value(r), r.n_photons).expect("string write");
        }
        body
    };
    [
        ("threshold_vs_omega0.csv", table("f0_threshold", |r| r.f0_threshold)),
        ("xi_over_n_vs_omega0.csv", table("xi_over_n", |r| r.xi_over_n)),
        ("shannon_vs_omega0.csv", table("shannon", |r| r.shannon)),
    ]
}

fn cmd_scan(ctx: &Context) -> Result<()> {
    let plan = ctx.cfg.plan()?;
    fs::create_dir_all(&ctx.out)?;
    let journal = ctx.out.join(JOURNAL_FILE);
    let records = run_scan(&plan, ctx.workers, Some(&journal))?;
    ctx.write("scan.csv", &records_csv(&records))?;
    for (name, body) in plot_tables(&records) {
        ctx.write(name, &body)?;
    }
    let converged = records.iter().filter(|r| r.converged).count();
    println!("{converged} of {} points converged; output in {}", records.len(), ctx.out.display());
    Ok(())
}

fn cmd_oracle(ctx: &Context) -> Result<()> {
    let point = ctx.cfg.point()?;
    let params = point.atomic()?;
    let grid = ctx.cfg.grid.resolve(point.n0, params.omega, point.n_eff());
    let s = scale(&params);
    let out = propagate(point.n0, params.field, params.omega, point.t_cycles, point.n_eff(), &grid)?;
    let body = format!(
        "n0,omega0,f0,t_cycles,n_eff,n_photons,p_ion,final_norm,n_bound,steps\n{},{},{},{},{},{},{},{},{},{}\n",
        point.n0,
        s.omega0,
        s.f0,
        point.t_cycles,
        point.n_eff(),
        photon_number(point.n0, point.n_eff(), params.omega),
        out.p_ion,
        out.final_norm,
        out.n_bound,
        out.steps
    );
    ctx.write("oracle.csv", &body)?;
    if ctx.cfg.grid.snapshot {
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &grid, &out.psi)?;
        ctx.write("snapshot.csv", &String::from_utf8(buf).map_err(|e| Error::Internal(e.to_string()))?)?;
    }
    println!("{}", out.p_ion);
    Ok(())
}
