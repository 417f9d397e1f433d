//! Batch experiment runner: TOML configuration, the five commands, CSV/JSON/SVG output.
//!
//! Exit codes: 0 success, 1 acceptance threshold exceeded, 2 configuration or domain
//! error, 3 numerical non-convergence.

use crate::ensemble::{run_realization_with_levels, split_seed, EnergyWindow, McRecord, SelfAveragingRow, SystemSpec};
use crate::error::{Error, Result};
use crate::gibbs::{canonical_reduced_dm, gibbs_ratio_scan, gibbs_reference, GibbsReport};
use crate::numerics::{hermitian_part, op_norm, trace, CMatrix, HermitianMatrix, C64};
use crate::reservoir::{check_conditions, Family, LevelMode, ReservoirModel, Tabulated, DEFAULT_A_CANDIDATES};
use crate::selfconsistent::{density_from_points, gamma_points, window_measure_real_axis, GridMode, SolverOptions};
use crate::thermo::thermo_point;
use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
/// Largest composite dimension N·n accepted by the Monte Carlo commands.
pub const MAX_COMPOSITE_DIM: usize = 8192;

pub const EXIT_OK: i32 = 0;
pub const EXIT_THRESHOLD: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "rmt-thermal", version, about = "System/reservoir random-matrix equilibration experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment configuration (TOML)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed (overrides the config)
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (overrides [output] directory)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Keep successful grid points when some fail (solve)
    #[arg(long, global = true)]
    pub partial: bool,
    /// Worker threads (default: all cores); results do not depend on it
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Regularity report and (ε, β, s, μ_J) table
    ReservoirInfo,
    /// Spectral density γ_J on an energy grid
    Solve,
    /// Monte Carlo realizations, window averages and self-averaging table
    Mc,
    /// Trace distance to the Gibbs state over a J list
    GibbsScan,
    /// Monte Carlo vs fixed-point reduced density matrix on one window
    Crosscheck,
}

// ---------------------------------------------------------------- configuration

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub system: SystemSection,
    pub reservoir: ReservoirSection,
    #[serde(default)]
    pub thermo: ThermoSection,
    #[serde(default, rename = "ensemble-mc")]
    pub ensemble_mc: EnsembleSection,
    #[serde(default)]
    pub selfconsistent: SelfConsistentSection,
    #[serde(default)]
    pub gibbs: GibbsSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// Matrices are row-major n² lists; `*_im` adds imaginary parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub n: usize,
    pub h_s: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_s_im: Option<Vec<f64>>,
    pub sigma: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_im: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReservoirSection {
    /// gaussian | exponential | lattice | tabulated
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<u32>,
    /// two-column (ε, q) file for the tabulated family, relative to the config file
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energies: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<Vec<f64>>,
    #[serde(rename = "J", default = "default_j")]
    pub j: u32,
}

fn default_j() -> u32 {
    8
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermoSection {
    /// explicit ε list; otherwise `eps_points` points on [eps_min, eps_max]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_points: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    #[serde(rename = "N_list", default = "default_n_list")]
    pub n_list: Vec<usize>,
    #[serde(rename = "M", default = "default_m")]
    pub m: usize,
    /// quantile | iid
    #[serde(default = "default_levels")]
    pub levels: String,
    /// resolvent point [Re z, Im z] for the self-averaging table
    #[serde(default = "default_z")]
    pub z: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_center: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_delta: Option<f64>,
    #[serde(default = "default_min_count")]
    pub min_count: usize,
    /// crosscheck acceptance threshold on the entrywise deviation
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_n_list() -> Vec<usize> {
    vec![256]
}
fn default_m() -> usize {
    16
}
fn default_levels() -> String {
    "quantile".into()
}
fn default_z() -> [f64; 2] {
    [1.0, 1.0]
}
fn default_min_count() -> usize {
    50
}
fn default_threshold() -> f64 {
    0.02
}

impl Default for EnsembleSection {
    fn default() -> Self {
        EnsembleSection {
            n_list: default_n_list(),
            m: default_m(),
            levels: default_levels(),
            z: default_z(),
            window_center: None,
            window_delta: None,
            min_count: default_min_count(),
            threshold: default_threshold(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelfConsistentSection {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_damping")]
    pub damping: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_max: Option<f64>,
    #[serde(default = "default_e_points")]
    pub e_points: usize,
    /// chained | parallel
    #[serde(default = "default_mode")]
    pub mode: String,
}

fn default_tol() -> f64 {
    1e-10
}
fn default_max_iter() -> usize {
    2000
}
fn default_damping() -> f64 {
    0.5
}
fn default_e_points() -> usize {
    101
}
fn default_mode() -> String {
    "chained".into()
}

impl Default for SelfConsistentSection {
    fn default() -> Self {
        SelfConsistentSection {
            tol: default_tol(),
            max_iter: default_max_iter(),
            damping: default_damping(),
            e_min: None,
            e_max: None,
            e_points: default_e_points(),
            mode: default_mode(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GibbsSection {
    /// energy per block; alternatively give `beta` and ε = -Λ'(β) is used
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(rename = "J_list", default = "default_gibbs_j")]
    pub j_list: Vec<u32>,
    /// also compute the canonical average at each J
    #[serde(default)]
    pub canonical: bool,
}

fn default_gibbs_j() -> Vec<u32> {
    vec![8, 16, 32, 64]
}

impl Default for GibbsSection {
    fn default() -> Self {
        GibbsSection { epsilon: None, beta: None, j_list: default_gibbs_j(), canonical: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub directory: String,
    /// any of csv, json, svg
    #[serde(default = "default_formats")]
    pub formats: Vec<String>,
}

fn default_dir() -> String {
    "out".into()
}
fn default_formats() -> Vec<String> {
    vec!["csv".into(), "json".into(), "svg".into()]
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { directory: default_dir(), formats: default_formats() }
    }
}

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn matrix_from(n: usize, re: &[f64], im: Option<&Vec<f64>>, name: &str) -> Result<HermitianMatrix> {
    if re.len() != n * n {
        return Err(cfg_err(format!("{name} needs {} entries (n = {n}), got {}", n * n, re.len())));
    }
    if let Some(im) = im {
        if im.len() != n * n {
            return Err(cfg_err(format!("{name}_im needs {} entries, got {}", n * n, im.len())));
        }
    }
    let m = CMatrix::from_fn(n, n, |i, j| C64::new(re[i * n + j], im.map(|v| v[i * n + j]).unwrap_or(0.0)));
    HermitianMatrix::new(m).map_err(|e| cfg_err(format!("{name}: {e}")))
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| cfg_err(e.to_string()))
    }

    /// Reads and validates a config; relative paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| cfg_err(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        if let Some(f) = &cfg.reservoir.file {
            let p = Path::new(f);
            if p.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                cfg.reservoir.file = Some(base.join(p).to_string_lossy().into_owned());
            }
        }
        Ok(cfg)
    }

    pub fn system(&self) -> Result<SystemSpec> {
        let s = &self.system;
        if s.n == 0 {
            return Err(cfg_err("system.n must be positive"));
        }
        let h = matrix_from(s.n, &s.h_s, s.h_s_im.as_ref(), "h_s")?;
        let g = matrix_from(s.n, &s.sigma, s.sigma_im.as_ref(), "sigma")?;
        SystemSpec::new(h, g)
    }

    pub fn model(&self) -> Result<ReservoirModel> {
        self.model_with_j(self.reservoir.j)
    }

    pub fn model_with_j(&self, j: u32) -> Result<ReservoirModel> {
        let r = &self.reservoir;
        let need = |v: Option<f64>, k: &str| v.ok_or_else(|| cfg_err(format!("reservoir.{k} is required for family {}", r.family)));
        let family = match r.family.as_str() {
            "gaussian" => Family::Gaussian { eps0: need(r.eps0, "eps0")?, a: need(r.a, "a")? },
            "exponential" => Family::Exponential { eps0: need(r.eps0, "eps0")? },
            "lattice" => Family::Lattice { d: r.d.ok_or_else(|| cfg_err("reservoir.d is required for family lattice"))?, eps0: need(r.eps0, "eps0")? },
            "tabulated" => {
                let tab = match (&r.file, &r.energies, &r.density) {
                    (Some(f), None, None) => Tabulated::from_file(Path::new(f))?,
                    (None, Some(e), Some(q)) => Tabulated::new(e.clone(), q.clone())?,
                    _ => return Err(cfg_err("tabulated family needs either `file` or both `energies` and `density`")),
                };
                Family::Tabulated(tab)
            }
            other => return Err(cfg_err(format!("unknown reservoir family '{other}'"))),
        };
        ReservoirModel::new(family, j)
    }

    pub fn solver_options(&self) -> Result<SolverOptions> {
        let s = &self.selfconsistent;
        if !(s.tol > 0.0) || s.max_iter == 0 || !(s.damping > 0.0 && s.damping <= 1.0) {
            return Err(cfg_err("selfconsistent needs tol > 0, max_iter > 0, 0 < damping <= 1"));
        }
        Ok(SolverOptions { tol: s.tol, max_iter: s.max_iter, damping: s.damping })
    }

    fn level_mode(&self) -> Result<LevelMode> {
        match self.ensemble_mc.levels.as_str() {
            "quantile" => Ok(LevelMode::Quantile),
            "iid" => Ok(LevelMode::Iid),
            o => Err(cfg_err(format!("ensemble-mc.levels must be quantile or iid, got '{o}'"))),
        }
    }

    fn grid_mode(&self) -> Result<GridMode> {
        match self.selfconsistent.mode.as_str() {
            "chained" => Ok(GridMode::Chained),
            "parallel" => Ok(GridMode::Parallel),
            o => Err(cfg_err(format!("selfconsistent.mode must be chained or parallel, got '{o}'"))),
        }
    }

    fn wants(&self, format: &str) -> bool {
        self.output.formats.iter().any(|f| f == format)
    }

    /// SHA-256 of the canonical JSON form of the resolved config.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let d = Sha256::digest(json.as_bytes());
        d.iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    /// Checks everything a command needs before any computation or output.
    pub fn validate(&self, cmd: Command) -> Result<()> {
        self.system()?;
        let model = self.model()?;
        self.solver_options()?;
        for f in &self.output.formats {
            if !matches!(f.as_str(), "csv" | "json" | "svg") {
                return Err(cfg_err(format!("unknown output format '{f}'")));
            }
        }
        match cmd {
            Command::ReservoirInfo => {
                if let Some(k) = self.thermo.eps_points {
                    if k < 2 {
                        return Err(cfg_err("thermo.eps_points must be >= 2"));
                    }
                }
            }
            Command::Solve => {
                self.grid_mode()?;
                if self.selfconsistent.e_points < 2 {
                    return Err(cfg_err("selfconsistent.e_points must be >= 2"));
                }
            }
            Command::Mc | Command::Crosscheck => {
                self.level_mode()?;
                let e = &self.ensemble_mc;
                if e.n_list.is_empty() || e.n_list.contains(&0) {
                    return Err(cfg_err("ensemble-mc.N_list must be non-empty and positive"));
                }
                let n = self.system.n;
                if let Some(&big) = e.n_list.iter().find(|&&b| b * n > MAX_COMPOSITE_DIM) {
                    return Err(cfg_err(format!("N*n = {} exceeds the cap {MAX_COMPOSITE_DIM}", big * n)));
                }
                if e.m == 0 {
                    return Err(cfg_err("ensemble-mc.M must be positive"));
                }
                if cmd == Command::Mc && e.z[1] == 0.0 {
                    return Err(cfg_err("ensemble-mc.z needs Im z != 0"));
                }
                if let Some(d) = e.window_delta {
                    if !(d > 0.0) {
                        return Err(cfg_err("ensemble-mc.window_delta must be positive"));
                    }
                }
                if !(e.threshold >= 0.0) {
                    return Err(cfg_err("ensemble-mc.threshold must be >= 0"));
                }
            }
            Command::GibbsScan => {
                let g = &self.gibbs;
                if g.j_list.is_empty() || g.j_list.contains(&0) {
                    return Err(cfg_err("gibbs.J_list must be non-empty and positive"));
                }
                if g.epsilon.is_none() == g.beta.is_none() {
                    return Err(cfg_err("gibbs needs exactly one of epsilon or beta"));
                }
                let _ = model;
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------- output helpers

#[derive(Debug, Clone, Serialize)]
struct Meta<'a> {
    version: &'static str,
    config_sha256: String,
    seed: u64,
    config: &'a ExperimentConfig,
}

fn meta(cfg: &ExperimentConfig) -> Meta<'_> {
    Meta { version: VERSION, config_sha256: cfg.hash(), seed: cfg.seed, config: cfg }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    meta: Meta<'a>,
    result: &'a T,
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes a CSV file whose first line is a `#` metadata comment.
fn write_csv(path: &Path, cfg: &ExperimentConfig, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    writeln!(f, "# config_sha256={},seed={},version={}", cfg.hash(), cfg.seed, VERSION)?;
    let mut w = csv::Writer::from_writer(f);
    w.write_record(header).map_err(|e| Error::Io(e.to_string()))?;
    for r in rows {
        w.write_record(r.iter().map(|x| num(*x))).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, cfg: &ExperimentConfig, result: &T) -> Result<()> {
    let env = Envelope { meta: meta(cfg), result };
    let text = serde_json::to_string_pretty(&env).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn entry_headers(prefix: &str, n: usize) -> Vec<String> {
    let mut h = Vec::new();
    for a in 0..n {
        for b in 0..n {
            h.push(format!("{prefix}re_{a}{b}"));
            h.push(format!("{prefix}im_{a}{b}"));
        }
    }
    h
}

fn entries(m: &CMatrix) -> Vec<f64> {
    let n = m.nrows();
    let mut v = Vec::with_capacity(2 * n * n);
    for a in 0..n {
        for b in 0..n {
            v.push(m[(a, b)].re);
            v.push(m[(a, b)].im);
        }
    }
    v
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MatrixEntries {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl MatrixEntries {
    pub fn from(m: &CMatrix) -> Self {
        let n = m.nrows();
        MatrixEntries { re: (0..n * n).map(|k| m[(k / n, k % n)].re).collect(), im: (0..n * n).map(|k| m[(k / n, k % n)].im).collect() }
    }
}

/// A named polyline for [`svg_plot`].
pub struct Series<'a> {
    pub name: &'a str,
    pub points: Vec<(f64, f64)>,
}

/// Minimal SVG line plot, one `<polyline>` per series.
fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub fn svg_plot(title: &str, xlabel: &str, ylabel: &str, series: &[Series], comment: &str) -> String {
    let (title, xlabel, ylabel) = (xml_escape(title), xml_escape(xlabel), xml_escape(ylabel));
    // "--" is not allowed inside an XML comment
    let comment = comment.replace("--", "- -");
    let (w, h, m) = (640.0, 420.0, 60.0);
    let pts: Vec<(f64, f64)> = series.iter().flat_map(|s| s.points.iter().cloned()).filter(|p| p.0.is_finite() && p.1.is_finite()).collect();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in &pts {
        x0 = x0.min(*x);
        x1 = x1.max(*x);
        y0 = y0.min(*y);
        y1 = y1.max(*y);
    }
    if !(x1 > x0) {
        x0 -= 1.0;
        x1 += 1.0;
    }
    if !(y1 > y0) {
        y0 -= 1.0;
        y1 += 1.0;
    }
    let sx = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let sy = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(s, "<!-- {comment} -->");
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{title}</text>"#, w / 2.0);
    let _ = writeln!(
        s,
        r#"<line x1="{m}" y1="{}" x2="{}" y2="{}" stroke="black"/><line x1="{m}" y1="{m}" x2="{m}" y2="{}" stroke="black"/>"#,
        h - m,
        w - m,
        h - m,
        h - m
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{xlabel}</text>"#, w / 2.0, h - 18.0);
    let _ = writeln!(s, r#"<text x="16" y="{}" text-anchor="middle" font-size="12" transform="rotate(-90 16 {})">{ylabel}</text>"#, h / 2.0, h / 2.0);
    for (v, anchor_x) in [(x0, sx(x0)), (x1, sx(x1))] {
        let _ = writeln!(s, r#"<text x="{anchor_x:.2}" y="{}" text-anchor="middle" font-size="10">{v:.3}</text>"#, h - m + 14.0);
    }
    for (v, anchor_y) in [(y0, sy(y0)), (y1, sy(y1))] {
        let _ = writeln!(s, r#"<text x="{}" y="{anchor_y:.2}" text-anchor="end" font-size="10">{v:.3}</text>"#, m - 4.0);
    }
    for (i, ser) in series.iter().enumerate() {
        let c = colors[i % colors.len()];
        let name = xml_escape(ser.name);
        let p: Vec<String> = ser.points.iter().filter(|p| p.0.is_finite() && p.1.is_finite()).map(|(x, y)| format!("{:.3},{:.3}", sx(*x), sy(*y))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{c}" stroke-width="2" points="{}"><title>{}</title></polyline>"#, p.join(" "), name);
        let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="11" fill="{c}">{}</text>"#, w - m - 120.0, m + 14.0 * (i as f64 + 1.0), name);
    }
    s.push_str("</svg>\n");
    s
}

// ---------------------------------------------------------------- commands

/// Successful command outcome; `exit_code` is 0 or 1 (threshold exceeded).
#[derive(Debug, Clone)]
pub struct Outcome {
    pub exit_code: i32,
    pub files: Vec<PathBuf>,
    pub summary: String,
}

fn ok(files: Vec<PathBuf>, summary: String) -> Outcome {
    Outcome { exit_code: EXIT_OK, files, summary }
}

pub fn exit_code_for(e: &Error) -> i32 {
    match e.root() {
        Error::NoConvergence { .. } | Error::EigenFailure | Error::Numerical(_) | Error::ExpOverflow { .. } => EXIT_NUMERICAL,
        _ => EXIT_CONFIG,
    }
}

/// Runs `cmd` on a validated config, writing into `out`.
pub fn run_command(cmd: Command, cfg: &ExperimentConfig, out: &Path, partial: bool) -> Result<Outcome> {
    cfg.validate(cmd)?;
    fs::create_dir_all(out)?;
    match cmd {
        Command::ReservoirInfo => cmd_reservoir_info(cfg, out),
        Command::Solve => cmd_solve(cfg, out, partial),
        Command::Mc => cmd_mc(cfg, out),
        Command::GibbsScan => cmd_gibbs_scan(cfg, out),
        Command::Crosscheck => cmd_crosscheck(cfg, out),
    }
}

fn linspace(a: f64, b: f64, k: usize) -> Vec<f64> {
    (0..k).map(|i| a + (b - a) * i as f64 / (k - 1) as f64).collect()
}

#[derive(Debug, Clone, Serialize)]
struct ReservoirInfo {
    family: Family,
    #[serde(rename = "J")]
    j: u32,
    conditions: crate::reservoir::ConditionReport,
    hausdorff_young_bound: f64,
    #[serde(rename = "J_ge_J0")]
    j_ok: bool,
}

pub fn cmd_reservoir_info(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let model = cfg.model()?;
    let rep = check_conditions(&model, &DEFAULT_A_CANDIDATES, 1.0)?;
    let bound = rep.hausdorff_young_bound();
    let info = ReservoirInfo { family: model.family.clone(), j: model.j, j_ok: model.j as f64 >= rep.hausdorff_young_j0 - 1e-12, hausdorff_young_bound: bound, conditions: rep.clone() };
    let eps = match &cfg.thermo.epsilon {
        Some(v) => v.clone(),
        None => {
            let (lo, hi) = model.block_support();
            let mean = model.block_mean();
            let sd = model.block_variance().sqrt();
            let a = cfg.thermo.eps_min.unwrap_or((mean - 2.5 * sd).max(lo + 0.02 * (mean - lo)));
            let b = cfg.thermo.eps_max.unwrap_or((mean + 2.5 * sd).min(hi - 0.02 * (hi - mean)));
            linspace(a, b, cfg.thermo.eps_points.unwrap_or(41))
        }
    };
    let j = model.j;
    let rows: Vec<Result<Vec<f64>>> = eps
        .par_iter()
        .map(|&e| {
            let p = thermo_point(&model, e, j)?;
            let nu = model.dos(j as f64 * e)?;
            Ok(vec![e, p.beta, p.entropy_rate, p.lambda2, p.mu_j, nu, nu / p.mu_j])
        })
        .collect();
    let rows: Vec<Vec<f64>> = rows.into_iter().collect::<Result<_>>()?;
    let mut files = Vec::new();
    if cfg.wants("json") {
        let p = out.join("conditions.json");
        write_json(&p, cfg, &info)?;
        files.push(p);
    }
    if cfg.wants("csv") {
        let p = out.join("thermo.csv");
        let header: Vec<String> = ["epsilon", "beta", "entropy_rate", "lambda2", "mu_J", "nu_J", "nu_over_mu"].iter().map(|s| s.to_string()).collect();
        write_csv(&p, cfg, &header, &rows)?;
        files.push(p);
    }
    Ok(ok(files, format!("a = {}, J0 = {}, J = {j}", rep.a_exponent, rep.hausdorff_young_j0)))
}

#[derive(Debug, Clone, Serialize)]
struct SolvePoint {
    energy: f64,
    iterations: usize,
    residual: f64,
    truncation: f64,
    quad_error: f64,
    log_scale: f64,
    beta_shift: f64,
}

#[derive(Debug, Clone, Serialize)]
struct SolveReport {
    #[serde(rename = "J")]
    j: u32,
    mode: String,
    points: Vec<SolvePoint>,
    failed: Vec<(f64, String)>,
    /// trapezoid ∫γ dE over the grid
    total_mass: MatrixEntries,
    max_residual: f64,
}

pub fn cmd_solve(cfg: &ExperimentConfig, out: &Path, partial: bool) -> Result<Outcome> {
    let sys = cfg.system()?;
    let model = cfg.model()?;
    let opts = cfg.solver_options()?;
    let mode = cfg.grid_mode()?;
    let jf = model.j as f64;
    let (lo, hi) = match (cfg.selfconsistent.e_min, cfg.selfconsistent.e_max) {
        (Some(a), Some(b)) => (a, b),
        (a, b) => {
            let spread = op_norm(sys.h_s.matrix()) + 2.0 * op_norm(sys.sigma.matrix()).powi(2);
            let c = jf * model.block_mean();
            let w = 6.0 * (jf * model.block_variance()).sqrt() + spread;
            let (slo, shi) = model.block_support();
            (a.unwrap_or((c - w).max(jf * slo - spread)), b.unwrap_or((c + w).min(jf * shi + spread)))
        }
    };
    if !(hi > lo) {
        return Err(cfg_err("selfconsistent.e_max must exceed e_min"));
    }
    let grid = linspace(lo, hi, cfg.selfconsistent.e_points);
    let points = gamma_points(&sys, &model, &grid, &opts, mode)?;
    let (dens, failed) = density_from_points(&grid, points);
    if let Some((_, e)) = failed.first() {
        if !partial {
            return Err(e.clone());
        }
    }
    if dens.grid.is_empty() {
        return Err(failed.into_iter().next().map(|(_, e)| e).unwrap_or_else(|| Error::Numerical("empty grid".into())));
    }
    let n = sys.n();
    let mass = if dens.grid.len() > 1 { dens.total_mass() } else { CMatrix::zeros(n, n) };
    let report = SolveReport {
        j: model.j,
        mode: cfg.selfconsistent.mode.clone(),
        points: dens
            .solutions
            .iter()
            .map(|s| SolvePoint { energy: s.energy, iterations: s.iterations, residual: s.residual, truncation: s.truncation, quad_error: s.quad_error, log_scale: s.log_kappa, beta_shift: s.beta_shift })
            .collect(),
        failed: failed.iter().map(|(e, x)| (*e, x.to_string())).collect(),
        total_mass: MatrixEntries::from(&mass),
        max_residual: dens.solutions.iter().map(|s| s.residual).fold(0.0, f64::max),
    };
    let mut files = Vec::new();
    if cfg.wants("csv") {
        let p = out.join("gamma.csv");
        let mut header = vec!["E".to_string()];
        header.extend(entry_headers("", n));
        let rows: Vec<Vec<f64>> = (0..dens.grid.len())
            .map(|i| {
                let mut r = vec![dens.grid[i]];
                r.extend(entries(&dens.value(i)));
                r
            })
            .collect();
        write_csv(&p, cfg, &header, &rows)?;
        files.push(p);
    }
    if cfg.wants("json") {
        let p = out.join("solve.json");
        write_json(&p, cfg, &report)?;
        files.push(p);
    }
    Ok(ok(files, format!("{} grid points solved, {} failed, Tr mass = {:.6}", dens.grid.len(), failed.len(), trace(&mass).re)))
}

#[derive(Debug, Clone, Serialize)]
struct McAggregateRow {
    #[serde(rename = "N")]
    big_n: usize,
    window: EnergyWindow,
    mean_count: f64,
    mean_e_s: MatrixEntries,
    /// average of the per-realization ρ_S^{(N)}
    mean_rho: MatrixEntries,
    resolvent: SelfAveragingRow,
}

#[derive(Debug, Clone, Serialize)]
struct McAggregate {
    z: [f64; 2],
    #[serde(rename = "M")]
    m: usize,
    rows: Vec<McAggregateRow>,
    /// log-log slope of the max-entry variance of g(z) against N (NaN for one N)
    slope: f64,
}

struct Realization {
    record: McRecord,
    rho: CMatrix,
    g: CMatrix,
}

/// The configured window, or the adaptive default from realization 0 centred on the bulk.
fn mc_window(cfg: &ExperimentConfig, sys: &SystemSpec, model: &ReservoirModel, first: &crate::ensemble::SpectralData) -> Result<EnergyWindow> {
    let center = cfg.ensemble_mc.window_center.unwrap_or_else(|| default_center(sys, model));
    match cfg.ensemble_mc.window_delta {
        Some(d) => EnergyWindow::new(center, d),
        None => first.default_window(center, cfg.ensemble_mc.min_count),
    }
}

fn default_center(sys: &SystemSpec, model: &ReservoirModel) -> f64 {
    model.j as f64 * model.block_mean() + trace(sys.h_s.matrix()).re / sys.n() as f64
}

/// Runs the M realizations at one N; returns the window and per-realization results in order.
fn mc_batch(cfg: &ExperimentConfig, sys: &SystemSpec, model: &ReservoirModel, idx: usize, big_n: usize, z: Option<C64>) -> Result<(EnergyWindow, Vec<Realization>)> {
    let mode = cfg.level_mode()?;
    let m = cfg.ensemble_mc.m;
    let master = cfg.seed;
    let levels = model.sample_levels(big_n, mode, split_seed(master, idx as u64, u32::MAX as u64))?;
    let levels_for = |s: u64| -> Result<Vec<f64>> {
        if mode == LevelMode::Iid {
            model.sample_levels(big_n, mode, s ^ 1)
        } else {
            Ok(levels.clone())
        }
    };
    let s0 = split_seed(master, idx as u64, 0);
    let first = run_realization_with_levels(sys, &levels_for(s0)?, s0)?;
    let win = mc_window(cfg, sys, model, &first)?;
    let one = |r: usize, data: Option<crate::ensemble::SpectralData>| -> Result<Realization> {
        let s = split_seed(master, idx as u64, r as u64);
        let data = match data {
            Some(d) => d,
            None => run_realization_with_levels(sys, &levels_for(s)?, s)?,
        };
        let micro = data.reduced_dm(&win)?;
        let g = match z {
            Some(z) => data.resolvent(z)?,
            None => CMatrix::zeros(sys.n(), sys.n()),
        };
        Ok(Realization { record: McRecord::new(big_n, s, win, &micro.e_s_window, micro.count), rho: micro.rho.matrix().clone(), g })
    };
    let mut out = vec![one(0, Some(first))?];
    let rest: Vec<Result<Realization>> = (1..m).into_par_iter().map(|r| one(r, None)).collect();
    for r in rest {
        out.push(r?);
    }
    Ok((win, out))
}

fn mean_of(ms: impl Iterator<Item = CMatrix>, n: usize) -> CMatrix {
    let mut acc = CMatrix::zeros(n, n);
    let mut k = 0.0f64;
    for m in ms {
        acc += m;
        k += 1.0;
    }
    acc / C64::new(k.max(1.0), 0.0)
}

pub fn cmd_mc(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let sys = cfg.system()?;
    let model = cfg.model()?;
    let n = sys.n();
    let z = C64::new(cfg.ensemble_mc.z[0], cfg.ensemble_mc.z[1]);
    let mut records = Vec::new();
    let mut rows = Vec::new();
    for (i, &big_n) in cfg.ensemble_mc.n_list.iter().enumerate() {
        let (win, reals) = mc_batch(cfg, &sys, &model, i, big_n, Some(z))?;
        let gs: Vec<CMatrix> = reals.iter().map(|r| r.g.clone()).collect();
        let row = crate::ensemble::variance_table_row(big_n, n, &gs);
        let e_mean = mean_of(reals.iter().map(|r| CMatrix::from_fn(n, n, |a, b| C64::new(r.record.e_s_re[a * n + b], r.record.e_s_im[a * n + b]))), n);
        rows.push(McAggregateRow {
            big_n,
            window: win,
            mean_count: reals.iter().map(|r| r.record.count as f64).sum::<f64>() / reals.len() as f64,
            mean_e_s: MatrixEntries::from(&e_mean),
            mean_rho: MatrixEntries::from(&mean_of(reals.iter().map(|r| r.rho.clone()), n)),
            resolvent: row,
        });
        records.extend(reals.into_iter().map(|r| r.record));
    }
    let xs: Vec<f64> = rows.iter().map(|r| (r.big_n as f64).ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.resolvent.max_variance.max(1e-300).ln()).collect();
    let agg = McAggregate { z: cfg.ensemble_mc.z, m: cfg.ensemble_mc.m, slope: crate::ensemble::fit_slope(&xs, &ys), rows };
    let mut files = Vec::new();
    if cfg.wants("json") {
        let p = out.join("mc_realizations.json");
        write_json(&p, cfg, &records)?;
        files.push(p);
        let p = out.join("mc_aggregate.json");
        write_json(&p, cfg, &agg)?;
        files.push(p);
    }
    if cfg.wants("csv") {
        let p = out.join("mc_variance.csv");
        let mut header = vec!["N".to_string(), "max_variance".to_string()];
        for a in 0..n {
            for b in 0..n {
                header.push(format!("var_{a}{b}"));
            }
        }
        let rows: Vec<Vec<f64>> = agg
            .rows
            .iter()
            .map(|r| {
                let mut v = vec![r.big_n as f64, r.resolvent.max_variance];
                v.extend(r.resolvent.variance.iter().cloned());
                v
            })
            .collect();
        write_csv(&p, cfg, &header, &rows)?;
        files.push(p);
    }
    Ok(ok(files, format!("{} realizations, variance slope {:.3}", records.len(), agg.slope)))
}

#[derive(Debug, Clone, Serialize)]
struct GibbsScanOutput {
    #[serde(flatten)]
    report: GibbsReport,
    /// trace distance of the canonical average to the Gibbs state, per J (if requested)
    #[serde(skip_serializing_if = "Option::is_none")]
    canonical_trace_distances: Option<Vec<f64>>,
}

pub fn cmd_gibbs_scan(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let sys = cfg.system()?;
    let model = cfg.model()?;
    let opts = cfg.solver_options()?;
    let g = &cfg.gibbs;
    let epsilon = match (g.epsilon, g.beta) {
        (Some(e), _) => e,
        (None, Some(b)) => -model.log_laplace(b)?.1,
        _ => unreachable!("validated"),
    };
    let report = gibbs_ratio_scan(&sys, &model, epsilon, &g.j_list, &opts)?;
    let canonical = if g.canonical {
        let gibbs = gibbs_reference(&sys.h_s, report.beta)?;
        let d: Vec<Result<f64>> = g
            .j_list
            .par_iter()
            .map(|&j| Ok(canonical_reduced_dm(&sys, &model, report.beta, j, &opts)?.rho.trace_distance(&gibbs)))
            .collect();
        Some(d.into_iter().collect::<Result<Vec<f64>>>()?)
    } else {
        None
    };
    let n = sys.n();
    let mut files = Vec::new();
    if cfg.wants("csv") {
        let p = out.join("gibbs_scan.csv");
        let mut header = vec!["J".to_string(), "D_J".to_string(), "beta".to_string(), "ratio_deviation".to_string()];
        header.extend(entry_headers("ratio_", n));
        let rows: Vec<Vec<f64>> = report
            .rows
            .iter()
            .map(|r| {
                let mut v = vec![r.j as f64, r.trace_distance, report.beta, r.ratio_deviation];
                for k in 0..n * n {
                    v.push(r.ratio_re[k]);
                    v.push(r.ratio_im[k]);
                }
                v
            })
            .collect();
        write_csv(&p, cfg, &header, &rows)?;
        files.push(p);
    }
    if cfg.wants("svg") {
        let p = out.join("gibbs_scan.svg");
        let mut series = vec![Series { name: "log D_J", points: report.rows.iter().map(|r| ((r.j as f64).ln(), r.trace_distance.ln())).collect() }];
        if let Some(c) = &canonical {
            series.push(Series { name: "log D_J canonical", points: g.j_list.iter().zip(c).map(|(j, d)| ((*j as f64).ln(), d.ln())).collect() });
        }
        let comment = format!("config_sha256={},seed={},version={}", cfg.hash(), cfg.seed, VERSION);
        fs::write(&p, svg_plot("Trace distance to the Gibbs state", "log J", "log D_J", &series, &comment))?;
        files.push(p);
    }
    let slope = report.fitted_rate;
    let beta = report.beta;
    let d_last = report.trace_distances.last().cloned().unwrap_or(f64::NAN);
    if cfg.wants("json") {
        let p = out.join("gibbs_report.json");
        write_json(&p, cfg, &GibbsScanOutput { report, canonical_trace_distances: canonical })?;
        files.push(p);
    }
    Ok(ok(files, format!("beta = {beta:.6}, last D_J = {d_last:.3e}, fitted rate {slope:.3}")))
}

#[derive(Debug, Clone, Serialize)]
pub struct CrosscheckReport {
    #[serde(rename = "N")]
    pub big_n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub window: EnergyWindow,
    pub mean_count: f64,
    pub rho_mc: MatrixEntries,
    pub rho_selfconsistent: MatrixEntries,
    pub e_s_mc: MatrixEntries,
    pub e_s_selfconsistent: MatrixEntries,
    pub max_deviation: f64,
    pub threshold: f64,
    /// 2/√(mean count): the counting-noise scale of a single window average
    pub counting_noise: f64,
    pub passed: bool,
}

pub fn cmd_crosscheck(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let sys = cfg.system()?;
    let model = cfg.model()?;
    let opts = cfg.solver_options()?;
    let n = sys.n();
    let big_n = *cfg.ensemble_mc.n_list.last().unwrap();
    let idx = cfg.ensemble_mc.n_list.len() - 1;
    let (win, reals) = mc_batch(cfg, &sys, &model, idx, big_n, None)?;
    let rho_mc = mean_of(reals.iter().map(|r| r.rho.clone()), n);
    let e_mc = mean_of(reals.iter().map(|r| CMatrix::from_fn(n, n, |a, b| C64::new(r.record.e_s_re[a * n + b], r.record.e_s_im[a * n + b]))), n);
    let panels = ((win.delta / 0.25).ceil() as usize).clamp(1, 64);
    let e_sc = window_measure_real_axis(&sys, &model, &win, panels, &opts)?;
    let rho_sc = crate::ensemble::DensityMatrix::from_unnormalized(&hermitian_part(&e_sc))?;
    let diff = &rho_mc - rho_sc.matrix();
    let max_dev = diff.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    let mean_count = reals.iter().map(|r| r.record.count as f64).sum::<f64>() / reals.len() as f64;
    let threshold = cfg.ensemble_mc.threshold;
    let passed = max_dev < threshold;
    let rep = CrosscheckReport {
        big_n,
        m: cfg.ensemble_mc.m,
        window: win,
        mean_count,
        rho_mc: MatrixEntries::from(&rho_mc),
        rho_selfconsistent: MatrixEntries::from(rho_sc.matrix()),
        e_s_mc: MatrixEntries::from(&e_mc),
        e_s_selfconsistent: MatrixEntries::from(&e_sc),
        max_deviation: max_dev,
        threshold,
        counting_noise: 2.0 / mean_count.sqrt(),
        passed,
    };
    let mut files = Vec::new();
    if cfg.wants("json") {
        let p = out.join("crosscheck.json");
        write_json(&p, cfg, &rep)?;
        files.push(p);
    }
    if cfg.wants("csv") {
        let p = out.join("crosscheck.csv");
        let mut header = vec!["N".to_string(), "max_deviation".to_string(), "threshold".to_string()];
        header.extend(entry_headers("mc_", n));
        header.extend(entry_headers("sc_", n));
        let mut row = vec![big_n as f64, max_dev, threshold];
        row.extend(entries(&rho_mc));
        row.extend(entries(rho_sc.matrix()));
        write_csv(&p, cfg, &header, &[row])?;
        files.push(p);
    }
    let summary = format!("max deviation {max_dev:.4e} (threshold {threshold}), window [{:.4}, {:.4}]", win.lo(), win.hi());
    Ok(Outcome { exit_code: if passed { EXIT_OK } else { EXIT_THRESHOLD }, files, summary })
}

/// Entry point for the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let Some(path) = cli.config.as_ref() else {
        eprintln!("error: --config is required");
        return EXIT_CONFIG;
    };
    let mut cfg = match ExperimentConfig::load(path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.directory));
    if let Err(e) = cfg.validate(cli.command) {
        eprintln!("error: {e}");
        return exit_code_for(&e);
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs {
        pool = pool.num_threads(j.max(1));
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return EXIT_CONFIG;
        }
    };
    match pool.install(|| run_command(cli.command, &cfg, &out, cli.partial)) {
        Ok(o) => {
            println!("{}", o.summary);
            for f in &o.files {
                println!("wrote {}", f.display());
            }
            if o.exit_code == EXIT_THRESHOLD {
                eprintln!("acceptance threshold exceeded");
            }
            o.exit_code
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}
