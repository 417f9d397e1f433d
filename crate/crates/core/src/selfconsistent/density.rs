use super::{solve_halfplane, solve_halfplane_from, solve_real_axis_with, require_j0, shift_for, Nu, RealAxisSolution, SolverOptions};
use crate::ensemble::{EnergyWindow, SystemSpec};
use crate::error::{Error, Result};
use crate::numerics::{hermitian_part, imag_part, CMatrix, C64};
use crate::reservoir::ReservoirModel;
use rayon::prelude::*;
use std::f64::consts::PI;

/// γ_J on an energy grid. Values are stored scaled: γ(E_i) = e^{log_scale[i]} · scaled[i].
#[derive(Debug, Clone)]
pub struct SpectralDensity {
    pub grid: Vec<f64>,
    pub scaled: Vec<CMatrix>,
    pub log_scale: Vec<f64>,
    pub solutions: Vec<RealAxisSolution>,
}

impl SpectralDensity {
    pub fn value(&self, i: usize) -> CMatrix {
        &self.scaled[i] * C64::new(self.log_scale[i].exp(), 0.0)
    }

    pub fn values(&self) -> Vec<CMatrix> {
        (0..self.grid.len()).map(|i| self.value(i)).collect()
    }

    /// Trapezoid ∫ γ dE over the grid.
    pub fn total_mass(&self) -> CMatrix {
        let n = self.scaled[0].nrows();
        let mut acc = CMatrix::zeros(n, n);
        for i in 0..self.grid.len().saturating_sub(1) {
            let h = self.grid[i + 1] - self.grid[i];
            acc += (self.value(i) + self.value(i + 1)) * C64::new(0.5 * h, 0.0);
        }
        acc
    }
}

/// Ordering of grid solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridMode {
    /// sequential, each point warm-started from the previous one (deterministic, default)
    Chained,
    /// independent cold solves, run concurrently
    Parallel,
}

fn checked_gamma(sol: &RealAxisSolution, tol: f64) -> Result<CMatrix> {
    let g = hermitian_part(&sol.gamma_scaled());
    let norm = crate::numerics::op_norm(&g);
    let min = g.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min);
    if min < -(tol + 1e-8 * norm) {
        return Err(Error::Numerical(format!("spectral density not PSD: min eigenvalue {min:.3e}")));
    }
    Ok(g)
}

/// γ_J(E) = Im f_S(E)/π on the grid, symmetrized; negative eigenvalues below -tol rejected.
pub fn gamma_density(sys: &SystemSpec, model: &ReservoirModel, grid: &[f64], opts: &SolverOptions) -> Result<SpectralDensity> {
    gamma_density_mode(sys, model, grid, opts, GridMode::Chained)
}

pub fn gamma_density_mode(
    sys: &SystemSpec,
    model: &ReservoirModel,
    grid: &[f64],
    opts: &SolverOptions,
    mode: GridMode,
) -> Result<SpectralDensity> {
    let results = gamma_points(sys, model, grid, opts, mode)?;
    let results: Vec<(RealAxisSolution, CMatrix)> = results.into_iter().collect::<Result<_>>()?;
    Ok(assemble(grid.to_vec(), results))
}

fn assemble(grid: Vec<f64>, results: Vec<(RealAxisSolution, CMatrix)>) -> SpectralDensity {
    let mut scaled = Vec::new();
    let mut log_scale = Vec::new();
    let mut solutions = Vec::new();
    for (s, g) in results {
        scaled.push(g);
        log_scale.push(s.log_kappa);
        solutions.push(s);
    }
    SpectralDensity { grid, scaled, log_scale, solutions }
}

/// Per-point results (failures kept) for callers that tolerate partial grids.
pub fn gamma_points(
    sys: &SystemSpec,
    model: &ReservoirModel,
    grid: &[f64],
    opts: &SolverOptions,
    mode: GridMode,
) -> Result<Vec<Result<(RealAxisSolution, CMatrix)>>> {
    require_j0(model)?;
    let one = |e: f64, guess: Option<(&CMatrix, &CMatrix)>| -> Result<(RealAxisSolution, CMatrix)> {
        let s = solve_real_axis_with(sys, model, e, opts, shift_for(sys, model, e), guess)
            .map_err(|x| Error::AtGridPoint { energy: e, source: Box::new(x) })?;
        let g = checked_gamma(&s, opts.tol).map_err(|x| Error::AtGridPoint { energy: e, source: Box::new(x) })?;
        Ok((s, g))
    };
    Ok(match mode {
        GridMode::Parallel => grid.par_iter().map(|&e| one(e, None)).collect(),
        GridMode::Chained => {
            let mut out: Vec<Result<(RealAxisSolution, CMatrix)>> = Vec::with_capacity(grid.len());
            let mut prev: Option<(CMatrix, CMatrix)> = None;
            for &e in grid {
                let r = one(e, prev.as_ref().map(|(x, y)| (x, y)));
                let r = match r {
                    Err(_) if prev.is_some() => one(e, None),
                    r => r,
                };
                prev = r.as_ref().ok().map(|(s, _)| (s.x.clone(), s.y_scaled.clone()));
                out.push(r);
            }
            out
        }
    })
}

/// Assembles a density from the successful points of [`gamma_points`].
pub fn density_from_points(grid: &[f64], points: Vec<Result<(RealAxisSolution, CMatrix)>>) -> (SpectralDensity, Vec<(f64, Error)>) {
    let mut ok = Vec::new();
    let mut g = Vec::new();
    let mut failed = Vec::new();
    for (e, r) in grid.iter().zip(points) {
        match r {
            Ok(v) => {
                g.push(*e);
                ok.push(v);
            }
            Err(x) => failed.push((*e, x)),
        }
    }
    (assemble(g, ok), failed)
}

/// Gauss–Legendre nodes and weights on [a, b].
pub fn gauss_legendre(a: f64, b: f64, m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = Vec::with_capacity(m);
    let mut ws = Vec::with_capacity(m);
    for i in 0..m {
        // Newton on P_m from the Chebyshev guess
        let mut x = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        xs.push(0.5 * (a + b) - 0.5 * (b - a) * x);
        ws.push((b - a) / ((1.0 - x * x) * dp * dp));
    }
    (xs, ws)
}

/// e_S(Δ) = ∫_Δ γ_J(λ) dλ from real-axis solves at Gauss–Legendre nodes (composite, `panels` × 16).
pub fn window_measure_real_axis(
    sys: &SystemSpec,
    model: &ReservoirModel,
    win: &EnergyWindow,
    panels: usize,
    opts: &SolverOptions,
) -> Result<CMatrix> {
    let n = sys.n();
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    let p = panels.max(1);
    for k in 0..p {
        let a = win.lo() + win.delta * k as f64 / p as f64;
        let b = win.lo() + win.delta * (k + 1) as f64 / p as f64;
        let (x, w) = gauss_legendre(a, b, 16);
        nodes.extend(x);
        weights.extend(w);
    }
    let dens = gamma_density(sys, model, &nodes, opts)?;
    let mut acc = CMatrix::zeros(n, n);
    for (i, w) in weights.iter().enumerate() {
        acc += dens.value(i) * C64::new(*w, 0.0);
    }
    Ok(hermitian_part(&acc))
}

/// Result of [`stieltjes_invert_window`].
#[derive(Debug, Clone)]
pub struct WindowInversion {
    pub e_s: CMatrix,
    /// set when the window reaches the edge of the spectral support
    pub edge_warning: bool,
}

/// e_S(Δ) = lim_{δ→0} π^{-1} ∫_Δ Im f(λ + iδ) dλ: Gauss–Legendre in λ at δ ∈ {h, h/2, h/4},
/// then quadratic Richardson extrapolation in δ.
pub fn stieltjes_invert_window(sys: &SystemSpec, nu: &Nu, win: &EnergyWindow, h: f64, opts: &SolverOptions) -> Result<WindowInversion> {
    let n = sys.n();
    let (xs, ws) = gauss_legendre(win.lo(), win.hi(), 24);
    let mut per_delta = Vec::new();
    let mut prev_row: Option<Vec<CMatrix>> = None;
    let mut end_mass = (0.0, 0.0, 0.0f64);
    for (k, d) in [h, h / 2.0, h / 4.0].iter().enumerate() {
        let mut acc = CMatrix::zeros(n, n);
        let mut row = Vec::new();
        for (i, (x, w)) in xs.iter().zip(&ws).enumerate() {
            let z = C64::new(*x, *d);
            let sol = match &prev_row {
                Some(r) => solve_halfplane_from(sys, nu, z, opts, Some(&r[i]))?,
                None if i > 0 => solve_halfplane_from(sys, nu, z, opts, Some(&row[i - 1]))
                    .or_else(|_| solve_halfplane(sys, nu, z, opts))?,
                None => solve_halfplane(sys, nu, z, opts)?,
            };
            let g = imag_part(&sol.value.value) / C64::new(PI, 0.0);
            if k == 2 {
                let tr = crate::numerics::trace(&g).re;
                if i == 0 {
                    end_mass.0 = tr;
                }
                if i == xs.len() - 1 {
                    end_mass.1 = tr;
                }
                end_mass.2 = end_mass.2.max(tr);
            }
            acc += g * C64::new(*w, 0.0);
            row.push(sol.value.value);
        }
        prev_row = Some(row);
        per_delta.push(acc);
    }
    let e = (&per_delta[2] * C64::new(8.0, 0.0) - &per_delta[1] * C64::new(6.0, 0.0) + &per_delta[0]) / C64::new(3.0, 0.0);
    let edge = end_mass.0.min(end_mass.1) < 1e-3 * end_mass.2;
    Ok(WindowInversion { e_s: hermitian_part(&e), edge_warning: edge })
}
