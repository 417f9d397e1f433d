//! Matrix fixed-point equation for the limiting partial-trace resolvent f_S(z)
//! and its inversion to the spectral density γ_J(E).

mod density;
mod halfplane;
mod realaxis;

pub use density::*;
pub use halfplane::*;
pub use realaxis::*;

use crate::error::{Error, Result};
use crate::numerics::{imag_part, op_norm, CMatrix, C64};
use crate::reservoir::{Family, ReservoirModel};
use serde::{Deserialize, Serialize};

/// n×n value of f_S at z.
#[derive(Debug, Clone, PartialEq)]
pub struct HerglotzMatrix {
    pub z: C64,
    pub value: CMatrix,
}

/// Damped fixed-point settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-10, max_iter: 2000, damping: 0.5 }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        SolverOptions { tol, ..Default::default() }
    }
}

/// Reservoir density ν entering the half-plane equation.
#[derive(Debug, Clone, PartialEq)]
pub enum Nu {
    /// Σ_k w_k δ(E - E_k)
    Delta { points: Vec<f64>, weights: Vec<f64> },
    /// Normal density
    Gaussian { mean: f64, sd: f64 },
    /// ν_J of a convolution model, integrated through its characteristic function
    Model(ReservoirModel),
    /// Density sampled on an increasing grid, linear in between
    Tabulated { grid: Vec<f64>, values: Vec<f64> },
}

impl Nu {
    pub fn delta(e0: f64) -> Self {
        Nu::Delta { points: vec![e0], weights: vec![1.0] }
    }

    /// Gaussian models map to the closed form; other families keep their transform.
    pub fn from_model(model: &ReservoirModel) -> Self {
        match &model.family {
            Family::Gaussian { eps0, a } => {
                let j = model.j as f64;
                Nu::Gaussian { mean: j * eps0, sd: a * j.sqrt() }
            }
            _ => Nu::Model(model.clone()),
        }
    }

    pub fn tabulated(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() != values.len() || grid.len() < 2 || grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidModel("tabulated nu needs an increasing grid with matching values".into()));
        }
        Ok(Nu::Tabulated { grid, values })
    }

    /// ν(E) for continuous densities (None for δ-mixtures).
    pub fn density(&self, e: f64) -> Option<f64> {
        match self {
            Nu::Delta { .. } => None,
            Nu::Gaussian { mean, sd } => {
                Some((-(e - mean).powi(2) / (2.0 * sd * sd)).exp() / ((2.0 * std::f64::consts::PI).sqrt() * sd))
            }
            Nu::Model(m) => m.dos(e).ok(),
            Nu::Tabulated { grid, values } => {
                if e < grid[0] || e > *grid.last().unwrap() {
                    return Some(0.0);
                }
                let k = grid.partition_point(|&g| g <= e).clamp(1, grid.len() - 1);
                let u = (e - grid[k - 1]) / (grid[k] - grid[k - 1]);
                Some(values[k - 1] * (1.0 - u) + values[k] * u)
            }
        }
    }
}

/// Summary of a Herglotz check over a z-grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HerglotzReport {
    /// min over the grid of the smallest eigenvalue of (f - f†)/(2i)
    pub min_imag_eigenvalue: f64,
    /// max over the grid of ‖f‖·Im z
    pub max_norm_times_imz: f64,
    pub positive: bool,
    pub bounded: bool,
}

/// Checks positivity of Im f and ‖f‖ ≤ 1/Im z along a trace of solutions.
pub fn herglotz_verify(trace: &[HerglotzMatrix]) -> HerglotzReport {
    let mut min_eig = f64::INFINITY;
    let mut max_norm = 0.0f64;
    for h in trace {
        let im = imag_part(&h.value);
        let e = im.symmetric_eigenvalues();
        min_eig = min_eig.min(e.iter().cloned().fold(f64::INFINITY, f64::min));
        max_norm = max_norm.max(op_norm(&h.value) * h.z.im);
    }
    HerglotzReport {
        min_imag_eigenvalue: min_eig,
        max_norm_times_imz: max_norm,
        positive: min_eig >= -1e-12,
        bounded: max_norm <= 1.0 + 1e-9,
    }
}

fn max_entry(m: &CMatrix) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}
