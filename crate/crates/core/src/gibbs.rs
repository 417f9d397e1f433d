//! Limiting reduced density matrix, its Gibbs limit in J, and the canonical average.

use crate::ensemble::{fit_slope, trace_distance, DensityMatrix, SystemSpec};
use crate::error::{Error, Result};
use crate::numerics::{hermitian_eig, hermitian_part, op_norm, trace, CMatrix, HermitianMatrix, C64};
use crate::reservoir::ReservoirModel;
use crate::selfconsistent::{gauss_legendre, gamma_density, require_j0, shift_for, solve_real_axis_with, SolverOptions};
use crate::thermo::{log_darwin_fowler_mu, saddle_beta};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// e^{-βH_S}/Tr e^{-βH_S}.
pub fn gibbs_reference(h_s: &HermitianMatrix, beta: f64) -> Result<DensityMatrix> {
    let eig = hermitian_eig(h_s)?;
    // shift by the ground energy (β ≥ 0) or top energy (β < 0) to avoid overflow
    let shift = if beta >= 0.0 { eig.values[0] } else { *eig.values.last().unwrap() };
    let m = eig.apply_fn(|h| C64::new((-beta * (h - shift)).exp(), 0.0));
    DensityMatrix::from_unnormalized(&m)
}

/// Unnormalized e^{-βH_S}.
pub fn boltzmann_matrix(h_s: &HermitianMatrix, beta: f64) -> Result<CMatrix> {
    Ok(hermitian_eig(h_s)?.apply_fn(|h| C64::new((-beta * h).exp(), 0.0)))
}

/// ρ̂_J(E) = γ_J(E)/Tr γ_J(E).
pub fn reduced_dm_limit(sys: &SystemSpec, model: &ReservoirModel, e: f64, opts: &SolverOptions) -> Result<DensityMatrix> {
    require_j0(model)?;
    let sol = solve_real_axis_with(sys, model, e, opts, shift_for(sys, model, e), None)?;
    let g = hermitian_part(&sol.gamma_scaled());
    // support test on γ/e^{J s}, which stays O(J^{-1/2}) where γ itself underflows
    if !(trace(&g).re > 1e-14) {
        return Err(Error::Domain(format!("E = {e} is outside the spectral support (Tr γ ≈ 0)")));
    }
    DensityMatrix::from_unnormalized(&g)
}

/// One row of a Gibbs scan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GibbsScanRow {
    #[serde(rename = "J")]
    pub j: u32,
    pub trace_distance: f64,
    /// γ_J(Jε)/μ_J(ε), row-major (re, im)
    pub ratio_re: Vec<f64>,
    pub ratio_im: Vec<f64>,
    /// ‖γ_J(Jε)/μ_J(ε) - e^{-βH_S}‖ (operator norm)
    pub ratio_deviation: f64,
    /// ρ̂_J(Jε), row-major (re, im)
    pub rho_re: Vec<f64>,
    pub rho_im: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GibbsReport {
    #[serde(rename = "J_list")]
    pub j_list: Vec<u32>,
    pub epsilon: f64,
    pub beta: f64,
    pub trace_distances: Vec<f64>,
    /// least-squares slope of log D_J against log J over the last three J
    pub fitted_rate: f64,
    pub rows: Vec<GibbsScanRow>,
}

fn row_major(m: &CMatrix) -> (Vec<f64>, Vec<f64>) {
    let n = m.nrows();
    ((0..n * n).map(|k| m[(k / n, k % n)].re).collect(), (0..n * n).map(|k| m[(k / n, k % n)].im).collect())
}

/// D_J between ρ̂_J(Jε) and the Gibbs state at β(ε) for each J, plus the ratio γ_J(Jε)/μ_J(ε).
/// The family and ε come from `model`; its J is replaced by each entry of `j_list`.
pub fn gibbs_ratio_scan(sys: &SystemSpec, model: &ReservoirModel, epsilon: f64, j_list: &[u32], opts: &SolverOptions) -> Result<GibbsReport> {
    let beta = saddle_beta(model, epsilon)?;
    let gibbs = gibbs_reference(&sys.h_s, beta)?;
    let boltz = boltzmann_matrix(&sys.h_s, beta)?;
    for &j in j_list {
        require_j0(&model.with_j(j))?;
    }
    let rows: Vec<Result<GibbsScanRow>> = j_list
        .par_iter()
        .map(|&j| {
            let m = model.with_j(j);
            let e = j as f64 * epsilon;
            let sol = solve_real_axis_with(sys, &m, e, opts, beta, None)?;
            let g = hermitian_part(&sol.gamma_scaled());
            let rho = DensityMatrix::from_unnormalized(&g)?;
            let d = trace_distance(rho.matrix(), gibbs.matrix());
            let log_mu = log_darwin_fowler_mu(model, epsilon, j)?;
            let ratio = &g * C64::new((sol.log_kappa - log_mu).exp(), 0.0);
            let (ratio_re, ratio_im) = row_major(&ratio);
            let (rho_re, rho_im) = row_major(rho.matrix());
            Ok(GibbsScanRow {
                j,
                trace_distance: d,
                ratio_deviation: op_norm(&(&ratio - &boltz)),
                ratio_re,
                ratio_im,
                rho_re,
                rho_im,
                iterations: sol.iterations,
                residual: sol.residual,
            })
        })
        .collect();
    let rows: Vec<GibbsScanRow> = rows.into_iter().collect::<Result<_>>()?;
    let trace_distances: Vec<f64> = rows.iter().map(|r| r.trace_distance).collect();
    let tail = rows.len().saturating_sub(3);
    let xs: Vec<f64> = rows[tail..].iter().map(|r| (r.j as f64).ln()).collect();
    let ys: Vec<f64> = rows[tail..].iter().map(|r| r.trace_distance.max(1e-300).ln()).collect();
    Ok(GibbsReport { j_list: j_list.to_vec(), epsilon, beta, trace_distances, fitted_rate: fit_slope(&xs, &ys), rows })
}

/// Output of [`canonical_reduced_dm`].
#[derive(Debug, Clone)]
pub struct CanonicalResult {
    pub rho: DensityMatrix,
    /// ε-window used for the quadrature
    pub window: (f64, f64),
    /// relative weight of the integrand at the window ends
    pub edge_weight: f64,
}

/// ∫e^{-βE}γ_J(E)dE / ∫e^{-βE}Tr γ_J(E)dE by direct quadrature in ε = E/J with the weight
/// e^{-J(βε - s(ε))} (exact at finite J; no saddle-point approximation).
pub fn canonical_reduced_dm(sys: &SystemSpec, model: &ReservoirModel, beta: f64, j: u32, opts: &SolverOptions) -> Result<CanonicalResult> {
    let m = model.with_j(j);
    require_j0(&m)?;
    let n = sys.n();
    let jf = j as f64;
    let (lam, lam1, lam2) = model.log_laplace(beta)?;
    let eps_star = -lam1;
    let sd = (lam2 / jf).sqrt();
    let spread = (op_norm(sys.h_s.matrix()) + 2.0 * op_norm(sys.sigma.matrix()).powi(2)) / jf;
    let (slo, shi) = model.block_support();
    let mut half = 9.0 * sd + 2.0 * spread;
    for _attempt in 0..3 {
        let lo = (eps_star - half).max(slo + 1e-9 * (1.0 + slo.abs()));
        let hi = (eps_star + half).min(shi - 1e-9 * (1.0 + shi.abs()));
        let panels = 8;
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for k in 0..panels {
            let a = lo + (hi - lo) * k as f64 / panels as f64;
            let b = lo + (hi - lo) * (k + 1) as f64 / panels as f64;
            let (x, w) = gauss_legendre(a, b, 12);
            nodes.extend(x);
            weights.extend(w);
        }
        let energies: Vec<f64> = nodes.iter().map(|e| jf * e).collect();
        let dens = gamma_density(sys, &m, &energies, opts)?;
        // log of e^{-βE} e^{J s(ε)} relative to its peak -J(-Λ(β))
        let mut acc = CMatrix::zeros(n, n);
        let mut contrib = Vec::with_capacity(nodes.len());
        for (i, (&eps, &w)) in nodes.iter().zip(&weights).enumerate() {
            let log_w = -beta * jf * eps + dens.log_scale[i] - jf * lam;
            let term = &dens.scaled[i] * C64::new(log_w.exp() * w * jf, 0.0);
            contrib.push(trace(&term).re.abs() / w);
            acc += term;
        }
        let peak = contrib.iter().cloned().fold(0.0, f64::max).max(1e-300);
        // an end clipped to the support edge cannot be widened further
        let lo_edge = if lo <= slo + 1e-6 * (1.0 + slo.abs()) { 0.0 } else { contrib[0] / peak };
        let hi_edge = if hi >= shi - 1e-6 * (1.0 + shi.abs()) { 0.0 } else { contrib[contrib.len() - 1] / peak };
        let edge = lo_edge.max(hi_edge);
        if edge < 1e-10 {
            return Ok(CanonicalResult { rho: DensityMatrix::from_unnormalized(&hermitian_part(&acc))?, window: (lo, hi), edge_weight: edge });
        }
        half *= 1.6;
    }
    Err(Error::Numerical(format!("canonical quadrature window truncates mass: edge weight above 1e-10 after widening (half-width {half:.3e})")))
}
