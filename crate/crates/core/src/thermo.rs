//! Saddle-point thermodynamics of a convolution reservoir.
//!
//! Sign convention: Λ = log ψ, β solves ε = -Λ'(β), s(ε) = εβ + Λ(β) ≤ 0 and
//! μ_J(ε) = (2πJΛ''(β))^{-1/2} e^{J s(ε)}, which reproduces the Gaussian ν_J(Jε) exactly.

use crate::error::{Error, Result};
use crate::reservoir::ReservoirModel;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermoPoint {
    pub epsilon: f64,
    pub beta: f64,
    pub entropy_rate: f64,
    pub lambda2: f64,
    pub mu_j: f64,
}

fn check_attainable(model: &ReservoirModel, epsilon: f64) -> Result<()> {
    let (lo, hi) = model.block_support();
    if !epsilon.is_finite() || epsilon <= lo || epsilon >= hi {
        return Err(Error::Domain(format!(
            "epsilon = {epsilon} outside the attainable range ({lo}, {hi}) of -Λ'"
        )));
    }
    Ok(())
}

/// Unique β with -Λ'(β) = ε: Newton from β = 0 safeguarded by a doubling bracket.
pub fn saddle_beta(model: &ReservoirModel, epsilon: f64) -> Result<f64> {
    check_attainable(model, epsilon)?;
    let tol = 1e-12 * epsilon.abs().max(1.0);
    // g(β) = -Λ'(β) - ε is strictly decreasing
    let g = |b: f64| -> Result<(f64, f64)> {
        let (_, l1, l2) = model.log_laplace(b)?;
        Ok((-l1 - epsilon, l2))
    };
    let (g0, _) = g(0.0)?;
    if g0.abs() <= tol {
        return Ok(0.0);
    }
    let lower = model.beta_lower_bound();
    let (mut lo, mut hi);
    if g0 > 0.0 {
        // root at β > 0
        lo = 0.0;
        hi = 1.0 / model.block_variance().sqrt().max(1e-300);
        let mut k = 0;
        while g(hi)?.0 > 0.0 {
            lo = hi;
            hi *= 2.0;
            k += 1;
            if k > 200 {
                return Err(Error::Domain(format!("no saddle point for epsilon = {epsilon}")));
            }
        }
    } else {
        hi = 0.0;
        lo = -1.0 / model.block_variance().sqrt().max(1e-300);
        let mut k = 0;
        loop {
            if lo <= lower {
                lo = 0.5 * (hi + lower);
            }
            if g(lo)?.0 > 0.0 {
                break;
            }
            hi = lo;
            lo = if lower.is_finite() { 0.5 * (lo + lower) } else { 2.0 * lo };
            k += 1;
            if k > 200 {
                return Err(Error::Domain(format!("no saddle point for epsilon = {epsilon}")));
            }
        }
    }
    let mut b = if lo <= 0.0 && 0.0 <= hi { 0.0 } else { 0.5 * (lo + hi) };
    for _ in 0..200 {
        let (gv, d) = g(b)?;
        if gv.abs() <= tol {
            // one last Newton step polishes β below the ε-tolerance
            return Ok(if d > 0.0 { b + gv / d } else { b });
        }
        if gv > 0.0 {
            lo = b;
        } else {
            hi = b;
        }
        let newton = b + gv / d;
        b = if d > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= 1e-15 * b.abs().max(1e-300) {
            return Ok(b);
        }
    }
    let (gv, _) = g(b)?;
    if gv.abs() <= 1e3 * tol {
        Ok(b)
    } else {
        Err(Error::NoConvergence { iterations: 200, residual: gv.abs() })
    }
}

/// s(ε) = εβ + Λ(β) at the saddle β.
pub fn entropy_rate(model: &ReservoirModel, epsilon: f64) -> Result<f64> {
    let b = saddle_beta(model, epsilon)?;
    let (l, _, _) = model.log_laplace(b)?;
    Ok(epsilon * b + l)
}

/// Full thermodynamic point at ε for block count J.
pub fn thermo_point(model: &ReservoirModel, epsilon: f64, j: u32) -> Result<ThermoPoint> {
    let b = saddle_beta(model, epsilon)?;
    let (l, _, l2) = model.log_laplace(b)?;
    let s = epsilon * b + l;
    let jf = j as f64;
    Ok(ThermoPoint {
        epsilon,
        beta: b,
        entropy_rate: s,
        lambda2: l2,
        mu_j: (2.0 * PI * jf * l2).powf(-0.5) * (jf * s).exp(),
    })
}

/// Darwin–Fowler density μ_J(ε) approximating ν_J(Jε).
pub fn darwin_fowler_mu(model: &ReservoirModel, epsilon: f64, j: u32) -> Result<f64> {
    Ok(thermo_point(model, epsilon, j)?.mu_j)
}

/// log μ_J(ε), safe where μ_J underflows.
pub fn log_darwin_fowler_mu(model: &ReservoirModel, epsilon: f64, j: u32) -> Result<f64> {
    let p = thermo_point(model, epsilon, j)?;
    let jf = j as f64;
    Ok(-0.5 * (2.0 * PI * jf * p.lambda2).ln() + jf * p.entropy_rate)
}

/// Q(ε) = e^{-βε} q(ε)/ψ(β) on the grid.
pub fn tilted_density(model: &ReservoirModel, beta: f64, grid: &[f64]) -> Result<Vec<f64>> {
    let (l, _, _) = model.log_laplace(beta)?;
    grid.iter()
        .map(|&e| {
            let q = model.block_density(e)?;
            Ok(if q == 0.0 { 0.0 } else { q * (-beta * e - l).exp() })
        })
        .collect()
}

/// (Z_J, f) with Z_J = ψ(β)^J and f = -β^{-1} log ψ(β); f is None at β = 0.
pub fn free_energy(model: &ReservoirModel, beta: f64, j: u32) -> Result<(f64, Option<f64>)> {
    let (l, _, _) = model.log_laplace(beta)?;
    let z = (j as f64 * l).exp();
    let f = if beta == 0.0 { None } else { Some(-l / beta) };
    Ok((z, f))
}
