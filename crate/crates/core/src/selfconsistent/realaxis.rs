//! Real-axis boundary value f_S(E + i0) from the Fourier form
//! f = ∫_0^∞ i e^{it(E - H̃)} φ(t)^J dt, H̃ = H_S - Σ f Σ.
//!
//! The t-path is deformed to 0 → -iβ → -iβ + ∞ with β the saddle point of E/J.
//! Along the second leg the integrand carries the factor κ = e^{J s(E/J)}, which is
//! also the scale of Im f; keeping κ symbolic lets Im f be resolved when it is far
//! below double-precision resolution of Re f. Unknowns are X = Re f and Ỹ = Im f / κ.

use super::halfplane::damped_fixed_point;
use super::{HerglotzMatrix, SolverOptions};
use crate::ensemble::SystemSpec;
use crate::error::{Error, Result};
use crate::numerics::{hermitian_part, imag_part, integrate, integrate_decaying, matrix_exp, op_norm, CMatrix, C64};
use crate::reservoir::{check_conditions, ReservoirModel, DEFAULT_A_CANDIDATES};

/// Converged real-axis solution in scaled form: f = X + iκỸ with κ = e^{log_kappa}.
#[derive(Debug, Clone)]
pub struct RealAxisSolution {
    pub energy: f64,
    pub x: CMatrix,
    pub y_scaled: CMatrix,
    pub log_kappa: f64,
    /// depth of the contour shift
    pub beta_shift: f64,
    pub iterations: usize,
    pub residual: f64,
    /// truncation point of the u-integral along the shifted leg
    pub truncation: f64,
    pub quad_error: f64,
}

impl RealAxisSolution {
    /// f_S(E) (Im part underflows to 0 when κ does).
    pub fn value(&self) -> HerglotzMatrix {
        let k = self.log_kappa.exp();
        HerglotzMatrix { z: C64::new(self.energy, 0.0), value: &self.x + &self.y_scaled * C64::new(0.0, k) }
    }

    /// Im f_S(E) = κỸ.
    pub fn imag(&self) -> CMatrix {
        &self.y_scaled * C64::new(self.log_kappa.exp(), 0.0)
    }

    /// γ(E)/κ = Ỹ/π.
    pub fn gamma_scaled(&self) -> CMatrix {
        &self.y_scaled / C64::new(std::f64::consts::PI, 0.0)
    }

    /// γ(E) = Im f/π.
    pub fn gamma(&self) -> CMatrix {
        self.gamma_scaled() * C64::new(self.log_kappa.exp(), 0.0)
    }
}

/// Requires J ≥ J0 from the regularity report; returns J0.
pub fn require_j0(model: &ReservoirModel) -> Result<f64> {
    let rep = check_conditions(model, &DEFAULT_A_CANDIDATES, 1.0)?;
    if (model.j as f64) < rep.hausdorff_young_j0 - 1e-12 {
        return Err(Error::JBelowJ0 { j: model.j, j0: rep.hausdorff_young_j0 });
    }
    Ok(rep.hausdorff_young_j0)
}

/// 0, ±1, ±2, ±4, … up to β: the leg-0 integrand varies on scale 1/‖H̃‖ near 0 and on
/// scale |β|/√J near the saddle, so deep shifts need geometric panels.
fn leg0_breakpoints(beta: f64) -> Vec<f64> {
    let mut bp = vec![0.0];
    let mut t = 1.0;
    while t < beta.abs() {
        bp.push(t * beta.signum());
        t *= 2.0;
    }
    bp.push(beta);
    bp
}

/// Envelope widths of χ^J allowed per unit of system energy scale on the shifted leg.
const MAX_LEG_WIDTH: f64 = 100.0;

/// Contour-shift depth for E: the saddle point of E/J, or 0 outside the attainable range.
/// Near a support edge the saddle runs off to |β| → ∞ and the shifted leg's envelope
/// (width ≈ 1/√(JΛ″(β))) grows without bound; β is then pulled back toward 0 until that width
/// is at most `MAX_LEG_WIDTH` oscillation periods of e^{-iuH̃}. The result stays exact
/// (κ is carried symbolically) but loses relative accuracy deep in the tail.
pub fn shift_for(sys: &SystemSpec, model: &ReservoirModel, e: f64) -> f64 {
    let saddle = crate::thermo::saddle_beta(model, e / model.j as f64).unwrap_or(0.0);
    let scale = 1.0 + op_norm(sys.h_s.matrix()) + 2.0 * op_norm(sys.sigma.matrix()).powi(2);
    let width = |b: f64| match model.log_laplace(b) {
        Ok((_, _, l2)) if l2 > 0.0 => 1.0 / (model.j as f64 * l2).sqrt(),
        _ => f64::INFINITY,
    };
    let mut b = saddle;
    while b.abs() > 1.0 && width(b) * scale > MAX_LEG_WIDTH {
        b *= 0.5;
    }
    b
}

/// Solves the real-axis equation at E after checking J ≥ J0.
pub fn solve_real_axis(sys: &SystemSpec, model: &ReservoirModel, e: f64, opts: &SolverOptions) -> Result<RealAxisSolution> {
    require_j0(model)?;
    solve_real_axis_with(sys, model, e, opts, shift_for(sys, model, e), None)
}

/// Real-axis solve with an explicit shift depth β and optional warm start (X, Ỹ).
/// Skips the J0 check.
pub fn solve_real_axis_with(
    sys: &SystemSpec,
    model: &ReservoirModel,
    e: f64,
    opts: &SolverOptions,
    beta: f64,
    guess: Option<(&CMatrix, &CMatrix)>,
) -> Result<RealAxisSolution> {
    let n = sys.n();
    let j = model.j;
    let jf = j as f64;
    let eps = e / jf;
    let (lam_b, _, _) = model.log_laplace(beta)?;
    let log_kappa = jf * (beta * eps + lam_b);
    let kappa = log_kappa.exp();
    let psi_b = lam_b.exp();
    let hs = sys.h_s.matrix().clone();
    let sg = sys.sigma.matrix().clone();

    let mut last_trunc = 0.0;
    let mut last_err = 0.0;
    let mut phi = |state: &CMatrix| -> Result<CMatrix> {
        let x = state.rows(0, n).into_owned();
        let y = state.rows(n, n).into_owned();
        let r = &hs - &sg * &x * &sg;
        let itil = &sg * &y * &sg;
        let htilde = &r - &itil * C64::new(0.0, kappa);
        let tol = 0.02 * opts.tol;

        // leg 0 → -iβ: ∫ w e^{-τH̃} dτ with w = e^{J(τε + Λ(τ))}. Its Hermitian part is
        // G0 = Herm ∫ w e^{-τH̃†}; its anti-Hermitian part is exactly iκ C1 with
        // C1 = ∫ w D(τ) dτ, D = ∫_0^τ e^{-(τ-u)H̃†} Ĩ e^{-uH̃} du (block exponential)
        let (g0, c1) = if beta != 0.0 {
            let mut block = CMatrix::zeros(2 * n, 2 * n);
            block.view_mut((0, 0), (n, n)).copy_from(&(-htilde.adjoint()));
            block.view_mut((0, n), (n, n)).copy_from(&itil);
            block.view_mut((n, n), (n, n)).copy_from(&(-&htilde));
            let mut err = None;
            let res = integrate(
                |tau: f64| {
                    let out = (|| -> Result<CMatrix> {
                        let (lt, _, _) = model.log_laplace(tau)?;
                        let w = (jf * (tau * eps + lt)).exp();
                        let ex = matrix_exp(&(&block * C64::new(tau, 0.0)))?;
                        let mut o = CMatrix::zeros(2 * n, n);
                        o.rows_mut(0, n).copy_from(&(ex.view((0, 0), (n, n)) * C64::new(w, 0.0)));
                        o.rows_mut(n, n).copy_from(&(ex.view((0, n), (n, n)) * C64::new(w, 0.0)));
                        Ok(o)
                    })();
                    out.unwrap_or_else(|x| {
                        err.get_or_insert(x);
                        CMatrix::zeros(2 * n, n)
                    })
                },
                &leg0_breakpoints(beta),
                tol,
                1e-13,
                20_000,
            );
            if let Some(x) = err {
                return Err(x);
            }
            (res.value.rows(0, n).into_owned(), res.value.rows(n, n).into_owned())
        } else {
            (CMatrix::zeros(n, n), CMatrix::zeros(n, n))
        };

        // leg -iβ → -iβ + ∞: K = ∫ i e^{-iuH̃} χ(u)^J du, χ(u) = e^{iuε} φ(u - iβ)/ψ(β)
        let chi = |u: f64| -> Result<C64> {
            Ok(model.char_fn_complex(C64::new(u, -beta))? / psi_b * C64::new(0.0, u * eps).exp())
        };
        let mut err = None;
        let k = integrate_decaying(
            |u: f64| {
                let out = (|| -> Result<CMatrix> {
                    let c = chi(u)?.powu(j);
                    let ex = matrix_exp(&(&htilde * C64::new(0.0, -u)))?;
                    Ok(ex * (c * C64::new(0.0, 1.0)))
                })();
                out.unwrap_or_else(|x| {
                    err.get_or_insert(x);
                    CMatrix::zeros(n, n)
                })
            },
            |u: f64| chi(u).map(|c| c.norm().powi(j as i32)).unwrap_or(1.0),
            1.0,
            tol,
        )
        .map_err(|x| match x {
            Error::NotIntegrable(_) => Error::JBelowJ0 { j, j0: f64::NAN },
            other => other,
        })?;
        if let Some(x) = err {
            return Err(x);
        }
        last_trunc = k.truncation;
        last_err = k.error;
        let m2 = matrix_exp(&(&htilde * C64::new(-beta, 0.0)))? * k.value;

        let y_new = hermitian_part(&c1) + imag_part(&m2);
        let x_new = hermitian_part(&g0) + hermitian_part(&m2) * C64::new(kappa, 0.0);
        let mut out = CMatrix::zeros(2 * n, n);
        out.rows_mut(0, n).copy_from(&hermitian_part(&x_new));
        out.rows_mut(n, n).copy_from(&y_new);
        Ok(out)
    };

    let mut start = CMatrix::zeros(2 * n, n);
    if let Some((x0, y0)) = guess {
        start.rows_mut(0, n).copy_from(x0);
        start.rows_mut(n, n).copy_from(y0);
    }
    let (sol, residual, iterations) = damped_fixed_point(start, &mut phi, opts)?;
    Ok(RealAxisSolution {
        energy: e,
        x: sol.rows(0, n).into_owned(),
        y_scaled: sol.rows(n, n).into_owned(),
        log_kappa,
        beta_shift: beta,
        iterations,
        residual,
        truncation: last_trunc,
        quad_error: last_err,
    })
}
