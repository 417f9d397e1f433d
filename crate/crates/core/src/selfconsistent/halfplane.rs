use super::{max_entry, HerglotzMatrix, Nu, SolverOptions};
use crate::ensemble::SystemSpec;
use crate::error::{Error, Result};
use crate::numerics::{integrate, integrate_decaying, op_norm, CMatrix, C64};

/// Converged half-plane solution.
#[derive(Debug, Clone)]
pub struct HalfPlaneSolution {
    pub value: HerglotzMatrix,
    pub iterations: usize,
    pub residual: f64,
    /// number of continuation rungs (1 = cold start at the target)
    pub rungs: usize,
}

/// Damped iteration f ← f + ω(Φ(f) - f), ω halved whenever the residual grows.
/// Returns the last iterate, its residual ‖f - Φ(f)‖ (max entry) and the iteration count.
pub(crate) fn damped_fixed_point(
    start: CMatrix,
    mut phi: impl FnMut(&CMatrix) -> Result<CMatrix>,
    opts: &SolverOptions,
) -> Result<(CMatrix, f64, usize)> {
    let mut f = start;
    let mut omega = opts.damping;
    let mut prev = f64::INFINITY;
    for it in 0..opts.max_iter {
        let pf = phi(&f)?;
        let step = &pf - &f;
        let r = max_entry(&step);
        if !r.is_finite() {
            return Err(Error::NoConvergence { iterations: it, residual: r });
        }
        if r <= opts.tol {
            return Ok((f, r, it + 1));
        }
        if r > prev {
            omega *= 0.5;
        } else if r < 0.5 * prev {
            // fast contraction: undamp toward the plain iteration
            omega = (omega * 1.5).min(1.0);
        }
        prev = r;
        f += step * C64::new(omega, 0.0);
    }
    Err(Error::NoConvergence { iterations: opts.max_iter, residual: prev })
}

/// Φ(f)(z) = ∫ (E + H_S - z - Σ f Σ)^{-1} ν(dE).
pub fn phi_map(sys: &SystemSpec, nu: &Nu, z: C64, f: &CMatrix, tol: f64) -> Result<CMatrix> {
    let n = sys.n();
    let hs = sys.h_s.matrix();
    let sg = sys.sigma.matrix();
    let a = hs - CMatrix::identity(n, n) * z - sg * f * sg;
    let inv_at = |e: f64| -> Result<CMatrix> {
        let m = &a + CMatrix::identity(n, n) * C64::new(e, 0.0);
        m.try_inverse().ok_or_else(|| Error::Numerical(format!("singular resolvent at E = {e}")))
    };
    match nu {
        Nu::Delta { points, weights } => {
            let mut acc = CMatrix::zeros(n, n);
            for (e, w) in points.iter().zip(weights) {
                acc += inv_at(*e)? * C64::new(*w, 0.0);
            }
            Ok(acc)
        }
        Nu::Gaussian { mean, sd } => {
            let lo = mean - 7.2 * sd;
            let hi = mean + 7.2 * sd;
            let mut bps = vec![lo, hi];
            // split near the real parts of the poles
            let herm = crate::numerics::hermitian_part(&a);
            for ev in herm.symmetric_eigenvalues().iter() {
                let p = -ev;
                if p > lo && p < hi {
                    bps.push(p);
                }
            }
            for k in 1..8 {
                bps.push(lo + (hi - lo) * k as f64 / 8.0);
            }
            bps.sort_by(|x, y| x.total_cmp(y));
            let norm = 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * sd);
            let mut err = None;
            let r = integrate(
                |e: f64| {
                    let w = norm * (-(e - mean).powi(2) / (2.0 * sd * sd)).exp();
                    match inv_at(e) {
                        Ok(m) => m * C64::new(w, 0.0),
                        Err(x) => {
                            err.get_or_insert(x);
                            CMatrix::zeros(n, n)
                        }
                    }
                },
                &bps,
                0.02 * tol,
                0.0,
                20_000,
            );
            if let Some(x) = err {
                return Err(x);
            }
            Ok(r.value)
        }
        Nu::Tabulated { grid, values } => {
            let nu2 = nu.clone();
            let mut err = None;
            let r = integrate(
                |e: f64| {
                    let w = nu2.density(e).unwrap_or(0.0);
                    match inv_at(e) {
                        Ok(m) => m * C64::new(w, 0.0),
                        Err(x) => {
                            err.get_or_insert(x);
                            CMatrix::zeros(n, n)
                        }
                    }
                },
                grid,
                0.02 * tol,
                0.0,
                200_000,
            );
            let _ = values;
            if let Some(x) = err {
                return Err(x);
            }
            Ok(r.value)
        }
        Nu::Model(model) => {
            // (B - z)^{-1} = ±i ∫_0^∞ e^{∓it(B - z)} dt for ±Im z > 0, with ∫ e^{∓itE} ν = φ(±t)^J
            let htilde = hs - sg * f * sg;
            let sgn = if z.im > 0.0 { 1.0 } else { -1.0 };
            let j = model.j;
            let eta = z.im.abs();
            let mut err = None;
            let r = integrate_decaying(
                |t: f64| {
                    let res = (|| -> Result<CMatrix> {
                        let ph = model.char_fn(sgn * t)?.powu(j);
                        let m = crate::numerics::matrix_exp(&(&htilde * C64::new(0.0, -sgn * t)))?;
                        let phase = (C64::new(0.0, sgn * t) * z).exp();
                        Ok(m * (ph * phase * C64::new(0.0, sgn)))
                    })();
                    res.unwrap_or_else(|x| {
                        err.get_or_insert(x);
                        CMatrix::zeros(n, n)
                    })
                },
                |t: f64| model.char_fn(t).map(|c| c.norm().powi(j as i32)).unwrap_or(1.0) * (-eta * t).exp(),
                1.0,
                0.02 * tol,
            )?;
            if let Some(x) = err {
                return Err(x);
            }
            Ok(r.value)
        }
    }
}

/// Solves f = Φ(f) at z (Im z ≠ 0). Cold start when |Im z| > ‖Σ‖²; otherwise continuation
/// down a geometric ladder in |Im z| from max(1, 2‖Σ‖²), warm-starting each rung.
pub fn solve_halfplane(sys: &SystemSpec, nu: &Nu, z: C64, opts: &SolverOptions) -> Result<HalfPlaneSolution> {
    solve_halfplane_from(sys, nu, z, opts, None)
}

/// As [`solve_halfplane`] with an optional initial guess; a guess skips the ladder.
pub fn solve_halfplane_from(
    sys: &SystemSpec,
    nu: &Nu,
    z: C64,
    opts: &SolverOptions,
    guess: Option<&CMatrix>,
) -> Result<HalfPlaneSolution> {
    if z.im == 0.0 || !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::Domain("solve_halfplane needs Im z != 0".into()));
    }
    let n = sys.n();
    let s2 = op_norm(sys.sigma.matrix()).powi(2);
    let eta = z.im.abs();
    let sgn = z.im.signum();
    let mut rungs = vec![];
    if guess.is_none() && eta <= s2 {
        let mut e = 1.0f64.max(2.0 * s2);
        while e > eta {
            rungs.push(e);
            e *= 0.5;
        }
    }
    rungs.push(eta);
    let mut f = guess.cloned().unwrap_or_else(|| CMatrix::zeros(n, n));
    let mut total = 0;
    let mut residual = 0.0;
    for &e in &rungs {
        let zz = C64::new(z.re, sgn * e);
        let qtol = opts.tol;
        let (sol, r, it) = damped_fixed_point(f, |g| phi_map(sys, nu, zz, g, qtol), opts)?;
        f = sol;
        total += it;
        residual = r;
    }
    Ok(HalfPlaneSolution { value: HerglotzMatrix { z, value: f }, iterations: total, residual, rungs: rungs.len() })
}

/// Real-axis value by Richardson extrapolation of half-plane solves at E + iδ, δ ∈ {h, h/2, h/4}.
pub fn solve_real_axis_extrapolated(sys: &SystemSpec, nu: &Nu, e: f64, h: f64, opts: &SolverOptions) -> Result<CMatrix> {
    let f1 = solve_halfplane(sys, nu, C64::new(e, h), opts)?.value.value;
    let f2 = solve_halfplane_from(sys, nu, C64::new(e, h / 2.0), opts, Some(&f1))?.value.value;
    let f4 = solve_halfplane_from(sys, nu, C64::new(e, h / 4.0), opts, Some(&f2))?.value.value;
    Ok((f4 * C64::new(8.0, 0.0) - f2 * C64::new(6.0, 0.0) + f1) / C64::new(3.0, 0.0))
}
