//! Reservoir density of states as a J-fold convolution of a single-block density q.

use crate::error::{Error, Result};
use crate::numerics::{integrate, integrate_decaying, integrate_finite, C64};
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand::SeedableRng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use std::f64::consts::PI;
use std::path::Path;

/// Single-block density sampled on a uniform grid; linear between nodes, zero outside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tabulated {
    energies: Vec<f64>,
    density: Vec<f64>,
}

impl Tabulated {
    pub fn new(energies: Vec<f64>, density: Vec<f64>) -> Result<Self> {
        if energies.len() != density.len() || energies.len() < 2 {
            return Err(Error::InvalidModel("tabulated density needs >= 2 (energy, density) pairs".into()));
        }
        if energies.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidModel("tabulated energies must be strictly increasing".into()));
        }
        let h = energies[1] - energies[0];
        if energies.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-6 * h) {
            return Err(Error::InvalidModel("tabulated energies must be uniformly spaced".into()));
        }
        if density.iter().any(|q| !q.is_finite() || *q < 0.0) {
            return Err(Error::InvalidModel("tabulated density must be finite and nonnegative".into()));
        }
        let mass: f64 = energies.windows(2).zip(density.windows(2)).map(|(e, q)| 0.5 * (e[1] - e[0]) * (q[0] + q[1])).sum();
        if (mass - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidModel(format!("tabulated density not normalized: trapezoid mass {mass:.12}")));
        }
        Ok(Tabulated { energies, density })
    }

    /// Reads a two-column text file (energy, density); '#' starts a comment.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut es = Vec::new();
        let mut qs = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
            if cols.len() != 2 {
                return Err(Error::Config(format!("line {}: expected two columns", ln + 1)));
            }
            let parse = |s: &str| s.parse::<f64>().map_err(|_| Error::Config(format!("line {}: bad number '{s}'", ln + 1)));
            es.push(parse(cols[0])?);
            qs.push(parse(cols[1])?);
        }
        Self::new(es, qs)
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    fn eval(&self, e: f64) -> f64 {
        let n = self.energies.len();
        if e < self.energies[0] || e > self.energies[n - 1] {
            return 0.0;
        }
        let h = self.energies[1] - self.energies[0];
        let k = (((e - self.energies[0]) / h).floor() as usize).min(n - 2);
        let u = (e - self.energies[k]) / h;
        self.density[k] * (1.0 - u) + self.density[k + 1] * u
    }

    /// ∫ e^{-iεt} q(ε) dε, exact for the piecewise-linear interpolant; t may be complex.
    fn transform(&self, t: C64) -> C64 {
        let w = C64::new(0.0, -1.0) * t;
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..self.energies.len() - 1 {
            let (e0, e1) = (self.energies[k], self.energies[k + 1]);
            let h = e1 - e0;
            let (q0, q1) = (self.density[k], self.density[k + 1]);
            let wh = w * h;
            // I0 = ∫_0^h e^{wu} du, I1 = ∫_0^h u e^{wu} du
            let (i0, i1) = if wh.norm() < 1e-3 {
                let mut i0 = C64::new(0.0, 0.0);
                let mut i1 = C64::new(0.0, 0.0);
                let mut p = C64::new(1.0, 0.0);
                let mut fact = 1.0;
                for m in 0..8 {
                    i0 += p * h / (fact * (m as f64 + 1.0));
                    i1 += p * h * h / (fact * (m as f64 + 2.0));
                    p *= wh;
                    fact *= m as f64 + 1.0;
                }
                (i0, i1)
            } else {
                let ewh = wh.exp();
                let i0 = (ewh - 1.0) / w;
                let i1 = ewh * h / w - (ewh - 1.0) / (w * w);
                (i0, i1)
            };
            acc += (w * e0).exp() * (i0 * q0 + i1 * ((q1 - q0) / h));
        }
        acc
    }

    fn mean(&self) -> f64 {
        let mut acc = 0.0;
        for k in 0..self.energies.len() - 1 {
            let (e0, e1) = (self.energies[k], self.energies[k + 1]);
            let (q0, q1) = (self.density[k], self.density[k + 1]);
            let h = e1 - e0;
            // ∫ ε q over a linear piece
            acc += h * (q0 * (2.0 * e0 + e1) + q1 * (e0 + 2.0 * e1)) / 6.0;
        }
        acc
    }

    fn total_variation(&self) -> f64 {
        let n = self.density.len();
        self.density[0] + self.density[n - 1] + self.density.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>()
    }
}

/// Single-block density family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Family {
    /// Normal density with mean eps0 and standard deviation a.
    Gaussian { eps0: f64, a: f64 },
    /// e^{-ε/eps0}/eps0 on ε ≥ 0.
    Exponential { eps0: f64 },
    /// d-fold convolution of the arcsine density on [0, eps0].
    Lattice { d: u32, eps0: f64 },
    Tabulated(Tabulated),
}

/// ν_J = q^{*J}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReservoirModel {
    pub family: Family,
    pub j: u32,
}

/// Level placement for finite-N reservoirs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LevelMode {
    Quantile,
    Iid,
}

/// Result of [`check_conditions`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub a_exponent: f64,
    pub hausdorff_young_j0: f64,
    pub left_tail_superexponential: bool,
    pub char_fn_gap: f64,
    /// ∫q^a for the chosen exponent (an upper bound for lattice d ≥ 2).
    pub lq_integral: f64,
    /// (candidate a, ∫q^a or None when divergent)
    pub candidates: Vec<(f64, Option<f64>)>,
}

impl ConditionReport {
    /// Upper bound on ∫|φ|^{J0} dt from the Hausdorff–Young inequality.
    pub fn hausdorff_young_bound(&self) -> f64 {
        // ∫_R |φ|^{p'} ≤ 2π ‖q‖_p^{p'} for φ(t) = ∫ e^{-iεt} q; half of it on [0, ∞)
        let j0 = self.hausdorff_young_j0;
        PI * self.lq_integral.powf(j0 / self.a_exponent)
    }
}

fn lattice_nodes(t_abs: f64, eps0: f64) -> usize {
    48 + (0.6 * t_abs * eps0 * 0.5).ceil() as usize
}

/// (1/π)∫_0^π g(x(θ)) dθ with x(θ) = eps0 (1 - cos θ)/2, trapezoid rule (spectrally accurate here).
fn arcsine_average(eps0: f64, nodes: usize, mut g: impl FnMut(f64) -> C64) -> C64 {
    let h = PI / nodes as f64;
    let mut acc = C64::new(0.0, 0.0);
    for k in 0..=nodes {
        let th = k as f64 * h;
        let x = 0.5 * eps0 * (1.0 - th.cos());
        let w = if k == 0 || k == nodes { 0.5 } else { 1.0 };
        acc += g(x) * w;
    }
    acc / nodes as f64
}

/// Complete elliptic integral of the first kind K(k) from the complementary modulus
/// k' = √(1 - k²), via the arithmetic-geometric mean.
fn ellip_k(kp: f64) -> f64 {
    let mut a = 1.0f64;
    let mut b = kp.abs();
    if b == 0.0 {
        return f64::INFINITY;
    }
    for _ in 0..60 {
        let an = 0.5 * (a + b);
        let bn = (a * b).sqrt();
        a = an;
        b = bn;
        if (a - b).abs() < 1e-16 * a {
            break;
        }
    }
    PI / (2.0 * a)
}

impl ReservoirModel {
    pub fn new(family: Family, j: u32) -> Result<Self> {
        if j < 1 {
            return Err(Error::InvalidModel("J must be >= 1".into()));
        }
        match &family {
            Family::Gaussian { eps0, a } => {
                if !eps0.is_finite() || !(a.is_finite() && *a > 0.0) {
                    return Err(Error::InvalidModel("gaussian needs finite eps0 and a > 0".into()));
                }
            }
            Family::Exponential { eps0 } => {
                if !(eps0.is_finite() && *eps0 > 0.0) {
                    return Err(Error::InvalidModel("exponential needs eps0 > 0".into()));
                }
            }
            Family::Lattice { d, eps0 } => {
                if *d < 1 || !(eps0.is_finite() && *eps0 > 0.0) {
                    return Err(Error::InvalidModel("lattice needs d >= 1 and eps0 > 0".into()));
                }
            }
            Family::Tabulated(_) => {}
        }
        Ok(ReservoirModel { family, j })
    }

    pub fn gaussian(eps0: f64, a: f64, j: u32) -> Result<Self> {
        Self::new(Family::Gaussian { eps0, a }, j)
    }

    pub fn exponential(eps0: f64, j: u32) -> Result<Self> {
        Self::new(Family::Exponential { eps0 }, j)
    }

    pub fn lattice(d: u32, eps0: f64, j: u32) -> Result<Self> {
        Self::new(Family::Lattice { d, eps0 }, j)
    }

    pub fn with_j(&self, j: u32) -> Self {
        ReservoirModel { family: self.family.clone(), j }
    }

    /// Mean of the single-block density.
    pub fn block_mean(&self) -> f64 {
        match &self.family {
            Family::Gaussian { eps0, .. } => *eps0,
            Family::Exponential { eps0 } => *eps0,
            Family::Lattice { d, eps0 } => *d as f64 * eps0 / 2.0,
            Family::Tabulated(t) => t.mean(),
        }
    }

    /// Closed support of q (infinite ends allowed).
    pub fn block_support(&self) -> (f64, f64) {
        match &self.family {
            Family::Gaussian { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Family::Exponential { .. } => (0.0, f64::INFINITY),
            Family::Lattice { d, eps0 } => (0.0, *d as f64 * eps0),
            Family::Tabulated(t) => (t.energies[0], *t.energies.last().unwrap()),
        }
    }

    /// Lower end of the β-domain where ψ(β) is finite (exclusive).
    pub fn beta_lower_bound(&self) -> f64 {
        match &self.family {
            Family::Exponential { eps0 } => -1.0 / eps0,
            _ => f64::NEG_INFINITY,
        }
    }

    /// Variance of the single-block density.
    pub fn block_variance(&self) -> f64 {
        self.log_laplace(0.0).map(|(_, _, l2)| l2).unwrap_or(f64::NAN)
    }

    /// φ(t) = ∫ e^{-iεt} q(ε) dε for complex t (analytic continuation where finite).
    pub fn char_fn_complex(&self, t: C64) -> Result<C64> {
        let mi = C64::new(0.0, -1.0);
        match &self.family {
            Family::Gaussian { eps0, a } => Ok((mi * t * *eps0 - t * t * (a * a / 2.0)).exp()),
            Family::Exponential { eps0 } => {
                let den = C64::new(1.0, 0.0) + C64::new(0.0, 1.0) * t * *eps0;
                if den.re <= 0.0 {
                    return Err(Error::Domain(format!("exponential transform diverges at t = {t}")));
                }
                Ok(den.inv())
            }
            Family::Lattice { d, eps0 } => {
                let nodes = lattice_nodes(t.norm(), *eps0);
                let p1 = arcsine_average(*eps0, nodes, |x| (mi * t * x).exp());
                Ok(p1.powu(*d))
            }
            Family::Tabulated(tab) => Ok(tab.transform(t)),
        }
    }

    /// φ(t) of a single block for real t.
    pub fn char_fn(&self, t: f64) -> Result<C64> {
        if !t.is_finite() {
            return Err(Error::Domain("char_fn needs finite t".into()));
        }
        self.char_fn_complex(C64::new(t, 0.0))
    }

    /// ψ(β) = ∫ e^{-βε} q(ε) dε.
    pub fn laplace_fn(&self, beta: f64) -> Result<f64> {
        let (l, _, _) = self.log_laplace(beta)?;
        let v = l.exp();
        if !v.is_finite() {
            return Err(Error::Domain(format!("psi({beta}) overflows")));
        }
        Ok(v)
    }

    /// (Λ, Λ', Λ'') with Λ = log ψ. Analytic for closed forms, tilted moments otherwise.
    pub fn log_laplace(&self, beta: f64) -> Result<(f64, f64, f64)> {
        if !beta.is_finite() {
            return Err(Error::Domain("beta must be finite".into()));
        }
        match &self.family {
            Family::Gaussian { eps0, a } => {
                let a2 = a * a;
                Ok((-beta * eps0 + 0.5 * beta * beta * a2, -eps0 + beta * a2, a2))
            }
            Family::Exponential { eps0 } => {
                let u = 1.0 + beta * eps0;
                if u <= 0.0 {
                    return Err(Error::Domain(format!("psi diverges for beta = {beta} <= -1/eps0 = {}", -1.0 / eps0)));
                }
                Ok((-u.ln(), -eps0 / u, eps0 * eps0 / (u * u)))
            }
            Family::Lattice { d, eps0 } => {
                // moments of x(θ) under the weight e^{-β(x - x_ref)}
                let x_ref = if beta >= 0.0 { 0.0 } else { *eps0 };
                let nodes = 64 + (12.0 * (beta.abs() * eps0).sqrt()).ceil() as usize;
                let h = PI / nodes as f64;
                let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
                for k in 0..=nodes {
                    let th = k as f64 * h;
                    let x = 0.5 * eps0 * (1.0 - th.cos());
                    let w = if k == 0 || k == nodes { 0.5 } else { 1.0 };
                    let e = w * (-beta * (x - x_ref)).exp();
                    m0 += e;
                    m1 += e * x;
                    m2 += e * x * x;
                }
                let mean = m1 / m0;
                let var = (m2 / m0 - mean * mean).max(0.0);
                let l1 = (m0 / nodes as f64).ln() - beta * x_ref;
                let d = *d as f64;
                Ok((d * l1, -d * mean, d * var))
            }
            Family::Tabulated(t) => {
                let shift = if beta >= 0.0 { t.energies[0] } else { *t.energies.last().unwrap() };
                let bp = t.energies.clone();
                let r = integrate(
                    |e: f64| {
                        let w = t.eval(e) * (-beta * (e - shift)).exp();
                        vec![w, w * e, w * e * e]
                    },
                    &bp,
                    0.0,
                    1e-13,
                    100_000,
                );
                let (m0, m1, m2) = (r.value[0], r.value[1], r.value[2]);
                if !(m0 > 0.0) {
                    return Err(Error::Domain("tabulated psi vanished".into()));
                }
                let mean = m1 / m0;
                Ok((m0.ln() - beta * shift, -mean, (m2 / m0 - mean * mean).max(0.0)))
            }
        }
    }

    /// Single-block density q(ε).
    pub fn block_density(&self, e: f64) -> Result<f64> {
        match &self.family {
            Family::Gaussian { eps0, a } => Ok((-(e - eps0).powi(2) / (2.0 * a * a)).exp() / ((2.0 * PI).sqrt() * a)),
            Family::Exponential { eps0 } => Ok(if e < 0.0 { 0.0 } else { (-e / eps0).exp() / eps0 }),
            Family::Lattice { d, eps0 } => ReservoirModel::lattice(1, *eps0, *d)?.dos(e),
            Family::Tabulated(t) => Ok(t.eval(e)),
        }
    }

    /// ν_J(E). Gaussian: closed form. Lattice with dJ ≤ 2: closed forms (arcsine, elliptic K).
    /// Otherwise Fourier inversion of φ^J along the line Im t = -β through the saddle point,
    /// which keeps the integrand free of the exponentially small prefactor e^{J s(E/J)}.
    pub fn dos(&self, e: f64) -> Result<f64> {
        Ok(self.dos_with_error(e)?.0)
    }

    /// ν_J(E) together with the estimated absolute error.
    pub fn dos_with_error(&self, e: f64) -> Result<(f64, f64)> {
        let jf = self.j as f64;
        match &self.family {
            Family::Gaussian { eps0, a } => {
                let var = jf * a * a;
                Ok(((-(e - jf * eps0).powi(2) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt(), 0.0))
            }
            Family::Lattice { d, eps0 } if d * self.j <= LATTICE_DIRECT_MAX => Ok(lattice_direct(d * self.j, *eps0, e, 1e-10)),
            _ => self.dos_fourier(e),
        }
    }

    fn dos_fourier(&self, e: f64) -> Result<(f64, f64)> {
        let jf = self.j as f64;
        let eps = e / jf;
        let (lo, hi) = self.block_support();
        if eps <= lo || eps >= hi {
            return Ok((0.0, 0.0));
        }
        let beta = crate::thermo::saddle_beta(self, eps).unwrap_or(0.0);
        let (lam, _, lam2) = self.log_laplace(beta)?;
        let log_scale = jf * (beta * eps + lam);
        let psi_b = lam.exp();
        let j = self.j;
        let chi = |u: f64| -> Result<C64> {
            let p = self.char_fn_complex(C64::new(u, -beta))? / psi_b;
            Ok(p * C64::new(0.0, u * eps).exp())
        };
        let tol = 1e-11 * (2.0 * PI * jf * lam2).sqrt().recip().max(1e-3);
        let mut err: Option<Error> = None;
        let r = integrate_decaying(
            |u| match chi(u) {
                Ok(c) => c.powu(j).re,
                Err(x) => {
                    err.get_or_insert(x);
                    0.0
                }
            },
            |u| chi(u).map(|c| c.norm().powi(j as i32)).unwrap_or(0.0),
            1.0,
            tol,
        )
        .map_err(|x| match x {
            Error::NotIntegrable(_) => Error::JBelowJ0 { j: self.j, j0: f64::NAN },
            other => other,
        })?;
        if let Some(x) = err {
            return Err(x);
        }
        let scale = log_scale.exp() / PI;
        let v = (r.value * scale).max(0.0);
        Ok((v, r.error * scale))
    }

    /// CDF of ν_J at E.
    pub fn cdf(&self, e: f64) -> Result<f64> {
        let jf = self.j as f64;
        match &self.family {
            Family::Gaussian { eps0, a } => {
                let n = Normal::new(jf * eps0, a * jf.sqrt()).map_err(|x| Error::InvalidModel(x.to_string()))?;
                Ok(n.cdf(e))
            }
            Family::Exponential { eps0 } => {
                let g = statrs::distribution::Gamma::new(jf, 1.0 / eps0).map_err(|x| Error::InvalidModel(x.to_string()))?;
                Ok(if e <= 0.0 { 0.0 } else { g.cdf(e) })
            }
            Family::Lattice { d, eps0 } if d * self.j == 1 => {
                Ok(if e <= 0.0 {
                    0.0
                } else if e >= *eps0 {
                    1.0
                } else {
                    2.0 / PI * (e / eps0).sqrt().asin()
                })
            }
            _ => {
                let (lo, hi) = self.support();
                if e <= lo {
                    return Ok(0.0);
                }
                if e >= hi {
                    return Ok(1.0);
                }
                let mid = 0.5 * (lo + hi);
                let dens = |x: f64| self.dos(x).unwrap_or(0.0);
                if e <= mid {
                    Ok(integrate_finite(dens, lo, e, 1e-12).value.clamp(0.0, 1.0))
                } else {
                    Ok((1.0 - integrate_finite(dens, e, hi, 1e-12).value).clamp(0.0, 1.0))
                }
            }
        }
    }

    /// Support of ν_J; for unbounded families a window holding all but ~1e-12 of the mass.
    pub fn support(&self) -> (f64, f64) {
        let jf = self.j as f64;
        match &self.family {
            Family::Gaussian { eps0, a } => (jf * eps0 - 7.5 * a * jf.sqrt(), jf * eps0 + 7.5 * a * jf.sqrt()),
            Family::Exponential { eps0 } => {
                // Gamma(J) tail: mean J eps0, sd sqrt(J) eps0
                (0.0, eps0 * (jf + 12.0 * jf.sqrt() + 40.0))
            }
            _ => {
                let (lo, hi) = self.block_support();
                (jf * lo, jf * hi)
            }
        }
    }

    /// Quantile of ν_J.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!("quantile level {p} outside [0,1]")));
        }
        let jf = self.j as f64;
        match &self.family {
            Family::Gaussian { eps0, a } => {
                let n = Normal::new(jf * eps0, a * jf.sqrt()).map_err(|x| Error::InvalidModel(x.to_string()))?;
                Ok(n.inverse_cdf(p))
            }
            Family::Lattice { d, eps0 } if d * self.j == 1 => Ok(eps0 * (PI * p / 2.0).sin().powi(2)),
            _ => {
                let (mut lo, mut hi) = self.support();
                // bisection on the CDF
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.cdf(mid)? < p {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo < 1e-13 * (1.0 + mid.abs()) {
                        break;
                    }
                }
                Ok(0.5 * (lo + hi))
            }
        }
    }

    /// Finite-N reservoir levels: deterministic quantiles (k - 1/2)/N or iid draws from ν_J.
    pub fn sample_levels(&self, n: usize, mode: LevelMode, seed: u64) -> Result<Vec<f64>> {
        if n < 1 {
            return Err(Error::Domain("N must be >= 1".into()));
        }
        match mode {
            LevelMode::Quantile => self.quantiles(n),
            LevelMode::Iid => {
                let mut rng = ChaCha20Rng::seed_from_u64(seed);
                (0..n).map(|_| self.draw(&mut rng)).collect()
            }
        }
    }

    fn quantiles(&self, n: usize) -> Result<Vec<f64>> {
        let levels: Vec<f64> = (1..=n).map(|k| (k as f64 - 0.5) / n as f64).collect();
        match &self.family {
            Family::Gaussian { .. } | Family::Exponential { .. } => levels.iter().map(|&p| self.quantile(p)).collect(),
            Family::Lattice { d, .. } if d * self.j == 1 => levels.iter().map(|&p| self.quantile(p)).collect(),
            _ => {
                // tabulate the CDF once, then invert by monotone interpolation and refine
                let (lo, hi) = self.support();
                let m = 4096;
                let xs: Vec<f64> = (0..=m).map(|i| lo + (hi - lo) * i as f64 / m as f64).collect();
                let mut cdf = vec![0.0; m + 1];
                for i in 0..m {
                    let piece = integrate_finite(|x| self.dos(x).unwrap_or(0.0), xs[i], xs[i + 1], 1e-13).value;
                    cdf[i + 1] = cdf[i] + piece;
                }
                let total = cdf[m];
                if !(total > 0.5) {
                    return Err(Error::Numerical("quantile inversion: CDF table lost mass".into()));
                }
                levels
                    .iter()
                    .map(|&p| {
                        let target = p * total;
                        let i = cdf.partition_point(|&c| c < target).clamp(1, m);
                        let (c0, c1) = (cdf[i - 1], cdf[i]);
                        let mut a = xs[i - 1];
                        let mut b = xs[i];
                        // bisection on the local piece for accuracy
                        for _ in 0..60 {
                            let mid = 0.5 * (a + b);
                            let c = c0 + integrate_finite(|x| self.dos(x).unwrap_or(0.0), xs[i - 1], mid, 1e-14).value;
                            if c < target {
                                a = mid;
                            } else {
                                b = mid;
                            }
                            if b - a < 1e-12 * (1.0 + mid.abs()) {
                                break;
                            }
                        }
                        let _ = c1;
                        Ok(0.5 * (a + b))
                    })
                    .collect()
            }
        }
    }

    fn draw(&self, rng: &mut ChaCha20Rng) -> Result<f64> {
        let jf = self.j as f64;
        match &self.family {
            Family::Gaussian { eps0, a } => {
                let z: f64 = StandardNormal.sample(rng);
                Ok(jf * eps0 + a * jf.sqrt() * z)
            }
            Family::Exponential { eps0 } => {
                let g = Gamma::new(jf, *eps0).map_err(|x| Error::InvalidModel(x.to_string()))?;
                Ok(g.sample(rng))
            }
            Family::Lattice { d, eps0 } => {
                let mut s = 0.0;
                for _ in 0..d * self.j {
                    let u: f64 = rng.random();
                    s += 0.5 * eps0 * (1.0 - (PI * u).cos());
                }
                Ok(s)
            }
            Family::Tabulated(t) => {
                let block = ReservoirModel { family: Family::Tabulated(t.clone()), j: 1 };
                let mut s = 0.0;
                for _ in 0..self.j {
                    let u: f64 = rng.random();
                    s += block.tabulated_quantile(t, u);
                }
                Ok(s)
            }
        }
    }

    fn tabulated_quantile(&self, t: &Tabulated, p: f64) -> f64 {
        // exact inversion of the piecewise-quadratic CDF
        let mut acc = 0.0;
        for k in 0..t.energies.len() - 1 {
            let h = t.energies[k + 1] - t.energies[k];
            let (q0, q1) = (t.density[k], t.density[k + 1]);
            let piece = 0.5 * h * (q0 + q1);
            if acc + piece >= p || k == t.energies.len() - 2 {
                let r = (p - acc).max(0.0);
                // solve q0 u + (q1 - q0) u²/(2h) = r for u in [0, h]
                let s = (q1 - q0) / h;
                let u = if s.abs() < 1e-300 {
                    if q0 > 0.0 { r / q0 } else { 0.0 }
                } else {
                    let disc = (q0 * q0 + 2.0 * s * r).max(0.0);
                    2.0 * r / (q0 + disc.sqrt()).max(1e-300)
                };
                return t.energies[k] + u.clamp(0.0, h);
            }
            acc += piece;
        }
        *t.energies.last().unwrap()
    }
}

/// ∫q^a dε for one exponent; None when the integral diverges.
fn lq_integral(model: &ReservoirModel, a: f64) -> Option<f64> {
    match &model.family {
        Family::Gaussian { a: s, .. } => Some(a.powf(-0.5) * (2.0 * PI * s * s).powf((1.0 - a) / 2.0)),
        Family::Exponential { eps0 } => Some(eps0.powf(1.0 - a) / a),
        Family::Lattice { d, eps0 } => {
            let arcsine = |p: f64| -> Option<f64> {
                // (1/π)(2/(π eps0))^{p-1} ∫_0^π sin^{1-p}θ dθ, finite iff p < 2
                if p >= 2.0 {
                    return None;
                }
                let m = 1.0 - p;
                let lg = statrs::function::gamma::ln_gamma;
                let sin_int = PI.sqrt() * (lg((m + 1.0) / 2.0) - lg(m / 2.0 + 1.0)).exp();
                Some((2.0 / (PI * eps0)).powf(p - 1.0) * sin_int / PI)
            };
            if *d == 1 {
                arcsine(a)
            } else {
                // Young: ‖q1*q1‖_a ≤ ‖q1‖_p² with 2/p = 1 + 1/a; further convolutions do not increase the norm
                let p = 2.0 * a / (a + 1.0);
                arcsine(p).map(|v| v.powf(2.0 * a / p))
            }
        }
        Family::Tabulated(t) => {
            let r = integrate(|e| t.eval(e).powf(a), &t.energies, 0.0, 1e-12, 100_000);
            Some(r.value)
        }
    }
}

/// Regularity report: largest feasible a ≤ 2 among the candidates, J0 = a/(a-1),
/// and sup_{t ≥ t0}|φ(t)| from a dense scan plus an analytic tail bound.
pub fn check_conditions(model: &ReservoirModel, a_candidates: &[f64], t0: f64) -> Result<ConditionReport> {
    if !(t0 > 0.0) {
        return Err(Error::Domain("t0 must be > 0".into()));
    }
    let candidates: Vec<(f64, Option<f64>)> = a_candidates
        .iter()
        .filter(|&&a| a > 1.0 && a <= 2.0)
        .map(|&a| (a, lq_integral(model, a).filter(|v| v.is_finite())))
        .collect();
    let best = candidates
        .iter()
        .filter_map(|(a, v)| v.map(|v| (*a, v)))
        .max_by(|x, y| x.0.total_cmp(&y.0))
        .ok_or_else(|| Error::InvalidModel("no feasible exponent a > 1: ∫q^a diverges for all candidates".into()))?;
    let left_tail = [1.0, 10.0, 100.0].iter().all(|&b| model.log_laplace(b).map(|l| l.0.is_finite()).unwrap_or(false));
    let gap = char_fn_gap(model, t0)?;
    Ok(ConditionReport {
        a_exponent: best.0,
        hausdorff_young_j0: best.0 / (best.0 - 1.0),
        left_tail_superexponential: left_tail,
        char_fn_gap: gap,
        lq_integral: best.1,
        candidates,
    })
}

/// Default exponent candidates for [`check_conditions`].
pub const DEFAULT_A_CANDIDATES: [f64; 4] = [2.0, 1.5, 1.25, 1.1];

fn char_fn_gap(model: &ReservoirModel, t0: f64) -> Result<f64> {
    match &model.family {
        Family::Gaussian { a, .. } => Ok((-a * a * t0 * t0 / 2.0).exp()),
        Family::Exponential { eps0 } => Ok(1.0 / (1.0 + eps0 * eps0 * t0 * t0).sqrt()),
        Family::Lattice { d, eps0 } => {
            // |J0(x)| ≤ sqrt(2/(πx)) bounds |φ| by (4/(π eps0 t))^{d/2}
            let bound = |t: f64| (4.0 / (PI * eps0 * t)).powf(*d as f64 / 2.0);
            scan_sup(model, t0, 0.05 / eps0, bound)
        }
        Family::Tabulated(tab) => {
            let width = tab.energies.last().unwrap() - tab.energies[0];
            let tv = tab.total_variation();
            scan_sup(model, t0, 0.1 / width, |t| tv / t)
        }
    }
}

fn scan_sup(model: &ReservoirModel, t0: f64, step: f64, tail_bound: impl Fn(f64) -> f64) -> Result<f64> {
    let absphi = |t: f64| model.char_fn(t).map(|c| c.norm());
    let mut best = absphi(t0)?;
    let mut t = t0;
    let mut prev = best;
    let mut rising = false;
    while tail_bound(t) > best {
        let tn = t + step;
        let v = absphi(tn)?;
        if v < prev && rising {
            // refine the local maximum in [t - step, tn]
            let (mut a, mut b) = (t - step, tn);
            for _ in 0..60 {
                let m1 = a + (b - a) * 0.381966;
                let m2 = a + (b - a) * 0.618034;
                if absphi(m1)? > absphi(m2)? {
                    b = m2;
                } else {
                    a = m1;
                }
            }
            best = best.max(absphi(0.5 * (a + b))?);
        }
        rising = v > prev;
        best = best.max(v);
        prev = v;
        t = tn;
        if t > 1e7 {
            break;
        }
    }
    Ok(best)
}

/// Brute-force check helper: ∫ ν_J over its support.
pub fn total_mass(model: &ReservoirModel) -> Result<f64> {
    let (lo, hi) = model.support();
    let pieces = 64;
    let mut acc = 0.0;
    for i in 0..pieces {
        let a = lo + (hi - lo) * i as f64 / pieces as f64;
        let b = lo + (hi - lo) * (i + 1) as f64 / pieces as f64;
        acc += integrate_finite(|x| model.dos(x).unwrap_or(0.0), a, b, 1e-12).value;
    }
    Ok(acc)
}

/// Above this total order the lattice density is obtained by Fourier inversion;
/// below, the slowly decaying |φ|^m makes direct convolution cheaper.
const LATTICE_DIRECT_MAX: u32 = 8;

/// Density of the sum of m independent arcsine variables on [0, eps0]:
/// closed forms for m ≤ 2, otherwise one convolution p_m = p_a * p_b with a, b ≤ 4.
fn lattice_direct(m: u32, eps0: f64, e: f64, rel: f64) -> (f64, f64) {
    if e <= 0.0 || e >= m as f64 * eps0 {
        return (0.0, 0.0);
    }
    match m {
        1 => (1.0 / (PI * (e * (eps0 - e)).sqrt()), 0.0),
        2 => {
            // density of eps0 - (eps0/2)(cos θ1 + cos θ2)
            let c = 2.0 * (eps0 - e) / eps0;
            (2.0 / eps0 * ellip_k(0.5 * c) / (PI * PI), 0.0)
        }
        3 | 5 => {
            // p_{m-1} * p_1 with x = eps0(1 - cos θ)/2 absorbing the arcsine weight
            let mut bps = vec![0.0, PI];
            for k in 0..m {
                let y = e - k as f64 * eps0;
                if y > 0.0 && y < eps0 {
                    bps.push((1.0 - 2.0 * y / eps0).acos());
                }
            }
            bps.sort_by(|a, b| a.total_cmp(b));
            let r = integrate(|th: f64| lattice_direct(m - 1, eps0, e - 0.5 * eps0 * (1.0 - th.cos()), 1e-3 * rel).0, &bps, 0.0, rel, 4_000);
            (r.value / PI, r.error / PI)
        }
        _ => {
            let a = if m == 4 { 2 } else { 4 };
            let b = m - a;
            let lo = (e - b as f64 * eps0).max(0.0);
            let hi = (a as f64 * eps0).min(e);
            // kinks and log singularities sit where either argument is a multiple of eps0
            let mut bps = vec![lo, hi];
            for k in 0..=m {
                for x in [k as f64 * eps0, e - k as f64 * eps0] {
                    if x > lo && x < hi {
                        bps.push(x);
                    }
                }
            }
            bps.sort_by(|a, b| a.total_cmp(b));
            let r = integrate(
                |x: f64| lattice_direct(a, eps0, x, 1e-3 * rel).0 * lattice_direct(b, eps0, e - x, 1e-3 * rel).0,
                &bps,
                0.0,
                rel,
                4_000,
            );
            (r.value, r.error)
        }
    }
}
