//! Finite-N Monte Carlo: GUE interaction, composite Hamiltonian, reduced density matrices.

use crate::error::{Error, Result};
use crate::numerics::{hermitian_eig, CMatrix, EigenDecomposition, HermitianMatrix, C64};
use crate::reservoir::{LevelMode, ReservoirModel};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Small system: H_S and the coupling shape Σ_S, both n×n Hermitian.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    pub h_s: HermitianMatrix,
    pub sigma: HermitianMatrix,
}

impl SystemSpec {
    pub fn new(h_s: HermitianMatrix, sigma: HermitianMatrix) -> Result<Self> {
        if h_s.dim() != sigma.dim() || h_s.dim() == 0 {
            return Err(Error::Dimension(format!("H_S is {}x{}, Sigma_S is {}x{}", h_s.dim(), h_s.dim(), sigma.dim(), sigma.dim())));
        }
        Ok(SystemSpec { h_s, sigma })
    }

    pub fn n(&self) -> usize {
        self.h_s.dim()
    }
}

#[derive(Debug, Clone)]
pub struct GueSample {
    pub n: usize,
    pub w: HermitianMatrix,
    pub seed: u64,
}

/// Energy shell (E - δ/2, E + δ/2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyWindow {
    pub center: f64,
    pub delta: f64,
}

impl EnergyWindow {
    pub fn new(center: f64, delta: f64) -> Result<Self> {
        if !(delta > 0.0) || !center.is_finite() {
            return Err(Error::Domain(format!("window needs finite center and delta > 0 (got {center}, {delta})")));
        }
        Ok(EnergyWindow { center, delta })
    }

    pub fn contains(&self, x: f64) -> bool {
        x > self.center - 0.5 * self.delta && x < self.center + 0.5 * self.delta
    }

    pub fn lo(&self) -> f64 {
        self.center - 0.5 * self.delta
    }

    pub fn hi(&self) -> f64 {
        self.center + 0.5 * self.delta
    }
}

/// Hermitian, PSD, unit-trace n×n matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    /// Normalizes a Hermitian PSD matrix by its trace.
    pub fn from_unnormalized(m: &CMatrix) -> Result<Self> {
        let tr = crate::numerics::trace(m).re;
        if !(tr > 0.0) || !tr.is_finite() {
            return Err(Error::Numerical(format!("cannot normalize: trace {tr}")));
        }
        let h = crate::numerics::hermitian_part(m) / C64::new(tr, 0.0);
        Ok(DensityMatrix(h))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn min_eigenvalue(&self) -> f64 {
        crate::numerics::min_eig_hermitian(&self.0)
    }

    /// ½ Σ|eig(ρ - σ)|
    pub fn trace_distance(&self, other: &DensityMatrix) -> f64 {
        trace_distance(&self.0, &other.0)
    }
}

/// ½ Σ|eig(a - b)| for Hermitian a, b.
pub fn trace_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    let d = crate::numerics::hermitian_part(&(a - b));
    0.5 * d.symmetric_eigenvalues().iter().map(|x| x.abs()).sum::<f64>()
}

/// W with independent entries for j ≤ k: off-diagonal complex Gaussian, E|W_jk|² = 1;
/// diagonal real Gaussian with variance 2.
pub fn sample_gue(n: usize, seed: u64) -> GueSample {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut w = CMatrix::zeros(n, n);
    let s2 = std::f64::consts::SQRT_2;
    for j in 0..n {
        let d: f64 = StandardNormal.sample(&mut rng);
        w[(j, j)] = C64::new(s2 * d, 0.0);
        for k in j + 1..n {
            let x: f64 = StandardNormal.sample(&mut rng);
            let y: f64 = StandardNormal.sample(&mut rng);
            let z = C64::new(x / s2, y / s2);
            w[(j, k)] = z;
            w[(k, j)] = z.conj();
        }
    }
    GueSample { n, w: HermitianMatrix::from_matrix_unchecked(w), seed }
}

/// H_S ⊗ 1_N + 1_n ⊗ diag(levels) + Σ_S ⊗ W/√N, index (α, j) ↦ αN + j.
pub fn build_composite(sys: &SystemSpec, levels: &[f64], w: &GueSample) -> Result<HermitianMatrix> {
    let n = sys.n();
    let big_n = levels.len();
    if w.n != big_n {
        return Err(Error::Dimension(format!("{} reservoir levels but W is {}x{}", big_n, w.n, w.n)));
    }
    let hs = sys.h_s.matrix();
    let sg = sys.sigma.matrix();
    let wm = w.w.matrix();
    let scale = 1.0 / (big_n as f64).sqrt();
    let dim = n * big_n;
    let mut h = CMatrix::zeros(dim, dim);
    for a in 0..n {
        for b in 0..n {
            let sab = sg[(a, b)] * scale;
            let hab = hs[(a, b)];
            for k in 0..big_n {
                for j in 0..big_n {
                    let mut v = sab * wm[(j, k)];
                    if j == k {
                        v += hab;
                        if a == b {
                            v += C64::new(levels[j], 0.0);
                        }
                    }
                    h[(a * big_n + j, b * big_n + k)] = v;
                }
            }
        }
    }
    Ok(HermitianMatrix::from_matrix_unchecked(h))
}

/// Eigenvalues of a composite Hamiltonian with the n×n partial traces of each eigenprojector,
/// P_k[α][β] = Σ_j v_k(α, j) conj(v_k(β, j)).
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub n: usize,
    pub big_n: usize,
    pub values: Vec<f64>,
    pub overlaps: Vec<CMatrix>,
}

impl SpectralData {
    pub fn from_eig(eig: &EigenDecomposition, n: usize, big_n: usize) -> Result<Self> {
        let dim = eig.values.len();
        if dim != n * big_n {
            return Err(Error::Dimension(format!("spectrum of size {dim} does not factor as {n} x {big_n}")));
        }
        let v = &eig.vectors;
        let overlaps = (0..dim)
            .map(|k| {
                let col = v.column(k);
                CMatrix::from_fn(n, n, |a, b| {
                    let mut acc = C64::new(0.0, 0.0);
                    for j in 0..big_n {
                        acc += col[a * big_n + j] * col[b * big_n + j].conj();
                    }
                    acc
                })
            })
            .collect();
        Ok(SpectralData { n, big_n, values: eig.values.clone(), overlaps })
    }

    pub fn from_hamiltonian(h: &HermitianMatrix, sys: &SystemSpec) -> Result<Self> {
        let n = sys.n();
        if !h.dim().is_multiple_of(n) {
            return Err(Error::Dimension(format!("composite dimension {} not a multiple of n = {n}", h.dim())));
        }
        let eig = hermitian_eig(h)?;
        Self::from_eig(&eig, n, h.dim() / n)
    }

    /// e_S(Δ) and the number of eigenvalues in Δ.
    pub fn window_measure(&self, win: &EnergyWindow) -> (CMatrix, usize) {
        let mut e = CMatrix::zeros(self.n, self.n);
        let mut count = 0;
        let lo = self.values.partition_point(|&x| x <= win.lo());
        for k in lo..self.values.len() {
            if !win.contains(self.values[k]) {
                if self.values[k] >= win.hi() {
                    break;
                }
                continue;
            }
            e += &self.overlaps[k];
            count += 1;
        }
        (e / C64::new(self.big_n as f64, 0.0), count)
    }

    /// ρ = e_S(Δ)/Tr e_S(Δ).
    pub fn reduced_dm(&self, win: &EnergyWindow) -> Result<MicroResult> {
        let (e, count) = self.window_measure(win);
        if count == 0 {
            return Err(Error::EmptyWindow { center: win.center, width: win.delta });
        }
        let rho = DensityMatrix::from_unnormalized(&e)?;
        Ok(MicroResult { rho, e_s_window: crate::numerics::hermitian_part(&e), count })
    }

    /// N^{-1} Tr_R (H - z)^{-1}.
    pub fn resolvent(&self, z: C64) -> Result<CMatrix> {
        if z.im == 0.0 {
            return Err(Error::Domain("resolvent needs Im z != 0".into()));
        }
        let mut g = CMatrix::zeros(self.n, self.n);
        for (k, p) in self.overlaps.iter().enumerate() {
            let w = (C64::new(self.values[k], 0.0) - z).inv();
            g += p * w;
        }
        Ok(g / C64::new(self.big_n as f64, 0.0))
    }

    /// Mean spacing of the composite spectrum near E, from the ±m nearest eigenvalues.
    pub fn local_spacing(&self, e: f64) -> f64 {
        let dim = self.values.len();
        let m = 50.min(dim / 2).max(1);
        let i = self.values.partition_point(|&x| x < e);
        let lo = i.saturating_sub(m);
        let hi = (i + m).min(dim - 1);
        if hi <= lo {
            return 1.0;
        }
        (self.values[hi] - self.values[lo]) / (hi - lo) as f64
    }

    /// δ = 4·spacing·n, widened by 25% steps until the window holds ≥ `min_count` states.
    pub fn default_window(&self, e: f64, min_count: usize) -> Result<EnergyWindow> {
        let mut delta = 4.0 * self.local_spacing(e) * self.n as f64;
        if !(delta > 0.0) {
            delta = 1e-3;
        }
        let span = self.values.last().unwrap() - self.values[0];
        loop {
            let win = EnergyWindow::new(e, delta)?;
            let (_, count) = self.window_measure(&win);
            if count >= min_count.min(self.values.len()) {
                return Ok(win);
            }
            delta *= 1.25;
            if delta > 4.0 * span + 1.0 {
                return Err(Error::EmptyWindow { center: e, width: delta });
            }
        }
    }
}

/// Output of [`reduced_dm_micro`].
#[derive(Debug, Clone)]
pub struct MicroResult {
    pub rho: DensityMatrix,
    pub e_s_window: CMatrix,
    pub count: usize,
}

/// Microcanonical reduced density matrix of the composite H on the window.
pub fn reduced_dm_micro(h: &HermitianMatrix, sys: &SystemSpec, win: &EnergyWindow) -> Result<MicroResult> {
    SpectralData::from_hamiltonian(h, sys)?.reduced_dm(win)
}

/// N^{-1} Tr_R (H - z)^{-1} via the eigendecomposition of H.
pub fn empirical_resolvent(h: &HermitianMatrix, sys: &SystemSpec, z: C64) -> Result<CMatrix> {
    if z.im == 0.0 {
        return Err(Error::Domain("resolvent needs Im z != 0".into()));
    }
    SpectralData::from_hamiltonian(h, sys)?.resolvent(z)
}

/// Seed of realization `index` in stream `stream`: ChaCha20 keyed by the master seed,
/// one stream per (N, realization) pair. Independent of scheduling.
pub fn split_seed(master: u64, stream: u64, index: u64) -> u64 {
    let mut rng = ChaCha20Rng::seed_from_u64(master);
    rng.set_stream(stream.wrapping_shl(32) ^ index);
    rng.next_u64()
}

/// One realization: levels from the model, a fresh GUE sample, and the spectral data.
pub fn run_realization(sys: &SystemSpec, model: &ReservoirModel, big_n: usize, mode: LevelMode, seed: u64) -> Result<SpectralData> {
    let levels = model.sample_levels(big_n, mode, seed ^ 0x9e37_79b9_7f4a_7c15)?;
    run_realization_with_levels(sys, &levels, seed)
}

pub fn run_realization_with_levels(sys: &SystemSpec, levels: &[f64], seed: u64) -> Result<SpectralData> {
    let w = sample_gue(levels.len(), seed);
    let h = build_composite(sys, levels, &w)?;
    drop(w);
    SpectralData::from_hamiltonian(&h, sys)
}

/// Sample variance (unbiased) of each resolvent entry for each N.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelfAveragingRow {
    #[serde(rename = "N")]
    pub big_n: usize,
    /// variance of g_{αβ}, row-major
    pub variance: Vec<f64>,
    pub max_variance: f64,
    /// mean of g_{αβ}, row-major (re, im)
    pub mean_re: Vec<f64>,
    pub mean_im: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelfAveragingTable {
    pub rows: Vec<SelfAveragingRow>,
    /// least-squares slope of log(max variance) against log N
    pub slope: f64,
}

/// Variance scaling of g_{αβ}(z) over `m` realizations per N.
pub fn selfaveraging_study(
    sys: &SystemSpec,
    model: &ReservoirModel,
    z: C64,
    n_list: &[usize],
    m: usize,
    seed: u64,
    mode: LevelMode,
) -> Result<SelfAveragingTable> {
    if m < 8 {
        return Err(Error::Domain(format!("M = {m} realizations is too few for a variance slope (need >= 8)")));
    }
    if z.im == 0.0 {
        return Err(Error::Domain("resolvent needs Im z != 0".into()));
    }
    let n = sys.n();
    let mut rows = Vec::new();
    for (i, &big_n) in n_list.iter().enumerate() {
        let levels = model.sample_levels(big_n, mode, split_seed(seed, i as u64, u32::MAX as u64))?;
        let samples: Vec<Result<CMatrix>> = (0..m)
            .into_par_iter()
            .map(|r| {
                let s = split_seed(seed, i as u64, r as u64);
                let lv = if mode == LevelMode::Iid { model.sample_levels(big_n, mode, s ^ 1)? } else { levels.clone() };
                run_realization_with_levels(sys, &lv, s)?.resolvent(z)
            })
            .collect();
        let samples: Vec<CMatrix> = samples.into_iter().collect::<Result<_>>()?;
        rows.push(variance_table_row(big_n, n, &samples));
    }
    let xs: Vec<f64> = rows.iter().map(|r| (r.big_n as f64).ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.max_variance.max(1e-300).ln()).collect();
    Ok(SelfAveragingTable { slope: fit_slope(&xs, &ys), rows })
}

/// Mean and unbiased variance of each entry over realizations.
pub fn variance_table_row(big_n: usize, n: usize, samples: &[CMatrix]) -> SelfAveragingRow {
    let m = samples.len() as f64;
    let mut mean = CMatrix::zeros(n, n);
    for s in samples {
        mean += s;
    }
    mean /= C64::new(m, 0.0);
    let mut var = vec![0.0; n * n];
    for s in samples {
        for a in 0..n {
            for b in 0..n {
                var[a * n + b] += (s[(a, b)] - mean[(a, b)]).norm_sqr();
            }
        }
    }
    for v in var.iter_mut() {
        *v /= m - 1.0;
    }
    let max_variance = var.iter().cloned().fold(0.0, f64::max);
    SelfAveragingRow {
        big_n,
        max_variance,
        variance: var,
        mean_re: (0..n * n).map(|k| mean[(k / n, k % n)].re).collect(),
        mean_im: (0..n * n).map(|k| mean[(k / n, k % n)].im).collect(),
    }
}

/// Least-squares slope of y against x.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let k = xs.len() as f64;
    if xs.len() < 2 {
        return f64::NAN;
    }
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// JSON record of one realization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McRecord {
    #[serde(rename = "N")]
    pub big_n: usize,
    pub seed: u64,
    pub window: EnergyWindow,
    pub e_s_re: Vec<f64>,
    pub e_s_im: Vec<f64>,
    pub count: usize,
}

impl McRecord {
    pub fn new(big_n: usize, seed: u64, window: EnergyWindow, e: &CMatrix, count: usize) -> Self {
        let n = e.nrows();
        McRecord {
            big_n,
            seed,
            window,
            e_s_re: (0..n * n).map(|k| e[(k / n, k % n)].re).collect(),
            e_s_im: (0..n * n).map(|k| e[(k / n, k % n)].im).collect(),
            count,
        }
    }
}
