use crate::error::{Error, Result};
use nalgebra::DMatrix;
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Square complex matrix that was checked to be Hermitian on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(CMatrix);

impl HermitianMatrix {
    /// Accepts `m` if it is Hermitian to 1e-12 relative to its largest entry.
    /// The stored matrix is exactly Hermitian (averaged with its adjoint).
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Dimension(format!("{}x{} is not square", m.nrows(), m.ncols())));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("matrix entry".into()));
        }
        let scale = max_abs(&m);
        let dev = hermiticity_defect(&m);
        let allowed = 1e-12 * scale;
        if dev > allowed {
            return Err(Error::NotHermitian { deviation: dev, allowed });
        }
        Ok(HermitianMatrix(hermitian_part(&m)))
    }

    pub fn from_real(n: usize, rows: &[f64]) -> Result<Self> {
        if rows.len() != n * n {
            return Err(Error::Dimension(format!("expected {} entries, got {}", n * n, rows.len())));
        }
        Self::new(CMatrix::from_fn(n, n, |i, j| C64::new(rows[i * n + j], 0.0)))
    }

    pub fn from_diag(d: &[f64]) -> Self {
        let n = d.len();
        HermitianMatrix(CMatrix::from_fn(n, n, |i, j| if i == j { C64::new(d[i], 0.0) } else { C64::new(0.0, 0.0) }))
    }

    pub fn zeros(n: usize) -> Self {
        HermitianMatrix(CMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        HermitianMatrix(CMatrix::identity(n, n))
    }

    /// Trusts the caller; used where hermiticity holds by construction.
    pub(crate) fn from_matrix_unchecked(m: CMatrix) -> Self {
        HermitianMatrix(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }
}

/// Eigenvalues in ascending order and the unitary matrix of eigenvectors (columns).
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl EigenDecomposition {
    /// V diag(values) V^H
    pub fn reconstruct(&self) -> CMatrix {
        let mut scaled = self.vectors.clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= C64::new(self.values[k], 0.0);
        }
        scaled * self.vectors.adjoint()
    }

    /// V diag(g(values)) V^H
    pub fn apply_fn(&self, g: impl Fn(f64) -> C64) -> CMatrix {
        let mut scaled = self.vectors.clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= g(self.values[k]);
        }
        scaled * self.vectors.adjoint()
    }
}

/// Dense Hermitian eigendecomposition (faer backend, sequential).
pub fn hermitian_eig(a: &HermitianMatrix) -> Result<EigenDecomposition> {
    let m = a.matrix();
    let n = m.nrows();
    let fa = faer::Mat::<C64>::from_fn(n, n, |i, j| m[(i, j)]);
    let evd = fa.self_adjoint_eigen(faer::Side::Lower).map_err(|_| Error::EigenFailure)?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let values: Vec<f64> = (0..n).map(|k| s[k].re).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigenFailure);
    }
    let vectors = CMatrix::from_fn(n, n, |i, j| u[(i, j)]);
    Ok(EigenDecomposition { values, vectors })
}

/// Eigenvalues only, ascending.
pub fn hermitian_eigenvalues(a: &HermitianMatrix) -> Result<Vec<f64>> {
    let m = a.matrix();
    let n = m.nrows();
    let fa = faer::Mat::<C64>::from_fn(n, n, |i, j| m[(i, j)]);
    let v = fa.self_adjoint_eigenvalues(faer::Side::Lower).map_err(|_| Error::EigenFailure)?;
    Ok(v)
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut dev = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

/// (M + M^H)/2
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// (M - M^H)/(2i), the matrix imaginary part.
pub fn imag_part(m: &CMatrix) -> CMatrix {
    (m - m.adjoint()) * C64::new(0.0, -0.5)
}

/// Largest singular value.
pub fn op_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

/// Smallest eigenvalue of the Hermitian part of `m`.
pub fn min_eig_hermitian(m: &CMatrix) -> f64 {
    let h = hermitian_part(m);
    let e = h.symmetric_eigenvalues();
    e.iter().cloned().fold(f64::INFINITY, f64::min)
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

pub fn real_matrix(n: usize, rows: &[f64]) -> CMatrix {
    CMatrix::from_fn(n, n, |i, j| C64::new(rows[i * n + j], 0.0))
}

pub fn pauli_x() -> CMatrix {
    real_matrix(2, &[0.0, 1.0, 1.0, 0.0])
}

pub fn pauli_z() -> CMatrix {
    real_matrix(2, &[1.0, 0.0, 0.0, -1.0])
}
