//! Dense complex linear-algebra helpers shared by the estimators.
//!
//! Matrices are `nalgebra` column-major `DMatrix<Complex64>`. The Hermitian
//! eigensolver, which dominates the cost of every ADMM iteration, is backed
//! by `faer`.

use std::sync::Once;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const J: Complex64 = Complex64::new(0.0, 1.0);

/// `exp(j * 2π * cycles)`, with the argument reduced modulo one cycle first so
/// that large `cycles` do not lose precision.
#[inline]
pub fn cis_cycles(cycles: f64) -> Complex64 {
    let frac = cycles - cycles.round();
    Complex64::from_polar(1.0, std::f64::consts::TAU * frac)
}

/// `(M + Mᴴ) / 2`.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

pub fn all_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Unit-norm eigenvectors as columns, in the order of `values`.
    pub vectors: CMatrix,
}

impl HermitianEigen {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Eigenvector belonging to the largest eigenvalue.
    pub fn principal(&self) -> CVector {
        self.vectors.column(self.dim() - 1).into_owned()
    }
}

static SEQUENTIAL_FAER: Once = Once::new();

/// Eigendecomposition of the Hermitian part of `m`.
pub fn hermitian_eigen(m: &CMatrix) -> Result<HermitianEigen> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if !all_finite(m) {
        return Err(Error::NonFinite("hermitian eigendecomposition"));
    }
    // Trials are parallelised at the harness level; keep faer single-threaded.
    SEQUENTIAL_FAER.call_once(|| faer::set_global_parallelism(faer::Par::Seq));

    let n = m.nrows();
    let sym = faer::Mat::<faer::c64>::from_fn(n, n, |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5);
    let evd = sym
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let values: Vec<f64> = (0..n).map(|i| s[i].re).collect();
    let vectors = CMatrix::from_fn(n, n, |i, j| u[(i, j)]);
    Ok(HermitianEigen { values, vectors })
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    CMatrix::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

/// Column-wise Kronecker (Khatri–Rao) product `a ⊙ b`.
pub fn khatri_rao(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if a.ncols() != b.ncols() {
        return Err(Error::Dimension(format!(
            "Khatri-Rao product needs equal column counts ({} vs {})",
            a.ncols(),
            b.ncols()
        )));
    }
    let (ar, br) = (a.nrows(), b.nrows());
    Ok(CMatrix::from_fn(ar * br, a.ncols(), |i, j| a[(i / br, j)] * b[(i % br, j)]))
}

/// Column-major vectorization.
pub fn vectorize(m: &CMatrix) -> CVector {
    CVector::from_column_slice(m.as_slice())
}

/// Matrix with i.i.d. `CN(0, sigma²)` entries.
pub fn complex_gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, sigma: f64, rng: &mut R) -> CMatrix {
    let s = sigma * std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(s * re, s * im)
    })
}

/// Matrix with entries `scale * exp(jψ)`, ψ uniform on `[0, 2π)`.
pub fn random_phase<R: Rng + ?Sized>(rows: usize, cols: usize, scale: f64, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        Complex64::from_polar(scale, rng.random::<f64>() * std::f64::consts::TAU)
    })
}

/// Singular values, descending.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Number of singular values above `rel_tol * σ_max`.
pub fn numeric_rank(m: &CMatrix, rel_tol: f64) -> usize {
    let s = singular_values(m);
    match s.first() {
        Some(&top) if top > 0.0 => s.iter().filter(|&&x| x > rel_tol * top).count(),
        _ => 0,
    }
}
