//! Atomic norm minimization over ULA steering atoms, solved as an SDP with
//! ADMM.
//!
//! The matrix problem is
//!
//! ```text
//! min  τ/(2 n_r) Tr T(u) + τ/(2 n_c) Tr T(v) + ½ ‖A(H) − Y‖²_F
//! s.t. [[T(u), H], [Hᴴ, T(v)]] ⪰ 0
//! ```
//!
//! where `A` is either the separable map `H ↦ L·H·R` or an arbitrary dense
//! map on `vec(H)`. The vector (SMV) problem is the `n_c = 1` special case,
//! for which `T(v)` collapses to a scalar `s` and the objective becomes
//! `τ/2 (Tr T(u)/n + s) + ½‖Φh − y‖²`.
//!
//! ADMM splits the block matrix `Θ(u, v, H)` from a PSD copy `S`:
//! the `(u, v, H)` step is closed form (Toeplitz averaging plus a
//! diagonalized linear solve), the `S` step is one eigendecomposition.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{all_finite, hermitian_eigen, hermitian_part, CMatrix, CVector};

/// Generator (first column) of a Hermitian Toeplitz matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ToeplitzGenerator {
    first_col: CVector,
}

impl ToeplitzGenerator {
    /// Largest imaginary part tolerated on the diagonal entry.
    const DIAG_IMAG_TOL: f64 = 1e-12;

    pub fn new(first_col: CVector) -> Result<Self> {
        if first_col.is_empty() {
            return Err(Error::Dimension("empty Toeplitz generator".into()));
        }
        let d = first_col[0];
        if d.im.abs() > Self::DIAG_IMAG_TOL * d.re.abs().max(1.0) {
            return Err(Error::Degenerate(format!(
                "Toeplitz diagonal must be real, got {d}"
            )));
        }
        let mut first_col = first_col;
        first_col[0] = Complex64::new(d.re, 0.0);
        Ok(ToeplitzGenerator { first_col })
    }

    pub fn len(&self) -> usize {
        self.first_col.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first_col.is_empty()
    }

    pub fn first_col(&self) -> &CVector {
        &self.first_col
    }

    pub fn materialize(&self) -> CMatrix {
        toeplitz_materialize(self)
    }

    fn scaled(&self, s: f64) -> Self {
        ToeplitzGenerator {
            first_col: self.first_col.scale(s),
        }
    }
}

/// Hermitian Toeplitz matrix with the given first column.
pub fn toeplitz_materialize(g: &ToeplitzGenerator) -> CMatrix {
    let n = g.len();
    let u = g.first_col();
    CMatrix::from_fn(n, n, |a, b| if a >= b { u[a - b] } else { u[b - a].conj() })
}

/// Diagonal averages of the Hermitian part of `m`; the left inverse of
/// [`toeplitz_materialize`] and, up to diagonal multiplicities, its adjoint.
pub fn toeplitz_adjoint(m: &CMatrix) -> Result<ToeplitzGenerator> {
    if !m.is_square() || m.is_empty() {
        return Err(Error::Dimension(format!(
            "Toeplitz adjoint needs a non-empty square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(ToeplitzGenerator {
        first_col: diagonal_averages(m, 0, m.nrows()),
    })
}

/// Diagonal averages of the Hermitian part of the `n × n` block of `m`
/// starting at `(off, off)`.
fn diagonal_averages(m: &CMatrix, off: usize, n: usize) -> CVector {
    CVector::from_fn(n, |d, _| {
        if d == 0 {
            let s: f64 = (0..n).map(|a| m[(off + a, off + a)].re).sum();
            return Complex64::new(s / n as f64, 0.0);
        }
        let mut s = Complex64::new(0.0, 0.0);
        for a in 0..n - d {
            s += m[(off + a + d, off + a)] + m[(off + a, off + a + d)].conj();
        }
        s / (2.0 * (n - d) as f64)
    })
}

/// Multiplicity weights `w_d` such that `⟨T(g), M⟩ = Σ_d w_d Re(conj(g_d)·adj(M)_d)`.
pub fn toeplitz_weights(n: usize) -> Vec<f64> {
    (0..n)
        .map(|d| if d == 0 { n as f64 } else { 2.0 * (n - d) as f64 })
        .collect()
}

/// Iterations between penalty updates under residual balancing.
const ADAPT_EVERY: usize = 20;

/// Projection onto the PSD cone (Frobenius norm), after symmetrization.
pub fn psd_project(h: &CMatrix) -> Result<CMatrix> {
    let eig = hermitian_eigen(h)?;
    let n = eig.dim();
    let keep: Vec<usize> = (0..n).filter(|&i| eig.values[i] > 0.0).collect();
    if keep.is_empty() {
        return Ok(CMatrix::zeros(n, n));
    }
    let b = CMatrix::from_fn(n, keep.len(), |i, j| {
        eig.vectors[(i, keep[j])] * eig.values[keep[j]].sqrt()
    });
    Ok(hermitian_part(&(&b * b.adjoint())))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    /// Constant `c` in `τ = c·σ·√(n₁n₂·ln(n₁n₂))`.
    pub tau_scale: f64,
    /// ADMM penalty, relative to the normalized regularization weight
    /// (initial value when `adaptive_penalty` is set).
    pub penalty: f64,
    pub max_iters: usize,
    pub tol_primal: f64,
    pub tol_dual: f64,
    /// Lower bound on τ relative to `‖Y‖_F`, used when the noise level is
    /// zero (noiseless data would otherwise give τ = 0).
    pub tau_floor: f64,
    /// Residual balancing of the penalty: every 20 iterations, double or
    /// halve it when one residual dominates the other by 10×.
    pub adaptive_penalty: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tau_scale: 1.0,
            penalty: 1.0,
            max_iters: 3000,
            tol_primal: 1e-5,
            tol_dual: 1e-5,
            tau_floor: 1e-4,
            adaptive_penalty: true,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tau_scale", self.tau_scale),
            ("penalty", self.penalty),
            ("tol_primal", self.tol_primal),
            ("tol_dual", self.tol_dual),
            ("tau_floor", self.tau_floor),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("solver option {name} must be positive, got {v}")));
            }
        }
        if self.max_iters == 0 {
            return Err(Error::Config("solver option max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// `opts.tau_scale · σ · √(n₁n₂ · ln(n₁n₂))`.
pub fn tau_rule(sigma: f64, n1: usize, n2: usize, opts: &SolverOptions) -> f64 {
    let n = (n1 * n2) as f64;
    if n < 2.0 {
        return 0.0;
    }
    opts.tau_scale * sigma * (n * n.ln()).sqrt()
}

/// τ actually handed to the solver: the noise rule, floored at
/// `tau_floor · ‖Y‖_F` so that noiseless problems stay well posed.
pub fn effective_tau(sigma: f64, n1: usize, n2: usize, data_norm: f64, opts: &SolverOptions) -> f64 {
    tau_rule(sigma, n1, n2, opts).max(opts.tau_floor * data_norm)
}

#[derive(Debug, Clone)]
pub struct AnmSolution {
    /// `n_rows × n_cols` estimate (a column vector for the SMV problem).
    pub estimate: CMatrix,
    pub toeplitz_left: ToeplitzGenerator,
    /// Absent for the SMV problem.
    pub toeplitz_right: Option<ToeplitzGenerator>,
    pub iterations: usize,
    /// Relative primal residual `‖Θ − S‖ / max(‖Θ‖, ‖S‖)` at termination.
    pub primal_residual: f64,
    /// Relative dual residual `ρ‖S − S_prev‖ / ‖Λ‖` at termination.
    pub dual_residual: f64,
    pub converged: bool,
}

impl AnmSolution {
    /// `[[T(u), H], [Hᴴ, T(v)]]` (with `T(v)` the 1×1 zero block in the SMV case).
    pub fn block_matrix(&self) -> CMatrix {
        let tu = self.toeplitz_left.materialize();
        let tv = self
            .toeplitz_right
            .as_ref()
            .map(|g| g.materialize())
            .unwrap_or_else(|| CMatrix::zeros(self.estimate.ncols(), self.estimate.ncols()));
        assemble_block(&tu, &self.estimate, &tv)
    }
}

fn assemble_block(tu: &CMatrix, h: &CMatrix, tv: &CMatrix) -> CMatrix {
    let (nr, nc) = h.shape();
    let mut out = CMatrix::zeros(nr + nc, nr + nc);
    out.view_mut((0, 0), (nr, nr)).copy_from(tu);
    out.view_mut((nr, nr), (nc, nc)).copy_from(tv);
    out.view_mut((0, nr), (nr, nc)).copy_from(h);
    out.view_mut((nr, 0), (nc, nr)).copy_from(&h.adjoint());
    out
}

/// Normal-equation solver for `(AᴴA + κI) vec(H) = vec(R)`, with `A`
/// normalized to unit spectral norm.
enum Fidelity {
    /// `A = Rᵀ ⊗ L`; `LᴴL = P diag(a) Pᴴ`, `R Rᴴ = Q diag(b) Qᴴ`.
    Separable {
        p: CMatrix,
        a: Vec<f64>,
        q: CMatrix,
        b: Vec<f64>,
    },
    /// `AᴴA = W diag(c) Wᴴ`.
    Dense { w: CMatrix, c: Vec<f64> },
}

impl Fidelity {
    fn solve(&self, rhs: &CMatrix, kappa: f64) -> CMatrix {
        match self {
            Fidelity::Separable { p, a, q, b } => {
                let mut t = p.adjoint() * rhs * q;
                for j in 0..t.ncols() {
                    for i in 0..t.nrows() {
                        t[(i, j)] /= a[i] * b[j] + kappa;
                    }
                }
                p * t * q.adjoint()
            }
            Fidelity::Dense { w, c } => {
                let (nr, nc) = rhs.shape();
                let mut t = w.adjoint() * CVector::from_column_slice(rhs.as_slice());
                for (i, z) in t.iter_mut().enumerate() {
                    *z /= c[i] + kappa;
                }
                let x = w * t;
                CMatrix::from_column_slice(nr, nc, x.as_slice())
            }
        }
    }
}

fn check_finite(m: &CMatrix, what: &'static str) -> Result<()> {
    if all_finite(m) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

fn check_tau(tau: f64, opts: &SolverOptions) -> Result<()> {
    opts.validate()?;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Config(format!("regularization τ must be positive, got {tau}")));
    }
    Ok(())
}

/// Matrix ANM with a separable measurement map `Y ≈ left · H · right`.
pub fn matrix_anm(
    y: &CMatrix,
    left: &CMatrix,
    right: &CMatrix,
    dims: (usize, usize),
    tau: f64,
    opts: &SolverOptions,
) -> Result<AnmSolution> {
    let (n_rows, n_cols) = dims;
    if left.ncols() != n_rows || right.nrows() != n_cols || y.shape() != (left.nrows(), right.ncols()) {
        return Err(Error::Dimension(format!(
            "matrix ANM: Y is {:?}, left is {:?}, right is {:?}, H is {n_rows}x{n_cols}",
            y.shape(),
            left.shape(),
            right.shape()
        )));
    }
    check_finite(y, "ANM observations")?;
    check_finite(left, "ANM left operator")?;
    check_finite(right, "ANM right operator")?;
    check_tau(tau, opts)?;

    let le = hermitian_eigen(&(left.adjoint() * left))?;
    let re = hermitian_eigen(&(right * right.adjoint()))?;
    let a_max = le.values.iter().cloned().fold(0.0, f64::max);
    let b_max = re.values.iter().cloned().fold(0.0, f64::max);
    if a_max <= 0.0 || b_max <= 0.0 {
        return Err(Error::Degenerate("matrix ANM: zero measurement operator".into()));
    }
    let op_scale = (a_max * b_max).sqrt();
    let fid = Fidelity::Separable {
        p: le.vectors,
        a: le.values.iter().map(|v| v.max(0.0) / a_max).collect(),
        q: re.vectors,
        b: re.values.iter().map(|v| v.max(0.0) / b_max).collect(),
    };
    let aty = left.adjoint() * y * right.adjoint();
    admm(&fid, aty, y.norm(), op_scale, n_rows, n_cols, tau, opts, true)
}

/// Matrix ANM with an arbitrary linear map `vec(Y) ≈ operator · vec(H)`.
pub fn matrix_anm_dense(
    y: &CVector,
    operator: &CMatrix,
    dims: (usize, usize),
    tau: f64,
    opts: &SolverOptions,
) -> Result<AnmSolution> {
    let (n_rows, n_cols) = dims;
    if operator.ncols() != n_rows * n_cols || operator.nrows() != y.len() {
        return Err(Error::Dimension(format!(
            "dense ANM: operator is {:?}, y has {}, H is {n_rows}x{n_cols}",
            operator.shape(),
            y.len()
        )));
    }
    let y_mat = CMatrix::from_column_slice(y.len(), 1, y.as_slice());
    check_finite(&y_mat, "ANM observations")?;
    check_finite(operator, "ANM operator")?;
    check_tau(tau, opts)?;

    let e = hermitian_eigen(&(operator.adjoint() * operator))?;
    let c_max = e.values.iter().cloned().fold(0.0, f64::max);
    if c_max <= 0.0 {
        return Err(Error::Degenerate("dense ANM: zero measurement operator".into()));
    }
    let fid = Fidelity::Dense {
        w: e.vectors,
        c: e.values.iter().map(|v| v.max(0.0) / c_max).collect(),
    };
    let aty_vec = operator.adjoint() * y;
    let aty = CMatrix::from_column_slice(n_rows, n_cols, aty_vec.as_slice());
    admm(&fid, aty, y.norm(), c_max.sqrt(), n_rows, n_cols, tau, opts, true)
}

/// Compressive SMV ANM: `y ≈ Φ h`, `h ∈ Cⁿ` spectrally sparse.
pub fn vector_anm(y: &CVector, phi: &CMatrix, tau: f64, opts: &SolverOptions) -> Result<AnmSolution> {
    let n = phi.ncols();
    if phi.nrows() != y.len() || n == 0 {
        return Err(Error::Dimension(format!(
            "vector ANM: Φ is {:?}, y has {} entries",
            phi.shape(),
            y.len()
        )));
    }
    let y_mat = CMatrix::from_column_slice(y.len(), 1, y.as_slice());
    let one = CMatrix::identity(1, 1);
    let mut sol = matrix_anm(&y_mat, phi, &one, (n, 1), tau, opts)?;
    sol.toeplitz_right = None;
    Ok(sol)
}

#[allow(clippy::too_many_arguments)]
fn admm(
    fid: &Fidelity,
    aty: CMatrix,
    y_norm: f64,
    op_scale: f64,
    n_rows: usize,
    n_cols: usize,
    tau: f64,
    opts: &SolverOptions,
    with_right: bool,
) -> Result<AnmSolution> {
    let zero_solution = |iterations| AnmSolution {
        estimate: CMatrix::zeros(n_rows, n_cols),
        toeplitz_left: ToeplitzGenerator {
            first_col: CVector::zeros(n_rows),
        },
        toeplitz_right: with_right.then(|| ToeplitzGenerator {
            first_col: CVector::zeros(n_cols),
        }),
        iterations,
        primal_residual: 0.0,
        dual_residual: 0.0,
        converged: true,
    };
    if y_norm == 0.0 {
        return Ok(zero_solution(0));
    }

    // Work on H' = (op_scale / y_norm) · H against a unit-norm operator and
    // unit-norm data; τ rescales accordingly.
    let data_scale = y_norm;
    let aty = aty.unscale(op_scale * data_scale);
    let tau = tau / (op_scale * data_scale);

    let n = n_rows + n_cols;
    let mut s = CMatrix::zeros(n, n);
    let mut lam = CMatrix::zeros(n, n);
    // The optimal multiplier scales with τ; so should the penalty.
    let mut rho = opts.penalty * tau;
    let mut h = CMatrix::zeros(n_rows, n_cols);
    let mut u = CVector::zeros(n_rows);
    let mut v = CVector::zeros(n_cols);
    let mut primal = f64::INFINITY;
    let mut dual = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iters {
        iterations += 1;
        let w = &s - lam.unscale(rho);

        u = diagonal_averages(&w, 0, n_rows);
        u[0].re -= tau / (2.0 * rho * n_rows as f64);
        v = diagonal_averages(&w, n_rows, n_cols);
        v[0].re -= tau / (2.0 * rho * n_cols as f64);

        let w12 = w.view((0, n_rows), (n_rows, n_cols));
        let rhs = &aty + w12.scale(2.0 * rho);
        h = fid.solve(&rhs, 2.0 * rho);

        let tu = toeplitz_materialize(&ToeplitzGenerator { first_col: u.clone() });
        let tv = toeplitz_materialize(&ToeplitzGenerator { first_col: v.clone() });
        let theta = assemble_block(&tu, &h, &tv);

        let s_prev = std::mem::replace(&mut s, psd_project(&(&theta + lam.unscale(rho)))?);
        let diff = &theta - &s;
        lam += diff.scale(rho);

        let r_abs = diff.norm();
        let s_abs = rho * (&s - &s_prev).norm();
        primal = r_abs / theta.norm().max(s.norm()).max(f64::MIN_POSITIVE);
        dual = s_abs / lam.norm().max(f64::MIN_POSITIVE);
        if !(primal.is_finite() && dual.is_finite()) {
            return Err(Error::NonFinite("ADMM iterates"));
        }
        if primal < opts.tol_primal && dual < opts.tol_dual {
            converged = true;
            break;
        }
        if opts.adaptive_penalty && iterations % ADAPT_EVERY == 0 {
            if primal > 10.0 * dual {
                rho *= 2.0;
            } else if dual > 10.0 * primal {
                rho /= 2.0;
            }
        }
    }

    let back = data_scale / op_scale;
    let left = ToeplitzGenerator { first_col: u }.scaled(back);
    let right = ToeplitzGenerator { first_col: v }.scaled(back);
    Ok(AnmSolution {
        estimate: h.scale(back),
        toeplitz_left: left,
        toeplitz_right: with_right.then_some(right),
        iterations,
        primal_residual: primal,
        dual_residual: dual,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{steering_matrix, steering_vector, SpatialFrequency};
    use crate::linalg::{complex_gaussian, J};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gen(v: &[Complex64]) -> ToeplitzGenerator {
        ToeplitzGenerator::new(CVector::from_column_slice(v)).unwrap()
    }

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn materialize_examples() {
        let t = toeplitz_materialize(&gen(&[c(2.0), c(0.0), c(0.0)]));
        assert_eq!(t, CMatrix::identity(3, 3).scale(2.0));
        let t = toeplitz_materialize(&gen(&[c(1.0), J]));
        assert_eq!(t[(0, 1)], -J);
        assert_eq!(t[(1, 0)], J);
        assert_eq!(t[(1, 1)], c(1.0));
    }

    #[test]
    fn generator_rejects_complex_diagonal() {
        let bad = CVector::from_column_slice(&[Complex64::new(1.0, 0.5), c(0.0)]);
        assert!(ToeplitzGenerator::new(bad).is_err());
    }

    #[test]
    fn adjoint_examples() {
        let g = toeplitz_adjoint(&CMatrix::identity(3, 3)).unwrap();
        assert_eq!(g.first_col().as_slice(), &[c(1.0), c(0.0), c(0.0)]);
        assert!(toeplitz_adjoint(&CMatrix::zeros(2, 3)).is_err());

        // A·diag(p)·Aᴴ is Toeplitz; averaging returns its generator exactly.
        let f = [SpatialFrequency::new(0.1), SpatialFrequency::new(-0.27)];
        let a = steering_matrix(8, &f);
        let p = CMatrix::from_diagonal(&CVector::from_column_slice(&[c(2.0), c(0.5)]));
        let t = &a * p * a.adjoint();
        let g = toeplitz_adjoint(&t).unwrap();
        assert!((g.materialize() - &t).norm() < 1e-12);
        let want = steering_vector(8, f[0]).scale(2.0) + steering_vector(8, f[1]).scale(0.5);
        assert!((g.first_col() - want).norm() < 1e-12);
    }

    #[test]
    fn psd_project_examples() {
        let eye = CMatrix::identity(4, 4);
        assert!((psd_project(&eye).unwrap() - &eye).norm() < 1e-12);
        let m = CMatrix::from_diagonal(&CVector::from_column_slice(&[c(1.0), c(-1.0)]));
        let p = psd_project(&m).unwrap();
        let want = CMatrix::from_diagonal(&CVector::from_column_slice(&[c(1.0), c(0.0)]));
        assert!((p - want).norm() < 1e-12);
    }

    #[test]
    fn tau_rule_examples() {
        let opts = SolverOptions::default();
        assert_eq!(tau_rule(0.0, 16, 32, &opts), 0.0);
        // √(512 · ln 512) = 56.515681…
        let t = tau_rule(1.0, 16, 32, &opts);
        assert!((t - 56.515_681_080_742_79).abs() < 1e-10, "{t}");
        let doubled = SolverOptions { tau_scale: 2.0, ..opts };
        assert!((tau_rule(0.3, 16, 32, &doubled) - 2.0 * tau_rule(0.3, 16, 32, &opts)).abs() < 1e-12);
    }

    #[test]
    fn zero_data_gives_zero_estimate() {
        let opts = SolverOptions::default();
        let y = CMatrix::zeros(4, 5);
        let sol = matrix_anm(&y, &CMatrix::identity(4, 4), &CMatrix::identity(5, 5), (4, 5), 1.0, &opts).unwrap();
        assert_eq!(sol.estimate, CMatrix::zeros(4, 5));
        let sol = vector_anm(&CVector::zeros(3), &CMatrix::identity(3, 3), 1.0, &opts).unwrap();
        assert_eq!(sol.estimate.norm(), 0.0);
        assert!(sol.toeplitz_right.is_none());
    }

    #[test]
    fn rejects_bad_input() {
        let opts = SolverOptions::default();
        let mut y = CMatrix::from_element(2, 2, c(1.0));
        let eye = CMatrix::identity(2, 2);
        assert!(matrix_anm(&y, &eye, &eye, (2, 2), 0.0, &opts).is_err());
        assert!(matrix_anm(&y, &eye, &eye, (3, 2), 1.0, &opts).is_err());
        y[(0, 0)] = Complex64::new(f64::NAN, 0.0);
        assert!(matches!(matrix_anm(&y, &eye, &eye, (2, 2), 1.0, &opts), Err(Error::NonFinite(_))));
    }

    #[test]
    fn noiseless_single_path_full_observation() {
        let (nr, nc) = (12, 10);
        let fr = SpatialFrequency::new(0.21);
        let fc = SpatialFrequency::new(-0.33);
        let rho = Complex64::new(0.8, -0.6);
        let h = steering_vector(nr, fr) * steering_vector(nc, fc).adjoint() * rho;
        let opts = SolverOptions::default();
        let tau = effective_tau(0.0, nr, nc, h.norm(), &opts);
        let sol = matrix_anm(&h, &CMatrix::identity(nr, nr), &CMatrix::identity(nc, nc), (nr, nc), tau, &opts).unwrap();
        assert!(sol.converged, "{} iterations", sol.iterations);
        let rel = (&sol.estimate - &h).norm() / h.norm();
        assert!(rel < 1e-3, "relative error {rel}");
        let min_eig = hermitian_eigen(&sol.block_matrix()).unwrap().values[0];
        assert!(min_eig >= -1e-6 * h.norm(), "{min_eig}");
        assert!(sol.primal_residual < opts.tol_primal && sol.dual_residual < opts.tol_dual);
    }

    #[test]
    fn noiseless_vector_identity_sensing() {
        let n = 16;
        let f = [SpatialFrequency::new(-0.2), SpatialFrequency::new(0.15)];
        let x = steering_matrix(n, &f) * CVector::from_column_slice(&[Complex64::new(1.0, 0.5), c(-0.7)]);
        let opts = SolverOptions::default();
        let tau = effective_tau(0.0, n, 1, x.norm(), &opts);
        let sol = vector_anm(&x, &CMatrix::identity(n, n), tau, &opts).unwrap();
        let err = (sol.estimate.column(0) - &x).norm() / x.norm();
        assert!(err < 1e-3, "{err}");
    }

    #[test]
    fn dense_operator_matches_separable() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (nr, nc) = (8, 6);
        let left = complex_gaussian(5, nr, 1.0, &mut rng);
        let right = complex_gaussian(nc, 7, 1.0, &mut rng);
        let h = steering_vector(nr, 0.1.into()) * steering_vector(nc, (-0.2).into()).adjoint();
        let y = &left * &h * &right;
        let opts = SolverOptions::default();
        let sep = matrix_anm(&y, &left, &right, (nr, nc), 0.05, &opts).unwrap();
        let op = crate::linalg::kron(&right.transpose(), &left);
        let dense = matrix_anm_dense(&crate::linalg::vectorize(&y), &op, (nr, nc), 0.05, &opts).unwrap();
        assert!((sep.estimate - dense.estimate).norm() < 1e-3 * h.norm());
    }

    #[test]
    fn solver_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let y = complex_gaussian(6, 5, 1.0, &mut rng);
        let opts = SolverOptions { max_iters: 50, ..Default::default() };
        let eye6 = CMatrix::identity(6, 6);
        let eye5 = CMatrix::identity(5, 5);
        let a = matrix_anm(&y, &eye6, &eye5, (6, 5), 0.5, &opts).unwrap();
        let b = matrix_anm(&y, &eye6, &eye5, (6, 5), 0.5, &opts).unwrap();
        assert_eq!(a.estimate, b.estimate);
        assert_eq!(a.iterations, b.iterations);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn adjoint_inverts_materialize(seed in any::<u64>(), n in 1usize..10) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut col = complex_gaussian(n, 1, 1.0, &mut rng).column(0).into_owned();
            col[0].im = 0.0;
            let g = ToeplitzGenerator::new(col).unwrap();
            let back = toeplitz_adjoint(&g.materialize()).unwrap();
            prop_assert!((back.first_col() - g.first_col()).norm() < 1e-12);
            prop_assert!((g.materialize() - g.materialize().adjoint()).norm() < 1e-12);
        }

        #[test]
        fn adjoint_pair_under_multiplicity_weights(seed in any::<u64>(), n in 1usize..10) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut col = complex_gaussian(n, 1, 1.0, &mut rng).column(0).into_owned();
            col[0].im = 0.0;
            let g = ToeplitzGenerator::new(col).unwrap();
            let m = complex_gaussian(n, n, 1.0, &mut rng);
            let lhs: f64 = g.materialize().iter().zip(m.iter()).map(|(a, b)| (a.conj() * b).re).sum();
            let adj = toeplitz_adjoint(&m).unwrap();
            let w = toeplitz_weights(n);
            let rhs: f64 = (0..n).map(|d| w[d] * (g.first_col()[d].conj() * adj.first_col()[d]).re).sum();
            prop_assert!((lhs - rhs).abs() < 1e-10 * (1.0 + lhs.abs()));
        }

        #[test]
        fn psd_projection_is_idempotent_and_nonexpansive(seed in any::<u64>(), n in 1usize..9) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = hermitian_part(&complex_gaussian(n, n, 1.0, &mut rng));
            let b = hermitian_part(&complex_gaussian(n, n, 1.0, &mut rng));
            let pa = psd_project(&a).unwrap();
            let pb = psd_project(&b).unwrap();
            prop_assert!(hermitian_eigen(&pa).unwrap().values[0] >= -1e-10);
            prop_assert!((psd_project(&pa).unwrap() - &pa).norm() < 1e-10);
            prop_assert!((&pa - &pb).norm() <= (&a - &b).norm() + 1e-10);
            // Distance to any PSD matrix does not grow.
            let z = { let g = complex_gaussian(n, n, 1.0, &mut rng); &g * g.adjoint() };
            prop_assert!((&pa - &z).norm() <= (&a - &z).norm() + 1e-10);
        }
    }
}
