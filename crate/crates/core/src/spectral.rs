//! Frequency retrieval from Toeplitz covariance estimates (root-MUSIC) and
//! least-squares gain recovery on a fixed set of atoms.

use itertools::Itertools;
use nalgebra::linalg::Schur;
use num_complex::Complex64;

use crate::channel::{wrap_frequency, SpatialFrequency};
use crate::error::{Error, Result};
use crate::linalg::{all_finite, hermitian_eigen, CMatrix, CVector};

/// Frequencies closer than this are treated as one root.
const DUPLICATE_TOL: f64 = 1e-5;

/// Condition number above which a least-squares fit is rejected.
pub const MAX_CONDITION: f64 = 1e10;

/// Estimates `l` spatial frequencies from an `n × n` Hermitian (Toeplitz)
/// matrix. Returns them sorted ascending.
pub fn rootmusic(t: &CMatrix, l: usize) -> Result<Vec<SpatialFrequency>> {
    let n = t.nrows();
    if !t.is_square() {
        return Err(Error::Dimension(format!("root-MUSIC needs a square matrix, got {:?}", t.shape())));
    }
    if l == 0 || l >= n {
        return Err(Error::Dimension(format!("root-MUSIC: need 0 < L < n, got L = {l}, n = {n}")));
    }
    if !all_finite(t) {
        return Err(Error::NonFinite("root-MUSIC input"));
    }
    if t.norm() == 0.0 {
        return Err(Error::Degenerate("root-MUSIC input is all zero".into()));
    }

    let eig = hermitian_eigen(t)?;
    let noise = eig.vectors.columns(0, n - l);
    let c = noise * noise.adjoint();

    // αᴴ(f) C α(f) = Σ_k c_k z^k with z = e^{j2πf} and c_k the sum of the
    // k-th superdiagonal; coefficient index k + n − 1 after multiplying by z^{n−1}.
    let coeffs: Vec<Complex64> = (0..2 * n - 1)
        .map(|idx| {
            let k = idx as isize - (n as isize - 1);
            (0..n)
                .filter_map(|a| {
                    let b = a as isize + k;
                    (0..n as isize).contains(&b).then(|| c[(a, b as usize)])
                })
                .sum()
        })
        .collect();

    let roots = polynomial_roots(&coeffs)?;
    let mut inside: Vec<Complex64> = roots.into_iter().filter(|z| z.norm() <= 1.0).collect();
    inside.sort_by(|a, b| b.norm().total_cmp(&a.norm()));

    let mut picked: Vec<f64> = Vec::with_capacity(l);
    for z in inside {
        let f = wrap_frequency(z.arg() / std::f64::consts::TAU);
        let f = polish(&coeffs, f);
        if picked
            .iter()
            .all(|&g| SpatialFrequency::new(g).distance(SpatialFrequency::new(f)) > DUPLICATE_TOL)
        {
            picked.push(f);
        }
        if picked.len() == l {
            break;
        }
    }
    if picked.len() < l {
        return Err(Error::Degenerate(format!(
            "root-MUSIC found {} distinct roots, needed {l}",
            picked.len()
        )));
    }
    picked.sort_by(f64::total_cmp);
    Ok(picked.into_iter().map(SpatialFrequency::new).collect())
}

/// Roots of `Σ_i coeffs[i] z^i` via the companion matrix.
fn polynomial_roots(coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
    let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let tol = 1e-14 * scale;
    let lo = coeffs.iter().position(|c| c.norm() > tol).unwrap_or(0);
    let hi = coeffs.iter().rposition(|c| c.norm() > tol).unwrap_or(0);
    let q = &coeffs[lo..=hi];
    let deg = q.len() - 1;
    if deg == 0 {
        return Ok(Vec::new());
    }
    let lead = q[deg];
    let mut comp = CMatrix::zeros(deg, deg);
    for j in 0..deg {
        comp[(0, j)] = -q[deg - 1 - j] / lead;
    }
    for i in 1..deg {
        comp[(i, i - 1)] = Complex64::new(1.0, 0.0);
    }
    let eig = Schur::new(comp)
        .eigenvalues()
        .ok_or_else(|| Error::Eigen("companion matrix Schur form".into()))?;
    Ok(eig.iter().copied().collect())
}

/// Newton refinement of a minimum of the real pseudo-spectrum
/// `g(f) = Σ_k c_k e^{j2πkf}`.
fn polish(coeffs: &[Complex64], f0: f64) -> f64 {
    let n1 = (coeffs.len() - 1) / 2;
    let tau = std::f64::consts::TAU;
    let mut f = f0;
    for _ in 0..8 {
        let (mut d1, mut d2) = (0.0, 0.0);
        for (idx, c) in coeffs.iter().enumerate() {
            let k = idx as f64 - n1 as f64;
            let e = c * Complex64::from_polar(1.0, tau * k * f);
            d1 += (e * Complex64::new(0.0, tau * k)).re;
            d2 -= e.re * (tau * k).powi(2);
        }
        if d2 <= 0.0 {
            return f0;
        }
        let step = d1 / d2;
        f -= step;
        if step.abs() < 1e-15 {
            break;
        }
    }
    // Only accept refinements that stay local to the algebraic root.
    if SpatialFrequency::new(f).distance(SpatialFrequency::new(f0)) < 1e-3 {
        wrap_frequency(f)
    } else {
        f0
    }
}

/// Least-squares solution of `a · x ≈ y`; rejects ill-conditioned `a`.
pub fn ls_gains(a: &CMatrix, y: &CVector) -> Result<CVector> {
    if a.nrows() != y.len() {
        return Err(Error::Dimension(format!(
            "least squares: operator is {:?}, data has {} entries",
            a.shape(),
            y.len()
        )));
    }
    if a.ncols() == 0 {
        return Ok(CVector::zeros(0));
    }
    if a.nrows() < a.ncols() {
        return Err(Error::IllConditioned {
            context: format!("underdetermined {}x{} least-squares system", a.nrows(), a.ncols()),
            cond: f64::INFINITY,
        });
    }
    let svd = a.clone().svd(true, true);
    let s = &svd.singular_values;
    let smax = s.max();
    let smin = s.min();
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(cond <= MAX_CONDITION) {
        return Err(Error::IllConditioned {
            context: format!("{}x{} least-squares system", a.nrows(), a.ncols()),
            cond,
        });
    }
    svd.solve(y, 0.0).map_err(|e| Error::Degenerate(e.into()))
}

/// Permutation `perm` minimizing `Σ_i d(est[perm[i]], truth[i])²` with `d`
/// the wrapped frequency distance.
pub fn match_permutation(est: &[SpatialFrequency], truth: &[SpatialFrequency]) -> Result<Vec<usize>> {
    if est.len() != truth.len() {
        return Err(Error::Dimension(format!(
            "cannot pair {} estimates with {} references",
            est.len(),
            truth.len()
        )));
    }
    let cost = |perm: &[usize]| -> f64 {
        perm.iter()
            .zip(truth)
            .map(|(&i, t)| est[i].distance(*t).powi(2))
            .sum()
    };
    let best = (0..est.len())
        .permutations(est.len())
        .min_by(|a, b| cost(a).total_cmp(&cost(b)))
        .unwrap_or_default();
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{freqs, steering_matrix};
    use crate::linalg::complex_gaussian;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toeplitz_of(n: usize, f: &[SpatialFrequency], p: &[f64]) -> CMatrix {
        let a = steering_matrix(n, f);
        let d = CMatrix::from_diagonal(&CVector::from_iterator(p.len(), p.iter().map(|&x| x.into())));
        &a * d * a.adjoint()
    }

    #[test]
    fn recovers_two_frequencies_exactly() {
        let f = freqs(&[0.1, 0.3]);
        let got = rootmusic(&toeplitz_of(16, &f, &[1.0, 1.0]), 2).unwrap();
        for (g, t) in got.iter().zip(&f) {
            assert!(g.distance(*t) < 1e-8, "{g:?} vs {t:?}");
        }
    }

    #[test]
    fn output_is_sorted_and_wrapped() {
        let f = freqs(&[0.45, -0.49, 0.0]);
        let got = rootmusic(&toeplitz_of(12, &f, &[1.0, 2.0, 0.5]), 3).unwrap();
        assert!(got.windows(2).all(|w| w[0].value() <= w[1].value()));
        assert!(got.iter().all(|g| (-0.5..0.5).contains(&g.value())));
        let perm = match_permutation(&got, &f).unwrap();
        for (i, t) in f.iter().enumerate() {
            assert!(got[perm[i]].distance(*t) < 1e-8);
        }
    }

    #[test]
    fn rootmusic_rejects_bad_orders() {
        let t = toeplitz_of(4, &freqs(&[0.1]), &[1.0]);
        assert!(rootmusic(&t, 0).is_err());
        assert!(rootmusic(&t, 4).is_err());
        assert!(matches!(rootmusic(&CMatrix::zeros(4, 4), 1), Err(Error::Degenerate(_))));
    }

    #[test]
    fn ls_gains_examples() {
        let a = steering_matrix(8, &freqs(&[-0.2, 0.25]));
        let x = CVector::from_column_slice(&[Complex64::new(1.0, -2.0), Complex64::new(0.3, 0.0)]);
        let got = ls_gains(&a, &(&a * &x)).unwrap();
        assert!((got - x).norm() < 1e-12);

        let dup = steering_matrix(8, &freqs(&[0.1, 0.1]));
        let y = CVector::zeros(8);
        assert!(matches!(ls_gains(&dup, &y), Err(Error::IllConditioned { .. })));
        assert!(ls_gains(&a, &CVector::zeros(3)).is_err());
    }

    #[test]
    fn match_permutation_examples() {
        let est = freqs(&[0.3, 0.1]);
        let truth = freqs(&[0.1, 0.3]);
        assert_eq!(match_permutation(&est, &truth).unwrap(), vec![1, 0]);
        // Wrap-around: 0.49 is next to −0.49.
        let est = freqs(&[0.49, 0.0]);
        let truth = freqs(&[0.01, -0.49]);
        assert_eq!(match_permutation(&est, &truth).unwrap(), vec![1, 0]);
        assert!(match_permutation(&est, &truth[..1]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn rootmusic_is_exact_on_separated_atoms(seed in any::<u64>(), l in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 16;
            let f = crate::channel::sample_separated(l, 2.0 / n as f64, &mut rng).unwrap();
            let p: Vec<f64> = (0..l).map(|i| 0.5 + i as f64).collect();
            let got = rootmusic(&toeplitz_of(n, &f, &p), l).unwrap();
            let perm = match_permutation(&got, &f).unwrap();
            for (i, t) in f.iter().enumerate() {
                prop_assert!(got[perm[i]].distance(*t) < 1e-7);
            }
        }

        #[test]
        fn ls_recovers_consistent_systems(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = complex_gaussian(10, 3, 1.0, &mut rng);
            let x = complex_gaussian(3, 1, 1.0, &mut rng).column(0).into_owned();
            let got = ls_gains(&a, &(&a * &x)).unwrap();
            prop_assert!((got - x).norm() < 1e-9);
        }
    }
}
