//! Two-stage downlink estimation through a purely passive RIS, observed at
//! the MS.
//!
//! Stage 1 sounds the effective channel `H_rm·Ω₀·H_br` with random pilots and
//! combiners and recovers the BS departure and MS arrival frequencies by
//! matrix ANM. Stage 2 steers pilots and combiners onto those estimates,
//! varies the RIS phases over `T` blocks and recovers, for every
//! (BS path, MS path) pair, the angle difference and product gain by vector
//! ANM on the block sequence.

use log::warn;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::anm::{effective_tau, matrix_anm, vector_anm, SolverOptions};
use crate::channel::{cascade, steering_matrix, CascadeParams, PhaseControl, SpatialFrequency};
use crate::error::{Error, Result, StageExt};
use crate::linalg::{complex_gaussian, random_phase, CMatrix, CVector};
use crate::metrics::overhead_passive;
use crate::spectral::{ls_gains, rootmusic};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PassiveSetup {
    /// Stage-1 BS beams `N₀`.
    pub n0: usize,
    /// Stage-1 MS combiners `M₀`.
    pub m0: usize,
    /// Stage-2 blocks `T`.
    pub t_blocks: usize,
    /// MS RF chains `N_RF,M`.
    pub n_rf_ms: usize,
}

impl Default for PassiveSetup {
    fn default() -> Self {
        PassiveSetup {
            n0: 16,
            m0: 16,
            t_blocks: 12,
            n_rf_ms: 16,
        }
    }
}

impl PassiveSetup {
    pub fn overhead(&self, paths_br: usize, paths_rm: usize) -> usize {
        overhead_passive(self.n0, self.m0, self.t_blocks, paths_br, paths_rm, self.n_rf_ms)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n0 == 0 || self.m0 == 0 || self.t_blocks == 0 || self.n_rf_ms == 0 {
            return Err(Error::Config(format!("passive setup entries must be positive, got {self:?}")));
        }
        Ok(())
    }
}

/// Row chunks measured in one slot each, `N_RF,M` combiners at a time.
fn chunks(rows: usize, per_slot: usize) -> impl Iterator<Item = std::ops::Range<usize>> {
    (0..rows.div_ceil(per_slot)).map(move |c| c * per_slot..((c + 1) * per_slot).min(rows))
}

/// `Wᴴ·Z` with an independent MS noise realization for every slot, i.e. every
/// chunk of `per_slot` combiners and every pilot column.
fn combined_noise<R: Rng + ?Sized>(w: &CMatrix, cols: usize, per_slot: usize, sigma: f64, rng: &mut R) -> CMatrix {
    let mut out = CMatrix::zeros(w.ncols(), cols);
    for r in chunks(w.ncols(), per_slot) {
        let z = complex_gaussian(w.nrows(), cols, sigma, rng);
        let part = w.columns(r.start, r.len()).adjoint() * z;
        out.rows_mut(r.start, r.len()).copy_from(&part);
    }
    out
}

/// Stage-1 output.
#[derive(Debug, Clone)]
pub struct AngleEstimate {
    pub theta_br: Vec<SpatialFrequency>,
    pub phi_rm: Vec<SpatialFrequency>,
    pub training_uses: usize,
    pub solver_iterations: usize,
    pub converged: bool,
}

/// Stage 1: estimates BS departure (`θ_br`) and MS arrival (`φ_rm`)
/// frequencies from `Y₀ = W₀ᴴ·H_rm·Ω₀·H_br·X₀ + W₀ᴴZ`.
#[allow(clippy::too_many_arguments)]
pub fn stage1<R: Rng + ?Sized>(
    h_br: &CMatrix,
    h_rm: &CMatrix,
    setup: &PassiveSetup,
    paths_br: usize,
    paths_rm: usize,
    sigma: f64,
    rng: &mut R,
    opts: &SolverOptions,
) -> Result<AngleEstimate> {
    setup.validate()?;
    if setup.n0 < 2 * paths_br || setup.m0 < 2 * paths_rm {
        warn!(
            "stage 1 with N0 = {}, M0 = {} for {paths_br}/{paths_rm} paths is below the 2L guideline",
            setup.n0, setup.m0
        );
    }
    let (n_m, n_r, n_b) = (h_rm.nrows(), h_br.nrows(), h_br.ncols());
    let omega0 = PhaseControl::random(n_r, rng);
    let x0 = random_phase(n_b, setup.n0, 1.0 / (n_b as f64).sqrt(), rng);
    let w0 = random_phase(n_m, setup.m0, 1.0 / (n_m as f64).sqrt(), rng);
    let h_eff = cascade(h_rm, &omega0, h_br)?;
    let mut y0 = w0.adjoint() * &h_eff * &x0;
    if sigma > 0.0 {
        y0 += combined_noise(&w0, setup.n0, setup.n_rf_ms, sigma, rng);
    }
    let tau = effective_tau(sigma, n_m, n_b, y0.norm(), opts);
    let sol = matrix_anm(&y0, &w0.adjoint(), &x0, (n_m, n_b), tau, opts)?;
    let right = sol
        .toeplitz_right
        .as_ref()
        .ok_or_else(|| Error::Degenerate("matrix ANM returned no column Toeplitz block".into()))?;
    Ok(AngleEstimate {
        phi_rm: rootmusic(&sol.toeplitz_left.materialize(), paths_rm)?,
        theta_br: rootmusic(&right.materialize(), paths_br)?,
        training_uses: setup.n0 * chunks(setup.m0, setup.n_rf_ms).count(),
        solver_iterations: sol.iterations,
        converged: sol.converged,
    })
}

/// Stage-2 output.
#[derive(Debug, Clone)]
pub struct CascadeEstimate {
    pub cascade: CascadeParams,
    pub training_uses: usize,
    pub solver_iterations: usize,
    pub converged: bool,
}

/// Stage 2: with `X = A(θ̂_br)/√N_B` and `W = A(φ̂_rm)` fixed, observes
/// `Y_t = Wᴴ·H_rm·Ω_t·H_br·X + noise` for `T` random phase vectors `ω_t`.
///
/// Removing the beam/combiner Gram matrices, `C_M⁻¹·Y_t·C_B⁻¹`, leaves entry
/// `(p, l)` equal to `ρ_pl·ω_tᵀα(δ_pl)` up to estimation mismatch, so each
/// entry's length-`T` sequence is a single-atom compressive problem with
/// sensing rows `ω_tᵀ`.
#[allow(clippy::too_many_arguments)]
pub fn stage2<R: Rng + ?Sized>(
    h_br: &CMatrix,
    h_rm: &CMatrix,
    angles: &AngleEstimate,
    setup: &PassiveSetup,
    sigma: f64,
    rng: &mut R,
    opts: &SolverOptions,
) -> Result<CascadeEstimate> {
    setup.validate()?;
    let (n_m, n_r, n_b) = (h_rm.nrows(), h_br.nrows(), h_br.ncols());
    let (l_br, l_rm) = (angles.theta_br.len(), angles.phi_rm.len());
    let t = setup.t_blocks;
    if t < 2 * l_br * l_rm {
        warn!("stage 2 with T = {t} blocks for {} cascade paths is under-determined", l_br * l_rm);
    }

    let a_b = steering_matrix(n_b, &angles.theta_br);
    let x = a_b.unscale((n_b as f64).sqrt());
    let w = steering_matrix(n_m, &angles.phi_rm);
    let c_m_inv = invert(&(w.adjoint() * &w), "MS combiner Gram")?;
    let c_b_inv = invert(&(a_b.adjoint() * &x), "BS beam Gram")?;

    let mut phi = CMatrix::zeros(t, n_r);
    let mut seq = vec![CVector::zeros(t); l_br * l_rm];
    for b in 0..t {
        let omega = PhaseControl::random(n_r, rng);
        phi.set_row(b, &omega.omega().transpose());
        let mut y = w.adjoint() * cascade(h_rm, &omega, h_br)? * &x;
        if sigma > 0.0 {
            y += combined_noise(&w, l_br, setup.n_rf_ms, sigma, rng);
        }
        let g = &c_m_inv * y * &c_b_inv;
        for p in 0..l_rm {
            for l in 0..l_br {
                seq[p * l_br + l][b] = g[(p, l)];
            }
        }
    }

    let mut delta = Vec::with_capacity(l_br * l_rm);
    let mut gains = Vec::with_capacity(l_br * l_rm);
    let mut iterations = 0;
    let mut converged = true;
    for p in 0..l_rm {
        for l in 0..l_br {
            let y = &seq[p * l_br + l];
            let col_energy: f64 = c_b_inv.column(l).norm_squared();
            let sigma_eff = sigma * (c_m_inv[(p, p)].re * col_energy).sqrt();
            let tau = effective_tau(sigma_eff, n_r, 1, y.norm(), opts);
            let sol = vector_anm(y, &phi, tau, opts)?;
            iterations += sol.iterations;
            converged &= sol.converged;
            let d = rootmusic(&sol.toeplitz_left.materialize(), 1)?[0];
            let rho = ls_gains(&(&phi * steering_matrix(n_r, &[d])), y)?;
            delta.push(d);
            gains.push(rho[0]);
        }
    }
    Ok(CascadeEstimate {
        cascade: CascadeParams::new(delta, gains, l_br, l_rm)?,
        training_uses: t * l_br * chunks(l_rm, setup.n_rf_ms).count(),
        solver_iterations: iterations,
        converged,
    })
}

fn invert(m: &CMatrix, what: &str) -> Result<CMatrix> {
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::Degenerate(format!("{what} is singular")))
}

/// Passive-RIS estimate: only cascade-identifiable quantities.
#[derive(Debug, Clone)]
pub struct PassiveEstimate {
    pub theta_br: Vec<SpatialFrequency>,
    pub phi_rm: Vec<SpatialFrequency>,
    /// Indexed `p·L_br + l` against `theta_br[l]`, `phi_rm[p]`.
    pub cascade: CascadeParams,
    pub training_uses: usize,
    pub solver_iterations: usize,
    pub converged: bool,
}

/// Runs both stages.
#[allow(clippy::too_many_arguments)]
pub fn estimate_passive<R: Rng + ?Sized>(
    h_br: &CMatrix,
    h_rm: &CMatrix,
    setup: &PassiveSetup,
    paths_br: usize,
    paths_rm: usize,
    sigma: f64,
    rng: &mut R,
    opts: &SolverOptions,
) -> Result<PassiveEstimate> {
    if h_rm.ncols() != h_br.nrows() {
        return Err(Error::Dimension(format!(
            "H_br has {} RIS rows but H_rm has {} RIS columns",
            h_br.nrows(),
            h_rm.ncols()
        )));
    }
    let angles = stage1(h_br, h_rm, setup, paths_br, paths_rm, sigma, rng, opts).stage("passive stage 1")?;
    let est = stage2(h_br, h_rm, &angles, setup, sigma, rng, opts).stage("passive stage 2")?;
    Ok(PassiveEstimate {
        training_uses: angles.training_uses + est.training_uses,
        theta_br: angles.theta_br,
        phi_rm: angles.phi_rm,
        cascade: est.cascade,
        solver_iterations: angles.solver_iterations + est.solver_iterations,
        converged: angles.converged && est.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{freqs, synth_link, LinkParams};
    use crate::spectral::match_permutation;
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn links(seed: u64) -> (LinkParams, CMatrix, LinkParams, CMatrix) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let (br, h_br) = synth_link(32, 16, 2, 0.125, 0.25, &mut r).unwrap();
        let (rm, h_rm) = synth_link(16, 32, 2, 0.25, 0.125, &mut r).unwrap();
        (br, h_br, rm, h_rm)
    }

    fn close(est: &[SpatialFrequency], truth: &[SpatialFrequency], tol: f64) -> bool {
        let perm = match_permutation(est, truth).unwrap();
        truth.iter().enumerate().all(|(i, t)| est[perm[i]].distance(*t) < tol)
    }

    #[test]
    fn default_budget_is_forty() {
        let s = PassiveSetup::default();
        assert_eq!(s.overhead(2, 2), 40);
        assert!(PassiveSetup { t_blocks: 0, ..s }.validate().is_err());
        let spans: Vec<_> = chunks(5, 2).collect();
        assert_eq!(spans, vec![0..2, 2..4, 4..5]);
    }

    #[test]
    fn noiseless_stage1_with_full_combining() {
        let (br, h_br, rm, h_rm) = links(31);
        let setup = PassiveSetup { n0: 16, m0: 16, t_blocks: 12, n_rf_ms: 16 };
        let mut r = ChaCha8Rng::seed_from_u64(1);
        let a = stage1(&h_br, &h_rm, &setup, 2, 2, 0.0, &mut r, &SolverOptions::default()).unwrap();
        assert!(close(&a.theta_br, &br.departure_freqs, 1e-3));
        assert!(close(&a.phi_rm, &rm.arrival_freqs, 1e-3));
    }

    #[test]
    fn stage1_support_does_not_depend_on_phase_vector() {
        // The RIS phases only reweight the path mixture of the effective channel.
        let (br, h_br, rm, h_rm) = links(32);
        let setup = PassiveSetup::default();
        let opts = SolverOptions::default();
        let a = stage1(&h_br, &h_rm, &setup, 2, 2, 0.0, &mut ChaCha8Rng::seed_from_u64(2), &opts).unwrap();
        let b = stage1(&h_br, &h_rm, &setup, 2, 2, 0.0, &mut ChaCha8Rng::seed_from_u64(3), &opts).unwrap();
        for e in [&a, &b] {
            assert!(close(&e.theta_br, &br.departure_freqs, 1e-3));
            assert!(close(&e.phi_rm, &rm.arrival_freqs, 1e-3));
        }
    }

    #[test]
    fn stage2_with_exact_angles() {
        let (br, h_br, rm, h_rm) = links(33);
        let angles = AngleEstimate {
            theta_br: br.departure_freqs.clone(),
            phi_rm: rm.arrival_freqs.clone(),
            training_uses: 0,
            solver_iterations: 0,
            converged: true,
        };
        let setup = PassiveSetup::default();
        let mut r = ChaCha8Rng::seed_from_u64(4);
        let est = stage2(&h_br, &h_rm, &angles, &setup, 0.0, &mut r, &SolverOptions::default()).unwrap();
        assert_eq!(est.training_uses, 24);
        // Exact angles keep the (l, p) labels aligned with the truth.
        let truth = CascadeParams::from_links(&br, &rm);
        for i in 0..4 {
            assert!(est.cascade.delta_freqs[i].distance(truth.delta_freqs[i]) < 1e-3);
            let rel = (est.cascade.product_gains[i] - truth.product_gains[i]).norm() / truth.product_gains[i].norm();
            assert!(rel < 1e-2, "gain {i}: relative error {rel}");
        }
    }

    #[test]
    fn stage2_single_paths_are_exact() {
        let br = LinkParams::new(freqs(&[0.31]), freqs(&[-0.12]), vec![Complex64::new(0.7, -0.4)]).unwrap();
        let rm = LinkParams::new(freqs(&[0.05]), freqs(&[-0.22]), vec![Complex64::new(-1.2, 0.3)]).unwrap();
        let angles = AngleEstimate {
            theta_br: br.departure_freqs.clone(),
            phi_rm: rm.arrival_freqs.clone(),
            training_uses: 0,
            solver_iterations: 0,
            converged: true,
        };
        let est = stage2(
            &br.channel_matrix(32, 16),
            &rm.channel_matrix(16, 32),
            &angles,
            &PassiveSetup::default(),
            0.0,
            &mut ChaCha8Rng::seed_from_u64(5),
            &SolverOptions::default(),
        )
        .unwrap();
        let truth = CascadeParams::from_links(&br, &rm);
        assert!(est.cascade.delta_freqs[0].distance(truth.delta_freqs[0]) < 1e-5);
        assert!((est.cascade.product_gains[0] - truth.product_gains[0]).norm() < 1e-3 * truth.product_gains[0].norm());
    }

    #[test]
    fn stage2_zero_channel_stays_at_noise_floor() {
        let angles = AngleEstimate {
            theta_br: freqs(&[0.1, -0.2]),
            phi_rm: freqs(&[0.3, -0.1]),
            training_uses: 0,
            solver_iterations: 0,
            converged: true,
        };
        let sigma = 0.1;
        let setup = PassiveSetup::default();
        let est = stage2(
            &CMatrix::zeros(32, 16),
            &CMatrix::zeros(16, 32),
            &angles,
            &setup,
            sigma,
            &mut ChaCha8Rng::seed_from_u64(6),
            &SolverOptions::default(),
        )
        .unwrap();
        let bound = 10.0 * sigma / (setup.t_blocks as f64).sqrt();
        assert!(est.cascade.product_gains.iter().all(|g| g.norm() < bound), "{:?}", est.cascade.product_gains);
    }

    #[test]
    fn noiseless_end_to_end() {
        let (br, h_br, rm, h_rm) = links(34);
        let mut r = ChaCha8Rng::seed_from_u64(7);
        let setup = PassiveSetup::default();
        let est = estimate_passive(&h_br, &h_rm, &setup, 2, 2, 0.0, &mut r, &SolverOptions::default()).unwrap();
        assert_eq!(est.training_uses, setup.overhead(2, 2));
        assert_eq!((est.theta_br.len(), est.phi_rm.len(), est.cascade.len()), (2, 2, 4));
        let truth = CascadeParams::from_links(&br, &rm);
        let (md, mr) = crate::metrics::cascade_errors(&truth, &est.cascade).unwrap();
        let mp = crate::metrics::mse_freqs(&rm.arrival_freqs, &est.phi_rm, 2).unwrap();
        let mt = crate::metrics::mse_freqs(&br.departure_freqs, &est.theta_br, 2).unwrap();
        for v in [md, mr, mp, mt] {
            assert!(v <= 1e-6, "{md:e} {mr:e} {mp:e} {mt:e}");
        }
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let (_, h_br, _, h_rm) = links(35);
        let opts = SolverOptions::default();
        let s = PassiveSetup::default();
        let a = estimate_passive(&h_br, &h_rm, &s, 2, 2, 0.5, &mut ChaCha8Rng::seed_from_u64(8), &opts).unwrap();
        let b = estimate_passive(&h_br, &h_rm, &s, 2, 2, 0.5, &mut ChaCha8Rng::seed_from_u64(8), &opts).unwrap();
        assert_eq!(a.cascade, b.cascade);
        assert_eq!(a.phi_rm, b.phi_rm);
    }
}
