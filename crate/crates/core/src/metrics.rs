//! Evaluation quantities: parameter MSEs, RIS gain, spectral-efficiency bound
//! and training overheads.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{cascade, steering_matrix, CascadeParams, PhaseControl, SpatialFrequency};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector};
use crate::spectral::match_permutation;

/// Estimation architecture evaluated by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arch {
    Passive,
    Setup1,
    Setup2,
    Setup3,
    Setup4,
    Setup5,
    FullActive,
}

impl Arch {
    pub const ALL: [Arch; 7] = [
        Arch::Passive,
        Arch::Setup1,
        Arch::Setup2,
        Arch::Setup3,
        Arch::Setup4,
        Arch::Setup5,
        Arch::FullActive,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Arch::Passive => "passive",
            Arch::Setup1 => "setup1",
            Arch::Setup2 => "setup2",
            Arch::Setup3 => "setup3",
            Arch::Setup4 => "setup4",
            Arch::Setup5 => "setup5",
            Arch::FullActive => "full_active",
        }
    }

    /// Position in the hybrid setup table, if this is one of the five setups.
    pub fn setup_index(self) -> Option<usize> {
        match self {
            Arch::Setup1 => Some(0),
            Arch::Setup2 => Some(1),
            Arch::Setup3 => Some(2),
            Arch::Setup4 => Some(3),
            Arch::Setup5 => Some(4),
            _ => None,
        }
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Arch::ALL
            .into_iter()
            .find(|a| a.label() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown architecture '{s}'")))
    }
}

/// Metrics of one Monte Carlo trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialRecord {
    pub arch: Arch,
    pub mse_phi_rm: f64,
    pub mse_theta_br: f64,
    pub mse_delta: f64,
    pub mse_rho: f64,
    pub ris_gain: f64,
    pub se_bits: f64,
    pub overhead: usize,
}

impl TrialRecord {
    pub const METRICS: [&'static str; 7] = [
        "mse_phi_rm",
        "mse_theta_br",
        "mse_delta",
        "mse_rho",
        "ris_gain",
        "se_bits",
        "overhead",
    ];

    /// Values in the order of [`TrialRecord::METRICS`].
    pub fn values(&self) -> [f64; 7] {
        [
            self.mse_phi_rm,
            self.mse_theta_br,
            self.mse_delta,
            self.mse_rho,
            self.ris_gain,
            self.se_bits,
            self.overhead as f64,
        ]
    }
}

/// `2N⌈K/N_RF⌉`.
pub fn overhead_hybrid(n_beams: usize, n_active: usize, n_rf: usize) -> usize {
    2 * n_beams * n_active.div_ceil(n_rf)
}

/// `N₀⌈M₀/N_RF,M⌉ + T·L_br·⌈L_rm/N_RF,M⌉`.
pub fn overhead_passive(n0: usize, m0: usize, t_blocks: usize, paths_br: usize, paths_rm: usize, n_rf_ms: usize) -> usize {
    n0 * m0.div_ceil(n_rf_ms) + t_blocks * paths_br * paths_rm.div_ceil(n_rf_ms)
}

/// `Σ (sin θ − sin θ̂)² / l_norm` under the best pairing; sine differences
/// are wrap-aware (twice the wrapped frequency distance).
pub fn mse_freqs(truth: &[SpatialFrequency], est: &[SpatialFrequency], l_norm: usize) -> Result<f64> {
    let perm = match_permutation(est, truth)?;
    Ok(paired_freq_error(truth, est, &perm) / l_norm as f64)
}

fn paired_freq_error(truth: &[SpatialFrequency], est: &[SpatialFrequency], perm: &[usize]) -> f64 {
    truth
        .iter()
        .zip(perm)
        .map(|(t, &i)| (2.0 * est[i].distance(*t)).powi(2))
        .sum()
}

/// `‖ρ − ρ̂‖² / len`, entries compared in the given order.
pub fn mse_gains(truth: &[Complex64], est: &[Complex64]) -> Result<f64> {
    if truth.len() != est.len() || truth.is_empty() {
        return Err(Error::Dimension(format!(
            "gain MSE needs equal non-zero lengths, got {} and {}",
            truth.len(),
            est.len()
        )));
    }
    let s: f64 = truth.iter().zip(est).map(|(a, b)| (a - b).norm_sqr()).sum();
    Ok(s / truth.len() as f64)
}

/// `(MSE(δ), MSE(ρ))` with both normalized by `L_br·L_rm`; gains follow the
/// angle-difference pairing.
pub fn cascade_errors(truth: &CascadeParams, est: &CascadeParams) -> Result<(f64, f64)> {
    let perm = match_permutation(&est.delta_freqs, &truth.delta_freqs)?;
    let q = truth.len() as f64;
    let delta = paired_freq_error(&truth.delta_freqs, &est.delta_freqs, &perm) / q;
    let paired: Vec<Complex64> = perm.iter().map(|&i| est.product_gains[i]).collect();
    Ok((delta, mse_gains(&truth.product_gains, &paired)?))
}

/// `‖Aᴴ(θ_rm)·Ω·A(φ_br)‖²_F / (L_br·L_rm·N_R²)`.
pub fn ris_gain(theta_rm: &[SpatialFrequency], phi_br: &[SpatialFrequency], omega: &PhaseControl) -> f64 {
    let n_r = omega.len();
    let a_rm = steering_matrix(n_r, theta_rm);
    let mut a_br = steering_matrix(n_r, phi_br);
    for (k, mut row) in a_br.row_iter_mut().enumerate() {
        row *= omega.omega()[k];
    }
    let coupling = a_rm.adjoint() * a_br;
    coupling.norm_squared() / ((theta_rm.len() * phi_br.len()) as f64 * (n_r * n_r) as f64)
}

/// `log₂(1 + |wᴴ·H_rm·Ω·H_br·f|² / σ²)`.
pub fn se_bound(
    h_br: &CMatrix,
    h_rm: &CMatrix,
    omega: &PhaseControl,
    f: &CVector,
    w: &CVector,
    sigma2: f64,
) -> Result<f64> {
    se_of_channel(&cascade(h_rm, omega, h_br)?, f, w, sigma2)
}

/// `log₂(1 + |wᴴ·H·f|² / σ²)` for an end-to-end channel `H`.
pub fn se_of_channel(h: &CMatrix, f: &CVector, w: &CVector, sigma2: f64) -> Result<f64> {
    for (v, name) in [(f, "f"), (w, "w")] {
        if (v.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::Degenerate(format!("beamformer {name} must be unit norm, has {}", v.norm())));
        }
    }
    if h.shape() != (w.len(), f.len()) {
        return Err(Error::Dimension(format!(
            "beamformers ({}, {}) do not fit a {:?} channel",
            w.len(),
            f.len(),
            h.shape()
        )));
    }
    let gain = (w.adjoint() * h * f)[(0, 0)].norm_sqr();
    if sigma2 == 0.0 {
        return Ok(if gain > 0.0 { f64::INFINITY } else { 0.0 });
    }
    Ok((1.0 + gain / sigma2).log2())
}
