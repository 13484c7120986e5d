//! RIS phase design from cascade estimates and BS/MS beamformer design from
//! the reconstructed channel.

use num_complex::Complex64;

use crate::channel::{effective_g, steering_matrix, CascadeParams, LinkParams, PhaseControl, SpatialFrequency};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, CMatrix, CVector};

/// Unit-modulus phase vector maximizing (approximately) the power of the
/// effective coupling `Σ_i |ρ_i ωᵀα(δ_i)|²`: the phases of the principal
/// eigenvector of `CCᴴ`, `C = A(δ)·diag(ρ)`, conjugated.
pub fn design_phase(cascade: &CascadeParams, n_ris: usize) -> Result<PhaseControl> {
    if cascade.is_empty() || n_ris == 0 {
        return Err(Error::Dimension("phase design needs a non-empty cascade and RIS".into()));
    }
    if cascade.product_gains.iter().all(|g| g.norm() == 0.0) {
        return Err(Error::Degenerate("all product gains are zero; no principal direction".into()));
    }
    let mut c = steering_matrix(n_ris, &cascade.delta_freqs);
    for (j, mut col) in c.column_iter_mut().enumerate() {
        col *= cascade.product_gains[j];
    }
    let e1 = hermitian_eigen(&(&c * c.adjoint()))?.principal();
    let ref_phase = e1[0].arg();
    let phases: Vec<f64> = e1.iter().map(|z| -(z.arg() - ref_phase)).collect();
    Ok(PhaseControl::from_phases(&phases))
}

/// Estimated channel parameters from either architecture.
#[derive(Debug, Clone)]
pub enum ChannelEstimate {
    /// Both links estimated individually (hybrid RIS).
    Links { br: LinkParams, rm: LinkParams },
    /// Only the identifiable cascade quantities (passive RIS): BS departure
    /// frequencies, MS arrival frequencies and the cascade, indexed
    /// `p·L_br + l` against `theta_br[l]`, `phi_rm[p]`.
    Cascade {
        theta_br: Vec<SpatialFrequency>,
        phi_rm: Vec<SpatialFrequency>,
        cascade: CascadeParams,
    },
}

/// `Ĥ = Ĥ_rm·Ω·Ĥ_br`, or for cascade-only estimates
/// `A(φ̂_rm)·Ĝ·Aᴴ(θ̂_br)` with `Ĝ[p, l] = ρ̂_pl·ωᵀα(δ̂_pl)`.
pub fn reconstruct_channel(est: &ChannelEstimate, omega: &PhaseControl, n_bs: usize, n_ms: usize) -> Result<CMatrix> {
    match est {
        ChannelEstimate::Links { br, rm } => {
            let n_r = omega.len();
            crate::channel::cascade(&rm.channel_matrix(n_ms, n_r), omega, &br.channel_matrix(n_r, n_bs))
        }
        ChannelEstimate::Cascade {
            theta_br,
            phi_rm,
            cascade,
        } => {
            if theta_br.len() != cascade.paths_br || phi_rm.len() != cascade.paths_rm {
                return Err(Error::Dimension(format!(
                    "cascade has {}x{} paths but {} BS and {} MS frequencies were given",
                    cascade.paths_br,
                    cascade.paths_rm,
                    theta_br.len(),
                    phi_rm.len()
                )));
            }
            let g = effective_g(cascade, omega);
            let g_mat = CMatrix::from_fn(cascade.paths_rm, cascade.paths_br, |p, l| g[cascade.index(l, p)]);
            Ok(steering_matrix(n_ms, phi_rm) * g_mat * steering_matrix(n_bs, theta_br).adjoint())
        }
    }
}

/// Dominant singular pair of `Ĥ`: `(f, w)` with `f` the right and `w` the
/// left singular vector.
pub fn design_beamformers(h_hat: &CMatrix) -> Result<(CVector, CVector)> {
    if h_hat.is_empty() || h_hat.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
        return Err(Error::Degenerate("beamformer design on a zero channel".into()));
    }
    let svd = h_hat.clone().svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::Eigen("SVD did not return singular vectors".into())),
    };
    let top = svd.singular_values.imax();
    let f = v_t.row(top).adjoint();
    let w = u.column(top).into_owned();
    Ok((f, w))
}
