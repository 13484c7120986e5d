//! ULA array responses and the geometric BS–RIS–MS channel model.
//!
//! Angles are carried as normalized spatial frequencies `f = sin(angle) / 2`
//! wrapped to `[-0.5, 0.5)`, so the `n`-th array-response entry is
//! `exp(j 2π n f)` (0-based `n`), which matches the half-wavelength phase
//! `exp(jπ n sin(angle))`.

use std::fmt;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{cis_cycles, complex_gaussian, CMatrix, CVector};

/// Wraps a frequency into `[-0.5, 0.5)`.
pub fn wrap_frequency(x: f64) -> f64 {
    let w = x - (x + 0.5).floor();
    if w >= 0.5 {
        w - 1.0
    } else {
        w
    }
}

#[derive(Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct SpatialFrequency(f64);

impl SpatialFrequency {
    pub fn new(value: f64) -> Self {
        SpatialFrequency(wrap_frequency(value))
    }

    pub fn from_angle(radians: f64) -> Self {
        Self::new(radians.sin() / 2.0)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `sin(angle)`, i.e. twice the frequency.
    pub fn sine(self) -> f64 {
        2.0 * self.0
    }

    /// Angle in radians, `asin(2f)`.
    pub fn angle(self) -> f64 {
        self.sine().clamp(-1.0, 1.0).asin()
    }

    /// Signed difference `self - other` on the unit torus, in `[-0.5, 0.5)`.
    pub fn wrapped_diff(self, other: SpatialFrequency) -> f64 {
        wrap_frequency(self.0 - other.0)
    }

    pub fn distance(self, other: SpatialFrequency) -> f64 {
        self.wrapped_diff(other).abs()
    }
}

impl fmt::Debug for SpatialFrequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<f64> for SpatialFrequency {
    fn from(v: f64) -> Self {
        SpatialFrequency::new(v)
    }
}

pub fn freqs(values: &[f64]) -> Vec<SpatialFrequency> {
    values.iter().copied().map(SpatialFrequency::new).collect()
}

pub fn steering_vector(n: usize, f: SpatialFrequency) -> CVector {
    CVector::from_fn(n, |k, _| cis_cycles(k as f64 * f.value()))
}

/// `[α(f₁), …, α(f_L)]`.
pub fn steering_matrix(n: usize, freqs: &[SpatialFrequency]) -> CMatrix {
    CMatrix::from_fn(n, freqs.len(), |k, l| cis_cycles(k as f64 * freqs[l].value()))
}

/// Parameters of one geometric link `A(arrival) · diag(gains) · Aᴴ(departure)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkParams {
    pub arrival_freqs: Vec<SpatialFrequency>,
    pub departure_freqs: Vec<SpatialFrequency>,
    pub gains: Vec<Complex64>,
}

impl LinkParams {
    pub fn new(
        arrival_freqs: Vec<SpatialFrequency>,
        departure_freqs: Vec<SpatialFrequency>,
        gains: Vec<Complex64>,
    ) -> Result<Self> {
        let l = gains.len();
        if l == 0 || arrival_freqs.len() != l || departure_freqs.len() != l {
            return Err(Error::Dimension(format!(
                "link parameters need equal non-zero lengths (arrival {}, departure {}, gains {})",
                arrival_freqs.len(),
                departure_freqs.len(),
                l
            )));
        }
        Ok(LinkParams {
            arrival_freqs,
            departure_freqs,
            gains,
        })
    }

    pub fn paths(&self) -> usize {
        self.gains.len()
    }

    pub fn channel_matrix(&self, n_rx: usize, n_tx: usize) -> CMatrix {
        let a_rx = steering_matrix(n_rx, &self.arrival_freqs);
        let a_tx = steering_matrix(n_tx, &self.departure_freqs);
        let d = CMatrix::from_diagonal(&CVector::from_column_slice(&self.gains));
        a_rx * d * a_tx.adjoint()
    }
}

/// Draws `count` frequencies uniformly on the torus with pairwise wrapped
/// separation at least `min_sep`, by rejection.
pub fn sample_separated<R: Rng + ?Sized>(
    count: usize,
    min_sep: f64,
    rng: &mut R,
) -> Result<Vec<SpatialFrequency>> {
    if !(count as f64 * min_sep < 1.0) || min_sep < 0.0 {
        return Err(Error::Config(format!(
            "cannot place {count} frequencies with minimum separation {min_sep}"
        )));
    }
    const MAX_DRAWS: usize = 10_000;
    loop {
        let mut out: Vec<SpatialFrequency> = Vec::with_capacity(count);
        let mut draws = 0;
        while out.len() < count && draws < MAX_DRAWS {
            draws += 1;
            let cand = SpatialFrequency::new(rng.random::<f64>() - 0.5);
            if out.iter().all(|f| f.distance(cand) >= min_sep) {
                out.push(cand);
            }
        }
        if out.len() == count {
            return Ok(out);
        }
    }
}

/// Synthesizes a random `n_rx × n_tx` link with `paths` paths, CN(0,1) gains
/// and separated frequencies on both sides.
pub fn synth_link<R: Rng + ?Sized>(
    n_rx: usize,
    n_tx: usize,
    paths: usize,
    min_sep_rx: f64,
    min_sep_tx: f64,
    rng: &mut R,
) -> Result<(LinkParams, CMatrix)> {
    if paths == 0 {
        return Err(Error::Config("a link needs at least one path".into()));
    }
    for (sep, side) in [(min_sep_rx, "receive"), (min_sep_tx, "transmit")] {
        if !(paths as f64 * sep < 1.0) {
            return Err(Error::Config(format!(
                "infeasible {side}-side placement: {paths} paths with separation {sep}"
            )));
        }
    }
    let arrival = sample_separated(paths, min_sep_rx, rng)?;
    let departure = sample_separated(paths, min_sep_tx, rng)?;
    let gains: Vec<Complex64> = complex_gaussian(paths, 1, 1.0, rng).iter().copied().collect();
    let link = LinkParams::new(arrival, departure, gains)?;
    let h = link.channel_matrix(n_rx, n_tx);
    Ok((link, h))
}

/// Unit-modulus RIS phase vector `ω = diag(Ω)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseControl {
    omega: CVector,
}

impl PhaseControl {
    pub const MODULUS_TOL: f64 = 1e-12;

    pub fn new(omega: CVector) -> Result<Self> {
        if omega.is_empty() {
            return Err(Error::Dimension("empty phase vector".into()));
        }
        if let Some(k) = omega.iter().position(|z| (z.norm() - 1.0).abs() > Self::MODULUS_TOL) {
            return Err(Error::Degenerate(format!(
                "phase entry {k} has modulus {} (must be 1)",
                omega[k].norm()
            )));
        }
        Ok(PhaseControl { omega })
    }

    pub fn from_phases(phases: &[f64]) -> Self {
        PhaseControl {
            omega: CVector::from_iterator(phases.len(), phases.iter().map(|&p| Complex64::from_polar(1.0, p))),
        }
    }

    pub fn ones(n: usize) -> Self {
        PhaseControl {
            omega: CVector::from_element(n, Complex64::new(1.0, 0.0)),
        }
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let phases: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * std::f64::consts::TAU).collect();
        Self::from_phases(&phases)
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn omega(&self) -> &CVector {
        &self.omega
    }

    pub fn matrix(&self) -> CMatrix {
        CMatrix::from_diagonal(&self.omega)
    }
}

/// `H_rm · diag(ω) · H_br`.
pub fn cascade(h_rm: &CMatrix, omega: &PhaseControl, h_br: &CMatrix) -> Result<CMatrix> {
    let n_r = omega.len();
    if h_rm.ncols() != n_r || h_br.nrows() != n_r {
        return Err(Error::Dimension(format!(
            "cascade: H_rm is {}x{}, ω has {}, H_br is {}x{}",
            h_rm.nrows(),
            h_rm.ncols(),
            n_r,
            h_br.nrows(),
            h_br.ncols()
        )));
    }
    let mut scaled = h_br.clone();
    for (k, mut row) in scaled.row_iter_mut().enumerate() {
        row *= omega.omega()[k];
    }
    Ok(h_rm * scaled)
}

/// Angle differences of the RIS cascade, `wrap(φ_br[l] − θ_rm[p])`, at index
/// `p · L_br + l`.
pub fn angle_differences(phi_br: &[SpatialFrequency], theta_rm: &[SpatialFrequency]) -> Vec<SpatialFrequency> {
    theta_rm
        .iter()
        .flat_map(|&t| phi_br.iter().map(move |&p| SpatialFrequency::new(p.value() - t.value())))
        .collect()
}

/// `ρ_rm ⊗ ρ_br`, same ordering as [`angle_differences`].
pub fn product_gains(rho_rm: &[Complex64], rho_br: &[Complex64]) -> Vec<Complex64> {
    rho_rm
        .iter()
        .flat_map(|&a| rho_br.iter().map(move |&b| a * b))
        .collect()
}

/// Angle differences and product gains of the BS–RIS–MS cascade, indexed by
/// `p · L_br + l` for BS–RIS path `l` and RIS–MS path `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeParams {
    pub delta_freqs: Vec<SpatialFrequency>,
    pub product_gains: Vec<Complex64>,
    pub paths_br: usize,
    pub paths_rm: usize,
}

impl CascadeParams {
    pub fn new(
        delta_freqs: Vec<SpatialFrequency>,
        product_gains: Vec<Complex64>,
        paths_br: usize,
        paths_rm: usize,
    ) -> Result<Self> {
        let q = paths_br * paths_rm;
        if q == 0 || delta_freqs.len() != q || product_gains.len() != q {
            return Err(Error::Dimension(format!(
                "cascade needs {q} entries, got {} angle differences and {} gains",
                delta_freqs.len(),
                product_gains.len()
            )));
        }
        Ok(CascadeParams {
            delta_freqs,
            product_gains,
            paths_br,
            paths_rm,
        })
    }

    /// Cascade of the two links: angle differences use the RIS-side
    /// frequencies (`φ_br` arrival, `θ_rm` departure).
    pub fn from_links(br: &LinkParams, rm: &LinkParams) -> Self {
        CascadeParams {
            delta_freqs: angle_differences(&br.arrival_freqs, &rm.departure_freqs),
            product_gains: product_gains(&rm.gains, &br.gains),
            paths_br: br.paths(),
            paths_rm: rm.paths(),
        }
    }

    pub fn len(&self) -> usize {
        self.delta_freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delta_freqs.is_empty()
    }

    pub fn index(&self, l: usize, p: usize) -> usize {
        p * self.paths_br + l
    }
}

/// `[g]_i = ρ_i · ωᵀ α(δ_i)`.
pub fn effective_g(cascade: &CascadeParams, omega: &PhaseControl) -> Vec<Complex64> {
    let n_r = omega.len();
    cascade
        .delta_freqs
        .iter()
        .zip(&cascade.product_gains)
        .map(|(&d, &rho)| rho * omega.omega().dot(&steering_vector(n_r, d)))
        .collect()
}
