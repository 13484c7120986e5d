//! Two-way training at a hybrid RIS with `K` active elements and `N_RF`
//! receive chains, and per-link parameter estimation.
//!
//! Downlink pilots from the BS observe `H_br`; uplink pilots from the MS
//! observe `H_rmᵀ` (reciprocity). Each observation is `E·H·X + noise` with
//! `E` the effective measurement matrix of the plan.

use itertools::Itertools;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::anm::{effective_tau, matrix_anm, matrix_anm_dense, AnmSolution, SolverOptions};
use crate::channel::{steering_matrix, CascadeParams, LinkParams, SpatialFrequency};
use crate::error::{Error, Result, StageExt};
use crate::linalg::{complex_gaussian, khatri_rao, kron, random_phase, vectorize, CMatrix, CVector};
use crate::metrics::overhead_hybrid;
use crate::spectral::{ls_gains, rootmusic};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombinerMode {
    /// `K = N_RF`: every active element has its own chain.
    Direct,
    /// `N_RF < K`: random-phase analog combining over `⌈K/N_RF⌉` snapshots.
    AnalogRandomPhase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HybridSetup {
    /// Training beams `N` per direction.
    pub n_beams: usize,
    /// Active elements `K`.
    pub n_active: usize,
    /// RF chains `N_RF`.
    pub n_rf: usize,
    /// Draw fresh analog combiners for every beam instead of one set per
    /// training block.
    #[serde(default)]
    pub per_beam_combiners: bool,
}

impl HybridSetup {
    pub const fn new(n_beams: usize, n_active: usize, n_rf: usize) -> Self {
        HybridSetup {
            n_beams,
            n_active,
            n_rf,
            per_beam_combiners: false,
        }
    }

    pub fn combiner_mode(&self) -> CombinerMode {
        if self.n_rf == self.n_active {
            CombinerMode::Direct
        } else {
            CombinerMode::AnalogRandomPhase
        }
    }

    /// Combining snapshots per beam, `⌈K/N_RF⌉`.
    pub fn snapshots(&self) -> usize {
        self.n_active.div_ceil(self.n_rf)
    }

    /// Two-way training overhead `2N⌈K/N_RF⌉`.
    pub fn overhead(&self) -> usize {
        overhead_hybrid(self.n_beams, self.n_active, self.n_rf)
    }

    pub fn validate(&self, n_ris: usize) -> Result<()> {
        if self.n_beams == 0 || self.n_rf == 0 || self.n_rf > self.n_active || self.n_active > n_ris {
            return Err(Error::Config(format!(
                "hybrid setup needs N ≥ 1 and 1 ≤ N_RF ≤ K ≤ N_R; got N = {}, K = {}, N_RF = {}, N_R = {n_ris}",
                self.n_beams, self.n_active, self.n_rf
            )));
        }
        Ok(())
    }
}

/// The five hybrid configurations sharing a 40-slot training budget.
pub const TABLE1: [HybridSetup; 5] = [
    HybridSetup::new(20, 12, 12),
    HybridSetup::new(20, 16, 16),
    HybridSetup::new(20, 32, 32),
    HybridSetup::new(10, 12, 6),
    HybridSetup::new(10, 16, 8),
];

/// Active-element selection and combining used for one training block.
#[derive(Debug, Clone)]
pub struct MeasurementPlan {
    pub n_ris: usize,
    /// Indices of the active elements, ascending.
    pub selection: Vec<usize>,
    /// Analog combiners (`N_RF × K`), indexed `[beam][snapshot]`; a single
    /// beam entry when combiners are fixed, empty in direct mode.
    pub combiners: Vec<Vec<CMatrix>>,
    /// Stacked measurement matrices `E`, one per beam or a single shared one.
    pub effective: Vec<CMatrix>,
}

impl MeasurementPlan {
    /// `K × N_R` row-selection matrix.
    pub fn selection_matrix(&self) -> CMatrix {
        CMatrix::from_fn(self.selection.len(), self.n_ris, |i, j| {
            if self.selection[i] == j {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    pub fn is_per_beam(&self) -> bool {
        self.effective.len() > 1
    }

    /// Rows of one beam's observation.
    pub fn rows(&self) -> usize {
        self.effective[0].nrows()
    }

    /// Combining snapshots per beam.
    pub fn snapshots(&self) -> usize {
        self.combiners.first().map_or(1, |c| c.len())
    }

    pub fn effective_for(&self, beam: usize) -> &CMatrix {
        if self.is_per_beam() {
            &self.effective[beam]
        } else {
            &self.effective[0]
        }
    }

    /// Plan with every matrix conjugated.
    pub fn conjugate(&self) -> MeasurementPlan {
        MeasurementPlan {
            n_ris: self.n_ris,
            selection: self.selection.clone(),
            combiners: self
                .combiners
                .iter()
                .map(|b| b.iter().map(|c| c.conjugate()).collect())
                .collect(),
            effective: self.effective.iter().map(|e| e.conjugate()).collect(),
        }
    }
}

/// Draws the active elements and (in analog mode) the combiners.
pub fn build_plan<R: Rng + ?Sized>(setup: &HybridSetup, n_ris: usize, rng: &mut R) -> Result<MeasurementPlan> {
    setup.validate(n_ris)?;
    let k = setup.n_active;
    let mut selection = rand::seq::index::sample(rng, n_ris, k).into_vec();
    selection.sort_unstable();
    let mut plan = MeasurementPlan {
        n_ris,
        selection,
        combiners: Vec::new(),
        effective: Vec::new(),
    };
    let m = plan.selection_matrix();
    match setup.combiner_mode() {
        CombinerMode::Direct => plan.effective.push(m),
        CombinerMode::AnalogRandomPhase => {
            let beams = if setup.per_beam_combiners { setup.n_beams } else { 1 };
            let scale = 1.0 / (k as f64).sqrt();
            for _ in 0..beams {
                let set: Vec<CMatrix> = (0..setup.snapshots())
                    .map(|_| random_phase(setup.n_rf, k, scale, rng))
                    .collect();
                let stacked = vstack(&set.iter().map(|c| c * &m).collect::<Vec<_>>());
                plan.combiners.push(set);
                plan.effective.push(stacked);
            }
        }
    }
    Ok(plan)
}

fn vstack(blocks: &[CMatrix]) -> CMatrix {
    let cols = blocks[0].ncols();
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = CMatrix::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        out.view_mut((r, 0), b.shape()).copy_from(b);
        r += b.nrows();
    }
    out
}

/// Unit-norm random-phase training matrix (`n × beams`).
pub fn training_matrix<R: Rng + ?Sized>(n: usize, beams: usize, rng: &mut R) -> CMatrix {
    random_phase(n, beams, 1.0 / (n as f64).sqrt(), rng)
}

/// Noise after selection and combining; one independent realization per
/// snapshot and beam.
fn plan_noise<R: Rng + ?Sized>(plan: &MeasurementPlan, beams: usize, sigma: f64, rng: &mut R) -> CMatrix {
    let k = plan.selection.len();
    if plan.combiners.is_empty() {
        return complex_gaussian(k, beams, sigma, rng);
    }
    if !plan.is_per_beam() {
        let blocks: Vec<CMatrix> = plan.combiners[0]
            .iter()
            .map(|c| c * complex_gaussian(k, beams, sigma, rng))
            .collect();
        return vstack(&blocks);
    }
    let mut out = CMatrix::zeros(plan.rows(), beams);
    for n in 0..beams {
        let col: Vec<CMatrix> = plan.combiners[n]
            .iter()
            .map(|c| c * complex_gaussian(k, 1, sigma, rng))
            .collect();
        out.set_column(n, &vstack(&col).column(0));
    }
    out
}

/// `E·H·X + noise` for a channel seen from the RIS (`N_R` rows).
fn observe<R: Rng + ?Sized>(h: &CMatrix, plan: &MeasurementPlan, x: &CMatrix, sigma: f64, rng: &mut R) -> Result<CMatrix> {
    if h.nrows() != plan.n_ris || h.ncols() != x.nrows() {
        return Err(Error::Dimension(format!(
            "training: channel is {:?}, plan expects {} rows, pilots are {:?}",
            h.shape(),
            plan.n_ris,
            x.shape()
        )));
    }
    if plan.is_per_beam() && plan.effective.len() != x.ncols() {
        return Err(Error::Dimension(format!(
            "training: {} per-beam combiner sets for {} beams",
            plan.effective.len(),
            x.ncols()
        )));
    }
    let hx = h * x;
    let mut y = if plan.is_per_beam() {
        let mut y = CMatrix::zeros(plan.rows(), x.ncols());
        for n in 0..x.ncols() {
            y.set_column(n, &(plan.effective_for(n) * hx.column(n)));
        }
        y
    } else {
        &plan.effective[0] * hx
    };
    if sigma > 0.0 {
        y += plan_noise(plan, x.ncols(), sigma, rng);
    }
    Ok(y)
}

/// Downlink observation of `H_br` (`N_R × N_B`) under BS pilots `X`.
pub fn train_downlink<R: Rng + ?Sized>(
    h_br: &CMatrix,
    plan: &MeasurementPlan,
    x: &CMatrix,
    sigma: f64,
    rng: &mut R,
) -> Result<CMatrix> {
    observe(h_br, plan, x, sigma, rng)
}

/// Uplink observation of `H_rmᵀ` (`N_R × N_M`) under MS pilots `X_ms`.
pub fn train_uplink<R: Rng + ?Sized>(
    h_rm: &CMatrix,
    plan: &MeasurementPlan,
    x_ms: &CMatrix,
    sigma: f64,
    rng: &mut R,
) -> Result<CMatrix> {
    observe(&h_rm.transpose(), plan, x_ms, sigma, rng)
}

/// Linear map from `vec(H)` to `vec(Y)` under a per-beam plan.
fn dense_operator(plan: &MeasurementPlan, x: &CMatrix) -> CMatrix {
    let blocks: Vec<CMatrix> = (0..x.ncols())
        .map(|n| kron(&CMatrix::from_fn(1, x.nrows(), |_, j| x[(j, n)]), plan.effective_for(n)))
        .collect();
    vstack(&blocks)
}

/// Maps path gains to `vec(Y)` for the given row/column frequencies:
/// `(Xᵀ ⊗ E)(A*(cols) ⊙ A(rows))`.
fn gain_operator(plan: &MeasurementPlan, x: &CMatrix, rows: &[SpatialFrequency], cols: &[SpatialFrequency]) -> Result<CMatrix> {
    let a_r = steering_matrix(plan.n_ris, rows);
    let a_c = steering_matrix(x.nrows(), cols);
    let atoms = khatri_rao(&a_c.conjugate(), &a_r)?;
    let op = if plan.is_per_beam() {
        dense_operator(plan, x)
    } else {
        kron(&x.transpose(), &plan.effective[0])
    };
    Ok(op * atoms)
}

/// Estimated link together with solver diagnostics.
#[derive(Debug, Clone)]
pub struct LinkEstimate {
    pub params: LinkParams,
    pub solver_iterations: usize,
    pub converged: bool,
}

/// Recovers `A(rows)·diag(gains)·Aᴴ(cols)` (`N_R × n_cols`) from
/// `Y = E·H·X + noise` with `paths` known.
///
/// Row frequencies land in `arrival_freqs`, column frequencies in
/// `departure_freqs`. Row/column pairing is the one with the smallest
/// least-squares residual.
pub fn estimate_link(
    y: &CMatrix,
    plan: &MeasurementPlan,
    x: &CMatrix,
    paths: usize,
    sigma: f64,
    opts: &SolverOptions,
) -> Result<LinkEstimate> {
    let dims = (plan.n_ris, x.nrows());
    let tau = effective_tau(sigma, dims.0, dims.1, y.norm(), opts);
    let sol: AnmSolution = if plan.is_per_beam() {
        matrix_anm_dense(&vectorize(y), &dense_operator(plan, x), dims, tau, opts)?
    } else {
        matrix_anm(y, &plan.effective[0], x, dims, tau, opts)?
    };
    let right = sol
        .toeplitz_right
        .as_ref()
        .ok_or_else(|| Error::Degenerate("matrix ANM returned no column Toeplitz block".into()))?;
    let rows = rootmusic(&sol.toeplitz_left.materialize(), paths)?;
    let cols = rootmusic(&right.materialize(), paths)?;

    let y_vec = vectorize(y);
    let mut best: Option<(f64, Vec<SpatialFrequency>, CVector)> = None;
    let mut last_err = None;
    for perm in (0..paths).permutations(paths) {
        let cols_p: Vec<SpatialFrequency> = perm.iter().map(|&i| cols[i]).collect();
        let op = gain_operator(plan, x, &rows, &cols_p)?;
        match ls_gains(&op, &y_vec) {
            Ok(g) => {
                let resid = (&op * &g - &y_vec).norm();
                if best.as_ref().is_none_or(|b| resid < b.0) {
                    best = Some((resid, cols_p, g));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    let (_, cols, gains) = match best {
        Some(b) => b,
        None => return Err(last_err.unwrap_or_else(|| Error::Degenerate("no gain fit".into()))),
    };
    Ok(LinkEstimate {
        params: LinkParams::new(rows, cols, gains.iter().copied().collect())?,
        solver_iterations: sol.iterations,
        converged: sol.converged,
    })
}

/// Output of the hybrid two-way procedure.
#[derive(Debug, Clone)]
pub struct HybridEstimate {
    /// BS–RIS link: arrival = RIS side `φ_br`, departure = BS side `θ_br`.
    pub br: LinkParams,
    /// RIS–MS link: arrival = MS side `φ_rm`, departure = RIS side `θ_rm`.
    pub rm: LinkParams,
    pub cascade: CascadeParams,
    /// Pilot slots consumed over both directions.
    pub training_uses: usize,
    pub solver_iterations: usize,
    pub converged: bool,
}

/// Runs downlink and uplink training at a hybrid RIS and estimates both links
/// and the cascade parameters.
#[allow(clippy::too_many_arguments)]
pub fn estimate_hybrid<R: Rng + ?Sized>(
    h_br: &CMatrix,
    h_rm: &CMatrix,
    setup: &HybridSetup,
    paths_br: usize,
    paths_rm: usize,
    sigma: f64,
    rng: &mut R,
    opts: &SolverOptions,
) -> Result<HybridEstimate> {
    let n_ris = h_br.nrows();
    if h_rm.ncols() != n_ris {
        return Err(Error::Dimension(format!(
            "H_br has {n_ris} RIS rows but H_rm has {} RIS columns",
            h_rm.ncols()
        )));
    }
    let plan = build_plan(setup, n_ris, rng)?;
    let n = setup.n_beams;

    let x_bs = training_matrix(h_br.ncols(), n, rng);
    let y_dl = train_downlink(h_br, &plan, &x_bs, sigma, rng)?;
    let br = estimate_link(&y_dl, &plan, &x_bs, paths_br, sigma, opts).stage("hybrid downlink")?;

    // The uplink sees H_rmᵀ = A*(θ_rm) diag(ρ) Aᵀ(φ_rm); conjugating the
    // observation restores the A(θ_rm) diag(ρ*) Aᴴ(φ_rm) form.
    let x_ms = training_matrix(h_rm.nrows(), n, rng);
    let y_ul = train_uplink(h_rm, &plan, &x_ms, sigma, rng)?;
    let ul = estimate_link(&y_ul.conjugate(), &plan.conjugate(), &x_ms.conjugate(), paths_rm, sigma, opts)
        .stage("hybrid uplink")?;
    let rm = LinkParams::new(
        ul.params.departure_freqs.clone(),
        ul.params.arrival_freqs.clone(),
        ul.params.gains.iter().map(|g| g.conj()).collect(),
    )?;

    let cascade = CascadeParams::from_links(&br.params, &rm);
    Ok(HybridEstimate {
        training_uses: 2 * n * plan.snapshots(),
        solver_iterations: br.solver_iterations + ul.solver_iterations,
        converged: br.converged && ul.converged,
        br: br.params,
        rm,
        cascade,
    })
}
