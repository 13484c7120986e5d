//! Monte-Carlo trials, parallel sweeps and CSV result tables.
//!
//! Trials run in parallel but are reduced in trial order, so results do not
//! depend on the worker count.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::channel::{synth_link, CascadeParams};
use crate::control::{design_beamformers, design_phase, reconstruct_channel, ChannelEstimate};
use crate::error::{Error, Result};
use crate::hybrid::estimate_hybrid;
use crate::metrics::{cascade_errors, mse_freqs, ris_gain, se_bound, se_of_channel, Arch, TrialRecord};
use crate::passive::estimate_passive;

/// Environment variable capping the sweep worker count (0 or unset: all cores).
pub const THREADS_ENV: &str = "RIS_ANM_THREADS";

/// Lowest SNR at which failures count against the failure budget.
pub const FAILURE_BUDGET_MIN_SNR_DB: f64 = -5.0;

/// Largest tolerated failure fraction per cell at or above
/// [`FAILURE_BUDGET_MIN_SNR_DB`].
pub const FAILURE_BUDGET: f64 = 0.01;

const CHANNEL_STREAM: u64 = 0x6368_616e;
const ESTIMATOR_STREAM: u64 = 0x6573_7469;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn stream_seed(words: &[u64]) -> u64 {
    words.iter().fold(0, |h, &w| splitmix64(h ^ w))
}

fn snr_key(snr_db: f64) -> u64 {
    // -0.0 and 0.0 are the same operating point.
    (snr_db + 0.0).to_bits()
}

/// Channel draws depend on `(seed, snr, trial)` only, so every architecture
/// sees the same channels and comparisons between them are paired.
pub fn channel_rng(seed: u64, snr_db: f64, trial: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(&[seed, CHANNEL_STREAM, snr_key(snr_db), trial as u64]))
}

/// Pilot, combiner and noise draws of one architecture in one trial.
pub fn estimator_rng(seed: u64, arch: Arch, snr_db: f64, trial: usize) -> ChaCha8Rng {
    let code = Arch::ALL.iter().position(|&a| a == arch).unwrap_or(usize::MAX) as u64;
    ChaCha8Rng::seed_from_u64(stream_seed(&[seed, ESTIMATOR_STREAM, code, snr_key(snr_db), trial as u64]))
}

/// Noise standard deviation for unit transmit power: `σ² = 10^(−SNR/10)`.
pub fn noise_sigma(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 20.0)
}

/// One Monte-Carlo trial of `arch` at `snr_db`.
pub fn run_trial(cfg: &ExperimentConfig, arch: Arch, snr_db: f64, trial: usize) -> Result<TrialRecord> {
    let mut ch_rng = channel_rng(cfg.seed, snr_db, trial);
    let (br, h_br) = synth_link(
        cfg.n_ris,
        cfg.n_bs,
        cfg.paths_br,
        cfg.min_sep(cfg.n_ris)?,
        cfg.min_sep(cfg.n_bs)?,
        &mut ch_rng,
    )?;
    let (rm, h_rm) = synth_link(
        cfg.n_ms,
        cfg.n_ris,
        cfg.paths_rm,
        cfg.min_sep(cfg.n_ms)?,
        cfg.min_sep(cfg.n_ris)?,
        &mut ch_rng,
    )?;
    let truth = CascadeParams::from_links(&br, &rm);

    let sigma = noise_sigma(snr_db);
    let mut rng = estimator_rng(cfg.seed, arch, snr_db, trial);
    let (estimate, training_uses) = match cfg.hybrid_setup(arch) {
        Some(setup) => {
            let e = estimate_hybrid(&h_br, &h_rm, &setup, cfg.paths_br, cfg.paths_rm, sigma, &mut rng, &cfg.solver)?;
            let uses = e.training_uses;
            (ChannelEstimate::Links { br: e.br, rm: e.rm }, uses)
        }
        None => {
            let e = estimate_passive(&h_br, &h_rm, &cfg.passive, cfg.paths_br, cfg.paths_rm, sigma, &mut rng, &cfg.solver)?;
            let uses = e.training_uses;
            let est = ChannelEstimate::Cascade {
                theta_br: e.theta_br,
                phi_rm: e.phi_rm,
                cascade: e.cascade,
            };
            (est, uses)
        }
    };
    let (theta_hat, phi_hat, cascade_hat) = match &estimate {
        ChannelEstimate::Links { br, rm } => (
            br.departure_freqs.clone(),
            rm.arrival_freqs.clone(),
            CascadeParams::from_links(br, rm),
        ),
        ChannelEstimate::Cascade {
            theta_br,
            phi_rm,
            cascade,
        } => (theta_br.clone(), phi_rm.clone(), cascade.clone()),
    };

    let omega = design_phase(&cascade_hat, cfg.n_ris)?;
    let h_hat = reconstruct_channel(&estimate, &omega, cfg.n_bs, cfg.n_ms)?;
    let (f, w) = design_beamformers(&h_hat)?;
    let sigma2 = sigma * sigma;
    let se_bits = if cfg.se_on_estimate {
        se_of_channel(&h_hat, &f, &w, sigma2)?
    } else {
        se_bound(&h_br, &h_rm, &omega, &f, &w, sigma2)?
    };
    let (mse_delta, mse_rho) = cascade_errors(&truth, &cascade_hat)?;
    let record = TrialRecord {
        arch,
        mse_phi_rm: mse_freqs(&rm.arrival_freqs, &phi_hat, cfg.paths_rm)?,
        mse_theta_br: mse_freqs(&br.departure_freqs, &theta_hat, cfg.paths_br)?,
        mse_delta,
        mse_rho,
        ris_gain: ris_gain(&rm.departure_freqs, &br.arrival_freqs, &omega),
        se_bits,
        overhead: training_uses,
    };
    if record.values().iter().any(|v| v.is_nan()) {
        return Err(Error::NonFinite("trial metrics"));
    }
    Ok(record)
}

/// Worker count from [`THREADS_ENV`], defaulting to all available cores.
pub fn worker_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

pub fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))
}

/// All trials of one architecture at one SNR, in trial order.
#[derive(Debug, Clone)]
pub struct Cell {
    pub arch: Arch,
    pub snr_db: f64,
    /// `None` for failed trials.
    pub records: Vec<Option<TrialRecord>>,
}

impl Cell {
    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| r.is_none()).count()
    }

    pub fn successes(&self) -> impl Iterator<Item = &TrialRecord> {
        self.records.iter().flatten()
    }

    pub fn exceeds_failure_budget(&self) -> bool {
        self.snr_db >= FAILURE_BUDGET_MIN_SNR_DB
            && self.failures() as f64 > FAILURE_BUDGET * self.records.len() as f64
    }

    /// One row per metric: mean and standard error over successful trials.
    pub fn summarize(&self) -> Vec<ResultRow> {
        let ok: Vec<[f64; 7]> = self.successes().map(|r| r.values()).collect();
        let n = ok.len();
        TrialRecord::METRICS
            .iter()
            .enumerate()
            .map(|(m, name)| {
                let (mean, std_err) = mean_and_std_err(ok.iter().map(|v| v[m]), n);
                ResultRow {
                    arch: self.arch,
                    snr_db: self.snr_db,
                    metric: (*name).to_string(),
                    mean,
                    std_err,
                    trials: self.records.len(),
                    failures: self.failures(),
                }
            })
            .collect()
    }
}

fn mean_and_std_err(values: impl Iterator<Item = f64> + Clone, n: usize) -> (f64, f64) {
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    if n == 1 || !mean.is_finite() {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Runs every trial of `arch` at `snr_db` on `pool`.
pub fn run_cell(cfg: &ExperimentConfig, arch: Arch, snr_db: f64, pool: &rayon::ThreadPool) -> Cell {
    let records = pool.install(|| {
        (0..cfg.trials)
            .into_par_iter()
            .map(|t| match run_trial(cfg, arch, snr_db, t) {
                Ok(r) => Some(r),
                Err(e) => {
                    warn!("{arch} at {snr_db} dB, trial {t}: {e}");
                    None
                }
            })
            .collect()
    });
    Cell { arch, snr_db, records }
}

/// Every configured architecture at every SNR, architecture-major.
pub fn run_sweep(cfg: &ExperimentConfig, workers: usize) -> Result<Vec<Cell>> {
    cfg.validate()?;
    let pool = thread_pool(workers)?;
    let mut cells = Vec::new();
    for &arch in &cfg.architectures {
        for &snr in &cfg.snr_grid_db {
            cells.push(run_cell(cfg, arch, snr, &pool));
        }
    }
    Ok(cells)
}

/// One line of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub arch: Arch,
    pub snr_db: f64,
    pub metric: String,
    pub mean: f64,
    pub std_err: f64,
    /// Trials attempted, including failures.
    pub trials: usize,
    pub failures: usize,
}

pub const CSV_HEADER: &str = "arch,snr_db,metric,mean,std_err,trials,failures";

/// Incremental CSV writer.
pub struct ResultWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl ResultWriter<File> {
    pub fn create(path: &Path) -> Result<Self> {
        Ok(ResultWriter::new(File::create(path)?))
    }
}

impl<W: Write> ResultWriter<W> {
    pub fn new(w: W) -> Self {
        ResultWriter {
            inner: csv::Writer::from_writer(w),
        }
    }

    pub fn write_rows(&mut self, rows: &[ResultRow]) -> Result<()> {
        for r in rows {
            self.inner.serialize(r).map_err(csv_err)?;
        }
        self.inner.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> Result<W> {
        self.inner
            .into_inner()
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

/// Serializes rows to CSV text.
pub fn rows_to_csv(rows: &[ResultRow]) -> Result<String> {
    let mut w = ResultWriter::new(Vec::new());
    w.write_rows(rows)?;
    if rows.is_empty() {
        return Ok(format!("{CSV_HEADER}\n"));
    }
    String::from_utf8(w.into_inner()?).map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

/// Parses CSV produced by [`ResultWriter`].
pub fn read_results<R: std::io::Read>(r: R) -> Result<Vec<ResultRow>> {
    let mut reader = csv::Reader::from_reader(r);
    let header = reader.headers().map_err(csv_err)?.iter().collect::<Vec<_>>().join(",");
    if header != CSV_HEADER {
        return Err(Error::Config(format!("unexpected results header \"{header}\"")));
    }
    reader
        .deserialize()
        .map(|row| row.map_err(csv_err))
        .collect()
}
