//! Experiment configuration, read from TOML.
//!
//! Every key is optional and defaults to the reference scenario; unknown keys
//! are rejected.
//!
//! ```toml
//! n_bs = 16
//! n_ris = 32
//! n_ms = 16
//! paths_br = 2
//! paths_rm = 2
//! snr_grid_db = [-10.0, -5.0, 0.0, 5.0]
//! trials = 2000
//! architectures = ["passive", "setup1", "setup2", "setup3", "setup4", "setup5", "full_active"]
//! seed = 1
//! min_sep_rule = "4/N"
//! training_budget = 40
//! se_on_estimate = false
//! full_active_beams = 20
//!
//! [passive]
//! n0 = 16
//! m0 = 16
//! t_blocks = 12
//! n_rf_ms = 16
//!
//! [solver]
//! tau_scale = 1.0
//! penalty = 1.0
//! max_iters = 3000
//! tol_primal = 1e-5
//! tol_dual = 1e-5
//! tau_floor = 1e-4
//! adaptive_penalty = true
//!
//! [[hybrid_setups]]        # five entries, in table order
//! n_beams = 20
//! n_active = 12
//! n_rf = 12
//! per_beam_combiners = false
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::anm::SolverOptions;
use crate::error::{Error, Result};
use crate::hybrid::{HybridSetup, TABLE1};
use crate::metrics::Arch;
use crate::passive::PassiveSetup;

/// Largest path count accepted (pairing is exhaustive over permutations).
pub const MAX_PATHS: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub n_bs: usize,
    pub n_ris: usize,
    pub n_ms: usize,
    pub paths_br: usize,
    pub paths_rm: usize,
    pub snr_grid_db: Vec<f64>,
    pub trials: usize,
    pub architectures: Vec<Arch>,
    pub hybrid_setups: Vec<HybridSetup>,
    pub passive: PassiveSetup,
    pub solver: SolverOptions,
    pub seed: u64,
    /// Minimum wrap-around frequency separation on an `N`-element array, as
    /// `"<k>/N"`.
    pub min_sep_rule: String,
    /// Pilot slots every architecture must use; 0 disables the check.
    pub training_budget: usize,
    /// Evaluate the SE bound on the reconstructed channel instead of the
    /// true one.
    pub se_on_estimate: bool,
    /// Training beams of the fully active RIS (`K = N_RF = N_R`).
    pub full_active_beams: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n_bs: 16,
            n_ris: 32,
            n_ms: 16,
            paths_br: 2,
            paths_rm: 2,
            snr_grid_db: vec![-10.0, -5.0, 0.0, 5.0],
            trials: 2000,
            architectures: Arch::ALL.to_vec(),
            hybrid_setups: TABLE1.to_vec(),
            passive: PassiveSetup::default(),
            solver: SolverOptions::default(),
            seed: 1,
            min_sep_rule: "4/N".into(),
            training_budget: 40,
            se_on_estimate: false,
            full_active_beams: 20,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Numerator `k` of the `"k/N"` separation rule.
    pub fn min_sep_factor(&self) -> Result<f64> {
        let bad = || Error::Config(format!("min_sep_rule must look like \"4/N\", got \"{}\"", self.min_sep_rule));
        let (num, den) = self.min_sep_rule.split_once('/').ok_or_else(bad)?;
        if den.trim() != "N" {
            return Err(bad());
        }
        let k: f64 = num.trim().parse().map_err(|_| bad())?;
        if !(k >= 0.0 && k.is_finite()) {
            return Err(bad());
        }
        Ok(k)
    }

    /// Minimum separation on an `n`-element array.
    pub fn min_sep(&self, n: usize) -> Result<f64> {
        Ok(self.min_sep_factor()? / n as f64)
    }

    /// Hybrid setup used by `arch`, if it is a hybrid architecture.
    pub fn hybrid_setup(&self, arch: Arch) -> Option<HybridSetup> {
        match arch {
            Arch::Passive => None,
            Arch::FullActive => Some(HybridSetup::new(self.full_active_beams, self.n_ris, self.n_ris)),
            _ => arch.setup_index().map(|i| self.hybrid_setups[i]),
        }
    }

    /// Pilot slots consumed by `arch`.
    pub fn overhead(&self, arch: Arch) -> usize {
        match self.hybrid_setup(arch) {
            Some(s) => s.overhead(),
            None => self.passive.overhead(self.paths_br, self.paths_rm),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |m: String| Err(Error::Config(m));
        if self.n_bs == 0 || self.n_ris == 0 || self.n_ms == 0 {
            return cfg_err("array sizes must be positive".into());
        }
        for (name, l) in [("paths_br", self.paths_br), ("paths_rm", self.paths_rm)] {
            if l == 0 || l > MAX_PATHS {
                return cfg_err(format!("{name} must be in 1..={MAX_PATHS}, got {l}"));
            }
        }
        for (n, l) in [
            (self.n_bs, self.paths_br),
            (self.n_ris, self.paths_br),
            (self.n_ris, self.paths_rm),
            (self.n_ms, self.paths_rm),
        ] {
            if l >= n {
                return cfg_err(format!("{l} paths cannot be resolved on a {n}-element array"));
            }
            if !(l as f64 * self.min_sep(n)? < 1.0) {
                return cfg_err(format!(
                    "{l} paths with separation {} do not fit on a {n}-element array",
                    self.min_sep_rule
                ));
            }
        }
        if self.snr_grid_db.is_empty() || self.snr_grid_db.iter().any(|s| s.is_nan() || *s == f64::NEG_INFINITY) {
            return cfg_err("snr_grid_db must be a non-empty list of numbers".into());
        }
        if self.trials == 0 {
            return cfg_err("trials must be positive".into());
        }
        if self.architectures.is_empty() {
            return cfg_err("architectures must not be empty".into());
        }
        if self.hybrid_setups.len() != TABLE1.len() {
            return cfg_err(format!(
                "hybrid_setups needs exactly {} entries, got {}",
                TABLE1.len(),
                self.hybrid_setups.len()
            ));
        }
        if self.full_active_beams == 0 {
            return cfg_err("full_active_beams must be positive".into());
        }
        self.passive.validate()?;
        self.solver.validate()?;
        for &arch in &self.architectures {
            if let Some(s) = self.hybrid_setup(arch) {
                s.validate(self.n_ris)
                    .map_err(|e| Error::Config(format!("{arch}: {e}")))?;
            }
            let used = self.overhead(arch);
            if self.training_budget != 0 && used != self.training_budget {
                return cfg_err(format!(
                    "{arch} uses {used} pilot slots but training_budget is {}",
                    self.training_budget
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_round_trip() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
        assert_eq!(ExperimentConfig::from_toml_str("").unwrap(), cfg);
        for a in Arch::ALL {
            assert_eq!(cfg.overhead(a), 40, "{a}");
        }
    }

    #[test]
    fn documented_example_parses() {
        let doc = include_str!("config.rs");
        let start = doc.find("//! ```toml").unwrap();
        let body: String = doc[start..]
            .lines()
            .skip(1)
            .take_while(|l| !l.starts_with("//! ```"))
            .map(|l| l.trim_start_matches("//!").trim_start().to_string() + "\n")
            .collect();
        let cfg = ExperimentConfig::from_toml_str(&body.replace(
            "[[hybrid_setups]]        # five entries, in table order\nn_beams = 20\nn_active = 12\nn_rf = 12\nper_beam_combiners = false\n",
            "",
        ))
        .unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(ExperimentConfig::from_toml_str("trails = 3"), Err(Error::Config(_))));
        assert!(ExperimentConfig::from_toml_str("[solver]\npenalti = 1.0").is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        for bad in [
            "trials = 0",
            "snr_grid_db = []",
            "architectures = []",
            "architectures = [\"setup9\"]",
            "min_sep_rule = \"4/M\"",
            "paths_br = 7",
            "[passive]\nt_blocks = 11",
            "[solver]\npenalty = -1.0",
        ] {
            assert!(ExperimentConfig::from_toml_str(bad).is_err(), "{bad}");
        }
        let relaxed = "training_budget = 0\n[passive]\nt_blocks = 11";
        assert_eq!(ExperimentConfig::from_toml_str(relaxed).unwrap().passive.t_blocks, 11);
    }

    #[test]
    fn separation_rule() {
        let cfg = ExperimentConfig::default();
        assert_eq!(cfg.min_sep(16).unwrap(), 0.25);
        let cfg = ExperimentConfig {
            min_sep_rule: "2.5/N".into(),
            ..cfg
        };
        assert_eq!(cfg.min_sep(10).unwrap(), 0.25);
    }
}
