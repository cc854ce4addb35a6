//! Per-experiment JSON configs. Every field is optional in the file;
//! `--paper-scale` raises trial counts from the quick desk-scale
//! defaults to full scale.

use serde::{Deserialize, Serialize};

fn default_seed() -> u64 {
    0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BiasConfig {
    pub steps: u64,
    /// Burn-in; u64::MAX means "use the default rule" (1000 or 1% of
    /// steps, whichever is larger).
    pub burn_in: Option<u64>,
    pub stride: u64,
    pub rho: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

impl Default for BiasConfig {
    fn default() -> Self {
        Self {
            steps: 1_000_000,
            burn_in: None,
            stride: 1,
            rho: 0.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BadmixConfig {
    pub n_bank: usize,
    pub beta: f64,
    pub m1: f64,
    pub m2: f64,
    pub trials: usize,
    pub total_updates: u64,
    pub checkpoint_every: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

impl Default for BadmixConfig {
    fn default() -> Self {
        let core = gibbs_core::experiments::BadmixConfig::default();
        Self {
            n_bank: core.n_bank,
            beta: core.beta,
            m1: core.m1,
            m2: core.m2,
            trials: core.trials,
            total_updates: core.total_updates,
            checkpoint_every: core.checkpoint_every,
            seed: 0,
        }
    }
}

impl BadmixConfig {
    pub fn paper_scale(&mut self) {
        self.trials = 10_000;
    }

    pub fn to_core(&self) -> gibbs_core::experiments::BadmixConfig {
        gibbs_core::experiments::BadmixConfig {
            n_bank: self.n_bank,
            beta: self.beta,
            m1: self.m1,
            m2: self.m2,
            trials: self.trials,
            total_updates: self.total_updates,
            checkpoint_every: self.checkpoint_every,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TauSweepConfig {
    pub n: usize,
    pub degree: usize,
    pub beta: f64,
    pub support_max: u64,
    pub tau_star_grid: Vec<f64>,
    pub trials: usize,
    pub epsilon: f64,
    pub max_steps: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

impl Default for TauSweepConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            degree: 3,
            beta: 0.2,
            support_max: 200,
            tau_star_grid: vec![0.0, 50.0, 100.0, 150.0, 200.0],
            trials: 1000,
            epsilon: 0.25,
            max_steps: gibbs_core::coupling::DEFAULT_COUPLING_CAP,
            seed: 0,
        }
    }
}

impl TauSweepConfig {
    pub fn paper_scale(&mut self) {
        self.trials = 10_000;
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThroughputConfig {
    pub n: usize,
    pub degree: usize,
    pub beta: f64,
    pub worker_counts: Vec<usize>,
    pub steps_per_point: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

impl Default for ThroughputConfig {
    fn default() -> Self {
        Self {
            n: 1_000_000,
            degree: 3,
            beta: 0.2,
            worker_counts: vec![1, 2, 4, 8],
            steps_per_point: 4_000_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct InfluenceConfig {
    /// Path to a model file in the JSON model format; the bias example
    /// when absent.
    pub model_file: Option<String>,
    /// Inline model, overriding `model_file`.
    pub model: Option<gibbs_core::modelfile::ModelFile>,
    /// When set, report the Ising closed form instead of enumerating.
    pub ising: Option<IsingPreset>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IsingPreset {
    pub n: usize,
    pub degree: usize,
    pub beta: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsConfig {
    pub n: u64,
    /// Total influence; derived from `ising` when absent.
    pub alpha: Option<f64>,
    pub ising: Option<IsingPreset>,
    pub tau: f64,
    pub tau_star: f64,
    pub omega: u64,
    pub epsilon: f64,
    pub t: u64,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            alpha: None,
            ising: Some(IsingPreset {
                n: 1000,
                degree: 3,
                beta: 0.2,
            }),
            tau: 1.0,
            tau_star: 200.0,
            omega: 1,
            epsilon: 0.25,
            t: 1000,
        }
    }
}
