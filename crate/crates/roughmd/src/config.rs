//! Flat JSON run configuration.

use std::path::Path;

use roughmd_core::simulation::{ModelParams, SimGrid};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Every knob of every subcommand in one flat record. Missing keys take the
/// defaults below (the reference parameters at desk scale); command-line flags
/// override file values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    #[serde(alias = "H")]
    pub hurst: f64,
    pub rho: f64,
    pub eta: f64,
    pub sigma0: f64,
    /// Kernel constant `c`; `√(2H)` when absent.
    pub kernel_normalization: Option<f64>,
    pub n_steps: usize,
    /// Horizon of the `covmat` grid.
    pub horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub antithetic: bool,
    pub k: f64,
    /// Moderate exponent; `H/2` when absent.
    pub beta: Option<f64>,
    pub t_list: Vec<f64>,
    pub order: u8,
    pub strike: f64,
    pub t: f64,
    pub x_list: Vec<f64>,
    pub grid_size: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            hurst: 0.3,
            rho: -0.7571,
            eta: 0.2928,
            sigma0: 0.2557,
            kernel_normalization: None,
            n_steps: 256,
            horizon: 1.0,
            n_paths: 100_000,
            seed: 1,
            antithetic: false,
            k: 0.4,
            beta: None,
            t_list: vec![0.05, 0.1, 0.25, 0.5, 1.0],
            order: 3,
            strike: 1.0,
            t: 0.25,
            x_list: (1..=8)
                .flat_map(|i| [-0.01 * i as f64, 0.01 * i as f64])
                .collect(),
            grid_size: 128,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        Self::from_json(&text).map_err(|e| format!("invalid config {}: {e}", path.display()))
    }

    pub fn model(&self) -> roughmd_core::Result<ModelParams> {
        match self.kernel_normalization {
            Some(c) => {
                ModelParams::with_normalization(self.hurst, self.rho, self.eta, self.sigma0, c)
            }
            None => ModelParams::new(self.hurst, self.rho, self.eta, self.sigma0),
        }
    }

    pub fn grid(&self, horizon: f64) -> roughmd_core::Result<SimGrid> {
        SimGrid::new(self.n_steps, horizon)
    }

    pub fn beta(&self) -> f64 {
        self.beta.unwrap_or(0.5 * self.hurst)
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serialises");
        let digest = Sha256::digest(canonical.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}
