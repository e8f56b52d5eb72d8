//! TOML experiment files. Top-level keys describe the model; one table per
//! subcommand holds its settings. Command-line flags override file values.
//!
//! ```toml
//! model = "cyclic"
//! seed = 7
//!
//! [params]
//! nu = 0.2
//! c = 0.15
//!
//! [simulate]
//! T = 10.0
//! n = 1000
//! z0 = [0.0, 0.0, 0.0]
//! out = "cyclic.csv"
//!
//! [estimate]
//! data = "cyclic.csv"
//! obs_cols = ["y1"]
//! w_grid = [1e15, 1e20]
//! profile_z0 = false
//!
//! [estimate.init]
//! nu = 0.3
//! c = 0.1
//!
//! [solver]
//! max_iter = 30
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::EstimatorOptions;
use crate::models::MODEL_IDS;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: Option<String>,
    pub seed: Option<u64>,
    /// Known model constants (e.g. `s` for `fhn`).
    #[serde(default)]
    pub constants: BTreeMap<String, f64>,
    /// True parameter values.
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub estimate: EstimateSection,
    #[serde(default)]
    pub mc: McSection,
    #[serde(default)]
    pub check_hypo: CheckHypoSection,
    #[serde(default)]
    pub solver: SolverSection,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    #[serde(rename = "T")]
    pub t_end: Option<f64>,
    pub n: Option<usize>,
    pub z0: Option<Vec<f64>>,
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateSection {
    pub data: Option<PathBuf>,
    pub obs_cols: Option<Vec<String>>,
    pub w_grid: Option<Vec<f64>>,
    pub z0: Option<Vec<f64>>,
    pub profile_z0: Option<bool>,
    #[serde(default)]
    pub init: BTreeMap<String, f64>,
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    #[serde(rename = "T")]
    pub t_end: Option<f64>,
    pub n: Option<usize>,
    pub trials: Option<usize>,
    pub w_grid: Option<Vec<f64>>,
    pub z0: Option<Vec<f64>>,
    pub profile_z0: Option<bool>,
    /// Relative half-width of the random start around the truth.
    pub init_perturbation: Option<f64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub table: Option<PathBuf>,
    pub no_timing: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckHypoSection {
    #[serde(rename = "T")]
    pub t_end: Option<f64>,
    pub n: Option<usize>,
    pub z0: Option<Vec<f64>>,
    pub probes: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub epsilon: Option<f64>,
    pub max_iter: Option<usize>,
    pub max_evals: Option<usize>,
    pub simplex_tol: Option<f64>,
    pub simplex_step: Option<f64>,
    pub restarts: Option<usize>,
    pub m_b: Option<usize>,
    pub maximize_k: Option<bool>,
    pub z0_guess: Option<Vec<f64>>,
}

impl SolverSection {
    pub fn apply(&self, opts: &mut EstimatorOptions) {
        if let Some(v) = self.epsilon {
            opts.tracking.epsilon = Some(v);
        }
        if let Some(v) = self.max_iter {
            opts.tracking.max_iter = v;
        }
        if let Some(v) = &self.z0_guess {
            opts.tracking.z0_guess = Some(v.clone());
        }
        if let Some(v) = self.max_evals {
            opts.max_evals = v;
        }
        if let Some(v) = self.simplex_tol {
            opts.simplex_tol = v;
        }
        if let Some(v) = self.simplex_step {
            opts.simplex_step = v;
        }
        if let Some(v) = self.restarts {
            opts.restarts = v;
        }
        if self.m_b.is_some() {
            opts.m_b = self.m_b;
        }
        if let Some(v) = self.maximize_k {
            opts.maximize_k = v;
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Input(format!("config: {e}")))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Input(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn check(&self) -> Result<()> {
        if let Some(m) = &self.model {
            if !MODEL_IDS.contains(&m.as_str()) {
                return Err(Error::UnknownModel(m.clone()));
            }
        }
        for grid in [&self.estimate.w_grid, &self.mc.w_grid].into_iter().flatten() {
            if grid.is_empty() {
                return Err(Error::Input("w_grid must not be empty".into()));
            }
        }
        Ok(())
    }

    pub fn estimator_options(&self) -> EstimatorOptions {
        let mut opts = EstimatorOptions::default();
        self.solver.apply(&mut opts);
        opts
    }
}
