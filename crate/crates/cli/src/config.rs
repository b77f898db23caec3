use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use transfer_knn::estimator::NeighborFunctionConfig;
use transfer_knn::rates::SamplePath;
use transfer_knn::{DistributionFamily, HolderFunction, NoiseSpec, RateMode, TransferMethod};

use crate::error::CliError;

/// Reads a JSON config. Errors carry the path of the offending field.
pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner();
        if field == "." {
            CliError::Config(format!("{}: {inner}", path.display()))
        } else {
            CliError::Config(format!("{}: field `{field}`: {inner}", path.display()))
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferConfig {
    pub source: DistributionFamily,
    pub target: DistributionFamily,
    #[serde(default)]
    pub method: Option<TransferMethod>,
    #[serde(default)]
    pub mc_draws: Option<usize>,
    /// Used when `--gamma-grid` is not given.
    #[serde(default)]
    pub gamma_grid: Option<String>,
}

fn exponents_only() -> RateMode {
    RateMode::ExponentsOnly
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesConfig {
    #[serde(with = "transfer_knn::serde_f64")]
    pub gamma: f64,
    #[serde(with = "transfer_knn::serde_f64")]
    pub s: f64,
    pub beta: f64,
    pub d: usize,
    pub n: f64,
    pub m: f64,
    #[serde(default)]
    pub transfer_p: Option<f64>,
    #[serde(default)]
    pub transfer_q: Option<f64>,
    #[serde(default = "exponents_only")]
    pub mode: RateMode,
    #[serde(default)]
    pub path: Option<PathConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathConfig {
    pub sample_path: SamplePath,
    /// Grid over `[0, 1]` in `start:end:step` form.
    pub lambdas: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default)]
    pub estimator: NeighborFunctionConfig,
    /// CSV with header `x_1,...,x_d,y`.
    #[serde(default)]
    pub source_data: Option<PathBuf>,
    #[serde(default)]
    pub target_data: Option<PathBuf>,
    /// CSV with header `x_1,...,x_d` (a trailing `y` column is ignored).
    #[serde(default)]
    pub query_data: Option<PathBuf>,
    #[serde(default)]
    pub generate: Option<GenerateConfig>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateConfig {
    pub source: DistributionFamily,
    pub target: DistributionFamily,
    pub f_star: HolderFunction,
    pub noise: NoiseSpec,
    pub n: usize,
    pub m: usize,
    pub n_test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularityConfig {
    pub distribution: DistributionFamily,
    /// Defaults to the family's own constant.
    #[serde(default)]
    pub theta: Option<f64>,
    #[serde(default)]
    pub x_grid: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub r_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub concentration: Option<ConcentrationConfig>,
    #[serde(default)]
    pub seed: u64,
}

fn default_trials() -> usize {
    100
}

fn default_grid_points() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConcentrationConfig {
    pub n: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Defaults to `5 ceil(ln n)`.
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
}
