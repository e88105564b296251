use std::path::Path;

use serde::Deserialize;

use plane_gibbs::seed::DEFAULT_SEED;
use plane_gibbs::EnergyModel;

use crate::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    pub model: Option<ModelBlock>,
    pub output: Option<OutputBlock>,
    #[serde(default)]
    pub converge: ConvergeBlock,
    #[serde(default)]
    pub sample: SampleBlock,
    #[serde(default)]
    pub gamma: GammaBlock,
    #[serde(default)]
    pub laplace: LaplaceBlock,
    #[serde(default)]
    pub diffuse: DiffuseBlock,
    #[serde(default)]
    pub moments: MomentsBlock,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    #[serde(rename = "D")]
    pub max_degree: Option<usize>,
    #[serde(rename = "E")]
    pub energies: Option<Vec<f64>>,
    pub beta: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    pub path: Option<String>,
    pub format: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergeBlock {
    pub orders: Vec<usize>,
    pub radius: usize,
}

impl Default for ConvergeBlock {
    fn default() -> Self {
        ConvergeBlock {
            orders: (4..=9).map(|e| 1 << e).collect(),
            radius: 1,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SampleBlock {
    pub steps: usize,
    pub stream: u64,
}

impl Default for SampleBlock {
    fn default() -> Self {
        SampleBlock { steps: 20, stream: 0 }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GammaBlock {
    pub n: usize,
    pub samples: usize,
    pub ks_threshold: f64,
    pub histogram: Option<String>,
}

impl Default for GammaBlock {
    fn default() -> Self {
        GammaBlock {
            n: 500,
            samples: 100_000,
            ks_threshold: 0.02,
            histogram: None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LaplaceBlock {
    pub ns: Vec<usize>,
    pub x: f64,
    pub tolerance: f64,
    pub oracle_max_n: usize,
}

impl Default for LaplaceBlock {
    fn default() -> Self {
        LaplaceBlock {
            ns: vec![10, 100, 1000, 10_000],
            x: -1.0,
            tolerance: 5e-3,
            oracle_max_n: 10,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiffuseBlock {
    pub t_end: f64,
    pub dt: f64,
    pub paths: usize,
    pub n: usize,
    pub groups: usize,
    pub compare_paths: usize,
    pub t_start: f64,
}

impl Default for DiffuseBlock {
    fn default() -> Self {
        DiffuseBlock {
            t_end: 1.0,
            dt: 1e-3,
            paths: 100_000,
            n: 400,
            groups: 2,
            compare_paths: 20_000,
            t_start: 0.1,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MomentsBlock {
    pub max_k: usize,
    pub tolerance: f64,
}

impl Default for MomentsBlock {
    fn default() -> Self {
        MomentsBlock {
            max_k: 4,
            tolerance: 1e-10,
        }
    }
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("parse error in {}: {}", path.display(), e.message())))
    }
}

/// Model from the config block with flag overrides applied.
pub fn resolve_model(
    block: Option<&ModelBlock>,
    max_degree: Option<usize>,
    energies: Option<Vec<f64>>,
    beta: Option<f64>,
) -> Result<EnergyModel, CliError> {
    let empty = ModelBlock::default();
    let block = block.unwrap_or(&empty);
    let max_degree = max_degree
        .or(block.max_degree)
        .ok_or_else(|| CliError::Config("parse error: model is missing D".into()))?;
    let energies = energies
        .or_else(|| block.energies.clone())
        .ok_or_else(|| CliError::Config("parse error: model is missing E".into()))?;
    let beta = beta
        .or(block.beta)
        .ok_or_else(|| CliError::Config("parse error: model is missing beta".into()))?;
    Ok(EnergyModel::new(max_degree, energies, beta)?)
}

pub fn seed_or_default(flag: Option<u64>, file: Option<u64>) -> u64 {
    flag.or(file).unwrap_or(DEFAULT_SEED)
}
