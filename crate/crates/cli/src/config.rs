//! Run configuration: a single JSON document with flag overrides layered on
//! top. Unknown keys are rejected so typos never silently disappear.

use std::path::{Path, PathBuf};

use csids_core::eval::BootstrapConfig;
use csids_core::family::{HyperParams, ModelFamily};
use csids_core::rng::stream_seed;
use csids_core::select::CvScore;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Root seed; every random stream derives from it.
    pub seed: u64,
    pub paths: Paths,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub bootstrap: BootstrapSection,
    #[serde(default)]
    pub alpha: AlphaGrid,
    #[serde(default)]
    pub crossval: CrossvalSection,
    /// Stratified subsample size applied to loaded datasets (desk scale).
    #[serde(default)]
    pub subsample: Option<usize>,
    #[serde(default)]
    pub allow_nonstandard_cost: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    /// Raw training file (KDD CSV).
    pub train: PathBuf,
    /// Raw test file; the prepared caches include its novel-attack-filtered
    /// variant as the second test dataset.
    #[serde(default)]
    pub test: Option<PathBuf>,
    /// Optional `attack_name,category` file; the built-in map otherwise.
    #[serde(default)]
    pub label_map: Option<PathBuf>,
    /// Optional cost-matrix CSV; the built-in KDD matrix otherwise.
    #[serde(default)]
    pub cost_matrix: Option<PathBuf>,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub family: String,
    pub learning_rate: f64,
    pub epochs: usize,
    pub hidden_units: usize,
    pub convergence_threshold: f64,
    pub em_iterations: usize,
    pub components: usize,
    pub variance_floor_factor: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            family: "gmm".to_string(),
            learning_rate: 0.01,
            epochs: 100,
            hidden_units: 0,
            convergence_threshold: 1e-3,
            em_iterations: 100,
            components: 20,
            variance_floor_factor: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BootstrapSection {
    pub resamples: usize,
    pub confidence: f64,
}

impl Default for BootstrapSection {
    fn default() -> Self {
        BootstrapSection {
            resamples: 1000,
            confidence: 0.99,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlphaGrid {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl Default for AlphaGrid {
    fn default() -> Self {
        AlphaGrid {
            min: 1.0,
            max: 10.0,
            step: 1.0,
        }
    }
}

impl AlphaGrid {
    pub fn values(&self) -> AppResult<Vec<f64>> {
        if !self.step.is_finite() || self.step <= 0.0 || self.min < 0.0 || self.max < self.min {
            return Err(AppError::usage(format!(
                "invalid alpha grid: min={} max={} step={}",
                self.min, self.max, self.step
            )));
        }
        let mut values = Vec::new();
        let mut a = self.min;
        while a <= self.max + 1e-12 {
            values.push(a);
            a += self.step;
        }
        Ok(values)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CrossvalSection {
    pub folds: usize,
    /// `expected-cost` (weighted decisions under the active matrix) or
    /// `classification-error`.
    pub score: String,
}

impl Default for CrossvalSection {
    fn default() -> Self {
        CrossvalSection {
            folds: 10,
            score: "expected-cost".to_string(),
        }
    }
}

/// Flag overrides, applied over the file values.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub family: Option<String>,
    pub alpha_min: Option<f64>,
    pub alpha_max: Option<f64>,
    pub alpha_step: Option<f64>,
    pub subsample: Option<usize>,
    pub allow_nonstandard_cost: bool,
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> AppResult<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AppError::usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut config: RunConfig = serde_json::from_str(&text)
            .map_err(|e| AppError::usage(format!("invalid config {}: {e}", path.display())))?;
        if let Some(seed) = overrides.seed {
            config.seed = seed;
        }
        if let Some(family) = &overrides.family {
            config.model.family = family.clone();
        }
        if let Some(v) = overrides.alpha_min {
            config.alpha.min = v;
        }
        if let Some(v) = overrides.alpha_max {
            config.alpha.max = v;
        }
        if let Some(v) = overrides.alpha_step {
            config.alpha.step = v;
        }
        if overrides.subsample.is_some() {
            config.subsample = overrides.subsample;
        }
        if overrides.allow_nonstandard_cost {
            config.allow_nonstandard_cost = true;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> AppResult<()> {
        self.family()?;
        self.score_mode()?;
        self.alpha.values()?;
        for (name, path) in [
            ("paths.train", Some(&self.paths.train)),
            ("paths.test", self.paths.test.as_ref()),
            ("paths.label_map", self.paths.label_map.as_ref()),
            ("paths.cost_matrix", self.paths.cost_matrix.as_ref()),
        ] {
            if let Some(path) = path {
                if !path.exists() {
                    return Err(AppError::usage(format!(
                        "{name} refers to a missing file: {}",
                        path.display()
                    )));
                }
            }
        }
        if self.crossval.folds < 2 {
            return Err(AppError::usage("crossval.folds must be at least 2"));
        }
        if self.subsample == Some(0) {
            return Err(AppError::usage("subsample must be positive"));
        }
        BootstrapConfig {
            resamples: self.bootstrap.resamples,
            confidence: self.bootstrap.confidence,
            seed: 0,
        }
        .validate()
        .map_err(|e| AppError::usage(e.to_string()))?;
        Ok(())
    }

    pub fn family(&self) -> AppResult<ModelFamily> {
        ModelFamily::parse(&self.model.family).ok_or_else(|| {
            AppError::usage(format!(
                "unknown model family {:?} (expected mlp|linear|gmm|naive-bayes)",
                self.model.family
            ))
        })
    }

    pub fn score_mode(&self) -> AppResult<CvScore> {
        match self.crossval.score.as_str() {
            "expected-cost" => Ok(CvScore::ExpectedCost),
            "classification-error" => Ok(CvScore::ClassificationError),
            other => Err(AppError::usage(format!(
                "unknown crossval score {other:?} (expected expected-cost|classification-error)"
            ))),
        }
    }

    /// Hyperparameters with per-component seeds derived from the root seed.
    pub fn hyper_params(&self) -> HyperParams<f64> {
        let mut hp = HyperParams::<f64>::default();
        hp.mlp.learning_rate = self.model.learning_rate;
        hp.mlp.epochs = self.model.epochs;
        hp.mlp.hidden_units = self.model.hidden_units;
        hp.mlp.seed = stream_seed(self.seed, "train-mlp", 0);
        hp.gmm.components = self.model.components;
        hp.gmm.max_iterations = self.model.em_iterations;
        hp.gmm.convergence_threshold = self.model.convergence_threshold;
        hp.gmm.variance_floor_factor = self.model.variance_floor_factor;
        hp.gmm.seed = stream_seed(self.seed, "train-gmm", 0);
        hp
    }

    pub fn bootstrap_config(&self) -> BootstrapConfig {
        BootstrapConfig {
            resamples: self.bootstrap.resamples,
            confidence: self.bootstrap.confidence,
            seed: stream_seed(self.seed, "bootstrap", 0),
        }
    }
}
