//! Model families and trained-model persistence. `linear` is the MLP with
//! no hidden units; `naive-bayes` is the mixture model with one component
//! per class.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cost::ClassPosterior;
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::gmm::{train_gmm_classifier, GmmHyperParams, GmmParams};
use crate::mlp::{train_mlp, MlpHyperParams, MlpParams};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelFamily {
    Mlp,
    Linear,
    Gmm,
    NaiveBayes,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 4] = [
        ModelFamily::Mlp,
        ModelFamily::Linear,
        ModelFamily::Gmm,
        ModelFamily::NaiveBayes,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelFamily::Mlp => "mlp",
            ModelFamily::Linear => "linear",
            ModelFamily::Gmm => "gmm",
            ModelFamily::NaiveBayes => "naive-bayes",
        }
    }

    pub fn parse(s: &str) -> Option<ModelFamily> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mlp" => Some(ModelFamily::Mlp),
            "linear" => Some(ModelFamily::Linear),
            "gmm" => Some(ModelFamily::Gmm),
            "naive-bayes" | "naivebayes" | "nb" => Some(ModelFamily::NaiveBayes),
            _ => None,
        }
    }

    pub fn is_discriminative(self) -> bool {
        matches!(self, ModelFamily::Mlp | ModelFamily::Linear)
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Hyperparameters for both families; the active family reads its own side.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HyperParams<R> {
    pub mlp: MlpHyperParams<R>,
    pub gmm: GmmHyperParams<R>,
}

impl<R: Real> Default for HyperParams<R> {
    fn default() -> Self {
        HyperParams {
            mlp: MlpHyperParams::default(),
            gmm: GmmHyperParams::default(),
        }
    }
}

impl<R: Real> HyperParams<R> {
    /// The family-specific structural overrides: linear pins n_h = 0,
    /// naive-bayes pins n_g = 1.
    pub fn resolved_for(&self, family: ModelFamily) -> HyperParams<R> {
        let mut hp = self.clone();
        match family {
            ModelFamily::Linear => hp.mlp.hidden_units = 0,
            ModelFamily::NaiveBayes => hp.gmm.components = 1,
            ModelFamily::Mlp | ModelFamily::Gmm => {}
        }
        hp
    }
}

/// A trained posterior model of either family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TrainedModel<R> {
    Gmm(GmmParams<R>),
    Mlp(MlpParams<R>),
}

impl<R: Real> TrainedModel<R> {
    pub fn posterior(&self, x: &[R]) -> Result<ClassPosterior<R>> {
        match self {
            TrainedModel::Gmm(params) => params.posterior(x),
            TrainedModel::Mlp(params) => params.posterior(x),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            TrainedModel::Gmm(params) => params.dim(),
            TrainedModel::Mlp(params) => params.input_dim(),
        }
    }

    pub fn k(&self) -> usize {
        match self {
            TrainedModel::Gmm(params) => params.k(),
            TrainedModel::Mlp(params) => params.k(),
        }
    }
}

/// Trains the requested family on the dataset.
pub fn train_family<R: Real>(
    family: ModelFamily,
    ds: &LabeledDataset<R>,
    hp: &HyperParams<R>,
) -> Result<TrainedModel<R>> {
    let hp = hp.resolved_for(family);
    if family.is_discriminative() {
        train_mlp(ds, &hp.mlp).map(|fit| TrainedModel::Mlp(fit.params))
    } else {
        train_gmm_classifier(ds, &hp.gmm).map(TrainedModel::Gmm)
    }
}

pub const MODEL_FORMAT: &str = "csids-model";
pub const MODEL_VERSION: u32 = 1;

/// Versioned on-disk model document; weights round-trip bitwise through the
/// shortest-round-trip float encoding.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelDocument<R> {
    pub format: String,
    pub version: u32,
    pub family: ModelFamily,
    pub num_classes: usize,
    pub class_names: Vec<String>,
    pub hyper: HyperParams<R>,
    pub model: TrainedModel<R>,
}

impl<R: Real> ModelDocument<R> {
    pub fn new(
        family: ModelFamily,
        class_names: Vec<String>,
        hyper: HyperParams<R>,
        model: TrainedModel<R>,
    ) -> Self {
        ModelDocument {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            num_classes: model.k(),
            family,
            class_names,
            hyper,
            model,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let doc: ModelDocument<R> = serde_json::from_str(&text)?;
        if doc.format != MODEL_FORMAT {
            return Err(Error::Format {
                what: "model format",
                found: doc.format,
                expected: MODEL_FORMAT,
            });
        }
        if doc.version != MODEL_VERSION {
            return Err(Error::Format {
                what: "model version",
                found: doc.version.to_string(),
                expected: "1",
            });
        }
        Ok(doc)
    }
}
