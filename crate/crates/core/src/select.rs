//! Hyperparameter selection: stratified k-fold splits and the staged grid
//! search over (η, T, n_h) or (θ, T, n_g). Each stage tunes one parameter
//! while holding the others at their base values or earlier winners.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::CostMatrix;
use crate::data::{LabeledDataset, Provenance};
use crate::error::{Error, Result};
use crate::eval::{empirical_cost, evaluate, DecisionMode};
use crate::family::{train_family, HyperParams, ModelFamily};
use crate::kdd::{FeatureEncoder, LabeledRaw};
use crate::rng::{sample_indices, shuffle, stream_rng, stream_seed};
use crate::scalar::Real;

/// Validation-fold index sets plus the classes too scarce to reach every
/// fold (fewer records than folds).
#[derive(Debug, Clone)]
pub struct FoldPlan {
    folds: Vec<Vec<usize>>,
    pub scarce_classes: Vec<usize>,
}

impl FoldPlan {
    pub fn fold_count(&self) -> usize {
        self.folds.len()
    }

    pub fn validation(&self, fold: usize) -> &[usize] {
        &self.folds[fold]
    }

    pub fn train(&self, fold: usize) -> Vec<usize> {
        let mut out = Vec::new();
        for (f, indices) in self.folds.iter().enumerate() {
            if f != fold {
                out.extend_from_slice(indices);
            }
        }
        out.sort_unstable();
        out
    }
}

/// Stratified partition into k folds: per class, indices are shuffled and
/// dealt round-robin, so class proportions match within one record per fold.
/// Deterministic under the seed.
pub fn kfold_split(labels: &[usize], num_classes: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::InvalidParameter {
            name: "folds",
            reason: "need at least 2 folds".to_string(),
        });
    }
    if labels.len() < k {
        return Err(Error::InvalidParameter {
            name: "folds",
            reason: format!("{} records cannot fill {k} folds", labels.len()),
        });
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (i, &label) in labels.iter().enumerate() {
        if label >= num_classes {
            return Err(Error::InvalidParameter {
                name: "label",
                reason: format!("class index {label} out of range 0..{num_classes}"),
            });
        }
        by_class[label].push(i);
    }
    let mut folds = vec![Vec::new(); k];
    let mut scarce_classes = Vec::new();
    let mut dealt = 0usize;
    for (class, mut indices) in by_class.into_iter().enumerate() {
        if indices.is_empty() {
            continue;
        }
        if indices.len() < k {
            scarce_classes.push(class);
        }
        let mut rng = stream_rng(seed, "kfold-class", class as u64);
        shuffle(&mut rng, &mut indices);
        // Start each class at the running offset to even out fold totals.
        let count = indices.len();
        for (pos, idx) in indices.into_iter().enumerate() {
            folds[(dealt + pos) % k].push(idx);
        }
        dealt += count;
    }
    for fold in folds.iter_mut() {
        fold.sort_unstable();
    }
    Ok(FoldPlan {
        folds,
        scarce_classes,
    })
}

/// Stratified subsample of `target` indices, keeping at least one record of
/// every non-empty class. Returned indices are in ascending order.
pub fn stratified_subsample(
    labels: &[usize],
    num_classes: usize,
    target: usize,
    seed: u64,
) -> Vec<usize> {
    let n = labels.len();
    if target >= n {
        return (0..n).collect();
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (i, &label) in labels.iter().enumerate() {
        by_class[label].push(i);
    }
    // Proportional allocation with a floor of one per non-empty class,
    // trimmed back to the target by largest class first.
    let mut take: Vec<usize> = by_class
        .iter()
        .map(|idx| {
            if idx.is_empty() {
                0
            } else {
                ((idx.len() * target + n / 2) / n).clamp(1, idx.len())
            }
        })
        .collect();
    let mut total: usize = take.iter().sum();
    while total > target {
        // Shrink the largest allocation; give up the one-per-class floor
        // only when the target is smaller than the class count.
        let biggest = (0..num_classes)
            .filter(|&c| take[c] > 1)
            .max_by_key(|&c| take[c])
            .or_else(|| {
                (0..num_classes)
                    .filter(|&c| take[c] > 0)
                    .max_by_key(|&c| by_class[c].len())
            })
            .expect("positive total implies a shrinkable class");
        take[biggest] -= 1;
        total -= 1;
    }
    while total < target {
        let room = (0..num_classes)
            .filter(|&c| take[c] < by_class[c].len())
            .max_by_key(|&c| by_class[c].len() - take[c])
            .expect("some class has spare records");
        take[room] += 1;
        total += 1;
    }
    let mut out = Vec::with_capacity(target);
    for (class, indices) in by_class.iter().enumerate() {
        if take[class] == 0 {
            continue;
        }
        let mut rng = stream_rng(seed, "subsample-class", class as u64);
        let picks = sample_indices(&mut rng, indices.len(), take[class]);
        out.extend(picks.into_iter().map(|p| indices[p]));
    }
    out.sort_unstable();
    out
}

/// Data the cross-validation can split and materialize. Any per-fold
/// encoding is fitted on the training indices only.
pub trait CvDataset<R: Real>: Sync {
    fn labels(&self) -> Vec<usize>;
    fn num_classes(&self) -> usize;
    fn materialize(
        &self,
        train: &[usize],
        validation: &[usize],
    ) -> Result<(LabeledDataset<R>, LabeledDataset<R>)>;
}

/// Already-encoded data: folds are plain subsets.
impl<R: Real> CvDataset<R> for LabeledDataset<R> {
    fn labels(&self) -> Vec<usize> {
        self.records().iter().map(|r| r.label).collect()
    }

    fn num_classes(&self) -> usize {
        self.num_classes()
    }

    fn materialize(
        &self,
        train: &[usize],
        validation: &[usize],
    ) -> Result<(LabeledDataset<R>, LabeledDataset<R>)> {
        Ok((
            self.subset(train, Provenance::Train),
            self.subset(validation, Provenance::Synthetic),
        ))
    }
}

/// Raw traffic records: the feature encoder is refitted inside every fold,
/// so validation records never leak into the encoding statistics.
pub struct RawCvDataset<'a> {
    pub records: &'a [LabeledRaw],
}

impl<'a, R: Real> CvDataset<R> for RawCvDataset<'a> {
    fn labels(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.label.index()).collect()
    }

    fn num_classes(&self) -> usize {
        crate::label::ClassLabel::COUNT
    }

    fn materialize(
        &self,
        train: &[usize],
        validation: &[usize],
    ) -> Result<(LabeledDataset<R>, LabeledDataset<R>)> {
        let encoder: FeatureEncoder<R> =
            FeatureEncoder::fit(train.iter().map(|&i| &self.records[i].record))?;
        let encode = |indices: &[usize], provenance| -> Result<LabeledDataset<R>> {
            let records = indices
                .iter()
                .map(|&i| {
                    Ok(crate::data::LabeledRecord {
                        features: encoder.encode(&self.records[i].record)?,
                        label: self.records[i].label.index(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            LabeledDataset::new(records, crate::label::ClassLabel::COUNT, provenance)
        };
        Ok((
            encode(train, Provenance::Train)?,
            encode(validation, Provenance::Synthetic)?,
        ))
    }
}

/// Which hyperparameter a stage tunes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TunedParam {
    LearningRate,
    Epochs,
    HiddenUnits,
    ConvergenceThreshold,
    EmIterations,
    Components,
}

impl TunedParam {
    pub fn name(self) -> &'static str {
        match self {
            TunedParam::LearningRate => "learning_rate",
            TunedParam::Epochs => "epochs",
            TunedParam::HiddenUnits => "hidden_units",
            TunedParam::ConvergenceThreshold => "convergence_threshold",
            TunedParam::EmIterations => "em_iterations",
            TunedParam::Components => "components",
        }
    }

    fn apply<R: Real>(self, hp: &mut HyperParams<R>, value: f64) {
        match self {
            TunedParam::LearningRate => hp.mlp.learning_rate = R::of(value),
            TunedParam::Epochs => hp.mlp.epochs = value as usize,
            TunedParam::HiddenUnits => hp.mlp.hidden_units = value as usize,
            TunedParam::ConvergenceThreshold => hp.gmm.convergence_threshold = R::of(value),
            TunedParam::EmIterations => hp.gmm.max_iterations = value as usize,
            TunedParam::Components => hp.gmm.components = value as usize,
        }
    }
}

/// One stage of the staged search: candidate values for a single parameter.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridStage {
    pub param: TunedParam,
    pub candidates: Vec<f64>,
}

/// What the folds are scored on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CvScore {
    /// Mean expected cost under the active matrix with weighted decisions.
    ExpectedCost,
    /// Arg-max classification error rate.
    ClassificationError,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvCandidateResult {
    pub value: f64,
    /// Per-fold validation scores; empty when the candidate failed.
    pub fold_scores: Vec<f64>,
    pub mean_score: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvStageResult {
    pub param: TunedParam,
    pub candidates: Vec<CvCandidateResult>,
    pub selected: f64,
}

/// The winning hyperparameters and the per-stage audit trail.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvOutcome<R> {
    pub hyper: HyperParams<R>,
    pub stages: Vec<CvStageResult>,
    pub scarce_classes: Vec<usize>,
}

/// Default staged grids: η then T then n_h for the discriminative families
/// (dropping the hidden-unit stage for the pinned linear model), θ then T
/// then n_g for the mixtures (dropping the component stage for naive Bayes).
pub fn default_stages(family: ModelFamily) -> Vec<GridStage> {
    let capacity = vec![
        10.0, 20.0, 40.0, 60.0, 80.0, 100.0, 120.0, 140.0, 160.0, 320.0,
    ];
    match family {
        ModelFamily::Mlp | ModelFamily::Linear => {
            let mut stages = vec![
                GridStage {
                    param: TunedParam::LearningRate,
                    candidates: vec![0.0001, 0.001, 0.01, 0.1],
                },
                GridStage {
                    param: TunedParam::Epochs,
                    candidates: vec![10.0, 100.0, 500.0, 1000.0],
                },
            ];
            if family == ModelFamily::Mlp {
                stages.push(GridStage {
                    param: TunedParam::HiddenUnits,
                    candidates: capacity,
                });
            }
            stages
        }
        ModelFamily::Gmm | ModelFamily::NaiveBayes => {
            let mut stages = vec![
                GridStage {
                    param: TunedParam::ConvergenceThreshold,
                    candidates: vec![0.0001, 0.001, 0.01, 0.1],
                },
                GridStage {
                    param: TunedParam::EmIterations,
                    candidates: vec![25.0, 100.0, 500.0, 1000.0],
                },
            ];
            if family == ModelFamily::Gmm {
                stages.push(GridStage {
                    param: TunedParam::Components,
                    candidates: capacity,
                });
            }
            stages
        }
    }
}

/// Base values held fixed before a stage supplies its winner: the first
/// discriminative stage runs with no hidden units, the first mixture stage
/// with twenty components.
pub fn default_cv_base<R: Real>(family: ModelFamily) -> HyperParams<R> {
    let mut hp = HyperParams::default();
    hp.mlp.hidden_units = 0;
    hp.gmm.components = 20;
    hp.resolved_for(family)
}

/// Runs the staged search: for each stage, each candidate is trained on
/// every fold's training part and scored on its validation part; the
/// lowest-mean candidate wins (first listed wins ties) and is fixed for the
/// later stages. Failed candidates are excluded; a stage where every
/// candidate fails is an error.
#[allow(clippy::too_many_arguments)]
pub fn staged_grid_search<R: Real, D: CvDataset<R>>(
    data: &D,
    family: ModelFamily,
    stages: &[GridStage],
    score: CvScore,
    folds: usize,
    base: &HyperParams<R>,
    cm: &CostMatrix<R>,
    seed: u64,
) -> Result<CvOutcome<R>> {
    if stages.is_empty() {
        return Err(Error::EmptyInput("grid stages"));
    }
    let labels = data.labels();
    let plan = kfold_split(
        &labels,
        data.num_classes(),
        folds,
        stream_seed(seed, "cv-kfold", 0),
    )?;
    let mut current = base.resolved_for(family);
    let mut stage_results = Vec::with_capacity(stages.len());

    for (stage_idx, stage) in stages.iter().enumerate() {
        if stage.candidates.is_empty() {
            return Err(Error::EmptyInput("stage candidates"));
        }
        let mut results: Vec<CvCandidateResult> = Vec::with_capacity(stage.candidates.len());
        for (cand_idx, &value) in stage.candidates.iter().enumerate() {
            let mut hp = current.clone();
            stage.param.apply(&mut hp, value);
            let fold_scores: Vec<Result<f64>> = (0..plan.fold_count())
                .into_par_iter()
                .map(|fold| {
                    score_fold(
                        data,
                        &plan,
                        fold,
                        family,
                        &hp,
                        score,
                        cm,
                        stream_seed(
                            seed,
                            "cv-train",
                            ((stage_idx as u64) << 32) | ((cand_idx as u64) << 16) | fold as u64,
                        ),
                    )
                })
                .collect();
            match fold_scores.into_iter().collect::<Result<Vec<f64>>>() {
                Ok(scores) => {
                    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
                    results.push(CvCandidateResult {
                        value,
                        fold_scores: scores,
                        mean_score: Some(mean),
                        failure: None,
                    });
                }
                Err(err) => results.push(CvCandidateResult {
                    value,
                    fold_scores: Vec::new(),
                    mean_score: None,
                    failure: Some(err.to_string()),
                }),
            }
        }
        let selected = results
            .iter()
            .filter(|r| r.mean_score.is_some())
            .min_by(|a, b| {
                a.mean_score
                    .unwrap()
                    .partial_cmp(&b.mean_score.unwrap())
                    .expect("scores are finite")
            })
            .map(|r| r.value)
            .ok_or(Error::AllCandidatesFailed(results.len()))?;
        stage.param.apply(&mut current, selected);
        stage_results.push(CvStageResult {
            param: stage.param,
            candidates: results,
            selected,
        });
    }

    Ok(CvOutcome {
        hyper: current,
        stages: stage_results,
        scarce_classes: plan.scarce_classes,
    })
}

#[allow(clippy::too_many_arguments)]
fn score_fold<R: Real, D: CvDataset<R>>(
    data: &D,
    plan: &FoldPlan,
    fold: usize,
    family: ModelFamily,
    hp: &HyperParams<R>,
    score: CvScore,
    cm: &CostMatrix<R>,
    train_seed: u64,
) -> Result<f64> {
    let (train, validation) = data.materialize(&plan.train(fold), plan.validation(fold))?;
    let mut hp = hp.clone();
    hp.mlp.seed = train_seed;
    hp.gmm.seed = train_seed;
    let model = train_family(family, &train, &hp)?;
    match score {
        CvScore::ExpectedCost => {
            let outcomes = evaluate(
                |x| model.posterior(x),
                &validation,
                cm,
                DecisionMode::Weighted,
            )?;
            let costs: Vec<R> = outcomes.iter().map(|o| o.cost).collect();
            Ok(empirical_cost(&costs)?.as_f64())
        }
        CvScore::ClassificationError => {
            let mut errors = 0usize;
            for rec in validation.records() {
                if model.posterior(&rec.features)?.arg_max() != rec.label {
                    errors += 1;
                }
            }
            Ok(errors as f64 / validation.len() as f64)
        }
    }
}
