//! Evaluation: empirical expected cost, detection-rate / false-alarm
//! metrics under the attack-vs-normal binarization, percentile-bootstrap
//! confidence intervals, and the α-sweep driver.

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::{alpha_cost_matrix, decide, ClassPosterior, CostMatrix};
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::scalar::Real;

/// How predictions are made. The cost matrix always scores the outcome; it
/// only optionally drives the decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecisionMode {
    /// Minimum expected cost under the cost matrix.
    Weighted,
    /// Posterior arg-max, ignoring the matrix when deciding.
    Unweighted,
}

impl DecisionMode {
    pub fn name(self) -> &'static str {
        match self {
            DecisionMode::Weighted => "weighted",
            DecisionMode::Unweighted => "unweighted",
        }
    }
}

/// Prediction and realized cost for one record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecordOutcome<R> {
    pub predicted: usize,
    pub cost: R,
}

/// Evaluates every posterior in order against the dataset's labels.
pub fn posteriors_for<R, F>(
    posterior_fn: F,
    ds: &LabeledDataset<R>,
) -> Result<Vec<ClassPosterior<R>>>
where
    R: Real,
    F: Fn(&[R]) -> Result<ClassPosterior<R>> + Sync,
{
    ds.records()
        .par_iter()
        .map(|rec| posterior_fn(&rec.features))
        .collect()
}

/// Per-record predictions and costs for already-computed posteriors.
pub fn evaluate_posteriors<R: Real>(
    posteriors: &[ClassPosterior<R>],
    ds: &LabeledDataset<R>,
    cm: &CostMatrix<R>,
    mode: DecisionMode,
) -> Result<Vec<RecordOutcome<R>>> {
    if posteriors.len() != ds.len() {
        return Err(Error::DimensionMismatch {
            expected: ds.len(),
            found: posteriors.len(),
        });
    }
    if cm.k() != ds.num_classes() {
        return Err(Error::DimensionMismatch {
            expected: ds.num_classes(),
            found: cm.k(),
        });
    }
    posteriors
        .par_iter()
        .zip(ds.records())
        .map(|(post, rec)| {
            let predicted = match mode {
                DecisionMode::Weighted => decide(post, cm)?.chosen,
                DecisionMode::Unweighted => post.arg_max(),
            };
            Ok(RecordOutcome {
                predicted,
                cost: cm.get(predicted, rec.label),
            })
        })
        .collect()
}

/// Runs the model over the dataset and scores each record with the matrix.
pub fn evaluate<R, F>(
    posterior_fn: F,
    ds: &LabeledDataset<R>,
    cm: &CostMatrix<R>,
    mode: DecisionMode,
) -> Result<Vec<RecordOutcome<R>>>
where
    R: Real,
    F: Fn(&[R]) -> Result<ClassPosterior<R>> + Sync,
{
    let posteriors = posteriors_for(posterior_fn, ds)?;
    evaluate_posteriors(&posteriors, ds, cm, mode)
}

/// Arithmetic mean of per-record costs (the empirical expected cost).
pub fn empirical_cost<R: Real>(costs: &[R]) -> Result<R> {
    if costs.is_empty() {
        return Err(Error::EmptyInput("per-record costs"));
    }
    Ok(costs.iter().copied().sum::<R>() / R::of_usize(costs.len()))
}

/// k x k prediction/truth counts plus the attack-vs-normal binarization
/// (class 0 is normal; every other class counts as attack/positive).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    /// counts[prediction][truth]
    pub counts: Vec<Vec<usize>>,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn tally(pairs: impl IntoIterator<Item = (usize, usize)>, k: usize) -> Self {
        let mut counts = vec![vec![0usize; k]; k];
        let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
        for (pred, truth) in pairs {
            counts[pred][truth] += 1;
            match (pred != 0, truth != 0) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, false) => tn += 1,
                (false, true) => fn_ += 1,
            }
        }
        ConfusionCounts {
            counts,
            tp,
            fp,
            tn,
            fn_,
        }
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    /// Truth-column sums: the per-class record counts.
    pub fn truth_counts(&self) -> Vec<usize> {
        let k = self.k();
        (0..k)
            .map(|j| (0..k).map(|i| self.counts[i][j]).sum())
            .collect()
    }
}

/// DR, FA, and per-attack-class detection rates. A zero denominator leaves
/// the metric undefined rather than zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionMetrics<R> {
    pub dr: Option<R>,
    pub fa: Option<R>,
    /// One entry per attack class (class indices 1..k): the fraction of that
    /// class's records predicted as any attack class.
    pub per_class_dr: Vec<Option<R>>,
}

pub fn detection_metrics<R: Real>(conf: &ConfusionCounts) -> DetectionMetrics<R> {
    let ratio = |num: usize, den: usize| (den > 0).then(|| R::of_usize(num) / R::of_usize(den));
    let dr = ratio(conf.tp, conf.tp + conf.fn_);
    let fa = ratio(conf.fp, conf.fp + conf.tn);
    let k = conf.k();
    let per_class_dr = (1..k)
        .map(|class| {
            let total: usize = (0..k).map(|pred| conf.counts[pred][class]).sum();
            let flagged: usize = (1..k).map(|pred| conf.counts[pred][class]).sum();
            ratio(flagged, total)
        })
        .collect();
    DetectionMetrics {
        dr,
        fa,
        per_class_dr,
    }
}

/// Bootstrap controls: B resamples at the given confidence level.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub resamples: usize,
    pub confidence: f64,
    pub seed: u64,
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.resamples == 0 {
            return Err(Error::InvalidParameter {
                name: "resamples",
                reason: "B must be at least 1".to_string(),
            });
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::InvalidParameter {
                name: "confidence",
                reason: format!("must lie in (0, 1), got {}", self.confidence),
            });
        }
        Ok(())
    }
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            resamples: 1000,
            confidence: 0.99,
            seed: 0,
        }
    }
}

/// Percentile-bootstrap interval around the full-sample mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapCi<R> {
    pub low: R,
    pub mean: R,
    pub high: R,
}

/// B seeded resamples with replacement; the interval bounds are the
/// linear-interpolation percentiles of the resample means. Resamples draw
/// from per-index derived seed streams, so the result does not depend on
/// how the work is scheduled.
pub fn bootstrap_ci<R: Real>(costs: &[R], cfg: &BootstrapConfig) -> Result<BootstrapCi<R>> {
    cfg.validate()?;
    let mean = empirical_cost(costs)?;
    let n = costs.len();
    let mut means: Vec<R> = (0..cfg.resamples)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(cfg.seed, "bootstrap", b as u64);
            let mut sum = R::zero();
            for _ in 0..n {
                let idx = (rng.next_u64() % n as u64) as usize;
                sum += costs[idx];
            }
            sum / R::of_usize(n)
        })
        .collect();
    means.sort_by(|a, b| a.partial_cmp(b).expect("resample means are finite"));
    let tail = (1.0 - cfg.confidence) / 2.0;
    Ok(BootstrapCi {
        low: interpolated_quantile(&means, tail),
        mean,
        high: interpolated_quantile(&means, 1.0 - tail),
    })
}

/// Linear-interpolation quantile of sorted values: h = p(m-1), interpolating
/// between the bracketing order statistics.
fn interpolated_quantile<R: Real>(sorted: &[R], p: f64) -> R {
    let m = sorted.len();
    if m == 1 {
        return sorted[0];
    }
    let h = p.clamp(0.0, 1.0) * (m - 1) as f64;
    let lo = h.floor() as usize;
    let frac = R::of(h - lo as f64);
    if lo + 1 >= m {
        return sorted[m - 1];
    }
    sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
}

/// Everything reported for one (dataset, matrix, mode) evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport<R> {
    pub mode: DecisionMode,
    pub expected_cost: R,
    pub ci_low: R,
    pub ci_high: R,
    pub confidence: f64,
    pub dr: Option<R>,
    pub fa: Option<R>,
    pub per_class_dr: Vec<Option<R>>,
    pub confusion: ConfusionCounts,
}

/// Builds the full report from per-record outcomes.
pub fn evaluation_report<R: Real>(
    outcomes: &[RecordOutcome<R>],
    ds: &LabeledDataset<R>,
    cfg: &BootstrapConfig,
    mode: DecisionMode,
) -> Result<EvaluationReport<R>> {
    if outcomes.len() != ds.len() {
        return Err(Error::DimensionMismatch {
            expected: ds.len(),
            found: outcomes.len(),
        });
    }
    let costs: Vec<R> = outcomes.iter().map(|o| o.cost).collect();
    let ci = bootstrap_ci(&costs, cfg)?;
    let confusion = ConfusionCounts::tally(
        outcomes
            .iter()
            .zip(ds.records())
            .map(|(o, rec)| (o.predicted, rec.label)),
        ds.num_classes(),
    );
    let metrics = detection_metrics(&confusion);
    Ok(EvaluationReport {
        mode,
        expected_cost: ci.mean,
        ci_low: ci.low,
        ci_high: ci.high,
        confidence: cfg.confidence,
        dr: metrics.dr,
        fa: metrics.fa,
        per_class_dr: metrics.per_class_dr,
        confusion,
    })
}

/// One α-sweep row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSweepRow<R> {
    pub alpha: R,
    pub report: EvaluationReport<R>,
}

/// Sweeps a fixed trained model over the α grid: weighted decisions under
/// the parametric matrix, one full report per α, rows ordered by α. The
/// posteriors are computed once and reused across the grid.
pub fn alpha_sweep<R, F>(
    posterior_fn: F,
    ds: &LabeledDataset<R>,
    alphas: &[R],
    cfg: &BootstrapConfig,
) -> Result<Vec<AlphaSweepRow<R>>>
where
    R: Real,
    F: Fn(&[R]) -> Result<ClassPosterior<R>> + Sync,
{
    if alphas.is_empty() {
        return Err(Error::EmptyInput("alpha grid"));
    }
    let posteriors = posteriors_for(posterior_fn, ds)?;
    let mut sorted = alphas.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("alpha values are finite"));
    sorted
        .iter()
        .map(|&alpha| {
            let cm = alpha_cost_matrix(alpha)?;
            let outcomes = evaluate_posteriors(&posteriors, ds, &cm, DecisionMode::Weighted)?;
            let report = evaluation_report(&outcomes, ds, cfg, DecisionMode::Weighted)?;
            Ok(AlphaSweepRow { alpha, report })
        })
        .collect()
}

/// CSV header shared by the evaluation and sweep reports.
pub const REPORT_CSV_HEADER: &str =
    "alpha,mode,mu,ci_low,ci_high,dr,fa,dr_probe,dr_dos,dr_u2r,dr_r2l";

/// Formats one CSV row. `alpha` is empty for plain (non-sweep) evaluations.
/// Requires the five-class layout (four attack classes).
pub fn report_csv_row<R: Real>(alpha: Option<R>, report: &EvaluationReport<R>) -> Result<String> {
    if report.per_class_dr.len() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            found: report.per_class_dr.len(),
        });
    }
    let opt = |v: &Option<R>| v.map(|x| x.as_f64().to_string()).unwrap_or_default();
    let mut cells = vec![
        alpha.map(|a| a.as_f64().to_string()).unwrap_or_default(),
        report.mode.name().to_string(),
        report.expected_cost.as_f64().to_string(),
        report.ci_low.as_f64().to_string(),
        report.ci_high.as_f64().to_string(),
        opt(&report.dr),
        opt(&report.fa),
    ];
    cells.extend(report.per_class_dr.iter().map(opt));
    Ok(cells.join(","))
}
