//! Per-class Gaussian mixture likelihood models with diagonal covariance,
//! EM training, empirical class priors, and the Bayes-rule posterior. The
//! single-component configuration is the naive Bayes model.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::ClassPosterior;
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::rng::{sample_indices, stream_rng, stream_seed};
use crate::scalar::{log_sum_exp, Real};

/// Absolute lower bound on any variance, regardless of the data scale.
const VARIANCE_FLOOR_MIN: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmComponent<R> {
    pub weight: R,
    pub mean: Vec<R>,
    pub variance: Vec<R>,
}

/// Mixture model for one class: weighted diagonal Gaussians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmClassModel<R> {
    components: Vec<GmmComponent<R>>,
}

impl<R: Real> GmmClassModel<R> {
    pub fn new(components: Vec<GmmComponent<R>>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::EmptyInput("mixture components"));
        }
        let dim = components[0].mean.len();
        let mut weight_sum = R::zero();
        for c in &components {
            if c.mean.len() != dim || c.variance.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: c.mean.len().max(c.variance.len()),
                });
            }
            if c.variance.iter().any(|&v| !v.is_finite() || v <= R::zero()) {
                return Err(Error::InvalidParameter {
                    name: "variance",
                    reason: "all variances must be positive and finite".to_string(),
                });
            }
            if c.mean.iter().any(|m| !m.is_finite()) || !c.weight.is_finite() {
                return Err(Error::NonFinite("mixture parameters"));
            }
            weight_sum += c.weight;
        }
        if (weight_sum - R::one()).abs() > R::probability_tolerance() {
            return Err(Error::InvalidParameter {
                name: "weights",
                reason: format!("component weights sum to {weight_sum}"),
            });
        }
        Ok(GmmClassModel { components })
    }

    pub fn components(&self) -> &[GmmComponent<R>] {
        &self.components
    }

    pub fn dim(&self) -> usize {
        self.components[0].mean.len()
    }

    /// log Σ_u w_u · N(x; μ_u, diag(v_u)), evaluated in the log domain.
    pub fn log_density(&self, x: &[R]) -> Result<R> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        let scores: Vec<R> = self
            .components
            .iter()
            .map(|c| component_log_score(c, x))
            .collect();
        Ok(log_sum_exp(&scores))
    }
}

/// ln(w_u) + ln N(x; μ_u, diag(v_u)). Zero-weight components score -inf.
fn component_log_score<R: Real>(c: &GmmComponent<R>, x: &[R]) -> R {
    if c.weight <= R::zero() {
        return R::neg_infinity();
    }
    let half = R::of(0.5);
    let mut acc = R::zero();
    for ((&xi, &mi), &vi) in x.iter().zip(&c.mean).zip(&c.variance) {
        let diff = xi - mi;
        acc += R::ln_two_pi() + vi.ln() + diff * diff / vi;
    }
    c.weight.ln() - half * acc
}

/// EM training controls.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GmmHyperParams<R> {
    /// Requested component count n_g; capped at the sample count per fit.
    pub components: usize,
    /// Iteration budget T.
    pub max_iterations: usize,
    /// Stop when the relative log-likelihood improvement falls below θ.
    pub convergence_threshold: R,
    /// Variance floor as a fraction of the global per-dimension variance.
    pub variance_floor_factor: R,
    pub seed: u64,
}

impl<R: Real> GmmHyperParams<R> {
    pub fn validate(&self) -> Result<()> {
        if self.components == 0 {
            return Err(Error::InvalidParameter {
                name: "components",
                reason: "n_g must be positive".to_string(),
            });
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter {
                name: "max_iterations",
                reason: "T must be positive".to_string(),
            });
        }
        if !self.convergence_threshold.is_finite() || self.convergence_threshold <= R::zero() {
            return Err(Error::InvalidParameter {
                name: "convergence_threshold",
                reason: "θ must be positive".to_string(),
            });
        }
        if !self.variance_floor_factor.is_finite() || self.variance_floor_factor <= R::zero() {
            return Err(Error::InvalidParameter {
                name: "variance_floor_factor",
                reason: "must be positive".to_string(),
            });
        }
        Ok(())
    }
}

impl<R: Real> Default for GmmHyperParams<R> {
    fn default() -> Self {
        GmmHyperParams {
            components: 1,
            max_iterations: 100,
            convergence_threshold: R::of(1e-3),
            variance_floor_factor: R::of(1e-3),
            seed: 0,
        }
    }
}

/// Empirical class frequencies P(Y = y).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassPriors<R> {
    p: Vec<R>,
}

impl<R: Real> ClassPriors<R> {
    pub fn probs(&self) -> &[R] {
        &self.p
    }

    pub fn k(&self) -> usize {
        self.p.len()
    }
}

/// Unsmoothed empirical priors: count(y) / N.
pub fn fit_priors<R: Real>(ds: &LabeledDataset<R>) -> Result<ClassPriors<R>> {
    if ds.is_empty() {
        return Err(Error::EmptyInput("dataset"));
    }
    let n = R::of_usize(ds.len());
    let p = ds
        .class_counts()
        .iter()
        .map(|&c| R::of_usize(c) / n)
        .collect();
    Ok(ClassPriors { p })
}

/// Fits a mixture to unlabeled vectors by expectation-maximization.
pub fn fit_em<R: Real>(data: &[Vec<R>], hp: &GmmHyperParams<R>) -> Result<GmmClassModel<R>> {
    fit_em_with_trace(data, hp).map(|(model, _)| model)
}

/// As [`fit_em`], also returning the training log-likelihood recorded at
/// each E-step (non-decreasing up to floor-clamping slack).
pub fn fit_em_with_trace<R: Real>(
    data: &[Vec<R>],
    hp: &GmmHyperParams<R>,
) -> Result<(GmmClassModel<R>, Vec<R>)> {
    hp.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyInput("training vectors"));
    }
    let dim = data[0].len();
    for x in data {
        if x.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("training vectors"));
        }
    }
    let n = data.len();
    let n_components = hp.components.min(n);

    // Global per-dimension population variance sets the initialization and
    // the variance floor.
    let global_var = global_variance(data, dim);
    let floor: Vec<R> = global_var
        .iter()
        .map(|&v| {
            let f = v * hp.variance_floor_factor.as_f64();
            R::of(f.max(VARIANCE_FLOOR_MIN))
        })
        .collect();
    let init_var: Vec<R> = global_var
        .iter()
        .zip(&floor)
        .map(|(&v, &f)| R::of(v).max(f))
        .collect();

    let mut rng = stream_rng(hp.seed, "em-init", 0);
    let picked = sample_indices(&mut rng, n, n_components);
    let mut components: Vec<GmmComponent<R>> = picked
        .iter()
        .map(|&i| GmmComponent {
            weight: R::one() / R::of_usize(n_components),
            mean: data[i].clone(),
            variance: init_var.clone(),
        })
        .collect();

    let mut trace: Vec<R> = Vec::new();
    let mut prev_ll: Option<R> = None;
    let mut scores = vec![R::zero(); n_components];
    // Accumulators: responsibility mass, Σ r·x and Σ r·x² per component.
    let mut nk = vec![R::zero(); n_components];
    let mut sum_x = vec![vec![R::zero(); dim]; n_components];
    let mut sum_x2 = vec![vec![R::zero(); dim]; n_components];

    for _ in 0..hp.max_iterations {
        for acc in nk.iter_mut() {
            *acc = R::zero();
        }
        for row in sum_x.iter_mut().chain(sum_x2.iter_mut()) {
            for v in row.iter_mut() {
                *v = R::zero();
            }
        }
        let mut ll = R::zero();
        for x in data {
            for (u, c) in components.iter().enumerate() {
                scores[u] = component_log_score(c, x);
            }
            let lse = log_sum_exp(&scores);
            ll += lse;
            for u in 0..n_components {
                let r = (scores[u] - lse).exp();
                nk[u] += r;
                for (d, &xd) in x.iter().enumerate() {
                    sum_x[u][d] += r * xd;
                    sum_x2[u][d] += r * xd * xd;
                }
            }
        }
        trace.push(ll);

        if let Some(prev) = prev_ll {
            let denom = prev.abs().max(R::of(1e-12));
            if (ll - prev) / denom < hp.convergence_threshold {
                break;
            }
        }
        prev_ll = Some(ll);

        for u in 0..n_components {
            if nk[u] > R::zero() {
                components[u].weight = nk[u] / R::of_usize(n);
                for d in 0..dim {
                    let mean = sum_x[u][d] / nk[u];
                    let var = (sum_x2[u][d] / nk[u] - mean * mean).max(floor[d]);
                    components[u].mean[d] = mean;
                    components[u].variance[d] = var;
                }
            } else {
                // Collapsed component: keep its parameters, zero its weight.
                components[u].weight = R::zero();
            }
        }
        renormalize_weights(&mut components);
    }

    Ok((GmmClassModel::new(components)?, trace))
}

fn renormalize_weights<R: Real>(components: &mut [GmmComponent<R>]) {
    let total: R = components.iter().map(|c| c.weight).sum();
    if total > R::zero() && (total - R::one()).abs() > R::epsilon() {
        for c in components.iter_mut() {
            c.weight /= total;
        }
    }
}

fn global_variance<R: Real>(data: &[Vec<R>], dim: usize) -> Vec<f64> {
    let mut mean = vec![0.0f64; dim];
    let mut m2 = vec![0.0f64; dim];
    let mut n = 0.0f64;
    for x in data {
        n += 1.0;
        for (d, v) in x.iter().enumerate() {
            let xd = v.as_f64();
            let delta = xd - mean[d];
            mean[d] += delta / n;
            m2[d] += delta * (xd - mean[d]);
        }
    }
    m2.iter().map(|&s| s / n).collect()
}

/// Trained classifier: one mixture per observed class plus empirical priors.
/// Classes absent from the training data carry no model and a zero prior;
/// they never win the posterior competition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmParams<R> {
    per_class: Vec<Option<GmmClassModel<R>>>,
    priors: ClassPriors<R>,
    dim: usize,
}

impl<R: Real> GmmParams<R> {
    pub fn new(
        per_class: Vec<Option<GmmClassModel<R>>>,
        priors: ClassPriors<R>,
        dim: usize,
    ) -> Result<Self> {
        if per_class.len() != priors.k() {
            return Err(Error::DimensionMismatch {
                expected: priors.k(),
                found: per_class.len(),
            });
        }
        for model in per_class.iter().flatten() {
            if model.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: model.dim(),
                });
            }
        }
        Ok(GmmParams {
            per_class,
            priors,
            dim,
        })
    }

    pub fn k(&self) -> usize {
        self.per_class.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn priors(&self) -> &ClassPriors<R> {
        &self.priors
    }

    pub fn class_model(&self, y: usize) -> Option<&GmmClassModel<R>> {
        self.per_class.get(y).and_then(|m| m.as_ref())
    }

    /// Classes that had no training records (the warning markers).
    pub fn missing_classes(&self) -> Vec<usize> {
        self.per_class
            .iter()
            .enumerate()
            .filter_map(|(y, m)| m.is_none().then_some(y))
            .collect()
    }

    /// Bayes-rule posterior: p(y|x) ∝ exp(log p(x|y) + log P(y)), normalized
    /// by the log-sum-exp over the classes with positive prior.
    pub fn posterior(&self, x: &[R]) -> Result<ClassPosterior<R>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        let mut scores = vec![R::neg_infinity(); self.k()];
        for (y, model) in self.per_class.iter().enumerate() {
            let prior = self.priors.probs()[y];
            if let Some(model) = model {
                if prior > R::zero() {
                    scores[y] = model.log_density(x)? + prior.ln();
                }
            }
        }
        let z = log_sum_exp(&scores);
        if !z.is_finite() {
            return Err(Error::DegeneratePosterior);
        }
        let p: Vec<R> = scores
            .iter()
            .map(|&s| {
                if s.is_finite() {
                    (s - z).exp()
                } else {
                    R::zero()
                }
            })
            .collect();
        ClassPosterior::new(p)
    }
}

/// Fits one mixture per class (component count capped at the class sample
/// count) plus empirical priors. Deterministic given the seed; per-class
/// fits use independent derived seed streams and run in parallel.
pub fn train_gmm_classifier<R: Real>(
    ds: &LabeledDataset<R>,
    hp: &GmmHyperParams<R>,
) -> Result<GmmParams<R>> {
    hp.validate()?;
    if ds.is_empty() {
        return Err(Error::EmptyInput("dataset"));
    }
    let k = ds.num_classes();
    let mut by_class: Vec<Vec<Vec<R>>> = vec![Vec::new(); k];
    for rec in ds.records() {
        by_class[rec.label].push(rec.features.clone());
    }
    let priors = fit_priors(ds)?;
    let per_class: Vec<Result<Option<GmmClassModel<R>>>> = by_class
        .par_iter()
        .enumerate()
        .map(|(y, rows)| {
            if rows.is_empty() {
                return Ok(None);
            }
            let class_hp = GmmHyperParams {
                seed: stream_seed(hp.seed, "gmm-class", y as u64),
                ..hp.clone()
            };
            fit_em(rows, &class_hp).map(Some)
        })
        .collect();
    let per_class = per_class.into_iter().collect::<Result<Vec<_>>>()?;
    GmmParams::new(per_class, priors, ds.dim())
}
