//! Feed-forward class-posterior model: an optional hyperbolic-tangent hidden
//! layer followed by an affine map and a normalized-exponential output over
//! the k class scores. With no hidden layer this is the linear model.
//! Training is maximum likelihood by per-record stochastic gradient descent.

use serde::{Deserialize, Serialize};

use crate::cost::ClassPosterior;
use crate::data::{LabeledDataset, LabeledRecord};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::rng::{shuffle, stream_rng, symmetric_uniform};
use crate::scalar::{log_sum_exp, Real};

/// Layer weights. Bias terms live in the trailing column of each matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams<R> {
    /// n_h x (d+1), absent for the linear model.
    hidden: Option<Mat<R>>,
    /// k x (n_h+1), or k x (d+1) when there is no hidden layer.
    output: Mat<R>,
    input_dim: usize,
}

impl<R: Real> MlpParams<R> {
    pub fn new(hidden: Option<Mat<R>>, output: Mat<R>, input_dim: usize) -> Result<Self> {
        let expected_inputs = match &hidden {
            Some(v) => {
                if v.cols() != input_dim + 1 {
                    return Err(Error::DimensionMismatch {
                        expected: input_dim + 1,
                        found: v.cols(),
                    });
                }
                v.rows()
            }
            None => input_dim,
        };
        if output.cols() != expected_inputs + 1 {
            return Err(Error::DimensionMismatch {
                expected: expected_inputs + 1,
                found: output.cols(),
            });
        }
        if output.rows() == 0 {
            return Err(Error::EmptyInput("output layer"));
        }
        let finite =
            output.iter_all_finite() && hidden.as_ref().is_none_or(|v| v.iter_all_finite());
        if !finite {
            return Err(Error::NonFinite("layer weights"));
        }
        Ok(MlpParams {
            hidden,
            output,
            input_dim,
        })
    }

    /// Zero-initialized parameters (uniform posterior everywhere).
    pub fn zeros(input_dim: usize, hidden_units: usize, k: usize) -> Self {
        let hidden = (hidden_units > 0).then(|| Mat::zeros(hidden_units, input_dim + 1));
        let inputs = if hidden_units > 0 {
            hidden_units
        } else {
            input_dim
        };
        MlpParams {
            hidden,
            output: Mat::zeros(k, inputs + 1),
            input_dim,
        }
    }

    /// Seeded initialization, uniform in [-1/sqrt(fan-in), +1/sqrt(fan-in)].
    pub fn init(input_dim: usize, hidden_units: usize, k: usize, seed: u64) -> Self {
        let mut params = Self::zeros(input_dim, hidden_units, k);
        if let Some(v) = params.hidden.as_mut() {
            let scale = R::one() / R::of_usize(v.cols()).sqrt();
            let mut rng = stream_rng(seed, "init-hidden", 0);
            for w in v.data_mut() {
                *w = symmetric_uniform(&mut rng, scale);
            }
        }
        let scale = R::one() / R::of_usize(params.output.cols()).sqrt();
        let mut rng = stream_rng(seed, "init-output", 0);
        for w in params.output.data_mut() {
            *w = symmetric_uniform(&mut rng, scale);
        }
        params
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_units(&self) -> usize {
        self.hidden.as_ref().map_or(0, |v| v.rows())
    }

    pub fn k(&self) -> usize {
        self.output.rows()
    }

    pub fn hidden(&self) -> Option<&Mat<R>> {
        self.hidden.as_ref()
    }

    pub fn hidden_mut(&mut self) -> Option<&mut Mat<R>> {
        self.hidden.as_mut()
    }

    pub fn output(&self) -> &Mat<R> {
        &self.output
    }

    pub fn output_mut(&mut self) -> &mut Mat<R> {
        &mut self.output
    }

    fn check_input(&self, x: &[R]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Class scores before the output normalization.
    fn scores(&self, x: &[R]) -> Result<(Vec<R>, Option<Vec<R>>)> {
        self.check_input(x)?;
        match &self.hidden {
            Some(v) => {
                let z: Vec<R> = v.mul_biased(x).into_iter().map(|a| a.tanh()).collect();
                let s = self.output.mul_biased(&z);
                Ok((s, Some(z)))
            }
            None => Ok((self.output.mul_biased(x), None)),
        }
    }

    /// P(Y | X = x): normalized exponential of the class scores.
    pub fn posterior(&self, x: &[R]) -> Result<ClassPosterior<R>> {
        let (s, _) = self.scores(x)?;
        ClassPosterior::new(softmax(&s))
    }
}

fn softmax<R: Real>(scores: &[R]) -> Vec<R> {
    let lse = log_sum_exp(scores);
    scores.iter().map(|&s| (s - lse).exp()).collect()
}

/// Gradient with the same shape as the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGradient<R> {
    pub hidden: Option<Mat<R>>,
    pub output: Mat<R>,
}

/// Mean negative log posterior of the true classes over the batch, and its
/// gradient with respect to every weight.
pub fn loss_and_gradient<R: Real>(
    params: &MlpParams<R>,
    batch: &[LabeledRecord<R>],
) -> Result<(R, MlpGradient<R>)> {
    if batch.is_empty() {
        return Err(Error::EmptyInput("batch"));
    }
    let mut grad = MlpGradient {
        hidden: params
            .hidden
            .as_ref()
            .map(|v| Mat::zeros(v.rows(), v.cols())),
        output: Mat::zeros(params.output.rows(), params.output.cols()),
    };
    let inv_b = R::one() / R::of_usize(batch.len());
    let mut loss = R::zero();
    for rec in batch {
        loss += accumulate_record(params, rec, inv_b, &mut grad)?;
    }
    Ok((loss, grad))
}

fn accumulate_record<R: Real>(
    params: &MlpParams<R>,
    rec: &LabeledRecord<R>,
    weight: R,
    grad: &mut MlpGradient<R>,
) -> Result<R> {
    let (s, z) = params.scores(&rec.features)?;
    if rec.label >= s.len() {
        return Err(Error::InvalidParameter {
            name: "label",
            reason: format!("class index {} out of range 0..{}", rec.label, s.len()),
        });
    }
    let lse = log_sum_exp(&s);
    let loss = (lse - s[rec.label]) * weight;

    // d loss / d score = (softmax - onehot(y)) * weight
    let mut dscore: Vec<R> = s.iter().map(|&v| (v - lse).exp() * weight).collect();
    dscore[rec.label] -= weight;

    let hidden_out = z.as_deref().unwrap_or(&rec.features);
    let m = hidden_out.len();
    for (r, &dr) in dscore.iter().enumerate() {
        let row = grad.output.row_mut(r);
        for (c, &h) in hidden_out.iter().enumerate() {
            row[c] += dr * h;
        }
        row[m] += dr; // bias input is 1
    }

    if let (Some(z), Some(v), Some(gv)) = (&z, &params.hidden, grad.hidden.as_mut()) {
        for (j, &zj) in z.iter().enumerate() {
            let mut dz = R::zero();
            for (r, &dr) in dscore.iter().enumerate() {
                dz += dr * params.output.get(r, j);
            }
            let da = dz * (R::one() - zj * zj); // tanh'
            let row = gv.row_mut(j);
            for (c, &xc) in rec.features.iter().enumerate() {
                row[c] += da * xc;
            }
            row[rec.features.len()] += da;
        }
        debug_assert_eq!(v.rows(), z.len());
    }
    Ok(loss)
}

/// Training controls: learning rate η, epoch count T, hidden units n_h
/// (0 selects the linear model).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlpHyperParams<R> {
    pub learning_rate: R,
    pub epochs: usize,
    pub hidden_units: usize,
    pub seed: u64,
}

impl<R: Real> MlpHyperParams<R> {
    pub fn validate(&self) -> Result<()> {
        if !self.learning_rate.is_finite() || self.learning_rate <= R::zero() {
            return Err(Error::InvalidParameter {
                name: "learning_rate",
                reason: "η must be positive and finite".to_string(),
            });
        }
        if self.epochs == 0 {
            return Err(Error::InvalidParameter {
                name: "epochs",
                reason: "T must be positive".to_string(),
            });
        }
        Ok(())
    }
}

impl<R: Real> Default for MlpHyperParams<R> {
    fn default() -> Self {
        MlpHyperParams {
            learning_rate: R::of(0.01),
            epochs: 100,
            hidden_units: 0,
            seed: 0,
        }
    }
}

/// Fitted parameters together with the mean training loss of each epoch.
#[derive(Debug, Clone)]
pub struct MlpFit<R> {
    pub params: MlpParams<R>,
    pub epoch_loss: Vec<R>,
}

/// T epochs of seeded-shuffle per-record SGD with constant learning rate.
/// Deterministic given the seed; diverging loss is an error naming the epoch.
pub fn train_mlp<R: Real>(ds: &LabeledDataset<R>, hp: &MlpHyperParams<R>) -> Result<MlpFit<R>> {
    hp.validate()?;
    if ds.is_empty() {
        return Err(Error::EmptyInput("dataset"));
    }
    let mut params = MlpParams::init(ds.dim(), hp.hidden_units, ds.num_classes(), hp.seed);
    let mut order: Vec<usize> = (0..ds.len()).collect();
    let mut epoch_loss = Vec::with_capacity(hp.epochs);
    let eta = hp.learning_rate;

    for epoch in 0..hp.epochs {
        let mut rng = stream_rng(hp.seed, "sgd-shuffle", epoch as u64);
        shuffle(&mut rng, &mut order);
        let mut sum = R::zero();
        for &idx in &order {
            let rec = &ds.records()[idx];
            let mut grad = MlpGradient {
                hidden: params
                    .hidden
                    .as_ref()
                    .map(|v| Mat::zeros(v.rows(), v.cols())),
                output: Mat::zeros(params.output.rows(), params.output.cols()),
            };
            sum += accumulate_record(&params, rec, R::one(), &mut grad)?;
            if let (Some(v), Some(gv)) = (params.hidden.as_mut(), grad.hidden.as_ref()) {
                for (w, g) in v.data_mut().iter_mut().zip(gv.data()) {
                    *w -= eta * *g;
                }
            }
            for (w, g) in params.output.data_mut().iter_mut().zip(grad.output.data()) {
                *w -= eta * *g;
            }
        }
        let mean = sum / R::of_usize(ds.len());
        if !mean.is_finite() {
            return Err(Error::Divergence { epoch: epoch + 1 });
        }
        epoch_loss.push(mean);
    }
    Ok(MlpFit { params, epoch_loss })
}
