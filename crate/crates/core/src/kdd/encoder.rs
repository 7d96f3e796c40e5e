//! One-hot + z-score feature encoding fitted on training data only.
//!
//! The raw layout walks the 41 fields in file order: a numeric field emits
//! one column, a categorical field emits one column per vocabulary entry
//! (first-appearance order). Every output column is then standardized with
//! the training mean and population standard deviation; columns whose
//! training standard deviation is zero are flagged and emit 0.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kdd::{RawRecord, CATEGORICAL_FIELDS, FEATURE_COUNT};
use crate::scalar::Real;

/// Vocabulary of one categorical field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderColumn {
    /// Zero-based raw field position.
    pub field: usize,
    /// Distinct training values in first-appearance order.
    pub vocab: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureEncoder<R> {
    categorical: Vec<EncoderColumn>,
    mean: Vec<R>,
    std: Vec<R>,
    zero_variance: Vec<bool>,
    dim: usize,
    #[serde(skip)]
    lookup: Vec<HashMap<String, usize>>,
}

impl<R: Real> FeatureEncoder<R> {
    /// Learns vocabularies and per-column statistics from training records.
    pub fn fit<'a, I>(records: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a RawRecord> + Clone,
    {
        let mut categorical: Vec<EncoderColumn> = CATEGORICAL_FIELDS
            .iter()
            .map(|&field| EncoderColumn {
                field,
                vocab: Vec::new(),
            })
            .collect();
        let mut seen: Vec<HashMap<String, usize>> =
            CATEGORICAL_FIELDS.iter().map(|_| HashMap::new()).collect();
        let mut count = 0usize;
        for rec in records.clone() {
            check_width(rec)?;
            for (slot, col) in categorical.iter_mut().enumerate() {
                let value = &rec.values[col.field];
                if !seen[slot].contains_key(value) {
                    seen[slot].insert(value.clone(), col.vocab.len());
                    col.vocab.push(value.clone());
                }
            }
            count += 1;
        }
        if count == 0 {
            return Err(Error::EmptyInput("training records"));
        }

        let mut encoder: FeatureEncoder<R> = FeatureEncoder {
            categorical,
            mean: Vec::new(),
            std: Vec::new(),
            zero_variance: Vec::new(),
            dim: 0,
            lookup: Vec::new(),
        };
        encoder.rebuild_lookup();
        encoder.dim = encoder.output_dim();

        // Welford accumulation in f64, independent of the scalar type.
        let mut mean = vec![0.0f64; encoder.dim];
        let mut m2 = vec![0.0f64; encoder.dim];
        let mut n = 0.0f64;
        for rec in records {
            let raw = encoder.raw_vector(rec)?;
            n += 1.0;
            for (c, v) in raw.iter().enumerate() {
                let x = v.as_f64();
                let delta = x - mean[c];
                mean[c] += delta / n;
                m2[c] += delta * (x - mean[c]);
            }
        }
        encoder.mean = mean.iter().map(|&m| R::of(m)).collect();
        encoder.std = m2.iter().map(|&s| R::of((s / n).sqrt())).collect();
        encoder.zero_variance = encoder.std.iter().map(|&s| s == R::zero()).collect();
        Ok(encoder)
    }

    fn rebuild_lookup(&mut self) {
        self.lookup = self
            .categorical
            .iter()
            .map(|col| {
                col.vocab
                    .iter()
                    .enumerate()
                    .map(|(i, v)| (v.clone(), i))
                    .collect()
            })
            .collect();
    }

    /// Restores the lookup tables after deserialization.
    pub fn finish_load(mut self) -> Self {
        self.rebuild_lookup();
        self.dim = self.output_dim();
        self
    }

    fn output_dim(&self) -> usize {
        let vocab_total: usize = self.categorical.iter().map(|c| c.vocab.len()).sum();
        FEATURE_COUNT - self.categorical.len() + vocab_total
    }

    /// Output dimension d, constant once fitted.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn categorical(&self) -> &[EncoderColumn] {
        &self.categorical
    }

    pub fn mean(&self) -> &[R] {
        &self.mean
    }

    pub fn std(&self) -> &[R] {
        &self.std
    }

    pub fn zero_variance(&self) -> &[bool] {
        &self.zero_variance
    }

    /// Pre-normalization layout: one-hot 0/1 groups (all zero for a value
    /// outside the vocabulary) and raw numeric values.
    pub fn raw_vector(&self, rec: &RawRecord) -> Result<Vec<R>> {
        check_width(rec)?;
        let mut out = Vec::with_capacity(self.dim);
        let mut slot = 0usize;
        for (field, value) in rec.values.iter().enumerate() {
            if slot < self.categorical.len() && self.categorical[slot].field == field {
                let vocab = &self.categorical[slot].vocab;
                // Deserialized encoders may not have rebuilt the lookup
                // tables; fall back to a vocabulary scan.
                let hit = match self.lookup.get(slot) {
                    Some(m) if !m.is_empty() => m.get(value).copied(),
                    _ => vocab.iter().position(|v| v == value),
                };
                for i in 0..vocab.len() {
                    out.push(if hit == Some(i) { R::one() } else { R::zero() });
                }
                slot += 1;
            } else {
                let parsed: f64 = value.parse().map_err(|_| Error::NumericField {
                    field,
                    value: value.clone(),
                })?;
                out.push(R::of(parsed));
            }
        }
        Ok(out)
    }

    /// Full encoding: raw layout standardized column-by-column with the
    /// training statistics. Flagged zero-variance columns emit 0.
    pub fn encode(&self, rec: &RawRecord) -> Result<Vec<R>> {
        let mut v = self.raw_vector(rec)?;
        for (c, x) in v.iter_mut().enumerate() {
            *x = if self.zero_variance[c] {
                R::zero()
            } else {
                (*x - self.mean[c]) / self.std[c]
            };
        }
        Ok(v)
    }
}

fn check_width(rec: &RawRecord) -> Result<()> {
    if rec.values.len() != FEATURE_COUNT {
        return Err(Error::DimensionMismatch {
            expected: FEATURE_COUNT,
            found: rec.values.len(),
        });
    }
    Ok(())
}
