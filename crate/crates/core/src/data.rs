//! Encoded datasets: dense feature vectors with class indices.
//!
//! Class indices are plain `usize` positions so the same machinery serves the
//! five-way traffic datasets and the two-class toy sets used by the
//! trade-off matrix; the KDD pipeline instantiates them from [`ClassLabel`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Dense encoded feature vector.
pub type FeatureVector<R> = Vec<R>;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabeledRecord<R> {
    pub features: FeatureVector<R>,
    /// Class index in the fixed ordering (0 = Normal for traffic data).
    pub label: usize,
}

/// Where a dataset came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Train,
    Test1,
    Test2,
    Synthetic,
}

impl Provenance {
    pub fn name(self) -> &'static str {
        match self {
            Provenance::Train => "train",
            Provenance::Test1 => "test-1",
            Provenance::Test2 => "test-2",
            Provenance::Synthetic => "synthetic",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabeledDataset<R> {
    records: Vec<LabeledRecord<R>>,
    num_classes: usize,
    provenance: Provenance,
}

impl<R: Real> LabeledDataset<R> {
    pub fn new(
        records: Vec<LabeledRecord<R>>,
        num_classes: usize,
        provenance: Provenance,
    ) -> Result<Self> {
        if num_classes == 0 {
            return Err(Error::InvalidParameter {
                name: "num_classes",
                reason: "must be positive".to_string(),
            });
        }
        let dim = records.first().map(|r| r.features.len());
        for rec in &records {
            if rec.label >= num_classes {
                return Err(Error::InvalidParameter {
                    name: "label",
                    reason: format!("class index {} out of range 0..{num_classes}", rec.label),
                });
            }
            if Some(rec.features.len()) != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim.unwrap_or(0),
                    found: rec.features.len(),
                });
            }
            if rec.features.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("feature vector"));
            }
        }
        Ok(LabeledDataset {
            records,
            num_classes,
            provenance,
        })
    }

    pub fn records(&self) -> &[LabeledRecord<R>] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Feature dimension, or 0 for an empty dataset.
    pub fn dim(&self) -> usize {
        self.records.first().map_or(0, |r| r.features.len())
    }

    /// Per-class record counts; sums to `len()`.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.num_classes];
        for rec in &self.records {
            counts[rec.label] += 1;
        }
        counts
    }

    /// New dataset holding the records at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize], provenance: Provenance) -> Self {
        let records = indices.iter().map(|&i| self.records[i].clone()).collect();
        LabeledDataset {
            records,
            num_classes: self.num_classes,
            provenance,
        }
    }
}
