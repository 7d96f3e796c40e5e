//! Encoded-dataset cache: a self-describing binary container holding the
//! fitted encoder (vocabularies + statistics) and the encoded rows.
//!
//! Layout: 8-byte magic, u32 version, u32 header length, JSON header, then
//! one row per record as `dim` little-endian f64 values followed by a u8
//! class index. Identical inputs produce identical bytes.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{LabeledDataset, LabeledRecord, Provenance};
use crate::error::{Error, Result};
use crate::kdd::FeatureEncoder;
use crate::scalar::Real;

const MAGIC: &[u8; 8] = b"CSIDCHE\0";
pub const CACHE_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CacheHeader {
    pub version: u32,
    pub dim: usize,
    pub records: usize,
    pub num_classes: usize,
    pub provenance: Provenance,
    pub class_counts: Vec<usize>,
    pub encoder: FeatureEncoder<f64>,
}

pub fn write_dataset_cache<R: Real>(
    path: &Path,
    ds: &LabeledDataset<R>,
    encoder: &FeatureEncoder<f64>,
) -> Result<()> {
    let header = CacheHeader {
        version: CACHE_VERSION,
        dim: ds.dim(),
        records: ds.len(),
        num_classes: ds.num_classes(),
        provenance: ds.provenance(),
        class_counts: ds.class_counts(),
        encoder: encoder.clone(),
    };
    let header_bytes = serde_json::to_vec(&header)?;
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    out.write_all(MAGIC)?;
    out.write_all(&CACHE_VERSION.to_le_bytes())?;
    out.write_all(&(header_bytes.len() as u32).to_le_bytes())?;
    out.write_all(&header_bytes)?;
    for rec in ds.records() {
        for v in &rec.features {
            out.write_all(&v.as_f64().to_le_bytes())?;
        }
        out.write_all(&[rec.label as u8])?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_dataset_cache<R: Real>(path: &Path) -> Result<(LabeledDataset<R>, CacheHeader)> {
    let mut input = BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format {
            what: "cache magic",
            found: format!("{magic:?}"),
            expected: "CSIDCHE",
        });
    }
    let mut word = [0u8; 4];
    input.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != CACHE_VERSION {
        return Err(Error::Format {
            what: "cache version",
            found: version.to_string(),
            expected: "1",
        });
    }
    input.read_exact(&mut word)?;
    let header_len = u32::from_le_bytes(word) as usize;
    let mut header_bytes = vec![0u8; header_len];
    input.read_exact(&mut header_bytes)?;
    let header: CacheHeader = serde_json::from_slice(&header_bytes)?;
    let header = CacheHeader {
        encoder: header.encoder.finish_load(),
        ..header
    };

    let mut records = Vec::with_capacity(header.records);
    let mut value = [0u8; 8];
    let mut label = [0u8; 1];
    for _ in 0..header.records {
        let mut features = Vec::with_capacity(header.dim);
        for _ in 0..header.dim {
            input.read_exact(&mut value)?;
            features.push(R::of(f64::from_le_bytes(value)));
        }
        input.read_exact(&mut label)?;
        records.push(LabeledRecord {
            features,
            label: label[0] as usize,
        });
    }
    let ds = LabeledDataset::new(records, header.num_classes, header.provenance)?;
    Ok((ds, header))
}
