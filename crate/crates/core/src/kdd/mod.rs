//! KDD-format connection records: parsing, novel-attack filtering, and the
//! one-hot + z-score feature encoding.

mod cache;
mod encoder;

pub use cache::{load_dataset_cache, write_dataset_cache, CacheHeader, CACHE_VERSION};
pub use encoder::{EncoderColumn, FeatureEncoder};

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};
use crate::label::{ClassLabel, LabelMap};

/// Number of feature columns in a KDD connection record.
pub const FEATURE_COUNT: usize = 41;

/// Zero-based positions of the string-valued fields (protocol_type, service,
/// flag); everything else is treated as numeric.
pub const CATEGORICAL_FIELDS: [usize; 3] = [1, 2, 3];

/// One connection record as read from file: 41 raw field strings plus the
/// attack name (trailing period already stripped).
#[derive(Debug, Clone)]
pub struct RawRecord {
    pub values: Vec<String>,
    pub attack_name: String,
}

/// A raw record with its attack name resolved to a category.
#[derive(Debug, Clone)]
pub struct LabeledRaw {
    pub record: RawRecord,
    pub label: ClassLabel,
}

/// Parses one comma-separated line (42 fields, label optionally ending in
/// `.`). `line_no` is 1-based and used in error messages.
pub fn parse_line(line: &str, line_no: usize, map: &LabelMap) -> Result<LabeledRaw> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != FEATURE_COUNT + 1 {
        return Err(Error::FieldCount {
            line: line_no,
            expected: FEATURE_COUNT + 1,
            found: fields.len(),
        });
    }
    let attack_name = fields[FEATURE_COUNT]
        .trim()
        .trim_end_matches('.')
        .to_string();
    if attack_name.is_empty() {
        return Err(Error::EmptyLabel { line: line_no });
    }
    let label = map.lookup(&attack_name)?;
    let values = fields[..FEATURE_COUNT]
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    Ok(LabeledRaw {
        record: RawRecord {
            values,
            attack_name,
        },
        label,
    })
}

/// Parses a whole KDD file, one record per non-empty line, in file order.
pub fn parse_kdd_file(path: &Path, map: &LabelMap) -> Result<Vec<LabeledRaw>> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    parse_kdd_lines(reader.lines(), map)
}

fn parse_kdd_lines<I, E>(lines: I, map: &LabelMap) -> Result<Vec<LabeledRaw>>
where
    I: IntoIterator<Item = std::result::Result<String, E>>,
    Error: From<E>,
{
    let mut records = Vec::new();
    for (idx, line) in lines.into_iter().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(parse_line(&line, idx + 1, map)?);
    }
    Ok(records)
}

/// Parses KDD records from an in-memory string (used by tests and fixtures).
pub fn parse_kdd_str(text: &str, map: &LabelMap) -> Result<Vec<LabeledRaw>> {
    parse_kdd_lines(
        text.lines().map(|l| Ok::<String, Error>(l.to_string())),
        map,
    )
}

/// Attack-name set of a record list (includes "normal" when present).
pub fn attack_name_set(records: &[LabeledRaw]) -> BTreeSet<String> {
    records
        .iter()
        .map(|r| r.record.attack_name.clone())
        .collect()
}

/// Keeps exactly the records whose attack name appears in
/// `train_attack_names`, preserving order. Removing the test-only attack
/// types this way yields the second test dataset.
pub fn filter_novel_attacks(
    records: Vec<LabeledRaw>,
    train_attack_names: &BTreeSet<String>,
) -> Vec<LabeledRaw> {
    records
        .into_iter()
        .filter(|r| train_attack_names.contains(&r.record.attack_name))
        .collect()
}

/// Per-class record counts in the fixed class ordering.
pub fn raw_class_counts(records: &[LabeledRaw]) -> [usize; ClassLabel::COUNT] {
    let mut counts = [0usize; ClassLabel::COUNT];
    for r in records {
        counts[r.label.index()] += 1;
    }
    counts
}
