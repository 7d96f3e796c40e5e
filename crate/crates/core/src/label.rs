//! The five traffic categories and the attack-name -> category mapping.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Traffic category. The ordering is fixed and used everywhere a class index
/// appears: cost matrices, posteriors, confusion matrices, report columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ClassLabel {
    Normal,
    Probe,
    Dos,
    U2r,
    R2l,
}

impl ClassLabel {
    pub const COUNT: usize = 5;
    pub const ALL: [ClassLabel; 5] = [
        ClassLabel::Normal,
        ClassLabel::Probe,
        ClassLabel::Dos,
        ClassLabel::U2r,
        ClassLabel::R2l,
    ];

    /// Zero-based position in the fixed ordering (Normal = 0, R2L = 4).
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<ClassLabel> {
        ClassLabel::ALL.get(i).copied()
    }

    pub fn is_attack(self) -> bool {
        self != ClassLabel::Normal
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassLabel::Normal => "Normal",
            ClassLabel::Probe => "Probe",
            ClassLabel::Dos => "DoS",
            ClassLabel::U2r => "U2R",
            ClassLabel::R2l => "R2L",
        }
    }

    pub fn parse(s: &str) -> Option<ClassLabel> {
        match s.trim().to_ascii_lowercase().as_str() {
            "normal" => Some(ClassLabel::Normal),
            "probe" => Some(ClassLabel::Probe),
            "dos" => Some(ClassLabel::Dos),
            "u2r" => Some(ClassLabel::U2r),
            "r2l" => Some(ClassLabel::R2l),
            _ => None,
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Attack-name to category mapping. Lookup of an unknown name is an error,
/// never a silent default.
#[derive(Debug, Clone)]
pub struct LabelMap {
    entries: BTreeMap<String, ClassLabel>,
}

/// Names in the 1999 KDD Cup data, including the test-only attack types.
const DEFAULT_ENTRIES: &[(&str, ClassLabel)] = &[
    ("normal", ClassLabel::Normal),
    // DoS
    ("back", ClassLabel::Dos),
    ("land", ClassLabel::Dos),
    ("neptune", ClassLabel::Dos),
    ("pod", ClassLabel::Dos),
    ("smurf", ClassLabel::Dos),
    ("teardrop", ClassLabel::Dos),
    ("apache2", ClassLabel::Dos),
    ("mailbomb", ClassLabel::Dos),
    ("processtable", ClassLabel::Dos),
    ("udpstorm", ClassLabel::Dos),
    // Probe
    ("ipsweep", ClassLabel::Probe),
    ("nmap", ClassLabel::Probe),
    ("portsweep", ClassLabel::Probe),
    ("satan", ClassLabel::Probe),
    ("mscan", ClassLabel::Probe),
    ("saint", ClassLabel::Probe),
    // R2L
    ("ftp_write", ClassLabel::R2l),
    ("guess_passwd", ClassLabel::R2l),
    ("imap", ClassLabel::R2l),
    ("multihop", ClassLabel::R2l),
    ("phf", ClassLabel::R2l),
    ("spy", ClassLabel::R2l),
    ("warezclient", ClassLabel::R2l),
    ("warezmaster", ClassLabel::R2l),
    ("named", ClassLabel::R2l),
    ("sendmail", ClassLabel::R2l),
    ("snmpgetattack", ClassLabel::R2l),
    ("snmpguess", ClassLabel::R2l),
    ("worm", ClassLabel::R2l),
    ("xlock", ClassLabel::R2l),
    ("xsnoop", ClassLabel::R2l),
    // U2R
    ("buffer_overflow", ClassLabel::U2r),
    ("loadmodule", ClassLabel::U2r),
    ("perl", ClassLabel::U2r),
    ("rootkit", ClassLabel::U2r),
    ("httptunnel", ClassLabel::U2r),
    ("ps", ClassLabel::U2r),
    ("sqlattack", ClassLabel::U2r),
    ("xterm", ClassLabel::U2r),
];

impl LabelMap {
    /// Built-in mapping covering the full KDD'99 attack-name list.
    pub fn builtin() -> Self {
        let entries = DEFAULT_ENTRIES
            .iter()
            .map(|&(name, label)| (name.to_string(), label))
            .collect();
        LabelMap { entries }
    }

    /// Loads a map from a file of `attack_name,category` lines. Blank lines
    /// and lines starting with `#` are skipped.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.splitn(2, ',');
            let name = parts.next().unwrap_or("").trim();
            let category = parts.next().map(str::trim);
            let (name, category) = match (name, category) {
                (n, Some(c)) if !n.is_empty() => (n, c),
                _ => {
                    return Err(Error::LabelMap {
                        line: idx + 1,
                        reason: format!("expected `attack_name,category`, got {raw:?}"),
                    })
                }
            };
            let label = ClassLabel::parse(category).ok_or_else(|| Error::LabelMap {
                line: idx + 1,
                reason: format!("unknown category {category:?}"),
            })?;
            entries.insert(name.to_string(), label);
        }
        if entries.get("normal") != Some(&ClassLabel::Normal) {
            return Err(Error::LabelMap {
                line: 0,
                reason: "map must send \"normal\" to Normal".to_string(),
            });
        }
        if let Some((name, _)) = entries
            .iter()
            .find(|(name, label)| name.as_str() != "normal" && **label == ClassLabel::Normal)
        {
            return Err(Error::LabelMap {
                line: 0,
                reason: format!("attack name {name:?} may not map to Normal"),
            });
        }
        Ok(LabelMap { entries })
    }

    pub fn lookup(&self, attack_name: &str) -> Result<ClassLabel> {
        self.entries
            .get(attack_name)
            .copied()
            .ok_or_else(|| Error::UnmappedAttack {
                name: attack_name.to_string(),
            })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
