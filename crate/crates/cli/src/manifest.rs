//! Experiment manifest: the resolved configuration, input fingerprints, and
//! output inventory of one command run. Written atomically at run end;
//! everything in it except the timing fields is reproducible byte-for-byte.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::AppResult;

pub const MANIFEST_FORMAT: &str = "csids-manifest";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InputFingerprint {
    pub path: PathBuf,
    pub sha256: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub records: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub command: String,
    pub artifact_version: String,
    pub config: RunConfig,
    pub inputs: Vec<InputFingerprint>,
    pub outputs: Vec<String>,
    pub started_unix_ms: u128,
    pub duration_ms: u128,
}

impl Manifest {
    pub fn new(command: &str, config: RunConfig) -> Self {
        Manifest {
            format: MANIFEST_FORMAT.to_string(),
            version: MANIFEST_VERSION,
            command: command.to_string(),
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
            started_unix_ms: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis())
                .unwrap_or(0),
            duration_ms: 0,
        }
    }

    pub fn add_input(&mut self, path: &Path, records: Option<usize>) -> AppResult<()> {
        self.inputs.push(InputFingerprint {
            path: path.to_path_buf(),
            sha256: sha256_file(path)?,
            records,
        });
        Ok(())
    }

    pub fn add_output(&mut self, path: &Path) {
        self.outputs.push(
            path.file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string()),
        );
    }

    /// Writes `manifest-<command>.json` via a temp file + rename.
    pub fn finalize(
        mut self,
        output_dir: &Path,
        started: std::time::Instant,
    ) -> AppResult<PathBuf> {
        self.duration_ms = started.elapsed().as_millis();
        let target = output_dir.join(format!("manifest-{}.json", self.command));
        let tmp = output_dir.join(format!(".manifest-{}.json.tmp", self.command));
        std::fs::write(&tmp, serde_json::to_string_pretty(&self)?)?;
        std::fs::rename(&tmp, &target)?;
        Ok(target)
    }
}

pub fn sha256_file(path: &Path) -> AppResult<String> {
    let mut file = std::fs::File::open(path)?;
    let mut hasher = Sha256::new();
    std::io::copy(&mut file, &mut hasher)?;
    Ok(format!("{:x}", hasher.finalize()))
}

/// Exclusive lock on an output directory; the file is removed on drop.
pub struct OutputLock {
    path: PathBuf,
}

impl OutputLock {
    pub fn acquire(output_dir: &Path) -> AppResult<OutputLock> {
        let path = output_dir.join(".csids.lock");
        match std::fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
        {
            Ok(_) => Ok(OutputLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(crate::error::AppError::usage(format!(
                    "output directory {} is locked by another run (remove {} if stale)",
                    output_dir.display(),
                    path.display()
                )))
            }
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}
