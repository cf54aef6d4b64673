//! Run manifests: the config echo, effective seed and workers, library
//! versions, wall-clock timing, and a content hash for every result file.
//!
//! The manifest is run metadata, not a result file: reruns with the same
//! config and seed reproduce the listed files byte for byte, while the
//! manifest's timing fields differ. `report` runs rebuild `summary.txt`
//! from the stored summary lines after re-verifying the hashes, so a
//! finished run directory is self-checking.

use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use aggrolab::{Error, Result};

use crate::config::ExperimentConfig;

const MANIFEST_FORMAT: &str = "aggrolab.manifest.v1";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SUMMARY_FILE: &str = "summary.txt";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OutputRecord {
    /// File name relative to the run directory.
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Versions {
    pub aggrolab: String,
    pub cli: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    format: String,
    /// Echo of the validated config; reruns reproduce the outputs.
    pub config: ExperimentConfig,
    /// Seed actually used, after the command-line override.
    pub seed: u64,
    /// Worker count actually requested (0 = one per CPU).
    pub workers: usize,
    pub versions: Versions,
    /// Run start, seconds since the Unix epoch.
    pub started_unix_s: u64,
    pub elapsed_s: f64,
    /// Every result file in the run directory, with content hashes.
    pub outputs: Vec<OutputRecord>,
    /// Human-readable summary lines; `summary.txt` is rendered from these.
    pub summary: Vec<String>,
    /// Error that aborted the run, when there was one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Manifest {
    pub fn new(config: ExperimentConfig, seed: u64, workers: usize) -> Self {
        let started_unix_s = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Manifest {
            format: MANIFEST_FORMAT.to_string(),
            config,
            seed,
            workers,
            versions: Versions {
                aggrolab: aggrolab::VERSION.to_string(),
                cli: env!("CARGO_PKG_VERSION").to_string(),
            },
            started_unix_s,
            elapsed_s: 0.0,
            outputs: Vec::new(),
            summary: Vec::new(),
            error: None,
        }
    }

    /// Hashes a freshly written result file and lists it.
    pub fn record_output(&mut self, dir: &Path, file: &str) -> Result<()> {
        let (bytes, sha256) = hash_file(&dir.join(file))?;
        self.outputs.push(OutputRecord {
            file: file.to_string(),
            bytes,
            sha256,
        });
        Ok(())
    }

    pub fn note(&mut self, line: impl Into<String>) {
        self.summary.push(line.into());
    }

    /// Writes `manifest.json` and renders `summary.txt` from the summary
    /// lines. The summary file carries no timing, so it is byte-identical
    /// across reruns.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Format(format!("manifest serialization failed: {e}")))?;
        std::fs::write(dir.join(MANIFEST_FILE), json + "\n")?;
        std::fs::write(dir.join(SUMMARY_FILE), self.render_summary())?;
        Ok(())
    }

    pub fn render_summary(&self) -> String {
        let mut text = String::new();
        for line in &self.summary {
            text.push_str(line);
            text.push('\n');
        }
        text
    }

    /// Loads a manifest from a finished run directory.
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path)?;
        let manifest: Manifest = serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        if manifest.format != MANIFEST_FORMAT {
            return Err(Error::Format(format!(
                "unsupported manifest format tag {:?}, expected {MANIFEST_FORMAT:?}",
                manifest.format
            )));
        }
        Ok(manifest)
    }

    /// Re-hashes every listed output and reports the first mismatch.
    pub fn verify_outputs(&self, dir: &Path) -> Result<()> {
        for record in &self.outputs {
            let (bytes, sha256) = hash_file(&dir.join(&record.file))?;
            if bytes != record.bytes || sha256 != record.sha256 {
                return Err(Error::Format(format!(
                    "output {} does not match its manifest hash",
                    record.file
                )));
            }
        }
        Ok(())
    }
}

/// Size and lowercase-hex SHA-256 of a file, streamed in 64 KiB chunks.
pub fn hash_file(path: &Path) -> Result<(u64, String)> {
    let mut file = std::fs::File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 65536];
    let mut total = 0u64;
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        total += n as u64;
        hasher.update(&buf[..n]);
    }
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for b in digest {
        hex.push_str(&format!("{b:02x}"));
    }
    Ok((total, hex))
}

/// Exclusive-use marker for a run directory, removed on drop.
pub struct Lock {
    path: PathBuf,
}

impl Lock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        let path = dir.join(".lock");
        match std::fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
        {
            Ok(_) => Ok(Lock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(Error::ResourceCap(format!(
                    "{} is locked by another run; remove {} if that run is dead",
                    dir.display(),
                    path.display()
                )))
            }
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for Lock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}
