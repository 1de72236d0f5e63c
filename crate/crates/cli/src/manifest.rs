//! `<out>.manifest.json` beside every output: what ran, with which flags,
//! on which bytes.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use chembridge::{Error, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest<'a, F: Serialize> {
    pub subcommand: &'a str,
    pub flags: &'a F,
    pub seed: Option<u64>,
    pub threads: usize,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<PathBuf>,
    pub tool_version: &'static str,
    pub started_unix: u64,
    pub finished_unix: u64,
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = OsString::from(out.as_os_str());
    name.push(".manifest.json");
    PathBuf::from(name)
}

/// Tracks one stage run and writes its manifest when finished.
pub struct Run<'a, F: Serialize> {
    subcommand: &'a str,
    flags: &'a F,
    seed: Option<u64>,
    threads: usize,
    inputs: Vec<InputDigest>,
    started: u64,
}

impl<'a, F: Serialize> Run<'a, F> {
    /// Hashes inputs up front so the digests describe what was actually read.
    pub fn start(
        subcommand: &'a str,
        flags: &'a F,
        seed: Option<u64>,
        threads: usize,
        inputs: &[&Path],
    ) -> Result<Self> {
        let inputs = inputs
            .iter()
            .map(|p| {
                Ok(InputDigest {
                    path: p.to_path_buf(),
                    sha256: sha256_file(p)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            subcommand,
            flags,
            seed,
            threads,
            inputs,
            started: unix_now(),
        })
    }

    /// One manifest per output, all listing every output of the run.
    pub fn finish(self, outputs: &[&Path]) -> Result<()> {
        let manifest = RunManifest {
            subcommand: self.subcommand,
            flags: self.flags,
            seed: self.seed,
            threads: self.threads,
            inputs: self.inputs,
            outputs: outputs.iter().map(|p| p.to_path_buf()).collect(),
            tool_version: env!("CARGO_PKG_VERSION"),
            started_unix: self.started,
            finished_unix: unix_now(),
        };
        let text =
            serde_json::to_string_pretty(&manifest).map_err(|e| Error::Format(e.to_string()))?;
        for out in outputs {
            let path = manifest_path(out);
            std::fs::write(&path, &text).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}
