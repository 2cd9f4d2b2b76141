//! File plumbing shared by every command: atomic outputs, input digests and run manifests.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use hsad::Error;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const THREADS_ENV: &str = "HSAD_THREADS";

/// Worker count: available cores, capped by `HSAD_THREADS` when set.
pub fn thread_budget() -> Result<usize> {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    match std::env::var(THREADS_ENV) {
        Ok(v) => {
            let cap: usize = v
                .trim()
                .parse()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
            Ok(cores.min(cap))
        }
        Err(_) => Ok(cores),
    }
}

pub fn open_input(path: &Path) -> Result<BufReader<File>> {
    let file = File::open(path).map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))?;
    Ok(BufReader::new(file))
}

pub fn read_input(path: &Path) -> Result<Vec<u8>> {
    let mut bytes = Vec::new();
    open_input(path)?.read_to_end(&mut bytes).with_context(|| format!("reading {}", path.display()))?;
    Ok(bytes)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `path` through a temporary file in the same directory, renamed into place on success.
pub fn write_atomic<F>(path: &Path, fill: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> hsad::Result<usize>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir)
        .map_err(|e| Error::Config(format!("cannot write into {}: {e}", dir.display())))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        fill(&mut w)?;
        w.flush().map_err(Error::from)?;
    }
    tmp.persist(path).map_err(|e| Error::Io(e.error)).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, |w| {
        w.write_all(text.as_bytes())?;
        Ok(text.len())
    })
}

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: &'static str,
    pub flags: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<PathBuf>,
    pub seed: Option<u64>,
    pub version: &'static str,
    pub wall_time_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub condition_seeds: Option<Vec<(String, u64)>>,
}

pub struct Run {
    command: &'static str,
    flags: serde_json::Value,
    started: Instant,
    inputs: Vec<InputDigest>,
    seed: Option<u64>,
    condition_seeds: Option<Vec<(String, u64)>>,
}

impl Run {
    pub fn start<F: Serialize>(command: &'static str, flags: &F) -> Result<Self> {
        Ok(Self {
            command,
            flags: serde_json::to_value(flags)?,
            started: Instant::now(),
            inputs: Vec::new(),
            seed: None,
            condition_seeds: None,
        })
    }

    pub fn input(&mut self, path: &Path, sha256: String) {
        self.inputs.push(InputDigest { path: path.to_path_buf(), sha256 });
    }

    pub fn seed(&mut self, seed: u64) {
        self.seed = Some(seed);
    }

    pub fn condition_seeds(&mut self, seeds: Vec<(String, u64)>) {
        self.condition_seeds = Some(seeds);
    }

    /// Writes `<primary>.manifest.json` next to the first output.
    pub fn finish(self, outputs: &[&Path]) -> Result<()> {
        let primary = outputs.first().expect("at least one output");
        let mut name = primary.as_os_str().to_owned();
        name.push(".manifest.json");
        let manifest = RunManifest {
            command: self.command,
            flags: self.flags,
            inputs: self.inputs,
            outputs: outputs.iter().map(|p| p.to_path_buf()).collect(),
            seed: self.seed,
            version: env!("CARGO_PKG_VERSION"),
            wall_time_s: self.started.elapsed().as_secs_f64(),
            condition_seeds: self.condition_seeds,
        };
        write_json_atomic(Path::new(&name), &manifest)
    }
}
