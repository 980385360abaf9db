//! Run manifests and output plumbing.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use fbst_core::{FbstError, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize)]
pub struct Versions {
    pub fbst: &'static str,
    pub fbst_core: &'static str,
}

/// The only field whose content differs between identical reruns.
#[derive(Debug, Clone, Serialize)]
pub struct Timestamp {
    pub started_unix: f64,
    /// Wall-clock seconds per stage.
    pub timings: BTreeMap<&'static str, f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: &'static str,
    /// SHA-256 of the canonical JSON of the resolved configuration and input file contents.
    pub config_hash: String,
    pub seed: Option<u64>,
    pub seed_generated: bool,
    pub versions: Versions,
    pub outputs: Vec<PathBuf>,
    pub timestamp: Timestamp,
}

pub struct ManifestBuilder {
    command: &'static str,
    config: serde_json::Value,
    inputs: BTreeMap<String, String>,
    seed: Option<u64>,
    seed_generated: bool,
    started: SystemTime,
    stage: Instant,
    timings: BTreeMap<&'static str, f64>,
}

impl ManifestBuilder {
    pub fn new(command: &'static str, config: &impl Serialize) -> Result<Self> {
        Ok(Self {
            command,
            config: serde_json::to_value(config)?,
            inputs: BTreeMap::new(),
            seed: None,
            seed_generated: false,
            started: SystemTime::now(),
            stage: Instant::now(),
            timings: BTreeMap::new(),
        })
    }

    /// Records the digest of an input file so edits to it change the hash.
    pub fn input(&mut self, path: &Path, contents: &[u8]) {
        self.inputs.insert(path.display().to_string(), hex::encode(Sha256::digest(contents)));
    }

    pub fn seed(&mut self, seed: u64, generated: bool) {
        self.seed = Some(seed);
        self.seed_generated = generated;
    }

    /// Closes the current stage and starts the next one.
    pub fn lap(&mut self, name: &'static str) {
        self.timings.insert(name, self.stage.elapsed().as_secs_f64());
        self.stage = Instant::now();
    }

    pub fn config_hash(&self) -> String {
        // serde_json maps are key-sorted, which makes this canonical
        let doc = serde_json::json!({
            "command": self.command,
            "config": self.config,
            "inputs": self.inputs,
            "seed": self.seed,
        });
        hex::encode(Sha256::digest(doc.to_string().as_bytes()))
    }

    pub fn finish(self, outputs: Vec<PathBuf>) -> RunManifest {
        let started_unix = self.started.duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
        RunManifest {
            command: self.command,
            config_hash: self.config_hash(),
            seed: self.seed,
            seed_generated: self.seed_generated,
            versions: Versions {
                fbst: env!("CARGO_PKG_VERSION"),
                fbst_core: fbst_core::VERSION,
            },
            outputs,
            timestamp: Timestamp {
                started_unix,
                timings: self.timings,
            },
        }
    }
}

/// Uses the given seed or draws a fresh one and announces it on stderr.
pub fn resolve_seed(seed: Option<u64>) -> (u64, bool) {
    match seed {
        Some(s) => (s, false),
        None => {
            let s = rand::random::<u64>();
            eprintln!("fbst: no --seed given, using generated seed {s}");
            (s, true)
        }
    }
}

pub fn read_input(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| FbstError::Spec(format!("cannot read {}: {e}", path.display())))
}

/// Writes a CSV produced by `fill` and a `<path>.manifest.json` sidecar next to it.
pub fn write_csv(path: &Path, manifest_json: &str, fill: impl FnOnce(File) -> Result<()>) -> Result<()> {
    fill(File::create(path)?)?;
    let mut side = File::create(sidecar(path))?;
    side.write_all(manifest_json.as_bytes())?;
    Ok(())
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// Pretty JSON to `out`, or to stdout when no path is given.
pub fn emit(value: &impl Serialize, out: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}
