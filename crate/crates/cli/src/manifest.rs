use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::args::Command;

pub const MANIFEST_FORMAT: &str = "geohmm-manifest";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Timing {
    /// Seconds since the Unix epoch.
    pub started: f64,
    pub elapsed_secs: f64,
}

/// Record of one run. `invocation` holds every argument with defaults and
/// environment fallbacks resolved, so replaying it needs nothing else.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    pub version: String,
    pub command: String,
    pub invocation: Command,
    pub config: Value,
    pub seed: Option<u64>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub timing: Timing,
    pub exit_code: i32,
    pub result: Value,
}

pub fn now_secs() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Default manifest location: next to the first output, else next to the
/// first input, else in the working directory.
pub fn default_path(command: &Command, inputs: &[PathBuf], outputs: &[PathBuf]) -> PathBuf {
    match (outputs.first(), inputs.first()) {
        (Some(out), _) => with_suffix(out, ".manifest.json"),
        (None, Some(input)) => with_suffix(input, &format!(".{}.manifest.json", command.name())),
        (None, None) => PathBuf::from(format!("geohmm-{}.manifest.json", command.name())),
    }
}

pub fn write(path: &Path, m: &RunManifest) -> Result<()> {
    let mut text = serde_json::to_string_pretty(m)?;
    text.push('\n');
    geohmm::io::write_atomic(path, text.as_bytes()).with_context(|| format!("writing manifest {}", path.display()))
}

pub fn read(path: &Path) -> Result<RunManifest> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
    let m: RunManifest = serde_json::from_str(&text)
        .map_err(geohmm::GeoError::from)
        .with_context(|| format!("parsing manifest {}", path.display()))?;
    if m.format != MANIFEST_FORMAT {
        anyhow::bail!(geohmm::GeoError::Input(format!("{} is not a run manifest", path.display())));
    }
    Ok(m)
}
