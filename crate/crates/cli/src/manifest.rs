use std::fs;
use std::path::{Path, PathBuf};

use schemars::JsonSchema;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

/// What a run depends on. Its digest is cited by every output; reruns with
/// the same digest produce byte-identical outputs.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub config_digest: String,
    /// Arguments with worker count, config path and output location removed.
    pub command: Vec<String>,
    pub seed: u64,
    pub tool_version: &'static str,
}

#[derive(Debug, Serialize)]
struct ManifestFile<'a> {
    digest: String,
    #[serde(flatten)]
    manifest: &'a Manifest,
    outputs: Vec<PathBuf>,
    /// Not part of the digest.
    wall_clock_seconds: f64,
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl Manifest {
    pub fn new(config_bytes: &[u8], argv: &[String], seed: u64) -> Self {
        Manifest {
            config_digest: hex_digest(config_bytes),
            command: normalized_command(argv),
            seed,
            tool_version: env!("CARGO_PKG_VERSION"),
        }
    }

    pub fn digest(&self) -> String {
        hex_digest(&serde_json::to_vec(self).expect("manifest serializes"))
    }

    pub fn write(&self, dir: &Path, outputs: Vec<PathBuf>, wall_clock_seconds: f64) -> Result<(), CliError> {
        let file = ManifestFile { digest: self.digest(), manifest: self, outputs, wall_clock_seconds };
        let text = serde_json::to_string_pretty(&file).expect("manifest serializes");
        write_file(&dir.join("manifest.json"), text.as_bytes())
    }
}

/// Drops flags that cannot change an output: `--threads`, `--out`, and
/// `--config` (its content is digested separately).
fn normalized_command(argv: &[String]) -> Vec<String> {
    const DROP: [&str; 3] = ["--threads", "--out", "--config"];
    let mut out = Vec::new();
    let mut it = argv.iter().skip(1);
    while let Some(a) = it.next() {
        if DROP.contains(&a.as_str()) {
            it.next();
        } else if !DROP.iter().any(|d| a.starts_with(&format!("{d}="))) {
            out.push(a.clone());
        }
    }
    out
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.to_path_buf(), e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

/// JSON output: the report's fields plus the manifest digest.
#[derive(Debug, Serialize, JsonSchema)]
pub struct Envelope<T> {
    pub manifest_digest: String,
    #[serde(flatten)]
    pub report: T,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worker_count_and_paths_do_not_enter_the_command() {
        let argv: Vec<String> = ["reeb-ldp", "--threads", "4", "--config=a.json", "graph", "--out", "x", "export"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(normalized_command(&argv), vec!["graph", "export"]);
    }
}
