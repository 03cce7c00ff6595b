//! Run manifests: every resolved parameter plus SHA-256 hashes of the inputs
//! and outputs, one `key=value` per line.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};

use evnum::harness::hex_digest;

use crate::error::CliError;

#[derive(Debug, Default)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        let mut m = Manifest::default();
        m.set("command", command);
        m.set("version", env!("CARGO_PKG_VERSION"));
        m
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn hash_file(&mut self, key: &str, path: &Path) -> Result<(), CliError> {
        let bytes = fs::read(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
        self.set(key, path.display());
        self.set(&format!("{key}_sha256"), hex_digest(&bytes));
        Ok(())
    }

    /// One hash over a list of files, in the given order.
    pub fn hash_files(&mut self, key: &str, paths: &[PathBuf]) -> Result<(), CliError> {
        let mut joined = String::new();
        for p in paths {
            let bytes = fs::read(p).map_err(|source| CliError::Io { path: p.clone(), source })?;
            joined.push_str(&hex_digest(&bytes));
            joined.push('\n');
        }
        self.set(&format!("{key}_count"), paths.len());
        self.set(&format!("{key}_sha256"), hex_digest(joined.as_bytes()));
        Ok(())
    }

    pub fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}

/// Writes `contents` to `dir/name` and records its hash in the manifest.
pub fn write_output(manifest: &mut Manifest, dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| CliError::Io { path: path.clone(), source })?;
    manifest.set(&format!("output.{name}_sha256"), hex_digest(contents.as_bytes()));
    log::info!("wrote {}", path.display());
    Ok(())
}

pub fn write_manifest(manifest: &Manifest, dir: &Path) -> Result<(), CliError> {
    let path = dir.join("manifest.txt");
    fs::write(&path, manifest.render()).map_err(|source| CliError::Io { path, source })
}
