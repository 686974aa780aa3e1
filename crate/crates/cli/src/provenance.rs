use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// JSON sidecar written next to every output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub command: String,
    pub timestamp: String,
    pub tool_version: String,
    pub core_version: String,
}

impl Provenance {
    pub fn new(config_hash: String, seed: u64, command: &str) -> Self {
        Self {
            config_hash,
            seed,
            command: command.to_string(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            core_version: hpa_core::VERSION.to_string(),
        }
    }
}

/// `<file>.provenance.json`.
pub fn sidecar_path(file: &Path) -> PathBuf {
    let mut s = file.as_os_str().to_owned();
    s.push(".provenance.json");
    PathBuf::from(s)
}

/// Writes files into one directory, each with its sidecar.
pub struct OutputSink {
    dir: PathBuf,
    provenance: Provenance,
    written: Vec<PathBuf>,
}

impl OutputSink {
    pub fn new(dir: PathBuf, provenance: Provenance) -> Result<Self, CliError> {
        std::fs::create_dir_all(&dir)
            .map_err(|e| CliError::Usage(format!("output directory {}: {e}", dir.display())))?;
        Ok(Self {
            dir,
            provenance,
            written: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write(
        &mut self,
        name: &str,
        body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
    ) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        let mut out = BufWriter::new(File::create(&path)?);
        body(&mut out)?;
        out.flush()?;
        self.attach(&path)?;
        Ok(path)
    }

    /// Adds a sidecar for a file produced elsewhere.
    pub fn attach(&mut self, path: &Path) -> Result<(), CliError> {
        let json = serde_json::to_string_pretty(&self.provenance).expect("provenance is serializable");
        std::fs::write(sidecar_path(path), json + "\n")?;
        log::info!("wrote {}", path.display());
        self.written.push(path.to_path_buf());
        Ok(())
    }
}
