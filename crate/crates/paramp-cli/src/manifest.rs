use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};

use crate::job::{config_error, Job};

/// Record written beside each output; re-running it reproduces the output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub tool_version: String,
    pub output: PathBuf,
    pub seed: Option<u64>,
    pub wall_clock_seconds: f64,
    pub job: Job,
}

/// `<output>.manifest.toml`
pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name: OsString = output.as_os_str().to_owned();
    name.push(".manifest.toml");
    PathBuf::from(name)
}

impl Manifest {
    pub fn write(&self) -> anyhow::Result<PathBuf> {
        let path = manifest_path(&self.output);
        let text = toml::to_string(self).context("serialising manifest")?;
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn read(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| config_error(format!("cannot read manifest {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| config_error(format!("invalid manifest {}: {e}", path.display())))
    }
}
