use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const MANIFEST: &str = "manifest.json";

/// Record of the stages completed in an output directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config_hash: String,
    /// The effective configuration, relative to the output directory.
    #[serde(default)]
    pub config_file: String,
    /// Resolved seed of each stage.
    #[serde(default)]
    pub seeds: BTreeMap<String, u64>,
    pub stages: BTreeMap<String, StageRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub hash: String,
    /// Paths relative to the output directory.
    pub files: Vec<String>,
    pub seconds: f64,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(MANIFEST);
        match fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text)
                .map_err(|e| CliError::config(format!("{}: {e}", path.display()))),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Manifest {
                version: env!("CARGO_PKG_VERSION").into(),
                ..Manifest::default()
            }),
            Err(e) => Err(CliError::io(&path, e)),
        }
    }

    pub fn save(&self, dir: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        write_atomic(&dir.join(MANIFEST), text.as_bytes())
    }

    /// Errors unless `stage` was recorded with `hash` and all its files exist.
    pub fn require(
        &self,
        dir: &Path,
        stage: &str,
        hash: &str,
        hint: &str,
    ) -> Result<&StageRecord, CliError> {
        let rec = self
            .stages
            .get(stage)
            .ok_or_else(|| CliError::missing(&dir.join(stage), hint))?;
        if rec.hash != hash {
            return Err(CliError::stale(&format!("stage `{stage}`"), hint));
        }
        for f in &rec.files {
            let p = dir.join(f);
            if !p.exists() {
                return Err(CliError::missing(&p, hint));
            }
        }
        Ok(rec)
    }
}

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

/// Collects the files a stage writes, relative to the output directory.
pub struct StageWriter<'a> {
    pub dir: &'a Path,
    pub files: Vec<String>,
}

impl<'a> StageWriter<'a> {
    pub fn new(dir: &'a Path) -> Self {
        StageWriter {
            dir,
            files: Vec::new(),
        }
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.dir.join(rel);
        write_atomic(&path, bytes)?;
        self.files.push(rel.to_string());
        Ok(path)
    }

    pub fn write_with(
        &mut self,
        rel: &str,
        f: impl FnOnce(&mut Vec<u8>) -> fex_sde::Result<()>,
    ) -> Result<PathBuf, CliError> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(rel, &buf)
    }
}

pub fn read_artifact(dir: &Path, rel: &str, hint: &str) -> Result<Vec<u8>, CliError> {
    let path = dir.join(rel);
    fs::read(&path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CliError::missing(&path, hint),
        _ => CliError::io(&path, e),
    })
}
