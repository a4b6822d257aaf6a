use crate::Result;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
    pub module: String,
    pub operation: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WallTime {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Versions {
    pub barriertop: String,
    pub manifest_format: u32,
}

/// Written last as `manifest.json`. Wall times live only here, so artifact
/// checksums do not depend on them.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_sha256: String,
    pub versions: Versions,
    pub h_list: Vec<f64>,
    pub oracle: bool,
    pub threads: usize,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    pub artifacts: Vec<ArtifactRecord>,
    pub wall_times: Vec<WallTime>,
    pub warnings: Vec<String>,
}

/// Output directory plus the manifest being assembled.
pub struct ArtifactSink {
    dir: PathBuf,
    pub manifest: RunManifest,
}

impl ArtifactSink {
    pub fn new(dir: &Path, manifest: RunManifest) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), manifest })
    }

    pub fn emit(&mut self, name: &str, module: &str, operation: &str, h: Option<f64>, contents: &str) -> Result<()> {
        std::fs::write(self.dir.join(name), contents)?;
        self.manifest.artifacts.push(ArtifactRecord {
            path: name.to_string(),
            sha256: sha256_hex(contents.as_bytes()),
            bytes: contents.len(),
            module: module.to_string(),
            operation: operation.to_string(),
            h,
        });
        Ok(())
    }

    pub fn emit_json<T: Serialize>(&mut self, name: &str, module: &str, operation: &str, h: Option<f64>, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.emit(name, module, operation, h, &text)
    }

    pub fn warn(&mut self, context: &str, msg: impl AsRef<str>) {
        self.manifest.warnings.push(format!("{context}: {}", msg.as_ref()));
    }

    pub fn time(&mut self, stage: impl Into<String>, seconds: f64) {
        self.manifest.wall_times.push(WallTime { stage: stage.into(), seconds });
    }

    pub fn finish(mut self, failure: Option<String>) -> Result<(PathBuf, RunManifest)> {
        self.manifest.status = if failure.is_some() { "failed" } else { "ok" }.into();
        self.manifest.failure = failure;
        let path = self.dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(&self.manifest)?;
        text.push('\n');
        std::fs::write(&path, text)?;
        Ok((path, self.manifest))
    }
}
