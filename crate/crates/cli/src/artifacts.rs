//! Run directory bookkeeping. Every artifact carries the config fingerprint:
//! CSV files in a leading `#` comment, JSON files in a `fingerprint` field,
//! SVG and Markdown in a leading comment. `manifest.json` lists what each
//! stage wrote together with a SHA-256 of the bytes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub const MANIFEST: &str = "manifest.json";
const MANIFEST_FORMAT: &str = "dsec-run";
const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub stage: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub fingerprint: String,
    pub seed: u64,
    pub config: RunConfig,
    pub artifacts: BTreeMap<String, ArtifactEntry>,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Option<Manifest>> {
        let path = dir.join(MANIFEST);
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path)?;
        let m: Manifest = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if m.format != MANIFEST_FORMAT || m.version != MANIFEST_VERSION {
            bail!("{} is not a version {MANIFEST_VERSION} run manifest", path.display());
        }
        Ok(Some(m))
    }
}

pub fn short(fp: &str) -> &str {
    &fp[..fp.len().min(12)]
}

/// Leading comment line for CSV artifacts.
pub fn csv_stamp(fingerprint: &str, seed: u64) -> String {
    format!("# dsec fingerprint={fingerprint} seed={seed}\n")
}

/// Reads the fingerprint an artifact was written under.
pub fn read_stamp(path: &Path) -> Result<Option<String>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if path.extension().is_some_and(|e| e == "json") {
        let v: serde_json::Value =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        return Ok(v.get("fingerprint").and_then(|f| f.as_str()).map(str::to_string));
    }
    // SVG puts the stamp after its root element
    Ok(text
        .lines()
        .take(3)
        .flat_map(str::split_whitespace)
        .find_map(|tok| tok.strip_prefix("fingerprint="))
        .map(str::to_string))
}

/// The output directory of one run, bound to the resolved config.
pub struct Run {
    pub dir: PathBuf,
    pub config: RunConfig,
    pub fingerprint: String,
}

impl Run {
    pub fn new(dir: PathBuf, config: RunConfig) -> Self {
        let fingerprint = config.fingerprint();
        Self {
            dir,
            config,
            fingerprint,
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn exists(&self, name: &str) -> bool {
        self.path(name).exists()
    }

    /// Path of an upstream artifact, checked for presence and fingerprint.
    pub fn require(&self, name: &str, command: &str) -> Result<PathBuf> {
        let path = self.path(name);
        if !path.exists() {
            bail!("{name} not found in {}; run `{command}` first", self.dir.display());
        }
        match read_stamp(&path)? {
            Some(fp) if fp == self.fingerprint => Ok(path),
            Some(fp) => bail!(
                "{name} was written under config fingerprint {}, but the current config is {}; rerun `{command}`",
                short(&fp),
                short(&self.fingerprint)
            ),
            None => bail!("{name} carries no config fingerprint; rerun `{command}`"),
        }
    }

    /// Writes an artifact and records it in the manifest. A manifest from a
    /// different config is replaced, which orphans its artifacts.
    pub fn write(&self, name: &str, stage: &str, bytes: &[u8]) -> Result<PathBuf> {
        fs::create_dir_all(&self.dir).with_context(|| format!("creating {}", self.dir.display()))?;
        let path = self.path(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        let mut manifest = match Manifest::load(&self.dir)? {
            Some(m) if m.fingerprint == self.fingerprint => m,
            _ => Manifest {
                format: MANIFEST_FORMAT.into(),
                version: MANIFEST_VERSION,
                fingerprint: self.fingerprint.clone(),
                seed: self.config.seed,
                config: self.config.clone(),
                artifacts: BTreeMap::new(),
            },
        };
        manifest.artifacts.insert(
            name.to_string(),
            ArtifactEntry {
                stage: stage.to_string(),
                sha256: hex::encode(Sha256::digest(bytes)),
            },
        );
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(self.path(MANIFEST), text)?;
        log::info!("wrote {}", path.display());
        Ok(path)
    }

    pub fn write_csv(&self, name: &str, stage: &str, body: &str) -> Result<PathBuf> {
        let mut text = csv_stamp(&self.fingerprint, self.config.seed);
        text.push_str(body);
        self.write(name, stage, text.as_bytes())
    }

    /// Serializes `value` with a leading `fingerprint` field.
    pub fn write_json<T: Serialize>(&self, name: &str, stage: &str, value: &T) -> Result<PathBuf> {
        let mut map = serde_json::Map::new();
        map.insert("fingerprint".into(), self.fingerprint.clone().into());
        map.insert("seed".into(), self.config.seed.into());
        match serde_json::to_value(value)? {
            serde_json::Value::Object(fields) => map.extend(fields),
            other => {
                map.insert("value".into(), other);
            }
        }
        let mut text = serde_json::to_string_pretty(&serde_json::Value::Object(map))?;
        text.push('\n');
        self.write(name, stage, text.as_bytes())
    }
}
