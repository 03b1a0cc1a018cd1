//! Input loading with digests, buffered outputs and the run manifest.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use navcore::scene::{scene_from_json, Scene};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{data, CliError};

pub const SPLIT_FILE: &str = "split.json";
pub const MANIFEST_FILE: &str = "run_manifest.json";

/// Ordered list of scene files; relative entries resolve against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitManifest {
    pub scenes: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub config: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<String>,
    pub started_unix_seconds: f64,
    pub wall_clock_seconds: f64,
}

/// Bookkeeping for one command run. Outputs are buffered and written by `finish`.
pub struct Run {
    command: &'static str,
    config: serde_json::Value,
    inputs: BTreeMap<String, String>,
    outputs: Vec<(PathBuf, Vec<u8>)>,
    started: SystemTime,
    clock: Instant,
}

impl Run {
    pub fn new(command: &'static str, config: serde_json::Value) -> Self {
        Self { command, config, inputs: BTreeMap::new(), outputs: Vec::new(), started: SystemTime::now(), clock: Instant::now() }
    }

    /// Reads a UTF-8 input file and records its digest.
    pub fn read(&mut self, path: &Path) -> Result<String, CliError> {
        let bytes = std::fs::read(path).map_err(|e| data(format!("cannot read {}: {e}", path.display())))?;
        self.inputs.insert(path.display().to_string(), hex::encode(Sha256::digest(&bytes)));
        String::from_utf8(bytes).map_err(|_| data(format!("{} is not valid UTF-8", path.display())))
    }

    pub fn read_json<T: serde::de::DeserializeOwned>(&mut self, path: &Path) -> Result<T, CliError> {
        let text = self.read(path)?;
        serde_json::from_str(&text).map_err(|e| data(format!("malformed {}: {e}", path.display())))
    }

    pub fn output(&mut self, path: impl Into<PathBuf>, bytes: impl Into<Vec<u8>>) {
        self.outputs.push((path.into(), bytes.into()));
    }

    pub fn output_json<T: Serialize>(&mut self, path: impl Into<PathBuf>, value: &T) {
        let mut text = serde_json::to_string_pretty(value).expect("report serialization is infallible");
        text.push('\n');
        self.output(path, text);
    }

    /// Writes every buffered output, then the manifest at `manifest_path`.
    pub fn finish(self, manifest_path: &Path) -> Result<(), CliError> {
        for (path, bytes) in &self.outputs {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| data(format!("cannot create {}: {e}", dir.display())))?;
            }
            std::fs::write(path, bytes).map_err(|e| data(format!("cannot write {}: {e}", path.display())))?;
        }
        let manifest = RunManifest {
            command: self.command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config: self.config,
            inputs: self.inputs.into_iter().map(|(path, sha256)| InputDigest { path, sha256 }).collect(),
            outputs: self.outputs.iter().map(|(p, _)| p.display().to_string()).collect(),
            started_unix_seconds: self.started.duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0),
            wall_clock_seconds: self.clock.elapsed().as_secs_f64(),
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serialization is infallible") + "\n";
        std::fs::write(manifest_path, text).map_err(|e| data(format!("cannot write {}: {e}", manifest_path.display())))
    }
}

/// `report.json` -> `report.manifest.json`.
pub fn manifest_beside(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
    out.with_file_name(format!("{stem}.manifest.json"))
}

pub struct SceneSet {
    pub scenes: Vec<Scene>,
    pub paths: Vec<PathBuf>,
}

impl SceneSet {
    pub fn path_of(&self, scene_id: &str) -> Option<&Path> {
        self.scenes.iter().position(|s| s.scene_id == scene_id).map(|i| self.paths[i].as_path())
    }
}

fn is_split(value: &serde_json::Value) -> bool {
    value.get("scenes").is_some_and(serde_json::Value::is_array) && value.get("scene_id").is_none()
}

/// Loads scenes from a directory, a split manifest or a single scene file.
///
/// A directory uses its `split.json` when present and otherwise every
/// `*.json` file in name order, skipping manifests.
pub fn load_scene_set(run: &mut Run, path: &Path) -> Result<SceneSet, CliError> {
    let files: Vec<PathBuf> = if path.is_dir() {
        let split = path.join(SPLIT_FILE);
        if split.is_file() {
            split_entries(run, &split)?
        } else {
            let mut files: Vec<PathBuf> = std::fs::read_dir(path)
                .map_err(|e| data(format!("cannot list {}: {e}", path.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
                .filter(|p| {
                    let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
                    name != MANIFEST_FILE && !name.ends_with(".manifest.json") && name != "kept.json"
                })
                .collect();
            files.sort();
            files
        }
    } else {
        let text = run.read(path)?;
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| data(format!("malformed {}: {e}", path.display())))?;
        if is_split(&value) {
            split_entries(run, path)?
        } else {
            let scene = scene_from_json(&text).map_err(|e| data(format!("{}: {e}", path.display())))?;
            return Ok(SceneSet { scenes: vec![scene], paths: vec![path.to_path_buf()] });
        }
    };
    if files.is_empty() {
        return Err(data(format!("no scene files found in {}", path.display())));
    }
    let mut scenes = Vec::with_capacity(files.len());
    let mut seen = HashSet::new();
    for file in &files {
        let text = run.read(file)?;
        let scene = scene_from_json(&text).map_err(|e| data(format!("{}: {e}", file.display())))?;
        if !seen.insert(scene.scene_id.clone()) {
            return Err(data(format!("duplicate scene id '{}' in {}", scene.scene_id, file.display())));
        }
        scenes.push(scene);
    }
    Ok(SceneSet { scenes, paths: files })
}

fn split_entries(run: &mut Run, manifest: &Path) -> Result<Vec<PathBuf>, CliError> {
    let split: SplitManifest = run.read_json(manifest)?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    Ok(split
        .scenes
        .iter()
        .map(|entry| {
            let p = Path::new(entry);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        })
        .collect())
}

/// Absolute form of `path` for manifests that outlive the working directory.
pub fn absolute(path: &Path) -> PathBuf {
    std::fs::canonicalize(path).unwrap_or_else(|_| std::path::absolute(path).unwrap_or_else(|_| path.to_path_buf()))
}
