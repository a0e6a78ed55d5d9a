//! JSON Lines persistence.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::DatasetError;

pub const SAMPLES_FILE: &str = "samples.jsonl";
pub const PAIRS_FILE: &str = "pairs.jsonl";
pub const PLANS_FILE: &str = "plans.jsonl";
/// Caption-cluster assignment (a JSON [`super::ClusterAssignment`]).
pub const CLUSTERS_FILE: &str = "clusters.json";

/// File layout of a forged dataset directory.
#[derive(Clone, Debug)]
pub struct ForgeLayout {
    pub root: PathBuf,
}

impl ForgeLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn samples(&self) -> PathBuf {
        self.root.join(SAMPLES_FILE)
    }

    pub fn pairs(&self) -> PathBuf {
        self.root.join(PAIRS_FILE)
    }

    pub fn plans(&self) -> PathBuf {
        self.root.join(PLANS_FILE)
    }

    pub fn clusters(&self) -> PathBuf {
        self.root.join(CLUSTERS_FILE)
    }

    pub fn images(&self) -> PathBuf {
        self.root.join("images")
    }

    /// Resolves a sample's relative image path.
    pub fn image_path(&self, relative: &str) -> PathBuf {
        self.root.join(relative)
    }
}

fn to_line<T: Serialize>(item: &T) -> String {
    let mut line = serde_json::to_string(item).expect("dataset records always serialize");
    line.push('\n');
    line
}

/// Writes `items` one per line, replacing the file, and syncs it to disk.
pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), DatasetError> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    for item in items {
        w.write_all(to_line(item).as_bytes())?;
    }
    let file = w.into_inner().map_err(|e| e.into_error())?;
    file.sync_all()?;
    Ok(())
}

/// Appends one record and fsyncs before returning.
pub fn append_jsonl<T: Serialize>(path: &Path, item: &T) -> Result<(), DatasetError> {
    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    file.write_all(to_line(item).as_bytes())?;
    file.sync_data()?;
    Ok(())
}

/// Reads every non-blank line; a missing file reads as empty.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, DatasetError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| DatasetError::Json {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(item);
    }
    Ok(out)
}
