//! Output directory: artifacts, the sweep result store and the manifest.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use rydberg_dressing::optimize::{RowStatus, SweepRow};

pub const MANIFEST: &str = "manifest.json";
pub const RESULTS: &str = "results.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Complete,
    Partial,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub point: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub status: RunStatus,
    pub config: serde_json::Value,
    pub files: Vec<FileEntry>,
    pub failures: Vec<Failure>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Collects the artifacts of one run inside the output directory.
pub struct OutputDir {
    root: PathBuf,
    files: BTreeMap<String, ()>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(OutputDir { root: root.to_path_buf(), files: BTreeMap::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.path(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.files.insert(name.to_string(), ());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    pub fn write_csv(&mut self, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("csv: {e}"))?;
        self.write_bytes(name, &bytes)
    }

    /// Register a file written by other means (such as the result store).
    pub fn register(&mut self, name: &str) {
        self.files.insert(name.to_string(), ());
    }

    pub fn finish(self, command: &str, config: serde_json::Value, failures: Vec<Failure>, status: RunStatus) -> Result<Manifest> {
        let mut files = Vec::new();
        for name in self.files.keys() {
            let path = self.path(name);
            files.push(FileEntry { path: name.clone(), sha256: sha256_file(&path)?, bytes: fs::metadata(&path)?.len() });
        }
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            status,
            config,
            files,
            failures,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(self.path(MANIFEST), text)?;
        Ok(manifest)
    }
}

/// Recompute every checksum listed in the manifest of `root`.
pub fn verify(root: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(root.join(MANIFEST)).with_context(|| format!("reading manifest in {}", root.display()))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    for f in &manifest.files {
        let actual = sha256_file(&root.join(&f.path))?;
        if actual != f.sha256 {
            bail!("checksum mismatch for {}: manifest {}, file {}", f.path, f.sha256, actual);
        }
    }
    Ok(manifest)
}

/// Rows already in the store, keyed by index; the last line for an index wins.
pub fn load_rows(path: &Path) -> Result<BTreeMap<usize, SweepRow>> {
    let mut rows = BTreeMap::new();
    let Ok(file) = fs::File::open(path) else { return Ok(rows) };
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<SweepRow>(&line) {
            Ok(row) => {
                rows.insert(row.index, row);
            }
            // A torn final line from an interrupted run is dropped.
            Err(e) => log::warn!("ignoring unreadable line {} of {}: {e}", n + 1, path.display()),
        }
    }
    Ok(rows)
}

/// Indices whose stored row completed successfully.
pub fn completed(rows: &BTreeMap<usize, SweepRow>) -> std::collections::BTreeSet<usize> {
    rows.values().filter(|r| r.status == RowStatus::Ok).map(|r| r.index).collect()
}

/// Append-only writer for the result store.
pub struct RowAppender {
    file: fs::File,
}

impl RowAppender {
    pub fn open(path: &Path) -> Result<Self> {
        let file = fs::OpenOptions::new().create(true).append(true).open(path).with_context(|| format!("opening {}", path.display()))?;
        Ok(RowAppender { file })
    }

    pub fn append(&mut self, row: &SweepRow) -> Result<()> {
        let mut line = serde_json::to_string(row)?;
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        self.file.flush()?;
        Ok(())
    }
}

/// Rewrite the store in index order so finished runs are byte-reproducible.
pub fn canonicalize(path: &Path, rows: &BTreeMap<usize, SweepRow>) -> Result<()> {
    let mut text = String::new();
    for row in rows.values() {
        text.push_str(&serde_json::to_string(row)?);
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(index: usize, status: RowStatus) -> SweepRow {
        SweepRow {
            index,
            status,
            params: BTreeMap::new(),
            metrics: BTreeMap::new(),
            optimum: BTreeMap::new(),
            evaluations: 0,
            error: None,
        }
    }

    #[test]
    fn store_round_trip_and_torn_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(RESULTS);
        let mut w = RowAppender::open(&path).unwrap();
        w.append(&row(3, RowStatus::Ok)).unwrap();
        w.append(&row(1, RowStatus::Failed)).unwrap();
        w.append(&row(1, RowStatus::Ok)).unwrap();
        drop(w);
        fs::OpenOptions::new().append(true).open(&path).unwrap().write_all(b"{\"index\": 9, \"sta").unwrap();
        let rows = load_rows(&path).unwrap();
        assert_eq!(rows.keys().copied().collect::<Vec<_>>(), vec![1, 3]);
        assert_eq!(completed(&rows).len(), 2);
        canonicalize(&path, &rows).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap().lines().count(), 2);
    }

    #[test]
    fn manifest_checksums_verify() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(dir.path()).unwrap();
        out.write_csv("a.csv", &["x".into()], &[vec!["1".into()]]).unwrap();
        out.write_json("b.json", &vec![1, 2]).unwrap();
        let m = out.finish("test", serde_json::json!({}), Vec::new(), RunStatus::Complete).unwrap();
        assert_eq!(m.files.len(), 2);
        assert_eq!(verify(dir.path()).unwrap(), m);
        fs::write(dir.path().join("a.csv"), "x\n2\n").unwrap();
        assert!(verify(dir.path()).is_err());
    }
}
