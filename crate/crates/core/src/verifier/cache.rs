//! Append-only JSON-lines cache of decided canonical assignments.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::solver::Verdict;

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("cache {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("cache {path} line {line}: {source}")]
    Parse {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub parts: Vec<usize>,
    pub key: String,
    pub verdict: Verdict,
}

/// Verdicts keyed by canonical structure and assignment key.
#[derive(Debug, Default)]
pub struct VerdictCache {
    path: Option<PathBuf>,
    entries: HashMap<(Vec<usize>, String), Verdict>,
}

impl VerdictCache {
    /// A cache that is never persisted.
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Loads `path` if it exists; new records will be appended to it.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, CacheError> {
        let path = path.as_ref().to_path_buf();
        let mut entries = HashMap::new();
        match File::open(&path) {
            Ok(file) => {
                for (i, line) in BufReader::new(file).lines().enumerate() {
                    let line = line.map_err(|source| CacheError::Io {
                        path: path.clone(),
                        source,
                    })?;
                    if line.trim().is_empty() {
                        continue;
                    }
                    let rec: CacheRecord =
                        serde_json::from_str(&line).map_err(|source| CacheError::Parse {
                            path: path.clone(),
                            line: i + 1,
                            source,
                        })?;
                    entries.insert((rec.parts, rec.key), rec.verdict);
                }
            }
            Err(e) if e.kind() == io::ErrorKind::NotFound => {}
            Err(source) => return Err(CacheError::Io { path, source }),
        }
        Ok(Self {
            path: Some(path),
            entries,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, parts: &[usize], key: &str) -> Option<Verdict> {
        self.entries
            .get(&(parts.to_vec(), key.to_string()))
            .copied()
    }

    /// Records new verdicts, appending them to the backing file if any.
    pub fn extend(&mut self, records: Vec<CacheRecord>) -> Result<(), CacheError> {
        if records.is_empty() {
            return Ok(());
        }
        if let Some(path) = &self.path {
            let io_err = |source| CacheError::Io {
                path: path.clone(),
                source,
            };
            let file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(io_err)?;
            let mut out = BufWriter::new(file);
            for rec in &records {
                let line = serde_json::to_string(rec).expect("cache records serialize");
                writeln!(out, "{line}").map_err(io_err)?;
            }
            out.flush().map_err(io_err)?;
        }
        for rec in records {
            self.entries.insert((rec.parts, rec.key), rec.verdict);
        }
        Ok(())
    }
}
