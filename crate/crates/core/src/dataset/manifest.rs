use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{LidError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub label: usize,
    pub duration_ms: u64,
    pub hash: String,
}

/// Ordered language list plus one entry per clip.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Manifest {
    pub languages: Vec<String>,
    pub entries: Vec<ManifestEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    path: String,
    label: usize,
    duration_ms: u64,
    hash: String,
}

const LANG_PREFIX: &str = "# languages=";

impl Manifest {
    pub fn num_classes(&self) -> usize {
        self.languages.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.languages.len()];
        for e in &self.entries {
            c[e.label] += 1;
        }
        c
    }

    pub fn labels(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.label).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.languages.len();
        let mut seen = std::collections::HashSet::new();
        for e in &self.entries {
            if e.label >= c {
                return Err(LidError::InvalidCorpus(format!("{} has label {} but only {c} languages", e.path.display(), e.label)));
            }
            if !seen.insert(&e.hash) {
                return Err(LidError::InvalidCorpus(format!("duplicate content hash {} at {}", e.hash, e.path.display())));
            }
        }
        Ok(())
    }

    /// Tab-separated with a `# languages=` line and a header row. Paths under
    /// the manifest's directory are written relative to it.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let base = path.parent().unwrap_or(Path::new(""));
        let io = |e: std::io::Error| LidError::io(path, e);
        let mut buf = Vec::new();
        writeln!(buf, "{LANG_PREFIX}{}", self.languages.join(",")).map_err(io)?;
        {
            let mut w = csv::WriterBuilder::new().delimiter(b'\t').from_writer(&mut buf);
            for e in &self.entries {
                let rel = e.path.strip_prefix(base).unwrap_or(&e.path);
                w.serialize(Row {
                    path: rel.to_string_lossy().into_owned(),
                    label: e.label,
                    duration_ms: e.duration_ms,
                    hash: e.hash.clone(),
                })
                .map_err(|e| LidError::io(path, std::io::Error::other(e)))?;
            }
            w.flush().map_err(io)?;
        }
        if self.entries.is_empty() {
            buf.extend_from_slice(b"path\tlabel\tduration_ms\thash\n");
        }
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| LidError::io(dir, e))?;
        }
        fs::write(path, buf).map_err(io)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        let file = fs::File::open(path).map_err(|e| LidError::io(path, e))?;
        let mut reader = BufReader::new(file);
        let mut first = String::new();
        reader.read_line(&mut first).map_err(|e| LidError::io(path, e))?;
        let langs = first.trim_end().strip_prefix(LANG_PREFIX).ok_or_else(|| LidError::Parse {
            offset: 0,
            message: format!("{} does not start with `{LANG_PREFIX}`", path.display()),
        })?;
        let languages: Vec<String> = langs.split(',').filter(|s| !s.is_empty()).map(str::to_string).collect();
        let mut entries = Vec::new();
        let mut rdr = csv::ReaderBuilder::new().delimiter(b'\t').from_reader(reader);
        for row in rdr.deserialize::<Row>() {
            let row = row.map_err(|e| LidError::Parse {
                offset: e.position().map(|p| p.byte() + first.len() as u64).unwrap_or(0),
                message: e.to_string(),
            })?;
            let p = PathBuf::from(&row.path);
            let path = if p.is_absolute() { p } else { base.join(p) };
            entries.push(ManifestEntry { path, label: row.label, duration_ms: row.duration_ms, hash: row.hash });
        }
        let m = Self { languages, entries };
        m.validate()?;
        Ok(m)
    }
}
