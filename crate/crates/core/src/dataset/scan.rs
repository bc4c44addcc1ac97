use std::fs;
use std::path::{Path, PathBuf};

use super::{Manifest, ManifestEntry};
use crate::audio::probe_wav;
use crate::container::sha256_hex;
use crate::error::{LidError, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScanReport {
    pub skipped_unreadable: usize,
    pub skipped_duplicates: usize,
}

fn collect_wavs(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let rd = fs::read_dir(dir).map_err(|e| LidError::io(dir, e))?;
    for entry in rd {
        let entry = entry.map_err(|e| LidError::io(dir, e))?;
        let p = entry.path();
        if p.is_dir() {
            collect_wavs(&p, out)?;
        } else if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav")) {
            out.push(p);
        }
    }
    Ok(())
}

/// Walks `root/<language>/**.wav`. With no languages given, every
/// subdirectory of `root` is a language, in name order.
pub fn scan_corpus(root: impl AsRef<Path>, languages: &[String]) -> Result<(Manifest, ScanReport)> {
    let root = root.as_ref();
    if !root.is_dir() {
        return Err(LidError::InvalidCorpus(format!("corpus root {} is not a directory", root.display())));
    }
    let languages: Vec<String> = if languages.is_empty() {
        let mut names: Vec<String> = fs::read_dir(root)
            .map_err(|e| LidError::io(root, e))?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().is_dir())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .collect();
        names.sort();
        names
    } else {
        languages.to_vec()
    };
    if languages.is_empty() {
        return Err(LidError::InvalidCorpus(format!("no language directories under {}", root.display())));
    }
    let mut report = ScanReport::default();
    let mut seen = std::collections::HashSet::new();
    let mut entries = Vec::new();
    for (label, lang) in languages.iter().enumerate() {
        let dir = root.join(lang);
        if !dir.is_dir() {
            return Err(LidError::InvalidCorpus(format!("language directory {} is missing", dir.display())));
        }
        let mut files = Vec::new();
        collect_wavs(&dir, &mut files)?;
        files.sort();
        let before = entries.len();
        for path in files {
            let bytes = match fs::read(&path) {
                Ok(b) => b,
                Err(e) => {
                    log::warn!("skipping unreadable {}: {e}", path.display());
                    report.skipped_unreadable += 1;
                    continue;
                }
            };
            let info = match probe_wav(&bytes) {
                Ok(i) => i,
                Err(e) => {
                    log::warn!("skipping {}: {e}", path.display());
                    report.skipped_unreadable += 1;
                    continue;
                }
            };
            let hash = sha256_hex(&bytes);
            if !seen.insert(hash.clone()) {
                log::warn!("skipping {}: duplicate content", path.display());
                report.skipped_duplicates += 1;
                continue;
            }
            let duration_ms = (info.duration_secs() * 1000.0).round() as u64;
            entries.push(ManifestEntry { path, label, duration_ms, hash });
        }
        if entries.len() == before {
            return Err(LidError::InvalidCorpus(format!("language directory {} holds no readable WAV files", dir.display())));
        }
    }
    Ok((Manifest { languages, entries }, report))
}
