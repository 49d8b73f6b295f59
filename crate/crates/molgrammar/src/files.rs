//! Dataset and JSON artifact files.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use molgrammar_core::molecule::{parse_smiles, MolecularGraph, SmilesError};
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FileError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}:{line}: {source}")]
    Smiles { path: PathBuf, line: usize, source: SmilesError },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> FileError + '_ {
    move |source| FileError::Io { path: path.to_owned(), source }
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), FileError> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|source| FileError::Json { path: path.to_owned(), source })?;
    text.push('\n');
    write_atomic(path, text.as_bytes()).map_err(io_err(path))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, FileError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| FileError::Json { path: path.to_owned(), source })
}

/// One JSON document per line.
pub fn write_json_lines<T: Serialize>(path: &Path, items: &[T]) -> Result<(), FileError> {
    let mut text = String::new();
    for item in items {
        text.push_str(
            &serde_json::to_string(item).map_err(|source| FileError::Json { path: path.to_owned(), source })?,
        );
        text.push('\n');
    }
    write_atomic(path, text.as_bytes()).map_err(io_err(path))
}

pub fn read_json_lines<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, FileError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|source| FileError::Json { path: path.to_owned(), source }))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetEntry {
    pub smiles: String,
    pub molecule: MolecularGraph,
}

/// Reads one SMILES per line. Text after the first whitespace is ignored, as
/// are blank lines and lines starting with `#`.
pub fn read_dataset(path: &Path) -> Result<Vec<DatasetEntry>, FileError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_dataset(&text).map_err(|(line, source)| FileError::Smiles { path: path.to_owned(), line, source })
}

pub fn parse_dataset(text: &str) -> Result<Vec<DatasetEntry>, (usize, SmilesError)> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let Some(smiles) = line.split_whitespace().next().filter(|s| !s.starts_with('#')) else {
            continue;
        };
        let molecule = parse_smiles(smiles).map_err(|e| (i + 1, e))?;
        out.push(DatasetEntry { smiles: smiles.to_owned(), molecule });
    }
    Ok(out)
}

/// Non-empty, non-comment lines, trimmed; used for sample files where
/// invalid strings must be kept.
pub fn read_lines(path: &Path) -> Result<Vec<String>, FileError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_owned)
        .collect())
}
