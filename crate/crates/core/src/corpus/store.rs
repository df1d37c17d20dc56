use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::types::{Corpus, CveDb, PocReport};
use crate::error::{Error, Result};

pub const CORPUS_FORMAT: &str = "pocfuse-corpus";
pub const CORPUS_VERSION: u32 = 1;
pub const CVE_DB_FORMAT: &str = "pocfuse-cve-db";
pub const CVE_DB_VERSION: u32 = 1;

#[derive(Deserialize)]
struct Header {
    format: String,
    version: u32,
}

#[derive(Serialize)]
struct ContainerRef<'a, T> {
    format: &'a str,
    version: u32,
    data: &'a T,
}

#[derive(Deserialize)]
struct Container<T> {
    data: T,
}

/// Serializes `data` inside a `{format, version, data}` envelope.
pub(crate) fn to_container_bytes<T: Serialize>(format: &str, version: u32, data: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(&ContainerRef {
        format,
        version,
        data,
    })
    .expect("in-memory serialization cannot fail");
    bytes.push(b'\n');
    bytes
}

pub(crate) fn from_container_bytes<T: DeserializeOwned>(
    path: &Path,
    bytes: &[u8],
    format: &'static str,
    version: u32,
) -> Result<T> {
    let parse_err = |e: serde_json::Error| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let header: Header = serde_json::from_slice(bytes).map_err(parse_err)?;
    if header.format != format {
        return Err(Error::FormatTag {
            path: path.to_path_buf(),
            found: header.format,
            expected: format,
        });
    }
    if header.version != version {
        return Err(Error::FormatVersion {
            path: path.to_path_buf(),
            found: header.version,
            expected: version,
        });
    }
    let container: Container<T> = serde_json::from_slice(bytes).map_err(parse_err)?;
    Ok(container.data)
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn corpus_to_bytes(corpus: &Corpus) -> Vec<u8> {
    to_container_bytes(CORPUS_FORMAT, CORPUS_VERSION, &corpus.reports())
}

pub fn save_corpus(corpus: &Corpus, path: &Path) -> Result<()> {
    write_file(path, &corpus_to_bytes(corpus))
}

/// `path` only labels errors.
pub fn corpus_from_bytes(path: &Path, bytes: &[u8]) -> Result<Corpus> {
    let reports: Vec<PocReport> = from_container_bytes(path, bytes, CORPUS_FORMAT, CORPUS_VERSION)?;
    Corpus::new(reports)
}

pub fn load_corpus(path: &Path) -> Result<Corpus> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    corpus_from_bytes(path, &bytes)
}

pub fn cve_db_to_bytes(db: &CveDb) -> Vec<u8> {
    to_container_bytes(CVE_DB_FORMAT, CVE_DB_VERSION, db)
}

pub fn save_cve_db(db: &CveDb, path: &Path) -> Result<()> {
    write_file(path, &cve_db_to_bytes(db))
}

pub fn cve_db_from_bytes(path: &Path, bytes: &[u8]) -> Result<CveDb> {
    from_container_bytes(path, bytes, CVE_DB_FORMAT, CVE_DB_VERSION)
}

pub fn load_cve_db(path: &Path) -> Result<CveDb> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    cve_db_from_bytes(path, &bytes)
}
