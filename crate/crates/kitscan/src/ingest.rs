//! Kit ingestion: load zip/tar/tar.gz archives or plain directories into a
//! normalized in-memory representation, classify files by kind, and
//! enumerate corpora deterministically.
//!
//! Extraction is purely in-memory; nothing is ever written to disk, so a
//! hostile archive cannot place files outside the working root. Entries whose
//! paths try to escape via ".." are dropped and reported as warnings.

use std::borrow::Cow;
use std::collections::BTreeSet;
use std::fs;
use std::io::{Cursor, Read};
use std::path::Path;

use flate2::read::GzDecoder;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("unsupported archive format: {0}")]
    UnsupportedFormat(String),
    #[error("limit exceeded: {0}")]
    LimitExceeded(String),
    #[error("corrupt archive: {0}")]
    CorruptArchive(String),
    #[error("encrypted archive entry: {0}")]
    EncryptedArchive(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// File-kind taxonomy behind the structural count features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FileKind {
    Php,
    Js,
    Txt,
    Exe,
    Dll,
    Apk,
    Html,
    Css,
    Pdf,
    Multimedia,
    Other,
}

impl FileKind {
    pub const ALL: [FileKind; 11] = [
        FileKind::Php,
        FileKind::Js,
        FileKind::Txt,
        FileKind::Exe,
        FileKind::Dll,
        FileKind::Apk,
        FileKind::Html,
        FileKind::Css,
        FileKind::Pdf,
        FileKind::Multimedia,
        FileKind::Other,
    ];
}

/// One regular file inside a kit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileEntry {
    /// Normalized slash-separated path, free of "." / ".." components.
    pub relative_path: String,
    pub kind: FileKind,
    pub size_bytes: u64,
    pub content: Vec<u8>,
}

impl FileEntry {
    /// Leniently decoded text view (UTF-8 with replacement characters).
    pub fn text(&self) -> Cow<'_, str> {
        String::from_utf8_lossy(&self.content)
    }

    /// Final path segment, with nested-archive prefixes stripped.
    pub fn basename(&self) -> &str {
        let tail = self
            .relative_path
            .rsplit('/')
            .next()
            .unwrap_or(&self.relative_path);
        tail.rsplit('!').next().unwrap_or(tail)
    }
}

/// Normalized view of one phishing kit. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KitArchive {
    /// Stable identifier: archive filename stem or directory name.
    pub kit_id: String,
    /// Original archive filename (equals kit dir name for directories).
    pub origin_name: String,
    pub entries: Vec<FileEntry>,
    pub directory_count: usize,
}

impl KitArchive {
    pub fn entries_of_kind(&self, kind: FileKind) -> impl Iterator<Item = &FileEntry> {
        self.entries.iter().filter(move |e| e.kind == kind)
    }

    /// Entries matching a basename, case-insensitive (".htaccess", "robots.txt").
    pub fn entries_named<'a>(&'a self, basename: &'a str) -> impl Iterator<Item = &'a FileEntry> {
        self.entries
            .iter()
            .filter(move |e| e.basename().eq_ignore_ascii_case(basename))
    }
}

/// Resource bounds for a single kit load.
#[derive(Debug, Clone)]
pub struct IngestLimits {
    pub max_total_bytes: u64,
    pub max_entry_bytes: u64,
    pub max_entries: usize,
    pub max_nested_archive_depth: usize,
}

impl Default for IngestLimits {
    fn default() -> Self {
        IngestLimits {
            max_total_bytes: 512 * 1024 * 1024,
            max_entry_bytes: 32 * 1024 * 1024,
            max_entries: 50_000,
            max_nested_archive_depth: 1,
        }
    }
}

/// Diagnostic emitted during a load; serialized as one JSON object per line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestWarning {
    pub kit_id: String,
    pub warning: String,
}

#[derive(Debug, Clone)]
pub struct LoadedKit {
    pub kit: KitArchive,
    pub warnings: Vec<IngestWarning>,
}

/// Extension mapping; unmatched extensions are `Other`. Total function.
pub fn classify_file(relative_path: &str, _first_bytes: &[u8]) -> FileKind {
    let name = relative_path
        .rsplit(['/', '!'])
        .next()
        .unwrap_or(relative_path);
    let ext = match name.rsplit_once('.') {
        Some((_, e)) => e.to_ascii_lowercase(),
        None => return FileKind::Other,
    };
    match ext.as_str() {
        "php" | "php3" | "php4" | "php5" | "phtml" => FileKind::Php,
        "js" => FileKind::Js,
        "txt" => FileKind::Txt,
        "exe" => FileKind::Exe,
        "dll" => FileKind::Dll,
        "apk" => FileKind::Apk,
        "html" | "htm" => FileKind::Html,
        "css" => FileKind::Css,
        "pdf" => FileKind::Pdf,
        "png" | "jpg" | "jpeg" | "gif" | "bmp" | "svg" | "ico" | "webp" | "mp4" | "avi"
        | "mov" | "mp3" | "wav" => FileKind::Multimedia,
        _ => FileKind::Other,
    }
}

/// Normalize an archive-internal path. Returns None if the path is empty,
/// absolute, or contains "." / ".." components.
fn sanitize_path(raw: &str) -> Option<String> {
    if raw.starts_with('/') || raw.starts_with('\\') || raw.contains(':') && raw.len() > 1 && raw.as_bytes()[1] == b':' {
        return None;
    }
    let mut parts = Vec::new();
    for part in raw.split(['/', '\\']) {
        if part.is_empty() {
            continue;
        }
        if part == "." || part == ".." {
            return None;
        }
        parts.push(part);
    }
    if parts.is_empty() {
        None
    } else {
        Some(parts.join("/"))
    }
}

fn archive_container_kind(name: &str) -> Option<&'static str> {
    let lower = name.to_ascii_lowercase();
    if lower.ends_with(".zip") {
        Some("zip")
    } else if lower.ends_with(".tar.gz") || lower.ends_with(".tgz") {
        Some("tar.gz")
    } else if lower.ends_with(".tar") {
        Some("tar")
    } else {
        None
    }
}

fn kit_id_for(name: &str) -> String {
    let lower = name.to_ascii_lowercase();
    for suffix in [".tar.gz", ".tgz", ".zip", ".tar"] {
        if lower.ends_with(suffix) {
            return name[..name.len() - suffix.len()].to_string();
        }
    }
    name.to_string()
}

struct Collector<'a> {
    kit_id: String,
    limits: &'a IngestLimits,
    entries: Vec<FileEntry>,
    warnings: Vec<IngestWarning>,
    total_bytes: u64,
}

impl<'a> Collector<'a> {
    fn new(kit_id: String, limits: &'a IngestLimits) -> Self {
        Collector {
            kit_id,
            limits,
            entries: Vec::new(),
            warnings: Vec::new(),
            total_bytes: 0,
        }
    }

    fn warn(&mut self, msg: String) {
        self.warnings.push(IngestWarning {
            kit_id: self.kit_id.clone(),
            warning: msg,
        });
    }

    fn push(&mut self, path: String, content: Vec<u8>, depth: usize) -> Result<(), IngestError> {
        let size = content.len() as u64;
        if size > self.limits.max_entry_bytes {
            self.warn(format!("entry {path} exceeds per-entry size limit, skipped"));
            return Ok(());
        }
        self.total_bytes += size;
        if self.total_bytes > self.limits.max_total_bytes {
            return Err(IngestError::LimitExceeded(format!(
                "total bytes exceed {}",
                self.limits.max_total_bytes
            )));
        }
        if self.entries.len() >= self.limits.max_entries {
            return Err(IngestError::LimitExceeded(format!(
                "entry count exceeds {}",
                self.limits.max_entries
            )));
        }
        // Expand nested archives in addition to keeping the raw container entry.
        if depth < self.limits.max_nested_archive_depth {
            if let Some(kind) = archive_container_kind(&path) {
                match self.expand_nested(&path, &content, kind, depth + 1) {
                    Ok(()) => {}
                    Err(e) => self.warn(format!("nested archive {path} not expanded: {e}")),
                }
            }
        }
        let kind = classify_file(&path, &content[..content.len().min(16)]);
        self.entries.push(FileEntry {
            relative_path: path,
            kind,
            size_bytes: size,
            content,
        });
        Ok(())
    }

    fn expand_nested(
        &mut self,
        container: &str,
        bytes: &[u8],
        kind: &str,
        depth: usize,
    ) -> Result<(), IngestError> {
        let inner = read_archive_bytes(bytes, kind)?;
        for (raw_path, content) in inner {
            match sanitize_path(&raw_path) {
                Some(p) => self.push(format!("{container}!{p}"), content, depth)?,
                None => self.warn(format!(
                    "entry {raw_path} in {container} escapes the archive root, dropped"
                )),
            }
        }
        Ok(())
    }
}

/// Decode one archive blob into (raw path, content) pairs. Paths are not yet
/// sanitized; directories are skipped.
fn read_archive_bytes(bytes: &[u8], kind: &str) -> Result<Vec<(String, Vec<u8>)>, IngestError> {
    match kind {
        "zip" => {
            let mut archive = zip::ZipArchive::new(Cursor::new(bytes))
                .map_err(|e| IngestError::CorruptArchive(e.to_string()))?;
            let mut out = Vec::new();
            for i in 0..archive.len() {
                let mut file = match archive.by_index(i) {
                    Ok(f) => f,
                    Err(zip::result::ZipError::UnsupportedArchive(msg))
                        if msg.contains("Password") =>
                    {
                        return Err(IngestError::EncryptedArchive(format!("entry {i}")));
                    }
                    Err(e) => return Err(IngestError::CorruptArchive(e.to_string())),
                };
                if file.is_dir() {
                    continue;
                }
                if file.encrypted() {
                    return Err(IngestError::EncryptedArchive(file.name().to_string()));
                }
                let mut content = Vec::with_capacity(file.size() as usize);
                file.read_to_end(&mut content)
                    .map_err(|e| IngestError::CorruptArchive(e.to_string()))?;
                out.push((file.name().to_string(), content));
            }
            Ok(out)
        }
        "tar" => read_tar(bytes),
        "tar.gz" => {
            let mut decoded = Vec::new();
            GzDecoder::new(bytes)
                .read_to_end(&mut decoded)
                .map_err(|e| IngestError::CorruptArchive(e.to_string()))?;
            read_tar(&decoded)
        }
        other => Err(IngestError::UnsupportedFormat(other.to_string())),
    }
}

fn read_tar(bytes: &[u8]) -> Result<Vec<(String, Vec<u8>)>, IngestError> {
    let mut archive = tar::Archive::new(Cursor::new(bytes));
    let mut out = Vec::new();
    let entries = archive
        .entries()
        .map_err(|e| IngestError::CorruptArchive(e.to_string()))?;
    for entry in entries {
        let mut entry = entry.map_err(|e| IngestError::CorruptArchive(e.to_string()))?;
        if !entry.header().entry_type().is_file() {
            continue;
        }
        let path = String::from_utf8_lossy(&entry.path_bytes()).into_owned();
        let mut content = Vec::new();
        entry
            .read_to_end(&mut content)
            .map_err(|e| IngestError::CorruptArchive(e.to_string()))?;
        out.push((path, content));
    }
    Ok(out)
}

fn directory_count(entries: &[FileEntry]) -> usize {
    let mut dirs: BTreeSet<&str> = BTreeSet::new();
    for e in entries {
        let p = &e.relative_path;
        let mut idx = 0;
        while let Some(pos) = p[idx..].find('/') {
            dirs.insert(&p[..idx + pos]);
            idx += pos + 1;
        }
    }
    dirs.len()
}

/// Load one kit from an archive file or a plain directory.
pub fn load_kit(path: &Path, limits: &IngestLimits) -> Result<LoadedKit, IngestError> {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.to_string_lossy().into_owned());
    let kit_id = kit_id_for(&name);
    let mut collector = Collector::new(kit_id.clone(), limits);

    if path.is_dir() {
        let mut files: Vec<_> = walkdir::WalkDir::new(path)
            .follow_links(false)
            .into_iter()
            .filter_map(|e| e.ok())
            .filter(|e| e.file_type().is_file())
            .map(|e| e.into_path())
            .collect();
        files.sort();
        for file in files {
            let rel = file
                .strip_prefix(path)
                .map(|r| r.to_string_lossy().into_owned())
                .unwrap_or_default();
            let Some(rel) = sanitize_path(&rel) else {
                collector.warn(format!("path {} not representable, dropped", file.display()));
                continue;
            };
            let content = fs::read(&file)?;
            collector.push(rel, content, 0)?;
        }
    } else if path.is_file() {
        let kind = archive_container_kind(&name)
            .ok_or_else(|| IngestError::UnsupportedFormat(name.clone()))?;
        let bytes = fs::read(path)?;
        if bytes.len() as u64 > limits.max_total_bytes {
            return Err(IngestError::LimitExceeded(format!(
                "archive {} exceeds total byte limit",
                name
            )));
        }
        for (raw_path, content) in read_archive_bytes(&bytes, kind)? {
            match sanitize_path(&raw_path) {
                Some(p) => collector.push(p, content, 0)?,
                None => collector.warn(format!("entry {raw_path} escapes the archive root, dropped")),
            }
        }
    } else {
        return Err(IngestError::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("{} does not exist", path.display()),
        )));
    }

    // Archives can repeat a path; keep the first occurrence.
    let mut seen = BTreeSet::new();
    let mut entries = Vec::new();
    for e in collector.entries {
        if seen.insert(e.relative_path.clone()) {
            entries.push(e);
        } else {
            collector.warnings.push(IngestWarning {
                kit_id: kit_id.clone(),
                warning: format!("duplicate entry {} ignored", e.relative_path),
            });
        }
    }
    entries.sort_by(|a, b| a.relative_path.cmp(&b.relative_path));
    let directory_count = directory_count(&entries);

    Ok(LoadedKit {
        kit: KitArchive {
            kit_id,
            origin_name: name,
            entries,
            directory_count,
        },
        warnings: collector.warnings,
    })
}

/// Reference to a kit inside a corpus directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KitRef {
    pub kit_id: String,
    pub path: std::path::PathBuf,
}

/// Enumerate kits (archives or subdirectories) under `root`, sorted
/// lexicographically by kit_id so ordering never depends on the filesystem.
pub fn enumerate_corpus(root: &Path) -> Result<(Vec<KitRef>, Vec<IngestWarning>), IngestError> {
    let mut refs = Vec::new();
    let mut warnings = Vec::new();
    for dent in fs::read_dir(root)? {
        let dent = dent?;
        let path = dent.path();
        let name = dent.file_name().to_string_lossy().into_owned();
        if path.is_dir() {
            refs.push(KitRef {
                kit_id: name,
                path,
            });
        } else if archive_container_kind(&name).is_some() {
            refs.push(KitRef {
                kit_id: kit_id_for(&name),
                path,
            });
        } else {
            warnings.push(IngestWarning {
                kit_id: name.clone(),
                warning: format!("{name} is not a kit archive, skipped"),
            });
        }
    }
    refs.sort_by(|a, b| a.kit_id.cmp(&b.kit_id));
    Ok((refs, warnings))
}
