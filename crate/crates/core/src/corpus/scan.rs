use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use walkdir::WalkDir;

use super::language::{match_extension, match_shebang, ExtensionMatch, LanguageId};
use super::manifest::SampleManifest;
use super::CorpusError;

/// SHA-256 of the raw file bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ContentDigest(pub [u8; 32]);

impl ContentDigest {
    pub fn of(bytes: &[u8]) -> Self {
        ContentDigest(Sha256::digest(bytes).into())
    }

    pub fn to_hex(&self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl Serialize for ContentDigest {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for ContentDigest {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let hex = String::deserialize(d)?;
        if hex.len() != 64 {
            return Err(serde::de::Error::custom("digest must be 64 hex characters"));
        }
        let mut out = [0u8; 32];
        for (i, byte) in out.iter_mut().enumerate() {
            *byte =
                u8::from_str_radix(&hex[2 * i..2 * i + 2], 16).map_err(serde::de::Error::custom)?;
        }
        Ok(ContentDigest(out))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceFile {
    pub sample_id: String,
    /// Relative to the sample root, `/`-separated.
    pub rel_path: PathBuf,
    pub language: LanguageId,
    pub byte_size: u64,
    pub content_digest: ContentDigest,
    #[serde(skip)]
    pub text: Vec<String>,
}

impl SourceFile {
    /// Builds an in-memory file, e.g. for tests and bindings.
    pub fn from_text(
        sample_id: &str,
        rel_path: impl Into<PathBuf>,
        language: LanguageId,
        text: &str,
    ) -> Self {
        SourceFile {
            sample_id: sample_id.to_string(),
            rel_path: rel_path.into(),
            language,
            byte_size: text.len() as u64,
            content_digest: ContentDigest::of(text.as_bytes()),
            text: split_lines(text),
        }
    }

    pub fn joined_text(&self) -> String {
        self.text.join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum SkipReason {
    Binary,
    Unreadable(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedFile {
    pub rel_path: PathBuf,
    pub reason: SkipReason,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScanResult {
    pub files: Vec<SourceFile>,
    pub skipped: Vec<SkippedFile>,
}

pub fn split_lines(text: &str) -> Vec<String> {
    text.lines().map(str::to_string).collect()
}

/// UTF-8 first, Latin-1 otherwise. Never fails.
pub fn decode_text(bytes: &[u8]) -> String {
    match std::str::from_utf8(bytes) {
        Ok(s) => s.strip_prefix('\u{feff}').unwrap_or(s).to_string(),
        Err(_) => bytes.iter().map(|&b| b as char).collect(),
    }
}

pub fn looks_binary(bytes: &[u8]) -> bool {
    bytes.iter().take(8192).any(|&b| b == 0)
}

fn is_hidden(entry: &walkdir::DirEntry) -> bool {
    entry.depth() > 0
        && entry
            .file_name()
            .to_str()
            .is_some_and(|n| n.starts_with('.'))
}

fn rel_path_of(root: &Path, path: &Path) -> PathBuf {
    let rel = path.strip_prefix(root).unwrap_or(path);
    let parts: Vec<_> = rel
        .components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect();
    PathBuf::from(parts.join("/"))
}

enum Loaded {
    File(SourceFile, bool),
    Skipped(SkippedFile),
}

fn load_one(root: &Path, path: &Path, sample_id: &str) -> Loaded {
    let rel_path = rel_path_of(root, path);
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) => {
            return Loaded::Skipped(SkippedFile {
                rel_path,
                reason: SkipReason::Unreadable(e.to_string()),
            })
        }
    };
    if looks_binary(&bytes) {
        return Loaded::Skipped(SkippedFile {
            rel_path,
            reason: SkipReason::Binary,
        });
    }
    let text = decode_text(&bytes);
    let lines = split_lines(&text);
    let (language, is_header) = match match_extension(&rel_path) {
        ExtensionMatch::Known(lang) => (lang, false),
        ExtensionMatch::Header => (LanguageId::C, true),
        ExtensionMatch::None => (
            lines
                .first()
                .and_then(|l| match_shebang(l))
                .unwrap_or(LanguageId::Unknown),
            false,
        ),
    };
    Loaded::File(
        SourceFile {
            sample_id: sample_id.to_string(),
            rel_path,
            language,
            byte_size: bytes.len() as u64,
            content_digest: ContentDigest::of(&bytes),
            text: lines,
        },
        is_header,
    )
}

/// Walks `root` and returns every text file with its attributed language.
///
/// Symlinks are not followed and hidden directories are skipped. Binary and
/// unreadable files end up in [`ScanResult::skipped`].
pub fn scan(root: &Path, manifest: &SampleManifest) -> Result<ScanResult, CorpusError> {
    let meta = std::fs::metadata(root).map_err(|source| CorpusError::Io {
        path: root.to_path_buf(),
        source,
    })?;
    if !meta.is_dir() {
        return Err(CorpusError::NotADirectory(root.to_path_buf()));
    }

    let mut paths = Vec::new();
    let mut skipped = Vec::new();
    for entry in WalkDir::new(root)
        .follow_links(false)
        .into_iter()
        .filter_entry(|e| !is_hidden(e) || e.file_type().is_file())
    {
        match entry {
            Ok(e) if e.file_type().is_file() => paths.push(e.into_path()),
            Ok(_) => {}
            Err(e) if e.depth() == 0 => {
                return Err(CorpusError::Io {
                    path: root.to_path_buf(),
                    source: e
                        .into_io_error()
                        .unwrap_or_else(|| std::io::Error::other("walk failed")),
                })
            }
            Err(e) => skipped.push(SkippedFile {
                rel_path: e.path().map(|p| rel_path_of(root, p)).unwrap_or_default(),
                reason: SkipReason::Unreadable(e.to_string()),
            }),
        }
    }

    let loaded: Vec<Loaded> = paths
        .par_iter()
        .map(|p| load_one(root, p, &manifest.id))
        .collect();

    let mut files = Vec::with_capacity(loaded.len());
    let mut headers = Vec::new();
    for item in loaded {
        match item {
            Loaded::File(f, is_header) => {
                if is_header {
                    headers.push(files.len());
                }
                files.push(f);
            }
            Loaded::Skipped(s) => skipped.push(s),
        }
    }

    // `.h` files become C++ when a sibling in the same directory is C++.
    let cpp_dirs: HashSet<PathBuf> = files
        .iter()
        .filter(|f| f.language == LanguageId::Cpp)
        .map(|f| {
            f.rel_path
                .parent()
                .map(Path::to_path_buf)
                .unwrap_or_default()
        })
        .collect();
    for idx in headers {
        let dir = files[idx]
            .rel_path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default();
        if cpp_dirs.contains(&dir) {
            files[idx].language = LanguageId::Cpp;
        }
    }

    files.sort_by(|a, b| a.rel_path.cmp(&b.rel_path));
    skipped.sort_by(|a, b| a.rel_path.cmp(&b.rel_path));
    Ok(ScanResult { files, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Category;
    use std::fs;

    fn manifest(root: &Path) -> SampleManifest {
        SampleManifest {
            id: "s".into(),
            name: "S".into(),
            year: 2000,
            category: Category::V,
            root: root.to_path_buf(),
            notes: String::new(),
        }
    }

    #[test]
    fn empty_directory() {
        let dir = tempfile::tempdir().unwrap();
        let r = scan(dir.path(), &manifest(dir.path())).unwrap();
        assert!(r.files.is_empty());
        assert!(r.skipped.is_empty());
    }

    #[test]
    fn mixed_directory() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a.c"), "int main(void) { return 0; }\n").unwrap();
        fs::write(dir.path().join("b.py"), "print('x')\n").unwrap();
        fs::write(
            dir.path().join("c.bin"),
            [0x7fu8, b'E', b'L', b'F', 0, 0, 1],
        )
        .unwrap();
        let r = scan(dir.path(), &manifest(dir.path())).unwrap();
        let langs: Vec<_> = r
            .files
            .iter()
            .map(|f| (f.rel_path.clone(), f.language))
            .collect();
        assert_eq!(
            langs,
            vec![
                (PathBuf::from("a.c"), LanguageId::C),
                (PathBuf::from("b.py"), LanguageId::Python)
            ]
        );
        assert_eq!(r.skipped.len(), 1);
        assert_eq!(r.skipped[0].rel_path, PathBuf::from("c.bin"));
        assert_eq!(r.skipped[0].reason, SkipReason::Binary);
    }

    #[test]
    fn shebang_attribution() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("run"), "#!/bin/sh\necho hi\n").unwrap();
        fs::write(dir.path().join("notes"), "plain words\n").unwrap();
        let r = scan(dir.path(), &manifest(dir.path())).unwrap();
        assert_eq!(r.files[0].rel_path, PathBuf::from("notes"));
        assert_eq!(r.files[0].language, LanguageId::Unknown);
        assert_eq!(r.files[1].language, LanguageId::Shell);
    }

    #[test]
    fn header_follows_siblings() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir_all(dir.path().join("cpp")).unwrap();
        fs::create_dir_all(dir.path().join("c")).unwrap();
        fs::write(dir.path().join("cpp/x.h"), "class X;\n").unwrap();
        fs::write(dir.path().join("cpp/x.cpp"), "X x;\n").unwrap();
        fs::write(dir.path().join("c/y.h"), "int y;\n").unwrap();
        let r = scan(dir.path(), &manifest(dir.path())).unwrap();
        let find = |p: &str| {
            r.files
                .iter()
                .find(|f| f.rel_path == Path::new(p))
                .unwrap()
                .language
        };
        assert_eq!(find("cpp/x.h"), LanguageId::Cpp);
        assert_eq!(find("c/y.h"), LanguageId::C);
    }

    #[test]
    fn hidden_dirs_and_latin1() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir_all(dir.path().join(".git")).unwrap();
        fs::write(dir.path().join(".git/config.c"), "int a;\n").unwrap();
        fs::write(dir.path().join("l.c"), b"char *s = \"caf\xe9\";\n").unwrap();
        let r = scan(dir.path(), &manifest(dir.path())).unwrap();
        assert_eq!(r.files.len(), 1);
        assert_eq!(r.files[0].text[0], "char *s = \"café\";");
    }

    #[test]
    fn missing_root_is_fatal() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("nope");
        assert!(scan(&missing, &manifest(&missing)).is_err());
    }

    #[test]
    fn distinct_contents_distinct_digests() {
        let a = ContentDigest::of(b"a");
        let b = ContentDigest::of(b"b");
        assert_ne!(a, b);
        assert_eq!(a.to_hex().len(), 64);
        let back: ContentDigest =
            serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
        assert_eq!(back, a);
    }
}
