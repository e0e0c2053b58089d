//! Corpus ingestion: sample manifests, directory scanning and language attribution.

mod language;
mod manifest;
mod scan;

use std::path::{Path, PathBuf};

pub use language::{match_extension, match_shebang, ExtensionMatch, LanguageId, UnknownLanguage};
pub use manifest::{load_manifest, parse_manifest, Category, SampleManifest, MAX_YEAR, MIN_YEAR};
pub use scan::{
    decode_text, looks_binary, scan, split_lines, ContentDigest, ScanResult, SkipReason,
    SkippedFile, SourceFile,
};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}: not a directory")]
    NotADirectory(PathBuf),
    #[error("manifest field {field}: {message}")]
    Schema { field: String, message: String },
    #[error("duplicate sample id `{0}`")]
    DuplicateId(String),
}

/// One scanned sample.
#[derive(Debug, Clone)]
pub struct Sample {
    pub manifest: SampleManifest,
    pub files: Vec<SourceFile>,
    pub skipped: Vec<SkippedFile>,
}

/// Immutable snapshot of every sample in a manifest.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub samples: Vec<Sample>,
}

impl Corpus {
    pub fn load(manifest_file: &Path) -> Result<Corpus, CorpusError> {
        Self::from_manifests(load_manifest(manifest_file)?)
    }

    /// Scans every sample, keeping manifest order.
    pub fn from_manifests(manifests: Vec<SampleManifest>) -> Result<Corpus, CorpusError> {
        let mut samples = Vec::with_capacity(manifests.len());
        for manifest in manifests {
            let ScanResult { files, skipped } = scan(&manifest.root, &manifest)?;
            samples.push(Sample {
                manifest,
                files,
                skipped,
            });
        }
        Ok(Corpus { samples })
    }

    pub fn sample(&self, id: &str) -> Option<&Sample> {
        self.samples.iter().find(|s| s.manifest.id == id)
    }

    pub fn files(&self) -> impl Iterator<Item = &SourceFile> {
        self.samples.iter().flat_map(|s| s.files.iter())
    }
}
