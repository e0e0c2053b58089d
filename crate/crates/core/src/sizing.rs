//! Backfiring: SLOC to unadjusted function points via per-language SLOC/FP ratios.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::LanguageId;
use crate::linecount::LineTally;

#[derive(Debug, thiserror::Error)]
pub enum SizingError {
    #[error("no SLOC/FP ratio for {0} and no fallback configured")]
    MissingRatio(LanguageId),
    #[error("ratio for {language} must be positive, got {ratio}")]
    NonPositiveRatio { language: String, ratio: f64 },
    #[error("backfire table: {0}")]
    Parse(String),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// SLOC per function point, per language.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackfireTable {
    pub ratios: BTreeMap<LanguageId, f64>,
    /// Used for languages absent from `ratios`; `None` makes them an error.
    pub fallback: Option<f64>,
}

pub const C_RATIO: f64 = 97.0;

impl Default for BackfireTable {
    fn default() -> Self {
        use LanguageId::*;
        let ratios = [
            (Asp, 69.0),
            (Assembly, 119.0),
            (Shell, 128.0),
            (Batch, 128.0),
            (C, C_RATIO),
            (CSharp, 54.0),
            (Cpp, 50.0),
            (Html, 34.0),
            (Css, 34.0),
            (Xml, 34.0),
            (Java, 53.0),
            (JavaScript, 47.0),
            (Php, 67.0),
            (Pascal, 90.0),
            (Python, 24.0),
            (Sql, 21.0),
            (VisualBasic, 42.0),
            (Make, 21.0),
        ]
        .into_iter()
        .collect();
        BackfireTable {
            ratios,
            fallback: Some(C_RATIO),
        }
    }
}

impl BackfireTable {
    /// Overrides default entries from a JSON object `{"<language>": ratio}`.
    pub fn from_json(text: &str) -> Result<Self, SizingError> {
        let raw: BTreeMap<String, f64> =
            serde_json::from_str(text).map_err(|e| SizingError::Parse(e.to_string()))?;
        let mut table = BackfireTable::default();
        for (name, ratio) in raw {
            if !(ratio > 0.0 && ratio.is_finite()) {
                return Err(SizingError::NonPositiveRatio {
                    language: name,
                    ratio,
                });
            }
            let lang: LanguageId = name
                .parse()
                .map_err(|e: crate::corpus::UnknownLanguage| SizingError::Parse(e.to_string()))?;
            table.ratios.insert(lang, ratio);
        }
        Ok(table)
    }

    pub fn from_file(path: &Path) -> Result<Self, SizingError> {
        let text = std::fs::read_to_string(path).map_err(|source| SizingError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Returns the ratio and whether the fallback was used.
    pub fn ratio(&self, lang: LanguageId) -> Result<(f64, bool), SizingError> {
        match self.ratios.get(&lang) {
            Some(&r) => Ok((r, false)),
            None => self
                .fallback
                .map(|r| (r, true))
                .ok_or(SizingError::MissingRatio(lang)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionPoints {
    pub total: f64,
    pub per_language: BTreeMap<LanguageId, f64>,
    /// Languages that were backfired with the fallback ratio.
    pub fallback_languages: Vec<LanguageId>,
}

/// Sum over languages of `sloc / ratio`. Languages with zero SLOC are ignored.
pub fn function_points(
    per_language: &BTreeMap<LanguageId, LineTally>,
    table: &BackfireTable,
) -> Result<FunctionPoints, SizingError> {
    let mut out = FunctionPoints {
        total: 0.0,
        per_language: BTreeMap::new(),
        fallback_languages: Vec::new(),
    };
    for (&lang, tally) in per_language {
        if tally.sloc == 0 {
            continue;
        }
        let (ratio, fell_back) = table.ratio(lang)?;
        if fell_back {
            out.fallback_languages.push(lang);
        }
        let fp = tally.sloc as f64 / ratio;
        out.per_language.insert(lang, fp);
        out.total += fp;
    }
    Ok(out)
}
