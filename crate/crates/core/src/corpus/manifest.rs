use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::CorpusError;

pub const MIN_YEAR: i32 = 1970;
pub const MAX_YEAR: i32 = 2100;

/// Sample category: Virus, Worm, Macro virus, Trojan, Botnet, RAT, Exploit kit, Rootkit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    V,
    W,
    M,
    T,
    B,
    R,
    E,
    K,
    #[serde(rename = "UNKNOWN")]
    Unknown,
}

impl Category {
    pub fn code(self) -> &'static str {
        match self {
            Category::V => "V",
            Category::W => "W",
            Category::M => "M",
            Category::T => "T",
            Category::B => "B",
            Category::R => "R",
            Category::E => "E",
            Category::K => "K",
            Category::Unknown => "UNKNOWN",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "V" => Category::V,
            "W" => Category::W,
            "M" => Category::M,
            "T" => Category::T,
            "B" => Category::B,
            "R" => Category::R,
            "E" => Category::E,
            "K" => Category::K,
            "UNKNOWN" => Category::Unknown,
            other => return Err(format!("unknown category `{other}`")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleManifest {
    pub id: String,
    pub name: String,
    pub year: i32,
    pub category: Category,
    /// Resolved against the manifest file's directory when loaded from disk.
    pub root: PathBuf,
    #[serde(default)]
    pub notes: String,
}

/// Parses and validates a manifest file. Relative `root` paths are resolved
/// against the directory containing `file`.
pub fn load_manifest(file: &Path) -> Result<Vec<SampleManifest>, CorpusError> {
    let text = std::fs::read_to_string(file).map_err(|source| CorpusError::Io {
        path: file.to_path_buf(),
        source,
    })?;
    let base = file.parent().unwrap_or_else(|| Path::new("."));
    parse_manifest(&text, base)
}

pub fn parse_manifest(text: &str, base: &Path) -> Result<Vec<SampleManifest>, CorpusError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| CorpusError::Schema {
        field: "$".into(),
        message: e.to_string(),
    })?;
    let Value::Array(entries) = doc else {
        return Err(schema("$", "expected a JSON array of sample objects"));
    };

    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(entries.len());
    for (i, entry) in entries.iter().enumerate() {
        let manifest = parse_entry(i, entry, base)?;
        if !seen.insert(manifest.id.clone()) {
            return Err(CorpusError::DuplicateId(manifest.id));
        }
        out.push(manifest);
    }
    Ok(out)
}

fn schema(field: impl Into<String>, message: impl Into<String>) -> CorpusError {
    CorpusError::Schema {
        field: field.into(),
        message: message.into(),
    }
}

fn parse_entry(i: usize, entry: &Value, base: &Path) -> Result<SampleManifest, CorpusError> {
    let Value::Object(obj) = entry else {
        return Err(schema(format!("[{i}]"), "expected an object"));
    };
    let string_field = |key: &str, required: bool| -> Result<String, CorpusError> {
        match obj.get(key) {
            Some(Value::String(s)) => Ok(s.clone()),
            None | Some(Value::Null) if !required => Ok(String::new()),
            None => Err(schema(format!("[{i}].{key}"), "missing required field")),
            Some(_) => Err(schema(format!("[{i}].{key}"), "expected a string")),
        }
    };

    let id = string_field("id", true)?;
    if id.is_empty() {
        return Err(schema(format!("[{i}].id"), "must not be empty"));
    }
    let name = string_field("name", true)?;
    let year = match obj.get("year") {
        Some(Value::Number(n)) => n
            .as_i64()
            .ok_or_else(|| schema(format!("[{i}].year"), "expected an integer"))?,
        None => return Err(schema(format!("[{i}].year"), "missing required field")),
        Some(_) => return Err(schema(format!("[{i}].year"), "expected an integer")),
    };
    if !(MIN_YEAR as i64..=MAX_YEAR as i64).contains(&year) {
        return Err(schema(
            format!("[{i}].year"),
            format!("{year} outside {MIN_YEAR}..={MAX_YEAR}"),
        ));
    }
    let category: Category = string_field("category", true)?
        .parse()
        .map_err(|m: String| schema(format!("[{i}].category"), m))?;
    let root = string_field("root", true)?;
    if root.is_empty() {
        return Err(schema(format!("[{i}].root"), "must not be empty"));
    }
    let notes = string_field("notes", false)?;

    for key in obj.keys() {
        if !matches!(
            key.as_str(),
            "id" | "name" | "year" | "category" | "root" | "notes"
        ) {
            return Err(schema(format!("[{i}].{key}"), "unexpected field"));
        }
    }

    Ok(SampleManifest {
        id,
        name,
        year: year as i32,
        category,
        root: base.join(root),
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Vec<SampleManifest>, CorpusError> {
        parse_manifest(text, Path::new("/data"))
    }

    #[test]
    fn accepts_valid_record() {
        let m = parse(
            r#"[{"id":"zeus","name":"Zeus","year":2007,"category":"B","root":"zeus","notes":""}]"#,
        )
        .unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].category, Category::B);
        assert_eq!(m[0].year, 2007);
        assert_eq!(m[0].root, Path::new("/data/zeus"));
    }

    #[test]
    fn notes_are_optional() {
        let m = parse(r#"[{"id":"a","name":"A","year":1999,"category":"UNKNOWN","root":"a"}]"#)
            .unwrap();
        assert_eq!(m[0].notes, "");
        assert_eq!(m[0].category, Category::Unknown);
    }

    #[test]
    fn bad_category_names_field() {
        let err =
            parse(r#"[{"id":"a","name":"A","year":2000,"category":"X","root":"a"}]"#).unwrap_err();
        match err {
            CorpusError::Schema { field, .. } => assert_eq!(field, "[0].category"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_id_rejected() {
        let err = parse(
            r#"[{"id":"zeus","name":"A","year":2000,"category":"B","root":"a"},
                {"id":"zeus","name":"B","year":2001,"category":"B","root":"b"}]"#,
        )
        .unwrap_err();
        assert!(matches!(err, CorpusError::DuplicateId(id) if id == "zeus"));
    }

    #[test]
    fn year_out_of_range() {
        let err =
            parse(r#"[{"id":"a","name":"A","year":1969,"category":"V","root":"a"}]"#).unwrap_err();
        assert!(
            matches!(err, CorpusError::Schema { ref field, .. } if field == "[0].year"),
            "{err}"
        );
        let err = parse(r#"[{"id":"a","name":"A","year":"2000","category":"V","root":"a"}]"#)
            .unwrap_err();
        assert!(matches!(err, CorpusError::Schema { ref field, .. } if field == "[0].year"));
    }

    #[test]
    fn missing_and_unexpected_fields() {
        let err = parse(r#"[{"id":"a","year":2000,"category":"V","root":"a"}]"#).unwrap_err();
        assert!(matches!(err, CorpusError::Schema { ref field, .. } if field == "[0].name"));
        let err =
            parse(r#"[{"id":"a","name":"A","year":2000,"category":"V","root":"a","extra":1}]"#)
                .unwrap_err();
        assert!(matches!(err, CorpusError::Schema { ref field, .. } if field == "[0].extra"));
        let err = parse(r#"{"id":"a"}"#).unwrap_err();
        assert!(matches!(err, CorpusError::Schema { ref field, .. } if field == "$"));
    }
}
