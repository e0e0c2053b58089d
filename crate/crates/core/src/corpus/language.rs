use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Language attributed to a whole file.
///
/// `Other` is a recognised source extension outside the core table (it is
/// counted, and backfired with the fallback ratio). `Unknown` is text that
/// matched neither an extension nor a shebang and is excluded from metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LanguageId {
    Assembly,
    C,
    #[serde(rename = "C++")]
    Cpp,
    #[serde(rename = "C#")]
    CSharp,
    Java,
    JavaScript,
    #[serde(rename = "PHP")]
    Php,
    Pascal,
    Python,
    #[serde(rename = "SQL")]
    Sql,
    VisualBasic,
    Shell,
    Batch,
    #[serde(rename = "HTML")]
    Html,
    #[serde(rename = "CSS")]
    Css,
    #[serde(rename = "XML")]
    Xml,
    #[serde(rename = "ASP")]
    Asp,
    Make,
    Other,
    #[serde(rename = "UNKNOWN")]
    Unknown,
}

impl LanguageId {
    pub const ALL: [LanguageId; 20] = [
        LanguageId::Assembly,
        LanguageId::C,
        LanguageId::Cpp,
        LanguageId::CSharp,
        LanguageId::Java,
        LanguageId::JavaScript,
        LanguageId::Php,
        LanguageId::Pascal,
        LanguageId::Python,
        LanguageId::Sql,
        LanguageId::VisualBasic,
        LanguageId::Shell,
        LanguageId::Batch,
        LanguageId::Html,
        LanguageId::Css,
        LanguageId::Xml,
        LanguageId::Asp,
        LanguageId::Make,
        LanguageId::Other,
        LanguageId::Unknown,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LanguageId::Assembly => "Assembly",
            LanguageId::C => "C",
            LanguageId::Cpp => "C++",
            LanguageId::CSharp => "C#",
            LanguageId::Java => "Java",
            LanguageId::JavaScript => "JavaScript",
            LanguageId::Php => "PHP",
            LanguageId::Pascal => "Pascal",
            LanguageId::Python => "Python",
            LanguageId::Sql => "SQL",
            LanguageId::VisualBasic => "VisualBasic",
            LanguageId::Shell => "Shell",
            LanguageId::Batch => "Batch",
            LanguageId::Html => "HTML",
            LanguageId::Css => "CSS",
            LanguageId::Xml => "XML",
            LanguageId::Asp => "ASP",
            LanguageId::Make => "Make",
            LanguageId::Other => "Other",
            LanguageId::Unknown => "UNKNOWN",
        }
    }

    /// C and C++ share one clone-detection family; `.h` headers flip between them.
    pub fn is_c_family(self) -> bool {
        matches!(self, LanguageId::C | LanguageId::Cpp)
    }

    /// Languages whose functions are delimited by braces.
    pub fn is_brace_language(self) -> bool {
        matches!(
            self,
            LanguageId::C
                | LanguageId::Cpp
                | LanguageId::CSharp
                | LanguageId::Java
                | LanguageId::JavaScript
                | LanguageId::Php
        )
    }

    /// Languages the function-level metrics understand.
    pub fn has_function_metrics(self) -> bool {
        self.is_brace_language() || self == LanguageId::Python
    }
}

impl fmt::Display for LanguageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown language name `{0}`")]
pub struct UnknownLanguage(pub String);

impl FromStr for LanguageId {
    type Err = UnknownLanguage;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| !c.is_whitespace() && *c != '_' && *c != '-')
            .collect::<String>()
            .to_ascii_lowercase();
        let lang = match key.as_str() {
            "assembly" | "asm" => LanguageId::Assembly,
            "c" => LanguageId::C,
            "c++" | "cpp" | "cxx" => LanguageId::Cpp,
            "c#" | "csharp" | "cs" => LanguageId::CSharp,
            "java" => LanguageId::Java,
            "javascript" | "js" => LanguageId::JavaScript,
            "php" => LanguageId::Php,
            "pascal" => LanguageId::Pascal,
            "python" | "py" => LanguageId::Python,
            "sql" => LanguageId::Sql,
            "visualbasic" | "vb" => LanguageId::VisualBasic,
            "shell" | "sh" => LanguageId::Shell,
            "batch" | "dosbatch" | "bat" => LanguageId::Batch,
            "html" => LanguageId::Html,
            "css" => LanguageId::Css,
            "xml" => LanguageId::Xml,
            "asp" | "asp.net" => LanguageId::Asp,
            "make" | "makefile" => LanguageId::Make,
            "other" => LanguageId::Other,
            "unknown" => LanguageId::Unknown,
            _ => return Err(UnknownLanguage(s.to_string())),
        };
        Ok(lang)
    }
}

/// Result of looking at a file name in isolation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtensionMatch {
    Known(LanguageId),
    /// `.h`: C unless a sibling in the same directory is C++.
    Header,
    None,
}

// Extensions outside the core table that are still clearly source code.
const OTHER_EXTENSIONS: &[&str] = &[
    "pl", "pm", "rb", "go", "rs", "lua", "tcl", "awk", "ps1", "vbs", "au3", "ahk", "nsi", "m",
    "mm", "d", "f", "f90", "ada", "adb", "ads", "lisp", "el", "hs", "swift", "kt", "scala",
];

pub fn match_extension(path: &Path) -> ExtensionMatch {
    let file_name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
    if file_name == "Makefile" || file_name == "makefile" || file_name == "GNUmakefile" {
        return ExtensionMatch::Known(LanguageId::Make);
    }
    let Some(ext) = path.extension().and_then(|e| e.to_str()) else {
        return ExtensionMatch::None;
    };
    let ext = ext.to_ascii_lowercase();
    let lang = match ext.as_str() {
        "c" => LanguageId::C,
        "cc" | "cpp" | "cxx" | "hpp" | "hh" | "hxx" => LanguageId::Cpp,
        "h" => return ExtensionMatch::Header,
        "asm" | "s" | "inc" => LanguageId::Assembly,
        "py" | "pyw" => LanguageId::Python,
        "js" => LanguageId::JavaScript,
        "php" | "php3" | "php4" | "php5" => LanguageId::Php,
        "pas" | "dpr" | "pp" => LanguageId::Pascal,
        "cs" => LanguageId::CSharp,
        "java" => LanguageId::Java,
        "vb" | "bas" | "frm" | "cls" => LanguageId::VisualBasic,
        "sql" => LanguageId::Sql,
        "sh" | "bash" => LanguageId::Shell,
        "bat" | "cmd" => LanguageId::Batch,
        "html" | "htm" => LanguageId::Html,
        "css" => LanguageId::Css,
        "xml" | "xsl" | "xslt" => LanguageId::Xml,
        "asp" | "aspx" => LanguageId::Asp,
        "mk" | "mak" => LanguageId::Make,
        e if OTHER_EXTENSIONS.contains(&e) => LanguageId::Other,
        _ => return ExtensionMatch::None,
    };
    ExtensionMatch::Known(lang)
}

/// Interpreter named on a `#!` first line.
pub fn match_shebang(first_line: &str) -> Option<LanguageId> {
    let rest = first_line.strip_prefix("#!")?.trim();
    let mut parts = rest.split_whitespace();
    let mut prog = parts.next()?.rsplit('/').next()?;
    if prog == "env" {
        prog = parts.find(|p| !p.starts_with('-'))?;
    }
    let prog = prog.trim_end_matches(|c: char| c.is_ascii_digit() || c == '.');
    match prog {
        "sh" | "bash" | "dash" | "ksh" | "zsh" | "csh" | "tcsh" | "ash" => Some(LanguageId::Shell),
        "python" => Some(LanguageId::Python),
        "php" => Some(LanguageId::Php),
        "node" | "nodejs" => Some(LanguageId::JavaScript),
        "perl" | "ruby" | "lua" | "tclsh" | "awk" => Some(LanguageId::Other),
        _ => None,
    }
}
