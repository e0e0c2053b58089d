//! Physical line classification: code, comment, or blank.
//!
//! A line holding both code and a comment counts as code. Comment markers
//! inside string literals are ignored; string state resets at each line end,
//! while block-comment state carries across lines.

use std::collections::BTreeMap;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::corpus::{LanguageId, SourceFile};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineTally {
    pub sloc: u64,
    pub comment_lines: u64,
    pub blank_lines: u64,
    pub total_lines: u64,
}

impl LineTally {
    pub fn is_consistent(&self) -> bool {
        self.sloc + self.comment_lines + self.blank_lines == self.total_lines
    }
}

impl Add for LineTally {
    type Output = LineTally;
    fn add(self, o: LineTally) -> LineTally {
        LineTally {
            sloc: self.sloc + o.sloc,
            comment_lines: self.comment_lines + o.comment_lines,
            blank_lines: self.blank_lines + o.blank_lines,
            total_lines: self.total_lines + o.total_lines,
        }
    }
}

impl AddAssign for LineTally {
    fn add_assign(&mut self, o: LineTally) {
        *self = *self + o;
    }
}

impl std::iter::Sum for LineTally {
    fn sum<I: Iterator<Item = LineTally>>(iter: I) -> LineTally {
        iter.fold(LineTally::default(), Add::add)
    }
}

/// Comment and string conventions of one language.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LanguageSyntax {
    /// Markers that comment out the rest of the line wherever they appear.
    pub line_comment_markers: Vec<&'static str>,
    /// Markers only recognised as the first word of a line, case-insensitively (`REM`).
    pub leading_comment_markers: Vec<&'static str>,
    pub block_comment_pairs: Vec<(&'static str, &'static str)>,
    pub string_delimiters: Vec<char>,
    /// Backslash escapes the next character inside a string.
    pub backslash_escapes: bool,
}

impl LanguageSyntax {
    fn new(
        line: &[&'static str],
        block: &[(&'static str, &'static str)],
        strings: &[char],
        backslash_escapes: bool,
    ) -> Self {
        debug_assert!(block.iter().all(|(o, c)| !o.is_empty() && !c.is_empty()));
        LanguageSyntax {
            line_comment_markers: line.to_vec(),
            leading_comment_markers: Vec::new(),
            block_comment_pairs: block.to_vec(),
            string_delimiters: strings.to_vec(),
            backslash_escapes,
        }
    }

    /// Counting conventions per language; `None` for `Unknown`.
    pub fn for_language(lang: LanguageId) -> Option<LanguageSyntax> {
        use LanguageId::*;
        const C_BLOCK: &[(&str, &str)] = &[("/*", "*/")];
        let syntax = match lang {
            C | Cpp | CSharp | Java | JavaScript => {
                LanguageSyntax::new(&["//"], C_BLOCK, &['"', '\''], true)
            }
            Php => LanguageSyntax::new(&["//", "#"], C_BLOCK, &['"', '\''], true),
            Assembly => LanguageSyntax::new(&[";"], &[], &['"', '\''], false),
            Python | Shell | Make => LanguageSyntax::new(&["#"], &[], &['"', '\''], true),
            Pascal => LanguageSyntax::new(&["//"], &[("{", "}"), ("(*", "*)")], &['\''], false),
            VisualBasic => LanguageSyntax::new(&["'"], &[], &['"'], false),
            Html | Xml | Asp => LanguageSyntax::new(&[], &[("<!--", "-->")], &[], false),
            Css => LanguageSyntax::new(&[], C_BLOCK, &['"', '\''], true),
            Sql => LanguageSyntax::new(&["--"], C_BLOCK, &['\''], false),
            Batch => LanguageSyntax {
                leading_comment_markers: vec!["rem", "::"],
                ..LanguageSyntax::new(&[], &[], &['"'], false)
            },
            Other => LanguageSyntax::new(&[], &[], &[], false),
            Unknown => return None,
        };
        Some(syntax)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TallyWarning {
    /// A block comment was still open at end of file; the remaining lines count as comment.
    UnterminatedBlockComment { opened_at_line: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TallyOutcome {
    pub tally: LineTally,
    pub warnings: Vec<TallyWarning>,
}

fn starts_with_leading_marker(trimmed: &str, marker: &str) -> bool {
    let Some(head) = trimmed.get(..marker.len()) else {
        return false;
    };
    if !head.eq_ignore_ascii_case(marker) {
        return false;
    }
    // Alphabetic markers must end at a word boundary (`REM x`, not `REMOVE`).
    if marker.chars().all(|c| c.is_ascii_alphabetic()) {
        trimmed[marker.len()..]
            .chars()
            .next()
            .is_none_or(|c| !c.is_alphanumeric())
    } else {
        true
    }
}

/// Classifies each physical line of `lines`.
pub fn tally_lines<S: AsRef<str>>(lines: &[S], syntax: &LanguageSyntax) -> TallyOutcome {
    let mut tally = LineTally::default();
    // Index into block_comment_pairs of the open block comment.
    let mut open_block: Option<(usize, usize)> = None;

    for (lineno, line) in lines.iter().enumerate() {
        let line = line.as_ref();
        tally.total_lines += 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            tally.blank_lines += 1;
            continue;
        }
        if open_block.is_none()
            && syntax
                .leading_comment_markers
                .iter()
                .any(|m| starts_with_leading_marker(trimmed, m))
        {
            tally.comment_lines += 1;
            continue;
        }

        let mut has_code = false;
        let mut has_comment = open_block.is_some();
        let mut in_string: Option<char> = None;
        let mut rest = line;
        'scan: while let Some(c) = rest.chars().next() {
            if let Some((pair, _)) = open_block {
                let close = syntax.block_comment_pairs[pair].1;
                if rest.starts_with(close) {
                    rest = &rest[close.len()..];
                    open_block = None;
                } else {
                    rest = &rest[c.len_utf8()..];
                }
                continue;
            }
            if let Some(delim) = in_string {
                rest = &rest[c.len_utf8()..];
                if syntax.backslash_escapes && c == '\\' {
                    if let Some(next) = rest.chars().next() {
                        rest = &rest[next.len_utf8()..];
                    }
                } else if c == delim {
                    in_string = None;
                }
                continue;
            }
            if c.is_whitespace() {
                rest = &rest[c.len_utf8()..];
                continue;
            }
            for (i, (open, _)) in syntax.block_comment_pairs.iter().enumerate() {
                if rest.starts_with(open) {
                    has_comment = true;
                    open_block = Some((i, lineno + 1));
                    rest = &rest[open.len()..];
                    continue 'scan;
                }
            }
            if syntax
                .line_comment_markers
                .iter()
                .any(|m| rest.starts_with(m))
            {
                has_comment = true;
                break;
            }
            has_code = true;
            if syntax.string_delimiters.contains(&c) {
                in_string = Some(c);
            }
            rest = &rest[c.len_utf8()..];
        }

        if has_code {
            tally.sloc += 1;
        } else if has_comment {
            tally.comment_lines += 1;
        } else {
            tally.blank_lines += 1;
        }
    }

    let warnings = match open_block {
        Some((_, opened_at_line)) => {
            vec![TallyWarning::UnterminatedBlockComment { opened_at_line }]
        }
        None => Vec::new(),
    };
    TallyOutcome { tally, warnings }
}

pub fn tally_file(file: &SourceFile, syntax: &LanguageSyntax) -> TallyOutcome {
    tally_lines(&file.text, syntax)
}

/// Per-language sums plus the overall total.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Aggregate {
    pub per_language: BTreeMap<LanguageId, LineTally>,
    pub total: LineTally,
}

pub fn aggregate<I>(tallies: I) -> Aggregate
where
    I: IntoIterator<Item = (LanguageId, LineTally)>,
{
    let mut out = Aggregate::default();
    for (lang, t) in tallies {
        *out.per_language.entry(lang).or_default() += t;
        out.total += t;
    }
    out
}

/// Comment lines per SLOC; `None` when there is no code.
pub fn comment_ratio(tally: &LineTally) -> Option<f64> {
    (tally.sloc > 0).then(|| tally.comment_lines as f64 / tally.sloc as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c() -> LanguageSyntax {
        LanguageSyntax::for_language(LanguageId::C).unwrap()
    }

    fn t(sloc: u64, comment: u64, blank: u64) -> LineTally {
        LineTally {
            sloc,
            comment_lines: comment,
            blank_lines: blank,
            total_lines: sloc + comment + blank,
        }
    }

    #[test]
    fn all_blank() {
        let out = tally_lines(&["", "", ""], &c());
        assert_eq!(out.tally, t(0, 0, 3));
    }

    #[test]
    fn code_dominates_mixed_lines() {
        let out = tally_lines(&["int x;", "// note", "", "x++; /* tail */"], &c());
        assert_eq!(out.tally, t(2, 1, 1));
        assert!(out.warnings.is_empty());
    }

    #[test]
    fn block_comment_spanning_five_lines() {
        let out = tally_lines(&["/* one", " * two", " * three", " * four", " */"], &c());
        assert_eq!(out.tally, t(0, 5, 0));
    }

    #[test]
    fn code_after_block_close_is_code() {
        let out = tally_lines(&["/* a", "b */ int y;"], &c());
        assert_eq!(out.tally, t(1, 1, 0));
    }

    #[test]
    fn markers_inside_strings() {
        let out = tally_lines(
            &[
                r#"char *u = "http://x/*y";"#,
                r#"s = "\"//";"#,
                "int z; // ok",
            ],
            &c(),
        );
        assert_eq!(out.tally, t(3, 0, 0));
        assert!(out.warnings.is_empty());
    }

    #[test]
    fn unterminated_block_warns() {
        let out = tally_lines(&["int a;", "/* open", "still", ""], &c());
        assert_eq!(out.tally, t(1, 2, 1));
        assert_eq!(
            out.warnings,
            vec![TallyWarning::UnterminatedBlockComment { opened_at_line: 2 }]
        );
    }

    #[test]
    fn per_language_markers() {
        let asm = LanguageSyntax::for_language(LanguageId::Assembly).unwrap();
        assert_eq!(
            tally_lines(&["; hdr", "mov eax, 1 ; set", "db ';'"], &asm).tally,
            t(2, 1, 0)
        );

        let py = LanguageSyntax::for_language(LanguageId::Python).unwrap();
        assert_eq!(
            tally_lines(&["#!/usr/bin/env python", "x = '#'", "  # c"], &py).tally,
            t(1, 2, 0)
        );

        let pas = LanguageSyntax::for_language(LanguageId::Pascal).unwrap();
        assert_eq!(
            tally_lines(&["{ hdr }", "(* a", "b *)", "x := 'it''s';"], &pas).tally,
            t(1, 3, 0)
        );

        let vb = LanguageSyntax::for_language(LanguageId::VisualBasic).unwrap();
        assert_eq!(tally_lines(&["' c", "x = \"it's\""], &vb).tally, t(1, 1, 0));

        let bat = LanguageSyntax::for_language(LanguageId::Batch).unwrap();
        assert_eq!(
            tally_lines(&["REM c", "rem", ":: c", "remove x", "echo rem"], &bat).tally,
            t(2, 3, 0)
        );

        let sql = LanguageSyntax::for_language(LanguageId::Sql).unwrap();
        assert_eq!(
            tally_lines(&["-- c", "SELECT '--' FROM t; /* x */"], &sql).tally,
            t(1, 1, 0)
        );

        let html = LanguageSyntax::for_language(LanguageId::Html).unwrap();
        assert_eq!(
            tally_lines(&["<!-- a", "b -->", "<p>it's</p>"], &html).tally,
            t(1, 2, 0)
        );

        assert!(LanguageSyntax::for_language(LanguageId::Unknown).is_none());
    }

    #[test]
    fn aggregate_sums() {
        let empty = aggregate(Vec::new());
        assert!(empty.per_language.is_empty());
        assert_eq!(empty.total, LineTally::default());

        let same = aggregate([(LanguageId::C, t(100, 0, 0)), (LanguageId::C, t(50, 0, 0))]);
        assert_eq!(same.per_language[&LanguageId::C].sloc, 150);

        let two = aggregate([
            (LanguageId::C, t(100, 0, 0)),
            (LanguageId::Python, t(24, 0, 0)),
        ]);
        assert_eq!(two.total.sloc, 124);
        assert_eq!(two.per_language.len(), 2);
    }

    #[test]
    fn ratios() {
        assert_eq!(comment_ratio(&t(100, 10, 0)), Some(0.10));
        assert_eq!(comment_ratio(&t(50, 0, 0)), Some(0.0));
        assert!((comment_ratio(&t(100, 139, 0)).unwrap() - 1.39).abs() < 1e-12);
        assert_eq!(comment_ratio(&t(0, 5, 1)), None);
    }

    fn c_line() -> impl Strategy<Value = String> {
        prop_oneof![
            Just(String::new()),
            Just("   ".to_string()),
            Just("int x = 1;".to_string()),
            Just("// c".to_string()),
            Just("/* a".to_string()),
            Just("b */".to_string()),
            Just("s = \"/*\";".to_string()),
            Just("x++; /* t */".to_string()),
            "[ -~]{0,20}",
        ]
    }

    proptest! {
        #[test]
        fn partition_holds(lines in proptest::collection::vec(c_line(), 0..40)) {
            let out = tally_lines(&lines, &c());
            prop_assert!(out.tally.is_consistent());
            prop_assert_eq!(out.tally.total_lines, lines.len() as u64);
        }

        #[test]
        fn trailing_blank_only_bumps_blank(lines in proptest::collection::vec(c_line(), 0..40)) {
            let before = tally_lines(&lines, &c()).tally;
            let mut more = lines.clone();
            more.push(String::new());
            let after = tally_lines(&more, &c()).tally;
            prop_assert_eq!(after.blank_lines, before.blank_lines + 1);
            prop_assert_eq!(after.total_lines, before.total_lines + 1);
            prop_assert_eq!(after.sloc, before.sloc);
            prop_assert_eq!(after.comment_lines, before.comment_lines);
        }
    }
}
