use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{LanguageId, SourceFile};
use crate::lexer::{tokenize, Token, TokenKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionSpan {
    pub file: PathBuf,
    pub name: String,
    pub start_line: usize,
    pub end_line: usize,
    pub language: LanguageId,
    pub tokens: Vec<Token>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SegmentWarning {
    /// Braces did not balance; the whole file was treated as one span.
    UnbalancedBraces {
        line: usize,
    },
    UnsupportedLanguage(LanguageId),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Segmentation {
    pub spans: Vec<FunctionSpan>,
    pub warnings: Vec<SegmentWarning>,
}

/// Splits a file into maximal, non-overlapping function spans.
pub fn segment_functions(file: &SourceFile) -> Segmentation {
    let tokens: Vec<Token> = tokenize(&file.joined_text(), file.language)
        .into_iter()
        .filter(|t| t.kind != TokenKind::Preproc)
        .collect();
    segment_tokens(&file.rel_path, file.language, tokens, &file.text)
}

pub(crate) fn segment_tokens(
    path: &Path,
    lang: LanguageId,
    tokens: Vec<Token>,
    lines: &[String],
) -> Segmentation {
    if lang == LanguageId::Python {
        return segment_python(path, tokens, lines);
    }
    if !lang.is_brace_language() {
        return Segmentation {
            spans: Vec::new(),
            warnings: vec![SegmentWarning::UnsupportedLanguage(lang)],
        };
    }
    let Some(matching) = match_braces(&tokens) else {
        let line = unbalanced_line(&tokens);
        let spans = if tokens.is_empty() {
            Vec::new()
        } else {
            vec![FunctionSpan {
                file: path.to_path_buf(),
                name: path
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_default(),
                start_line: tokens[0].line,
                end_line: tokens[tokens.len() - 1].line,
                language: lang,
                tokens,
            }]
        };
        return Segmentation {
            spans,
            warnings: vec![SegmentWarning::UnbalancedBraces { line }],
        };
    };
    let mut seg = BraceSegmenter {
        path,
        lang,
        tokens: &tokens,
        matching: &matching,
        spans: Vec::new(),
    };
    seg.container(0, tokens.len());
    Segmentation {
        spans: seg.spans,
        warnings: Vec::new(),
    }
}

fn match_braces(tokens: &[Token]) -> Option<Vec<usize>> {
    let mut matching = vec![usize::MAX; tokens.len()];
    let mut stack = Vec::new();
    for (i, t) in tokens.iter().enumerate() {
        if t.is("{") {
            stack.push(i);
        } else if t.is("}") {
            let open = stack.pop()?;
            matching[open] = i;
            matching[i] = open;
        }
    }
    stack.is_empty().then_some(matching)
}

fn unbalanced_line(tokens: &[Token]) -> usize {
    let mut stack = Vec::new();
    for t in tokens {
        if t.is("{") {
            stack.push(t.line);
        } else if t.is("}") && stack.pop().is_none() {
            return t.line;
        }
    }
    stack.first().copied().unwrap_or(0)
}

const CONTAINER_KEYWORDS: &[&str] = &["class", "struct", "namespace", "interface", "union"];

struct BraceSegmenter<'a> {
    path: &'a Path,
    lang: LanguageId,
    tokens: &'a [Token],
    matching: &'a [usize],
    spans: Vec<FunctionSpan>,
}

impl BraceSegmenter<'_> {
    fn container(&mut self, from: usize, to: usize) {
        let mut stmt_start = from;
        let mut i = from;
        while i < to {
            let t = &self.tokens[i];
            let access_label = t.is(":")
                && i > stmt_start
                && matches!(
                    self.tokens[i - 1].text.as_str(),
                    "public" | "private" | "protected"
                );
            if t.is(";") || access_label {
                stmt_start = i + 1;
                i += 1;
                continue;
            }
            if !t.is("{") {
                i += 1;
                continue;
            }
            let close = self.matching[i];
            let header = &self.tokens[stmt_start..i];
            if let Some(name) = function_header(header, self.lang) {
                self.emit(name, stmt_start, close);
            } else if let Some((start, name)) = self.knr_header(from, stmt_start, i) {
                self.emit(name, start, close);
            } else if is_container_header(header) {
                self.container(i + 1, close);
            }
            i = close + 1;
            stmt_start = i;
        }
    }

    fn emit(&mut self, name: String, start: usize, close: usize) {
        self.spans.push(FunctionSpan {
            file: self.path.to_path_buf(),
            name,
            start_line: self.tokens[start].line,
            end_line: self.tokens[close].line,
            language: self.lang,
            tokens: self.tokens[start..=close].to_vec(),
        });
    }

    /// Old-style C definition: `int f(a, b) int a; char *b; {`.
    fn knr_header(&self, from: usize, stmt_start: usize, brace: usize) -> Option<(usize, String)> {
        if !self.lang.is_c_family() || stmt_start != brace || stmt_start == from {
            return None;
        }
        // Walk back over parameter declarations to the closing `)`.
        let mut j = brace;
        while j > from {
            let t = &self.tokens[j - 1];
            if t.is(")") {
                break;
            }
            let decl_token = matches!(
                t.kind,
                TokenKind::Ident | TokenKind::Keyword | TokenKind::Number
            ) || [";", ",", "*", "[", "]"].iter().any(|p| t.is(p));
            if !decl_token {
                return None;
            }
            j -= 1;
        }
        if j == from || j == brace || !self.tokens[j..brace].iter().any(|t| t.is(";")) {
            return None;
        }
        let close_paren = j - 1;
        let mut start = close_paren;
        while start > from {
            let t = &self.tokens[start - 1];
            if t.is(";") || t.is("}") || t.is("{") {
                break;
            }
            start -= 1;
        }
        let name = function_header(&self.tokens[start..=close_paren], self.lang)?;
        Some((start, name))
    }
}

fn is_container_header(header: &[Token]) -> bool {
    let has_kw = header
        .iter()
        .any(|t| CONTAINER_KEYWORDS.contains(&t.text.as_str()) && t.kind != TokenKind::Str);
    let extern_c =
        header.len() == 2 && header[0].text == "extern" && header[1].kind == TokenKind::Str;
    (has_kw || extern_c) && !header.iter().any(|t| t.is("=") || t.is("("))
}

fn is_control_word(t: &Token) -> bool {
    matches!(
        t.text.as_str(),
        "if" | "for"
            | "while"
            | "switch"
            | "return"
            | "sizeof"
            | "catch"
            | "foreach"
            | "elseif"
            | "do"
            | "else"
    )
}

fn paren_close(tokens: &[Token], open: usize) -> Option<usize> {
    let mut depth = 0usize;
    for (k, t) in tokens.iter().enumerate().skip(open) {
        if t.is("(") {
            depth += 1;
        } else if t.is(")") {
            depth -= 1;
            if depth == 0 {
                return Some(k);
            }
        }
    }
    None
}

fn trailer_ok(trailer: &[Token]) -> bool {
    let Some(first) = trailer.first() else {
        return true;
    };
    // C++ initializer list, trailing return type, TS/PHP return type, arrow body.
    if first.is(":") || first.is("->") || first.is("=>") {
        return true;
    }
    let mut k = 0;
    while k < trailer.len() {
        let t = &trailer[k];
        let word = matches!(t.kind, TokenKind::Ident | TokenKind::Keyword);
        if word
            && matches!(t.text.as_str(), "noexcept" | "throw")
            && trailer.get(k + 1).is_some_and(|n| n.is("("))
        {
            match paren_close(trailer, k + 1) {
                Some(c) => {
                    k = c + 1;
                    continue;
                }
                None => return false,
            }
        }
        if !(word || t.is(",") || t.is(".") || t.is("&") || t.is("&&")) || is_control_word(t) {
            return false;
        }
        k += 1;
    }
    true
}

/// Returns the function name when `header` (tokens before `{`) declares one.
pub(crate) fn function_header(header: &[Token], lang: LanguageId) -> Option<String> {
    let mut depth = 0usize;
    for (k, t) in header.iter().enumerate() {
        if t.is(")") {
            depth = depth.saturating_sub(1);
            continue;
        }
        if !t.is("(") {
            continue;
        }
        depth += 1;
        if depth != 1 || k == 0 {
            continue;
        }
        let prev = &header[k - 1];
        let js_anon = prev.text == "function";
        if !(prev.kind == TokenKind::Ident || js_anon) || is_control_word(prev) {
            continue;
        }
        let close = paren_close(header, k)?;
        if !trailer_ok(&header[close + 1..]) {
            continue;
        }
        let before = &header[..k - 1];
        let has_assign = before.iter().any(|t| t.is("="));
        let js_like = matches!(lang, LanguageId::JavaScript | LanguageId::Php);
        if has_assign
            && !(js_like && (js_anon || header[close + 1..].first().is_some_and(|t| t.is("=>"))))
        {
            return None;
        }
        if before
            .iter()
            .any(|t| is_control_word(t) || t.is(";") || t.is("}"))
        {
            return None;
        }
        return Some(if js_anon {
            anonymous_name(before)
        } else {
            qualified_name(header, k - 1)
        });
    }
    // Arrow function without a parameter list in parentheses: `const f = x => {`.
    let arrow = header.last().is_some_and(|t| t.is("=>"));
    if arrow && matches!(lang, LanguageId::JavaScript) {
        return Some(anonymous_name(header));
    }
    None
}

fn anonymous_name(before: &[Token]) -> String {
    before
        .iter()
        .rposition(|t| t.is("=") || t.is(":"))
        .and_then(|p| p.checked_sub(1))
        .map(|p| before[p].text.clone())
        .filter(|n| !n.is_empty())
        .unwrap_or_else(|| "<anonymous>".to_string())
}

fn qualified_name(header: &[Token], mut k: usize) -> String {
    let mut parts = vec![header[k].text.clone()];
    if k >= 1 && header[k - 1].text == "~" {
        parts[0] = format!("~{}", parts[0]);
        k -= 1;
    }
    while k >= 2 && header[k - 1].is("::") {
        let prev = &header[k - 2];
        if prev.kind != TokenKind::Ident {
            break;
        }
        parts.push(prev.text.clone());
        k -= 2;
    }
    parts.reverse();
    parts.join("::")
}

fn indentation(line: &str) -> usize {
    line.chars()
        .take_while(|c| c.is_whitespace())
        .map(|c| if c == '\t' { 8 } else { 1 })
        .sum()
}

fn segment_python(path: &Path, tokens: Vec<Token>, lines: &[String]) -> Segmentation {
    // First token of each logical line, outside brackets.
    let mut firsts: Vec<usize> = Vec::new();
    let mut depth = 0i32;
    let mut last_line = 0;
    for (k, t) in tokens.iter().enumerate() {
        if t.line != last_line && depth <= 0 {
            firsts.push(k);
        }
        last_line = t.line;
        if ["(", "[", "{"].iter().any(|p| t.is(p)) {
            depth += 1;
        } else if [")", "]", "}"].iter().any(|p| t.is(p)) {
            depth -= 1;
        }
    }

    let indent_of = |k: usize| {
        indentation(
            lines
                .get(tokens[k].line - 1)
                .map(String::as_str)
                .unwrap_or(""),
        )
    };
    let mut spans = Vec::new();
    let mut covered_until = 0usize;
    for (fi, &k) in firsts.iter().enumerate() {
        let t = &tokens[k];
        if t.line <= covered_until {
            continue;
        }
        let def_at = if t.text == "def" {
            k
        } else if t.text == "async" && tokens.get(k + 1).is_some_and(|n| n.text == "def") {
            k + 1
        } else {
            continue;
        };
        let Some(name_tok) = tokens.get(def_at + 1) else {
            continue;
        };
        let indent = indent_of(k);
        let end_tok = firsts[fi + 1..]
            .iter()
            .find(|&&n| indent_of(n) <= indent)
            .map(|&n| n - 1)
            .unwrap_or(tokens.len() - 1);
        let end_line = tokens[end_tok].line + tokens[end_tok].text.matches('\n').count();
        spans.push(FunctionSpan {
            file: path.to_path_buf(),
            name: name_tok.text.clone(),
            start_line: t.line,
            end_line,
            language: LanguageId::Python,
            tokens: tokens[k..=end_tok].to_vec(),
        });
        covered_until = end_line;
    }
    Segmentation {
        spans,
        warnings: Vec::new(),
    }
}
