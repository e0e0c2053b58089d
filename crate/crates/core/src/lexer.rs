//! Comment-stripping tokenizer shared by the function metrics and the
//! structural clone parser. It is deliberately forgiving: unknown bytes become
//! single-character punctuation and unterminated literals stop at line end.

use crate::corpus::LanguageId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Ident,
    Keyword,
    Number,
    Str,
    Char,
    Punct,
    /// A whole preprocessor directive, continuation lines included.
    Preproc,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    /// 1-based line of the first character.
    pub line: usize,
}

impl Token {
    pub fn is(&self, text: &str) -> bool {
        self.text == text && matches!(self.kind, TokenKind::Punct | TokenKind::Keyword)
    }

    pub fn is_operand(&self) -> bool {
        matches!(
            self.kind,
            TokenKind::Ident | TokenKind::Number | TokenKind::Str | TokenKind::Char
        )
    }
}

const C_KEYWORDS: &[&str] = &[
    "auto", "break", "case", "char", "const", "continue", "default", "do", "double", "else",
    "enum", "extern", "float", "for", "goto", "if", "inline", "int", "long", "register",
    "restrict", "return", "short", "signed", "sizeof", "static", "struct", "switch", "typedef",
    "union", "unsigned", "void", "volatile", "while", "_Bool", "bool",
];

const CPP_KEYWORDS: &[&str] = &[
    "catch",
    "class",
    "const_cast",
    "delete",
    "dynamic_cast",
    "explicit",
    "false",
    "friend",
    "mutable",
    "namespace",
    "new",
    "noexcept",
    "nullptr",
    "operator",
    "override",
    "private",
    "protected",
    "public",
    "reinterpret_cast",
    "static_cast",
    "template",
    "this",
    "throw",
    "true",
    "try",
    "typename",
    "using",
    "virtual",
    "__asm",
    "__asm__",
    "asm",
    "__stdcall",
    "__cdecl",
    "__fastcall",
    "WINAPI",
];

const JAVA_CS_KEYWORDS: &[&str] = &[
    "abstract",
    "boolean",
    "byte",
    "catch",
    "class",
    "extends",
    "false",
    "final",
    "finally",
    "foreach",
    "implements",
    "import",
    "in",
    "instanceof",
    "interface",
    "is",
    "namespace",
    "new",
    "null",
    "object",
    "out",
    "override",
    "package",
    "private",
    "protected",
    "public",
    "readonly",
    "ref",
    "sealed",
    "string",
    "super",
    "synchronized",
    "this",
    "throw",
    "throws",
    "true",
    "try",
    "using",
    "var",
    "virtual",
];

const JS_PHP_KEYWORDS: &[&str] = &[
    "as",
    "await",
    "async",
    "catch",
    "class",
    "echo",
    "elseif",
    "extends",
    "false",
    "finally",
    "foreach",
    "function",
    "in",
    "instanceof",
    "let",
    "new",
    "null",
    "of",
    "this",
    "throw",
    "true",
    "try",
    "typeof",
    "var",
    "yield",
    "array",
    "global",
    "isset",
    "unset",
    "include",
    "require",
    "require_once",
    "include_once",
    "public",
    "private",
    "protected",
    "static",
];

const PY_KEYWORDS: &[&str] = &[
    "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class", "continue",
    "def", "del", "elif", "else", "except", "finally", "for", "from", "global", "if", "import",
    "in", "is", "lambda", "nonlocal", "not", "or", "pass", "raise", "return", "try", "while",
    "with", "yield",
];

pub fn is_keyword(lang: LanguageId, word: &str) -> bool {
    use LanguageId::*;
    match lang {
        Python => PY_KEYWORDS.contains(&word),
        C => C_KEYWORDS.contains(&word),
        Cpp => C_KEYWORDS.contains(&word) || CPP_KEYWORDS.contains(&word),
        Java | CSharp => C_KEYWORDS.contains(&word) || JAVA_CS_KEYWORDS.contains(&word),
        JavaScript | Php => C_KEYWORDS.contains(&word) || JS_PHP_KEYWORDS.contains(&word),
        _ => C_KEYWORDS.contains(&word),
    }
}

const PUNCT3: &[&str] = &[
    ">>=", "<<=", "...", "->*", "===", "!==", "**=", "??=", "<=>", "//=",
];
const PUNCT2: &[&str] = &[
    "::", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "+=", "-=", "*=", "/=",
    "%=", "&=", "|=", "^=", "=>", "??", "?.", "**", ".*", "//",
];

/// Multi-character operators that only exist in some languages.
fn punct_applies(lang: LanguageId, p: &str) -> bool {
    use LanguageId::*;
    let script = matches!(lang, JavaScript | Php);
    match p {
        "**" | "**=" => script || lang == Python,
        "//" | "//=" => lang == Python,
        "===" | "!==" => script,
        "??" | "?." | "??=" | "=>" => script || lang == CSharp,
        "->*" | ".*" | "<=>" => lang == Cpp,
        _ => true,
    }
}

struct Cursor {
    chars: Vec<char>,
    pos: usize,
    line: usize,
}

impl Cursor {
    fn peek(&self, off: usize) -> Option<char> {
        self.chars.get(self.pos + off).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.pos).copied()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
        }
        Some(c)
    }

    fn starts_with(&self, s: &str) -> bool {
        s.chars().enumerate().all(|(i, c)| self.peek(i) == Some(c))
    }

    fn at_line_start(&self) -> bool {
        let mut i = self.pos;
        while i > 0 {
            i -= 1;
            match self.chars[i] {
                '\n' => return true,
                ' ' | '\t' | '\r' => continue,
                _ => return false,
            }
        }
        true
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_' || c == '$'
}

fn is_ident_continue(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '$'
}

/// Tokenizes `text` for `lang`, dropping comments and whitespace.
pub fn tokenize(text: &str, lang: LanguageId) -> Vec<Token> {
    let python = lang == LanguageId::Python;
    let hash_comments = python || lang == LanguageId::Php;
    let has_preproc = matches!(lang, LanguageId::C | LanguageId::Cpp | LanguageId::CSharp);

    let mut cur = Cursor {
        chars: text.chars().collect(),
        pos: 0,
        line: 1,
    };
    let mut out = Vec::new();

    while let Some(c) = cur.peek(0) {
        let line = cur.line;
        if c.is_whitespace() {
            cur.bump();
            continue;
        }
        if !python && cur.starts_with("//") {
            while cur.peek(0).is_some_and(|c| c != '\n') {
                cur.bump();
            }
            continue;
        }
        if !python && cur.starts_with("/*") {
            cur.bump();
            cur.bump();
            while cur.peek(0).is_some() && !cur.starts_with("*/") {
                cur.bump();
            }
            cur.bump();
            cur.bump();
            continue;
        }
        if c == '#' && has_preproc && cur.at_line_start() {
            let mut directive = String::new();
            while let Some(ch) = cur.peek(0) {
                if ch == '\n' {
                    if directive.trim_end().ends_with('\\') {
                        directive.push(' ');
                        cur.bump();
                        continue;
                    }
                    break;
                }
                if cur.starts_with("/*") {
                    while cur.peek(0).is_some() && !cur.starts_with("*/") {
                        cur.bump();
                    }
                    cur.bump();
                    cur.bump();
                    continue;
                }
                if cur.starts_with("//") {
                    while cur.peek(0).is_some_and(|c| c != '\n') {
                        cur.bump();
                    }
                    continue;
                }
                directive.push(ch);
                cur.bump();
            }
            out.push(Token {
                kind: TokenKind::Preproc,
                text: directive.trim().to_string(),
                line,
            });
            continue;
        }
        if c == '#' && hash_comments {
            while cur.peek(0).is_some_and(|c| c != '\n') {
                cur.bump();
            }
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && cur.peek(1).is_some_and(|d| d.is_ascii_digit())) {
            let mut num = String::new();
            let hex = c == '0' && matches!(cur.peek(1), Some('x' | 'X'));
            while let Some(ch) = cur.peek(0) {
                let exp_sign = matches!(ch, '+' | '-')
                    && !hex
                    && num
                        .chars()
                        .last()
                        .is_some_and(|p| matches!(p, 'e' | 'E' | 'p' | 'P'));
                if ch.is_ascii_alphanumeric()
                    || ch == '_'
                    || ch == '.'
                    || ch == '\'' && lang == LanguageId::Cpp
                    || exp_sign
                {
                    num.push(ch);
                    cur.bump();
                } else {
                    break;
                }
            }
            out.push(Token {
                kind: TokenKind::Number,
                text: num,
                line,
            });
            continue;
        }
        if is_ident_start(c) {
            let mut word = String::new();
            while let Some(ch) = cur.peek(0) {
                if is_ident_continue(ch) {
                    word.push(ch);
                    cur.bump();
                } else {
                    break;
                }
            }
            // String prefixes: L"..", u8"..", r"..", b'..', f"""..""" etc.
            if let Some(q) = cur.peek(0).filter(|q| *q == '"' || *q == '\'') {
                let prefix = word.to_ascii_lowercase();
                let is_prefix = if python {
                    matches!(
                        prefix.as_str(),
                        "r" | "b" | "u" | "f" | "rb" | "br" | "fr" | "rf"
                    )
                } else {
                    matches!(word.as_str(), "L" | "u" | "U" | "u8" | "R")
                };
                if is_prefix {
                    let raw = prefix.contains('r') && python;
                    let lit = read_string(&mut cur, q, python, raw);
                    out.push(Token {
                        kind: if q == '"' || python {
                            TokenKind::Str
                        } else {
                            TokenKind::Char
                        },
                        text: format!("{word}{lit}"),
                        line,
                    });
                    continue;
                }
            }
            let kind = if is_keyword(lang, &word) {
                TokenKind::Keyword
            } else {
                TokenKind::Ident
            };
            out.push(Token {
                kind,
                text: word,
                line,
            });
            continue;
        }
        if c == '"' || c == '\'' || (c == '`' && lang == LanguageId::JavaScript) {
            let lit = read_string(&mut cur, c, python, false);
            let kind = if c == '\''
                && !python
                && !matches!(lang, LanguageId::JavaScript | LanguageId::Php)
            {
                TokenKind::Char
            } else {
                TokenKind::Str
            };
            out.push(Token {
                kind,
                text: lit,
                line,
            });
            continue;
        }
        let punct = PUNCT3
            .iter()
            .chain(PUNCT2.iter())
            .find(|p| cur.starts_with(p) && punct_applies(lang, p))
            .map(|p| p.to_string());
        let text = match punct {
            Some(p) => {
                for _ in 0..p.chars().count() {
                    cur.bump();
                }
                p
            }
            None => {
                cur.bump();
                c.to_string()
            }
        };
        out.push(Token {
            kind: TokenKind::Punct,
            text,
            line,
        });
    }
    out
}

fn read_string(cur: &mut Cursor, quote: char, python: bool, raw: bool) -> String {
    let mut lit = String::new();
    let triple = python && cur.peek(1) == Some(quote) && cur.peek(2) == Some(quote);
    let multiline = triple || quote == '`';
    let closer_len = if triple { 3 } else { 1 };
    for _ in 0..closer_len {
        lit.push(cur.bump().unwrap_or(quote));
    }
    while let Some(ch) = cur.peek(0) {
        if ch == '\n' && !multiline {
            break;
        }
        if ch == '\\' && !raw {
            lit.push(ch);
            cur.bump();
            if let Some(n) = cur.peek(0) {
                if n == '\n' && !multiline {
                    break;
                }
                lit.push(n);
                cur.bump();
            }
            continue;
        }
        if ch == quote && (!triple || (cur.peek(1) == Some(quote) && cur.peek(2) == Some(quote))) {
            for _ in 0..closer_len {
                lit.push(quote);
                cur.bump();
            }
            return lit;
        }
        lit.push(ch);
        cur.bump();
    }
    lit
}
