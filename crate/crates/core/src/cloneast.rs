//! Structural clone detection for C and C++.
//!
//! A forgiving recursive-descent parser builds a syntax tree over a C-family
//! subset; regions it cannot parse become `Unknown` leaves that still carry
//! their token counts. Every subtree, and every window of `stride` adjacent
//! statements, yields a vector counting node kinds. Names, literal values and
//! type keywords never reach the vector, so renamed copies map to the same one.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clonediff::FileRef;
use crate::corpus::{Corpus, LanguageId, SourceFile};
use crate::lexer::{tokenize, Token, TokenKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    TranslationUnit,
    FunctionDef,
    Declaration,
    TypeSpec,
    Declarator,
    ParamList,
    Param,
    InitList,
    StructDef,
    EnumDef,
    Enumerator,
    Namespace,
    Block,
    ExprStmt,
    EmptyStmt,
    If,
    For,
    While,
    DoWhile,
    Switch,
    Case,
    Default,
    Break,
    Continue,
    Return,
    Goto,
    Label,
    Try,
    Catch,
    Throw,
    Call,
    ArgList,
    Assign,
    CompoundAssign,
    LogicalOp,
    CompareOp,
    BitwiseOp,
    ArithOp,
    UnaryOp,
    PostfixOp,
    Ternary,
    Cast,
    Sizeof,
    Index,
    Member,
    CommaExpr,
    Paren,
    Identifier,
    Literal,
    Unknown,
}

impl NodeKind {
    pub const ALL: [NodeKind; 50] = {
        use NodeKind::*;
        [
            TranslationUnit,
            FunctionDef,
            Declaration,
            TypeSpec,
            Declarator,
            ParamList,
            Param,
            InitList,
            StructDef,
            EnumDef,
            Enumerator,
            Namespace,
            Block,
            ExprStmt,
            EmptyStmt,
            If,
            For,
            While,
            DoWhile,
            Switch,
            Case,
            Default,
            Break,
            Continue,
            Return,
            Goto,
            Label,
            Try,
            Catch,
            Throw,
            Call,
            ArgList,
            Assign,
            CompoundAssign,
            LogicalOp,
            CompareOp,
            BitwiseOp,
            ArithOp,
            UnaryOp,
            PostfixOp,
            Ternary,
            Cast,
            Sizeof,
            Index,
            Member,
            CommaExpr,
            Paren,
            Identifier,
            Literal,
            Unknown,
        ]
    };
    pub const COUNT: usize = Self::ALL.len();

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Inclusive 1-based line span.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LineSpan {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntaxNode {
    pub kind: NodeKind,
    pub children: Vec<SyntaxNode>,
    /// Own tokens plus those of all descendants.
    pub token_count: usize,
    pub span: LineSpan,
    /// Half-open index range into the file's token stream.
    pub first_token: usize,
    pub end_token: usize,
}

impl SyntaxNode {
    pub fn own_tokens(&self) -> usize {
        self.token_count - self.children.iter().map(|c| c.token_count).sum::<usize>()
    }

    pub fn walk(&self, f: &mut impl FnMut(&SyntaxNode)) {
        f(self);
        for c in &self.children {
            c.walk(f);
        }
    }

    /// Nested s-expression of kinds, handy in tests: `function_def(block(return(literal)))`.
    pub fn shape(&self) -> String {
        let name = serde_json::to_value(self.kind)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default();
        if self.children.is_empty() {
            name
        } else {
            let inner: Vec<String> = self.children.iter().map(|c| c.shape()).collect();
            format!("{name}({})", inner.join(","))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedFile {
    pub tree: SyntaxNode,
    pub tokens: usize,
    /// Share of tokens outside `Unknown` nodes; 1 for an empty file.
    pub coverage: f64,
}

/// Parses C or C++ source. Never fails; see [`ParsedFile::coverage`].
pub fn parse_source(text: &str, lang: LanguageId) -> ParsedFile {
    let toks: Vec<Token> = tokenize(text, lang)
        .into_iter()
        .filter(|t| t.kind != TokenKind::Preproc)
        .collect();
    let mut p = Parser {
        toks: &toks,
        pos: 0,
        depth: 0,
        cpp: lang == LanguageId::Cpp,
    };
    let tree = p.translation_unit();
    let mut unknown = 0;
    tree.walk(&mut |n| {
        if n.kind == NodeKind::Unknown {
            unknown += n.token_count;
        }
    });
    let coverage = if toks.is_empty() {
        1.0
    } else {
        (toks.len() - unknown) as f64 / toks.len() as f64
    };
    ParsedFile {
        tree,
        tokens: toks.len(),
        coverage,
    }
}

pub fn parse_subset(file: &SourceFile) -> ParsedFile {
    parse_source(&file.joined_text(), file.language)
}

const MAX_DEPTH: usize = 256;

const SPEC_WORDS: &[&str] = &[
    "void",
    "char",
    "short",
    "int",
    "long",
    "float",
    "double",
    "signed",
    "unsigned",
    "_Bool",
    "bool",
    "const",
    "volatile",
    "static",
    "extern",
    "register",
    "auto",
    "inline",
    "typedef",
    "restrict",
    "virtual",
    "explicit",
    "friend",
    "mutable",
    "typename",
    "__stdcall",
    "__cdecl",
    "__fastcall",
    "WINAPI",
    "__int64",
    "__int32",
    "__int16",
    "__int8",
    "__inline",
    "__forceinline",
    "wchar_t",
    "constexpr",
];
const BASE_TYPES: &[&str] = &[
    "void", "char", "short", "int", "long", "float", "double", "signed", "unsigned", "_Bool",
    "bool", "__int64", "__int32", "__int16", "__int8", "wchar_t", "auto",
];
const DECL_QUALIFIERS: &[&str] = &[
    "const",
    "volatile",
    "restrict",
    "__stdcall",
    "__cdecl",
    "__fastcall",
    "WINAPI",
];
const ASSIGN_OPS: &[&str] = &[
    "=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<=", ">>=",
];

fn binary_op(text: &str) -> Option<(u8, NodeKind)> {
    use NodeKind::*;
    Some(match text {
        "||" => (1, LogicalOp),
        "&&" => (2, LogicalOp),
        "|" => (3, BitwiseOp),
        "^" => (4, BitwiseOp),
        "&" => (5, BitwiseOp),
        "==" | "!=" => (6, CompareOp),
        "<" | ">" | "<=" | ">=" => (7, CompareOp),
        "<<" | ">>" => (8, BitwiseOp),
        "+" | "-" => (9, ArithOp),
        "*" | "/" | "%" => (10, ArithOp),
        _ => return None,
    })
}

struct Parser<'t> {
    toks: &'t [Token],
    pos: usize,
    depth: usize,
    cpp: bool,
}

impl<'t> Parser<'t> {
    fn peek_at(&self, off: usize) -> Option<&'t Token> {
        self.toks.get(self.pos + off)
    }

    fn at(&self, text: &str) -> bool {
        self.at_off(0, text)
    }

    fn at_off(&self, off: usize, text: &str) -> bool {
        self.peek_at(off).is_some_and(|t| {
            t.kind != TokenKind::Str && t.kind != TokenKind::Char && t.text == text
        })
    }

    fn kind_at(&self, off: usize) -> Option<TokenKind> {
        self.peek_at(off).map(|t| t.kind)
    }

    fn is_ident_at(&self, off: usize) -> bool {
        self.peek_at(off)
            .is_some_and(|t| t.kind == TokenKind::Ident && !SPEC_WORDS.contains(&t.text.as_str()))
    }

    fn is_spec_at(&self, off: usize) -> bool {
        self.peek_at(off).is_some_and(|t| {
            matches!(t.kind, TokenKind::Ident | TokenKind::Keyword)
                && SPEC_WORDS.contains(&t.text.as_str())
        }) || self.at_off(off, "struct")
            || self.at_off(off, "union")
            || self.at_off(off, "enum")
            || (self.cpp && self.at_off(off, "class"))
            || self.at_off(off, "__declspec")
    }

    fn eof(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn eat(&mut self, text: &str) -> bool {
        if self.at(text) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, text: &str) -> Option<()> {
        self.eat(text).then_some(())
    }

    fn node(&self, kind: NodeKind, start: usize, children: Vec<SyntaxNode>) -> SyntaxNode {
        let end = self.pos;
        let span = if end > start {
            LineSpan {
                start: self.toks[start].line,
                end: self.toks[end - 1].line,
            }
        } else {
            LineSpan { start: 0, end: 0 }
        };
        SyntaxNode {
            kind,
            children,
            token_count: end - start,
            span,
            first_token: start,
            end_token: end,
        }
    }

    fn leaf(&mut self, kind: NodeKind) -> SyntaxNode {
        let start = self.pos;
        self.pos += 1;
        self.node(kind, start, Vec::new())
    }

    /// Runs `f`, rewinding on failure.
    fn attempt<T>(&mut self, f: impl FnOnce(&mut Self) -> Option<T>) -> Option<T> {
        let save = self.pos;
        let r = f(self);
        if r.is_none() {
            self.pos = save;
        }
        r
    }

    fn enter(&mut self) -> Option<()> {
        if self.depth >= MAX_DEPTH {
            return None;
        }
        self.depth += 1;
        Some(())
    }

    fn leave(&mut self) {
        self.depth -= 1;
    }

    /// Skips a balanced group starting at an opener. Returns false at end of input.
    fn skip_group(&mut self) -> bool {
        let mut stack: Vec<&str> = Vec::new();
        while let Some(t) = self.toks.get(self.pos) {
            self.pos += 1;
            if t.kind == TokenKind::Punct {
                match t.text.as_str() {
                    "(" => stack.push(")"),
                    "[" => stack.push("]"),
                    "{" => stack.push("}"),
                    ")" | "]" | "}" if stack.last() == Some(&t.text.as_str()) => {
                        stack.pop();
                    }
                    _ => {}
                }
            }
            if stack.is_empty() {
                return true;
            }
        }
        false
    }

    /// Opaque node up to and including the next `;` at depth zero, or up to a
    /// closing `}` when `in_block`. Always consumes at least one token.
    fn unknown(&mut self, in_block: bool) -> SyntaxNode {
        let start = self.pos;
        while let Some(t) = self.toks.get(self.pos) {
            if t.kind == TokenKind::Punct {
                match t.text.as_str() {
                    ";" => {
                        self.pos += 1;
                        break;
                    }
                    "}" if in_block && self.pos > start => break,
                    "(" | "[" => {
                        self.skip_group();
                        continue;
                    }
                    "{" => {
                        self.skip_group();
                        if !self.at(";") && !self.at(",") {
                            break;
                        }
                        continue;
                    }
                    _ => {}
                }
            }
            self.pos += 1;
        }
        if self.pos == start {
            self.pos += 1;
        }
        self.node(NodeKind::Unknown, start, Vec::new())
    }

    fn unknown_group(&mut self) -> SyntaxNode {
        let start = self.pos;
        self.skip_group();
        self.node(NodeKind::Unknown, start, Vec::new())
    }

    // ---- declarations ----

    fn translation_unit(&mut self) -> SyntaxNode {
        let mut children = Vec::new();
        while !self.eof() {
            children.push(self.external(false));
        }
        self.node(NodeKind::TranslationUnit, 0, children)
    }

    fn external(&mut self, nested: bool) -> SyntaxNode {
        let start = self.pos;
        if self.at(";") {
            return self.leaf(NodeKind::EmptyStmt);
        }
        if self.at("}") || self.at(")") || self.at("]") {
            return self.leaf(NodeKind::Unknown);
        }
        if self.cpp
            && (self.at("public") || self.at("private") || self.at("protected"))
            && self.at_off(1, ":")
        {
            self.pos += 2;
            return self.node(NodeKind::Label, start, Vec::new());
        }
        if self.cpp && self.at("template") && self.at_off(1, "<") {
            self.pos += 1;
            self.skip_angles();
            return self.node(NodeKind::Unknown, start, Vec::new());
        }
        if let Some(n) = self.attempt(|p| p.namespace()) {
            return n;
        }
        if let Some(n) = self.attempt(|p| p.function_or_declaration(true)) {
            return n;
        }
        if let Some(n) = self.attempt(|p| p.expr_stmt()) {
            return n;
        }
        self.unknown(nested)
    }

    fn skip_angles(&mut self) {
        let mut depth = 0usize;
        while let Some(t) = self.toks.get(self.pos) {
            match t.text.as_str() {
                "<" => depth += 1,
                ">" => depth = depth.saturating_sub(1),
                ">>" => depth = depth.saturating_sub(2),
                ";" | "{" | "}" => return,
                _ => {}
            }
            self.pos += 1;
            if depth == 0 {
                return;
            }
        }
    }

    fn namespace(&mut self) -> Option<SyntaxNode> {
        let start = self.pos;
        if self.cpp && self.eat("namespace") {
            while self.is_ident_at(0) || self.at("::") {
                self.pos += 1;
            }
        } else if self.at("extern")
            && self.kind_at(1) == Some(TokenKind::Str)
            && self.at_off(2, "{")
        {
            self.pos += 2;
        } else {
            return None;
        }
        self.expect("{")?;
        let mut children = Vec::new();
        while !self.eof() && !self.at("}") {
            children.push(self.external(true));
        }
        self.eat("}");
        Some(self.node(NodeKind::Namespace, start, children))
    }

    /// Ident-led type name: `T x`, `T *x;`, `ns::T x`, `T<A> x`.
    fn typename_len(&self, off: usize) -> Option<usize> {
        if !self.is_ident_at(off) {
            return None;
        }
        let mut i = off + 1;
        while self.cpp && self.at_off(i, "::") && self.is_ident_at(i + 1) {
            i += 2;
        }
        if self.cpp && self.at_off(i, "<") {
            let mut depth = 0i32;
            loop {
                let t = self.peek_at(i)?;
                match t.text.as_str() {
                    "<" => depth += 1,
                    ">" => depth -= 1,
                    ">>" => depth -= 2,
                    ";" | "{" | "}" | "(" | ")" => return None,
                    _ => {}
                }
                i += 1;
                if depth <= 0 {
                    break;
                }
            }
        }
        Some(i - off)
    }

    /// Does a type name start here and is it followed by a declarator?
    fn typename_then_declarator(&self, off: usize) -> Option<usize> {
        let len = self.typename_len(off)?;
        let next = off + len;
        if self.is_ident_at(next) || self.at_off(next, "~") || self.is_spec_at(next) {
            return Some(len);
        }
        let mut i = next;
        while self.at_off(i, "*") || (self.cpp && (self.at_off(i, "&") || self.at_off(i, "&&"))) {
            i += 1;
        }
        while self
            .peek_at(i)
            .is_some_and(|t| DECL_QUALIFIERS.contains(&t.text.as_str()))
        {
            i += 1;
        }
        if i > next && self.is_ident_at(i) {
            let after = i + 1;
            if [";", ",", "=", "[", ")", "("]
                .iter()
                .any(|s| self.at_off(after, s))
            {
                return Some(len);
            }
        }
        // (*fp)(...) after a type name
        if self.at_off(next, "(") && self.at_off(next + 1, "*") {
            return Some(len);
        }
        None
    }

    fn looks_like_declaration(&self) -> bool {
        (self.is_spec_at(0) && !self.at("sizeof")) || self.typename_then_declarator(0).is_some()
    }

    /// Storage class, qualifiers and type names folded into one node; struct
    /// and enum bodies become children.
    fn decl_specifiers(&mut self) -> Option<SyntaxNode> {
        let start = self.pos;
        let mut children = Vec::new();
        let mut saw_type = false;
        loop {
            if self.at("__declspec") && self.at_off(1, "(") {
                self.pos += 1;
                self.skip_group();
            } else if self.at("struct") || self.at("union") || (self.cpp && self.at("class")) {
                children.push(self.struct_spec()?);
                saw_type = true;
            } else if self.at("enum") {
                children.push(self.enum_spec()?);
                saw_type = true;
            } else if let Some(t) = self
                .peek_at(0)
                .filter(|t| SPEC_WORDS.contains(&t.text.as_str()))
            {
                if t.kind == TokenKind::Str || t.kind == TokenKind::Char {
                    break;
                }
                saw_type |= BASE_TYPES.contains(&t.text.as_str());
                self.pos += 1;
            } else if !saw_type {
                match self.typename_then_declarator(0) {
                    Some(len) => {
                        self.pos += len;
                        saw_type = true;
                    }
                    None => break,
                }
            } else if self.is_ident_at(0) && self.is_ident_at(1) {
                // calling-convention or annotation macro between type and name
                self.pos += 1;
            } else {
                break;
            }
        }
        (self.pos > start).then(|| self.node(NodeKind::TypeSpec, start, children))
    }

    fn struct_spec(&mut self) -> Option<SyntaxNode> {
        let start = self.pos;
        self.pos += 1;
        while self.at("__declspec") {
            self.pos += 1;
            if self.at("(") {
                self.skip_group();
            }
        }
        while self.is_ident_at(0) || self.at("::") {
            self.pos += 1;
        }
        if self.cpp && self.at(":") {
            while !self.eof() && !self.at("{") && !self.at(";") {
                self.pos += 1;
            }
        }
        if !self.at("{") {
            return (self.pos > start + 1)
                .then(|| self.node(NodeKind::Identifier, start, Vec::new()));
        }
        self.pos += 1;
        let mut members = Vec::new();
        while !self.eof() && !self.at("}") {
            members.push(self.member());
        }
        self.eat("}");
        Some(self.node(NodeKind::StructDef, start, members))
    }

    fn member(&mut self) -> SyntaxNode {
        let start = self.pos;
        if self.at(";") {
            return self.leaf(NodeKind::EmptyStmt);
        }
        if self.cpp
            && (self.at("public") || self.at("private") || self.at("protected"))
            && self.at_off(1, ":")
        {
            self.pos += 2;
            return self.node(NodeKind::Label, start, Vec::new());
        }
        if let Some(n) = self.attempt(|p| p.function_or_declaration(p.cpp)) {
            return n;
        }
        if self.cpp {
            if let Some(n) = self.attempt(|p| p.function_or_declaration(true)) {
                return n;
            }
        }
        self.unknown(true)
    }

    fn enum_spec(&mut self) -> Option<SyntaxNode> {
        let start = self.pos;
        self.pos += 1;
        if self.cpp && (self.at("class") || self.at("struct")) {
            self.pos += 1;
        }
        if self.is_ident_at(0) {
            self.pos += 1;
        }
        if self.cpp && self.at(":") {
            self.pos += 1;
            while self.is_ident_at(0) || self.is_spec_at(0) {
                self.pos += 1;
            }
        }
        if !self.eat("{") {
            return (self.pos > start + 1)
                .then(|| self.node(NodeKind::Identifier, start, Vec::new()));
        }
        let mut items = Vec::new();
        while self.is_ident_at(0) {
            let s = self.pos;
            let name = self.leaf(NodeKind::Identifier);
            let mut kids = vec![name];
            if self.eat("=") {
                kids.push(self.ternary()?);
            }
            items.push(self.node(NodeKind::Enumerator, s, kids));
            if !self.eat(",") {
                break;
            }
        }
        self.expect("}")?;
        Some(self.node(NodeKind::EnumDef, start, items))
    }

    fn function_or_declaration(&mut self, allow_function: bool) -> Option<SyntaxNode> {
        self.enter()?;
        let r = self.attempt(|p| p.function_or_declaration_inner(allow_function));
        self.leave();
        r
    }

    fn function_or_declaration_inner(&mut self, allow_function: bool) -> Option<SyntaxNode> {
        let start = self.pos;
        let mut children = Vec::new();
        let specs = self.decl_specifiers();
        let has_specs = specs.is_some();
        children.extend(specs);
        if has_specs && self.eat(";") {
            return Some(self.node(NodeKind::Declaration, start, children));
        }
        let decl = self.declarator(false)?;
        let is_function = decl.children.iter().any(|c| c.kind == NodeKind::ParamList);
        children.push(decl);

        if allow_function && is_function {
            if self.at("{") {
                children.push(self.block());
                return Some(self.node(NodeKind::FunctionDef, start, children));
            }
            if self.cpp && self.at(":") && !self.at_off(1, ":") {
                let mark = self.pos;
                self.pos += 1;
                let mut inits = Vec::new();
                loop {
                    inits.push(self.assignment()?);
                    if !self.eat(",") {
                        break;
                    }
                }
                if self.at("{") {
                    children.extend(inits);
                    children.push(self.block());
                    return Some(self.node(NodeKind::FunctionDef, start, children));
                }
                self.pos = mark;
            }
            if self.looks_like_declaration() {
                // K&R parameter declarations
                let mark = self.pos;
                let mut params = Vec::new();
                while self.looks_like_declaration() {
                    match self.function_or_declaration(false) {
                        Some(d) => params.push(d),
                        None => break,
                    }
                }
                if self.at("{") && !params.is_empty() {
                    children.extend(params);
                    children.push(self.block());
                    return Some(self.node(NodeKind::FunctionDef, start, children));
                }
                self.pos = mark;
            }
        }
        if !has_specs {
            return None;
        }
        loop {
            if self.eat(":") {
                children.push(self.ternary()?);
            }
            if self.eat("=") {
                children.push(self.initializer()?);
            } else if self.cpp && self.at("{") {
                children.push(self.init_list()?);
            }
            if !self.eat(",") {
                break;
            }
            children.push(self.declarator(false)?);
        }
        self.expect(";")?;
        Some(self.node(NodeKind::Declaration, start, children))
    }

    fn declarator(&mut self, abstract_ok: bool) -> Option<SyntaxNode> {
        self.enter()?;
        let r = self.attempt(|p| p.declarator_inner(abstract_ok));
        self.leave();
        r
    }

    fn declarator_inner(&mut self, abstract_ok: bool) -> Option<SyntaxNode> {
        let start = self.pos;
        let mut children = Vec::new();
        loop {
            let pointer = self.at("*") || (self.cpp && (self.at("&") || self.at("&&")));
            if pointer
                || self
                    .peek_at(0)
                    .is_some_and(|t| DECL_QUALIFIERS.contains(&t.text.as_str()))
            {
                self.pos += 1;
            } else {
                break;
            }
        }
        let mut named = false;
        if self.is_ident_at(0)
            || (self.cpp && (self.at("~") || self.at("operator") || self.at("::")))
        {
            children.push(self.name()?);
            named = true;
        } else if self.at("(")
            && (self.at_off(1, "*") || self.at_off(1, "&") || self.at_off(1, "("))
        {
            self.pos += 1;
            children.push(self.declarator(abstract_ok)?);
            self.expect(")")?;
            named = true;
        }
        if !named && !abstract_ok {
            return None;
        }
        loop {
            if self.at("[") {
                self.pos += 1;
                if !self.at("]") {
                    children.push(self.expr()?);
                }
                self.expect("]")?;
            } else if self.at("(") {
                children.push(self.param_list()?);
                loop {
                    if ["const", "override", "final", "volatile", "noexcept"]
                        .iter()
                        .any(|w| self.at(w))
                    {
                        self.pos += 1;
                    } else if self.at("throw") && self.at_off(1, "(") {
                        self.pos += 1;
                        self.skip_group();
                    } else {
                        break;
                    }
                }
            } else {
                break;
            }
        }
        (self.pos > start).then(|| self.node(NodeKind::Declarator, start, children))
    }

    /// Identifier, possibly qualified, destructor or operator name.
    fn name(&mut self) -> Option<SyntaxNode> {
        let start = self.pos;
        loop {
            self.eat("::");
            self.eat("~");
            if self.eat("operator") {
                if self.at("(") && self.at_off(1, ")") {
                    self.pos += 2;
                } else if !self.eof() && !self.at("(") {
                    self.pos += 1;
                    if self.at("[") || self.at(")") {
                        self.pos += 1;
                    }
                }
                break;
            }
            if !self.is_ident_at(0) {
                return None;
            }
            self.pos += 1;
            if !(self.cpp && self.at("::")) {
                break;
            }
        }
        Some(self.node(NodeKind::Identifier, start, Vec::new()))
    }

    fn param_list(&mut self) -> Option<SyntaxNode> {
        let start = self.pos;
        self.expect("(")?;
        let mut params = Vec::new();
        if !self.at(")") {
            loop {
                if self.eat("...") {
                    break;
                }
                params.push(self.param()?);
                if !self.eat(",") {
                    break;
                }
            }
        }
        self.expect(")")?;
        Some(self.node(NodeKind::ParamList, start, params))
    }

    fn param(&mut self) -> Option<SyntaxNode> {
        let start = self.pos;
        let mut children = Vec::new();
        if let Some(specs) = self.decl_specifiers() {
            children.push(specs);
            if let Some(d) = self.declarator(true) {
                children.push(d);
            }
        } else if self.is_ident_at(0) {
            // K&R name or lone typedef name
            let s = self.pos;
            let id = self.leaf(NodeKind::Identifier);
            children.push(self.node(NodeKind::Declarator, s, vec![id]));
        } else {
            return None;
        }
        if self.eat("=") {
            children.push(self.assignment()?);
        }
        Some(self.node(NodeKind::Param, start, children))
    }

    fn initializer(&mut self) -> Option<SyntaxNode> {
        if self.at("{") {
            self.init_list()
        } else {
            self.assignment()
        }
    }

    fn init_list(&mut self) -> Option<SyntaxNode> {
        self.enter()?;
        let r = self.attempt(|p| {
            let start = p.pos;
            p.expect("{")?;
            let mut items = Vec::new();
            while !p.at("}") {
                if p.at(".") && p.is_ident_at(1) {
                    p.pos += 2;
                    p.expect("=")?;
                } else if p.at("[") {
                    p.pos += 1;
                    items.push(p.ternary()?);
                    p.expect("]")?;
                    p.expect("=")?;
                }
                items.push(p.initializer()?);
                if !p.eat(",") {
                    break;
                }
            }
            p.expect("}")?;
            Some(p.node(NodeKind::InitList, start, items))
        });
        self.leave();
        r
    }

    // ---- statements ----

    fn block(&mut self) -> SyntaxNode {
        let start = self.pos;
        self.eat("{");
        let mut children = Vec::new();
        while !self.eof() && !self.at("}") {
            children.push(self.statement());
        }
        self.eat("}");
        self.node(NodeKind::Block, start, children)
    }

    fn statement(&mut self) -> SyntaxNode {
        if self.enter().is_none() {
            return self.unknown(true);
        }
        let r = self.statement_inner();
        self.leave();
        r
    }

    fn sub_statement(&mut self, children: &mut Vec<SyntaxNode>) {
        if !self.eof() && !self.at("}") {
            children.push(self.statement());
        }
    }

    /// `( expr )` as used by if/while/switch; an unparsable condition becomes `Unknown`.
    fn condition(&mut self, children: &mut Vec<SyntaxNode>) -> bool {
        if !self.at("(") {
            return false;
        }
        let parsed = self.attempt(|p| {
            p.pos += 1;
            let e = p.expr()?;
            p.expect(")")?;
            Some(e)
        });
        match parsed {
            Some(e) => children.push(e),
            None => children.push(self.unknown_group()),
        }
        true
    }

    fn statement_inner(&mut self) -> SyntaxNode {
        let start = self.pos;
        let mut children = Vec::new();
        let Some(t) = self.peek_at(0) else {
            return self.node(NodeKind::Unknown, start, children);
        };
        let word = if t.kind == TokenKind::Keyword || t.kind == TokenKind::Punct {
            t.text.as_str()
        } else {
            ""
        };
        match word {
            "{" => return self.block(),
            ";" => return self.leaf(NodeKind::EmptyStmt),
            "if" => {
                self.pos += 1;
                self.condition(&mut children);
                self.sub_statement(&mut children);
                if self.eat("else") {
                    self.sub_statement(&mut children);
                }
                return self.node(NodeKind::If, start, children);
            }
            "while" => {
                self.pos += 1;
                self.condition(&mut children);
                self.sub_statement(&mut children);
                return self.node(NodeKind::While, start, children);
            }
            "switch" => {
                self.pos += 1;
                self.condition(&mut children);
                self.sub_statement(&mut children);
                return self.node(NodeKind::Switch, start, children);
            }
            "do" => {
                self.pos += 1;
                self.sub_statement(&mut children);
                if self.eat("while") {
                    self.condition(&mut children);
                }
                self.eat(";");
                return self.node(NodeKind::DoWhile, start, children);
            }
            "for" => {
                self.pos += 1;
                if self.at("(") {
                    match self.attempt(|p| p.for_header()) {
                        Some(parts) => children.extend(parts),
                        None => children.push(self.unknown_group()),
                    }
                }
                self.sub_statement(&mut children);
                return self.node(NodeKind::For, start, children);
            }
            "case" => {
                self.pos += 1;
                if let Some(e) = self.attempt(|p| {
                    let e = p.ternary()?;
                    if p.eat("...") {
                        p.ternary()?;
                    }
                    p.expect(":")?;
                    Some(e)
                }) {
                    children.push(e);
                    return self.node(NodeKind::Case, start, children);
                }
                self.pos = start;
                return self.unknown(true);
            }
            "default" if self.at_off(1, ":") => {
                self.pos += 2;
                return self.node(NodeKind::Default, start, children);
            }
            "break" | "continue" if self.at_off(1, ";") => {
                self.pos += 2;
                let kind = if word == "break" {
                    NodeKind::Break
                } else {
                    NodeKind::Continue
                };
                return self.node(kind, start, children);
            }
            "return" | "throw" => {
                let kind = if word == "return" {
                    NodeKind::Return
                } else {
                    NodeKind::Throw
                };
                let r = self.attempt(|p| {
                    p.pos += 1;
                    let mut kids = Vec::new();
                    if !p.at(";") {
                        kids.push(p.expr()?);
                    }
                    p.expect(";")?;
                    Some(p.node(kind, start, kids))
                });
                return r.unwrap_or_else(|| self.unknown(true));
            }
            "goto" if self.is_ident_at(1) && self.at_off(2, ";") => {
                self.pos += 1;
                children.push(self.leaf(NodeKind::Identifier));
                self.pos += 1;
                return self.node(NodeKind::Goto, start, children);
            }
            "try" if self.cpp && self.at_off(1, "{") => {
                self.pos += 1;
                children.push(self.block());
                while self.at("catch") && self.at_off(1, "(") {
                    let cs = self.pos;
                    self.pos += 1;
                    let mut kids = Vec::new();
                    match self.attempt(|p| {
                        p.pos += 1;
                        let param = if p.eat("...") { None } else { Some(p.param()?) };
                        p.expect(")")?;
                        Some(param)
                    }) {
                        Some(param) => kids.extend(param),
                        None => kids.push(self.unknown_group()),
                    }
                    if self.at("{") {
                        kids.push(self.block());
                    }
                    children.push(self.node(NodeKind::Catch, cs, kids));
                }
                return self.node(NodeKind::Try, start, children);
            }
            _ => {}
        }
        if self.is_ident_at(0) && self.at_off(1, ":") && !self.at_off(1, "::") {
            self.pos += 2;
            return self.node(NodeKind::Label, start, children);
        }
        if self.looks_like_declaration() {
            if let Some(d) = self.function_or_declaration(false) {
                return d;
            }
        }
        if let Some(s) = self.attempt(|p| p.expr_stmt()) {
            return s;
        }
        self.unknown(true)
    }

    fn for_header(&mut self) -> Option<Vec<SyntaxNode>> {
        let mut parts = Vec::new();
        self.expect("(")?;
        if self.looks_like_declaration() {
            parts.push(self.function_or_declaration(false)?);
        } else {
            if !self.at(";") {
                parts.push(self.expr()?);
            }
            self.expect(";")?;
        }
        if !self.at(";") {
            parts.push(self.expr()?);
        }
        self.expect(";")?;
        if !self.at(")") {
            parts.push(self.expr()?);
        }
        self.expect(")")?;
        Some(parts)
    }

    fn expr_stmt(&mut self) -> Option<SyntaxNode> {
        let start = self.pos;
        let e = self.expr()?;
        self.expect(";")?;
        Some(self.node(NodeKind::ExprStmt, start, vec![e]))
    }

    // ---- expressions ----

    fn expr(&mut self) -> Option<SyntaxNode> {
        self.enter()?;
        let r = self.attempt(|p| {
            let start = p.pos;
            let first = p.assignment()?;
            if !p.at(",") {
                return Some(first);
            }
            let mut items = vec![first];
            while p.eat(",") {
                items.push(p.assignment()?);
            }
            Some(p.node(NodeKind::CommaExpr, start, items))
        });
        self.leave();
        r
    }

    fn assignment(&mut self) -> Option<SyntaxNode> {
        let start = self.pos;
        let lhs = self.ternary()?;
        let Some(op) = self
            .peek_at(0)
            .filter(|t| t.kind == TokenKind::Punct && ASSIGN_OPS.contains(&t.text.as_str()))
        else {
            return Some(lhs);
        };
        let kind = if op.text == "=" {
            NodeKind::Assign
        } else {
            NodeKind::CompoundAssign
        };
        self.pos += 1;
        let rhs = if self.at("{") {
            self.init_list()?
        } else {
            self.assignment()?
        };
        Some(self.node(kind, start, vec![lhs, rhs]))
    }

    fn ternary(&mut self) -> Option<SyntaxNode> {
        let start = self.pos;
        let cond = self.binary(1)?;
        if !self.eat("?") {
            return Some(cond);
        }
        let a = self.expr()?;
        self.expect(":")?;
        let b = self.assignment()?;
        Some(self.node(NodeKind::Ternary, start, vec![cond, a, b]))
    }

    fn binary(&mut self, min_prec: u8) -> Option<SyntaxNode> {
        let start = self.pos;
        let mut lhs = self.unary()?;
        while let Some((prec, kind)) = self
            .peek_at(0)
            .filter(|t| t.kind == TokenKind::Punct)
            .and_then(|t| binary_op(&t.text))
        {
            if prec < min_prec {
                break;
            }
            self.pos += 1;
            let rhs = self.binary(prec + 1)?;
            lhs = self.node(kind, start, vec![lhs, rhs]);
        }
        Some(lhs)
    }

    /// `( type-name )` at the cursor? Returns the index just after `)`.
    fn cast_type_end(&self) -> Option<usize> {
        if !self.at("(") {
            return None;
        }
        let typed = (self.is_spec_at(1) && !self.at_off(1, "sizeof")) || {
            let len = self.typename_len(1)?;
            let mut i = 1 + len;
            let mut stars = 0;
            while self.at_off(i, "*") || (self.cpp && self.at_off(i, "&")) {
                i += 1;
                stars += 1;
            }
            self.at_off(i, ")")
                && (stars > 0
                    || self.peek_at(i + 1).is_some_and(|t| {
                        matches!(
                            t.kind,
                            TokenKind::Ident | TokenKind::Number | TokenKind::Str | TokenKind::Char
                        )
                    }))
        };
        if !typed {
            return None;
        }
        let mut i = 1;
        let mut depth = 1;
        while depth > 0 {
            let t = self.peek_at(i)?;
            if t.kind == TokenKind::Punct {
                match t.text.as_str() {
                    "(" => depth += 1,
                    ")" => depth -= 1,
                    ";" | "{" | "}" => return None,
                    _ => {}
                }
            }
            i += 1;
        }
        Some(i)
    }

    fn type_name(&mut self) -> Option<Vec<SyntaxNode>> {
        let mut out = vec![self.decl_specifiers()?];
        out.extend(self.declarator(true));
        Some(out)
    }

    fn unary(&mut self) -> Option<SyntaxNode> {
        self.enter()?;
        let r = self.attempt(|p| p.unary_inner());
        self.leave();
        r
    }

    fn unary_inner(&mut self) -> Option<SyntaxNode> {
        let start = self.pos;
        let t = self.peek_at(0)?;
        if t.kind == TokenKind::Punct
            && ["++", "--", "+", "-", "!", "~", "*", "&"].contains(&t.text.as_str())
        {
            self.pos += 1;
            let operand = self.unary()?;
            return Some(self.node(NodeKind::UnaryOp, start, vec![operand]));
        }
        if self.at("sizeof") {
            self.pos += 1;
            if self.cast_type_end().is_some() || (self.at("(") && self.is_spec_at(1)) {
                let kids = self.attempt(|p| {
                    p.pos += 1;
                    let k = p.type_name()?;
                    p.expect(")")?;
                    Some(k)
                });
                if let Some(kids) = kids {
                    return Some(self.node(NodeKind::Sizeof, start, kids));
                }
            }
            let operand = self.unary()?;
            return Some(self.node(NodeKind::Sizeof, start, vec![operand]));
        }
        if self.cpp && (self.at("new") || self.at("delete")) {
            let is_new = self.at("new");
            self.pos += 1;
            let mut kids = Vec::new();
            if self.at("[") && self.at_off(1, "]") {
                self.pos += 2;
            }
            if is_new {
                kids.push(self.decl_specifiers().or_else(|| self.name())?);
                while self.at("*") {
                    self.pos += 1;
                }
                if self.at("[") {
                    self.pos += 1;
                    kids.push(self.expr()?);
                    self.expect("]")?;
                } else if self.at("(") {
                    kids.push(self.arg_list()?);
                }
            } else {
                kids.push(self.unary()?);
            }
            return Some(self.node(NodeKind::UnaryOp, start, kids));
        }
        if self.cpp
            && [
                "static_cast",
                "dynamic_cast",
                "const_cast",
                "reinterpret_cast",
            ]
            .iter()
            .any(|w| self.at(w))
        {
            self.pos += 1;
            self.skip_angles();
            self.expect("(")?;
            let e = self.expr()?;
            self.expect(")")?;
            return Some(self.node(NodeKind::Cast, start, vec![e]));
        }
        if self.cast_type_end().is_some() {
            if let Some(n) = self.attempt(|p| {
                p.pos += 1;
                let mut kids = p.type_name()?;
                p.expect(")")?;
                if p.at("{") {
                    kids.push(p.init_list()?);
                } else {
                    kids.push(p.unary()?);
                }
                Some(p.node(NodeKind::Cast, start, kids))
            }) {
                return Some(n);
            }
        }
        self.postfix()
    }

    fn arg_list(&mut self) -> Option<SyntaxNode> {
        let start = self.pos;
        self.expect("(")?;
        let mut args = Vec::new();
        if !self.at(")") {
            loop {
                args.push(self.assignment()?);
                if !self.eat(",") {
                    break;
                }
            }
        }
        self.expect(")")?;
        Some(self.node(NodeKind::ArgList, start, args))
    }

    fn postfix(&mut self) -> Option<SyntaxNode> {
        let start = self.pos;
        let mut e = self.primary()?;
        loop {
            if self.at("(") {
                let args = self.arg_list()?;
                e = self.node(NodeKind::Call, start, vec![e, args]);
            } else if self.at("[") {
                self.pos += 1;
                let i = self.expr()?;
                self.expect("]")?;
                e = self.node(NodeKind::Index, start, vec![e, i]);
            } else if (self.at(".") || self.at("->"))
                && (self.is_ident_at(1) || self.at_off(1, "~"))
            {
                self.pos += 1;
                let field = self.name()?;
                e = self.node(NodeKind::Member, start, vec![e, field]);
            } else if self.at("++") || self.at("--") {
                self.pos += 1;
                e = self.node(NodeKind::PostfixOp, start, vec![e]);
            } else {
                break;
            }
        }
        Some(e)
    }

    fn primary(&mut self) -> Option<SyntaxNode> {
        let start = self.pos;
        let t = self.peek_at(0)?;
        match t.kind {
            TokenKind::Number | TokenKind::Char => Some(self.leaf(NodeKind::Literal)),
            TokenKind::Str => {
                while self.kind_at(0) == Some(TokenKind::Str) {
                    self.pos += 1;
                }
                Some(self.node(NodeKind::Literal, start, Vec::new()))
            }
            TokenKind::Ident if !SPEC_WORDS.contains(&t.text.as_str()) => self.name(),
            TokenKind::Keyword if matches!(t.text.as_str(), "true" | "false" | "nullptr") => {
                Some(self.leaf(NodeKind::Literal))
            }
            TokenKind::Keyword if t.text == "this" => Some(self.leaf(NodeKind::Identifier)),
            TokenKind::Punct if t.text == "::" && self.cpp => self.name(),
            TokenKind::Punct if t.text == "(" => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(")")?;
                Some(self.node(NodeKind::Paren, start, vec![e]))
            }
            TokenKind::Punct if t.text == "{" => self.init_list(),
            _ => None,
        }
    }
}

/// Where a vector came from: a subtree or a window of sibling subtrees.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VectorSource {
    pub sample_id: String,
    pub path: std::path::PathBuf,
    pub span: LineSpan,
    pub first_token: usize,
    pub end_token: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharacteristicVector {
    /// Node counts indexed by [`NodeKind::index`].
    pub counts: Vec<u32>,
    pub token_count: usize,
    pub source: VectorSource,
}

impl CharacteristicVector {
    fn file_key(&self) -> (&str, &std::path::Path) {
        (&self.source.sample_id, &self.source.path)
    }
}

/// Statement-list parents whose adjacent children get merged into windows.
fn is_list_node(kind: NodeKind) -> bool {
    matches!(
        kind,
        NodeKind::TranslationUnit | NodeKind::Block | NodeKind::Namespace | NodeKind::StructDef
    )
}

/// Vectors for every subtree with at least `min_tokens` tokens, plus sums over
/// each run of `stride` adjacent statements meeting the same bound.
pub fn vectorize(
    tree: &SyntaxNode,
    origin: &FileRef,
    min_tokens: usize,
    stride: usize,
) -> Vec<CharacteristicVector> {
    let mut out = Vec::new();
    let min_tokens = min_tokens.max(1);
    let stride = stride.max(1);
    collect(tree, origin, min_tokens, stride, &mut out);
    out.sort_by(|a, b| {
        a.source
            .cmp(&b.source)
            .then_with(|| a.counts.cmp(&b.counts))
    });
    out
}

fn collect(
    node: &SyntaxNode,
    origin: &FileRef,
    min_tokens: usize,
    stride: usize,
    out: &mut Vec<CharacteristicVector>,
) -> Vec<u32> {
    let mut counts = vec![0u32; NodeKind::COUNT];
    counts[node.kind.index()] += 1;
    let child_counts: Vec<Vec<u32>> = node
        .children
        .iter()
        .map(|c| collect(c, origin, min_tokens, stride, out))
        .collect();
    for cc in &child_counts {
        for (a, b) in counts.iter_mut().zip(cc) {
            *a += b;
        }
    }
    let source = |span: LineSpan, first_token: usize, end_token: usize| VectorSource {
        sample_id: origin.sample_id.clone(),
        path: origin.path.clone(),
        span,
        first_token,
        end_token,
    };
    if node.token_count >= min_tokens {
        out.push(CharacteristicVector {
            counts: counts.clone(),
            token_count: node.token_count,
            source: source(node.span, node.first_token, node.end_token),
        });
    }
    if stride >= 2 && is_list_node(node.kind) && node.children.len() >= stride {
        for w in 0..=node.children.len() - stride {
            let kids = &node.children[w..w + stride];
            let tokens: usize = kids.iter().map(|k| k.token_count).sum();
            if tokens < min_tokens {
                continue;
            }
            let mut sum = vec![0u32; NodeKind::COUNT];
            for cc in &child_counts[w..w + stride] {
                for (a, b) in sum.iter_mut().zip(cc) {
                    *a += b;
                }
            }
            let (first, last) = (&kids[0], &kids[stride - 1]);
            out.push(CharacteristicVector {
                counts: sum,
                token_count: tokens,
                source: source(
                    LineSpan {
                        start: first.span.start,
                        end: last.span.end,
                    },
                    first.first_token,
                    last.end_token,
                ),
            });
        }
    }
    counts
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VectorCluster {
    pub members: Vec<CharacteristicVector>,
    /// Shared vector; at similarity below 1 the vector of the first member.
    pub vector: Vec<u32>,
}

fn euclid(a: &[u32], b: &[u32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = *x as f64 - *y as f64;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Distance bound for two subtrees at `similarity`, scaled by the smaller size.
pub fn distance_bound(similarity: f64, size: usize) -> f64 {
    (2.0 * size as f64 * (1.0 - similarity)).max(0.0).sqrt()
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut c = x;
        while self.0[c] != r {
            let n = self.0[c];
            self.0[c] = r;
            c = n;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.0[hi] = lo;
        }
    }
}

/// Groups vectors into clone clusters. Similarity 1 groups equal vectors;
/// lower values link vectors within [`distance_bound`], transitively.
/// Only groups spanning two or more files are kept, and clusters wholly
/// nested inside a larger cluster are dropped.
pub fn cluster(vectors: &[CharacteristicVector], similarity: f64) -> Vec<VectorCluster> {
    let groups: Vec<Vec<usize>> = if similarity >= 1.0 {
        let mut by_vec: BTreeMap<&[u32], Vec<usize>> = BTreeMap::new();
        for (i, v) in vectors.iter().enumerate() {
            by_vec.entry(&v.counts).or_default().push(i);
        }
        by_vec.into_values().collect()
    } else {
        let sums: Vec<u64> = vectors
            .iter()
            .map(|v| v.counts.iter().map(|&c| c as u64).sum())
            .collect();
        let mut order: Vec<usize> = (0..vectors.len()).collect();
        order.sort_by_key(|&i| (sums[i], i));
        let mut uf = UnionFind((0..vectors.len()).collect());
        let root_k = (NodeKind::COUNT as f64).sqrt();
        for (oi, &i) in order.iter().enumerate() {
            let reach = root_k * distance_bound(similarity, vectors[i].token_count);
            for &j in &order[oi + 1..] {
                if (sums[j] - sums[i]) as f64 > reach {
                    break;
                }
                let size = vectors[i].token_count.min(vectors[j].token_count);
                if euclid(&vectors[i].counts, &vectors[j].counts)
                    <= distance_bound(similarity, size)
                {
                    uf.union(i, j);
                }
            }
        }
        let mut by_root: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for i in 0..vectors.len() {
            let r = uf.find(i);
            by_root.entry(r).or_default().push(i);
        }
        by_root.into_values().collect()
    };

    let mut clusters: Vec<VectorCluster> = groups
        .into_iter()
        .filter(|g| g.len() >= 2)
        .filter(|g| {
            let first = vectors[g[0]].file_key();
            g.iter().any(|&i| vectors[i].file_key() != first)
        })
        .map(|g| {
            let mut members: Vec<CharacteristicVector> =
                g.into_iter().map(|i| vectors[i].clone()).collect();
            members.sort_by(|a, b| a.source.cmp(&b.source));
            VectorCluster {
                vector: members[0].counts.clone(),
                members,
            }
        })
        .collect();
    clusters = prune_subsumed(clusters);
    clusters.sort_by(|a, b| {
        a.members[0]
            .source
            .cmp(&b.members[0].source)
            .then_with(|| a.vector.cmp(&b.vector))
    });
    clusters
}

/// Drops clusters whose every member sits inside a member of a bigger cluster.
pub fn prune_subsumed(clusters: Vec<VectorCluster>) -> Vec<VectorCluster> {
    type FileKey = (String, std::path::PathBuf);
    let rank = |c: &VectorCluster| -> (usize, u64) {
        (
            c.members.iter().map(|m| m.token_count).sum(),
            c.vector.iter().map(|&x| x as u64).sum(),
        )
    };
    let ranks: Vec<(usize, u64)> = clusters.iter().map(rank).collect();
    let mut by_file: HashMap<FileKey, Vec<(usize, usize, usize)>> = HashMap::new();
    for (ci, c) in clusters.iter().enumerate() {
        for m in &c.members {
            by_file
                .entry((m.source.sample_id.clone(), m.source.path.clone()))
                .or_default()
                .push((m.source.first_token, m.source.end_token, ci));
        }
    }
    let beats =
        |a: usize, b: usize| (ranks[a], std::cmp::Reverse(a)) > (ranks[b], std::cmp::Reverse(b));
    let inside = |m: &CharacteristicVector, other: usize| {
        by_file
            .get(&(m.source.sample_id.clone(), m.source.path.clone()))
            .is_some_and(|v| {
                v.iter().any(|&(s, e, ci)| {
                    ci == other && s <= m.source.first_token && m.source.end_token <= e
                })
            })
    };
    let keep: Vec<bool> = clusters
        .iter()
        .enumerate()
        .map(|(ci, c)| {
            let m0 = &c.members[0];
            let candidates: Vec<usize> = by_file
                .get(&(m0.source.sample_id.clone(), m0.source.path.clone()))
                .map(|v| {
                    let mut cs: Vec<usize> = v
                        .iter()
                        .filter(|&&(s, e, o)| {
                            o != ci && s <= m0.source.first_token && m0.source.end_token <= e
                        })
                        .map(|&(_, _, o)| o)
                        .collect();
                    cs.dedup();
                    cs
                })
                .unwrap_or_default();
            !candidates.into_iter().any(|o| {
                beats(o, ci)
                    && clusters[o].members.len() >= c.members.len()
                    && c.members.iter().all(|m| inside(m, o))
            })
        })
        .collect();
    clusters
        .into_iter()
        .zip(keep)
        .filter_map(|(c, k)| k.then_some(c))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AstParams {
    pub min_tokens: usize,
    pub stride: usize,
    pub similarity: f64,
}

impl Default for AstParams {
    fn default() -> Self {
        AstParams {
            min_tokens: 100,
            stride: 2,
            similarity: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AstParamError {
    #[error("min_tokens must be at least 1")]
    MinTokens,
    #[error("stride must be at least 1")]
    Stride,
    #[error("similarity must lie in (0, 1], got {0}")]
    Similarity(f64),
}

impl AstParams {
    pub fn validate(&self) -> Result<(), AstParamError> {
        if self.min_tokens < 1 {
            return Err(AstParamError::MinTokens);
        }
        if self.stride < 1 {
            return Err(AstParamError::Stride);
        }
        if !(self.similarity > 0.0 && self.similarity <= 1.0) {
            return Err(AstParamError::Similarity(self.similarity));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileCoverage {
    pub sample_id: String,
    pub path: std::path::PathBuf,
    pub tokens: usize,
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AstReport {
    pub params: AstParams,
    pub clusters: Vec<VectorCluster>,
    pub files: Vec<FileCoverage>,
}

/// Parses and vectorizes every C and C++ file, then clusters the pooled vectors.
pub fn detect_corpus(corpus: &Corpus, params: &AstParams) -> Result<AstReport, AstParamError> {
    params.validate()?;
    let files: Vec<&SourceFile> = corpus
        .files()
        .filter(|f| matches!(f.language, LanguageId::C | LanguageId::Cpp))
        .collect();
    let per_file: Vec<(FileCoverage, Vec<CharacteristicVector>)> = files
        .par_iter()
        .map(|f| {
            let parsed = parse_subset(f);
            let origin = FileRef {
                sample_id: f.sample_id.clone(),
                path: f.rel_path.clone(),
            };
            let vecs = vectorize(&parsed.tree, &origin, params.min_tokens, params.stride);
            (
                FileCoverage {
                    sample_id: f.sample_id.clone(),
                    path: f.rel_path.clone(),
                    tokens: parsed.tokens,
                    coverage: parsed.coverage,
                },
                vecs,
            )
        })
        .collect();
    let mut coverage = Vec::with_capacity(per_file.len());
    let mut vectors = Vec::new();
    for (c, v) in per_file {
        coverage.push(c);
        vectors.extend(v);
    }
    Ok(AstReport {
        params: *params,
        clusters: cluster(&vectors, params.similarity),
        files: coverage,
    })
}
