//! Error-tolerant lexical analysis of PHP source.
//!
//! The lexer is total: any byte sequence (decoded leniently as UTF-8)
//! produces a token stream whose concatenated texts reproduce the input
//! exactly. Malformed constructs become `Unknown` tokens or terminate a
//! string/comment early; such events are counted, never thrown.
//!
//! This is deliberately shallower than a full PHP grammar. All downstream
//! detections (call usage, literals, arrays, superglobals) are expressible
//! over tokens, so no AST is built.

use std::collections::{BTreeMap, BTreeSet};

use crate::ingest::{FileKind, KitArchive};

pub const SUPERGLOBALS: [&str; 8] = [
    "$_SERVER", "$_GET", "$_POST", "$_FILES", "$_REQUEST", "$_SESSION", "$_ENV", "$_COOKIE",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    OpenTag,
    CloseTag,
    InlineHtml,
    Identifier,
    Variable,
    StringLiteral,
    Number,
    Comment,
    Punct,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhpToken {
    pub kind: TokenKind,
    /// Raw lexeme. Empty only for the implicit `echo` synthesized after `<?=`.
    pub text: String,
    /// 1-based line of the token start.
    pub line: u32,
}

impl PhpToken {
    /// Identifier name; the zero-width token synthesized by `<?=` reads as "echo".
    pub fn name(&self) -> &str {
        if self.kind == TokenKind::Identifier && self.text.is_empty() {
            "echo"
        } else {
            &self.text
        }
    }

    /// Whitespace runs are carried as Punct tokens to preserve round-tripping.
    pub fn is_whitespace(&self) -> bool {
        self.kind == TokenKind::Punct && self.text.chars().all(|c| c.is_whitespace())
            && !self.text.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct TokenStream {
    pub tokens: Vec<PhpToken>,
    pub error_count: usize,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    line: u32,
    tokens: Vec<PhpToken>,
    errors: usize,
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_' || (c as u32) >= 0x80
}

fn is_ident_continue(c: char) -> bool {
    is_ident_start(c) || c.is_ascii_digit()
}

impl<'a> Lexer<'a> {
    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn starts_with(&self, pat: &str) -> bool {
        self.rest().starts_with(pat)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn advance(&mut self, bytes: usize) {
        self.pos += bytes;
    }

    fn emit(&mut self, kind: TokenKind, start: usize) {
        let text = &self.src[start..self.pos];
        self.tokens.push(PhpToken {
            kind,
            text: text.to_string(),
            line: self.line,
        });
        self.line += text.matches('\n').count() as u32;
    }

    fn emit_zero_width(&mut self, kind: TokenKind) {
        self.tokens.push(PhpToken {
            kind,
            text: String::new(),
            line: self.line,
        });
    }

    fn lex_html(&mut self) {
        let start = self.pos;
        while self.pos < self.src.len() && !self.starts_with("<?") {
            self.bump();
        }
        if self.pos > start {
            self.emit(TokenKind::InlineHtml, start);
        }
    }

    fn lex_open_tag(&mut self) {
        let start = self.pos;
        if self.starts_with("<?php") {
            self.advance(5);
            self.emit(TokenKind::OpenTag, start);
        } else if self.starts_with("<?=") {
            self.advance(3);
            self.emit(TokenKind::OpenTag, start);
            // short echo tag implies an echo statement
            self.emit_zero_width(TokenKind::Identifier);
        } else {
            self.advance(2);
            self.emit(TokenKind::OpenTag, start);
        }
    }

    fn lex_line_comment(&mut self) {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c == '\n' || self.starts_with("?>") {
                break;
            }
            self.bump();
        }
        self.emit(TokenKind::Comment, start);
    }

    fn lex_block_comment(&mut self) {
        let start = self.pos;
        self.advance(2);
        loop {
            if self.starts_with("*/") {
                self.advance(2);
                break;
            }
            if self.bump().is_none() {
                self.errors += 1;
                break;
            }
        }
        self.emit(TokenKind::Comment, start);
    }

    fn lex_quoted(&mut self, quote: char) {
        let start = self.pos;
        self.bump();
        loop {
            match self.bump() {
                Some('\\') => {
                    self.bump();
                }
                Some(c) if c == quote => break,
                Some(_) => {}
                None => {
                    self.errors += 1;
                    break;
                }
            }
        }
        self.emit(TokenKind::StringLiteral, start);
    }

    /// Heredoc/nowdoc starting at "<<<". Returns false if no valid label
    /// follows, in which case nothing is consumed.
    fn lex_heredoc(&mut self) -> bool {
        let start = self.pos;
        let mut probe = self.pos + 3;
        while self.src[probe..].starts_with([' ', '\t']) {
            probe += 1;
        }
        let quote = self.src[probe..].chars().next().filter(|c| *c == '\'' || *c == '"');
        if quote.is_some() {
            probe += 1;
        }
        let label_start = probe;
        while let Some(c) = self.src[probe..].chars().next() {
            if is_ident_continue(c) {
                probe += c.len_utf8();
            } else {
                break;
            }
        }
        if probe == label_start {
            return false;
        }
        let label = self.src[label_start..probe].to_string();
        if let Some(q) = quote {
            if self.src[probe..].starts_with(q) {
                probe += 1;
            } else {
                return false;
            }
        }
        let Some(nl) = self.src[probe..].find('\n') else {
            // header with no body at all
            self.pos = self.src.len();
            self.errors += 1;
            self.emit(TokenKind::StringLiteral, start);
            return true;
        };
        let mut cursor = probe + nl + 1;
        loop {
            let line_end = self.src[cursor..]
                .find('\n')
                .map(|i| cursor + i)
                .unwrap_or(self.src.len());
            let line = &self.src[cursor..line_end];
            let trimmed = line.trim_start_matches([' ', '\t']);
            if trimmed.starts_with(label.as_str()) {
                let after = &trimmed[label.len()..];
                if after.is_empty() || !after.chars().next().map(is_ident_continue).unwrap_or(false)
                {
                    let indent = line.len() - trimmed.len();
                    self.pos = cursor + indent + label.len();
                    self.emit(TokenKind::StringLiteral, start);
                    return true;
                }
            }
            if line_end == self.src.len() {
                self.pos = self.src.len();
                self.errors += 1;
                self.emit(TokenKind::StringLiteral, start);
                return true;
            }
            cursor = line_end + 1;
        }
    }

    fn lex_variable(&mut self) {
        let start = self.pos;
        self.bump(); // '$'
        match self.peek() {
            Some(c) if is_ident_start(c) => {
                while let Some(c) = self.peek() {
                    if is_ident_continue(c) {
                        self.bump();
                    } else {
                        break;
                    }
                }
            }
            // `$$x` / `${expr}`: lone '$' token, nested tokens follow
            _ => {}
        }
        self.emit(TokenKind::Variable, start);
    }

    fn lex_identifier(&mut self) {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if is_ident_continue(c) {
                self.bump();
            } else {
                break;
            }
        }
        self.emit(TokenKind::Identifier, start);
    }

    fn lex_number(&mut self) {
        let start = self.pos;
        if self.starts_with("0x") || self.starts_with("0X") {
            self.advance(2);
            while let Some(c) = self.peek() {
                if c.is_ascii_hexdigit() || c == '_' {
                    self.bump();
                } else {
                    break;
                }
            }
        } else {
            while let Some(c) = self.peek() {
                if c.is_ascii_digit() || c == '_' {
                    self.bump();
                } else {
                    break;
                }
            }
            if self.peek() == Some('.')
                && self.src[self.pos + 1..]
                    .chars()
                    .next()
                    .map(|c| c.is_ascii_digit())
                    .unwrap_or(false)
            {
                self.bump();
                while let Some(c) = self.peek() {
                    if c.is_ascii_digit() || c == '_' {
                        self.bump();
                    } else {
                        break;
                    }
                }
            }
            if matches!(self.peek(), Some('e') | Some('E')) {
                let save = self.pos;
                self.bump();
                if matches!(self.peek(), Some('+') | Some('-')) {
                    self.bump();
                }
                if self.peek().map(|c| c.is_ascii_digit()).unwrap_or(false) {
                    while let Some(c) = self.peek() {
                        if c.is_ascii_digit() {
                            self.bump();
                        } else {
                            break;
                        }
                    }
                } else {
                    self.pos = save;
                }
            }
        }
        self.emit(TokenKind::Number, start);
    }

    fn lex_whitespace(&mut self) {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.bump();
            } else {
                break;
            }
        }
        self.emit(TokenKind::Punct, start);
    }

    fn lex_punct(&mut self) -> bool {
        const MULTI: [&str; 26] = [
            "===", "!==", "<=>", "**=", "<<=", ">>=", "=>", "==", "!=", "<=", ">=", "&&", "||",
            "++", "--", "+=", "-=", "*=", "/=", ".=", "%=", "->", "::", "??", "<<", ">>",
        ];
        const SINGLE: &str = "()[]{};,.<>=+-*/%!?:&|^~@\\";
        let start = self.pos;
        for op in MULTI {
            if self.starts_with(op) {
                self.advance(op.len());
                self.emit(TokenKind::Punct, start);
                return true;
            }
        }
        if let Some(c) = self.peek() {
            if SINGLE.contains(c) {
                self.bump();
                self.emit(TokenKind::Punct, start);
                return true;
            }
        }
        false
    }

    fn lex_unknown(&mut self) {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c == '\n' {
                break;
            }
            self.bump();
        }
        if self.pos == start {
            self.bump();
        }
        self.errors += 1;
        self.emit(TokenKind::Unknown, start);
    }

    fn lex_php(&mut self) -> bool {
        // returns false when switching back to HTML mode
        if self.starts_with("?>") {
            let start = self.pos;
            self.advance(2);
            self.emit(TokenKind::CloseTag, start);
            return false;
        }
        let Some(c) = self.peek() else { return false };
        if c.is_whitespace() {
            self.lex_whitespace();
        } else if self.starts_with("//") || c == '#' {
            self.lex_line_comment();
        } else if self.starts_with("/*") {
            self.lex_block_comment();
        } else if c == '\'' || c == '"' || c == '`' {
            self.lex_quoted(c);
        } else if self.starts_with("<<<") {
            if !self.lex_heredoc() {
                // "<<<" with no label: shift operator plus '<'
                let start = self.pos;
                self.advance(3);
                self.emit(TokenKind::Punct, start);
            }
        } else if c == '$' {
            self.lex_variable();
        } else if is_ident_start(c) {
            self.lex_identifier();
        } else if c.is_ascii_digit() {
            self.lex_number();
        } else if !self.lex_punct() {
            self.lex_unknown();
        }
        true
    }
}

/// Tokenize PHP source. Never fails; malformed input yields `Unknown`
/// tokens or early-terminated literals, counted in `error_count`.
pub fn tokenize_php(source: &str) -> TokenStream {
    let mut lx = Lexer {
        src: source,
        pos: 0,
        line: 1,
        tokens: Vec::new(),
        errors: 0,
    };
    let mut in_php = false;
    while lx.pos < lx.src.len() {
        if in_php {
            in_php = lx.lex_php();
        } else {
            lx.lex_html();
            if lx.pos < lx.src.len() {
                lx.lex_open_tag();
                in_php = true;
            }
        }
    }
    TokenStream {
        tokens: lx.tokens,
        error_count: lx.errors,
    }
}

/// Decode a string-literal lexeme to its runtime value.
pub fn decode_string_literal(raw: &str) -> String {
    if let Some(rest) = raw.strip_prefix("<<<") {
        return decode_heredoc(rest);
    }
    let mut chars = raw.chars();
    let Some(quote) = chars.next() else {
        return String::new();
    };
    let inner: String = chars.collect();
    let inner = inner.strip_suffix(quote).unwrap_or(&inner);
    match quote {
        '\'' => decode_single(inner),
        '"' | '`' => decode_double(inner),
        _ => raw.to_string(),
    }
}

fn decode_single(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut it = s.chars();
    while let Some(c) = it.next() {
        if c == '\\' {
            match it.next() {
                Some('\\') => out.push('\\'),
                Some('\'') => out.push('\''),
                Some(o) => {
                    out.push('\\');
                    out.push(o);
                }
                None => out.push('\\'),
            }
        } else {
            out.push(c);
        }
    }
    out
}

fn decode_double(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let chars: Vec<char> = s.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c != '\\' || i + 1 >= chars.len() {
            out.push(c);
            i += 1;
            continue;
        }
        let e = chars[i + 1];
        i += 2;
        match e {
            'n' => out.push('\n'),
            't' => out.push('\t'),
            'r' => out.push('\r'),
            'v' => out.push('\x0b'),
            'f' => out.push('\x0c'),
            'e' => out.push('\x1b'),
            '\\' => out.push('\\'),
            '"' => out.push('"'),
            '`' => out.push('`'),
            '$' => out.push('$'),
            'x' | 'X' => {
                let mut val = 0u32;
                let mut n = 0;
                while n < 2 && i < chars.len() && chars[i].is_ascii_hexdigit() {
                    val = val * 16 + chars[i].to_digit(16).unwrap();
                    i += 1;
                    n += 1;
                }
                if n == 0 {
                    out.push('\\');
                    out.push(e);
                } else {
                    out.push(char::from_u32(val).unwrap_or('\u{fffd}'));
                }
            }
            'u' => {
                if i < chars.len() && chars[i] == '{' {
                    let mut val = 0u32;
                    let mut j = i + 1;
                    while j < chars.len() && chars[j].is_ascii_hexdigit() {
                        val = val.saturating_mul(16) + chars[j].to_digit(16).unwrap();
                        j += 1;
                    }
                    if j < chars.len() && chars[j] == '}' {
                        out.push(char::from_u32(val).unwrap_or('\u{fffd}'));
                        i = j + 1;
                    } else {
                        out.push('\\');
                        out.push('u');
                    }
                } else {
                    let mut val = 0u32;
                    let mut n = 0;
                    while n < 4 && i < chars.len() && chars[i].is_ascii_hexdigit() {
                        val = val * 16 + chars[i].to_digit(16).unwrap();
                        i += 1;
                        n += 1;
                    }
                    if n == 4 {
                        out.push(char::from_u32(val).unwrap_or('\u{fffd}'));
                    } else {
                        i -= n;
                        out.push('\\');
                        out.push('u');
                    }
                }
            }
            '0'..='7' => {
                let mut val = e.to_digit(8).unwrap();
                let mut n = 1;
                while n < 3 && i < chars.len() && ('0'..='7').contains(&chars[i]) {
                    val = val * 8 + chars[i].to_digit(8).unwrap();
                    i += 1;
                    n += 1;
                }
                out.push(char::from_u32(val & 0xff).unwrap_or('\u{fffd}'));
            }
            other => {
                out.push('\\');
                out.push(other);
            }
        }
    }
    out
}

fn decode_heredoc(after_arrows: &str) -> String {
    let mut header = after_arrows;
    let mut nowdoc = false;
    header = header.trim_start_matches([' ', '\t']);
    if let Some(h) = header.strip_prefix('\'') {
        nowdoc = true;
        header = h;
    } else if let Some(h) = header.strip_prefix('"') {
        header = h;
    }
    let label: String = header.chars().take_while(|c| is_ident_continue(*c)).collect();
    let Some(nl) = after_arrows.find('\n') else {
        return String::new();
    };
    let body = &after_arrows[nl + 1..];
    // drop the closing label line when present
    let body = match body.rfind('\n') {
        Some(last_nl) => {
            let last_line = &body[last_nl + 1..];
            if last_line.trim_start_matches([' ', '\t']).starts_with(label.as_str()) {
                &body[..last_nl]
            } else {
                body
            }
        }
        None => {
            if body.trim_start_matches([' ', '\t']).starts_with(label.as_str()) {
                ""
            } else {
                body
            }
        }
    };
    if nowdoc {
        body.to_string()
    } else {
        decode_double(body)
    }
}

// ---------------------------------------------------------------------------
// Kit-level analysis
// ---------------------------------------------------------------------------

/// A string literal with its location and both raw and decoded forms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StringLit {
    pub raw: String,
    pub decoded: String,
    pub file: String,
    pub line: u32,
}

/// A comment's text with location; consumed by author-signature extraction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommentSpan {
    pub text: String,
    pub file: String,
    pub line: u32,
}

/// An `array(...)`/`[...]` literal whose first-level elements are all strings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StringArray {
    pub elements: Vec<String>,
    pub raw_first: String,
    pub file: String,
    pub line: u32,
}

/// A plain function call site. Method and static calls are excluded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallSite {
    /// Lowercased, since PHP function names are case-insensitive.
    pub callee: String,
    /// Decoded string literals at the first nesting level of the argument list.
    pub arg_literals: Vec<String>,
    /// Raw lexemes parallel to `arg_literals`; used for evidence excerpts.
    pub arg_literal_raws: Vec<String>,
    /// Decoded literal when the very first argument token is a string literal.
    pub first_arg_literal: Option<String>,
    pub file: String,
    pub line: u32,
    /// Index into the bundle's statement table.
    pub stmt: usize,
}

/// Facts about one statement (tokens between `;`/block boundaries).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StatementFacts {
    pub callees: BTreeSet<String>,
    pub has_superglobal: bool,
}

/// Aggregated lexical facts over every PHP entry of a kit.
#[derive(Debug, Clone, Default)]
pub struct PhpAnalysisBundle {
    pub call_sites: Vec<CallSite>,
    pub superglobals_used: BTreeSet<String>,
    pub string_literals: Vec<StringLit>,
    pub string_arrays: Vec<StringArray>,
    /// `${"..."}` dynamic names; raw form feeds the hex-name check.
    pub dynamic_string_names: Vec<StringLit>,
    pub comments: Vec<CommentSpan>,
    pub statements: Vec<StatementFacts>,
    pub token_errors: BTreeMap<String, usize>,
}

const NON_CALL_KEYWORDS: [&str; 16] = [
    "array", "list", "isset", "unset", "empty", "if", "elseif", "while", "for", "foreach",
    "switch", "return", "echo", "print", "function", "fn",
];

fn is_punct(tok: &PhpToken, text: &str) -> bool {
    tok.kind == TokenKind::Punct && tok.text == text
}

/// Analyze every PHP entry of a kit into one fact bundle. Files are visited
/// in path order, so the result is deterministic.
pub fn analyze_php(kit: &KitArchive) -> PhpAnalysisBundle {
    let mut bundle = PhpAnalysisBundle::default();
    for entry in kit.entries_of_kind(FileKind::Php) {
        let text = entry.text();
        let stream = tokenize_php(&text);
        if stream.error_count > 0 {
            bundle
                .token_errors
                .insert(entry.relative_path.clone(), stream.error_count);
        }
        analyze_file(&entry.relative_path, &stream.tokens, &mut bundle);
    }
    bundle
}

/// Analyze one file's token stream into the bundle. Exposed for tests and
/// for scanning inline PHP embedded in non-.php entries if ever needed.
pub fn analyze_file(file: &str, tokens: &[PhpToken], bundle: &mut PhpAnalysisBundle) {
    // Significant tokens: everything except whitespace runs, comments and
    // inline HTML. Open/close tags stay in as statement boundaries.
    let mut sig: Vec<&PhpToken> = Vec::new();
    for tok in tokens {
        match tok.kind {
            TokenKind::Comment => {
                bundle.comments.push(CommentSpan {
                    text: tok.text.clone(),
                    file: file.to_string(),
                    line: tok.line,
                });
            }
            TokenKind::InlineHtml => {}
            _ if tok.is_whitespace() => {}
            _ => sig.push(tok),
        }
    }

    // Statement segmentation.
    let base_stmt = bundle.statements.len();
    let mut stmt_of: Vec<usize> = Vec::with_capacity(sig.len());
    let mut current = base_stmt;
    bundle.statements.push(StatementFacts::default());
    for tok in &sig {
        stmt_of.push(current);
        let boundary = matches!(tok.kind, TokenKind::OpenTag | TokenKind::CloseTag)
            || is_punct(tok, ";")
            || is_punct(tok, "{")
            || is_punct(tok, "}");
        if boundary {
            current = bundle.statements.len();
            bundle.statements.push(StatementFacts::default());
        }
    }

    for (i, tok) in sig.iter().enumerate() {
        match tok.kind {
            TokenKind::Variable => {
                if SUPERGLOBALS.contains(&tok.text.as_str()) {
                    bundle.superglobals_used.insert(tok.text.clone());
                    bundle.statements[stmt_of[i]].has_superglobal = true;
                }
                // dynamic name: `$` `{` "literal" `}`
                if tok.text == "$"
                    && i + 3 < sig.len()
                    && is_punct(sig[i + 1], "{")
                    && sig[i + 2].kind == TokenKind::StringLiteral
                    && is_punct(sig[i + 3], "}")
                {
                    bundle.dynamic_string_names.push(StringLit {
                        raw: sig[i + 2].text.clone(),
                        decoded: decode_string_literal(&sig[i + 2].text),
                        file: file.to_string(),
                        line: sig[i + 2].line,
                    });
                }
            }
            TokenKind::StringLiteral => {
                bundle.string_literals.push(StringLit {
                    raw: tok.text.clone(),
                    decoded: decode_string_literal(&tok.text),
                    file: file.to_string(),
                    line: tok.line,
                });
            }
            TokenKind::Identifier => {
                let followed_by_paren = i + 1 < sig.len() && is_punct(sig[i + 1], "(");
                if !followed_by_paren {
                    continue;
                }
                if i > 0 {
                    let prev = sig[i - 1];
                    if is_punct(prev, "->") || is_punct(prev, "::") {
                        continue;
                    }
                    if prev.kind == TokenKind::Identifier
                        && matches!(prev.name().to_ascii_lowercase().as_str(), "function" | "new" | "fn")
                    {
                        continue;
                    }
                }
                let callee = tok.name().to_ascii_lowercase();
                if callee.is_empty() || NON_CALL_KEYWORDS.contains(&callee.as_str()) {
                    continue;
                }
                let (arg_literals, arg_literal_raws, first_arg_literal) =
                    collect_call_args(&sig, i + 1);
                let stmt = stmt_of[i];
                bundle.statements[stmt].callees.insert(callee.clone());
                bundle.call_sites.push(CallSite {
                    callee,
                    arg_literals,
                    arg_literal_raws,
                    first_arg_literal,
                    file: file.to_string(),
                    line: tok.line,
                    stmt,
                });
            }
            _ => {}
        }
    }

    // Array literals of strings: `array( ... )` and `[ ... ]` forms.
    for (i, tok) in sig.iter().enumerate() {
        let open = if tok.kind == TokenKind::Identifier
            && tok.name().eq_ignore_ascii_case("array")
            && i + 1 < sig.len()
            && is_punct(sig[i + 1], "(")
        {
            Some((i + 1, "(", ")"))
        } else if is_punct(tok, "[") && !is_index_access(&sig, i) {
            Some((i, "[", "]"))
        } else {
            None
        };
        let Some((open_idx, open_ch, close_ch)) = open else {
            continue;
        };
        if let Some(elements) = parse_string_array(&sig, open_idx, open_ch, close_ch) {
            if !elements.is_empty() {
                bundle.string_arrays.push(StringArray {
                    raw_first: elements[0].raw.clone(),
                    elements: elements.into_iter().map(|l| l.decoded).collect(),
                    file: file.to_string(),
                    line: tok.line,
                });
            }
        }
    }
}

/// A `[` right after a value expression is an index access, not an array literal.
fn is_index_access(sig: &[&PhpToken], i: usize) -> bool {
    if i == 0 {
        return false;
    }
    let prev = sig[i - 1];
    matches!(
        prev.kind,
        TokenKind::Variable | TokenKind::StringLiteral | TokenKind::Identifier
    ) || is_punct(prev, ")")
        || is_punct(prev, "]")
}

struct ArrayElem {
    raw: String,
    decoded: String,
}

/// Parse a bracketed list whose first-level elements are each exactly one
/// string literal. Returns None when any element is something else.
fn parse_string_array(
    sig: &[&PhpToken],
    open_idx: usize,
    open: &str,
    close: &str,
) -> Option<Vec<ArrayElem>> {
    let mut depth = 0usize;
    let mut elements = Vec::new();
    let mut elem_tokens: Vec<&PhpToken> = Vec::new();
    for tok in &sig[open_idx..] {
        if is_punct(tok, open) || is_punct(tok, "(") || is_punct(tok, "[") || is_punct(tok, "{") {
            depth += 1;
            if depth > 1 {
                elem_tokens.push(tok);
            }
            continue;
        }
        if is_punct(tok, close) || is_punct(tok, ")") || is_punct(tok, "]") || is_punct(tok, "}") {
            if depth == 0 {
                return None;
            }
            depth -= 1;
            if depth == 0 {
                if !elem_tokens.is_empty() {
                    elements.push(string_elem(&elem_tokens)?);
                }
                return Some(elements);
            }
            elem_tokens.push(tok);
            continue;
        }
        if depth == 1 && is_punct(tok, ",") {
            if elem_tokens.is_empty() {
                return None;
            }
            elements.push(string_elem(&elem_tokens)?);
            elem_tokens.clear();
            continue;
        }
        if depth >= 1 {
            elem_tokens.push(tok);
        }
    }
    None // unterminated
}

fn string_elem(tokens: &[&PhpToken]) -> Option<ArrayElem> {
    if tokens.len() == 1 && tokens[0].kind == TokenKind::StringLiteral {
        Some(ArrayElem {
            raw: tokens[0].text.clone(),
            decoded: decode_string_literal(&tokens[0].text),
        })
    } else {
        None
    }
}

/// Collect first-level string literals of a call's argument list starting at
/// the opening parenthesis.
fn collect_call_args(
    sig: &[&PhpToken],
    open_idx: usize,
) -> (Vec<String>, Vec<String>, Option<String>) {
    let mut depth = 0usize;
    let mut literals = Vec::new();
    let mut raws = Vec::new();
    let mut first_arg_literal = None;
    let mut first_token_seen = false;
    for tok in &sig[open_idx..] {
        if is_punct(tok, "(") || is_punct(tok, "[") || is_punct(tok, "{") {
            depth += 1;
            if depth == 1 {
                continue;
            }
        } else if is_punct(tok, ")") || is_punct(tok, "]") || is_punct(tok, "}") {
            if depth == 0 {
                break;
            }
            depth -= 1;
            if depth == 0 {
                break;
            }
        } else if depth == 1 {
            if !first_token_seen {
                first_token_seen = true;
                if tok.kind == TokenKind::StringLiteral {
                    first_arg_literal = Some(decode_string_literal(&tok.text));
                }
            }
            if tok.kind == TokenKind::StringLiteral {
                literals.push(decode_string_literal(&tok.text));
                raws.push(tok.text.clone());
            }
        }
    }
    (literals, raws, first_arg_literal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::FileEntry;
    use proptest::prelude::*;

    fn kit_with_php(files: &[(&str, &str)]) -> KitArchive {
        let entries = files
            .iter()
            .map(|(path, content)| FileEntry {
                relative_path: path.to_string(),
                kind: crate::ingest::classify_file(path, content.as_bytes()),
                size_bytes: content.len() as u64,
                content: content.as_bytes().to_vec(),
            })
            .collect();
        KitArchive {
            kit_id: "test".into(),
            origin_name: "test".into(),
            entries,
            directory_count: 0,
        }
    }

    fn kinds(src: &str) -> Vec<(TokenKind, String)> {
        tokenize_php(src)
            .tokens
            .into_iter()
            .filter(|t| !t.is_whitespace())
            .map(|t| (t.kind, t.text))
            .collect()
    }

    #[test]
    fn basic_eval_sequence() {
        let toks = kinds("<?php eval($x); ?>");
        let expected = vec![
            (TokenKind::OpenTag, "<?php".to_string()),
            (TokenKind::Identifier, "eval".to_string()),
            (TokenKind::Punct, "(".to_string()),
            (TokenKind::Variable, "$x".to_string()),
            (TokenKind::Punct, ")".to_string()),
            (TokenKind::Punct, ";".to_string()),
            (TokenKind::CloseTag, "?>".to_string()),
        ];
        assert_eq!(toks, expected);
    }

    #[test]
    fn single_quote_escape_decoding() {
        let stream = tokenize_php("<?php $s = 'a\\'b';");
        let lit = stream
            .tokens
            .iter()
            .find(|t| t.kind == TokenKind::StringLiteral)
            .unwrap();
        assert_eq!(lit.text, "'a\\'b'");
        assert_eq!(decode_string_literal(&lit.text), "a'b");
    }

    #[test]
    fn unterminated_heredoc_recovers() {
        let stream = tokenize_php("<?php $x = <<<EOT\nabc");
        assert_eq!(stream.error_count, 1);
        let lit = stream
            .tokens
            .iter()
            .find(|t| t.kind == TokenKind::StringLiteral)
            .unwrap();
        assert_eq!(lit.text, "<<<EOT\nabc");
    }

    #[test]
    fn heredoc_terminated() {
        let src = "<?php $x = <<<EOT\nline1\nline2\nEOT;\n";
        let stream = tokenize_php(src);
        assert_eq!(stream.error_count, 0);
        let lit = stream
            .tokens
            .iter()
            .find(|t| t.kind == TokenKind::StringLiteral)
            .unwrap();
        assert_eq!(decode_string_literal(&lit.text), "line1\nline2");
    }

    #[test]
    fn nowdoc_keeps_backslashes() {
        let src = "<?php $x = <<<'EOT'\na\\nb\nEOT;\n";
        let stream = tokenize_php(src);
        let lit = stream
            .tokens
            .iter()
            .find(|t| t.kind == TokenKind::StringLiteral)
            .unwrap();
        assert_eq!(decode_string_literal(&lit.text), "a\\nb");
    }

    #[test]
    fn double_quote_escapes() {
        assert_eq!(decode_string_literal(r#""a\x41\n\t\u0042""#), "aA\n\tB");
        assert_eq!(decode_string_literal(r#""\x5f\x50\x4f\x53\x54""#), "_POST");
        assert_eq!(decode_string_literal(r#""\101""#), "A");
    }

    #[test]
    fn short_echo_tag_synthesizes_echo() {
        let stream = tokenize_php("<?= $x ?>");
        assert_eq!(stream.tokens[0].kind, TokenKind::OpenTag);
        assert_eq!(stream.tokens[1].kind, TokenKind::Identifier);
        assert_eq!(stream.tokens[1].name(), "echo");
        assert_eq!(stream.tokens[1].text, "");
    }

    #[test]
    fn lines_are_tracked() {
        let stream = tokenize_php("<?php\n$a = 1;\n$b = 2;");
        let b = stream
            .tokens
            .iter()
            .find(|t| t.text == "$b")
            .unwrap();
        assert_eq!(b.line, 3);
        let mut last = 0;
        for t in &stream.tokens {
            assert!(t.line >= last);
            last = t.line;
        }
    }

    #[test]
    fn call_site_extraction() {
        let kit = kit_with_php(&[("a.php", "<?php mail($to,$s,$m);")]);
        let bundle = analyze_php(&kit);
        assert!(bundle.call_sites.iter().any(|c| c.callee == "mail"));
    }

    #[test]
    fn method_calls_excluded() {
        let kit = kit_with_php(&[("a.php", "<?php $obj->eval($x); Foo::eval($y);")]);
        let bundle = analyze_php(&kit);
        assert!(!bundle.call_sites.iter().any(|c| c.callee == "eval"));
    }

    #[test]
    fn callee_case_normalized() {
        let kit = kit_with_php(&[("a.php", "<?php MAIL($to); Base64_Decode($x);")]);
        let bundle = analyze_php(&kit);
        let callees: Vec<_> = bundle.call_sites.iter().map(|c| c.callee.as_str()).collect();
        assert!(callees.contains(&"mail"));
        assert!(callees.contains(&"base64_decode"));
    }

    #[test]
    fn string_array_extraction() {
        let kit = kit_with_php(&[(
            "a.php",
            r#"<?php $bad = array("66.102.0.0","64.233.160.0","72.14.192.0");"#,
        )]);
        let bundle = analyze_php(&kit);
        assert_eq!(bundle.string_arrays.len(), 1);
        assert_eq!(bundle.string_arrays[0].elements.len(), 3);
        assert_eq!(bundle.string_arrays[0].elements[0], "66.102.0.0");
    }

    #[test]
    fn short_array_form_and_index_access() {
        let kit = kit_with_php(&[(
            "a.php",
            r#"<?php $hosts = ["a.example.com", "b.example.com"]; $v = $_GET["q"];"#,
        )]);
        let bundle = analyze_php(&kit);
        assert_eq!(bundle.string_arrays.len(), 1);
        assert_eq!(bundle.string_arrays[0].elements.len(), 2);
    }

    #[test]
    fn mixed_array_not_a_string_array() {
        let kit = kit_with_php(&[("a.php", r#"<?php $a = array("x", 1, "y");"#)]);
        let bundle = analyze_php(&kit);
        assert!(bundle.string_arrays.is_empty());
    }

    #[test]
    fn superglobal_collection() {
        let kit = kit_with_php(&[("a.php", "<?php $ip = $_SERVER['REMOTE_ADDR']; $p = $_POST;")]);
        let bundle = analyze_php(&kit);
        assert!(bundle.superglobals_used.contains("$_SERVER"));
        assert!(bundle.superglobals_used.contains("$_POST"));
        assert!(!bundle.superglobals_used.contains("$_GET"));
    }

    #[test]
    fn dynamic_string_name_detected() {
        let kit = kit_with_php(&[("a.php", r#"<?php ${"\x5f\x50\x4f\x53\x54"} = 1;"#)]);
        let bundle = analyze_php(&kit);
        assert_eq!(bundle.dynamic_string_names.len(), 1);
        assert_eq!(bundle.dynamic_string_names[0].decoded, "_POST");
    }

    #[test]
    fn statement_window_co_occurrence() {
        let kit = kit_with_php(&[("a.php", "<?php eval(urldecode($s)); mail($x);")]);
        let bundle = analyze_php(&kit);
        let eval = bundle.call_sites.iter().find(|c| c.callee == "eval").unwrap();
        let stmt = &bundle.statements[eval.stmt];
        assert!(stmt.callees.contains("urldecode"));
        assert!(!stmt.callees.contains("mail"));
    }

    #[test]
    fn comments_are_collected_not_calls() {
        let kit = kit_with_php(&[("a.php", "<?php // eval($x)\n$a = 1;")]);
        let bundle = analyze_php(&kit);
        assert!(bundle.call_sites.is_empty());
        assert_eq!(bundle.comments.len(), 1);
        assert!(bundle.comments[0].text.contains("eval"));
    }

    #[test]
    fn backtick_lexes_as_string() {
        let stream = tokenize_php("<?php $o = `ls -la`;");
        assert!(stream
            .tokens
            .iter()
            .any(|t| t.kind == TokenKind::StringLiteral && t.text.starts_with('`')));
    }

    #[test]
    fn function_declarations_are_not_call_sites() {
        let kit = kit_with_php(&[("a.php", "<?php function mail($x) { return $x; }")]);
        let bundle = analyze_php(&kit);
        assert!(!bundle.call_sites.iter().any(|c| c.callee == "mail"));
    }

    fn roundtrip(src: &str) {
        let stream = tokenize_php(src);
        let rebuilt: String = stream.tokens.iter().map(|t| t.text.as_str()).collect();
        assert_eq!(rebuilt, src);
    }

    #[test]
    fn roundtrip_samples() {
        for src in [
            "",
            "plain html only",
            "<?php",
            "<?php $a = 'unterminated",
            "<?php \"also unterminated",
            "<?php /* block",
            "<?php $x = <<<EOT\nabc",
            "<?= 1+1 ?> tail",
            "<?php $a = \"\\x41\"; ?><html><?php echo 2;",
            "<?php \x01\x02 weird \n $ok = 1;",
            "<?php $$x = 1; ${\"y\"} = 2;",
            "<?php # hash comment ?> after",
            "<?php $n = 0x1F + 1.5e-3;",
        ] {
            roundtrip(src);
        }
    }

    proptest! {
        #[test]
        fn roundtrip_fuzzed(src in "\\PC{0,120}") {
            roundtrip(&src);
        }

        #[test]
        fn roundtrip_php_flavored(body in "[<>?=$a-z0-9'\"\\\\;(){}/#*\\n \\t-]{0,200}") {
            let src = format!("<?php {body}");
            roundtrip(&src);
        }
    }
}
