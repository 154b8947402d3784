//! Hand-written lexer and tolerant recursive-descent parser for C-like
//! source files.
//!
//! The parser aims for useful trees on real-world security patches, not for
//! standards conformance. Constructs it cannot make sense of are wrapped in
//! `error` nodes that keep the raw tokens as leaves, so downstream tree
//! diffing still sees the changed material. It only gives up (returns
//! [`ParseError`]) on damage it cannot bound: unterminated strings, comments,
//! blocks, or parenthesis groups.

use super::syntax::{Span, SyntaxTree, TreeBuilder};
use super::{GrammarAdapter, ParseError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TokKind {
    Ident,
    Number,
    Str,
    CharLit,
    Punct,
    Comment,
    Preproc,
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokKind,
    text: String,
    start: usize,
    end: usize,
}

const KEYWORDS_PRIMITIVE: &[&str] = &[
    "void", "char", "short", "int", "long", "float", "double", "signed", "unsigned", "_Bool",
    "bool", "size_t", "ssize_t",
];

const KEYWORDS_QUALIFIER: &[&str] = &[
    "static", "extern", "const", "volatile", "register", "inline", "restrict", "typedef",
    "auto", "_Atomic",
];

const KEYWORDS_STMT: &[&str] = &[
    "if", "else", "while", "do", "for", "switch", "case", "default", "break", "continue",
    "return", "goto", "sizeof", "struct", "union", "enum",
];

fn is_keyword(s: &str) -> bool {
    KEYWORDS_PRIMITIVE.contains(&s)
        || KEYWORDS_QUALIFIER.contains(&s)
        || KEYWORDS_STMT.contains(&s)
}

/// Lexes `text`. In lenient mode unterminated constructs run to end of
/// input instead of failing; parsing uses strict mode so the damage is
/// reported with its byte offset.
fn lex(text: &str, lenient: bool) -> Result<Vec<Token>, ParseError> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0usize;
    let mut line_start = true;
    while i < bytes.len() {
        let c = bytes[i];
        if c == b'\\' && i + 1 < bytes.len() && bytes[i + 1] == b'\n' {
            i += 2;
            continue;
        }
        if c == b'\n' {
            line_start = true;
            i += 1;
            continue;
        }
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c == b'#' && line_start {
            let start = i;
            while i < bytes.len() {
                if bytes[i] == b'\\' && i + 1 < bytes.len() && bytes[i + 1] == b'\n' {
                    i += 2;
                    continue;
                }
                if bytes[i] == b'\n' {
                    break;
                }
                i += 1;
            }
            toks.push(Token {
                kind: TokKind::Preproc,
                text: text[start..i].to_string(),
                start,
                end: i,
            });
            continue;
        }
        line_start = false;
        if c == b'/' && i + 1 < bytes.len() && bytes[i + 1] == b'/' {
            let start = i;
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            toks.push(Token {
                kind: TokKind::Comment,
                text: text[start..i].to_string(),
                start,
                end: i,
            });
            continue;
        }
        if c == b'/' && i + 1 < bytes.len() && bytes[i + 1] == b'*' {
            let start = i;
            i += 2;
            loop {
                if i + 1 >= bytes.len() {
                    if !lenient {
                        return Err(ParseError::new(start, "unterminated block comment"));
                    }
                    i = bytes.len();
                    break;
                }
                if bytes[i] == b'*' && bytes[i + 1] == b'/' {
                    i += 2;
                    break;
                }
                i += 1;
            }
            toks.push(Token {
                kind: TokKind::Comment,
                text: text[start..i].to_string(),
                start,
                end: i,
            });
            continue;
        }
        if c == b'"' || c == b'\'' {
            let quote = c;
            let start = i;
            i += 1;
            loop {
                if i >= bytes.len() {
                    if !lenient {
                        let what = if quote == b'"' { "string" } else { "character" };
                        return Err(ParseError::new(
                            start,
                            format!("unterminated {what} literal"),
                        ));
                    }
                    break;
                }
                if bytes[i] == b'\\' && i + 1 < bytes.len() {
                    i += 2;
                    continue;
                }
                if bytes[i] == quote {
                    i += 1;
                    break;
                }
                if bytes[i] == b'\n' {
                    if !lenient {
                        let what = if quote == b'"' { "string" } else { "character" };
                        return Err(ParseError::new(
                            start,
                            format!("unterminated {what} literal"),
                        ));
                    }
                    break;
                }
                i += 1;
            }
            toks.push(Token {
                kind: if quote == b'"' { TokKind::Str } else { TokKind::CharLit },
                text: text[start..i].to_string(),
                start,
                end: i,
            });
            continue;
        }
        if c.is_ascii_digit() || (c == b'.' && i + 1 < bytes.len() && bytes[i + 1].is_ascii_digit())
        {
            let start = i;
            i += 1;
            while i < bytes.len() {
                let b = bytes[i];
                if b.is_ascii_alphanumeric() || b == b'_' || b == b'.' {
                    i += 1;
                } else if (b == b'+' || b == b'-')
                    && matches!(bytes[i - 1], b'e' | b'E' | b'p' | b'P')
                {
                    i += 1;
                } else {
                    break;
                }
            }
            toks.push(Token {
                kind: TokKind::Number,
                text: text[start..i].to_string(),
                start,
                end: i,
            });
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            toks.push(Token {
                kind: TokKind::Ident,
                text: text[start..i].to_string(),
                start,
                end: i,
            });
            continue;
        }
        const MULTI: &[&str] = &[
            "<<=", ">>=", "...", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&",
            "||", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "##",
        ];
        let rest = &text[i..];
        let mut matched = None;
        for m in MULTI {
            if rest.starts_with(m) {
                matched = Some(*m);
                break;
            }
        }
        let (len, tok_text) = match matched {
            Some(m) => (m.len(), m.to_string()),
            None => {
                let ch_len = text[i..].chars().next().map(char::len_utf8).unwrap_or(1);
                (ch_len, text[i..i + ch_len].to_string())
            }
        };
        toks.push(Token {
            kind: TokKind::Punct,
            text: tok_text,
            start: i,
            end: i + len,
        });
        i += len;
    }
    Ok(toks)
}

/// Detached parse node; the parser builds these bottom-up and a final pass
/// emits them into the arena.
struct Pt {
    node_type: &'static str,
    label: Option<String>,
    start: usize,
    end: usize,
    children: Vec<Pt>,
}

impl Pt {
    fn new(node_type: &'static str, start: usize, end: usize) -> Self {
        Pt {
            node_type,
            label: None,
            start,
            end,
            children: Vec::new(),
        }
    }

    fn labeled(node_type: &'static str, label: impl Into<String>, start: usize, end: usize) -> Self {
        Pt {
            node_type,
            label: Some(label.into()),
            start,
            end,
            children: Vec::new(),
        }
    }

    fn push(&mut self, child: Pt) {
        self.start = self.start.min(child.start);
        self.end = self.end.max(child.end);
        self.children.push(child);
    }

    fn leaf_for(tok: &Token) -> Pt {
        let node_type = match tok.kind {
            TokKind::Number => "number_literal",
            TokKind::Str => "string_literal",
            TokKind::CharLit => "char_literal",
            TokKind::Ident => {
                if KEYWORDS_PRIMITIVE.contains(&tok.text.as_str()) {
                    "primitive_type"
                } else if KEYWORDS_QUALIFIER.contains(&tok.text.as_str()) {
                    "type_qualifier"
                } else {
                    "identifier"
                }
            }
            _ => "operator",
        };
        Pt::labeled(node_type, tok.text.clone(), tok.start, tok.end)
    }
}

struct ParseFail {
    offset: usize,
}

struct Parser<'a> {
    toks: Vec<Token>,
    pos: usize,
    text: &'a str,
}

type PResult<T> = Result<T, ParseFail>;

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Result<Self, ParseError> {
        let toks = lex(text, false)?
            .into_iter()
            .filter(|t| t.kind != TokKind::Comment)
            .collect();
        Ok(Parser { toks, pos: 0, text })
    }

    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn peek_at(&self, n: usize) -> Option<&Token> {
        self.toks.get(self.pos + n)
    }

    fn at_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Some(t) if t.kind == TokKind::Punct && t.text == p)
    }

    fn at_ident(&self, name: &str) -> bool {
        matches!(self.peek(), Some(t) if t.kind == TokKind::Ident && t.text == name)
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        self.pos += 1;
        t
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.at_punct(p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> PResult<Token> {
        if self.at_punct(p) {
            Ok(self.bump())
        } else {
            Err(self.fail())
        }
    }

    fn fail(&self) -> ParseFail {
        let offset = self
            .peek()
            .map(|t| t.start)
            .unwrap_or_else(|| self.text.len());
        ParseFail { offset }
    }

    fn here(&self) -> usize {
        self.peek().map(|t| t.start).unwrap_or(self.text.len())
    }

    // Whether the token at `pos + n` starts a type. Uses the usual
    // heuristics for the `a * b;` ambiguity: an identifier counts only when
    // followed by another identifier, or by `*` and then an identifier.
    fn type_starts_at(&self, n: usize) -> bool {
        let Some(t) = self.peek_at(n) else { return false };
        if t.kind != TokKind::Ident {
            return false;
        }
        let word = t.text.as_str();
        if KEYWORDS_PRIMITIVE.contains(&word)
            || KEYWORDS_QUALIFIER.contains(&word)
            || word == "struct"
            || word == "union"
            || word == "enum"
        {
            return true;
        }
        if is_keyword(word) {
            return false;
        }
        match self.peek_at(n + 1) {
            Some(next) if next.kind == TokKind::Ident && !is_keyword(&next.text) => true,
            Some(next) if next.kind == TokKind::Punct && next.text == "*" => {
                let mut k = n + 2;
                while matches!(self.peek_at(k), Some(p) if p.kind == TokKind::Punct && p.text == "*")
                {
                    k += 1;
                }
                matches!(self.peek_at(k), Some(p) if p.kind == TokKind::Ident && !is_keyword(&p.text))
            }
            _ => false,
        }
    }

    // Skips tokens up to and including the next `;` at depth zero, or up to
    // (not including) a closing `}`. The skipped region becomes an `error`
    // node holding the raw tokens.
    fn recover(&mut self, from: usize) -> Pt {
        let start = self.toks.get(from).map(|t| t.start).unwrap_or(self.here());
        self.pos = self.pos.max(from);
        let mut node = Pt::new("error", start, start);
        let mut depth = 0usize;
        while let Some(t) = self.peek() {
            match (t.kind, t.text.as_str()) {
                (TokKind::Punct, "{") | (TokKind::Punct, "(") | (TokKind::Punct, "[") => depth += 1,
                (TokKind::Punct, "}") | (TokKind::Punct, ")") | (TokKind::Punct, "]") => {
                    if depth == 0 {
                        break;
                    }
                    depth -= 1;
                }
                (TokKind::Punct, ";") if depth == 0 => {
                    let t = self.bump();
                    node.end = node.end.max(t.end);
                    break;
                }
                _ => {}
            }
            let t = self.bump();
            if t.kind == TokKind::Preproc {
                node.push(preproc_node(&t));
            } else {
                node.push(Pt::leaf_for(&t));
            }
        }
        if node.end < node.start {
            node.end = node.start;
        }
        node
    }

    fn parse_translation_unit(mut self) -> Result<Pt, ParseError> {
        let mut root = Pt::new("translation_unit", 0, self.text.len());
        root.end = self.text.len();
        while self.peek().is_some() {
            let mark = self.pos;
            if self.peek().map(|t| t.kind) == Some(TokKind::Preproc) {
                let t = self.bump();
                root.children.push(preproc_node(&t));
                continue;
            }
            if self.eat_punct(";") {
                continue;
            }
            match self.parse_external_decl() {
                Ok(node) => root.children.push(node),
                Err(fail) => {
                    if self.pos == mark && self.at_punct("}") {
                        let t = self.bump();
                        let mut e = Pt::new("error", t.start, t.end);
                        e.push(Pt::leaf_for(&t));
                        root.children.push(e);
                        continue;
                    }
                    // A failure that consumed nothing and skips nothing
                    // would loop forever; recover() always advances or hits
                    // a brace we consume above.
                    if let Some(inner) = self.fatal_check(fail)? {
                        root.children.push(inner);
                    }
                }
            }
        }
        root.start = 0;
        root.end = self.text.len();
        Ok(root)
    }

    // Distinguishes recoverable statement-level damage from structural
    // failures (EOF while a group is still open).
    fn fatal_check(&mut self, fail: ParseFail) -> Result<Option<Pt>, ParseError> {
        if self.peek().is_none() {
            return Err(ParseError::new(fail.offset, "unexpected end of input"));
        }
        Ok(Some(self.recover(self.pos)))
    }

    fn parse_external_decl(&mut self) -> PResult<Pt> {
        let start_pos = self.pos;
        let mut specs: Vec<Pt> = Vec::new();
        let mut tag_spec: Option<Pt> = None;

        loop {
            let Some(t) = self.peek() else { break };
            if t.kind != TokKind::Ident {
                break;
            }
            let word = t.text.clone();
            if word == "struct" || word == "union" || word == "enum" {
                let kw = self.bump();
                let node_type: &'static str = match word.as_str() {
                    "struct" => "struct_specifier",
                    "union" => "union_specifier",
                    _ => "enum_specifier",
                };
                let mut spec = Pt::new(node_type, kw.start, kw.end);
                if matches!(self.peek(), Some(t) if t.kind == TokKind::Ident && !is_keyword(&t.text))
                {
                    let name = self.bump();
                    spec.label = Some(name.text.clone());
                    spec.end = name.end;
                }
                if self.at_punct("{") {
                    self.parse_tag_body(&mut spec, node_type == "enum_specifier")?;
                }
                tag_spec = Some(spec);
                continue;
            }
            if KEYWORDS_PRIMITIVE.contains(&word.as_str())
                || KEYWORDS_QUALIFIER.contains(&word.as_str())
            {
                let t = self.bump();
                specs.push(Pt::leaf_for(&t));
                continue;
            }
            if is_keyword(&word) {
                break;
            }
            // A plain identifier is a type name only while a declarator can
            // still follow.
            let next_is_declarator = matches!(
                self.peek_at(1),
                Some(n) if (n.kind == TokKind::Ident && !is_keyword(&n.text))
                    || (n.kind == TokKind::Punct && n.text == "*")
            );
            if (specs.is_empty() && tag_spec.is_none() && next_is_declarator)
                || (!specs.is_empty() || tag_spec.is_some())
                    && matches!(self.peek_at(1), Some(n) if n.kind != TokKind::Punct || n.text == "*")
            {
                let t = self.bump();
                specs.push(Pt::labeled("type_identifier", t.text.clone(), t.start, t.end));
                continue;
            }
            break;
        }

        if specs.is_empty() && tag_spec.is_none() && self.pos == start_pos {
            return Err(self.fail());
        }

        // `struct X { ... };` or `struct X;` with no declarators.
        if self.at_punct(";") {
            let semi = self.bump();
            let start = self
                .toks
                .get(start_pos)
                .map(|t| t.start)
                .unwrap_or(semi.start);
            let mut decl = Pt::new("declaration", start, semi.end);
            for s in specs {
                decl.push(s);
            }
            if let Some(tag) = tag_spec {
                decl.push(tag);
            }
            decl.end = decl.end.max(semi.end);
            return Ok(decl);
        }

        let mut pointers: Vec<Pt> = Vec::new();
        while self.at_punct("*") {
            let t = self.bump();
            pointers.push(Pt::labeled("pointer", "*", t.start, t.end));
        }

        let name = match self.peek() {
            Some(t) if t.kind == TokKind::Ident && !is_keyword(&t.text) => self.bump(),
            _ => return Err(self.fail()),
        };

        if self.at_punct("(") {
            // Function definition or prototype: look past the parameter
            // list to decide.
            let close = self.find_matching_paren(self.pos)?;
            let after = self.toks.get(close + 1);
            let is_def = matches!(after, Some(t) if t.kind == TokKind::Punct && t.text == "{");
            if is_def {
                let start = self
                    .toks
                    .get(start_pos)
                    .map(|t| t.start)
                    .unwrap_or(name.start);
                let mut f = Pt::labeled("function_definition", name.text.clone(), start, name.end);
                for s in specs {
                    f.push(s);
                }
                if let Some(tag) = tag_spec {
                    f.push(tag);
                }
                for p in pointers {
                    f.push(p);
                }
                let params = self.parse_parameter_list()?;
                f.push(params);
                let body = self.parse_compound()?;
                f.push(body);
                return Ok(f);
            }
            let start = self
                .toks
                .get(start_pos)
                .map(|t| t.start)
                .unwrap_or(name.start);
            let mut decl = Pt::new("declaration", start, name.end);
            for s in specs {
                decl.push(s);
            }
            if let Some(tag) = tag_spec {
                decl.push(tag);
            }
            for p in pointers {
                decl.push(p);
            }
            let mut proto =
                Pt::labeled("function_declarator", name.text.clone(), name.start, name.end);
            let params = self.parse_parameter_list()?;
            proto.push(params);
            decl.push(proto);
            self.finish_declarator_list(&mut decl, true)?;
            return Ok(decl);
        }

        // Ordinary declaration. Rewind the declarator we already consumed so
        // the shared declarator-list parser sees it.
        let start = self
            .toks
            .get(start_pos)
            .map(|t| t.start)
            .unwrap_or(name.start);
        let mut decl = Pt::new("declaration", start, name.end);
        for s in specs {
            decl.push(s);
        }
        if let Some(tag) = tag_spec {
            decl.push(tag);
        }
        for p in pointers {
            decl.push(p);
        }
        let declarator = self.parse_declarator_tail(name)?;
        decl.push(declarator);
        self.finish_declarator_list(&mut decl, false)?;
        Ok(decl)
    }

    // Parses `{ ... }` of a struct/union/enum specifier into `spec`.
    fn parse_tag_body(&mut self, spec: &mut Pt, is_enum: bool) -> PResult<()> {
        self.expect_punct("{")?;
        loop {
            if self.peek().is_none() {
                return Err(self.fail());
            }
            if self.at_punct("}") {
                let close = self.bump();
                spec.end = spec.end.max(close.end);
                return Ok(());
            }
            if is_enum {
                match self.peek() {
                    Some(t) if t.kind == TokKind::Ident => {
                        let name = self.bump();
                        let ident =
                            Pt::labeled("identifier", name.text.clone(), name.start, name.end);
                        if self.at_punct("=") {
                            self.bump();
                            let value = self.parse_assignment()?;
                            let mut init = Pt::new("init_declarator", ident.start, value.end);
                            init.push(ident);
                            init.push(value);
                            spec.push(init);
                        } else {
                            spec.push(ident);
                        }
                        self.eat_punct(",");
                    }
                    _ => {
                        let node = self.recover(self.pos);
                        spec.push(node);
                    }
                }
                continue;
            }
            if self.peek().map(|t| t.kind) == Some(TokKind::Preproc) {
                let t = self.bump();
                spec.push(preproc_node(&t));
                continue;
            }
            let mark = self.pos;
            match self.parse_external_decl() {
                Ok(field) => spec.push(field),
                Err(_) => {
                    self.pos = self.pos.max(mark);
                    if self.peek().is_none() {
                        return Err(self.fail());
                    }
                    let node = self.recover(self.pos);
                    spec.push(node);
                }
            }
        }
    }

    // After the first declarator, parses `, declarator`* plus optional
    // initializers, ending at `;`.
    fn finish_declarator_list(&mut self, decl: &mut Pt, proto: bool) -> PResult<()> {
        loop {
            if self.at_punct("=") && !proto {
                self.bump();
                let value = self.parse_initializer()?;
                // Rewrap the most recent declarator with its initializer.
                let target = decl.children.pop().ok_or_else(|| self.fail())?;
                let mut init = Pt::new("init_declarator", target.start, value.end);
                init.push(target);
                init.push(value);
                decl.push(init);
            }
            if self.eat_punct(",") {
                let mut pointers = Vec::new();
                while self.at_punct("*") {
                    let t = self.bump();
                    pointers.push(Pt::labeled("pointer", "*", t.start, t.end));
                }
                let name = match self.peek() {
                    Some(t) if t.kind == TokKind::Ident && !is_keyword(&t.text) => self.bump(),
                    _ => return Err(self.fail()),
                };
                for p in pointers {
                    decl.push(p);
                }
                let d = self.parse_declarator_tail(name)?;
                decl.push(d);
                continue;
            }
            let semi = self.expect_punct(";")?;
            decl.end = decl.end.max(semi.end);
            return Ok(());
        }
    }

    // Declarator suffixes after the name: array brackets and bitfields.
    fn parse_declarator_tail(&mut self, name: Token) -> PResult<Pt> {
        let ident = Pt::labeled("identifier", name.text.clone(), name.start, name.end);
        if self.at_punct("[") {
            let mut arr = Pt::new("array_declarator", ident.start, ident.end);
            arr.push(ident);
            while self.at_punct("[") {
                self.bump();
                if !self.at_punct("]") {
                    let size = self.parse_assignment()?;
                    arr.push(size);
                }
                let close = self.expect_punct("]")?;
                arr.end = arr.end.max(close.end);
            }
            return Ok(arr);
        }
        if self.at_punct(":") {
            self.bump();
            let width = self.parse_conditional()?;
            let mut bf = Pt::new("bitfield_declarator", ident.start, width.end);
            bf.push(ident);
            bf.push(width);
            return Ok(bf);
        }
        Ok(ident)
    }

    fn find_matching_paren(&self, open_pos: usize) -> PResult<usize> {
        let mut depth = 0usize;
        for (i, t) in self.toks.iter().enumerate().skip(open_pos) {
            if t.kind != TokKind::Punct {
                continue;
            }
            match t.text.as_str() {
                "(" => depth += 1,
                ")" => {
                    depth -= 1;
                    if depth == 0 {
                        return Ok(i);
                    }
                }
                _ => {}
            }
        }
        Err(ParseFail {
            offset: self.toks[open_pos].start,
        })
    }

    fn parse_parameter_list(&mut self) -> PResult<Pt> {
        let open = self.expect_punct("(")?;
        let mut list = Pt::new("parameter_list", open.start, open.end);
        if self.at_punct(")") {
            let close = self.bump();
            list.end = close.end;
            return Ok(list);
        }
        loop {
            if self.at_punct("...") {
                let t = self.bump();
                list.push(Pt::labeled("variadic_parameter", "...", t.start, t.end));
            } else {
                let param = self.parse_parameter()?;
                list.push(param);
            }
            if self.eat_punct(",") {
                continue;
            }
            let close = self.expect_punct(")")?;
            list.end = list.end.max(close.end);
            return Ok(list);
        }
    }

    fn parse_parameter(&mut self) -> PResult<Pt> {
        let start = self.here();
        let mut param = Pt::new("parameter", start, start);
        let mut last_ident: Option<usize> = None;
        loop {
            let Some(t) = self.peek() else { return Err(self.fail()) };
            match (t.kind, t.text.as_str()) {
                (TokKind::Punct, ")") | (TokKind::Punct, ",") => break,
                (TokKind::Punct, "*") => {
                    let t = self.bump();
                    param.push(Pt::labeled("pointer", "*", t.start, t.end));
                }
                (TokKind::Punct, "(") => {
                    // Function-pointer declarator: keep the pieces as leaves
                    // and take the inner identifier as the name.
                    let close = self.find_matching_paren(self.pos)?;
                    while self.pos <= close {
                        let t = self.bump();
                        if t.kind == TokKind::Ident && !is_keyword(&t.text) {
                            last_ident = Some(param.children.len());
                        }
                        param.push(Pt::leaf_for(&t));
                    }
                }
                (TokKind::Punct, "[") => {
                    self.bump();
                    if !self.at_punct("]") {
                        let size = self.parse_assignment()?;
                        param.push(size);
                    }
                    let close = self.expect_punct("]")?;
                    param.end = param.end.max(close.end);
                }
                (TokKind::Ident, "struct") | (TokKind::Ident, "union") | (TokKind::Ident, "enum") => {
                    let kw = self.bump();
                    let node_type: &'static str = match kw.text.as_str() {
                        "struct" => "struct_specifier",
                        "union" => "union_specifier",
                        _ => "enum_specifier",
                    };
                    let mut spec = Pt::new(node_type, kw.start, kw.end);
                    if matches!(self.peek(), Some(t) if t.kind == TokKind::Ident) {
                        let name = self.bump();
                        spec.label = Some(name.text.clone());
                        spec.end = name.end;
                    }
                    param.push(spec);
                }
                (TokKind::Ident, _) => {
                    let t = self.bump();
                    let leaf = Pt::leaf_for(&t);
                    if leaf.node_type == "identifier" {
                        last_ident = Some(param.children.len());
                    }
                    param.push(leaf);
                }
                _ => return Err(self.fail()),
            }
        }
        // The final plain identifier is the parameter name; earlier ones
        // were really type names.
        if let Some(idx) = last_ident {
            let is_last_ident = param.children[idx + 1..]
                .iter()
                .all(|c| c.node_type != "identifier");
            if is_last_ident {
                param.label = param.children[idx].label.clone();
                for (i, child) in param.children.iter_mut().enumerate() {
                    if i != idx && child.node_type == "identifier" {
                        child.node_type = "type_identifier";
                    }
                }
            }
        }
        if param.children.is_empty() {
            return Err(self.fail());
        }
        Ok(param)
    }

    fn parse_compound(&mut self) -> PResult<Pt> {
        let open = self.expect_punct("{")?;
        let mut block = Pt::new("compound_statement", open.start, open.end);
        loop {
            if self.peek().is_none() {
                return Err(self.fail());
            }
            if self.at_punct("}") {
                let close = self.bump();
                block.end = block.end.max(close.end);
                return Ok(block);
            }
            let stmt = self.parse_statement()?;
            block.push(stmt);
        }
    }

    fn parse_statement(&mut self) -> PResult<Pt> {
        let mark = self.pos;
        match self.try_parse_statement() {
            Ok(stmt) => Ok(stmt),
            Err(fail) => {
                if self.peek().is_none() {
                    return Err(fail);
                }
                self.pos = self.pos.max(mark);
                if self.pos == mark && self.at_punct("}") {
                    return Err(fail);
                }
                Ok(self.recover(mark))
            }
        }
    }

    fn try_parse_statement(&mut self) -> PResult<Pt> {
        let Some(t) = self.peek() else { return Err(self.fail()) };
        if t.kind == TokKind::Preproc {
            let t = self.bump();
            return Ok(preproc_node(&t));
        }
        if t.kind == TokKind::Punct {
            match t.text.as_str() {
                "{" => return self.parse_compound(),
                ";" => {
                    let t = self.bump();
                    return Ok(Pt::new("empty_statement", t.start, t.end));
                }
                _ => {}
            }
        }
        if t.kind == TokKind::Ident {
            match t.text.as_str() {
                "if" => return self.parse_if(),
                "while" => return self.parse_while(),
                "do" => return self.parse_do(),
                "for" => return self.parse_for(),
                "switch" => return self.parse_switch(),
                "case" => {
                    let kw = self.bump();
                    let expr = self.parse_conditional()?;
                    let colon = self.expect_punct(":")?;
                    let mut node = Pt::new("case_statement", kw.start, colon.end);
                    node.push(expr);
                    node.end = node.end.max(colon.end);
                    return Ok(node);
                }
                "default" => {
                    let kw = self.bump();
                    let colon = self.expect_punct(":")?;
                    return Ok(Pt::new("default_statement", kw.start, colon.end));
                }
                "break" | "continue" => {
                    let kw = self.bump();
                    let nt: &'static str = if kw.text == "break" {
                        "break_statement"
                    } else {
                        "continue_statement"
                    };
                    let semi = self.expect_punct(";")?;
                    return Ok(Pt::new(nt, kw.start, semi.end));
                }
                "return" => {
                    let kw = self.bump();
                    let mut node = Pt::new("return_statement", kw.start, kw.end);
                    if !self.at_punct(";") {
                        let expr = self.parse_expression()?;
                        node.push(expr);
                    }
                    let semi = self.expect_punct(";")?;
                    node.end = node.end.max(semi.end);
                    return Ok(node);
                }
                "goto" => {
                    let kw = self.bump();
                    let target = match self.peek() {
                        Some(t) if t.kind == TokKind::Ident => self.bump(),
                        _ => return Err(self.fail()),
                    };
                    let semi = self.expect_punct(";")?;
                    let mut node = Pt::new("goto_statement", kw.start, semi.end);
                    node.label = Some(target.text.clone());
                    return Ok(node);
                }
                name if !is_keyword(name) => {
                    // `label:` introduces a labeled statement.
                    if matches!(self.peek_at(1), Some(c) if c.kind == TokKind::Punct && c.text == ":")
                    {
                        let ident = self.bump();
                        let colon = self.bump();
                        let mut node =
                            Pt::labeled("labeled_statement", ident.text.clone(), ident.start, colon.end);
                        if !self.at_punct("}") {
                            let stmt = self.parse_statement()?;
                            node.push(stmt);
                        }
                        return Ok(node);
                    }
                }
                _ => {}
            }
        }
        if self.type_starts_at(0) {
            return self.parse_local_declaration();
        }
        let expr = self.parse_expression()?;
        let semi = self.expect_punct(";")?;
        let mut node = Pt::new("expression_statement", expr.start, semi.end);
        node.push(expr);
        node.end = node.end.max(semi.end);
        Ok(node)
    }

    fn parse_local_declaration(&mut self) -> PResult<Pt> {
        let start_pos = self.pos;
        let decl = self.parse_external_decl()?;
        // A function definition cannot appear inside a block; seeing one
        // means the heuristic misfired.
        if decl.node_type == "function_definition" {
            self.pos = start_pos;
            return Err(self.fail());
        }
        Ok(decl)
    }

    fn parse_if(&mut self) -> PResult<Pt> {
        let kw = self.bump();
        self.expect_punct("(")?;
        let cond = self.parse_expression()?;
        self.expect_punct(")")?;
        let then = self.parse_statement()?;
        let mut node = Pt::new("if_statement", kw.start, then.end);
        node.push(cond);
        node.push(then);
        if self.at_ident("else") {
            self.bump();
            let alt = self.parse_statement()?;
            node.push(alt);
        }
        Ok(node)
    }

    fn parse_while(&mut self) -> PResult<Pt> {
        let kw = self.bump();
        self.expect_punct("(")?;
        let cond = self.parse_expression()?;
        self.expect_punct(")")?;
        let body = self.parse_statement()?;
        let mut node = Pt::new("while_statement", kw.start, body.end);
        node.push(cond);
        node.push(body);
        Ok(node)
    }

    fn parse_do(&mut self) -> PResult<Pt> {
        let kw = self.bump();
        let body = self.parse_statement()?;
        if !self.at_ident("while") {
            return Err(self.fail());
        }
        self.bump();
        self.expect_punct("(")?;
        let cond = self.parse_expression()?;
        self.expect_punct(")")?;
        let semi = self.expect_punct(";")?;
        let mut node = Pt::new("do_statement", kw.start, semi.end);
        node.push(body);
        node.push(cond);
        node.end = node.end.max(semi.end);
        Ok(node)
    }

    fn parse_for(&mut self) -> PResult<Pt> {
        let kw = self.bump();
        self.expect_punct("(")?;
        let mut node = Pt::new("for_statement", kw.start, kw.end);
        if self.at_punct(";") {
            self.bump();
        } else if self.type_starts_at(0) {
            let decl = self.parse_local_declaration()?;
            node.push(decl);
        } else {
            let init = self.parse_expression()?;
            node.push(init);
            self.expect_punct(";")?;
        }
        if !self.at_punct(";") {
            let cond = self.parse_expression()?;
            node.push(cond);
        }
        self.expect_punct(";")?;
        if !self.at_punct(")") {
            let update = self.parse_expression()?;
            node.push(update);
        }
        self.expect_punct(")")?;
        let body = self.parse_statement()?;
        node.push(body);
        Ok(node)
    }

    fn parse_switch(&mut self) -> PResult<Pt> {
        let kw = self.bump();
        self.expect_punct("(")?;
        let cond = self.parse_expression()?;
        self.expect_punct(")")?;
        let body = self.parse_statement()?;
        let mut node = Pt::new("switch_statement", kw.start, body.end);
        node.push(cond);
        node.push(body);
        Ok(node)
    }

    fn parse_initializer(&mut self) -> PResult<Pt> {
        if !self.at_punct("{") {
            return self.parse_assignment();
        }
        let open = self.bump();
        let mut list = Pt::new("initializer_list", open.start, open.end);
        loop {
            if self.at_punct("}") {
                let close = self.bump();
                list.end = list.end.max(close.end);
                return Ok(list);
            }
            if self.peek().is_none() {
                return Err(self.fail());
            }
            if self.at_punct(".") {
                // Designated initializer: `.field = value`.
                self.bump();
                let field = match self.peek() {
                    Some(t) if t.kind == TokKind::Ident => self.bump(),
                    _ => return Err(self.fail()),
                };
                self.expect_punct("=")?;
                let value = self.parse_initializer()?;
                let mut node = Pt::labeled(
                    "designated_initializer",
                    field.text.clone(),
                    field.start,
                    value.end,
                );
                node.push(value);
                list.push(node);
            } else if self.at_punct("[") {
                self.bump();
                let index = self.parse_assignment()?;
                self.expect_punct("]")?;
                self.expect_punct("=")?;
                let value = self.parse_initializer()?;
                let mut node = Pt::new("designated_initializer", index.start, value.end);
                node.push(index);
                node.push(value);
                list.push(node);
            } else {
                let item = self.parse_initializer()?;
                list.push(item);
            }
            if !self.eat_punct(",") && !self.at_punct("}") {
                return Err(self.fail());
            }
        }
    }

    fn parse_expression(&mut self) -> PResult<Pt> {
        let mut expr = self.parse_assignment()?;
        while self.at_punct(",") {
            self.bump();
            let rhs = self.parse_assignment()?;
            let mut node = Pt::labeled("binary_expression", ",", expr.start, rhs.end);
            node.push(expr);
            node.push(rhs);
            expr = node;
        }
        Ok(expr)
    }

    fn parse_assignment(&mut self) -> PResult<Pt> {
        let lhs = self.parse_conditional()?;
        const ASSIGN: &[&str] = &[
            "=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<=", ">>=",
        ];
        if let Some(t) = self.peek() {
            if t.kind == TokKind::Punct && ASSIGN.contains(&t.text.as_str()) {
                let op = self.bump();
                let rhs = self.parse_assignment()?;
                let mut node =
                    Pt::labeled("assignment_expression", op.text.clone(), lhs.start, rhs.end);
                node.push(lhs);
                node.push(rhs);
                return Ok(node);
            }
        }
        Ok(lhs)
    }

    fn parse_conditional(&mut self) -> PResult<Pt> {
        let cond = self.parse_binary(0)?;
        if !self.at_punct("?") {
            return Ok(cond);
        }
        self.bump();
        let then = self.parse_expression()?;
        self.expect_punct(":")?;
        let alt = self.parse_conditional()?;
        let mut node = Pt::new("conditional_expression", cond.start, alt.end);
        node.push(cond);
        node.push(then);
        node.push(alt);
        Ok(node)
    }

    fn binary_prec(op: &str) -> Option<u8> {
        Some(match op {
            "||" => 1,
            "&&" => 2,
            "|" => 3,
            "^" => 4,
            "&" => 5,
            "==" | "!=" => 6,
            "<" | ">" | "<=" | ">=" => 7,
            "<<" | ">>" => 8,
            "+" | "-" => 9,
            "*" | "/" | "%" => 10,
            _ => return None,
        })
    }

    fn parse_binary(&mut self, min_prec: u8) -> PResult<Pt> {
        let mut lhs = self.parse_unary()?;
        loop {
            let Some(t) = self.peek() else { return Ok(lhs) };
            if t.kind != TokKind::Punct {
                return Ok(lhs);
            }
            let Some(prec) = Self::binary_prec(&t.text) else { return Ok(lhs) };
            if prec < min_prec {
                return Ok(lhs);
            }
            let op = self.bump();
            let rhs = self.parse_binary(prec + 1)?;
            let mut node = Pt::labeled("binary_expression", op.text.clone(), lhs.start, rhs.end);
            node.push(lhs);
            node.push(rhs);
            lhs = node;
        }
    }

    // Whether the parenthesized group starting at `pos` (an open paren)
    // looks like a type, making `(T)x` a cast.
    fn cast_ahead(&self) -> bool {
        if !self.at_punct("(") {
            return false;
        }
        let Ok(close) = self.find_matching_paren(self.pos) else { return false };
        if close == self.pos + 1 {
            return false;
        }
        let inner = &self.toks[self.pos + 1..close];
        let mut saw_kw = false;
        let mut saw_star = false;
        let mut ident_count = 0usize;
        for t in inner {
            match t.kind {
                TokKind::Ident => {
                    let w = t.text.as_str();
                    if KEYWORDS_PRIMITIVE.contains(&w)
                        || w == "struct"
                        || w == "union"
                        || w == "enum"
                        || w == "const"
                        || w == "volatile"
                        || w == "unsigned"
                        || w == "signed"
                    {
                        saw_kw = true;
                    } else if is_keyword(w) {
                        return false;
                    } else {
                        ident_count += 1;
                    }
                }
                TokKind::Punct => match t.text.as_str() {
                    "*" => saw_star = true,
                    "[" | "]" => {}
                    _ => return false,
                },
                TokKind::Number => {}
                _ => return false,
            }
        }
        let Some(next) = self.toks.get(close + 1) else { return false };
        let next_starts_expr = match next.kind {
            TokKind::Ident => !is_keyword(&next.text) || next.text == "sizeof",
            TokKind::Number | TokKind::Str | TokKind::CharLit => true,
            TokKind::Punct => {
                matches!(next.text.as_str(), "(" | "!" | "~" | "-" | "+" | "*" | "&" | "++" | "--")
            }
            _ => false,
        };
        if !next_starts_expr {
            return false;
        }
        if saw_kw || saw_star {
            return true;
        }
        // Bare single identifier: only cast before an obvious operand, so
        // `(x) - y` stays a subtraction.
        ident_count == 1
            && matches!(
                next.kind,
                TokKind::Ident | TokKind::Number | TokKind::Str | TokKind::CharLit
            )
            && (next.kind != TokKind::Ident || !is_keyword(&next.text))
    }

    fn parse_unary(&mut self) -> PResult<Pt> {
        let Some(t) = self.peek() else { return Err(self.fail()) };
        if t.kind == TokKind::Punct {
            match t.text.as_str() {
                "++" | "--" => {
                    let op = self.bump();
                    let operand = self.parse_unary()?;
                    let mut node =
                        Pt::labeled("update_expression", op.text.clone(), op.start, operand.end);
                    node.push(operand);
                    return Ok(node);
                }
                "!" | "~" | "-" | "+" | "*" | "&" => {
                    let op = self.bump();
                    let operand = self.parse_unary()?;
                    let mut node =
                        Pt::labeled("unary_expression", op.text.clone(), op.start, operand.end);
                    node.push(operand);
                    return Ok(node);
                }
                "(" if self.cast_ahead() => {
                    let open = self.bump();
                    let mut ty = Pt::new("type_descriptor", open.start, open.end);
                    while !self.at_punct(")") {
                        let t = self.bump();
                        ty.push(Pt::leaf_for(&t));
                    }
                    let close = self.bump();
                    ty.end = ty.end.max(close.end);
                    let operand = self.parse_unary()?;
                    let mut node = Pt::new("cast_expression", open.start, operand.end);
                    node.push(ty);
                    node.push(operand);
                    return Ok(node);
                }
                _ => {}
            }
        }
        if t.kind == TokKind::Ident && t.text == "sizeof" {
            let kw = self.bump();
            if self.at_punct("(") && self.cast_ahead_for_sizeof() {
                let open = self.bump();
                let mut ty = Pt::new("type_descriptor", open.start, open.end);
                while !self.at_punct(")") {
                    let t = self.bump();
                    ty.push(Pt::leaf_for(&t));
                }
                let close = self.bump();
                ty.end = ty.end.max(close.end);
                let mut node = Pt::new("sizeof_expression", kw.start, close.end);
                node.push(ty);
                return Ok(node);
            }
            let operand = self.parse_unary()?;
            let mut node = Pt::new("sizeof_expression", kw.start, operand.end);
            node.push(operand);
            return Ok(node);
        }
        self.parse_postfix()
    }

    // sizeof(T) takes a type for any type-shaped contents, including a lone
    // identifier: `sizeof(x)` on a value parses the same either way for our
    // purposes.
    fn cast_ahead_for_sizeof(&self) -> bool {
        let Ok(close) = self.find_matching_paren(self.pos) else { return false };
        if close == self.pos + 1 {
            return false;
        }
        let inner = &self.toks[self.pos + 1..close];
        inner.iter().all(|t| match t.kind {
            TokKind::Ident => !is_keyword(&t.text) || !KEYWORDS_STMT.contains(&t.text.as_str()),
            TokKind::Punct => matches!(t.text.as_str(), "*" | "[" | "]"),
            TokKind::Number => true,
            _ => false,
        })
    }

    fn parse_postfix(&mut self) -> PResult<Pt> {
        let mut expr = self.parse_primary()?;
        loop {
            let Some(t) = self.peek() else { return Ok(expr) };
            if t.kind != TokKind::Punct {
                return Ok(expr);
            }
            match t.text.as_str() {
                "(" => {
                    let open = self.bump();
                    let mut args = Pt::new("argument_list", open.start, open.end);
                    if !self.at_punct(")") {
                        loop {
                            let arg = self.parse_assignment()?;
                            args.push(arg);
                            if !self.eat_punct(",") {
                                break;
                            }
                        }
                    }
                    let close = self.expect_punct(")")?;
                    args.end = args.end.max(close.end);
                    let mut call = Pt::new("call_expression", expr.start, args.end);
                    call.push(expr);
                    call.push(args);
                    expr = call;
                }
                "[" => {
                    self.bump();
                    let index = self.parse_expression()?;
                    let close = self.expect_punct("]")?;
                    let mut node = Pt::new("subscript_expression", expr.start, close.end);
                    node.push(expr);
                    node.push(index);
                    expr = node;
                }
                "." | "->" => {
                    self.bump();
                    let field = match self.peek() {
                        Some(t) if t.kind == TokKind::Ident => self.bump(),
                        _ => return Err(self.fail()),
                    };
                    let mut node =
                        Pt::labeled("field_expression", field.text.clone(), expr.start, field.end);
                    node.push(expr);
                    expr = node;
                }
                "++" | "--" => {
                    let op = self.bump();
                    let mut node =
                        Pt::labeled("update_expression", op.text.clone(), expr.start, op.end);
                    node.push(expr);
                    expr = node;
                }
                _ => return Ok(expr),
            }
        }
    }

    fn parse_primary(&mut self) -> PResult<Pt> {
        let Some(t) = self.peek() else { return Err(self.fail()) };
        match t.kind {
            TokKind::Ident if !is_keyword(&t.text) => {
                let t = self.bump();
                Ok(Pt::labeled("identifier", t.text.clone(), t.start, t.end))
            }
            TokKind::Number => {
                let t = self.bump();
                Ok(Pt::labeled("number_literal", t.text.clone(), t.start, t.end))
            }
            TokKind::Str => {
                // Adjacent string literals concatenate.
                let first = self.bump();
                let mut text = first.text.clone();
                let mut end = first.end;
                while matches!(self.peek(), Some(t) if t.kind == TokKind::Str) {
                    let next = self.bump();
                    text.push_str(&next.text);
                    end = next.end;
                }
                Ok(Pt::labeled("string_literal", text, first.start, end))
            }
            TokKind::CharLit => {
                let t = self.bump();
                Ok(Pt::labeled("char_literal", t.text.clone(), t.start, t.end))
            }
            TokKind::Punct if t.text == "(" => {
                let open = self.bump();
                let inner = self.parse_expression()?;
                let close = self.expect_punct(")")?;
                let mut node = Pt::new("parenthesized_expression", open.start, close.end);
                node.push(inner);
                node.end = node.end.max(close.end);
                Ok(node)
            }
            TokKind::Punct if t.text == "{" => self.parse_initializer(),
            _ => Err(self.fail()),
        }
    }
}

// Turns a raw preprocessor line into a node: the directive word is the
// label, the rest of the line is re-lexed into leaves.
fn preproc_node(tok: &Token) -> Pt {
    let raw = &tok.text;
    let mut node = Pt::labeled("preproc", "#", tok.start, tok.end);
    // Directive word: `#` plus the first identifier, ignoring space between.
    let body = &raw[1..];
    let word_end = body
        .char_indices()
        .skip_while(|(_, c)| c.is_whitespace())
        .take_while(|(_, c)| c.is_alphanumeric() || *c == '_')
        .map(|(i, c)| i + c.len_utf8())
        .last();
    let rest_off = match word_end {
        Some(end) => {
            node.label = Some(format!("#{}", body[..end].trim_start()));
            1 + end
        }
        None => 1,
    };
    if let Ok(sub) = lex(&raw[rest_off..], true) {
        for t in sub {
            if t.kind == TokKind::Comment {
                continue;
            }
            let mut leaf = Pt::leaf_for(&t);
            leaf.start += tok.start + rest_off;
            leaf.end += tok.start + rest_off;
            node.push(leaf);
        }
    }
    node.start = tok.start;
    node.end = node.end.max(tok.end);
    node
}

fn emit(builder: &mut TreeBuilder, parent: crate::tree::NodeId, pt: &Pt) {
    let id = builder.push(parent, pt.node_type, pt.label.clone());
    builder.set_span(id, Span::new(pt.start, pt.end));
    for child in &pt.children {
        emit(builder, id, child);
    }
}

/// Grammar adapter for C and close relatives.
#[derive(Debug, Default, Clone, Copy)]
pub struct CLikeGrammar;

impl CLikeGrammar {
    pub fn new() -> Self {
        CLikeGrammar
    }
}

impl GrammarAdapter for CLikeGrammar {
    fn language(&self) -> &str {
        "c"
    }

    fn handles_path(&self, path: &str) -> bool {
        let ext = path.rsplit('.').next().unwrap_or("");
        matches!(
            ext.to_ascii_lowercase().as_str(),
            "c" | "h" | "cc" | "cpp" | "cxx" | "hpp" | "hh" | "inl" | "inc"
        )
    }

    fn parse(&self, text: &str) -> Result<SyntaxTree, ParseError> {
        let parser = Parser::new(text)?;
        let pt = parser.parse_translation_unit()?;
        let mut builder = TreeBuilder::new("translation_unit");
        builder.set_span(builder.root(), Span::new(0, text.len()));
        let root = builder.root();
        for child in &pt.children {
            emit(&mut builder, root, child);
        }
        let tree = builder.build();
        debug_assert_eq!(tree.validate(), Ok(()));
        Ok(tree)
    }

    fn lex(&self, text: &str, keep_comments: bool) -> Vec<String> {
        let toks = lex(text, true).unwrap_or_default();
        toks.into_iter()
            .filter(|t| keep_comments || t.kind != TokKind::Comment)
            .map(|t| {
                if t.kind == TokKind::Preproc {
                    // Normalize internal spacing and continuations so only
                    // token-level changes matter.
                    t.text.split_whitespace().collect::<Vec<_>>().join(" ")
                } else {
                    t.text
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> SyntaxTree {
        CLikeGrammar::new().parse(text).unwrap()
    }

    fn types_of(tree: &SyntaxTree, parent: crate::tree::NodeId) -> Vec<String> {
        tree.children(parent)
            .iter()
            .map(|&c| tree.node_type(c).to_string())
            .collect()
    }

    #[test]
    fn empty_input_gives_bare_root() {
        let t = parse("");
        assert_eq!(t.len(), 1);
        assert_eq!(t.node_type(t.root()), "translation_unit");
        assert_eq!(t.span(t.root()), Span::new(0, 0));
    }

    #[test]
    fn simple_declaration_shape() {
        let t = parse("int x;");
        let decls = t.children(t.root());
        assert_eq!(decls.len(), 1);
        let decl = decls[0];
        assert_eq!(t.node_type(decl), "declaration");
        let kids = t.children(decl);
        assert_eq!(t.node_type(kids[0]), "primitive_type");
        assert_eq!(t.node_type(kids[1]), "identifier");
        assert_eq!(t.label(kids[1]), Some("x"));
    }

    #[test]
    fn function_definition_has_name_params_body() {
        let t = parse("static int add(int a, int b) { return a + b; }");
        let f = t.children(t.root())[0];
        assert_eq!(t.node_type(f), "function_definition");
        assert_eq!(t.label(f), Some("add"));
        let kinds = types_of(&t, f);
        assert!(kinds.contains(&"parameter_list".to_string()));
        assert!(kinds.contains(&"compound_statement".to_string()));
        let params = t
            .children(f)
            .iter()
            .copied()
            .find(|&c| t.node_type(c) == "parameter_list")
            .unwrap();
        assert_eq!(t.children(params).len(), 2);
        let first = t.children(params)[0];
        assert_eq!(t.label(first), Some("a"));
        t.validate().unwrap();
    }

    #[test]
    fn statements_and_expressions_nest() {
        let src = r#"
void f(char *p, int n) {
    if (n > 0 && p != 0) {
        for (int i = 0; i < n; i++) {
            p[i] = (char)(i & 0xff);
        }
    } else {
        do_thing(p, "msg", 'x');
    }
    while (n--) ;
    return;
}
"#;
        let t = parse(src);
        t.validate().unwrap();
        let names: Vec<_> = t
            .preorder()
            .into_iter()
            .map(|id| t.node_type(id).to_string())
            .collect();
        for expected in [
            "if_statement",
            "for_statement",
            "subscript_expression",
            "cast_expression",
            "call_expression",
            "string_literal",
            "char_literal",
            "while_statement",
            "update_expression",
            "return_statement",
        ] {
            assert!(names.iter().any(|n| n == expected), "missing {expected}");
        }
        assert!(!names.iter().any(|n| n == "error"), "unexpected error node");
    }

    #[test]
    fn preproc_lines_become_nodes() {
        let t = parse("#include <stdio.h>\n#define MAX 10\nint x;");
        let kids = t.children(t.root());
        assert_eq!(t.node_type(kids[0]), "preproc");
        assert_eq!(t.label(kids[0]), Some("#include"));
        assert_eq!(t.node_type(kids[1]), "preproc");
        assert_eq!(t.label(kids[1]), Some("#define"));
        assert_eq!(t.node_type(kids[2]), "declaration");
    }

    #[test]
    fn struct_definition_fields() {
        let t = parse("struct point { int x; int y; };");
        let decl = t.children(t.root())[0];
        assert_eq!(t.node_type(decl), "declaration");
        let spec = t.children(decl)[0];
        assert_eq!(t.node_type(spec), "struct_specifier");
        assert_eq!(t.label(spec), Some("point"));
        assert_eq!(t.children(spec).len(), 2);
    }

    #[test]
    fn garbage_statement_recovers_with_error_node() {
        let t = parse("void f(void) { int x = 1; @@ nonsense $$; x = 2; }");
        t.validate().unwrap();
        let names: Vec<_> = t
            .preorder()
            .into_iter()
            .map(|id| t.node_type(id).to_string())
            .collect();
        assert!(names.iter().any(|n| n == "error"));
        // Recovery must not eat the following statement.
        let assigns = names.iter().filter(|n| *n == "assignment_expression").count();
        assert!(assigns >= 1, "statement after error node was lost");
    }

    #[test]
    fn unbalanced_braces_fail() {
        let err = CLikeGrammar::new().parse("void f() { if (x) {").unwrap_err();
        assert!(err.offset <= "void f() { if (x) {".len());
        CLikeGrammar::new()
            .parse("const char *s = \"unterminated;")
            .unwrap_err();
    }

    #[test]
    fn lexemes_ignore_whitespace_but_keep_comments_on_request() {
        let g = CLikeGrammar::new();
        let a = g.lex("int  main( void )\n{ return 0; }", true);
        let b = g.lex("int main(void) { return 0; }", true);
        assert_eq!(a, b);
        let with = g.lex("x = 1; /* note */", true);
        let without = g.lex("x = 1; /* note */", false);
        assert_eq!(with.len(), without.len() + 1);
        assert!(with.iter().any(|t| t.contains("note")));
    }

    #[test]
    fn preproc_lexeme_normalizes_spacing() {
        let g = CLikeGrammar::new();
        let a = g.lex("#define   MAX  10", false);
        let b = g.lex("#define MAX 10", false);
        assert_eq!(a, b);
    }

    #[test]
    fn cast_heuristic_spares_subtraction() {
        let t = parse("void f() { a = (x) - y; b = (int) - y; }");
        let kinds: Vec<_> = t
            .preorder()
            .into_iter()
            .map(|id| t.node_type(id).to_string())
            .collect();
        let casts = kinds.iter().filter(|k| *k == "cast_expression").count();
        assert_eq!(casts, 1);
    }

    #[test]
    fn field_and_arrow_access() {
        let t = parse("int g(struct s *p) { return p->len + p->buf.size; }");
        let fields: Vec<_> = t
            .preorder()
            .into_iter()
            .filter(|&id| t.node_type(id) == "field_expression")
            .filter_map(|id| t.label(id).map(str::to_string))
            .collect();
        assert_eq!(fields.len(), 3);
        assert!(fields.contains(&"len".to_string()));
        assert!(fields.contains(&"size".to_string()));
    }

    #[test]
    fn prototype_is_declaration_not_definition() {
        let t = parse("int add(int a, int b);");
        let decl = t.children(t.root())[0];
        assert_eq!(t.node_type(decl), "declaration");
        let kinds = types_of(&t, decl);
        assert!(kinds.contains(&"function_declarator".to_string()));
    }

    #[test]
    fn spans_are_real_byte_offsets() {
        let src = "int x;\nint y;";
        let t = parse(src);
        let second = t.children(t.root())[1];
        let span = t.span(second);
        assert_eq!(&src[span.start..span.end], "int y;");
    }
}
