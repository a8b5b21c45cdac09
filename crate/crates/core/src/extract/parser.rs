//! Recursive-descent parser for the Java subset the extractor needs.
//!
//! The grammar is deliberately loose. A statement that cannot be parsed is
//! skipped up to the next `;` or balanced block and reported as a warning.
//! Only lexical errors and blocks left open at end of file are fatal.

use super::ast::*;
use super::lexer::{lex, TokKind, Token};
use super::ParseError;

const KEYWORDS: &[&str] = &[
    "abstract", "assert", "boolean", "break", "byte", "case", "catch", "char", "class", "const",
    "continue", "default", "do", "double", "else", "enum", "extends", "final", "finally", "float",
    "for", "goto", "if", "implements", "import", "instanceof", "int", "interface", "long", "native",
    "new", "package", "private", "protected", "public", "return", "short", "static", "strictfp",
    "super", "switch", "synchronized", "this", "throw", "throws", "transient", "try", "void",
    "volatile", "while", "true", "false", "null",
];

const PRIMITIVES: &[&str] = &["boolean", "byte", "char", "short", "int", "long", "float", "double", "void"];

const MODIFIERS: &[&str] = &[
    "public", "protected", "private", "static", "final", "abstract", "native", "synchronized",
    "transient", "volatile", "strictfp", "default", "sealed",
];

const ASSIGN_OPS: &[&str] = &["=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<="];

fn is_keyword(w: &str) -> bool {
    KEYWORDS.contains(&w)
}

fn is_primitive(w: &str) -> bool {
    PRIMITIVES.contains(&w)
}

enum Fail {
    /// Syntax the parser does not understand; the caller may skip it.
    Soft { line: u32, message: String },
    Fatal(ParseError),
}

type PResult<T> = Result<T, Fail>;

pub fn parse(text: &str) -> Result<CompilationUnit, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0, warnings: Vec::new() };
    let mut unit = p.unit().map_err(|f| match f {
        Fail::Fatal(e) => e,
        Fail::Soft { line, message } => ParseError { line, message },
    })?;
    unit.warnings = p.warnings;
    Ok(unit)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    warnings: Vec<ParseWarning>,
}

impl Parser {
    // ---- token helpers ----

    fn tok(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn peek(&self, n: usize) -> &Token {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)]
    }

    fn line(&self) -> u32 {
        self.tok().line
    }

    fn at_eof(&self) -> bool {
        matches!(self.tok().kind, TokKind::Eof)
    }

    fn bump(&mut self) -> &Token {
        let t = &self.toks[self.pos];
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn at(&self, op: &str) -> bool {
        self.tok().is_op(op)
    }

    fn at_word(&self, w: &str) -> bool {
        self.tok().is_ident(w)
    }

    fn eat(&mut self, op: &str) -> bool {
        if self.at(op) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_word(&mut self, w: &str) -> bool {
        if self.at_word(w) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn soft<T>(&self, message: impl Into<String>) -> PResult<T> {
        if self.at_eof() {
            return Err(Fail::Fatal(ParseError { line: self.line(), message: "unexpected end of file".into() }));
        }
        Err(Fail::Soft { line: self.line(), message: message.into() })
    }

    fn expect(&mut self, op: &str) -> PResult<()> {
        if self.eat(op) {
            Ok(())
        } else {
            self.soft(format!("expected '{op}', found {}", self.describe()))
        }
    }

    fn describe(&self) -> String {
        match &self.tok().kind {
            TokKind::Ident(w) => format!("'{w}'"),
            TokKind::Op(o) => format!("'{o}'"),
            TokKind::Int(_) | TokKind::Float => "number".into(),
            TokKind::Str(_) => "string".into(),
            TokKind::Char(_) => "char".into(),
            TokKind::Eof => "end of file".into(),
        }
    }

    fn name(&mut self) -> PResult<String> {
        match &self.tok().kind {
            TokKind::Ident(w) if !is_keyword(w) => {
                let w = w.clone();
                self.bump();
                Ok(w)
            }
            _ => self.soft(format!("expected identifier, found {}", self.describe())),
        }
    }

    fn at_name(&self) -> bool {
        matches!(&self.tok().kind, TokKind::Ident(w) if !is_keyword(w))
    }

    fn prev_end(&self) -> usize {
        self.toks[self.pos.saturating_sub(1)].end
    }

    fn adjacent(&self, a: usize, b: usize) -> bool {
        self.peek(a).end == self.peek(b).start
    }

    fn warn(&mut self, line: u32, message: String) {
        self.warnings.push(ParseWarning { line, message });
    }

    /// Skips a balanced `open ... close` group starting at the current token.
    fn skip_balanced(&mut self, open: &str, close: &str) -> PResult<()> {
        let line = self.line();
        let mut depth = 0usize;
        loop {
            if self.at_eof() {
                return Err(Fail::Fatal(ParseError { line, message: format!("unclosed '{open}'") }));
            }
            if self.at(open) {
                depth += 1;
            } else if self.at(close) {
                depth -= 1;
                if depth == 0 {
                    self.bump();
                    return Ok(());
                }
            }
            self.bump();
        }
    }

    /// Index of the token closing the group opened at `self.pos + offset`.
    fn matching(&self, offset: usize, open: &str, close: &str) -> Option<usize> {
        let mut depth = 0usize;
        let mut i = self.pos + offset;
        while i < self.toks.len() {
            let t = &self.toks[i];
            if matches!(t.kind, TokKind::Eof) {
                return None;
            }
            if t.is_op(open) {
                depth += 1;
            } else if t.is_op(close) {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            i += 1;
        }
        None
    }

    /// Skips to the end of the current statement or member.
    fn skip_statement(&mut self) -> PResult<()> {
        let line = self.line();
        let mut depth = 0usize;
        let start = self.pos;
        loop {
            if self.at_eof() {
                if depth > 0 {
                    return Err(Fail::Fatal(ParseError { line, message: "unbalanced brackets".into() }));
                }
                return Ok(());
            }
            let t = self.tok();
            if t.is_op("(") || t.is_op("[") || t.is_op("{") {
                depth += 1;
            } else if t.is_op(")") || t.is_op("]") {
                depth = depth.saturating_sub(1);
            } else if t.is_op("}") {
                if depth == 0 {
                    if self.pos == start {
                        self.bump();
                    }
                    return Ok(());
                }
                depth -= 1;
                if depth == 0 {
                    self.bump();
                    self.eat(";");
                    return Ok(());
                }
            } else if t.is_op(";") && depth == 0 {
                self.bump();
                return Ok(());
            }
            self.bump();
        }
    }

    fn skip_annotation(&mut self) -> PResult<()> {
        self.expect("@")?;
        self.name()?;
        while self.at(".") && self.peek(1).ident().is_some() {
            self.bump();
            self.bump();
        }
        if self.at("(") {
            self.skip_balanced("(", ")")?;
        }
        Ok(())
    }

    fn skip_modifiers(&mut self) -> PResult<()> {
        loop {
            if self.at("@") && !self.peek(1).is_ident("interface") {
                self.skip_annotation()?;
            } else if MODIFIERS.iter().any(|m| self.at_word(m)) {
                // `default` as a switch label is handled before we get here
                self.bump();
            } else if self.at_word("non") && self.peek(1).is_op("-") && self.peek(2).is_ident("sealed") {
                self.pos += 3;
            } else {
                return Ok(());
            }
        }
    }

    fn at_type_decl_keyword(&self) -> bool {
        self.at_word("class")
            || self.at_word("interface")
            || self.at_word("enum")
            || (self.at("@") && self.peek(1).is_ident("interface"))
            || (self.at_word("record") && self.peek(1).ident().is_some() && !self.peek(2).is_op("="))
    }

    // ---- compilation unit ----

    fn unit(&mut self) -> PResult<CompilationUnit> {
        let mut unit = CompilationUnit::default();
        while !self.at_eof() {
            if self.eat(";") {
                continue;
            }
            if self.at("}") {
                let line = self.line();
                self.warn(line, "unmatched '}'".into());
                self.bump();
                continue;
            }
            if self.at_word("package") {
                self.bump();
                match self.qualified_name() {
                    Ok(name) if self.at(";") => {
                        self.bump();
                        unit.package = Some(name);
                    }
                    Err(Fail::Fatal(e)) => return Err(Fail::Fatal(e)),
                    _ => {
                        let line = self.line();
                        self.warn(line, "malformed package declaration".into());
                        self.skip_statement()?;
                    }
                }
                continue;
            }
            if self.at_word("import") {
                self.bump();
                let mut path = String::new();
                while !self.at(";") && !self.at_eof() {
                    let t = self.bump();
                    match &t.kind {
                        TokKind::Ident(w) if w != "static" => path.push_str(w),
                        TokKind::Op(o) if *o == "." || *o == "*" => path.push_str(o),
                        _ => {}
                    }
                }
                self.eat(";");
                unit.imports.push(path);
                continue;
            }
            self.top_item(&mut unit)?;
        }
        Ok(unit)
    }

    fn top_item(&mut self, unit: &mut CompilationUnit) -> PResult<()> {
        let start = self.pos;
        let line = self.line();
        let attempt: PResult<bool> = (|| {
            self.skip_modifiers()?;
            if self.at_type_decl_keyword() {
                unit.types.push(self.type_decl()?);
                return Ok(true);
            }
            if self.looks_like_method_header() {
                let m = self.method_decl()?;
                unit.methods.push(m);
                return Ok(true);
            }
            Ok(false)
        })();
        match attempt {
            Ok(true) => Ok(()),
            Ok(false) => {
                self.pos = start;
                let stmt = self.statement_recovering()?;
                unit.statements.push(stmt);
                Ok(())
            }
            Err(Fail::Fatal(e)) => Err(Fail::Fatal(e)),
            Err(Fail::Soft { message, .. }) => {
                self.pos = start;
                self.warn(line, message);
                self.skip_statement()?;
                Ok(())
            }
        }
    }

    /// After modifiers: `[<T>] Type name (` ... `) {|throws|;` or `Name (` ... `) {`.
    fn looks_like_method_header(&mut self) -> bool {
        let save = self.pos;
        let result = (|| -> PResult<bool> {
            if self.at("<") {
                self.skip_balanced("<", ">")?;
            }
            let typed = if self.at_name() && self.peek(1).is_op("(") {
                false
            } else {
                self.type_ref()?;
                if !self.at_name() || !self.peek(1).is_op("(") {
                    return Ok(false);
                }
                true
            };
            self.bump();
            let Some(close) = self.matching(0, "(", ")") else { return Ok(false) };
            let after = &self.toks[close + 1];
            Ok(after.is_op("{") || after.is_ident("throws") || (typed && (after.is_op(";") || after.is_op("["))))
        })()
        .unwrap_or(false);
        self.pos = save;
        result
    }

    fn qualified_name(&mut self) -> PResult<String> {
        let mut name = self.name()?;
        while self.at(".") && self.peek(1).ident().is_some_and(|w| !is_keyword(w)) {
            self.bump();
            name.push('.');
            name.push_str(&self.name()?);
        }
        Ok(name)
    }

    // ---- types ----

    fn type_ref(&mut self) -> PResult<TypeRef> {
        let mut ty = self.type_no_dims()?;
        ty.dims += self.dims();
        if self.at("...") {
            self.bump();
            ty.dims += 1;
        }
        Ok(ty)
    }

    fn dims(&mut self) -> usize {
        let mut n = 0;
        loop {
            while self.at("@") {
                if self.skip_annotation().is_err() {
                    return n;
                }
            }
            if self.at("[") && self.peek(1).is_op("]") {
                self.bump();
                self.bump();
                n += 1;
            } else {
                return n;
            }
        }
    }

    fn type_no_dims(&mut self) -> PResult<TypeRef> {
        while self.at("@") {
            self.skip_annotation()?;
        }
        if let Some(w) = self.tok().ident().filter(|w| is_primitive(w)) {
            let ty = TypeRef::simple(w);
            self.bump();
            return Ok(ty);
        }
        if self.at_word("var") && self.peek(1).ident().is_some() {
            self.bump();
            return Ok(TypeRef::simple("var"));
        }
        let mut name = self.name()?;
        let mut args = self.type_args()?;
        while self.at(".") && self.peek(1).ident().is_some_and(|w| !is_keyword(w)) {
            self.bump();
            name.push('.');
            name.push_str(&self.name()?);
            let more = self.type_args()?;
            if !more.is_empty() {
                args = more;
            }
        }
        Ok(TypeRef { name, args, dims: 0 })
    }

    fn type_args(&mut self) -> PResult<Vec<TypeRef>> {
        let mut args = Vec::new();
        if !self.at("<") {
            return Ok(args);
        }
        self.bump();
        if self.eat(">") {
            return Ok(args); // diamond
        }
        loop {
            while self.at("@") {
                self.skip_annotation()?;
            }
            if self.eat("?") {
                if self.eat_word("extends") || self.eat_word("super") {
                    args.push(self.type_ref()?);
                } else {
                    args.push(TypeRef::simple("?"));
                }
            } else {
                args.push(self.type_ref()?);
            }
            while self.eat("&") {
                self.type_ref()?;
            }
            if self.eat(",") {
                continue;
            }
            self.expect(">")?;
            return Ok(args);
        }
    }

    // ---- declarations ----

    fn type_decl(&mut self) -> PResult<TypeDecl> {
        let line = self.line();
        let kind = if self.eat_word("class") {
            TypeKind::Class
        } else if self.eat_word("interface") {
            TypeKind::Interface
        } else if self.eat_word("enum") {
            TypeKind::Enum
        } else if self.eat_word("record") {
            TypeKind::Record
        } else {
            self.expect("@")?;
            self.bump();
            TypeKind::Annotation
        };
        let name = self.name()?;
        let mut decl = TypeDecl {
            name,
            kind,
            line,
            supertypes: Vec::new(),
            fields: Vec::new(),
            methods: Vec::new(),
            nested: Vec::new(),
        };
        if self.at("<") {
            self.skip_balanced("<", ">")?;
        }
        if kind == TypeKind::Record && self.at("(") {
            for p in self.params()? {
                decl.fields.push(FieldDecl { ty: p.ty, name: p.name, init: None, line });
            }
        }
        loop {
            if self.eat_word("extends") || self.eat_word("implements") || self.eat_word("permits") {
                loop {
                    decl.supertypes.push(self.type_ref()?);
                    if !self.eat(",") {
                        break;
                    }
                }
            } else {
                break;
            }
        }
        let open_line = self.line();
        self.expect("{")?;
        if kind == TypeKind::Enum {
            self.skip_enum_constants(open_line)?;
        }
        self.class_body(&mut decl, open_line)?;
        Ok(decl)
    }

    fn skip_enum_constants(&mut self, open_line: u32) -> PResult<()> {
        loop {
            if self.at_eof() {
                return Err(Fail::Fatal(ParseError { line: open_line, message: "unclosed enum body".into() }));
            }
            if self.at("}") {
                return Ok(());
            }
            if self.eat(";") {
                return Ok(());
            }
            if self.at("(") {
                self.skip_balanced("(", ")")?;
            } else if self.at("{") {
                self.skip_balanced("{", "}")?;
            } else {
                self.bump();
            }
        }
    }

    /// Parses members up to and including the closing `}`.
    fn class_body(&mut self, decl: &mut TypeDecl, open_line: u32) -> PResult<()> {
        loop {
            if self.at_eof() {
                return Err(Fail::Fatal(ParseError {
                    line: open_line,
                    message: format!("unclosed body of {}", decl.name),
                }));
            }
            if self.eat("}") {
                return Ok(());
            }
            if self.eat(";") {
                continue;
            }
            let start = self.pos;
            let line = self.line();
            match self.member(decl) {
                Ok(()) => {}
                Err(Fail::Fatal(e)) => return Err(Fail::Fatal(e)),
                Err(Fail::Soft { message, .. }) => {
                    self.pos = start;
                    self.warn(line, format!("skipped member: {message}"));
                    self.skip_statement()?;
                }
            }
        }
    }

    fn member(&mut self, decl: &mut TypeDecl) -> PResult<()> {
        let line = self.line();
        if self.at("{") || (self.at_word("static") && self.peek(1).is_op("{")) {
            self.eat_word("static");
            let body = self.block()?;
            decl.methods.push(MethodDecl {
                name: "<initializer>".into(),
                return_type: None,
                params: Vec::new(),
                body: Some(body),
                line,
            });
            return Ok(());
        }
        self.skip_modifiers()?;
        if self.at_type_decl_keyword() {
            let nested = self.type_decl()?;
            decl.nested.push(nested);
            return Ok(());
        }
        if self.at("<") {
            self.skip_balanced("<", ">")?;
        }
        if self.at_name() && self.peek(1).is_op("(") {
            let name = self.name()?;
            let m = self.method_rest(name, None, line)?;
            decl.methods.push(m);
            return Ok(());
        }
        // compact record constructor
        if decl.kind == TypeKind::Record && self.at_name() && self.peek(1).is_op("{") {
            let name = self.name()?;
            let body = self.block()?;
            decl.methods.push(MethodDecl { name, return_type: None, params: Vec::new(), body: Some(body), line });
            return Ok(());
        }
        let ty = self.type_ref()?;
        let name_line = self.line();
        let name = self.name()?;
        if self.at("(") {
            let m = self.method_rest(name, Some(ty), name_line)?;
            decl.methods.push(m);
            return Ok(());
        }
        for d in self.declarators(name, name_line)? {
            let mut fty = ty.clone();
            fty.dims += d.dims;
            decl.fields.push(FieldDecl { ty: fty, name: d.name, init: d.init, line: d.line });
        }
        self.expect(";")
    }

    fn method_decl(&mut self) -> PResult<MethodDecl> {
        let line = self.line();
        if self.at("<") {
            self.skip_balanced("<", ">")?;
        }
        if self.at_name() && self.peek(1).is_op("(") {
            let name = self.name()?;
            return self.method_rest(name, None, line);
        }
        let ty = self.type_ref()?;
        let line = self.line();
        let name = self.name()?;
        self.method_rest(name, Some(ty), line)
    }

    fn method_rest(&mut self, name: String, return_type: Option<TypeRef>, line: u32) -> PResult<MethodDecl> {
        let params = self.params()?;
        self.dims();
        if self.eat_word("throws") {
            loop {
                self.type_ref()?;
                if !self.eat(",") {
                    break;
                }
            }
        }
        let body = if self.at("{") {
            Some(self.block()?)
        } else if self.eat_word("default") {
            self.expr()?;
            self.expect(";")?;
            None
        } else {
            self.expect(";")?;
            None
        };
        Ok(MethodDecl { name, return_type, params, body, line })
    }

    fn params(&mut self) -> PResult<Vec<Param>> {
        self.expect("(")?;
        let mut params = Vec::new();
        if self.eat(")") {
            return Ok(params);
        }
        loop {
            self.skip_modifiers()?;
            let mut ty = self.type_ref()?;
            if self.at_word("this") {
                self.bump();
            } else {
                let name = self.name()?;
                ty.dims += self.dims();
                params.push(Param { ty, name });
            }
            if self.eat(",") {
                continue;
            }
            self.expect(")")?;
            return Ok(params);
        }
    }

    fn declarators(&mut self, first: String, first_line: u32) -> PResult<Vec<Declarator>> {
        let mut out = Vec::new();
        let (mut name, mut line) = (first, first_line);
        loop {
            let dims = self.dims();
            let init = if self.eat("=") {
                Some(if self.at("{") { self.array_init()? } else { self.expr()? })
            } else {
                None
            };
            out.push(Declarator { name, dims, init, line });
            if !self.eat(",") {
                return Ok(out);
            }
            line = self.line();
            name = self.name()?;
        }
    }

    // ---- statements ----

    fn block(&mut self) -> PResult<Vec<Stmt>> {
        let open_line = self.line();
        self.expect("{")?;
        let mut body = Vec::new();
        loop {
            if self.at_eof() {
                return Err(Fail::Fatal(ParseError { line: open_line, message: "unclosed block".into() }));
            }
            if self.eat("}") {
                return Ok(body);
            }
            body.push(self.statement_recovering()?);
        }
    }

    fn recover_statement(&mut self) -> PResult<Stmt> {
        let line = self.line();
        self.skip_statement()?;
        Ok(Stmt::Skipped { line })
    }

    fn statement_recovering(&mut self) -> PResult<Stmt> {
        let start = self.pos;
        let line = self.line();
        match self.statement() {
            Ok(s) => Ok(s),
            Err(Fail::Fatal(e)) => Err(Fail::Fatal(e)),
            Err(Fail::Soft { message, .. }) => {
                self.pos = start;
                self.warn(line, format!("skipped statement: {message}"));
                self.recover_statement()
            }
        }
    }

    fn statement(&mut self) -> PResult<Stmt> {
        let line = self.line();
        if self.at("{") {
            return Ok(Stmt::Block { body: self.block()?, line });
        }
        if self.eat(";") {
            return Ok(Stmt::Empty { line });
        }
        let word = self.tok().ident().map(str::to_string);
        match word.as_deref() {
            Some("if") => {
                self.bump();
                let cond = self.paren_expr()?;
                let then = Box::new(self.statement_recovering()?);
                let otherwise =
                    if self.eat_word("else") { Some(Box::new(self.statement_recovering()?)) } else { None };
                Ok(Stmt::If { cond, then, otherwise, line })
            }
            Some("while") => {
                self.bump();
                let cond = self.paren_expr()?;
                let body = Box::new(self.statement_recovering()?);
                Ok(Stmt::While { cond, body, line })
            }
            Some("do") => {
                self.bump();
                let body = Box::new(self.statement_recovering()?);
                if !self.eat_word("while") {
                    return self.soft("expected 'while' after do body");
                }
                let cond = self.paren_expr()?;
                self.expect(";")?;
                Ok(Stmt::DoWhile { body, cond, line })
            }
            Some("for") => self.for_stmt(),
            Some("try") => self.try_stmt(),
            Some("switch") if self.peek(1).is_op("(") => self.switch_stmt(),
            Some("return") => {
                self.bump();
                let value = if self.at(";") { None } else { Some(self.expr()?) };
                self.expect(";")?;
                Ok(Stmt::Return { value, line })
            }
            Some("yield") if !self.peek(1).is_op("=") && !self.peek(1).is_op("(") && !self.peek(1).is_op(".") => {
                self.bump();
                let value = Some(self.expr()?);
                self.expect(";")?;
                Ok(Stmt::Return { value, line })
            }
            Some("throw") => {
                self.bump();
                let value = self.expr()?;
                self.expect(";")?;
                Ok(Stmt::Throw { value, line })
            }
            Some("break") | Some("continue") => {
                self.bump();
                if self.at_name() {
                    self.bump();
                }
                self.expect(";")?;
                Ok(Stmt::Jump { line })
            }
            Some("synchronized") if self.peek(1).is_op("(") => {
                self.bump();
                let lock = self.paren_expr()?;
                let body = self.block()?;
                Ok(Stmt::Synchronized { lock, body, line })
            }
            Some("assert") => self.soft("unsupported statement 'assert'"),
            Some(w) if !is_keyword(w) && self.peek(1).is_op(":") => {
                let label = w.to_string();
                self.bump();
                self.bump();
                let body = Box::new(self.statement_recovering()?);
                Ok(Stmt::Labeled { label, body, line })
            }
            _ => {
                let save = self.pos;
                self.skip_modifiers()?;
                if self.at_type_decl_keyword() {
                    let decl = self.type_decl()?;
                    return Ok(Stmt::LocalType { decl, line });
                }
                if let Some(stmt) = self.try_local_var()? {
                    self.expect(";")?;
                    return Ok(stmt);
                }
                self.pos = save;
                let expr = self.expr()?;
                self.expect(";")?;
                Ok(Stmt::Expr { expr, line })
            }
        }
    }

    /// Parses `Type name [= init], ...` without the trailing `;` if the
    /// tokens have that shape; otherwise rewinds and returns `None`.
    fn try_local_var(&mut self) -> PResult<Option<Stmt>> {
        let save = self.pos;
        let line = self.line();
        let ty = match self.type_ref() {
            Ok(ty) => ty,
            Err(Fail::Fatal(e)) => return Err(Fail::Fatal(e)),
            Err(Fail::Soft { .. }) => {
                self.pos = save;
                return Ok(None);
            }
        };
        let follows = self.peek(1);
        let shape = self.at_name()
            && (follows.is_op("=") || follows.is_op(";") || follows.is_op(",") || follows.is_op("[") || follows.is_op(":"));
        if !shape {
            self.pos = save;
            return Ok(None);
        }
        let name_line = self.line();
        let name = self.name()?;
        if self.at(":") {
            // for-each header, handled by the caller
            return Ok(Some(Stmt::LocalVar {
                ty,
                vars: vec![Declarator { name, dims: 0, init: None, line: name_line }],
                line,
            }));
        }
        let vars = self.declarators(name, name_line)?;
        Ok(Some(Stmt::LocalVar { ty, vars, line }))
    }

    fn paren_expr(&mut self) -> PResult<Expr> {
        self.expect("(")?;
        let e = self.expr()?;
        self.expect(")")?;
        Ok(e)
    }

    fn for_stmt(&mut self) -> PResult<Stmt> {
        let line = self.line();
        self.bump();
        self.expect("(")?;
        self.skip_modifiers()?;
        let mut init = Vec::new();
        if let Some(decl) = self.try_local_var()? {
            if self.eat(":") {
                let Stmt::LocalVar { ty, mut vars, .. } = decl else { unreachable!() };
                let name = vars.remove(0).name;
                let iterable = self.expr()?;
                self.expect(")")?;
                let body = Box::new(self.statement_recovering()?);
                return Ok(Stmt::ForEach { ty, name, iterable, body, line });
            }
            init.push(decl);
        } else if !self.at(";") {
            loop {
                let e = self.expr()?;
                init.push(Stmt::Expr { line: e.line, expr: e });
                if !self.eat(",") {
                    break;
                }
            }
        }
        self.expect(";")?;
        let cond = if self.at(";") { None } else { Some(self.expr()?) };
        self.expect(";")?;
        let mut update = Vec::new();
        if !self.at(")") {
            loop {
                update.push(self.expr()?);
                if !self.eat(",") {
                    break;
                }
            }
        }
        self.expect(")")?;
        let body = Box::new(self.statement_recovering()?);
        Ok(Stmt::For { init, cond, update, body, line })
    }

    fn try_stmt(&mut self) -> PResult<Stmt> {
        let line = self.line();
        self.bump();
        let mut resources = Vec::new();
        if self.eat("(") {
            while !self.eat(")") {
                self.skip_modifiers()?;
                if let Some(decl) = self.try_local_var()? {
                    resources.push(decl);
                } else {
                    let e = self.expr()?;
                    resources.push(Stmt::Expr { line: e.line, expr: e });
                }
                if !self.eat(";") && !self.at(")") {
                    return self.soft("expected ';' or ')' in try resources");
                }
            }
        }
        let body = self.block()?;
        let mut catches = Vec::new();
        while self.eat_word("catch") {
            self.expect("(")?;
            self.skip_modifiers()?;
            let mut types = vec![self.type_ref()?];
            while self.eat("|") {
                types.push(self.type_ref()?);
            }
            let name = self.name()?;
            self.expect(")")?;
            let body = self.block()?;
            catches.push(CatchClause { types, name, body });
        }
        let finally = if self.eat_word("finally") { Some(self.block()?) } else { None };
        if catches.is_empty() && finally.is_none() && resources.is_empty() {
            return self.soft("try without catch or finally");
        }
        Ok(Stmt::Try { resources, body, catches, finally, line })
    }

    fn switch_stmt(&mut self) -> PResult<Stmt> {
        let line = self.line();
        self.bump();
        let scrutinee = self.paren_expr()?;
        let open_line = self.line();
        self.expect("{")?;
        let mut cases: Vec<SwitchCase> = Vec::new();
        loop {
            if self.at_eof() {
                return Err(Fail::Fatal(ParseError { line: open_line, message: "unclosed switch".into() }));
            }
            if self.eat("}") {
                break;
            }
            if self.at_word("case") || self.at_word("default") {
                let mut labels = Vec::new();
                if self.eat_word("case") {
                    loop {
                        labels.push(self.ternary()?);
                        if !self.eat(",") {
                            break;
                        }
                    }
                } else {
                    self.bump();
                }
                if self.eat("->") {
                    let body = if self.at("{") {
                        vec![Stmt::Block { line: self.line(), body: self.block()? }]
                    } else {
                        vec![self.statement_recovering()?]
                    };
                    cases.push(SwitchCase { labels, body });
                } else {
                    self.expect(":")?;
                    cases.push(SwitchCase { labels, body: Vec::new() });
                }
                continue;
            }
            let stmt = self.statement_recovering()?;
            match cases.last_mut() {
                Some(c) => c.body.push(stmt),
                None => return self.soft("statement before first case label"),
            }
        }
        Ok(Stmt::Switch { scrutinee, cases, line })
    }

    // ---- expressions ----

    fn finish(&self, kind: ExprKind, start: usize, line: u32) -> Expr {
        Expr { kind, span: Span { start, end: self.prev_end() }, line }
    }

    pub(super) fn expr(&mut self) -> PResult<Expr> {
        if let Some(lambda) = self.try_lambda()? {
            return Ok(lambda);
        }
        let start = self.tok().start;
        let line = self.line();
        let lhs = self.ternary()?;
        let op = if let Some(op) = ASSIGN_OPS.iter().find(|op| self.at(op)) {
            self.bump();
            Some(op.to_string())
        } else if self.at(">") && self.peek(1).is_op(">") && self.adjacent(0, 1) {
            // >>= and >>>=
            let n = if self.peek(2).is_op(">") && self.adjacent(1, 2) { 3 } else { 2 };
            if self.peek(n).is_op("=") && self.adjacent(n - 1, n) {
                self.pos += n + 1;
                Some(">".repeat(n) + "=")
            } else {
                None
            }
        } else {
            None
        };
        match op {
            Some(op) => {
                let value = if self.at("{") { self.array_init()? } else { self.expr()? };
                Ok(self.finish(
                    ExprKind::Assign { target: Box::new(lhs), op, value: Box::new(value) },
                    start,
                    line,
                ))
            }
            None => Ok(lhs),
        }
    }

    fn try_lambda(&mut self) -> PResult<Option<Expr>> {
        let start = self.tok().start;
        let line = self.line();
        let params = if self.at_name() && self.peek(1).is_op("->") {
            let p = vec![self.name()?];
            p
        } else if self.at("(") {
            let Some(close) = self.matching(0, "(", ")") else { return Ok(None) };
            if !self.toks[close + 1].is_op("->") {
                return Ok(None);
            }
            let mut names = Vec::new();
            for i in self.pos + 1..close {
                let t = &self.toks[i];
                let next = &self.toks[i + 1];
                if let Some(w) = t.ident() {
                    if !is_keyword(w) && (next.is_op(",") || next.is_op(")")) {
                        names.push(w.to_string());
                    }
                }
            }
            self.pos = close + 1;
            names
        } else {
            return Ok(None);
        };
        self.expect("->")?;
        let body = if self.at("{") {
            LambdaBody::Block(self.block()?)
        } else {
            LambdaBody::Expr(Box::new(self.expr()?))
        };
        Ok(Some(self.finish(ExprKind::Lambda { params, body }, start, line)))
    }

    fn ternary(&mut self) -> PResult<Expr> {
        let start = self.tok().start;
        let line = self.line();
        let cond = self.binary(1)?;
        if !self.eat("?") {
            return Ok(cond);
        }
        let then = self.expr()?;
        self.expect(":")?;
        let otherwise = match self.try_lambda()? {
            Some(l) => l,
            None => self.ternary()?,
        };
        Ok(self.finish(
            ExprKind::Cond { cond: Box::new(cond), then: Box::new(then), otherwise: Box::new(otherwise) },
            start,
            line,
        ))
    }

    /// Binary operator at the cursor: (text, precedence, token count).
    fn binary_op(&self) -> Option<(String, u8, usize)> {
        let t = self.tok();
        if t.is_ident("instanceof") {
            return Some(("instanceof".into(), 7, 1));
        }
        let TokKind::Op(op) = t.kind else { return None };
        if op == ">" {
            let mut n = 1;
            while n < 3 && self.peek(n).is_op(">") && self.adjacent(n - 1, n) {
                n += 1;
            }
            let eq = self.peek(n).is_op("=") && self.adjacent(n - 1, n);
            return match (n, eq) {
                (1, false) => Some((">".into(), 7, 1)),
                (1, true) => Some((">=".into(), 7, 2)),
                (_, false) => Some((">".repeat(n), 8, n)),
                (_, true) => None, // compound assignment
            };
        }
        let prec = match op {
            "||" => 1,
            "&&" => 2,
            "|" => 3,
            "^" => 4,
            "&" => 5,
            "==" | "!=" => 6,
            "<" | "<=" => 7,
            "<<" => 8,
            "+" | "-" => 9,
            "*" | "/" | "%" => 10,
            _ => return None,
        };
        Some((op.to_string(), prec, 1))
    }

    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let start = self.tok().start;
        let line = self.line();
        let mut lhs = self.unary()?;
        while let Some((op, prec, ntoks)) = self.binary_op() {
            if prec < min_prec {
                break;
            }
            self.pos += ntoks;
            if op == "instanceof" {
                self.eat_word("final");
                let ty = self.type_ref()?;
                if self.at_name() {
                    self.bump(); // pattern binding
                }
                lhs = self.finish(ExprKind::InstanceOf { expr: Box::new(lhs), ty }, start, line);
                continue;
            }
            let rhs = self.binary(prec + 1)?;
            lhs = self.finish(ExprKind::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) }, start, line);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let start = self.tok().start;
        let line = self.line();
        for op in ["++", "--", "+", "-", "!", "~"] {
            if self.at(op) {
                self.bump();
                let operand = self.unary()?;
                if op == "-" {
                    if let ExprKind::Int(v) = operand.kind {
                        return Ok(self.finish(ExprKind::Int(v.wrapping_neg()), start, line));
                    }
                }
                return Ok(self.finish(
                    ExprKind::Unary { op: op.to_string(), operand: Box::new(operand), postfix: false },
                    start,
                    line,
                ));
            }
        }
        if self.at("(") {
            if let Some(cast) = self.try_cast()? {
                return Ok(cast);
            }
        }
        let primary = self.primary()?;
        self.postfix(primary, start, line)
    }

    fn try_cast(&mut self) -> PResult<Option<Expr>> {
        let start = self.tok().start;
        let line = self.line();
        let save = self.pos;
        self.bump();
        let primitive = self.tok().ident().is_some_and(is_primitive);
        if !primitive && !self.at_name() {
            self.pos = save;
            return Ok(None);
        }
        let ty = match self.type_ref() {
            Ok(ty) => ty,
            Err(Fail::Fatal(e)) => return Err(Fail::Fatal(e)),
            Err(Fail::Soft { .. }) => {
                self.pos = save;
                return Ok(None);
            }
        };
        while self.eat("&") {
            if self.type_ref().is_err() {
                self.pos = save;
                return Ok(None);
            }
        }
        if !self.at(")") {
            self.pos = save;
            return Ok(None);
        }
        let next = self.peek(1);
        let operand_follows = match &next.kind {
            TokKind::Ident(w) => !matches!(w.as_str(), "instanceof"),
            TokKind::Int(_) | TokKind::Float | TokKind::Str(_) | TokKind::Char(_) => true,
            TokKind::Op(o) => {
                matches!(*o, "!" | "~")
                    || (*o == "(" && (primitive || ty.simple_name().starts_with(char::is_uppercase)))
                    || (primitive && matches!(*o, "-" | "+"))
            }
            TokKind::Eof => false,
        };
        if !operand_follows {
            self.pos = save;
            return Ok(None);
        }
        self.bump();
        let expr = self.unary()?;
        Ok(Some(self.finish(ExprKind::Cast { ty, expr: Box::new(expr) }, start, line)))
    }

    fn args(&mut self) -> PResult<Vec<Expr>> {
        self.expect("(")?;
        let mut args = Vec::new();
        if self.eat(")") {
            return Ok(args);
        }
        loop {
            args.push(self.expr()?);
            if self.eat(",") {
                continue;
            }
            self.expect(")")?;
            return Ok(args);
        }
    }

    fn array_init(&mut self) -> PResult<Expr> {
        let start = self.tok().start;
        let line = self.line();
        self.expect("{")?;
        let mut items = Vec::new();
        loop {
            if self.eat("}") {
                break;
            }
            items.push(if self.at("{") { self.array_init()? } else { self.expr()? });
            if !self.eat(",") {
                self.expect("}")?;
                break;
            }
        }
        Ok(self.finish(ExprKind::ArrayInit(items), start, line))
    }

    fn primary(&mut self) -> PResult<Expr> {
        let start = self.tok().start;
        let line = self.line();
        let tok = self.tok().clone();
        let kind = match tok.kind {
            TokKind::Int(Some(v)) => {
                self.bump();
                ExprKind::Int(v)
            }
            TokKind::Int(None) | TokKind::Float => {
                self.bump();
                ExprKind::Number
            }
            TokKind::Str(s) => {
                self.bump();
                ExprKind::Str(s)
            }
            TokKind::Char(c) => {
                self.bump();
                ExprKind::Char(c)
            }
            TokKind::Op("(") => {
                self.bump();
                let inner = self.expr()?;
                self.expect(")")?;
                return Ok(inner);
            }
            TokKind::Op("{") => return self.array_init(),
            TokKind::Ident(w) => match w.as_str() {
                "true" | "false" => {
                    self.bump();
                    ExprKind::Bool(w == "true")
                }
                "null" => {
                    self.bump();
                    ExprKind::Null
                }
                "this" | "super" => {
                    self.bump();
                    if self.at("(") {
                        // explicit constructor invocation
                        let args = self.args()?;
                        ExprKind::Call { receiver: None, name: w, args }
                    } else if w == "this" {
                        ExprKind::This
                    } else {
                        ExprKind::Super
                    }
                }
                "new" => return self.creator(),
                "switch" => {
                    self.bump();
                    self.paren_expr()?;
                    self.skip_balanced("{", "}")?;
                    ExprKind::Opaque
                }
                p if is_primitive(p) => {
                    let ty = self.type_ref()?;
                    if self.eat(".") && self.eat_word("class") {
                        ExprKind::ClassLit(ty)
                    } else if self.at("::") {
                        ExprKind::Name(ty.name)
                    } else {
                        return self.soft("unexpected primitive type in expression");
                    }
                }
                _ if is_keyword(&w) => return self.soft(format!("unexpected '{w}'")),
                _ => {
                    self.bump();
                    if self.at("(") {
                        let args = self.args()?;
                        ExprKind::Call { receiver: None, name: w, args }
                    } else if self.at("[") && self.peek(1).is_op("]") {
                        // `Foo[].class` / `Foo[]::new`
                        let dims = self.dims();
                        let ty = TypeRef { name: w, args: Vec::new(), dims };
                        if self.eat(".") && self.eat_word("class") {
                            ExprKind::ClassLit(ty)
                        } else {
                            ExprKind::Name(ty.name)
                        }
                    } else {
                        ExprKind::Name(w)
                    }
                }
            },
            _ => return self.soft(format!("unexpected {}", self.describe())),
        };
        Ok(self.finish(kind, start, line))
    }

    fn creator(&mut self) -> PResult<Expr> {
        let start = self.tok().start;
        let line = self.line();
        self.bump(); // new
        if self.at("<") {
            self.skip_balanced("<", ">")?;
        }
        let mut ty = self.type_no_dims()?;
        if self.at("[") {
            let mut dims = Vec::new();
            while self.at("[") {
                self.bump();
                if self.eat("]") {
                    ty.dims += 1;
                } else {
                    dims.push(self.expr()?);
                    self.expect("]")?;
                    ty.dims += 1;
                }
            }
            let init = if self.at("{") {
                match self.array_init()?.kind {
                    ExprKind::ArrayInit(items) => Some(items),
                    _ => unreachable!(),
                }
            } else {
                None
            };
            return Ok(self.finish(ExprKind::NewArray { ty, dims, init }, start, line));
        }
        let args = self.args()?;
        let anonymous_body = self.at("{");
        if anonymous_body {
            self.skip_balanced("{", "}")?;
        }
        Ok(self.finish(ExprKind::New { ty, args, anonymous_body }, start, line))
    }

    fn postfix(&mut self, mut e: Expr, start: usize, line: u32) -> PResult<Expr> {
        loop {
            if self.at(".") {
                self.bump();
                if self.at("<") {
                    self.skip_balanced("<", ">")?;
                }
                if self.eat_word("class") {
                    let name = e.qualified_name().unwrap_or_default();
                    e = self.finish(ExprKind::ClassLit(TypeRef::simple(&name)), start, line);
                    continue;
                }
                if self.eat_word("this") {
                    e = self.finish(ExprKind::This, start, line);
                    continue;
                }
                if self.at_word("new") {
                    let inner = self.creator()?;
                    e = inner;
                    continue;
                }
                let name_line = self.line();
                let name = self.name()?;
                if self.at("(") {
                    let args = self.args()?;
                    e = Expr {
                        kind: ExprKind::Call { receiver: Some(Box::new(e)), name, args },
                        span: Span { start, end: self.prev_end() },
                        line: name_line,
                    };
                } else {
                    e = self.finish(ExprKind::Field { target: Box::new(e), name }, start, line);
                }
            } else if self.at("[") {
                self.bump();
                let index = self.expr()?;
                self.expect("]")?;
                e = self.finish(ExprKind::Index { target: Box::new(e), index: Box::new(index) }, start, line);
            } else if self.at("::") {
                self.bump();
                let name = if self.eat_word("new") { "new".to_string() } else { self.name()? };
                e = self.finish(ExprKind::MethodRef { target: Box::new(e), name }, start, line);
            } else if self.at("++") || self.at("--") {
                let op = if self.at("++") { "++" } else { "--" };
                self.bump();
                e = self.finish(
                    ExprKind::Unary { op: op.into(), operand: Box::new(e), postfix: true },
                    start,
                    line,
                );
            } else {
                return Ok(e);
            }
        }
    }
}
