//! Java source parsing and per-object call-event extraction.

pub mod ast;
mod lexer;
mod parser;
mod trace;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::rules::RulePack;
use ast::{walk_unit, CompilationUnit, Expr, ExprKind, TypeRef, Visitor};

/// A file the parser could not recover from.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: u32,
    pub message: String,
}

/// Name of the synthetic method that holds statements found outside any method.
pub const SNIPPET_METHOD: &str = "<snippet>";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceFile {
    pub path: String,
    pub text: String,
    line_starts: Vec<usize>,
}

impl SourceFile {
    pub fn new(path: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        let mut line_starts = vec![0];
        line_starts.extend(text.match_indices('\n').map(|(i, _)| i + 1));
        if text.ends_with('\n') {
            line_starts.pop();
        }
        SourceFile { path: path.into(), text, line_starts }
    }

    /// Number of lines; zero only for empty text.
    pub fn line_count(&self) -> usize {
        if self.text.is_empty() {
            0
        } else {
            self.line_starts.len()
        }
    }

    /// 1-based line text without the terminator.
    pub fn line(&self, n: usize) -> Option<&str> {
        let start = *self.line_starts.get(n.checked_sub(1)?)?;
        let end = self.line_starts.get(n).map(|e| e - 1).unwrap_or(self.text.len());
        Some(self.text[start..end].trim_end_matches('\r'))
    }

    /// 1-based (line, column) of a byte offset; column counts bytes.
    pub fn position(&self, offset: usize) -> (u32, u32) {
        let ix = self.line_starts.partition_point(|s| *s <= offset).max(1) - 1;
        ((ix + 1) as u32, (offset - self.line_starts[ix] + 1) as u32)
    }
}

/// Where a value comes from, as far as intra-method analysis can tell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Provenance {
    Constant,
    StringDerived,
    RandomSource,
    Unknown,
}

impl Provenance {
    /// Merge point of two paths: agreement is kept, anything else is unknown.
    pub fn join(self, other: Provenance) -> Provenance {
        if self == other {
            self
        } else {
            Provenance::Unknown
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum ArgKind {
    IntLit(i64),
    StringLit(String),
    CharArrayLit,
    ByteArrayLit,
    Ref(String),
    /// Any other expression, kept as source text.
    Expr(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArgValue {
    pub kind: ArgKind,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallEvent {
    pub object_id: String,
    pub label: String,
    pub args: Vec<ArgValue>,
    pub line: u32,
    pub enclosing_method: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectTrace {
    pub object_id: String,
    /// Simple class name of the matching rule.
    pub api_class: String,
    pub allocation_line: u32,
    pub events: Vec<CallEvent>,
    pub file: String,
    pub enclosing_method: String,
}

impl ObjectTrace {
    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.events.iter().map(|e| e.label.as_str())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnippetApis {
    pub apis: BTreeSet<String>,
    pub notes: Vec<String>,
}

pub fn parse_source(file: &SourceFile) -> Result<CompilationUnit, ParseError> {
    parser::parse(&file.text)
}

/// One trace per allocation or factory site of a rule-covered class,
/// ordered by allocation line.
pub fn extract_traces(file: &SourceFile, rules: &RulePack) -> Result<Vec<ObjectTrace>, ParseError> {
    let unit = parse_source(file)?;
    Ok(extract_from_unit(file, &unit, rules))
}

pub fn extract_from_unit(file: &SourceFile, unit: &CompilationUnit, rules: &RulePack) -> Vec<ObjectTrace> {
    trace::extract(file, unit, rules)
}

struct ApiCollector<'a> {
    rules: &'a RulePack,
    found: BTreeSet<String>,
}

impl ApiCollector<'_> {
    fn note(&mut self, name: &str) {
        if let Some(rule) = self.rules.get(name) {
            self.found.insert(rule.simple_name().to_string());
        }
    }
}

impl Visitor for ApiCollector<'_> {
    fn visit_type(&mut self, ty: &TypeRef) {
        self.note(ty.simple_name());
    }

    fn visit_expr(&mut self, expr: &Expr) {
        if let ExprKind::Call { receiver: Some(recv), .. } = &expr.kind {
            if let Some(q) = recv.qualified_name() {
                let last = q.rsplit('.').next().unwrap_or(&q);
                if last.starts_with(char::is_uppercase) {
                    self.note(last);
                }
            }
        }
    }
}

/// Rule-covered classes a code fragment refers to by type or static call.
pub fn detect_apis_in_snippet(snippet: &str, rules: &RulePack) -> SnippetApis {
    let mut collector = ApiCollector { rules, found: BTreeSet::new() };
    let mut notes = Vec::new();
    match parser::parse(snippet) {
        Ok(unit) => {
            walk_unit(&mut collector, &unit);
            notes.extend(unit.warnings.iter().map(|w| format!("line {}: {}", w.line, w.message)));
        }
        Err(e) => {
            notes.push(format!("snippet did not parse ({e}); matched class names by token"));
            for word in snippet.split(|c: char| !(c.is_alphanumeric() || c == '_' || c == '$')) {
                if !word.is_empty() {
                    collector.note(word);
                }
            }
        }
    }
    SnippetApis { apis: collector.found, notes }
}
