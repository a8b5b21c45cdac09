//! Parse tree for the recognised Java subset.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParseWarning {
    pub line: u32,
    pub message: String,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct CompilationUnit {
    pub package: Option<String>,
    pub imports: Vec<String>,
    pub types: Vec<TypeDecl>,
    /// Methods declared outside any type (fragments and snippets).
    pub methods: Vec<MethodDecl>,
    /// Statements outside any method (fragments and snippets).
    pub statements: Vec<Stmt>,
    pub warnings: Vec<ParseWarning>,
}

impl CompilationUnit {
    /// Every method body in the unit, nested types included, in source order.
    pub fn all_methods(&self) -> Vec<(&MethodDecl, Option<&TypeDecl>)> {
        fn collect<'a>(t: &'a TypeDecl, out: &mut Vec<(&'a MethodDecl, Option<&'a TypeDecl>)>) {
            out.extend(t.methods.iter().map(|m| (m, Some(t))));
            t.nested.iter().for_each(|n| collect(n, out));
        }
        let mut out: Vec<_> = self.methods.iter().map(|m| (m, None)).collect();
        self.types.iter().for_each(|t| collect(t, &mut out));
        out.sort_by_key(|(m, _)| m.line);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TypeKind {
    Class,
    Interface,
    Enum,
    Record,
    Annotation,
}

#[derive(Debug, Clone, Serialize)]
pub struct TypeDecl {
    pub name: String,
    pub kind: TypeKind,
    pub line: u32,
    pub supertypes: Vec<TypeRef>,
    pub fields: Vec<FieldDecl>,
    pub methods: Vec<MethodDecl>,
    pub nested: Vec<TypeDecl>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TypeRef {
    /// Name as written, without type arguments (`javax.crypto.Cipher`, `byte`).
    pub name: String,
    pub args: Vec<TypeRef>,
    pub dims: usize,
}

impl TypeRef {
    pub fn simple(name: &str) -> Self {
        TypeRef { name: name.to_string(), args: Vec::new(), dims: 0 }
    }

    pub fn simple_name(&self) -> &str {
        self.name.rsplit('.').next().unwrap_or(&self.name)
    }

    pub fn is_string(&self) -> bool {
        self.dims == 0 && self.simple_name() == "String"
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FieldDecl {
    pub ty: TypeRef,
    pub name: String,
    pub init: Option<Expr>,
    pub line: u32,
}

#[derive(Debug, Clone, Serialize)]
pub struct Param {
    pub ty: TypeRef,
    pub name: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodDecl {
    pub name: String,
    pub return_type: Option<TypeRef>,
    pub params: Vec<Param>,
    pub body: Option<Vec<Stmt>>,
    pub line: u32,
}

#[derive(Debug, Clone, Serialize)]
pub struct Declarator {
    pub name: String,
    pub dims: usize,
    pub init: Option<Expr>,
    pub line: u32,
}

#[derive(Debug, Clone, Serialize)]
pub struct CatchClause {
    pub types: Vec<TypeRef>,
    pub name: String,
    pub body: Vec<Stmt>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SwitchCase {
    pub labels: Vec<Expr>,
    pub body: Vec<Stmt>,
}

#[derive(Debug, Clone, Serialize)]
pub enum Stmt {
    LocalVar { ty: TypeRef, vars: Vec<Declarator>, line: u32 },
    Expr { expr: Expr, line: u32 },
    Return { value: Option<Expr>, line: u32 },
    If { cond: Expr, then: Box<Stmt>, otherwise: Option<Box<Stmt>>, line: u32 },
    While { cond: Expr, body: Box<Stmt>, line: u32 },
    DoWhile { body: Box<Stmt>, cond: Expr, line: u32 },
    For { init: Vec<Stmt>, cond: Option<Expr>, update: Vec<Expr>, body: Box<Stmt>, line: u32 },
    ForEach { ty: TypeRef, name: String, iterable: Expr, body: Box<Stmt>, line: u32 },
    Block { body: Vec<Stmt>, line: u32 },
    Try {
        resources: Vec<Stmt>,
        body: Vec<Stmt>,
        catches: Vec<CatchClause>,
        finally: Option<Vec<Stmt>>,
        line: u32,
    },
    Switch { scrutinee: Expr, cases: Vec<SwitchCase>, line: u32 },
    Throw { value: Expr, line: u32 },
    Synchronized { lock: Expr, body: Vec<Stmt>, line: u32 },
    LocalType { decl: TypeDecl, line: u32 },
    Labeled { label: String, body: Box<Stmt>, line: u32 },
    Jump { line: u32 },
    Empty { line: u32 },
    /// A statement the parser could not recognise; tokens were skipped.
    Skipped { line: u32 },
}

impl Stmt {
    pub fn line(&self) -> u32 {
        match self {
            Stmt::LocalVar { line, .. }
            | Stmt::Expr { line, .. }
            | Stmt::Return { line, .. }
            | Stmt::If { line, .. }
            | Stmt::While { line, .. }
            | Stmt::DoWhile { line, .. }
            | Stmt::For { line, .. }
            | Stmt::ForEach { line, .. }
            | Stmt::Block { line, .. }
            | Stmt::Try { line, .. }
            | Stmt::Switch { line, .. }
            | Stmt::Throw { line, .. }
            | Stmt::Synchronized { line, .. }
            | Stmt::LocalType { line, .. }
            | Stmt::Labeled { line, .. }
            | Stmt::Jump { line }
            | Stmt::Empty { line }
            | Stmt::Skipped { line } => *line,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
    pub line: u32,
}

#[derive(Debug, Clone, Serialize)]
pub enum LambdaBody {
    Expr(Box<Expr>),
    Block(Vec<Stmt>),
}

#[derive(Debug, Clone, Serialize)]
pub enum ExprKind {
    Int(i64),
    /// Numeric literal that is not a representable integer.
    Number,
    Str(String),
    Char(char),
    Bool(bool),
    Null,
    Name(String),
    This,
    Super,
    Field { target: Box<Expr>, name: String },
    Call { receiver: Option<Box<Expr>>, name: String, args: Vec<Expr> },
    New { ty: TypeRef, args: Vec<Expr>, anonymous_body: bool },
    NewArray { ty: TypeRef, dims: Vec<Expr>, init: Option<Vec<Expr>> },
    ArrayInit(Vec<Expr>),
    Index { target: Box<Expr>, index: Box<Expr> },
    Assign { target: Box<Expr>, op: String, value: Box<Expr> },
    Binary { op: String, lhs: Box<Expr>, rhs: Box<Expr> },
    Unary { op: String, operand: Box<Expr>, postfix: bool },
    Cast { ty: TypeRef, expr: Box<Expr> },
    Cond { cond: Box<Expr>, then: Box<Expr>, otherwise: Box<Expr> },
    InstanceOf { expr: Box<Expr>, ty: TypeRef },
    Lambda { params: Vec<String>, body: LambdaBody },
    MethodRef { target: Box<Expr>, name: String },
    ClassLit(TypeRef),
    /// Construct recognised only by its extent (switch expressions and the like).
    Opaque,
}

impl Expr {
    /// `a.b.C` style dotted names, if the expression is one.
    pub fn qualified_name(&self) -> Option<String> {
        match &self.kind {
            ExprKind::Name(n) => Some(n.clone()),
            ExprKind::Field { target, name } => target.qualified_name().map(|t| format!("{t}.{name}")),
            _ => None,
        }
    }

    /// Strips parentheses-free wrappers that do not change the value.
    pub fn unwrap_casts(&self) -> &Expr {
        match &self.kind {
            ExprKind::Cast { expr, .. } => expr.unwrap_casts(),
            _ => self,
        }
    }
}

/// Read-only traversal over statements and expressions.
pub trait Visitor {
    fn visit_type(&mut self, _ty: &TypeRef) {}
    fn visit_expr(&mut self, _expr: &Expr) {}
}

pub fn walk_unit(v: &mut impl Visitor, unit: &CompilationUnit) {
    unit.types.iter().for_each(|t| walk_type_decl(v, t));
    unit.methods.iter().for_each(|m| walk_method(v, m));
    unit.statements.iter().for_each(|s| walk_stmt(v, s));
}

pub fn walk_type_decl(v: &mut impl Visitor, t: &TypeDecl) {
    t.supertypes.iter().for_each(|s| walk_type(v, s));
    for f in &t.fields {
        walk_type(v, &f.ty);
        if let Some(init) = &f.init {
            walk_expr(v, init);
        }
    }
    t.methods.iter().for_each(|m| walk_method(v, m));
    t.nested.iter().for_each(|n| walk_type_decl(v, n));
}

pub fn walk_method(v: &mut impl Visitor, m: &MethodDecl) {
    if let Some(rt) = &m.return_type {
        walk_type(v, rt);
    }
    m.params.iter().for_each(|p| walk_type(v, &p.ty));
    if let Some(body) = &m.body {
        body.iter().for_each(|s| walk_stmt(v, s));
    }
}

pub fn walk_type(v: &mut impl Visitor, ty: &TypeRef) {
    v.visit_type(ty);
    ty.args.iter().for_each(|a| walk_type(v, a));
}

pub fn walk_stmt(v: &mut impl Visitor, s: &Stmt) {
    match s {
        Stmt::LocalVar { ty, vars, .. } => {
            walk_type(v, ty);
            vars.iter().filter_map(|d| d.init.as_ref()).for_each(|e| walk_expr(v, e));
        }
        Stmt::Expr { expr, .. } | Stmt::Throw { value: expr, .. } => walk_expr(v, expr),
        Stmt::Return { value, .. } => value.iter().for_each(|e| walk_expr(v, e)),
        Stmt::If { cond, then, otherwise, .. } => {
            walk_expr(v, cond);
            walk_stmt(v, then);
            otherwise.iter().for_each(|o| walk_stmt(v, o));
        }
        Stmt::While { cond, body, .. } | Stmt::DoWhile { cond, body, .. } => {
            walk_expr(v, cond);
            walk_stmt(v, body);
        }
        Stmt::For { init, cond, update, body, .. } => {
            init.iter().for_each(|s| walk_stmt(v, s));
            cond.iter().for_each(|e| walk_expr(v, e));
            update.iter().for_each(|e| walk_expr(v, e));
            walk_stmt(v, body);
        }
        Stmt::ForEach { ty, iterable, body, .. } => {
            walk_type(v, ty);
            walk_expr(v, iterable);
            walk_stmt(v, body);
        }
        Stmt::Block { body, .. } => body.iter().for_each(|s| walk_stmt(v, s)),
        Stmt::Try { resources, body, catches, finally, .. } => {
            resources.iter().chain(body).for_each(|s| walk_stmt(v, s));
            for c in catches {
                c.types.iter().for_each(|t| walk_type(v, t));
                c.body.iter().for_each(|s| walk_stmt(v, s));
            }
            finally.iter().flatten().for_each(|s| walk_stmt(v, s));
        }
        Stmt::Switch { scrutinee, cases, .. } => {
            walk_expr(v, scrutinee);
            for c in cases {
                c.labels.iter().for_each(|e| walk_expr(v, e));
                c.body.iter().for_each(|s| walk_stmt(v, s));
            }
        }
        Stmt::Synchronized { lock, body, .. } => {
            walk_expr(v, lock);
            body.iter().for_each(|s| walk_stmt(v, s));
        }
        Stmt::LocalType { decl, .. } => walk_type_decl(v, decl),
        Stmt::Labeled { body, .. } => walk_stmt(v, body),
        Stmt::Jump { .. } | Stmt::Empty { .. } | Stmt::Skipped { .. } => {}
    }
}

pub fn walk_expr(v: &mut impl Visitor, e: &Expr) {
    v.visit_expr(e);
    match &e.kind {
        ExprKind::Field { target, .. } => walk_expr(v, target),
        ExprKind::Call { receiver, args, .. } => {
            receiver.iter().for_each(|r| walk_expr(v, r));
            args.iter().for_each(|a| walk_expr(v, a));
        }
        ExprKind::New { ty, args, .. } => {
            walk_type(v, ty);
            args.iter().for_each(|a| walk_expr(v, a));
        }
        ExprKind::NewArray { ty, dims, init } => {
            walk_type(v, ty);
            dims.iter().chain(init.iter().flatten()).for_each(|a| walk_expr(v, a));
        }
        ExprKind::ArrayInit(items) => items.iter().for_each(|a| walk_expr(v, a)),
        ExprKind::Index { target, index } => {
            walk_expr(v, target);
            walk_expr(v, index);
        }
        ExprKind::Assign { target, value, .. } => {
            walk_expr(v, target);
            walk_expr(v, value);
        }
        ExprKind::Binary { lhs, rhs, .. } => {
            walk_expr(v, lhs);
            walk_expr(v, rhs);
        }
        ExprKind::Unary { operand, .. } => walk_expr(v, operand),
        ExprKind::Cast { ty, expr } => {
            walk_type(v, ty);
            walk_expr(v, expr);
        }
        ExprKind::Cond { cond, then, otherwise } => {
            walk_expr(v, cond);
            walk_expr(v, then);
            walk_expr(v, otherwise);
        }
        ExprKind::InstanceOf { expr, ty } => {
            walk_expr(v, expr);
            walk_type(v, ty);
        }
        ExprKind::Lambda { body, .. } => match body {
            LambdaBody::Expr(e) => walk_expr(v, e),
            LambdaBody::Block(b) => b.iter().for_each(|s| walk_stmt(v, s)),
        },
        ExprKind::MethodRef { target, .. } => walk_expr(v, target),
        ExprKind::ClassLit(ty) => walk_type(v, ty),
        _ => {}
    }
}
