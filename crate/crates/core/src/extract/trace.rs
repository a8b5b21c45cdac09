//! Intra-method abstract interpretation that follows rule-covered objects
//! through local variables and tags argument values with their provenance.

use std::collections::{BTreeSet, HashMap};

use super::ast::*;
use super::{ArgKind, ArgValue, CallEvent, ObjectTrace, Provenance, SourceFile, SNIPPET_METHOD};
use crate::rules::{RulePack, RuleSpec, CONSTRUCTOR};

#[derive(Debug, Clone, PartialEq)]
struct Val {
    prov: Provenance,
    /// Traces the value may refer to (several after a branch join).
    traces: BTreeSet<usize>,
    /// Simple type name with `[]` per dimension, when known.
    ty: Option<String>,
}

impl Val {
    fn unknown() -> Self {
        Val { prov: Provenance::Unknown, traces: BTreeSet::new(), ty: None }
    }

    fn of(prov: Provenance) -> Self {
        Val { prov, ..Val::unknown() }
    }

    fn typed(mut self, ty: Option<String>) -> Self {
        if ty.is_some() {
            self.ty = ty;
        }
        self
    }

    fn is_string(&self) -> bool {
        self.ty.as_deref() == Some("String")
    }
}

type Env = HashMap<String, Val>;

fn join_env(a: &Env, b: &Env) -> Env {
    let mut out = a.clone();
    for (name, vb) in b {
        match out.get_mut(name) {
            Some(va) => {
                va.prov = va.prov.join(vb.prov);
                va.traces.extend(vb.traces.iter().copied());
                if va.ty.is_none() {
                    va.ty = vb.ty.clone();
                }
            }
            None => {
                out.insert(name.clone(), vb.clone());
            }
        }
    }
    // names bound on only one side keep their value but lose certainty
    for (name, va) in out.iter_mut() {
        if !b.contains_key(name) || !a.contains_key(name) {
            va.prov = va.prov.join(Provenance::Unknown);
        }
    }
    out
}

fn type_key(ty: &TypeRef) -> String {
    format!("{}{}", ty.simple_name(), "[]".repeat(ty.dims))
}

struct Extractor<'a> {
    file: &'a SourceFile,
    rules: &'a RulePack,
    method: String,
    traces: Vec<ObjectTrace>,
}

pub fn extract(file: &SourceFile, unit: &CompilationUnit, rules: &RulePack) -> Vec<ObjectTrace> {
    let mut ex = Extractor { file, rules, method: String::new(), traces: Vec::new() };
    for (method, owner) in unit.all_methods() {
        let Some(body) = &method.body else { continue };
        let mut env = Env::new();
        if let Some(owner) = owner {
            for f in &owner.fields {
                env.insert(f.name.clone(), Val::unknown().typed(Some(type_key(&f.ty))));
            }
        }
        for p in &method.params {
            env.insert(p.name.clone(), Val::unknown().typed(Some(type_key(&p.ty))));
        }
        ex.method = method.name.clone();
        ex.block(body, &mut env);
    }
    if !unit.statements.is_empty() {
        ex.method = SNIPPET_METHOD.to_string();
        ex.block(&unit.statements, &mut Env::new());
    }
    let mut traces = ex.traces;
    for t in &mut traces {
        t.events.sort_by_key(|e| e.line);
    }
    traces.sort_by_key(|t| t.allocation_line);
    traces
}

impl Extractor<'_> {
    fn block(&mut self, stmts: &[Stmt], env: &mut Env) {
        for s in stmts {
            self.stmt(s, env);
        }
    }

    /// Runs `f` on a copy of the environment and merges the result back as
    /// a path that may or may not have been taken.
    fn maybe(&mut self, env: &mut Env, f: impl FnOnce(&mut Self, &mut Env)) {
        let mut branch = env.clone();
        f(self, &mut branch);
        *env = join_env(env, &branch);
    }

    fn stmt(&mut self, s: &Stmt, env: &mut Env) {
        match s {
            Stmt::LocalVar { ty, vars, .. } => {
                for d in vars {
                    let declared = if ty.name == "var" {
                        None
                    } else {
                        Some(format!("{}{}", type_key(ty), "[]".repeat(d.dims)))
                    };
                    let v = match &d.init {
                        Some(init) => self.eval(init, env),
                        None => Val::unknown(),
                    };
                    env.insert(d.name.clone(), v.typed(declared));
                }
            }
            Stmt::Expr { expr, .. } | Stmt::Throw { value: expr, .. } => {
                self.eval(expr, env);
            }
            Stmt::Return { value, .. } => {
                if let Some(v) = value {
                    self.eval(v, env);
                }
            }
            Stmt::If { cond, then, otherwise, .. } => {
                self.eval(cond, env);
                let mut a = env.clone();
                self.stmt(then, &mut a);
                let mut b = env.clone();
                if let Some(o) = otherwise {
                    self.stmt(o, &mut b);
                }
                *env = join_env(&a, &b);
            }
            Stmt::While { cond, body, .. } => {
                self.eval(cond, env);
                self.maybe(env, |me, e| me.stmt(body, e));
            }
            Stmt::DoWhile { body, cond, .. } => {
                self.stmt(body, env);
                self.eval(cond, env);
                self.maybe(env, |me, e| me.stmt(body, e));
            }
            Stmt::For { init, cond, update, body, .. } => {
                self.block(init, env);
                if let Some(c) = cond {
                    self.eval(c, env);
                }
                self.maybe(env, |me, e| {
                    me.stmt(body, e);
                    for u in update {
                        me.eval(u, e);
                    }
                });
            }
            Stmt::ForEach { ty, name, iterable, body, .. } => {
                self.eval(iterable, env);
                self.maybe(env, |me, e| {
                    e.insert(name.clone(), Val::unknown().typed(Some(type_key(ty))));
                    me.stmt(body, e);
                });
            }
            Stmt::Block { body, .. } => self.block(body, env),
            Stmt::Try { resources, body, catches, finally, .. } => {
                self.block(resources, env);
                let before = env.clone();
                self.block(body, env);
                let mut merged = join_env(&before, env);
                for c in catches {
                    // a catch may start anywhere inside the body
                    let mut e = merged.clone();
                    e.insert(c.name.clone(), Val::unknown());
                    self.block(&c.body, &mut e);
                    merged = join_env(&merged, &e);
                }
                if !catches.is_empty() {
                    *env = join_env(env, &merged);
                }
                if let Some(f) = finally {
                    self.block(f, env);
                }
            }
            Stmt::Switch { scrutinee, cases, .. } => {
                self.eval(scrutinee, env);
                let start = env.clone();
                for c in cases {
                    let mut e = start.clone();
                    for l in &c.labels {
                        self.eval(l, &mut e);
                    }
                    self.block(&c.body, &mut e);
                    *env = join_env(env, &e);
                }
            }
            Stmt::Synchronized { lock, body, .. } => {
                self.eval(lock, env);
                self.block(body, env);
            }
            Stmt::Labeled { body, .. } => self.stmt(body, env),
            Stmt::LocalType { .. } | Stmt::Jump { .. } | Stmt::Empty { .. } | Stmt::Skipped { .. } => {}
        }
    }

    fn rule_for(&self, simple: &str) -> Option<&RuleSpec> {
        self.rules.get(simple).filter(|r| r.simple_name() == simple)
    }

    fn open_trace(&mut self, rule_class: &str, at: &Expr) -> usize {
        let (line, col) = self.file.position(at.span.start);
        let line = if at.line > 0 { at.line } else { line };
        self.traces.push(ObjectTrace {
            object_id: format!("{}:{}@{}:{}", self.method, rule_class, line, col),
            api_class: rule_class.to_string(),
            allocation_line: line,
            events: Vec::new(),
            file: self.file.path.clone(),
            enclosing_method: self.method.clone(),
        });
        self.traces.len() - 1
    }

    fn emit(&mut self, trace: usize, label: &str, args: Vec<ArgValue>, line: u32) {
        let t = &mut self.traces[trace];
        t.events.push(CallEvent {
            object_id: t.object_id.clone(),
            label: label.to_string(),
            args,
            line,
            enclosing_method: self.method.clone(),
        });
    }

    fn args(&mut self, args: &[Expr], env: &mut Env) -> Vec<ArgValue> {
        args.iter()
            .map(|a| {
                let v = self.eval(a, env);
                ArgValue { kind: self.arg_kind(a.unwrap_casts(), v.prov), provenance: v.prov }
            })
            .collect()
    }

    fn arg_kind(&self, e: &Expr, prov: Provenance) -> ArgKind {
        let array_kind = |elem: &str| match elem {
            "char" => ArgKind::CharArrayLit,
            _ => ArgKind::ByteArrayLit,
        };
        match &e.kind {
            ExprKind::Int(v) => ArgKind::IntLit(*v),
            ExprKind::Str(s) => ArgKind::StringLit(s.clone()),
            ExprKind::Name(n) => ArgKind::Ref(n.clone()),
            ExprKind::NewArray { ty, init: Some(_), .. } if prov == Provenance::Constant && ty.dims == 1 => {
                array_kind(&ty.name)
            }
            _ => ArgKind::Expr(self.file.text.get(e.span.start..e.span.end).unwrap_or("").to_string()),
        }
    }

    /// Static receiver: a dotted name whose head is not a local and whose
    /// last segment looks like a class.
    fn static_class(&self, recv: &Expr, env: &Env) -> Option<String> {
        let q = recv.qualified_name()?;
        let head = q.split('.').next()?;
        if env.contains_key(head) {
            return None;
        }
        let last = q.rsplit('.').next()?;
        last.starts_with(char::is_uppercase).then(|| last.to_string())
    }

    fn assign_to(&mut self, target: &Expr, v: &Val, env: &mut Env) {
        let name = match &target.kind {
            ExprKind::Name(n) => Some(n),
            ExprKind::Field { target: t, name } if matches!(t.kind, ExprKind::This) => Some(name),
            _ => None,
        };
        if let Some(n) = name {
            let ty = env.get(n).and_then(|old| old.ty.clone());
            env.insert(n.clone(), v.clone().typed(ty));
        }
    }

    fn eval(&mut self, e: &Expr, env: &mut Env) -> Val {
        use Provenance::*;
        match &e.kind {
            ExprKind::Int(_) | ExprKind::Number | ExprKind::Char(_) | ExprKind::Bool(_) | ExprKind::Null => {
                Val::of(Constant)
            }
            ExprKind::Str(_) => Val::of(Constant).typed(Some("String".into())),
            ExprKind::Name(n) => env.get(n).cloned().unwrap_or_else(Val::unknown),
            ExprKind::Field { target, name } => {
                if matches!(target.kind, ExprKind::This) {
                    return env.get(name).cloned().unwrap_or_else(Val::unknown);
                }
                if target.qualified_name().is_none() {
                    self.eval(target, env);
                }
                Val::unknown()
            }
            ExprKind::ArrayInit(items) => self.array_items(items, env),
            ExprKind::NewArray { ty, dims, init } => {
                for d in dims {
                    self.eval(d, env);
                }
                let v = match init {
                    Some(items) => self.array_items(items, env),
                    None => Val::unknown(),
                };
                v.typed(Some(type_key(ty)))
            }
            ExprKind::New { ty, args, .. } => {
                let argv = self.args(args, env);
                let simple = ty.simple_name().to_string();
                let constructs = self.rule_for(&simple).is_some_and(|r| {
                    r.order.in_alphabet(CONSTRUCTOR) || r.forbidden.iter().any(|f| f.sig.is_constructor())
                });
                let mut v = Val::unknown().typed(Some(simple.clone()));
                if simple == "String" {
                    v.prov = StringDerived;
                }
                if constructs {
                    let t = self.open_trace(&simple, e);
                    self.emit(t, CONSTRUCTOR, argv, e.line);
                    v.traces.insert(t);
                }
                v
            }
            ExprKind::Call { receiver, name, args } => self.call(e, receiver.as_deref(), name, args, env),
            ExprKind::Index { target, index } => {
                let t = self.eval(target, env);
                self.eval(index, env);
                Val::of(t.prov)
            }
            ExprKind::Assign { target, op, value } => {
                let v = if op == "=" {
                    self.eval(value, env)
                } else {
                    let old = self.eval(target, env);
                    let rhs = self.eval(value, env);
                    let prov = if old.is_string() || rhs.prov == StringDerived {
                        StringDerived
                    } else {
                        old.prov.join(rhs.prov)
                    };
                    Val { prov, traces: BTreeSet::new(), ty: old.ty }
                };
                match &target.kind {
                    ExprKind::Index { target: arr, index } => {
                        self.eval(index, env);
                        if let Some(n) = arr.qualified_name() {
                            if let Some(slot) = env.get_mut(&n) {
                                slot.prov = slot.prov.join(v.prov);
                            }
                        }
                    }
                    _ => self.assign_to(target, &v, env),
                }
                v
            }
            ExprKind::Binary { op, lhs, rhs } => {
                let a = self.eval(lhs, env);
                let b = self.eval(rhs, env);
                if op == "+" && (a.is_string() || b.is_string() || a.prov == StringDerived || b.prov == StringDerived) {
                    let prov = if a.prov == Constant && b.prov == Constant { Constant } else { StringDerived };
                    return Val::of(prov).typed(Some("String".into()));
                }
                Val::of(if a.prov == Constant && b.prov == Constant { Constant } else { Unknown })
            }
            ExprKind::Unary { operand, .. } => {
                let v = self.eval(operand, env);
                Val::of(v.prov)
            }
            ExprKind::Cast { ty, expr } => {
                let v = self.eval(expr, env);
                Val { ty: Some(type_key(ty)), ..v }
            }
            ExprKind::Cond { cond, then, otherwise } => {
                self.eval(cond, env);
                let mut a = env.clone();
                let va = self.eval(then, &mut a);
                let mut b = env.clone();
                let vb = self.eval(otherwise, &mut b);
                *env = join_env(&a, &b);
                let mut traces = va.traces;
                traces.extend(vb.traces);
                Val { prov: va.prov.join(vb.prov), traces, ty: va.ty.or(vb.ty) }
            }
            ExprKind::InstanceOf { expr, .. } => {
                self.eval(expr, env);
                Val::unknown()
            }
            ExprKind::Lambda { params, body } => {
                self.maybe(env, |me, e| {
                    for p in params {
                        e.insert(p.clone(), Val::unknown());
                    }
                    match body {
                        LambdaBody::Expr(x) => {
                            me.eval(x, e);
                        }
                        LambdaBody::Block(b) => me.block(b, e),
                    }
                });
                Val::unknown()
            }
            ExprKind::MethodRef { target, .. } => {
                if target.qualified_name().is_none() {
                    self.eval(target, env);
                }
                Val::unknown()
            }
            ExprKind::This | ExprKind::Super | ExprKind::ClassLit(_) | ExprKind::Opaque => Val::unknown(),
        }
    }

    fn array_items(&mut self, items: &[Expr], env: &mut Env) -> Val {
        let mut prov = Provenance::Constant;
        for i in items {
            let v = self.eval(i, env);
            if v.prov != Provenance::Constant {
                prov = Provenance::Unknown;
            }
        }
        Val::of(prov)
    }

    fn call(&mut self, e: &Expr, receiver: Option<&Expr>, name: &str, args: &[Expr], env: &mut Env) -> Val {
        use Provenance::*;
        let Some(recv) = receiver else {
            self.args(args, env);
            return Val::unknown();
        };
        if let Some(class) = self.static_class(recv, env) {
            let argv = self.args(args, env);
            let factory = self.rule_for(&class).is_some_and(|r| r.factory_labels().any(|l| l == name));
            if factory {
                let t = self.open_trace(&class, e);
                self.emit(t, name, argv, e.line);
                return Val { prov: Unknown, traces: BTreeSet::from([t]), ty: Some(class) };
            }
            return match class.as_str() {
                "String" => Val::of(StringDerived).typed(Some("String".into())),
                c if c.contains("SecureRandom") => Val::of(RandomSource).typed(Some(class)),
                _ => Val::unknown(),
            };
        }
        let rv = self.eval(recv, env);
        let argv = self.args(args, env);
        for &t in &rv.traces {
            self.emit(t, name, argv.clone(), e.line);
        }
        let random_receiver = rv.ty.as_deref().is_some_and(|t| t.contains("SecureRandom"));
        if name == "nextBytes" || random_receiver {
            for a in args {
                if let ExprKind::Name(n) = &a.unwrap_casts().kind {
                    if let Some(slot) = env.get_mut(n) {
                        slot.prov = RandomSource;
                    }
                }
            }
        }
        let string_receiver = rv.is_string()
            || rv.prov == StringDerived
            || matches!(recv.kind, ExprKind::Str(_))
            // a snippet may not declare its password variable
            || (name == "toCharArray" && rv.ty.is_none());
        if string_receiver {
            Val::of(StringDerived)
        } else if random_receiver {
            Val::of(RandomSource)
        } else {
            Val::unknown()
        }
    }
}
