//! Rule packs: per-class usage rules for the JCA classes the analyzer knows.
//!
//! A rule pack is a JSON array of rule objects. Each rule names a class, an
//! order pattern over call labels, forbidden signatures, required calls,
//! literal-value constraints and argument flow requirements. Every rule
//! element carries a help text that ends up in findings and issue reports.

mod pattern;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use pattern::{compile_ast, compile_order, parse_pattern, OrderAutomaton, PatternAst, PatternError};

/// Bundled default pack, also written out by `jcalens rules --dump`.
pub const DEFAULT_RULE_PACK: &str = include_str!("../../rules/default.json");

pub const CONSTRUCTOR: &str = "<init>";

#[derive(Debug, Error)]
pub enum RuleError {
    #[error("rule pack syntax error at line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("rule pack semantic error in {class}: {message}")]
    Semantic { class: String, message: String },
}

impl RuleError {
    fn semantic(class: &str, message: impl Into<String>) -> Self {
        RuleError::Semantic { class: class.to_string(), message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MethodSig {
    pub method_name: String,
    pub arity: usize,
}

impl MethodSig {
    pub fn new(method_name: impl Into<String>, arity: usize) -> Self {
        MethodSig { method_name: method_name.into(), arity }
    }

    pub fn is_constructor(&self) -> bool {
        self.method_name == CONSTRUCTOR
    }
}

impl fmt::Display for MethodSig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.method_name, self.arity)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForbiddenCall {
    pub sig: MethodSig,
    pub help: String,
}

impl ForbiddenCall {
    pub fn element_id(&self) -> String {
        format!("forbidden:{}", self.sig)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConstraintKind {
    IntMin { value: i64 },
    IntMax { value: i64 },
    StringAllow { values: Vec<String> },
    StringDeny { values: Vec<String> },
}

impl ConstraintKind {
    fn tag(&self) -> &'static str {
        match self {
            ConstraintKind::IntMin { .. } => "int_min",
            ConstraintKind::IntMax { .. } => "int_max",
            ConstraintKind::StringAllow { .. } => "string_allow",
            ConstraintKind::StringDeny { .. } => "string_deny",
        }
    }

    /// `Some(true)` when the integer literal violates the constraint, `None`
    /// when the constraint does not apply to integers.
    pub fn violated_by_int(&self, v: i64) -> Option<bool> {
        match self {
            ConstraintKind::IntMin { value } => Some(v < *value),
            ConstraintKind::IntMax { value } => Some(v > *value),
            _ => None,
        }
    }

    pub fn violated_by_str(&self, s: &str) -> Option<bool> {
        match self {
            ConstraintKind::StringAllow { values } => {
                Some(!values.iter().any(|p| algorithm_matches(p, s)))
            }
            ConstraintKind::StringDeny { values } => {
                Some(values.iter().any(|p| algorithm_matches(p, s)))
            }
            _ => None,
        }
    }
}

/// Compares an algorithm/transformation string against a rule-pack entry.
///
/// Whitespace is ignored, comparison is case-insensitive and `*` in the
/// entry matches any run of characters, so `*/ECB/*` covers every ECB
/// transformation.
pub fn algorithm_matches(entry: &str, value: &str) -> bool {
    let norm = |s: &str| -> Vec<char> {
        s.chars().filter(|c| !c.is_whitespace()).flat_map(char::to_lowercase).collect()
    };
    glob(&norm(entry), &norm(value))
}

fn glob(pat: &[char], s: &[char]) -> bool {
    let (mut p, mut i) = (0, 0);
    let mut backtrack: Option<(usize, usize)> = None;
    while i < s.len() {
        if p < pat.len() && pat[p] == '*' {
            backtrack = Some((p, i));
            p += 1;
        } else if p < pat.len() && pat[p] == s[i] {
            p += 1;
            i += 1;
        } else if let Some((bp, bi)) = backtrack {
            p = bp + 1;
            i = bi + 1;
            backtrack = Some((bp, bi + 1));
        } else {
            return false;
        }
    }
    pat[p..].iter().all(|&c| c == '*')
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub event_label: String,
    pub param_index: usize,
    pub kind: ConstraintKind,
    pub message: String,
}

impl Constraint {
    pub fn element_id(&self) -> String {
        format!("constraint:{}#{}:{}", self.event_label, self.param_index, self.kind.tag())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowRequirement {
    MustBeRandomized,
    MustNotDeriveFromString,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowPredicate {
    pub event_label: String,
    pub param_index: usize,
    pub requirement: FlowRequirement,
    pub message: String,
}

impl FlowPredicate {
    pub fn element_id(&self) -> String {
        format!("flow:{}#{}", self.event_label, self.param_index)
    }
}

/// Usage rules for one class, with the order pattern already compiled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleSpec {
    pub class_name: String,
    pub order_pattern: String,
    pub order: OrderAutomaton,
    /// Known arities per label, used to validate parameter positions.
    pub signatures: BTreeSet<MethodSig>,
    pub forbidden: Vec<ForbiddenCall>,
    pub required: BTreeSet<String>,
    pub constraints: Vec<Constraint>,
    pub flow_predicates: Vec<FlowPredicate>,
    /// Rule element id → help text. Covers every element of the rule.
    pub help: BTreeMap<String, String>,
}

impl RuleSpec {
    /// Unqualified class name, used to match types in source.
    pub fn simple_name(&self) -> &str {
        simple_name(&self.class_name)
    }

    pub fn forbidden_match(&self, label: &str, arity: usize) -> Option<&ForbiddenCall> {
        self.forbidden.iter().find(|f| f.sig.method_name == label && f.sig.arity == arity)
    }

    pub fn help_for(&self, element: &str) -> &str {
        self.help.get(element).map(String::as_str).unwrap_or("")
    }

    /// Labels that open a trace when called statically on the class.
    pub fn factory_labels(&self) -> impl Iterator<Item = &str> {
        self.order.initial_labels().filter(|l| *l != CONSTRUCTOR)
    }

    fn max_arity(&self, label: &str) -> Option<usize> {
        self.signatures
            .iter()
            .chain(self.forbidden.iter().map(|f| &f.sig))
            .filter(|s| s.method_name == label)
            .map(|s| s.arity)
            .max()
    }
}

pub fn simple_name(class_name: &str) -> &str {
    class_name.rsplit('.').next().unwrap_or(class_name)
}

/// An immutable, validated set of rules keyed by simple class name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RulePack {
    rules: Vec<RuleSpec>,
}

impl RulePack {
    pub fn new(rules: Vec<RuleSpec>) -> Result<Self, RuleError> {
        let mut seen = BTreeSet::new();
        let mut simple = BTreeSet::new();
        for r in &rules {
            if !seen.insert(r.class_name.clone()) || !simple.insert(r.simple_name().to_string()) {
                return Err(RuleError::semantic(&r.class_name, "duplicate class name"));
            }
        }
        Ok(RulePack { rules })
    }

    pub fn rules(&self) -> &[RuleSpec] {
        &self.rules
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    /// Looks a rule up by simple or fully-qualified class name.
    pub fn get(&self, name: &str) -> Option<&RuleSpec> {
        let key = simple_name(name);
        self.rules.iter().find(|r| r.simple_name() == key)
    }

    pub fn simple_names(&self) -> impl Iterator<Item = &str> {
        self.rules.iter().map(RuleSpec::simple_name)
    }
}

// ---- document format ----

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleDoc {
    class: String,
    order: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    signatures: Vec<SigDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    forbidden: Vec<ForbiddenDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    required: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    constraints: Vec<ConstraintDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    flows: Vec<FlowDoc>,
    /// Help for `order` and `required:<label>` elements.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    help: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SigDoc {
    name: String,
    arity: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ForbiddenDoc {
    name: String,
    arity: usize,
    help: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ConstraintDoc {
    label: String,
    param: usize,
    #[serde(flatten)]
    kind: ConstraintKind,
    help: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FlowDoc {
    label: String,
    param: usize,
    requirement: FlowRequirement,
    help: String,
}

pub fn parse_rule_pack(text: &str) -> Result<RulePack, RuleError> {
    if text.trim().is_empty() {
        return RulePack::new(Vec::new());
    }
    let docs: Vec<RuleDoc> = serde_json::from_str(text)
        .map_err(|e| RuleError::Syntax { line: e.line(), message: e.to_string() })?;
    let rules = docs.into_iter().map(rule_from_doc).collect::<Result<Vec<_>, _>>()?;
    RulePack::new(rules)
}

pub fn render_rule_pack(pack: &RulePack) -> String {
    let docs: Vec<RuleDoc> = pack.rules().iter().map(rule_to_doc).collect();
    serde_json::to_string_pretty(&docs).expect("rule docs serialize")
}

pub fn default_rule_pack() -> RulePack {
    parse_rule_pack(DEFAULT_RULE_PACK).expect("bundled rule pack is valid")
}

fn rule_from_doc(doc: RuleDoc) -> Result<RuleSpec, RuleError> {
    let class = doc.class.trim().to_string();
    if class.is_empty() {
        return Err(RuleError::semantic("<unnamed>", "empty class name"));
    }
    let order = compile_order(&doc.order)
        .map_err(|e| RuleError::semantic(&class, format!("order pattern: {e}")))?;

    let signatures: BTreeSet<MethodSig> =
        doc.signatures.iter().map(|s| MethodSig::new(s.name.clone(), s.arity)).collect();
    let forbidden: Vec<ForbiddenCall> = doc
        .forbidden
        .into_iter()
        .map(|f| ForbiddenCall { sig: MethodSig::new(f.name, f.arity), help: f.help })
        .collect();
    let constraints: Vec<Constraint> = doc
        .constraints
        .into_iter()
        .map(|c| Constraint { event_label: c.label, param_index: c.param, kind: c.kind, message: c.help })
        .collect();
    let flow_predicates: Vec<FlowPredicate> = doc
        .flows
        .into_iter()
        .map(|f| FlowPredicate {
            event_label: f.label,
            param_index: f.param,
            requirement: f.requirement,
            message: f.help,
        })
        .collect();
    let required: BTreeSet<String> = doc.required.into_iter().collect();

    let mut help = BTreeMap::new();
    let simple = simple_name(&class).to_string();
    help.insert(
        "order".to_string(),
        doc.help.get("order").cloned().unwrap_or_else(|| {
            format!("Calls on {simple} must follow the order: {}", doc.order.trim())
        }),
    );
    for label in &required {
        let key = format!("required:{label}");
        let text = doc
            .help
            .get(&key)
            .cloned()
            .unwrap_or_else(|| format!("{simple}.{label}() must be called before the object goes out of use"));
        help.insert(key, text);
    }
    for key in doc.help.keys() {
        if key != "order" && !help.contains_key(key) {
            return Err(RuleError::semantic(&class, format!("help for unknown element '{key}'")));
        }
    }

    let rule = RuleSpec {
        class_name: class,
        order_pattern: doc.order.trim().to_string(),
        order,
        signatures,
        forbidden,
        required,
        constraints,
        flow_predicates,
        help,
    };
    finish_rule(rule)
}

/// Fills per-element help entries and checks the rule's invariants.
fn finish_rule(mut rule: RuleSpec) -> Result<RuleSpec, RuleError> {
    let class = rule.class_name.clone();
    let known = |rule: &RuleSpec, label: &str| {
        rule.order.in_alphabet(label) || rule.forbidden.iter().any(|f| f.sig.method_name == label)
    };

    let mut seen_forbidden = BTreeSet::new();
    for f in &rule.forbidden {
        if !seen_forbidden.insert(f.sig.clone()) {
            return Err(RuleError::semantic(&class, format!("duplicate forbidden entry {}", f.sig)));
        }
        if f.help.trim().is_empty() {
            return Err(RuleError::semantic(&class, format!("forbidden {} has no help", f.sig)));
        }
    }
    for label in &rule.required {
        if !known(&rule, label) {
            return Err(RuleError::semantic(&class, format!("required label '{label}' is not in the order alphabet")));
        }
    }
    let mut seen_constraints = BTreeSet::new();
    for c in &rule.constraints {
        if !known(&rule, &c.event_label) {
            return Err(RuleError::semantic(&class, format!("constraint label '{}' is unknown", c.event_label)));
        }
        check_param(&rule, &c.event_label, c.param_index)?;
        if !seen_constraints.insert(c.element_id()) {
            return Err(RuleError::semantic(&class, format!("duplicate constraint {}", c.element_id())));
        }
        if c.message.trim().is_empty() {
            return Err(RuleError::semantic(&class, format!("constraint {} has no help", c.element_id())));
        }
    }
    let mut seen_flows = BTreeSet::new();
    for f in &rule.flow_predicates {
        if !known(&rule, &f.event_label) {
            return Err(RuleError::semantic(&class, format!("flow label '{}' is unknown", f.event_label)));
        }
        check_param(&rule, &f.event_label, f.param_index)?;
        if !seen_flows.insert((f.event_label.clone(), f.param_index)) {
            return Err(RuleError::semantic(&class, format!("more than one flow requirement on {}", f.element_id())));
        }
        if f.message.trim().is_empty() {
            return Err(RuleError::semantic(&class, format!("flow {} has no help", f.element_id())));
        }
    }

    let mut help = std::mem::take(&mut rule.help);
    for f in &rule.forbidden {
        help.insert(f.element_id(), f.help.clone());
    }
    for c in &rule.constraints {
        help.insert(c.element_id(), c.message.clone());
    }
    for f in &rule.flow_predicates {
        help.insert(f.element_id(), f.message.clone());
    }
    rule.help = help;
    Ok(rule)
}

fn check_param(rule: &RuleSpec, label: &str, param: usize) -> Result<(), RuleError> {
    match rule.max_arity(label) {
        Some(arity) if param < arity => Ok(()),
        Some(arity) => Err(RuleError::semantic(
            &rule.class_name,
            format!("parameter {param} out of range for {label} (max arity {arity})"),
        )),
        None => Err(RuleError::semantic(
            &rule.class_name,
            format!("no signature recorded for '{label}'"),
        )),
    }
}

fn rule_to_doc(rule: &RuleSpec) -> RuleDoc {
    let mut help = BTreeMap::new();
    for (k, v) in &rule.help {
        if k == "order" || k.starts_with("required:") {
            help.insert(k.clone(), v.clone());
        }
    }
    RuleDoc {
        class: rule.class_name.clone(),
        order: rule.order_pattern.clone(),
        signatures: rule
            .signatures
            .iter()
            .map(|s| SigDoc { name: s.method_name.clone(), arity: s.arity })
            .collect(),
        forbidden: rule
            .forbidden
            .iter()
            .map(|f| ForbiddenDoc { name: f.sig.method_name.clone(), arity: f.sig.arity, help: f.help.clone() })
            .collect(),
        required: rule.required.iter().cloned().collect(),
        constraints: rule
            .constraints
            .iter()
            .map(|c| ConstraintDoc {
                label: c.event_label.clone(),
                param: c.param_index,
                kind: c.kind.clone(),
                help: c.message.clone(),
            })
            .collect(),
        flows: rule
            .flow_predicates
            .iter()
            .map(|f| FlowDoc {
                label: f.event_label.clone(),
                param: f.param_index,
                requirement: f.requirement,
                help: f.message.clone(),
            })
            .collect(),
        help,
    }
}
