//! The six misuse checks over object traces.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::extract::{extract_traces, ArgKind, ObjectTrace, ParseError, Provenance, SourceFile};
use crate::rules::{FlowRequirement, RulePack, RuleSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MisuseCategory {
    WrongType,
    WrongObject,
    WrongConstraint,
    ForbiddenCall,
    IncompleteOperation,
    IncompleteOrder,
}

impl MisuseCategory {
    pub const ALL: [MisuseCategory; 6] = [
        MisuseCategory::WrongType,
        MisuseCategory::WrongObject,
        MisuseCategory::WrongConstraint,
        MisuseCategory::ForbiddenCall,
        MisuseCategory::IncompleteOperation,
        MisuseCategory::IncompleteOrder,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MisuseCategory::WrongType => "WRONG_TYPE",
            MisuseCategory::WrongObject => "WRONG_OBJECT",
            MisuseCategory::WrongConstraint => "WRONG_CONSTRAINT",
            MisuseCategory::ForbiddenCall => "FORBIDDEN_CALL",
            MisuseCategory::IncompleteOperation => "INCOMPLETE_OPERATION",
            MisuseCategory::IncompleteOrder => "INCOMPLETE_ORDER",
        }
    }

    /// Findings of these categories point at the offending call rather than
    /// the allocation site.
    pub fn is_event_local(self) -> bool {
        !matches!(self, MisuseCategory::IncompleteOperation | MisuseCategory::IncompleteOrder)
    }
}

impl fmt::Display for MisuseCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub category: MisuseCategory,
    pub api_class: String,
    pub rule_element: String,
    pub message: String,
    pub file: String,
    pub line: u32,
    pub trace_ref: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceVerdict {
    pub trace: ObjectTrace,
    pub findings: Vec<Finding>,
    pub secure: bool,
}

/// One line of the findings report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub category: MisuseCategory,
    pub api: String,
    pub file: String,
    pub line: u32,
    pub message: String,
    pub rule_element: String,
}

fn finding(trace: &ObjectTrace, category: MisuseCategory, element: String, message: &str, line: u32) -> Finding {
    Finding {
        category,
        api_class: trace.api_class.clone(),
        rule_element: element,
        message: message.to_string(),
        file: trace.file.clone(),
        line,
        trace_ref: trace.object_id.clone(),
    }
}

pub fn check_forbidden(trace: &ObjectTrace, rule: &RuleSpec) -> Vec<Finding> {
    trace
        .events
        .iter()
        .filter_map(|e| {
            let f = rule.forbidden_match(&e.label, e.args.len())?;
            Some(finding(trace, MisuseCategory::ForbiddenCall, f.element_id(), &f.help, e.line))
        })
        .collect()
}

fn check_flow_kind(trace: &ObjectTrace, rule: &RuleSpec, requirement: FlowRequirement) -> Vec<Finding> {
    let (bad, category) = match requirement {
        FlowRequirement::MustNotDeriveFromString => (Provenance::StringDerived, MisuseCategory::WrongType),
        FlowRequirement::MustBeRandomized => (Provenance::Constant, MisuseCategory::WrongObject),
    };
    let mut out = Vec::new();
    for e in &trace.events {
        for p in rule.flow_predicates.iter().filter(|p| p.requirement == requirement && p.event_label == e.label) {
            if e.args.get(p.param_index).is_some_and(|a| a.provenance == bad) {
                out.push(finding(trace, category, p.element_id(), &p.message, e.line));
            }
        }
    }
    out
}

/// WRONG_TYPE findings first, then WRONG_OBJECT.
pub fn check_flows(trace: &ObjectTrace, rule: &RuleSpec) -> Vec<Finding> {
    let mut out = check_flow_kind(trace, rule, FlowRequirement::MustNotDeriveFromString);
    out.extend(check_flow_kind(trace, rule, FlowRequirement::MustBeRandomized));
    out
}

pub fn check_constraints(trace: &ObjectTrace, rule: &RuleSpec) -> Vec<Finding> {
    let mut out = Vec::new();
    for c in &rule.constraints {
        for e in trace.events.iter().filter(|e| e.label == c.event_label) {
            let violated = match e.args.get(c.param_index).map(|a| &a.kind) {
                Some(ArgKind::IntLit(v)) => c.kind.violated_by_int(*v),
                Some(ArgKind::StringLit(s)) => c.kind.violated_by_str(s),
                _ => None,
            };
            if violated == Some(true) {
                out.push(finding(trace, MisuseCategory::WrongConstraint, c.element_id(), &c.message, e.line));
            }
        }
    }
    out
}

fn missing_required<'r>(trace: &ObjectTrace, rule: &'r RuleSpec) -> Vec<&'r str> {
    let seen: BTreeSet<&str> = trace.labels().collect();
    rule.required.iter().map(String::as_str).filter(|r| !seen.contains(r)).collect()
}

/// A single finding naming every required call that never happens.
pub fn check_operation(trace: &ObjectTrace, rule: &RuleSpec) -> Vec<Finding> {
    let missing = missing_required(trace, rule);
    if missing.is_empty() {
        return Vec::new();
    }
    let ids: Vec<String> = missing.iter().map(|m| format!("required:{m}")).collect();
    let message = ids.iter().map(|id| rule.help_for(id)).collect::<Vec<_>>().join(" ");
    let element = format!("required:{}", missing.join(","));
    vec![finding(trace, MisuseCategory::IncompleteOperation, element, &message, trace.allocation_line)]
}

/// Labels of the trace that the order automaton knows about.
pub fn project_word<'t>(trace: &'t ObjectTrace, rule: &RuleSpec) -> Vec<&'t str> {
    trace.labels().filter(|l| rule.order.in_alphabet(l)).collect()
}

/// Reported only when nothing required is missing.
pub fn check_order(trace: &ObjectTrace, rule: &RuleSpec) -> Vec<Finding> {
    if !missing_required(trace, rule).is_empty() {
        return Vec::new();
    }
    if rule.order.accepts(project_word(trace, rule)) {
        return Vec::new();
    }
    vec![finding(trace, MisuseCategory::IncompleteOrder, "order".into(), rule.help_for("order"), trace.allocation_line)]
}

pub fn analyze_trace(trace: ObjectTrace, rule: &RuleSpec) -> TraceVerdict {
    let mut findings = check_forbidden(&trace, rule);
    findings.extend(check_flows(&trace, rule));
    findings.extend(check_constraints(&trace, rule));
    findings.extend(check_operation(&trace, rule));
    findings.extend(check_order(&trace, rule));
    TraceVerdict { secure: findings.is_empty(), trace, findings }
}

/// Traces whose class has no rule are dropped.
pub fn analyze_traces(traces: Vec<ObjectTrace>, rules: &RulePack) -> Vec<TraceVerdict> {
    traces
        .into_iter()
        .filter_map(|t| {
            let rule = rules.get(&t.api_class)?;
            Some(analyze_trace(t, rule))
        })
        .collect()
}

pub fn analyze_file(file: &SourceFile, rules: &RulePack) -> Result<Vec<TraceVerdict>, ParseError> {
    Ok(analyze_traces(extract_traces(file, rules)?, rules))
}

pub fn report_entries<'a>(findings: impl IntoIterator<Item = &'a Finding>) -> Vec<ReportEntry> {
    findings
        .into_iter()
        .map(|f| ReportEntry {
            category: f.category,
            api: f.api_class.clone(),
            file: f.file.clone(),
            line: f.line,
            message: f.message.clone(),
            rule_element: f.rule_element.clone(),
        })
        .collect()
}
