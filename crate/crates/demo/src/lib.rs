//! Three analyzer entry points for the browser. Each takes text and returns
//! a JSON string, so the page needs no generated type bindings.

use std::sync::OnceLock;

use serde::Serialize;
use wasm_bindgen::prelude::*;

use jcalens_core::analyzer::{analyze_file, Finding};
use jcalens_core::extract::{detect_apis_in_snippet, ParseError, SourceFile};
use jcalens_core::rules::{default_rule_pack, RulePack};

fn rules() -> &'static RulePack {
    static RULES: OnceLock<RulePack> = OnceLock::new();
    RULES.get_or_init(default_rule_pack)
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).unwrap_or_else(|e| format!("{{\"error\":{:?}}}", e.to_string()))
}

#[derive(Serialize)]
struct Usage {
    api_class: String,
    line: u32,
    enclosing_method: String,
    secure: bool,
}

#[derive(Serialize)]
struct Analysis {
    detected_apis: Vec<String>,
    usages: Vec<Usage>,
    findings: Vec<Finding>,
    parse_error: Option<ParseError>,
}

/// Findings for a Java file, class body or loose statements.
#[wasm_bindgen]
pub fn analyze_snippet(code: &str) -> String {
    let detected_apis = detect_apis_in_snippet(code, rules()).apis.into_iter().collect();
    let out = match analyze_file(&SourceFile::new("snippet", code), rules()) {
        Ok(verdicts) => Analysis {
            detected_apis,
            usages: verdicts
                .iter()
                .map(|v| Usage {
                    api_class: v.trace.api_class.clone(),
                    line: v.trace.allocation_line,
                    enclosing_method: v.trace.enclosing_method.clone(),
                    secure: v.secure,
                })
                .collect(),
            findings: verdicts.into_iter().flat_map(|v| v.findings).collect(),
            parse_error: None,
        },
        Err(e) => Analysis { detected_apis, usages: Vec::new(), findings: Vec::new(), parse_error: Some(e) },
    };
    json(&out)
}

/// Crypto classes a snippet uses, as `{"apis": [...], "notes": [...]}`.
#[wasm_bindgen]
pub fn detect_apis(code: &str) -> String {
    json(&detect_apis_in_snippet(code, rules()))
}

#[derive(Serialize)]
struct OrderCheck {
    api: String,
    pattern_alphabet: Vec<String>,
    word: Vec<String>,
    accepted: bool,
    /// Index of the first call that cannot be continued to an accepted
    /// sequence, if any.
    rejected_at: Option<usize>,
    unknown_calls: Vec<String>,
}

/// Runs a whitespace or comma separated call sequence through the class's
/// order automaton, e.g. `check_order("Cipher", "getInstance init doFinal")`.
#[wasm_bindgen]
pub fn check_order(api: &str, calls: &str) -> String {
    let Some(rule) = rules().get(api.trim()) else {
        return json(&serde_json::json!({ "error": format!("no rule for {api:?}") }));
    };
    let dfa = &rule.order;
    let word: Vec<String> = calls.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty()).map(String::from).collect();
    let states = dfa.run(word.iter().map(String::as_str));
    let rejected_at = states.iter().skip(1).position(|&s| s == dfa.dead_state());
    json(&OrderCheck {
        api: rule.simple_name().to_string(),
        pattern_alphabet: dfa.alphabet().to_vec(),
        accepted: dfa.accepts(word.iter().map(String::as_str)),
        rejected_at,
        unknown_calls: word.iter().filter(|w| !dfa.in_alphabet(w)).cloned().collect(),
        word,
    })
}
