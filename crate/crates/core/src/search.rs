//! Example search over the usage store: AND matching on api classes, verdict
//! filtering with a mixed fallback, proximity ranking, dedup and paging.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analyzer::MisuseCategory;
use crate::store::{Store, UsageRecord};

pub const DEFAULT_PAGE_SIZE: usize = 20;
pub const MAX_PAGE_SIZE: usize = 100;
pub const DEFAULT_DEDUP_CAP: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Secure,
    Buggy,
    #[default]
    Any,
}

impl Mode {
    fn admits(self, effective_secure: bool) -> bool {
        match self {
            Mode::Secure => effective_secure,
            Mode::Buggy => !effective_secure,
            Mode::Any => true,
        }
    }
}

impl FromStr for Mode {
    type Err = SearchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "secure" => Ok(Mode::Secure),
            "buggy" => Ok(Mode::Buggy),
            "any" => Ok(Mode::Any),
            other => Err(SearchError::BadMode(other.to_string())),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Secure => "secure",
            Mode::Buggy => "buggy",
            Mode::Any => "any",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SearchError {
    #[error("no API class given or detected")]
    EmptyQuery,
    #[error("unknown mode {0:?}; expected secure, buggy or any")]
    BadMode(String),
    #[error("page must be at least 1")]
    BadPage,
    #[error("page_size must be between 1 and {MAX_PAGE_SIZE}")]
    BadPageSize,
    #[error("dedup cap must be at least 1")]
    BadCap,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub api_classes: BTreeSet<String>,
    pub mode: Mode,
    /// 1-based.
    pub page: usize,
    pub page_size: usize,
    /// Append the examples dropped by dedup after the kept ones.
    pub include_duplicates: bool,
    pub dedup_cap: usize,
}

impl Query {
    pub fn new<I, S>(apis: I, mode: Mode) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Query {
            api_classes: apis.into_iter().map(Into::into).collect(),
            mode,
            page: 1,
            page_size: DEFAULT_PAGE_SIZE,
            include_duplicates: false,
            dedup_cap: DEFAULT_DEDUP_CAP,
        }
    }

    pub fn validate(&self) -> Result<(), SearchError> {
        if self.api_classes.is_empty() {
            return Err(SearchError::EmptyQuery);
        }
        if self.page == 0 {
            return Err(SearchError::BadPage);
        }
        if !(1..=MAX_PAGE_SIZE).contains(&self.page_size) {
            return Err(SearchError::BadPageSize);
        }
        if self.dedup_cap == 0 {
            return Err(SearchError::BadCap);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchedUsage {
    pub usage_id: String,
    pub api_class: String,
    pub line: u32,
    /// Effective verdict: a false positive counts as secure.
    pub secure: bool,
    pub false_positive: bool,
    pub enclosing_method: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub same_method_fraction: f64,
    pub line_stddev: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SignatureEntry {
    pub api_class: String,
    pub category: MisuseCategory,
    pub rule_element: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleDoc {
    pub key: String,
    pub project_id: String,
    pub matched_usages: Vec<MatchedUsage>,
    pub score: Score,
    pub fallback_mixed: bool,
    pub dedup_signature: Vec<SignatureEntry>,
    /// Set on examples shown only because duplicates were requested.
    pub duplicate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchPage {
    pub results: Vec<ExampleDoc>,
    /// Size of the full result list across pages.
    pub total: usize,
    pub fallback_mixed: bool,
    pub page: usize,
    pub page_size: usize,
}

/// Share of usages in the most common enclosing method, and the population
/// standard deviation of their lines.
pub fn proximity_score<'a>(usages: impl IntoIterator<Item = (u32, &'a str)>) -> Score {
    let usages: Vec<(u32, &str)> = usages.into_iter().collect();
    if usages.is_empty() {
        return Score { same_method_fraction: 0.0, line_stddev: 0.0 };
    }
    let mut per_method: BTreeMap<&str, usize> = BTreeMap::new();
    for (_, m) in &usages {
        *per_method.entry(m).or_default() += 1;
    }
    let n = usages.len() as f64;
    let largest = per_method.values().copied().max().unwrap_or(0) as f64;
    let lines: Vec<f64> = usages.iter().map(|(l, _)| f64::from(*l)).collect();
    let (_, sd) = crate::store::mean_sd(&lines);
    Score { same_method_fraction: largest / n, line_stddev: sd }
}

pub fn compare_docs(a: &ExampleDoc, b: &ExampleDoc) -> Ordering {
    b.score
        .same_method_fraction
        .total_cmp(&a.score.same_method_fraction)
        .then(a.score.line_stddev.total_cmp(&b.score.line_stddev))
        .then_with(|| a.key.cmp(&b.key))
}

pub fn rank_examples(mut docs: Vec<ExampleDoc>) -> Vec<ExampleDoc> {
    docs.sort_by(compare_docs);
    docs
}

/// Keeps at most `cap` docs per non-empty signature, in rank order.
/// Returns (kept, suppressed).
pub fn dedup_results(docs: Vec<ExampleDoc>, cap: usize) -> (Vec<ExampleDoc>, Vec<ExampleDoc>) {
    let mut seen: BTreeMap<Vec<SignatureEntry>, usize> = BTreeMap::new();
    let (mut kept, mut suppressed) = (Vec::new(), Vec::new());
    for d in docs {
        if d.dedup_signature.is_empty() {
            kept.push(d);
            continue;
        }
        let n = seen.entry(d.dedup_signature.clone()).or_default();
        if *n < cap {
            *n += 1;
            kept.push(d);
        } else {
            suppressed.push(d);
        }
    }
    (kept, suppressed)
}

fn build_doc(key: &str, usages: &[&UsageRecord], fallback: bool) -> ExampleDoc {
    let matched: Vec<MatchedUsage> = usages
        .iter()
        .map(|u| MatchedUsage {
            usage_id: u.usage_id.clone(),
            api_class: u.api_class.clone(),
            line: u.line,
            secure: u.effective_secure(),
            false_positive: u.false_positive,
            enclosing_method: u.enclosing_method.clone(),
        })
        .collect();
    let signature: BTreeSet<SignatureEntry> = usages
        .iter()
        .filter(|u| !u.effective_secure())
        .flat_map(|u| &u.findings)
        .map(|f| SignatureEntry { api_class: f.api_class.clone(), category: f.category, rule_element: f.rule_element.clone() })
        .collect();
    ExampleDoc {
        key: key.to_string(),
        project_id: usages.first().map(|u| u.project_id.clone()).unwrap_or_default(),
        score: proximity_score(matched.iter().map(|m| (m.line, m.enclosing_method.as_str()))),
        matched_usages: matched,
        fallback_mixed: fallback,
        dedup_signature: signature.into_iter().collect(),
        duplicate: false,
    }
}

/// Files whose usages cover every queried class under `admit`, with the
/// admitted usages of queried classes.
fn candidates<'s>(
    by_file: &BTreeMap<&'s str, Vec<&'s UsageRecord>>,
    apis: &BTreeSet<String>,
    admit: impl Fn(&UsageRecord) -> bool,
) -> Vec<(&'s str, Vec<&'s UsageRecord>)> {
    by_file
        .iter()
        .filter_map(|(key, usages)| {
            let matched: Vec<&UsageRecord> =
                usages.iter().copied().filter(|u| apis.contains(&u.api_class) && admit(u)).collect();
            let covered: BTreeSet<&str> = matched.iter().map(|u| u.api_class.as_str()).collect();
            (covered.len() == apis.len()).then_some((*key, matched))
        })
        .collect()
}

pub fn execute_query(q: &Query, store: &Store) -> Result<SearchPage, SearchError> {
    q.validate()?;
    let by_file = store.usages_by_file();
    let strict = candidates(&by_file, &q.api_classes, |u| q.mode.admits(u.effective_secure()));
    let (found, fallback) = if strict.is_empty() && q.mode != Mode::Any {
        let mixed = candidates(&by_file, &q.api_classes, |_| true)
            .into_iter()
            .filter(|(_, us)| us.iter().any(|u| u.effective_secure()) && us.iter().any(|u| !u.effective_secure()))
            .collect::<Vec<_>>();
        let flag = !mixed.is_empty();
        (mixed, flag)
    } else {
        (strict, false)
    };
    let docs = found.iter().map(|(key, us)| build_doc(key, us, fallback)).collect();
    let (mut results, suppressed) = dedup_results(rank_examples(docs), q.dedup_cap);
    if q.include_duplicates {
        results.extend(suppressed.into_iter().map(|mut d| {
            d.duplicate = true;
            d
        }));
    }
    let total = results.len();
    let start = (q.page - 1).saturating_mul(q.page_size).min(total);
    let end = start.saturating_add(q.page_size).min(total);
    Ok(SearchPage {
        results: results.drain(start..end).collect(),
        total,
        fallback_mixed: fallback,
        page: q.page,
        page_size: q.page_size,
    })
}
