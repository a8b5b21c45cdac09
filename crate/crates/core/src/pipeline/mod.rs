//! Corpus ingestion, per-project analysis and issue reports.

mod blame;
mod report;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::analyzer::{analyze_file, Finding, TraceVerdict};
use crate::extract::{ParseError, SourceFile};
use crate::rules::RulePack;
use crate::store::{FileUsages, ProjectRecord, ProjectStatus, Store, StoreError};
pub use blame::{attribute_blame, parse_porcelain, BlameProvider, BlameUnavailable, GitBlame, NoBlame, SidecarBlame};
pub use report::{render_issue_report, write_issue_report, IssueReport};

pub const DEFAULT_BUDGET: Duration = Duration::from_secs(900);
pub const DEFAULT_BATCH_LIMIT: usize = 100;
pub const MANIFEST: &str = "project.json";

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("{path}: {message}")]
    Manifest { path: String, message: String },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("project {0} is not pending")]
    NotPending(String),
    #[error("unknown project {0}")]
    UnknownProject(String),
    #[error("no findings to report for {0}")]
    EmptyFindings(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub id: String,
    pub url: String,
    #[serde(default)]
    pub fork_of: Option<String>,
    #[serde(default)]
    pub canonical_id: Option<String>,
}

impl Manifest {
    /// Id of the fork root; the project's own id when it is not a fork.
    pub fn canonical(&self) -> &str {
        self.canonical_id.as_deref().or(self.fork_of.as_deref()).unwrap_or(&self.id)
    }
}

#[derive(Debug, Default)]
pub struct IngestOutcome {
    /// Records created by this run, in manifest order.
    pub created: Vec<ProjectRecord>,
    pub errors: Vec<PipelineError>,
}

impl IngestOutcome {
    pub fn pending(&self) -> usize {
        self.created.iter().filter(|p| p.status == ProjectStatus::Pending).count()
    }
}

fn read_manifest(path: &Path) -> Result<Manifest, PipelineError> {
    let err = |message: String| PipelineError::Manifest { path: path.display().to_string(), message };
    let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    let m: Manifest = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
    if m.id.trim().is_empty() {
        return Err(err("empty id".into()));
    }
    Ok(m)
}

/// Registers up to `limit` new PENDING projects found under `root`.
/// Forks and repeated canonical ids are recorded as duplicates and do not
/// count toward the limit. Known ids are left alone.
pub fn ingest_corpus(root: &Path, limit: usize, store: &mut Store) -> Result<IngestOutcome, PipelineError> {
    let root = root.canonicalize()?;
    store.set_corpus_root(&root.to_string_lossy())?;
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(&root)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();

    let mut canonicals: BTreeSet<String> = store.projects().map(|p| p.canonical_id.clone()).collect();
    let mut out = IngestOutcome::default();
    for dir in dirs {
        if out.pending() >= limit {
            break;
        }
        let m = match read_manifest(&dir.join(MANIFEST)) {
            Ok(m) => m,
            Err(e) => {
                log::warn!("{e}");
                out.errors.push(e);
                continue;
            }
        };
        if store.project(&m.id).is_some() {
            continue;
        }
        let canonical = m.canonical().to_string();
        let duplicate = m.fork_of.is_some() || canonical != m.id || canonicals.contains(&canonical);
        let record = ProjectRecord {
            id: m.id.clone(),
            url: m.url.clone(),
            canonical_id: canonical.clone(),
            path: dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
            status: if duplicate { ProjectStatus::SkippedDuplicate } else { ProjectStatus::Pending },
        };
        canonicals.insert(canonical);
        store.insert_project(record.clone())?;
        out.created.push(record);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct AnalyzedFile {
    /// Corpus-relative path.
    pub key: String,
    pub source: String,
    pub verdicts: Vec<TraceVerdict>,
}

#[derive(Debug, Clone)]
pub struct ProjectAnalysis {
    pub project: ProjectRecord,
    pub status: ProjectStatus,
    pub files: Vec<AnalyzedFile>,
    pub skipped: Vec<(String, ParseError)>,
}

impl ProjectAnalysis {
    pub fn findings(&self) -> impl Iterator<Item = &Finding> {
        self.files.iter().flat_map(|f| &f.verdicts).flat_map(|v| &v.findings)
    }
}

fn java_sources(dir: &Path) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = walkdir::WalkDir::new(dir)
        .sort_by_file_name()
        .into_iter()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_file() && e.path().extension().is_some_and(|x| x == "java"))
        .map(|e| e.into_path())
        .collect();
    files.sort();
    files
}

fn slash_path(p: &Path) -> String {
    p.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/")
}

/// Analyzes every `src/**/*.java` of a PENDING project. Stops with TIMED_OUT,
/// keeping what it has, once `budget` is used up; a zero budget analyzes nothing.
pub fn analyze_project(
    project: &ProjectRecord,
    corpus_root: &Path,
    rules: &RulePack,
    budget: Duration,
) -> Result<ProjectAnalysis, PipelineError> {
    if project.status != ProjectStatus::Pending {
        return Err(PipelineError::NotPending(project.id.clone()));
    }
    let start = Instant::now();
    let mut out = ProjectAnalysis {
        project: project.clone(),
        status: ProjectStatus::Analyzed,
        files: Vec::new(),
        skipped: Vec::new(),
    };
    let sources = java_sources(&corpus_root.join(&project.path).join("src"));
    for path in &sources {
        if start.elapsed() >= budget {
            out.status = ProjectStatus::TimedOut;
            break;
        }
        let key = slash_path(path.strip_prefix(corpus_root).unwrap_or(path));
        let bytes = std::fs::read(path)?;
        let Ok(text) = String::from_utf8(bytes) else {
            out.skipped.push((key, ParseError { line: 0, message: "not valid UTF-8".into() }));
            continue;
        };
        let file = SourceFile::new(key.clone(), text);
        match analyze_file(&file, rules) {
            Ok(verdicts) => out.files.push(AnalyzedFile { key, source: file.text, verdicts }),
            Err(e) => {
                log::info!("{}: {key}: {e}", project.id);
                out.skipped.push((key, e));
            }
        }
    }
    if budget.is_zero() {
        out.status = ProjectStatus::TimedOut;
    }
    if out.status == ProjectStatus::Analyzed && out.files.is_empty() && !out.skipped.is_empty() {
        out.status = ProjectStatus::SkippedUnparseable;
    }
    Ok(out)
}

/// Writes an analysis to the store: usages with blame first, then the status.
/// Returns the number of usages stored.
pub fn persist_analysis(
    store: &mut Store,
    analysis: ProjectAnalysis,
    blame: &dyn BlameProvider,
) -> Result<usize, PipelineError> {
    let project = &analysis.project;
    let prefix = format!("{}/", project.path);
    let mut files = Vec::new();
    for f in analysis.files {
        let rel = f.key.strip_prefix(&prefix).unwrap_or(&f.key).to_string();
        let usages = f
            .verdicts
            .into_iter()
            .map(|v| {
                let b = attribute_blame(blame, project, &rel, v.trace.allocation_line)
                    .map_err(|e| log::debug!("{e}"))
                    .ok();
                (v, b)
            })
            .collect();
        files.push(FileUsages { key: f.key, source: f.source, usages });
    }
    let n = if analysis.status == ProjectStatus::SkippedUnparseable { 0 } else { store.put_usages(&project.id, files)? };
    store.set_status(&project.id, analysis.status)?;
    Ok(n)
}

#[derive(Debug, Clone, Serialize)]
pub struct ProjectOutcome {
    pub project_id: String,
    pub status: ProjectStatus,
    pub usages: usize,
    pub buggy: usize,
    pub skipped_files: usize,
    pub issue: Option<PathBuf>,
}

pub struct RunOptions<'a> {
    pub rules: &'a RulePack,
    pub budget: Duration,
    pub blame: &'a dyn BlameProvider,
    /// Issue reports go to `<out>/issues/` when set.
    pub out_dir: Option<&'a Path>,
}

/// Analyzes the given PENDING projects in parallel and persists them one at
/// a time. Non-pending ids are an error before any work starts.
pub fn run_analysis(store: &mut Store, ids: &[String], opts: &RunOptions) -> Result<Vec<ProjectOutcome>, PipelineError> {
    use rayon::prelude::*;

    let root = PathBuf::from(store.corpus_root().unwrap_or("."));
    let mut projects = Vec::new();
    for id in ids {
        let p = store.project(id).ok_or_else(|| PipelineError::UnknownProject(id.clone()))?;
        if p.status != ProjectStatus::Pending {
            return Err(PipelineError::NotPending(id.clone()));
        }
        projects.push(p.clone());
    }
    let analyses: Vec<Result<ProjectAnalysis, PipelineError>> =
        projects.par_iter().map(|p| analyze_project(p, &root, opts.rules, opts.budget)).collect();

    let mut outcomes = Vec::new();
    for a in analyses {
        let a = a?;
        let id = a.project.id.clone();
        let status = a.status;
        let skipped_files = a.skipped.len();
        let usages = persist_analysis(store, a, opts.blame)?;
        let findings: Vec<Finding> = store
            .usages_of(&id)
            .iter()
            .filter(|u| !u.effective_secure())
            .flat_map(|u| u.findings.iter().cloned())
            .collect();
        let buggy = store.usages_of(&id).iter().filter(|u| !u.effective_secure()).count();
        let issue = match opts.out_dir {
            Some(out) if !findings.is_empty() => Some(write_issue_report(out, &render_issue_report(&id, &findings)?)?),
            _ => None,
        };
        outcomes.push(ProjectOutcome { project_id: id, status, usages, buggy, skipped_files, issue });
    }
    Ok(outcomes)
}

pub fn pending_ids(store: &Store) -> Vec<String> {
    store.projects().filter(|p| p.status == ProjectStatus::Pending).map(|p| p.id.clone()).collect()
}
