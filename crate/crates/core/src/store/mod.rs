//! Persistent record of every analyzed usage, with corpus statistics and
//! false-positive curation.

mod backend;
mod stats;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analyzer::{Finding, TraceVerdict};
pub use backend::{FileBackend, MemoryBackend, StoreBackend, FORMAT, VERSION};
pub use stats::{mean_sd, StatsSummary};

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("store is corrupt at line {line}: {message}")]
    Corrupt { line: usize, message: String },
    #[error("unsupported store version {0}")]
    UnsupportedVersion(u32),
    #[error("encoding: {0}")]
    Encode(#[from] serde_json::Error),
    #[error("unknown project {0}")]
    UnknownProject(String),
    #[error("project {0} already exists")]
    DuplicateProject(String),
    #[error("unknown usage {0}")]
    UnknownUsage(String),
    #[error("usage {0} is already secure")]
    AlreadySecure(String),
    #[error("unknown example {0}")]
    UnknownExample(String),
    #[error("project {id}: cannot move from {from:?} to {to:?}")]
    InvalidTransition { id: String, from: ProjectStatus, to: ProjectStatus },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ProjectStatus {
    Pending,
    Analyzed,
    SkippedDuplicate,
    SkippedUnparseable,
    TimedOut,
}

impl ProjectStatus {
    pub fn is_terminal(self) -> bool {
        self != ProjectStatus::Pending
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ProjectStatus::Pending => "PENDING",
            ProjectStatus::Analyzed => "ANALYZED",
            ProjectStatus::SkippedDuplicate => "SKIPPED_DUPLICATE",
            ProjectStatus::SkippedUnparseable => "SKIPPED_UNPARSEABLE",
            ProjectStatus::TimedOut => "TIMED_OUT",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectRecord {
    pub id: String,
    pub url: String,
    pub canonical_id: String,
    /// Directory relative to the corpus root.
    pub path: String,
    pub status: ProjectStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BlameInfo {
    pub author: String,
    pub email: String,
    /// UTC seconds.
    pub commit_time: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageRecord {
    pub usage_id: String,
    pub project_id: String,
    /// Example key of the containing file.
    pub file: String,
    pub api_class: String,
    /// Allocation line of the object.
    pub line: u32,
    pub enclosing_method: String,
    pub secure: bool,
    pub findings: Vec<Finding>,
    pub blame: Option<BlameInfo>,
    #[serde(default)]
    pub false_positive: bool,
}

impl UsageRecord {
    /// Secure as far as queries and statistics are concerned.
    pub fn effective_secure(&self) -> bool {
        self.secure || self.false_positive
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredFile {
    pub key: String,
    pub project_id: String,
    pub source: String,
}

/// One analyzed file as handed to `put_usages`.
#[derive(Debug, Clone)]
pub struct FileUsages {
    /// Corpus-relative path; becomes the example key.
    pub key: String,
    pub source: String,
    pub usages: Vec<(TraceVerdict, Option<BlameInfo>)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Example {
    pub key: String,
    pub project_id: String,
    pub source: String,
    pub usages: Vec<UsageRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum LogEntry {
    Meta { corpus_root: String },
    Project { record: ProjectRecord },
    Status { id: String, status: ProjectStatus },
    Usages { project_id: String, files: Vec<StoredFile>, usages: Vec<UsageRecord> },
    FalsePositive { usage_id: String },
}

#[derive(Debug, Clone, Default, PartialEq)]
struct State {
    corpus_root: Option<String>,
    projects: BTreeMap<String, ProjectRecord>,
    /// project id → files and usages of that project
    files: BTreeMap<String, Vec<StoredFile>>,
    usages: BTreeMap<String, Vec<UsageRecord>>,
    /// usage id → project id
    usage_index: BTreeMap<String, String>,
    /// example key → project id
    file_index: BTreeMap<String, String>,
}

impl State {
    fn apply(&mut self, entry: LogEntry) {
        match entry {
            LogEntry::Meta { corpus_root } => self.corpus_root = Some(corpus_root),
            LogEntry::Project { record } => {
                self.projects.insert(record.id.clone(), record);
            }
            LogEntry::Status { id, status } => {
                if let Some(p) = self.projects.get_mut(&id) {
                    p.status = status;
                }
            }
            LogEntry::Usages { project_id, files, usages } => {
                for old in self.usages.remove(&project_id).unwrap_or_default() {
                    self.usage_index.remove(&old.usage_id);
                }
                for old in self.files.remove(&project_id).unwrap_or_default() {
                    self.file_index.remove(&old.key);
                }
                for u in &usages {
                    self.usage_index.insert(u.usage_id.clone(), project_id.clone());
                }
                for f in &files {
                    self.file_index.insert(f.key.clone(), project_id.clone());
                }
                self.files.insert(project_id.clone(), files);
                self.usages.insert(project_id, usages);
            }
            LogEntry::FalsePositive { usage_id } => {
                if let Some(u) = self.usage_mut(&usage_id) {
                    u.false_positive = true;
                }
            }
        }
    }

    fn usage_mut(&mut self, id: &str) -> Option<&mut UsageRecord> {
        let project = self.usage_index.get(id)?;
        self.usages.get_mut(project)?.iter_mut().find(|u| u.usage_id == id)
    }

    fn usage(&self, id: &str) -> Option<&UsageRecord> {
        let project = self.usage_index.get(id)?;
        self.usages.get(project)?.iter().find(|u| u.usage_id == id)
    }

    fn snapshot(&self) -> Vec<LogEntry> {
        let mut out = Vec::new();
        if let Some(root) = &self.corpus_root {
            out.push(LogEntry::Meta { corpus_root: root.clone() });
        }
        out.extend(self.projects.values().map(|p| LogEntry::Project { record: p.clone() }));
        for (project_id, usages) in &self.usages {
            out.push(LogEntry::Usages {
                project_id: project_id.clone(),
                files: self.files.get(project_id).cloned().unwrap_or_default(),
                usages: usages.clone(),
            });
        }
        out
    }
}

/// Stable, URL-safe id of a usage.
pub fn usage_id(project_id: &str, file: &str, object_id: &str) -> String {
    let digest = Sha256::new().chain_update(project_id).chain_update([0]).chain_update(file).chain_update([0]).chain_update(object_id).finalize();
    let hex: String = digest.iter().take(10).map(|b| format!("{b:02x}")).collect();
    format!("u{hex}")
}

/// Single-writer store. Wrap in a lock to share it between threads.
pub struct Store {
    backend: Box<dyn StoreBackend>,
    state: State,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store").field("projects", &self.state.projects.len()).finish()
    }
}

impl Store {
    pub fn with_backend(mut backend: Box<dyn StoreBackend>) -> Result<Self, StoreError> {
        let mut state = State::default();
        for e in backend.load()? {
            state.apply(e);
        }
        Ok(Store { backend, state })
    }

    pub fn in_memory() -> Self {
        Store { backend: Box::new(MemoryBackend::default()), state: State::default() }
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        Self::with_backend(Box::new(FileBackend::new(path.as_ref())))
    }

    fn commit(&mut self, entry: LogEntry) -> Result<(), StoreError> {
        self.backend.append(&entry)?;
        self.state.apply(entry);
        Ok(())
    }

    /// Rewrites the log as a minimal snapshot of the current state.
    pub fn compact(&mut self) -> Result<(), StoreError> {
        self.backend.rewrite(&self.state.snapshot())
    }

    /// Writes a compact copy of the current state to a new store file.
    pub fn save_as(&self, path: impl AsRef<Path>) -> Result<(), StoreError> {
        FileBackend::new(path.as_ref()).rewrite(&self.state.snapshot())
    }

    pub fn corpus_root(&self) -> Option<&str> {
        self.state.corpus_root.as_deref()
    }

    pub fn set_corpus_root(&mut self, root: &str) -> Result<(), StoreError> {
        if self.corpus_root() == Some(root) {
            return Ok(());
        }
        self.commit(LogEntry::Meta { corpus_root: root.to_string() })
    }

    pub fn project(&self, id: &str) -> Option<&ProjectRecord> {
        self.state.projects.get(id)
    }

    pub fn projects(&self) -> impl Iterator<Item = &ProjectRecord> {
        self.state.projects.values()
    }

    pub fn insert_project(&mut self, record: ProjectRecord) -> Result<(), StoreError> {
        if self.state.projects.contains_key(&record.id) {
            return Err(StoreError::DuplicateProject(record.id));
        }
        self.commit(LogEntry::Project { record })
    }

    /// Only PENDING projects may change status.
    pub fn set_status(&mut self, id: &str, status: ProjectStatus) -> Result<(), StoreError> {
        let current = self.project(id).ok_or_else(|| StoreError::UnknownProject(id.into()))?.status;
        if current.is_terminal() {
            return Err(StoreError::InvalidTransition { id: id.into(), from: current, to: status });
        }
        self.commit(LogEntry::Status { id: id.into(), status })
    }

    /// Replaces every usage of the project. False-positive marks survive for
    /// usages that keep their id and are still buggy.
    pub fn put_usages(&mut self, project_id: &str, files: Vec<FileUsages>) -> Result<usize, StoreError> {
        if !self.state.projects.contains_key(project_id) {
            return Err(StoreError::UnknownProject(project_id.into()));
        }
        let mut stored_files = Vec::new();
        let mut usages = Vec::new();
        for f in files {
            if f.usages.is_empty() {
                continue;
            }
            for (verdict, blame) in f.usages {
                let id = usage_id(project_id, &f.key, &verdict.trace.object_id);
                let kept_fp = !verdict.secure && self.state.usage(&id).is_some_and(|u| u.false_positive);
                usages.push(UsageRecord {
                    usage_id: id,
                    project_id: project_id.to_string(),
                    file: f.key.clone(),
                    api_class: verdict.trace.api_class,
                    line: verdict.trace.allocation_line,
                    enclosing_method: verdict.trace.enclosing_method,
                    secure: verdict.secure,
                    findings: verdict.findings,
                    blame,
                    false_positive: kept_fp,
                });
            }
            stored_files.push(StoredFile { key: f.key, project_id: project_id.to_string(), source: f.source });
        }
        usages.sort_by(|a, b| (&a.file, a.line, &a.usage_id).cmp(&(&b.file, b.line, &b.usage_id)));
        stored_files.sort_by(|a, b| a.key.cmp(&b.key));
        let count = usages.len();
        self.commit(LogEntry::Usages { project_id: project_id.into(), files: stored_files, usages })?;
        Ok(count)
    }

    pub fn mark_false_positive(&mut self, usage_id: &str) -> Result<UsageRecord, StoreError> {
        let u = self.state.usage(usage_id).ok_or_else(|| StoreError::UnknownUsage(usage_id.into()))?;
        if u.secure {
            return Err(StoreError::AlreadySecure(usage_id.into()));
        }
        if !u.false_positive {
            self.commit(LogEntry::FalsePositive { usage_id: usage_id.into() })?;
        }
        Ok(self.state.usage(usage_id).expect("usage exists").clone())
    }

    pub fn usage(&self, id: &str) -> Option<&UsageRecord> {
        self.state.usage(id)
    }

    /// All usages, grouped by project id then file and line.
    pub fn usages(&self) -> impl Iterator<Item = &UsageRecord> {
        self.state.usages.values().flatten()
    }

    pub fn usages_of(&self, project_id: &str) -> &[UsageRecord] {
        self.state.usages.get(project_id).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Example keys in order.
    pub fn example_keys(&self) -> impl Iterator<Item = &str> {
        self.state.file_index.keys().map(String::as_str)
    }

    pub fn get_example(&self, key: &str) -> Result<Example, StoreError> {
        let project = self.state.file_index.get(key).ok_or_else(|| StoreError::UnknownExample(key.into()))?;
        let file = self.state.files[project].iter().find(|f| f.key == key).expect("indexed file exists");
        let usages = self.usages_of(project).iter().filter(|u| u.file == key).cloned().collect();
        Ok(Example { key: key.into(), project_id: project.clone(), source: file.source.clone(), usages })
    }

    /// Usages per example key, for query evaluation.
    pub fn usages_by_file(&self) -> BTreeMap<&str, Vec<&UsageRecord>> {
        let mut out: BTreeMap<&str, Vec<&UsageRecord>> = BTreeMap::new();
        for u in self.usages() {
            out.entry(u.file.as_str()).or_default().push(u);
        }
        out
    }

    pub fn stats_summary(&self) -> StatsSummary {
        stats::summarize(self.state.usages.values().map(Vec::as_slice))
    }

    /// Distinct api classes present in the store.
    pub fn api_classes(&self) -> BTreeSet<&str> {
        self.usages().map(|u| u.api_class.as_str()).collect()
    }
}
