use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Mutex;

use crate::store::{BlameInfo, ProjectRecord};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("no blame for {file}:{line}: {reason}")]
pub struct BlameUnavailable {
    pub file: String,
    pub line: u32,
    pub reason: String,
}

/// Last committer of a line. `file` is relative to the project directory.
pub trait BlameProvider: Send + Sync {
    fn blame(&self, project: &ProjectRecord, file: &str, line: u32) -> Result<BlameInfo, BlameUnavailable>;
}

pub fn attribute_blame(
    provider: &dyn BlameProvider,
    project: &ProjectRecord,
    file: &str,
    line: u32,
) -> Result<BlameInfo, BlameUnavailable> {
    provider.blame(project, file, line)
}

fn unavailable(file: &str, line: u32, reason: impl Into<String>) -> BlameUnavailable {
    BlameUnavailable { file: file.into(), line, reason: reason.into() }
}

pub struct NoBlame;

impl BlameProvider for NoBlame {
    fn blame(&self, _: &ProjectRecord, file: &str, line: u32) -> Result<BlameInfo, BlameUnavailable> {
        Err(unavailable(file, line, "blame disabled"))
    }
}

type Sidecar = HashMap<String, BlameInfo>;

/// Reads `<project>/blame.json`, a map from `"path:line"` to blame info.
pub struct SidecarBlame {
    root: PathBuf,
    cache: Mutex<HashMap<String, Result<Sidecar, String>>>,
}

impl SidecarBlame {
    pub fn new(corpus_root: impl Into<PathBuf>) -> Self {
        SidecarBlame { root: corpus_root.into(), cache: Mutex::new(HashMap::new()) }
    }

    fn load(path: &Path) -> Result<Sidecar, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}

impl BlameProvider for SidecarBlame {
    fn blame(&self, project: &ProjectRecord, file: &str, line: u32) -> Result<BlameInfo, BlameUnavailable> {
        let mut cache = self.cache.lock().unwrap_or_else(|p| p.into_inner());
        let sidecar = cache
            .entry(project.id.clone())
            .or_insert_with(|| Self::load(&self.root.join(&project.path).join("blame.json")));
        match sidecar {
            Ok(map) => map.get(&format!("{file}:{line}")).cloned().ok_or_else(|| unavailable(file, line, "line not in sidecar")),
            Err(reason) => Err(unavailable(file, line, reason.clone())),
        }
    }
}

/// Runs `git blame --porcelain` in the project directory.
pub struct GitBlame {
    root: PathBuf,
}

impl GitBlame {
    pub fn new(corpus_root: impl Into<PathBuf>) -> Self {
        GitBlame { root: corpus_root.into() }
    }
}

pub fn parse_porcelain(out: &str) -> Option<BlameInfo> {
    let (mut author, mut email, mut time) = (None, None, None);
    for l in out.lines() {
        if let Some(v) = l.strip_prefix("author ") {
            author = Some(v.to_string());
        } else if let Some(v) = l.strip_prefix("author-mail ") {
            email = Some(v.trim_matches(|c| c == '<' || c == '>').to_string());
        } else if let Some(v) = l.strip_prefix("committer-time ") {
            time = v.trim().parse::<i64>().ok();
        }
    }
    Some(BlameInfo { author: author?, email: email.unwrap_or_default(), commit_time: time?.max(0) })
}

impl BlameProvider for GitBlame {
    fn blame(&self, project: &ProjectRecord, file: &str, line: u32) -> Result<BlameInfo, BlameUnavailable> {
        let out = Command::new("git")
            .arg("-C")
            .arg(self.root.join(&project.path))
            .args(["blame", "--porcelain", "-L", &format!("{line},{line}"), "--", file])
            .output()
            .map_err(|e| unavailable(file, line, e.to_string()))?;
        if !out.status.success() {
            return Err(unavailable(file, line, String::from_utf8_lossy(&out.stderr).trim().to_string()));
        }
        parse_porcelain(&String::from_utf8_lossy(&out.stdout)).ok_or_else(|| unavailable(file, line, "unexpected git output"))
    }
}
