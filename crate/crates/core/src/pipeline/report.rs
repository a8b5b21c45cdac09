use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::PipelineError;
use crate::analyzer::Finding;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IssueReport {
    pub project_id: String,
    pub title: String,
    pub body: String,
    pub findings: Vec<Finding>,
}

/// Markdown issue text, one entry per finding grouped by file.
pub fn render_issue_report(project_id: &str, findings: &[Finding]) -> Result<IssueReport, PipelineError> {
    if findings.is_empty() {
        return Err(PipelineError::EmptyFindings(project_id.into()));
    }
    let mut findings = findings.to_vec();
    findings.sort_by(|a, b| (&a.file, a.line, a.category).cmp(&(&b.file, b.line, b.category)));
    let title = format!("Potential cryptographic misuse(s) in {project_id}");
    let mut body = format!("# {title}\n\n");
    let _ = writeln!(
        body,
        "Static analysis found {} potential misuse(s) of the Java Cryptography Architecture.",
        findings.len()
    );
    let mut current: Option<&str> = None;
    for f in &findings {
        if current != Some(f.file.as_str()) {
            let _ = write!(body, "\n## `{}`\n\n", f.file);
            current = Some(&f.file);
        }
        let _ = writeln!(
            body,
            "- **{}** on `{}` at `{}` line {}: {}",
            f.category, f.api_class, f.file, f.line, f.message
        );
    }
    Ok(IssueReport { project_id: project_id.into(), title, body, findings })
}

fn file_stem(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' }).collect()
}

/// Writes `<out>/issues/<project_id>.md`.
pub fn write_issue_report(out_dir: &Path, report: &IssueReport) -> std::io::Result<PathBuf> {
    let dir = out_dir.join("issues");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join(format!("{}.md", file_stem(&report.project_id)));
    std::fs::write(&path, &report.body)?;
    Ok(path)
}
