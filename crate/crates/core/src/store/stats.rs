use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::UsageRecord;

/// Table-shaped corpus summary. Projects without any usage are not counted.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StatsSummary {
    pub projects_secure: usize,
    pub projects_buggy: usize,
    pub projects_total: usize,
    pub usages_secure: usize,
    pub usages_buggy: usize,
    pub usages_total: usize,
    pub avg_distinct_apis_per_project: f64,
    pub sd_distinct_apis_per_project: f64,
    pub avg_commits_per_project: f64,
    pub sd_commits_per_project: f64,
}

/// Mean and population standard deviation; zeros for no samples.
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub(super) fn summarize<'a>(projects: impl Iterator<Item = &'a [UsageRecord]>) -> StatsSummary {
    let mut s = StatsSummary::default();
    let mut apis = Vec::new();
    let mut commits = Vec::new();
    for usages in projects.filter(|u| !u.is_empty()) {
        let buggy = usages.iter().filter(|u| !u.effective_secure()).count();
        s.usages_buggy += buggy;
        s.usages_secure += usages.len() - buggy;
        if buggy > 0 {
            s.projects_buggy += 1;
        } else {
            s.projects_secure += 1;
        }
        apis.push(usages.iter().map(|u| u.api_class.as_str()).collect::<BTreeSet<_>>().len() as f64);
        let distinct: BTreeSet<(i64, &str)> =
            usages.iter().filter_map(|u| u.blame.as_ref()).map(|b| (b.commit_time, b.author.as_str())).collect();
        commits.push(distinct.len() as f64);
    }
    s.projects_total = s.projects_secure + s.projects_buggy;
    s.usages_total = s.usages_secure + s.usages_buggy;
    (s.avg_distinct_apis_per_project, s.sd_distinct_apis_per_project) = mean_sd(&apis);
    (s.avg_commits_per_project, s.sd_commits_per_project) = mean_sd(&commits);
    s
}
