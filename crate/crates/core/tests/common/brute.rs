//! Statistics recomputed from scratch over every usage record.

use std::collections::{BTreeMap, BTreeSet};

use super::synth::{project, verdict};
use jcalens_core::analyzer::MisuseCategory;
use jcalens_core::store::{FileUsages, ProjectStatus, StatsSummary, Store};

pub fn brute(store: &Store) -> StatsSummary {
    let mut per: BTreeMap<&str, Vec<_>> = BTreeMap::new();
    for u in store.usages() {
        per.entry(u.project_id.as_str()).or_default().push(u);
    }
    let mut s = StatsSummary::default();
    let (mut apis, mut commits) = (Vec::new(), Vec::new());
    for us in per.values() {
        let buggy = us.iter().filter(|u| !u.secure && !u.false_positive).count();
        s.usages_buggy += buggy;
        s.usages_secure += us.len() - buggy;
        if buggy == 0 {
            s.projects_secure += 1;
        } else {
            s.projects_buggy += 1;
        }
        apis.push(us.iter().map(|u| &u.api_class).collect::<BTreeSet<_>>().len() as f64);
        commits.push(us.iter().filter_map(|u| u.blame.as_ref()).map(|b| (b.commit_time, &b.author)).collect::<BTreeSet<_>>().len() as f64);
    }
    s.projects_total = per.len();
    s.usages_total = store.usages().count();
    let msd = |xs: &[f64]| {
        if xs.is_empty() {
            return (0.0, 0.0);
        }
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        (m, (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt())
    };
    (s.avg_distinct_apis_per_project, s.sd_distinct_apis_per_project) = msd(&apis);
    (s.avg_commits_per_project, s.sd_commits_per_project) = msd(&commits);
    s
}

pub fn close(a: &StatsSummary, b: &StatsSummary) {
    assert_eq!(
        (a.projects_secure, a.projects_buggy, a.projects_total, a.usages_secure, a.usages_buggy, a.usages_total),
        (b.projects_secure, b.projects_buggy, b.projects_total, b.usages_secure, b.usages_buggy, b.usages_total)
    );
    for (x, y) in [
        (a.avg_distinct_apis_per_project, b.avg_distinct_apis_per_project),
        (a.sd_distinct_apis_per_project, b.sd_distinct_apis_per_project),
        (a.avg_commits_per_project, b.avg_commits_per_project),
        (a.sd_commits_per_project, b.sd_commits_per_project),
    ] {
        assert!((x - y).abs() < 1e-9, "{x} vs {y}");
    }
}

/// 642/1682 projects and 3263/5897 usages, every project with at least one usage.
pub fn table_store() -> Store {
    const SECURE_PROJECTS: usize = 642;
    const BUGGY_PROJECTS: usize = 1682;
    const SECURE_USAGES: usize = 3263;
    const BUGGY_USAGES: usize = 5897;

    // spread usages round-robin; every project gets at least one
    let mut secure = vec![0usize; SECURE_PROJECTS + BUGGY_PROJECTS];
    let mut buggy = vec![0usize; BUGGY_PROJECTS];
    (0..SECURE_USAGES).for_each(|i| secure[i % (SECURE_PROJECTS + BUGGY_PROJECTS)] += 1);
    (0..BUGGY_USAGES).for_each(|i| buggy[i % BUGGY_PROJECTS] += 1);

    let mut store = Store::in_memory();
    let apis = ["Cipher", "Mac", "MessageDigest"];
    for p in 0..secure.len() {
        let id = format!("proj{p:04}");
        project(&mut store, &id);
        let key = format!("{id}/src/A.java");
        let bugs = if p >= SECURE_PROJECTS { buggy[p - SECURE_PROJECTS] } else { 0 };
        let usages = (0..secure[p] + bugs)
            .map(|i| {
                let bug = (i < bugs).then_some((MisuseCategory::WrongConstraint, "x"));
                (verdict(&key, i, apis[i % 3], i as u32 + 1, "m", bug), None)
            })
            .collect();
        store.put_usages(&id, vec![FileUsages { key, source: String::new(), usages }]).unwrap();
        store.set_status(&id, ProjectStatus::Analyzed).unwrap();
    }
    store
}
