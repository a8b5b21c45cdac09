//! Linear-scan model of query evaluation.

use std::collections::{BTreeMap, BTreeSet};

use super::synth::{random_store, APIS};
use jcalens_core::search::{execute_query, Mode, Query};
use jcalens_core::store::{Store, UsageRecord};
use rand::rngs::StdRng;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};

/// (key, matched usage ids, same-method fraction, line sd, signature)
pub type ExpectedDoc = (String, BTreeSet<String>, f64, f64, BTreeSet<String>);

pub struct Expected {
    pub docs: Vec<ExpectedDoc>,
    pub fallback: bool,
}

pub fn scan(store: &Store, apis: &BTreeSet<String>, mode: Mode) -> Expected {
    let mut files: BTreeMap<String, Vec<&UsageRecord>> = BTreeMap::new();
    for u in store.usages() {
        files.entry(u.file.clone()).or_default().push(u);
    }
    let pick = |want: Option<bool>| {
        let mut out = Vec::new();
        for (key, us) in &files {
            let m: Vec<&UsageRecord> = us
                .iter()
                .copied()
                .filter(|u| apis.contains(&u.api_class))
                .filter(|u| want.is_none_or(|w| (u.secure || u.false_positive) == w))
                .collect();
            if apis.iter().all(|a| m.iter().any(|u| &u.api_class == a)) {
                out.push((key.clone(), m));
            }
        }
        out
    };
    let want = match mode {
        Mode::Secure => Some(true),
        Mode::Buggy => Some(false),
        Mode::Any => None,
    };
    let mut found = pick(want);
    let mut fallback = false;
    if found.is_empty() && mode != Mode::Any {
        found = pick(None)
            .into_iter()
            .filter(|(_, m)| {
                let sec = m.iter().filter(|u| u.secure || u.false_positive).count();
                sec > 0 && sec < m.len()
            })
            .collect();
        fallback = !found.is_empty();
    }
    let docs = found
        .into_iter()
        .map(|(key, m)| {
            let mut per: BTreeMap<&str, usize> = BTreeMap::new();
            for u in &m {
                *per.entry(&u.enclosing_method).or_default() += 1;
            }
            let n = m.len() as f64;
            let frac = *per.values().max().unwrap() as f64 / n;
            let mean = m.iter().map(|u| u.line as f64).sum::<f64>() / n;
            let sd = (m.iter().map(|u| (u.line as f64 - mean).powi(2)).sum::<f64>() / n).sqrt();
            let sig = m
                .iter()
                .filter(|u| !(u.secure || u.false_positive))
                .flat_map(|u| &u.findings)
                .map(|f| format!("{}|{}|{}", f.api_class, f.category, f.rule_element))
                .collect();
            (key, m.iter().map(|u| u.usage_id.clone()).collect(), frac, sd, sig)
        })
        .collect();
    Expected { docs, fallback }
}

/// Random stores and queries against the scan. Returns (queries, non-empty, fallbacks).
pub fn check_queries(seed: u64, min_queries: usize) -> (usize, usize, usize) {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut queries = 0;
    let mut nonempty = 0;
    let mut fallbacks = 0;
    while queries < min_queries {
        let store = random_store(&mut rng, 50);
        for _ in 0..25 {
            let k = rng.random_range(1..=3);
            let apis: BTreeSet<String> = APIS.choose_multiple(&mut rng, k).map(|s| s.to_string()).collect();
            let mode = [Mode::Secure, Mode::Buggy, Mode::Any][rng.random_range(0..3)];
            let expected = scan(&store, &apis, mode);

            // everything on one page, duplicates included: same set as the scan
            let mut q = Query::new(apis.clone(), mode);
            q.page_size = 100;
            q.include_duplicates = true;
            q.dedup_cap = 1000;
            let page = execute_query(&q, &store).unwrap();
            assert_eq!(page.fallback_mixed, expected.fallback);
            assert_eq!(page.total, expected.docs.len());
            let got: BTreeMap<&str, BTreeSet<String>> = page
                .results
                .iter()
                .map(|d| (d.key.as_str(), d.matched_usages.iter().map(|m| m.usage_id.clone()).collect()))
                .collect();
            let want: BTreeMap<&str, BTreeSet<String>> =
                expected.docs.iter().map(|(k, ids, ..)| (k.as_str(), ids.clone())).collect();
            assert_eq!(got, want);

            // ranking: fraction desc, sd asc, key asc
            let mut order: Vec<_> = expected.docs.iter().collect();
            order.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.3.total_cmp(&b.3)).then(a.0.cmp(&b.0)));
            let ranked: Vec<&str> = page.results.iter().map(|d| d.key.as_str()).collect();
            assert_eq!(ranked, order.iter().map(|d| d.0.as_str()).collect::<Vec<_>>());
            for d in &page.results {
                let e = expected.docs.iter().find(|e| e.0 == d.key).unwrap();
                assert!((d.score.same_method_fraction - e.2).abs() < 1e-12);
                assert!((d.score.line_stddev - e.3).abs() < 1e-9);
            }

            // dedup at the default cap: at most 3 per non-empty signature,
            // kept in rank order, and nothing lost when duplicates are shown
            let mut q2 = Query::new(apis.clone(), mode);
            q2.page_size = 100;
            let kept = execute_query(&q2, &store).unwrap();
            let mut per_sig: BTreeMap<&BTreeSet<String>, usize> = BTreeMap::new();
            let mut expected_kept = Vec::new();
            for e in &order {
                if e.4.is_empty() {
                    expected_kept.push(e.0.as_str());
                    continue;
                }
                let n = per_sig.entry(&e.4).or_default();
                if *n < 3 {
                    *n += 1;
                    expected_kept.push(e.0.as_str());
                }
            }
            assert_eq!(kept.results.iter().map(|d| d.key.as_str()).collect::<Vec<_>>(), expected_kept);

            queries += 1;
            nonempty += usize::from(!expected.docs.is_empty());
            fallbacks += usize::from(expected.fallback);
        }
    }
    (queries, nonempty, fallbacks)
}

/// Paging over random stores reproduces the single-page list.
pub fn check_paging(seed: u64) {
    let mut rng = StdRng::seed_from_u64(seed);
    for _ in 0..20 {
        let store = random_store(&mut rng, 50);
        let mut q = Query::new(["Cipher"], Mode::Any);
        q.page_size = 100;
        let all = execute_query(&q, &store).unwrap();
        for size in [1, 3, 7] {
            let mut seen = Vec::new();
            for page in 1.. {
                let mut q = Query::new(["Cipher"], Mode::Any);
                q.page_size = size;
                q.page = page;
                let p = execute_query(&q, &store).unwrap();
                assert_eq!(p.total, all.total);
                if p.results.is_empty() {
                    break;
                }
                assert!(p.results.len() <= size);
                seen.extend(p.results.into_iter().map(|d| d.key));
            }
            assert_eq!(seen, all.results.iter().map(|d| d.key.clone()).collect::<Vec<_>>());
        }
    }
}
