//! One line per acceptance criterion. Runs without the libtest harness so
//! the lines always reach the terminal; exits non-zero if any fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use jcalens_core::analyzer::{analyze_file, MisuseCategory};
use jcalens_core::extract::SourceFile;
use jcalens_core::rules::default_rule_pack;
use jcalens_core::search::{proximity_score, rank_examples, ExampleDoc, Score};
use jcalens_core::store::{ProjectStatus, Store};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

type Check = fn() -> Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, started: Instant) -> Result<Duration, String> {
    let took = started.elapsed();
    ensure(took < limit, || format!("took {took:?}, limit {limit:?}"))?;
    Ok(took)
}

const LISTING: &str = include_str!("../../core/fixtures/listing1.java");

fn listing_golden() -> Result<String, String> {
    use MisuseCategory::*;
    let started = Instant::now();
    let rules = default_rule_pack();
    let verdicts = analyze_file(&SourceFile::new("Listing1.java", LISTING), &rules).map_err(|e| e.to_string())?;
    let findings: Vec<_> = verdicts.iter().flat_map(|v| &v.findings).collect();
    let mut cats: Vec<_> = findings.iter().map(|f| f.category).collect();
    cats.sort();
    let mut want = vec![ForbiddenCall, WrongType, WrongObject, WrongConstraint, IncompleteOperation];
    want.sort();
    ensure(cats == want, || format!("categories {cats:?}"))?;
    let pbe = verdicts.iter().find(|v| v.trace.api_class == "PBEKeySpec").ok_or("no PBEKeySpec trace")?;
    ensure(pbe.findings.len() == 5, || "findings not all on PBEKeySpec".into())?;
    let ctor_line = LISTING.lines().position(|l| l.contains("new PBEKeySpec")).unwrap() as u32 + 1;
    let c = pbe.findings.iter().find(|f| f.category == WrongConstraint).unwrap();
    ensure(c.line == ctor_line, || format!("constraint at {} not {ctor_line}", c.line))?;

    let without: String = LISTING.lines().filter(|l| !l.contains("ciph.init")).collect::<Vec<_>>().join("\n");
    let v2 = analyze_file(&SourceFile::new("Listing1.java", without), &rules).map_err(|e| e.to_string())?;
    let extra: Vec<_> = v2.iter().flat_map(|v| &v.findings).filter(|f| f.category == IncompleteOrder).collect();
    ensure(extra.len() == 1 && extra[0].api_class == "Cipher", || format!("{extra:?}"))?;
    ensure(v2.iter().flat_map(|v| &v.findings).count() == 6, || "expected 6 findings without init".into())?;
    let took = within(Duration::from_secs(1), started)?;
    Ok(format!("5 findings on PBEKeySpec line {ctor_line}; +1 INCOMPLETE_ORDER on Cipher without init ({took:.2?})"))
}

fn dfa_oracle() -> Result<String, String> {
    let started = Instant::now();
    let defaults = common::dfa::check_default_patterns(7, 500);
    let (random, positives) = common::dfa::check_random_patterns(0x5eed, 200, 60);
    let pairs = defaults + random;
    ensure(pairs >= 10_000, || format!("only {pairs} pairs"))?;
    let took = within(Duration::from_secs(30), started)?;
    Ok(format!("{pairs} pairs ({positives} accepted), 0 mismatches ({took:.2?})"))
}

fn search_oracle() -> Result<String, String> {
    let started = Instant::now();
    let (queries, nonempty, fallbacks) = common::scan::check_queries(42, 1000);
    common::scan::check_paging(9);
    ensure(nonempty > 0 && fallbacks > 0, || "generator never hit results or fallback".into())?;
    let took = within(Duration::from_secs(60), started)?;
    Ok(format!("{queries} queries, {nonempty} non-empty, {fallbacks} fallbacks, 0 mismatches ({took:.2?})"))
}

fn ranking() -> Result<String, String> {
    let s = proximity_score([(10, "m"), (12, "m"), (14, "m")]);
    ensure(s.same_method_fraction == 1.0 && (s.line_stddev - 1.6330).abs() < 1e-4, || format!("{s:?}"))?;
    let mut rng = StdRng::seed_from_u64(11);
    for round in 0..500 {
        let docs: Vec<ExampleDoc> = (0..rng.random_range(0..30))
            .map(|i| ExampleDoc {
                key: format!("k{i:02}"),
                project_id: "p".into(),
                matched_usages: Vec::new(),
                score: Score {
                    same_method_fraction: f64::from(rng.random_range(0..4u8)) / 3.0,
                    line_stddev: f64::from(rng.random_range(0..3u8)),
                },
                fallback_mixed: false,
                dedup_signature: Vec::new(),
                duplicate: false,
            })
            .collect();
        let ranked = rank_examples(docs.clone());
        let mut shuffled = docs.clone();
        shuffled.reverse();
        let keys = |v: &[ExampleDoc]| v.iter().map(|d| d.key.clone()).collect::<Vec<_>>();
        let a: BTreeSet<_> = keys(&docs).into_iter().collect();
        let b: BTreeSet<_> = keys(&ranked).into_iter().collect();
        ensure(a == b && ranked.len() == docs.len(), || format!("round {round}: not a permutation"))?;
        ensure(keys(&rank_examples(shuffled)) == keys(&ranked), || format!("round {round}: order depends on input"))?;
        for w in ranked.windows(2) {
            let (x, y) = (&w[0], &w[1]);
            let ok = x.score.same_method_fraction > y.score.same_method_fraction
                || (x.score.same_method_fraction == y.score.same_method_fraction
                    && (x.score.line_stddev < y.score.line_stddev
                        || (x.score.line_stddev == y.score.line_stddev && x.key < y.key)));
            ensure(ok, || format!("round {round}: {} before {}", x.key, y.key))?;
        }
    }
    Ok(format!("proximity = ({}, {:.4}); 500 random rankings are total and input-independent", s.same_method_fraction, s.line_stddev))
}

fn table_one() -> Result<String, String> {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = tmp.path().join("table1.jsonl");
    common::brute::table_store().save_as(&path).map_err(|e| e.to_string())?;
    let store = Store::open(&path).map_err(|e| e.to_string())?;
    let s = store.stats_summary();
    let got = (s.projects_secure, s.projects_buggy, s.projects_total, s.usages_secure, s.usages_buggy, s.usages_total);
    ensure(got == (642, 1682, 2324, 3263, 5897, 9160), || format!("{got:?}"))?;
    common::brute::close(&s, &common::brute::brute(&store));
    let mut rng = StdRng::seed_from_u64(3);
    for _ in 0..200 {
        let r = common::synth::random_store(&mut rng, 50);
        common::brute::close(&r.stats_summary(), &common::brute::brute(&r));
    }
    Ok("projects 642/1682/2324, usages 3263/5897/9160; 200 random stores match brute force".into())
}

fn pipeline() -> Result<String, String> {
    let started = Instant::now();
    let dir = common::corpus_copy();
    let store_path = dir.path().join("store.jsonl");
    let out = dir.path().join("out");
    let bin = env!("CARGO_BIN_EXE_jcalens");
    let run = |args: &[&str]| -> Result<String, String> {
        let o = Command::new(bin).arg("--store").arg(&store_path).args(args).output().map_err(|e| e.to_string())?;
        ensure(o.status.success(), || format!("{args:?}: {}", String::from_utf8_lossy(&o.stderr)))?;
        Ok(String::from_utf8_lossy(&o.stdout).into_owned())
    };
    run(&["ingest", "--corpus", dir.path().to_str().unwrap()])?;
    run(&["analyze", "--pending", "--out", out.to_str().unwrap()])?;

    let store = Store::open(&store_path).map_err(|e| e.to_string())?;
    let count = |s| store.projects().filter(|p| p.status == s).count();
    let statuses = (count(ProjectStatus::Analyzed), count(ProjectStatus::SkippedDuplicate), count(ProjectStatus::SkippedUnparseable));
    ensure(statuses == (8, 1, 1), || format!("statuses {statuses:?}"))?;

    let mut got: Vec<_> = store
        .usages()
        .map(|u| {
            let mut c: Vec<_> = u.findings.iter().map(|f| f.category).collect();
            c.sort();
            (u.file.clone(), u.api_class.clone(), u.line, c)
        })
        .collect();
    got.sort();
    let mut want: Vec<_> = common::LABELS
        .iter()
        .map(|l| {
            let mut c = l.categories.to_vec();
            c.sort();
            (l.file.to_string(), l.api.to_string(), l.line, c)
        })
        .collect();
    want.sort();
    ensure(got == want, || format!("usages differ from hand labels:\n got {got:?}\nwant {want:?}"))?;

    let buggy: BTreeSet<&str> = common::LABELS.iter().filter(|l| !l.categories.is_empty()).map(|l| l.project).collect();
    let issues = std::fs::read_dir(out.join("issues")).map_err(|e| e.to_string())?.count();
    ensure(issues == buggy.len(), || format!("{issues} issue files for {} buggy projects", buggy.len()))?;
    for u in store.usages().filter(|u| !u.secure) {
        let stem: String = u.project_id.chars().map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' }).collect();
        let body = std::fs::read_to_string(out.join("issues").join(format!("{stem}.md"))).map_err(|e| e.to_string())?;
        for f in &u.findings {
            ensure(
                body.contains(f.category.as_str()) && body.contains(&format!("line {}", f.line)) && body.contains(&f.file),
                || format!("issue for {} misses {f:?}", u.project_id),
            )?;
        }
    }
    let took = within(Duration::from_secs(10), started)?;
    Ok(format!("8/1/1 statuses, {} usages match hand labels, {issues} issue reports ({took:.2?})", got.len()))
}

fn no_secondary() -> Result<String, String> {
    // the browser UI is not part of this workspace; nothing here needs node
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    let node_files: Vec<_> = walkdir::WalkDir::new(&root)
        .into_iter()
        .filter_entry(|e| !matches!(e.file_name().to_str(), Some("target" | ".git" | "node_modules")))
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name() == "package.json" || e.path().extension().is_some_and(|x| x == "ts"))
        .map(|e| e.path().display().to_string())
        .collect();
    ensure(node_files.is_empty(), || format!("found {node_files:?}"))?;
    Ok("no secondary component in the build".into())
}

fn main() {
    let started = Instant::now();
    let checks: &[(&str, Check)] = &[
        ("listing-1 golden", listing_golden),
        ("order DFA oracle", dfa_oracle),
        ("search semantics oracle", search_oracle),
        ("ranking determinism", ranking),
        ("table 1 shape", table_one),
        ("pipeline end-to-end", pipeline),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    let total = started.elapsed();
    let last = no_secondary().and_then(|d| {
        ensure(total < Duration::from_secs(120), || format!("suite took {total:?}"))?;
        Ok(format!("{d}; primary checks took {total:.2?}"))
    });
    match last {
        Ok(d) => println!("PASS  primary suite standalone: {d}"),
        Err(why) => {
            failed += 1;
            println!("FAIL  primary suite standalone: {why}");
        }
    }
    println!("{} of {} criteria passed", checks.len() + 1 - failed, checks.len() + 1);
    if failed > 0 {
        std::process::exit(1);
    }
}
