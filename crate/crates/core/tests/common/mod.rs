#![allow(dead_code)]

pub mod brute;
pub mod dfa;
pub mod scan;

use std::path::{Path, PathBuf};

use jcalens_core::analyzer::MisuseCategory::{self, *};

pub fn corpus() -> PathBuf {
    // also valid when included from the server crate
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/corpus")
}

/// Copies the fixture corpus so tests can write blame/issue files freely.
pub fn corpus_copy() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for e in walkdir::WalkDir::new(corpus()) {
        let e = e.unwrap();
        let rel = e.path().strip_prefix(corpus()).unwrap();
        let to = dir.path().join(rel);
        if e.file_type().is_dir() {
            std::fs::create_dir_all(&to).unwrap();
        } else {
            std::fs::copy(e.path(), &to).unwrap();
        }
    }
    dir
}

pub struct Label {
    pub project: &'static str,
    pub file: &'static str,
    pub api: &'static str,
    pub line: u32,
    pub categories: &'static [MisuseCategory],
}

/// Hand-labeled usages of the fixture corpus.
pub const LABELS: &[Label] = &[
    Label { project: "acme/vault", file: "p01-listing/src/main/java/Encryptor.java", api: "PBEKeySpec", line: 4,
        categories: &[ForbiddenCall, WrongType, WrongObject, WrongConstraint, IncompleteOperation] },
    Label { project: "acme/vault", file: "p01-listing/src/main/java/Encryptor.java", api: "SecretKeyFactory", line: 6, categories: &[] },
    Label { project: "acme/vault", file: "p01-listing/src/main/java/Encryptor.java", api: "SecretKeySpec", line: 8, categories: &[] },
    Label { project: "acme/vault", file: "p01-listing/src/main/java/Encryptor.java", api: "Cipher", line: 10, categories: &[] },
    Label { project: "acme/hasher", file: "p02-digest/src/Hasher.java", api: "MessageDigest", line: 5, categories: &[] },
    Label { project: "old/checksums", file: "p03-legacy-hash/src/util/Checksums.java", api: "MessageDigest", line: 7, categories: &[WrongConstraint] },
    Label { project: "old/checksums", file: "p03-legacy-hash/src/util/Checksums.java", api: "MessageDigest", line: 13, categories: &[IncompleteOperation] },
    Label { project: "shop/payments", file: "p04-ecb/src/Payments.java", api: "Cipher", line: 7, categories: &[WrongConstraint] },
    Label { project: "shop/payments", file: "p04-ecb/src/Payments.java", api: "Mac", line: 13, categories: &[] },
    Label { project: "net/tunnel", file: "p05-mixed/src/Tunnel.java", api: "Cipher", line: 8, categories: &[] },
    Label { project: "net/tunnel", file: "p05-mixed/src/Tunnel.java", api: "Mac", line: 11, categories: &[WrongConstraint] },
    Label { project: "auth/kdf", file: "p06-pbe/src/RandomSalt.java", api: "PBEKeySpec", line: 10, categories: &[] },
    Label { project: "auth/kdf", file: "p06-pbe/src/RandomSalt.java", api: "SecretKeyFactory", line: 12, categories: &[] },
    Label { project: "tools/box", file: "p07-multi/src/box/Hash.java", api: "MessageDigest", line: 7, categories: &[] },
    Label { project: "tools/box", file: "p07-multi/src/box/Keys.java", api: "SecretKeySpec", line: 8, categories: &[WrongObject, WrongConstraint] },
];

pub mod synth {
    use jcalens_core::analyzer::{Finding, MisuseCategory, TraceVerdict};
    use jcalens_core::extract::ObjectTrace;
    use jcalens_core::store::{BlameInfo, FileUsages, ProjectRecord, ProjectStatus, Store};
    use rand::rngs::StdRng;
    use rand::Rng;

    pub const APIS: &[&str] = &["Cipher", "Mac", "MessageDigest", "SecretKeySpec", "PBEKeySpec", "SecretKeyFactory"];
    const CATS: &[MisuseCategory] = &[MisuseCategory::WrongConstraint, MisuseCategory::IncompleteOrder, MisuseCategory::WrongObject];
    const METHODS: &[&str] = &["run", "init", "helper"];

    pub fn verdict(
        file: &str,
        ix: usize,
        api: &str,
        line: u32,
        method: &str,
        bug: Option<(MisuseCategory, &str)>,
    ) -> TraceVerdict {
        let object_id = format!("{method}:{api}@{line}:{ix}");
        let findings: Vec<Finding> = bug
            .into_iter()
            .map(|(category, element)| Finding {
                category,
                api_class: api.into(),
                rule_element: element.into(),
                message: format!("{category} in {api}"),
                file: file.into(),
                line,
                trace_ref: object_id.clone(),
            })
            .collect();
        TraceVerdict {
            secure: findings.is_empty(),
            findings,
            trace: ObjectTrace {
                object_id,
                api_class: api.into(),
                allocation_line: line,
                events: Vec::new(),
                file: file.into(),
                enclosing_method: method.into(),
            },
        }
    }

    pub fn project(store: &mut Store, id: &str) {
        store
            .insert_project(ProjectRecord {
                id: id.into(),
                url: format!("https://example.org/{id}"),
                canonical_id: id.into(),
                path: id.into(),
                status: ProjectStatus::Pending,
            })
            .unwrap();
    }

    /// Random store with up to `max_projects` projects; some buggy usages
    /// are marked false positive.
    pub fn random_store(rng: &mut StdRng, max_projects: usize) -> Store {
        let mut store = Store::in_memory();
        let n = rng.random_range(1..=max_projects);
        for p in 0..n {
            let pid = format!("p{p:02}");
            project(&mut store, &pid);
            let mut files = Vec::new();
            for f in 0..rng.random_range(0..4) {
                let key = format!("{pid}/src/F{f}.java");
                let mut usages = Vec::new();
                for ix in 0..rng.random_range(0..6) {
                    let api = APIS[rng.random_range(0..APIS.len())];
                    let bug = rng
                        .random_bool(0.4)
                        .then(|| (CATS[rng.random_range(0..CATS.len())], if rng.random_bool(0.5) { "order" } else { "x" }));
                    let blame = rng.random_bool(0.8).then(|| BlameInfo {
                        author: format!("dev{}", rng.random_range(0..4)),
                        email: String::new(),
                        commit_time: rng.random_range(0..5) * 1000,
                    });
                    let v = verdict(&key, ix, api, rng.random_range(1..120), METHODS[rng.random_range(0..METHODS.len())], bug);
                    usages.push((v, blame));
                }
                files.push(FileUsages { key, source: String::new(), usages });
            }
            store.put_usages(&pid, files).unwrap();
            store.set_status(&pid, ProjectStatus::Analyzed).unwrap();
        }
        let buggy: Vec<String> = store.usages().filter(|u| !u.secure).map(|u| u.usage_id.clone()).collect();
        for id in buggy {
            if rng.random_bool(0.15) {
                store.mark_false_positive(&id).unwrap();
            }
        }
        store
    }
}
