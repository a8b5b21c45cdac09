use jcalens_core::analyzer::MisuseCategory;
use jcalens_core::search::{dedup_results, rank_examples, ExampleDoc, Score, SignatureEntry};
use proptest::prelude::*;

fn doc(ix: usize, frac: u8, sd: u8, sig: u8) -> ExampleDoc {
    ExampleDoc {
        key: format!("k{ix:03}"),
        project_id: "p".into(),
        matched_usages: Vec::new(),
        score: Score { same_method_fraction: f64::from(frac % 5) / 4.0, line_stddev: f64::from(sd % 4) },
        fallback_mixed: false,
        dedup_signature: (0..sig % 3)
            .map(|i| SignatureEntry { api_class: "Cipher".into(), category: MisuseCategory::WrongConstraint, rule_element: format!("e{i}") })
            .collect(),
        duplicate: false,
    }
}

fn docs() -> impl Strategy<Value = Vec<ExampleDoc>> {
    prop::collection::vec((any::<u8>(), any::<u8>(), any::<u8>()), 0..40)
        .prop_map(|v| v.into_iter().enumerate().map(|(i, (f, s, g))| doc(i, f, s, g)).collect())
}

proptest! {
    #[test]
    fn ranking_is_a_sorted_permutation(input in docs()) {
        let ranked = rank_examples(input.clone());
        let mut a: Vec<_> = input.iter().map(|d| d.key.clone()).collect();
        let mut b: Vec<_> = ranked.iter().map(|d| d.key.clone()).collect();
        a.sort();
        b.sort();
        prop_assert_eq!(a, b);
        for w in ranked.windows(2) {
            let (x, y) = (&w[0].score, &w[1].score);
            prop_assert!(x.same_method_fraction > y.same_method_fraction
                || (x.same_method_fraction == y.same_method_fraction && x.line_stddev <= y.line_stddev));
        }
        // input order does not matter
        let mut rev = input.clone();
        rev.reverse();
        prop_assert_eq!(rank_examples(rev), ranked);
    }

    #[test]
    fn dedup_splits_without_loss(input in docs(), cap in 1usize..4) {
        let ranked = rank_examples(input);
        let (kept, dropped) = dedup_results(ranked.clone(), cap);
        prop_assert_eq!(kept.len() + dropped.len(), ranked.len());
        let mut per = std::collections::BTreeMap::new();
        for d in &kept {
            if !d.dedup_signature.is_empty() {
                *per.entry(d.dedup_signature.clone()).or_insert(0) += 1;
            }
        }
        prop_assert!(per.values().all(|&n| n <= cap));
        for d in &dropped {
            prop_assert!(!d.dedup_signature.is_empty());
            prop_assert_eq!(per[&d.dedup_signature], cap);
        }
        // kept keeps rank order
        let pos = |k: &str| ranked.iter().position(|d| d.key == k).unwrap();
        for w in kept.windows(2) {
            prop_assert!(pos(&w[0].key) < pos(&w[1].key));
        }
    }
}
