//! Backtracking matcher over pattern trees built here, never through the
//! crate's own pattern parser.

use jcalens_core::rules::{compile_order, default_rule_pack};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

#[derive(Debug, Clone)]
pub enum Re {
    L(&'static str),
    Cat(Vec<Re>),
    Alt(Vec<Re>),
    Star(Box<Re>),
    Plus(Box<Re>),
    Opt(Box<Re>),
}

use Re::*;

pub fn render(r: &Re) -> String {
    match r {
        L(l) => l.to_string(),
        Cat(xs) => format!("({})", xs.iter().map(render).collect::<Vec<_>>().join(" ")),
        Alt(xs) => format!("({})", xs.iter().map(render).collect::<Vec<_>>().join(" | ")),
        Star(x) => format!("({})*", render(x)),
        Plus(x) => format!("({})+", render(x)),
        Opt(x) => format!("({})?", render(x)),
    }
}

/// Every position reachable after matching `r` from `at`.
fn ends(r: &Re, w: &[&str], at: usize) -> Vec<usize> {
    let mut out = match r {
        L(l) => {
            if w.get(at) == Some(l) {
                vec![at + 1]
            } else {
                vec![]
            }
        }
        Cat(xs) => {
            let mut cur = vec![at];
            for x in xs {
                cur = cur.iter().flat_map(|&p| ends(x, w, p)).collect();
                cur.sort();
                cur.dedup();
            }
            cur
        }
        Alt(xs) => xs.iter().flat_map(|x| ends(x, w, at)).collect(),
        Opt(x) => {
            let mut v = ends(x, w, at);
            v.push(at);
            v
        }
        Star(x) | Plus(x) => {
            let mut seen = if matches!(r, Star(_)) { vec![at] } else { vec![] };
            let mut frontier = ends(x, w, at);
            while let Some(p) = frontier.pop() {
                if !seen.contains(&p) {
                    seen.push(p);
                    frontier.extend(ends(x, w, p));
                }
            }
            seen
        }
    };
    out.sort();
    out.dedup();
    out
}

pub fn matches(r: &Re, w: &[&str]) -> bool {
    ends(r, w, 0).contains(&w.len())
}

fn default_trees() -> Vec<(&'static str, Re)> {
    vec![
        ("Cipher", Cat(vec![L("getInstance"), L("init"), Star(Box::new(L("update"))), L("doFinal")])),
        ("Mac", Cat(vec![L("getInstance"), L("init"), Star(Box::new(L("update"))), L("doFinal")])),
        ("MessageDigest", Cat(vec![L("getInstance"), Star(Box::new(L("update"))), L("digest")])),
        ("PBEKeySpec", Cat(vec![L("<init>"), L("clearPassword")])),
        ("SecretKeyFactory", Cat(vec![L("getInstance"), Plus(Box::new(L("generateSecret")))])),
        ("SecretKeySpec", L("<init>")),
    ]
}

const LABELS: &[&str] = &["a", "b", "c", "d"];

fn gen(rng: &mut StdRng, depth: u32) -> Re {
    if depth == 0 || rng.random_bool(0.3) {
        return L(LABELS[rng.random_range(0..LABELS.len())]);
    }
    let kids = |rng: &mut StdRng| (0..rng.random_range(2..4)).map(|_| gen(rng, depth - 1)).collect();
    match rng.random_range(0..5) {
        0 => Cat(kids(rng)),
        1 => Alt(kids(rng)),
        2 => Star(Box::new(gen(rng, depth - 1))),
        3 => Plus(Box::new(gen(rng, depth - 1))),
        _ => Opt(Box::new(gen(rng, depth - 1))),
    }
}

/// A word from the language, so positives are well represented.
fn sample(r: &Re, rng: &mut StdRng, out: &mut Vec<&'static str>) {
    match r {
        L(l) => out.push(l),
        Cat(xs) => xs.iter().for_each(|x| sample(x, rng, out)),
        Alt(xs) => sample(&xs[rng.random_range(0..xs.len())], rng, out),
        Opt(x) => {
            if rng.random_bool(0.5) {
                sample(x, rng, out)
            }
        }
        Star(x) | Plus(x) => {
            let min = usize::from(matches!(r, Plus(_)));
            for _ in 0..rng.random_range(min..=min + 2) {
                sample(x, rng, out)
            }
        }
    }
}

pub const MAX_WORD: usize = 8;

fn words(r: &Re, alphabet: &[&'static str], rng: &mut StdRng, n: usize) -> Vec<Vec<&'static str>> {
    (0..n)
        .map(|i| {
            let mut w = Vec::new();
            if i % 2 == 0 {
                // words stay within MAX_WORD symbols
                for _ in 0..20 {
                    w.clear();
                    sample(r, rng, &mut w);
                    if w.len() <= MAX_WORD {
                        break;
                    }
                }
                w.truncate(MAX_WORD);
                // sometimes perturb a positive into a near miss
                if !w.is_empty() && rng.random_bool(0.3) {
                    let k = rng.random_range(0..w.len());
                    w[k] = alphabet[rng.random_range(0..alphabet.len())];
                }
            } else {
                for _ in 0..rng.random_range(0..=MAX_WORD) {
                    w.push(alphabet[rng.random_range(0..alphabet.len())]);
                }
            }
            w
        })
        .collect()
}

/// Shipped patterns against hand-built trees. Returns the number of words checked.
pub fn check_default_patterns(seed: u64, words_per_rule: usize) -> usize {
    let pack = default_rule_pack();
    let mut rng = StdRng::seed_from_u64(seed);
    let mut checked = 0;
    for (api, tree) in default_trees() {
        let dfa = &pack.get(api).unwrap().order;
        // the rendered tree must mean the same as the shipped pattern
        let rendered = compile_order(&render(&tree)).unwrap();
        let alphabet = ["getInstance", "init", "update", "doFinal", "digest", "<init>", "clearPassword", "generateSecret", "foreign"];
        for w in words(&tree, &alphabet, &mut rng, words_per_rule) {
            assert!(w.len() <= MAX_WORD);
            let want = matches(&tree, &w);
            assert_eq!(dfa.accepts(w.iter().copied()), want, "{api} {w:?}");
            assert_eq!(rendered.accepts(w.iter().copied()), want, "{api} rendered {w:?}");
            checked += 1;
        }
    }
    checked
}

/// Generated patterns. Returns (pairs, accepted pairs).
pub fn check_random_patterns(seed: u64, patterns: usize, words_per_pattern: usize) -> (usize, usize) {
    let mut rng = StdRng::seed_from_u64(seed);
    let alphabet = ["a", "b", "c", "d", "e"];
    let (mut pairs, mut positives) = (0, 0);
    for _ in 0..patterns {
        let tree = gen(&mut rng, 4);
        let text = render(&tree);
        let dfa = compile_order(&text).unwrap_or_else(|e| panic!("{text}: {e}"));
        for w in words(&tree, &alphabet, &mut rng, words_per_pattern) {
            assert!(w.len() <= MAX_WORD);
            let want = matches(&tree, &w);
            assert_eq!(dfa.accepts(w.iter().copied()), want, "{text} on {w:?}");
            let last = *dfa.run(w.iter().copied()).last().unwrap();
            assert_eq!(dfa.is_accepting(last), want);
            pairs += 1;
            positives += usize::from(want);
        }
    }
    (pairs, positives)
}
