//! Order patterns over call-event labels and their compilation to total DFAs.
//!
//! A pattern is a whitespace-separated regular expression whose atoms are
//! event labels (`getInstance`, `<init>`, ...). Supported operators are
//! concatenation, `|`, `*`, `+`, `?` and parenthesised groups.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PatternError {
    #[error("empty pattern")]
    Empty,
    #[error("unbalanced group at token {0}")]
    UnbalancedGroup(usize),
    #[error("empty alternative at token {0}")]
    EmptyAlternative(usize),
    #[error("operator '{op}' has no operand at token {pos}")]
    DanglingOperator { op: char, pos: usize },
}

/// Parsed form of an order pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PatternAst {
    Label(String),
    Concat(Vec<PatternAst>),
    Alt(Vec<PatternAst>),
    Star(Box<PatternAst>),
    Plus(Box<PatternAst>),
    Optional(Box<PatternAst>),
}

impl PatternAst {
    pub fn labels(&self, out: &mut BTreeSet<String>) {
        match self {
            PatternAst::Label(l) => {
                out.insert(l.clone());
            }
            PatternAst::Concat(items) | PatternAst::Alt(items) => {
                items.iter().for_each(|i| i.labels(out));
            }
            PatternAst::Star(inner) | PatternAst::Plus(inner) | PatternAst::Optional(inner) => {
                inner.labels(out)
            }
        }
    }
}

impl fmt::Display for PatternAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PatternAst::Label(l) => f.write_str(l),
            PatternAst::Concat(items) => {
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    match item {
                        PatternAst::Alt(_) => write!(f, "({item})")?,
                        _ => write!(f, "{item}")?,
                    }
                }
                Ok(())
            }
            PatternAst::Alt(items) => {
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" | ")?;
                    }
                    write!(f, "{item}")?;
                }
                Ok(())
            }
            PatternAst::Star(inner) => write_postfix(f, inner, '*'),
            PatternAst::Plus(inner) => write_postfix(f, inner, '+'),
            PatternAst::Optional(inner) => write_postfix(f, inner, '?'),
        }
    }
}

fn write_postfix(f: &mut fmt::Formatter<'_>, inner: &PatternAst, op: char) -> fmt::Result {
    match inner {
        PatternAst::Label(_) => write!(f, "{inner}{op}"),
        _ => write!(f, "({inner}){op}"),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Label(String),
    Open,
    Close,
    Bar,
    Star,
    Plus,
    Quest,
}

fn tokenize(pattern: &str) -> Vec<Tok> {
    let mut toks = Vec::new();
    let mut cur = String::new();
    let flush = |cur: &mut String, toks: &mut Vec<Tok>| {
        if !cur.is_empty() {
            toks.push(Tok::Label(std::mem::take(cur)));
        }
    };
    for ch in pattern.chars() {
        let op = match ch {
            '(' => Some(Tok::Open),
            ')' => Some(Tok::Close),
            '|' => Some(Tok::Bar),
            '*' => Some(Tok::Star),
            '+' => Some(Tok::Plus),
            '?' => Some(Tok::Quest),
            _ => None,
        };
        if let Some(op) = op {
            flush(&mut cur, &mut toks);
            toks.push(op);
        } else if ch.is_whitespace() {
            flush(&mut cur, &mut toks);
        } else {
            cur.push(ch);
        }
    }
    flush(&mut cur, &mut toks);
    toks
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn alt(&mut self) -> Result<PatternAst, PatternError> {
        let mut branches = vec![self.concat()?];
        while self.toks.get(self.pos) == Some(&Tok::Bar) {
            self.pos += 1;
            branches.push(self.concat()?);
        }
        Ok(if branches.len() == 1 {
            branches.pop().unwrap()
        } else {
            PatternAst::Alt(branches)
        })
    }

    fn concat(&mut self) -> Result<PatternAst, PatternError> {
        let start = self.pos;
        let mut items = Vec::new();
        while let Some(tok) = self.toks.get(self.pos) {
            match tok {
                Tok::Bar | Tok::Close => break,
                _ => items.push(self.repeat()?),
            }
        }
        match items.len() {
            0 => Err(PatternError::EmptyAlternative(start)),
            1 => Ok(items.pop().unwrap()),
            _ => Ok(PatternAst::Concat(items)),
        }
    }

    fn repeat(&mut self) -> Result<PatternAst, PatternError> {
        let mut node = self.atom()?;
        while let Some(tok) = self.toks.get(self.pos) {
            node = match tok {
                Tok::Star => PatternAst::Star(Box::new(node)),
                Tok::Plus => PatternAst::Plus(Box::new(node)),
                Tok::Quest => PatternAst::Optional(Box::new(node)),
                _ => break,
            };
            self.pos += 1;
        }
        Ok(node)
    }

    fn atom(&mut self) -> Result<PatternAst, PatternError> {
        let pos = self.pos;
        match self.toks.get(pos).cloned() {
            Some(Tok::Label(l)) => {
                self.pos += 1;
                Ok(PatternAst::Label(l))
            }
            Some(Tok::Open) => {
                self.pos += 1;
                let inner = self.alt()?;
                if self.toks.get(self.pos) != Some(&Tok::Close) {
                    return Err(PatternError::UnbalancedGroup(pos));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(Tok::Star) => Err(PatternError::DanglingOperator { op: '*', pos }),
            Some(Tok::Plus) => Err(PatternError::DanglingOperator { op: '+', pos }),
            Some(Tok::Quest) => Err(PatternError::DanglingOperator { op: '?', pos }),
            Some(Tok::Close) => Err(PatternError::UnbalancedGroup(pos)),
            Some(Tok::Bar) | None => Err(PatternError::EmptyAlternative(pos)),
        }
    }
}

pub fn parse_pattern(pattern: &str) -> Result<PatternAst, PatternError> {
    let toks = tokenize(pattern);
    if toks.is_empty() {
        return Err(PatternError::Empty);
    }
    let mut p = Parser { toks, pos: 0 };
    let ast = p.alt()?;
    if p.pos != p.toks.len() {
        // only a stray ')' can stop the top-level alternation early
        return Err(PatternError::UnbalancedGroup(p.pos));
    }
    Ok(ast)
}

// Thompson construction. Each NFA state has epsilon edges and at most one
// labelled edge.
#[derive(Default)]
struct Nfa {
    eps: Vec<Vec<usize>>,
    edge: Vec<Option<(usize, usize)>>,
}

impl Nfa {
    fn state(&mut self) -> usize {
        self.eps.push(Vec::new());
        self.edge.push(None);
        self.eps.len() - 1
    }

    /// Returns (entry, exit) of the fragment for `ast`.
    fn build(&mut self, ast: &PatternAst, label_ix: &BTreeMap<&str, usize>) -> (usize, usize) {
        match ast {
            PatternAst::Label(l) => {
                let (a, b) = (self.state(), self.state());
                self.edge[a] = Some((label_ix[l.as_str()], b));
                (a, b)
            }
            PatternAst::Concat(items) => {
                let mut frags = items.iter().map(|i| self.build(i, label_ix)).collect::<Vec<_>>();
                for w in 1..frags.len() {
                    let (prev_exit, next_entry) = (frags[w - 1].1, frags[w].0);
                    self.eps[prev_exit].push(next_entry);
                }
                let first = frags.first_mut().unwrap().0;
                (first, frags.last().unwrap().1)
            }
            PatternAst::Alt(items) => {
                let (a, b) = (self.state(), self.state());
                for item in items {
                    let (s, e) = self.build(item, label_ix);
                    self.eps[a].push(s);
                    self.eps[e].push(b);
                }
                (a, b)
            }
            PatternAst::Star(inner) | PatternAst::Plus(inner) | PatternAst::Optional(inner) => {
                let (a, b) = (self.state(), self.state());
                let (s, e) = self.build(inner, label_ix);
                self.eps[a].push(s);
                self.eps[e].push(b);
                if !matches!(ast, PatternAst::Plus(_)) {
                    self.eps[a].push(b);
                }
                if !matches!(ast, PatternAst::Optional(_)) {
                    self.eps[e].push(s);
                }
                (a, b)
            }
        }
    }

    fn closure(&self, seed: impl IntoIterator<Item = usize>) -> BTreeSet<usize> {
        let mut set = BTreeSet::new();
        let mut stack: Vec<usize> = seed.into_iter().collect();
        while let Some(s) = stack.pop() {
            if set.insert(s) {
                stack.extend(self.eps[s].iter().copied());
            }
        }
        set
    }
}

/// Deterministic automaton with a total transition function.
///
/// State `dead` is absorbing and non-accepting. Labels outside the alphabet
/// lead to the dead state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderAutomaton {
    alphabet: Vec<String>,
    /// `transitions[state][label index]`
    transitions: Vec<Vec<usize>>,
    accepting: Vec<bool>,
    start: usize,
    dead: usize,
}

impl OrderAutomaton {
    pub fn alphabet(&self) -> &[String] {
        &self.alphabet
    }

    pub fn in_alphabet(&self, label: &str) -> bool {
        self.label_index(label).is_some()
    }

    fn label_index(&self, label: &str) -> Option<usize> {
        self.alphabet.binary_search_by(|l| l.as_str().cmp(label)).ok()
    }

    pub fn state_count(&self) -> usize {
        self.transitions.len()
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn dead_state(&self) -> usize {
        self.dead
    }

    pub fn is_accepting(&self, state: usize) -> bool {
        self.accepting[state]
    }

    pub fn step(&self, state: usize, label: &str) -> usize {
        match self.label_index(label) {
            Some(ix) => self.transitions[state][ix],
            None => self.dead,
        }
    }

    /// States visited while reading `word`, starting with the start state.
    pub fn run<'a, I>(&self, word: I) -> Vec<usize>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut path = vec![self.start];
        let mut state = self.start;
        for label in word {
            state = self.step(state, label);
            path.push(state);
        }
        path
    }

    pub fn accepts<'a, I>(&self, word: I) -> bool
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut state = self.start;
        for label in word {
            state = self.step(state, label);
            if state == self.dead {
                return false;
            }
        }
        self.accepting[state]
    }

    /// Labels that can legally open a trace.
    pub fn initial_labels(&self) -> impl Iterator<Item = &str> {
        self.alphabet
            .iter()
            .enumerate()
            .filter(|(ix, _)| self.transitions[self.start][*ix] != self.dead)
            .map(|(_, l)| l.as_str())
    }
}

pub fn compile_order(pattern: &str) -> Result<OrderAutomaton, PatternError> {
    let ast = parse_pattern(pattern)?;
    Ok(compile_ast(&ast))
}

pub fn compile_ast(ast: &PatternAst) -> OrderAutomaton {
    let mut labels = BTreeSet::new();
    ast.labels(&mut labels);
    let alphabet: Vec<String> = labels.into_iter().collect();
    let label_ix: BTreeMap<&str, usize> =
        alphabet.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();

    let mut nfa = Nfa::default();
    let (entry, exit) = nfa.build(ast, &label_ix);

    // subset construction; the empty set is the dead state
    let mut ids: BTreeMap<BTreeSet<usize>, usize> = BTreeMap::new();
    let mut sets: Vec<BTreeSet<usize>> = Vec::new();
    let mut transitions: Vec<Vec<usize>> = Vec::new();
    let mut queue = VecDeque::new();

    let mut intern = |set: BTreeSet<usize>,
                      sets: &mut Vec<BTreeSet<usize>>,
                      queue: &mut VecDeque<usize>|
     -> usize {
        if let Some(&id) = ids.get(&set) {
            return id;
        }
        let id = sets.len();
        ids.insert(set.clone(), id);
        sets.push(set);
        queue.push_back(id);
        id
    };

    let start = intern(nfa.closure([entry]), &mut sets, &mut queue);
    while let Some(id) = queue.pop_front() {
        let mut row = Vec::with_capacity(alphabet.len());
        for ix in 0..alphabet.len() {
            let targets = sets[id]
                .iter()
                .filter_map(|&s| match nfa.edge[s] {
                    Some((l, t)) if l == ix => Some(t),
                    _ => None,
                })
                .collect::<Vec<_>>();
            let next = nfa.closure(targets);
            row.push(intern(next, &mut sets, &mut queue));
        }
        if transitions.len() <= id {
            transitions.resize(id + 1, Vec::new());
        }
        transitions[id] = row;
    }

    let dead = match ids.get(&BTreeSet::new()) {
        Some(&d) => d,
        None => {
            let d = sets.len();
            sets.push(BTreeSet::new());
            transitions.push(vec![d; alphabet.len()]);
            d
        }
    };
    let accepting = sets.iter().map(|s| s.contains(&exit)).collect();

    OrderAutomaton { alphabet, transitions, accepting, start, dead }
}
